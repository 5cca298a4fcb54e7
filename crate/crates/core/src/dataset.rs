//! Assembly of labeled, balanced MSD/MGP datasets.
//!
//! Pipeline: label -> (complete cartels) restrict MSD offers to the cartel
//! units -> drop unlabeled -> MSD duplicate removal -> undersampling -> join
//! each MSD tender with the MGP tender of the same zone and hour. MGP tenders
//! are never restricted or deduplicated.

use std::collections::{HashMap, HashSet};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::spec::{apply_labels, CartelType, Case, DatasetSpec};
use crate::tender::{Label, Tender, Timestamp};

/// One labeled observation: the MSD tender and its same-hour MGP tender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub msd: Tender,
    pub mgp: Tender,
    pub label: Label,
}

/// Tender counts at each processing stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    /// Labeled (collusive or competitive) MSD tenders before processing.
    pub preprocessed: usize,
    pub preprocessed_collusive: usize,
    /// Complete cartels: tenders left without any cartel-unit offer.
    pub dropped_empty: usize,
    pub deduplicated: usize,
    pub sampled: usize,
}

impl Counts {
    pub fn preprocessed_share(&self) -> f64 {
        if self.preprocessed == 0 {
            0.0
        } else {
            self.preprocessed_collusive as f64 / self.preprocessed as f64
        }
    }

    fn add(&mut self, other: &Counts) {
        self.preprocessed += other.preprocessed;
        self.preprocessed_collusive += other.preprocessed_collusive;
        self.dropped_empty += other.dropped_empty;
        self.deduplicated += other.deduplicated;
        self.sampled += other.sampled;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: DatasetSpec,
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub records: Vec<Record>,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn cartel_type(&self) -> CartelType {
        self.provenance.spec.cartel_type
    }

    pub fn labels(&self) -> Vec<Label> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn price_key(t: &Tender) -> Vec<u64> {
    let mut prices = t.prices();
    prices.sort_by(f64::total_cmp);
    // +0.0 for -0.0 so that the two zeros compare equal.
    prices.into_iter().map(|p| (p + 0.0).to_bits()).collect()
}

/// Keeps one tender per distinct offer-price multiset within each label
/// class. The representative is the chronologically first tender; output is
/// in chronological order.
pub fn dedup_msd(tenders: &[Tender]) -> Vec<Tender> {
    let mut order: Vec<&Tender> = tenders.iter().collect();
    order.sort_by(|a, b| (a.timestamp, &a.zone).cmp(&(b.timestamp, &b.zone)));
    let mut seen: HashSet<(Label, Vec<u64>)> = HashSet::new();
    order
        .into_iter()
        .filter(|t| seen.insert((t.label, price_key(t))))
        .cloned()
        .collect()
}

/// Balances classes by keeping every minority-class tender and a seeded
/// uniform subset of the majority class of the same size. Output is in
/// chronological order.
pub fn undersample(tenders: &[Tender], seed: u64) -> Result<Vec<Tender>> {
    let labeled: Vec<&Tender> = tenders.iter().filter(|t| t.label != Label::Unlabeled).collect();
    let (collusive, competitive): (Vec<&Tender>, Vec<&Tender>) =
        labeled.into_iter().partition(|t| t.label == Label::Collusive);
    if collusive.is_empty() || competitive.is_empty() {
        return Err(Error::Dataset(format!(
            "cannot balance {} collusive and {} competitive tenders",
            collusive.len(),
            competitive.len()
        )));
    }
    let (minority, majority) = if collusive.len() <= competitive.len() {
        (collusive, competitive)
    } else {
        (competitive, collusive)
    };
    let mut rng = rng_from_seed(seed);
    let mut picked: Vec<usize> = sample(&mut rng, majority.len(), minority.len()).into_vec();
    picked.sort_unstable();
    let mut out: Vec<Tender> = minority.into_iter().cloned().collect();
    out.extend(picked.into_iter().map(|i| majority[i].clone()));
    out.sort_by(|a, b| (a.timestamp, &a.zone).cmp(&(b.timestamp, &b.zone)));
    Ok(out)
}

/// Keeps only the offers of `units`.
pub fn restrict_to_units(tender: &Tender, units: &[String]) -> Tender {
    let mut t = tender.clone();
    t.offers.retain(|o| units.contains(&o.unit_id));
    t
}

/// Runs the full assembly for one spec (or, for a combined spec, for each
/// component in turn, pooling the results).
pub fn build_dataset(msd: &[Tender], mgp: &[Tender], spec: &DatasetSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    if spec.case == Case::Combined {
        let mut records = Vec::new();
        let mut counts = Counts::default();
        for component in &spec.components {
            let part = build_dataset(msd, mgp, component)?;
            records.extend(part.records);
            counts.add(&part.provenance.counts);
        }
        return Ok(LabeledDataset {
            records,
            provenance: Provenance {
                spec: spec.clone(),
                counts,
            },
        });
    }

    let mut counts = Counts::default();
    let mut labeled: Vec<Tender> = apply_labels(msd, spec)?
        .into_iter()
        .filter(|t| t.label != Label::Unlabeled)
        .collect();
    counts.preprocessed = labeled.len();
    counts.preprocessed_collusive = labeled.iter().filter(|t| t.label == Label::Collusive).count();

    if spec.cartel_type == CartelType::Complete {
        let before = labeled.len();
        labeled = labeled
            .iter()
            .map(|t| restrict_to_units(t, &spec.cartel_units))
            .filter(|t| !t.offers.is_empty())
            .collect();
        counts.dropped_empty = before - labeled.len();
    }

    let deduped = dedup_msd(&labeled);
    counts.deduplicated = deduped.len();
    let sampled = undersample(&deduped, spec.seed)?;
    counts.sampled = sampled.len();

    let mgp_by_slot: HashMap<(Timestamp, &str), &Tender> = mgp.iter().map(|t| (t.slot(), t)).collect();
    let mut missing = Vec::new();
    let mut records = Vec::with_capacity(sampled.len());
    for t in sampled {
        match mgp_by_slot.get(&t.slot()) {
            Some(m) => {
                let mut m = (*m).clone();
                m.label = t.label;
                records.push(Record {
                    label: t.label,
                    msd: t,
                    mgp: m,
                });
            }
            None => missing.push(format!("{} {}", t.zone, t.timestamp)),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Join(missing));
    }
    Ok(LabeledDataset {
        records,
        provenance: Provenance {
            spec: spec.clone(),
            counts,
        },
    })
}
