//! Repeated stratified 75/25 split, train, test protocol.

use std::io::Write;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureTable, ScreenBlock};
use crate::learn::{fit_table, is_collusive, Hyperparameters};
use crate::rng::{derive_seed, rng_from_seed};
use crate::spec::CartelType;
use crate::tender::Label;

pub const TRAIN_FRACTION: f64 = 0.75;
pub const DEFAULT_REPETITIONS: usize = 10;
/// Smallest class size [`split`] accepts.
pub const MIN_CLASS_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(truth: &[bool], predicted: &[bool]) -> Self {
        let mut c = Confusion::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    pub fn recall(&self) -> f64 {
        self.tp as f64 / (self.tp + self.fn_) as f64
    }

    pub fn specificity(&self) -> f64 {
        self.tn as f64 / (self.tn + self.fp) as f64
    }
}

/// Stratified split of row indices. Each class keeps round(fraction * size)
/// rows (halves round up) for training. Both index lists are ascending.
pub fn split(labels: &[Label], seed: u64, fraction: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = rng_from_seed(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [Label::Collusive, Label::Competitive] {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let c = members.len();
        if c < MIN_CLASS_SIZE {
            return Err(Error::Dataset(format!(
                "{class} class has {c} tenders; a split needs at least {MIN_CLASS_SIZE}"
            )));
        }
        let k = (fraction * c as f64 + 0.5).floor() as usize;
        if k == 0 || k >= c {
            return Err(Error::Dataset(format!(
                "train fraction {fraction} leaves an empty partition for the {class} class"
            )));
        }
        let mut chosen = vec![false; c];
        for i in sample(&mut rng, c, k) {
            chosen[i] = true;
        }
        for (pos, &i) in members.iter().enumerate() {
            if chosen[pos] {
                train.push(i);
            } else {
                test.push(i);
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Repetition {
    pub seed: u64,
    pub confusion: Confusion,
    pub accuracy: f64,
    pub recall: f64,
    pub specificity: f64,
}

/// One split/fit/classify round on an already block-selected table. The
/// split uses `derive_seed(seed, 0)` and the ensemble `derive_seed(seed, 1)`.
pub fn evaluate_table(table: &FeatureTable, hp: &Hyperparameters, seed: u64) -> Result<Repetition> {
    let (train, test) = split(&table.labels, derive_seed(seed, 0), TRAIN_FRACTION)?;
    let model = fit_table(&table.subset(&train), hp, derive_seed(seed, 1))?;
    let test_table = table.subset(&test);
    let predicted: Vec<bool> = model
        .predict_table(&test_table)?
        .into_iter()
        .map(is_collusive)
        .collect();
    let truth: Vec<bool> = test_table.labels.iter().map(|l| *l == Label::Collusive).collect();
    let confusion = Confusion::from_predictions(&truth, &predicted);
    Ok(Repetition {
        seed,
        confusion,
        accuracy: confusion.accuracy(),
        recall: confusion.recall(),
        specificity: confusion.specificity(),
    })
}

pub fn evaluate_once(
    features: &FeatureTable,
    block: ScreenBlock,
    cartel: CartelType,
    hp: &Hyperparameters,
    seed: u64,
) -> Result<Repetition> {
    evaluate_table(&features.block(block, cartel)?, hp, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub case: String,
    pub cartel_type: CartelType,
    pub block: ScreenBlock,
    pub master_seed: u64,
    pub repetitions: Vec<Repetition>,
    pub accuracy: f64,
    pub recall: f64,
    pub specificity: f64,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

impl EvaluationReport {
    pub fn from_repetitions(
        case: &str,
        cartel_type: CartelType,
        block: ScreenBlock,
        master_seed: u64,
        repetitions: Vec<Repetition>,
    ) -> Self {
        Self {
            case: case.to_string(),
            cartel_type,
            block,
            master_seed,
            accuracy: mean(repetitions.iter().map(|r| r.accuracy)),
            recall: mean(repetitions.iter().map(|r| r.recall)),
            specificity: mean(repetitions.iter().map(|r| r.specificity)),
            repetitions,
        }
    }
}

/// Repetition `r` runs with seed `derive_seed(master_seed, r)`; repetitions
/// may run concurrently and are collected in order.
pub fn repeated_evaluation(
    features: &FeatureTable,
    case: &str,
    block: ScreenBlock,
    cartel: CartelType,
    hp: &Hyperparameters,
    repetitions: usize,
    master_seed: u64,
) -> Result<EvaluationReport> {
    if repetitions == 0 {
        return Err(Error::Input("at least one repetition is required".into()));
    }
    let table = features.block(block, cartel)?;
    let reps = (0..repetitions as u64)
        .into_par_iter()
        .map(|r| evaluate_table(&table, hp, derive_seed(master_seed, r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport::from_repetitions(
        case,
        cartel,
        block,
        master_seed,
        reps,
    ))
}

fn sorted(reports: &[EvaluationReport]) -> Vec<&EvaluationReport> {
    let mut v: Vec<&EvaluationReport> = reports.iter().collect();
    v.sort_by(|a, b| (&a.case, a.cartel_type, a.block).cmp(&(&b.case, b.cartel_type, b.block)));
    v
}

/// Mean metrics, one row per (case, cartel type, block).
pub fn export_report<W: Write>(reports: &[EvaluationReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "case",
        "cartel_type",
        "screen_block",
        "repetitions",
        "accuracy",
        "recall",
        "specificity",
    ])?;
    for r in sorted(reports) {
        w.write_record([
            r.case.clone(),
            r.cartel_type.to_string(),
            r.block.to_string(),
            r.repetitions.len().to_string(),
            r.accuracy.to_string(),
            r.recall.to_string(),
            r.specificity.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Internal(e.to_string()))
}

/// Every repetition's seed, confusion counts and metrics.
pub fn export_repetitions<W: Write>(reports: &[EvaluationReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "case",
        "cartel_type",
        "screen_block",
        "repetition",
        "seed",
        "tp",
        "tn",
        "fp",
        "fn",
        "accuracy",
        "recall",
        "specificity",
    ])?;
    for r in sorted(reports) {
        for (i, rep) in r.repetitions.iter().enumerate() {
            let c = rep.confusion;
            w.write_record([
                r.case.clone(),
                r.cartel_type.to_string(),
                r.block.to_string(),
                i.to_string(),
                rep.seed.to_string(),
                c.tp.to_string(),
                c.tn.to_string(),
                c.fp.to_string(),
                c.fn_.to_string(),
                rep.accuracy.to_string(),
                rep.recall.to_string(),
                rep.specificity.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::Internal(e.to_string()))
}

/// Accuracy in percent, one row per case and cartel type with the MSD,
/// MGP and combined blocks as columns.
pub fn export_accuracy_table<W: Write>(reports: &[EvaluationReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["case", "cartel_type", "msd_screens", "mgp_screens", "combined_screens"])?;
    let mut keys: Vec<(&str, CartelType)> = sorted(reports)
        .iter()
        .map(|r| (r.case.as_str(), r.cartel_type))
        .collect();
    keys.dedup();
    for (case, cartel) in keys {
        let cell = |block: ScreenBlock| {
            reports
                .iter()
                .find(|r| r.case == case && r.cartel_type == cartel && r.block == block)
                .map(|r| format!("{:.2}", 100.0 * r.accuracy))
                .unwrap_or_default()
        };
        let [msd, mgp, comb] = ScreenBlock::for_cartel_type(cartel);
        w.write_record([case.to_string(), cartel.to_string(), cell(msd), cell(mgp), cell(comb)])?;
    }
    w.flush().map_err(|e| Error::Internal(e.to_string()))
}

/// In-sample accuracy of the best one-feature threshold rule (either
/// direction), per column. Missing values take the column median.
pub fn stump_accuracies(table: &FeatureTable) -> Vec<(String, f64)> {
    let y: Vec<bool> = table.labels.iter().map(|l| *l == Label::Collusive).collect();
    let n = y.len();
    let pos_total = y.iter().filter(|v| **v).count();
    (0..table.names.len())
        .map(|j| {
            let mut defined: Vec<f64> = table.rows.iter().filter_map(|r| r[j]).collect();
            defined.sort_by(f64::total_cmp);
            let med = if defined.is_empty() {
                0.0
            } else {
                defined[defined.len() / 2]
            };
            let mut pairs: Vec<(f64, bool)> = table
                .rows
                .iter()
                .map(|r| r[j].unwrap_or(med))
                .zip(y.iter().copied())
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            // "x <= t means competitive": correct = negatives at or below + positives above.
            let mut best = pos_total.max(n - pos_total);
            let (mut neg_below, mut pos_below) = (0, 0);
            for k in 0..n {
                if pairs[k].1 {
                    pos_below += 1;
                } else {
                    neg_below += 1;
                }
                if k + 1 < n && pairs[k + 1].0 == pairs[k].0 {
                    continue;
                }
                let up = neg_below + (pos_total - pos_below);
                best = best.max(up).max(n - up);
            }
            (table.names[j].clone(), best as f64 / n as f64)
        })
        .collect()
}
