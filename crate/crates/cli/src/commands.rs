use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use cartelscan_core::dataset::{build_dataset, restrict_to_units, LabeledDataset};
use cartelscan_core::eval::{
    export_accuracy_table, export_repetitions, export_report, repeated_evaluation, EvaluationReport,
};
use cartelscan_core::features::{compute_features, pair_features, FeatureOptions, FeatureTable, ScreenBlock};
use cartelscan_core::figures::{export_hourly_series, MgpMetric};
use cartelscan_core::learn::{fit_table, is_collusive, TrainedEnsemble};
use cartelscan_core::sim::{gen_market, write_market};
use cartelscan_core::spec::{apply_labels, CartelType, Case, DatasetSpec};
use cartelscan_core::stats::{screen_significance_report, write_significance_csv};
use cartelscan_core::tender::{ingest, write_tenders_file, Label, Market, Tender};

use crate::config::Settings;
use crate::{DataArgs, InputError, SingleDataArgs};

pub struct Context {
    pub settings: Settings,
    pub out: PathBuf,
}

struct Loaded {
    spec: DatasetSpec,
    dataset: LabeledDataset,
    features: FeatureTable,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().with_context(|| format!("cannot write {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn load_tenders(path: &Path, market: Market) -> Result<Vec<Tender>> {
    let ing = ingest(path, market)?;
    if !ing.rejected.is_empty() {
        log::warn!("{}: {} rows rejected", path.display(), ing.rejected.len());
    }
    Ok(ing.tenders)
}

fn parse_block(s: &str) -> Result<ScreenBlock> {
    Ok(s.parse::<ScreenBlock>()?)
}

/// Slugs a dataset name for use in a file name.
fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

impl Context {
    fn feature_options(&self, cartel: CartelType) -> FeatureOptions {
        FeatureOptions {
            subgroup_cap: self.settings.run.subgroup_cap,
            ..FeatureOptions::for_cartel_type(cartel)
        }
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn load(&self, msd: &Path, mgp: &Path, specs: &[PathBuf]) -> Result<Vec<Loaded>> {
        let msd = load_tenders(msd, Market::Msd)?;
        let mgp = load_tenders(mgp, Market::Mgp)?;
        specs
            .iter()
            .map(|p| {
                let spec = DatasetSpec::from_file(p)?;
                let dataset = build_dataset(&msd, &mgp, &spec).with_context(|| format!("dataset {}", p.display()))?;
                let features = compute_features(&dataset, &self.feature_options(spec.cartel_type))?;
                println!(
                    "dataset {}: {} tenders ({} collusive)",
                    spec.display_name(),
                    dataset.len(),
                    dataset.count(Label::Collusive)
                );
                Ok(Loaded {
                    spec,
                    dataset,
                    features,
                })
            })
            .collect()
    }

    pub fn ingest(&self, msd: Option<&Path>, mgp: Option<&Path>) -> Result<()> {
        for (path, market, name) in [(msd, Market::Msd, "msd"), (mgp, Market::Mgp, "mgp")] {
            let Some(path) = path else { continue };
            let ing = ingest(path, market)?;
            let offers: usize = ing.tenders.iter().map(|t| t.offers.len()).sum();
            println!(
                "{}: {} tenders, {offers} offers, {} rows rejected",
                path.display(),
                ing.tenders.len(),
                ing.rejected.len()
            );
            let out = self.out_path(&format!("{name}.csv"));
            write_tenders_file(&out, market, &ing.tenders)?;
            println!("wrote {}", out.display());
            let rej = self.out_path(&format!("{name}_rejected.csv"));
            let mut w = csv::Writer::from_writer(create(&rej)?);
            w.write_record(["line", "message"])?;
            for r in &ing.rejected {
                w.write_record([r.line.to_string(), r.message.clone()])?;
            }
            let inner = w
                .into_inner()
                .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", rej.display()))?;
            finish(inner, &rej)?;
        }
        Ok(())
    }

    fn write_counts(&self, loaded: &[Loaded]) -> Result<()> {
        let path = self.out_path("dataset_counts.csv");
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record([
            "dataset",
            "cartel_type",
            "preprocessed",
            "preprocessed_collusive",
            "preprocessed_share",
            "dropped_empty",
            "deduplicated",
            "sampled",
        ])?;
        for l in loaded {
            let c = &l.dataset.provenance.counts;
            w.write_record([
                l.spec.display_name(),
                l.spec.cartel_type.to_string(),
                c.preprocessed.to_string(),
                c.preprocessed_collusive.to_string(),
                format!("{:.4}", c.preprocessed_share()),
                c.dropped_empty.to_string(),
                c.deduplicated.to_string(),
                c.sampled.to_string(),
            ])?;
        }
        let inner = w
            .into_inner()
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
        finish(inner, &path)
    }

    pub fn screens(&self, data: &DataArgs) -> Result<()> {
        let loaded = self.load(&data.msd, &data.mgp, &data.specs)?;
        for l in &loaded {
            let path = self.out_path(&format!("screens_{}.csv", file_stem(&l.spec.display_name())));
            let mut w = create(&path)?;
            l.features.write_csv(&mut w)?;
            finish(w, &path)?;
        }
        self.write_counts(&loaded)
    }

    fn write_significance(&self, loaded: &[Loaded]) -> Result<()> {
        let mut rows = Vec::new();
        for l in loaded {
            rows.extend(screen_significance_report(&l.features, &l.spec.display_name())?);
        }
        let path = self.out_path("significance.csv");
        let mut w = create(&path)?;
        write_significance_csv(&mut w, &rows)?;
        finish(w, &path)
    }

    pub fn test_screens(&self, data: &DataArgs) -> Result<()> {
        let loaded = self.load(&data.msd, &data.mgp, &data.specs)?;
        self.write_significance(&loaded)
    }

    pub fn simulate(&self) -> Result<()> {
        let cfg = &self.settings.sim;
        let market = gen_market(cfg)?;
        let files = write_market(cfg, &market, &self.out)?;
        let collusive = market.labels.iter().filter(|l| l.label == Label::Collusive).count();
        println!("simulated {} hours ({collusive} collusive)", market.labels.len());
        for p in [
            &files.msd,
            &files.mgp,
            &files.labels,
            &files.spec_complete,
            &files.spec_incomplete,
        ] {
            println!("wrote {}", p.display());
        }
        Ok(())
    }

    pub fn train(&self, data: &SingleDataArgs, block: &str) -> Result<()> {
        let block = parse_block(block)?;
        let loaded = self.load(&data.msd, &data.mgp, std::slice::from_ref(&data.spec))?;
        let l = &loaded[0];
        let table = l.features.block(block, l.spec.cartel_type)?;
        let model = fit_table(&table, &self.settings.hyper, self.settings.seed)?;
        println!("stacking weights: {:?}", model.weights);
        let path = self.out_path("model.json");
        model.save(&path)?;
        println!("wrote {}", path.display());
        Ok(())
    }

    /// Every MSD tender of the spec's zones paired with its MGP tender,
    /// labeled where the spec says so.
    fn all_pairs(&self, msd: &[Tender], mgp: &[Tender], spec: &DatasetSpec) -> Result<FeatureTable> {
        let parts: Vec<&DatasetSpec> = if spec.case == Case::Combined {
            spec.components.iter().collect()
        } else {
            vec![spec]
        };
        let opts = self.feature_options(spec.cartel_type);
        let by_slot: HashMap<_, &Tender> = mgp.iter().map(|t| (t.slot(), t)).collect();
        let mut table = FeatureTable {
            ids: Vec::new(),
            labels: Vec::new(),
            names: opts.names(),
            rows: Vec::new(),
        };
        let mut missing = Vec::new();
        for part in parts {
            for mut t in apply_labels(msd, part)? {
                if spec.cartel_type == CartelType::Complete {
                    t = restrict_to_units(&t, &part.cartel_units);
                    if t.offers.is_empty() {
                        continue;
                    }
                }
                let Some(m) = by_slot.get(&t.slot()) else {
                    missing.push(format!("{} {}", t.zone, t.timestamp));
                    continue;
                };
                table.rows.push(pair_features(&t, m, &opts)?);
                table.ids.push(t.id.clone());
                table.labels.push(t.label);
            }
        }
        if !missing.is_empty() {
            return Err(cartelscan_core::Error::Join(missing).into());
        }
        Ok(table)
    }

    pub fn predict(&self, data: &SingleDataArgs, model: &Path) -> Result<()> {
        let model = TrainedEnsemble::load(model)?;
        let spec = DatasetSpec::from_file(&data.spec)?;
        let msd = load_tenders(&data.msd, Market::Msd)?;
        let mgp = load_tenders(&data.mgp, Market::Mgp)?;
        let table = self.all_pairs(&msd, &mgp, &spec)?;
        let table = table
            .select(model.feature_names())
            .map_err(|e| InputError(format!("model expects columns this dataset cannot provide: {e}")))?;
        let probs = model.predict_table(&table)?;
        let path = self.out_path("predictions.csv");
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(["tender_id", "label", "probability", "collusive"])?;
        for ((id, label), p) in table.ids.iter().zip(&table.labels).zip(&probs) {
            w.write_record([
                id.clone(),
                label.to_string(),
                p.to_string(),
                is_collusive(*p).to_string(),
            ])?;
        }
        let flagged = probs.iter().filter(|p| is_collusive(**p)).count();
        println!("{} tenders scored, {flagged} flagged collusive", probs.len());
        let inner = w
            .into_inner()
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
        finish(inner, &path)
    }

    fn run_evaluations(
        &self,
        loaded: &[Loaded],
        block: Option<ScreenBlock>,
        repetitions: Option<usize>,
    ) -> Result<Vec<EvaluationReport>> {
        let reps = repetitions.unwrap_or(self.settings.run.repetitions);
        let mut reports = Vec::new();
        for l in loaded {
            let cartel = l.spec.cartel_type;
            let blocks = match block {
                Some(b) => vec![b],
                None => ScreenBlock::for_cartel_type(cartel).to_vec(),
            };
            for b in blocks {
                let r = repeated_evaluation(
                    &l.features,
                    &l.spec.display_name(),
                    b,
                    cartel,
                    &self.settings.hyper,
                    reps,
                    self.settings.seed,
                )?;
                println!(
                    "{} {b}: accuracy {:.4} recall {:.4} specificity {:.4}",
                    l.spec.display_name(),
                    r.accuracy,
                    r.recall,
                    r.specificity
                );
                reports.push(r);
            }
        }
        Ok(reports)
    }

    fn write_evaluations(&self, reports: &[EvaluationReport]) -> Result<()> {
        type Exporter = fn(&[EvaluationReport], &mut BufWriter<File>) -> cartelscan_core::Result<()>;
        let outputs: [(&str, Exporter); 3] = [
            ("evaluation.csv", |r, w| export_report(r, w)),
            ("repetitions.csv", |r, w| export_repetitions(r, w)),
            ("accuracy_table.csv", |r, w| export_accuracy_table(r, w)),
        ];
        for (name, export) in outputs {
            let path = self.out_path(name);
            let mut w = create(&path)?;
            export(reports, &mut w)?;
            finish(w, &path)?;
        }
        Ok(())
    }

    pub fn evaluate(&self, data: &DataArgs, block: Option<&str>, repetitions: Option<usize>) -> Result<()> {
        let block = block.map(parse_block).transpose()?;
        let loaded = self.load(&data.msd, &data.mgp, &data.specs)?;
        let reports = self.run_evaluations(&loaded, block, repetitions)?;
        self.write_evaluations(&reports)
    }

    fn write_figures(&self, mgp: &[Tender], loaded: &[Loaded]) -> Result<()> {
        let dir = self.out.join("figures");
        std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        for l in loaded {
            let parts: Vec<&DatasetSpec> = if l.spec.case == Case::Combined {
                l.spec.components.iter().collect()
            } else {
                vec![&l.spec]
            };
            for part in parts {
                let labeled = apply_labels(mgp, part)?;
                let stem = file_stem(&part.display_name());
                for metric in MgpMetric::ALL {
                    let csv = dir.join(format!("{stem}_{metric}.csv"));
                    let svg = dir.join(format!("{stem}_{metric}.svg"));
                    export_hourly_series(&labeled, metric, &csv, Some(&svg))?;
                    println!("wrote {}", csv.display());
                }
            }
        }
        Ok(())
    }

    pub fn report(&self, data: &DataArgs, repetitions: Option<usize>, figures: bool) -> Result<()> {
        let loaded = self.load(&data.msd, &data.mgp, &data.specs)?;
        self.write_counts(&loaded)?;
        self.write_significance(&loaded)?;
        let reports = self.run_evaluations(&loaded, None, repetitions)?;
        self.write_evaluations(&reports)?;
        if figures {
            let mgp = load_tenders(&data.mgp, Market::Mgp)?;
            self.write_figures(&mgp, &loaded)?;
        }
        Ok(())
    }
}
