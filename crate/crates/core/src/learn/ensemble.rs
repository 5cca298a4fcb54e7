//! Super learner: five base classifiers stacked with convex weights fitted
//! on out-of-fold predictions.
//!
//! Seed splitting, with `d = derive_seed`:
//! fold assignment attempt `a` uses `d(seed, a)`; learner `m` in CV fold `f`
//! uses `d(d(seed, FOLD_STREAM + f), m)`; the final refit of learner `m`
//! uses `d(d(seed, REFIT_STREAM), m)`.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::folds::{fold_split, stratified_folds};
use super::forest::{fit_ensemble, TreeEnsemble};
use super::hyper::Hyperparameters;
use super::lasso::{fit_lasso_cv, LassoFit};
use super::logistic::{fit_logistic, LinearModel};
use super::preprocess::Preprocessor;
use super::stacking::{simplex_weights, stacking_loss};
use super::svm::{fit_svm, CalibratedSvm};
use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::rng::derive_seed;
use crate::screens::ScreenValue;

pub const FORMAT_VERSION: u32 = 1;
pub const LEARNERS: [&str; 5] = ["random_forest", "bagged_trees", "lasso", "svm", "logistic"];
pub const MIN_TRAINING_ROWS: usize = 20;
const FOLD_STREAM: u64 = 1_000;
const REFIT_STREAM: u64 = 2_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseModel {
    RandomForest(TreeEnsemble),
    BaggedTrees(TreeEnsemble),
    Lasso(LassoFit),
    Svm(CalibratedSvm),
    Logistic(LinearModel),
}

impl BaseModel {
    pub fn fit(learner: usize, x: &DMatrix<f64>, y: &[f64], hp: &Hyperparameters, seed: u64) -> BaseModel {
        match learner {
            0 => BaseModel::RandomForest(fit_ensemble(x, y, &hp.forest(), seed)),
            1 => BaseModel::BaggedTrees(fit_ensemble(x, y, &hp.bagging(), seed)),
            2 => BaseModel::Lasso(fit_lasso_cv(x, y, &hp.lasso(), seed)),
            3 => BaseModel::Svm(fit_svm(x, y, &hp.svm(), seed)),
            _ => BaseModel::Logistic(fit_logistic(x, y, &hp.logistic())),
        }
    }

    pub fn predict_proba(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let raw = match self {
            BaseModel::RandomForest(m) | BaseModel::BaggedTrees(m) => m.predict_proba(x),
            BaseModel::Lasso(m) => m.model.predict_proba(x),
            BaseModel::Svm(m) => m.predict_proba(x),
            BaseModel::Logistic(m) => m.predict_proba(x),
        };
        raw.into_iter().map(|p| p.clamp(0.0, 1.0)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedEnsemble {
    pub format_version: u32,
    pub seed: u64,
    pub hyperparameters: Hyperparameters,
    pub preprocessor: Preprocessor,
    /// In [`LEARNERS`] order.
    pub models: Vec<BaseModel>,
    pub weights: Vec<f64>,
    /// Cross-validated squared-error risk of each learner and of the stack.
    pub cv_risk: Vec<f64>,
    pub ensemble_cv_risk: f64,
}

/// Collusive iff the probability is strictly above one half.
pub fn is_collusive(p: f64) -> bool {
    p > 0.5
}

fn combine(weights: &[f64], base: &[Vec<f64>]) -> Vec<f64> {
    let n = base.first().map_or(0, Vec::len);
    (0..n)
        .map(|i| {
            let p: f64 = weights.iter().zip(base).map(|(w, b)| w * b[i]).sum();
            let lo = base.iter().map(|b| b[i]).fold(f64::INFINITY, f64::min);
            let hi = base.iter().map(|b| b[i]).fold(f64::NEG_INFINITY, f64::max);
            p.clamp(lo, hi)
        })
        .collect()
}

fn class_counts(y: &[f64]) -> (usize, usize) {
    let pos = y.iter().filter(|v| **v == 1.0).count();
    (pos, y.len() - pos)
}

fn usable_folds(folds: &[usize], k: usize, y: &[f64]) -> bool {
    (0..k).all(|f| {
        let (tr, te) = fold_split(folds, f);
        let ytr: Vec<f64> = tr.iter().map(|&i| y[i]).collect();
        let (pos, neg) = class_counts(&ytr);
        !te.is_empty() && pos >= 2 && neg >= 2
    })
}

/// Fits the stack on raw (unimputed, unscaled) rows.
pub fn fit_super_learner(
    names: &[String],
    rows: &[Vec<ScreenValue>],
    y: &[f64],
    hp: &Hyperparameters,
    seed: u64,
) -> Result<TrainedEnsemble> {
    let n = rows.len();
    if n < MIN_TRAINING_ROWS {
        return Err(Error::Model(format!(
            "super learner needs at least {MIN_TRAINING_ROWS} training rows, got {n}"
        )));
    }
    let (pos, neg) = class_counts(y);
    if pos < 2 || neg < 2 {
        return Err(Error::Model(format!(
            "need two examples per class, got {pos} collusive and {neg} competitive"
        )));
    }
    let k = hp.cv_folds.clamp(2, n);
    let folds = (0..hp.fold_attempts.max(1) as u64)
        .map(|a| stratified_folds(y, k, derive_seed(seed, a)))
        .find(|f| usable_folds(f, k, y))
        .ok_or_else(|| {
            Error::Model(format!(
                "no {k}-fold split with both classes in every training fold after {} attempts",
                hp.fold_attempts
            ))
        })?;

    let m = LEARNERS.len();
    let mut z = DMatrix::<f64>::zeros(n, m);
    for f in 0..k {
        let (tr, te) = fold_split(&folds, f);
        let tr_rows: Vec<Vec<ScreenValue>> = tr.iter().map(|&i| rows[i].clone()).collect();
        let te_rows: Vec<Vec<ScreenValue>> = te.iter().map(|&i| rows[i].clone()).collect();
        let pre = Preprocessor::fit(names, &tr_rows)?;
        let (xtr, xte) = (pre.transform(&tr_rows)?, pre.transform(&te_rows)?);
        let ytr: Vec<f64> = tr.iter().map(|&i| y[i]).collect();
        let fold_seed = derive_seed(seed, FOLD_STREAM + f as u64);
        for learner in 0..m {
            let model = BaseModel::fit(learner, &xtr, &ytr, hp, derive_seed(fold_seed, learner as u64));
            for (&i, p) in te.iter().zip(model.predict_proba(&xte)) {
                z[(i, learner)] = p;
            }
        }
        log::debug!("super learner fold {}/{k} done", f + 1);
    }
    let weights = simplex_weights(&z, y)?;
    let cv_risk: Vec<f64> = (0..m)
        .map(|l| {
            let mut e = vec![0.0; m];
            e[l] = 1.0;
            stacking_loss(&z, y, &e)
        })
        .collect();
    let ensemble_cv_risk = stacking_loss(&z, y, &weights);

    let pre = Preprocessor::fit(names, rows)?;
    let x = pre.transform(rows)?;
    let refit_seed = derive_seed(seed, REFIT_STREAM);
    let models = (0..m)
        .map(|l| BaseModel::fit(l, &x, y, hp, derive_seed(refit_seed, l as u64)))
        .collect();
    Ok(TrainedEnsemble {
        format_version: FORMAT_VERSION,
        seed,
        hyperparameters: hp.clone(),
        preprocessor: pre,
        models,
        weights,
        cv_risk,
        ensemble_cv_risk,
    })
}

pub fn fit_table(table: &FeatureTable, hp: &Hyperparameters, seed: u64) -> Result<TrainedEnsemble> {
    fit_super_learner(&table.names, &table.rows, &table.targets(), hp, seed)
}

impl TrainedEnsemble {
    pub fn feature_names(&self) -> &[String] {
        &self.preprocessor.names
    }

    /// Per-learner probabilities for rows already in training column order.
    pub fn base_probabilities(&self, rows: &[Vec<ScreenValue>]) -> Result<Vec<Vec<f64>>> {
        let x = self.preprocessor.transform(rows)?;
        Ok(self.models.iter().map(|m| m.predict_proba(&x)).collect())
    }

    pub fn predict_rows(&self, rows: &[Vec<ScreenValue>]) -> Result<Vec<f64>> {
        Ok(combine(&self.weights, &self.base_probabilities(rows)?))
    }

    /// Checks the column set against the training schema, reorders, predicts.
    pub fn predict_table(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        let want = self.feature_names();
        let missing: Vec<&str> = want
            .iter()
            .filter(|n| !table.names.contains(n))
            .map(String::as_str)
            .collect();
        let extra: Vec<&str> = table
            .names
            .iter()
            .filter(|n| !want.contains(n))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::SchemaMismatch(format!(
                "missing columns [{}], unexpected columns [{}]",
                missing.join(", "),
                extra.join(", ")
            )));
        }
        self.predict_rows(&table.select(want)?.rows)
    }

    pub fn to_writer<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self).map_err(|e| Error::Internal(format!("serializing model: {e}")))
    }

    pub fn from_reader<R: Read>(r: R) -> Result<Self> {
        let m: TrainedEnsemble =
            serde_json::from_reader(r).map_err(|e| Error::Input(format!("not a model file: {e}")))?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::Input(format!(
                "model format version {} is not supported (expected {FORMAT_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        })?;
        let mut w = std::io::BufWriter::new(file);
        self.to_writer(&mut w)?;
        w.flush().map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn small_hp() -> Hyperparameters {
        Hyperparameters {
            rf_trees: 25,
            bag_trees: 25,
            lasso_n_lambda: 10,
            svm_epochs: 60,
            ..Default::default()
        }
    }

    fn data(seed: u64, n: usize) -> (Vec<String>, Vec<Vec<ScreenValue>>, Vec<f64>) {
        let mut rng = rng_from_seed(seed);
        let y: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let rows = y
            .iter()
            .map(|yi| {
                vec![
                    Some(yi * 1.5 + rng.random_range(-1.0..1.0)),
                    if rng.random_bool(0.1) {
                        None
                    } else {
                        Some(rng.random_range(0.0..1.0))
                    },
                    Some(3.0),
                ]
            })
            .collect();
        (vec!["a".into(), "b".into(), "c".into()], rows, y)
    }

    #[test]
    fn fit_predict_round_trip() {
        let (names, rows, y) = data(1, 40);
        let m = fit_super_learner(&names, &rows, &y, &small_hp(), 3).unwrap();
        assert!(m.weights.iter().all(|w| *w >= 0.0));
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let p = m.predict_rows(&rows).unwrap();
        let base = m.base_probabilities(&rows).unwrap();
        for (i, pi) in p.iter().enumerate() {
            let lo = base.iter().map(|b| b[i]).fold(1.0, f64::min);
            let hi = base.iter().map(|b| b[i]).fold(0.0, f64::max);
            assert!(lo <= *pi && *pi <= hi);
        }
        let mut buf = Vec::new();
        m.to_writer(&mut buf).unwrap();
        let back = TrainedEnsemble::from_reader(&buf[..]).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.predict_rows(&rows).unwrap(), p);
        let again = fit_super_learner(&names, &rows, &y, &small_hp(), 3).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn rejects_small_or_one_class_data() {
        let (names, rows, y) = data(1, 19);
        assert!(matches!(
            fit_super_learner(&names, &rows, &y, &small_hp(), 0),
            Err(Error::Model(_))
        ));
        let (names, rows, _) = data(1, 30);
        let ones = vec![1.0; 30];
        assert!(matches!(
            fit_super_learner(&names, &rows, &ones, &small_hp(), 0),
            Err(Error::Model(_))
        ));
    }

    #[test]
    fn threshold_is_strict() {
        assert!(!is_collusive(0.5));
        assert!(is_collusive(0.5 + f64::EPSILON));
        assert_eq!(combine(&[0.2, 0.8], &[vec![0.9], vec![0.9]]), vec![0.9]);
    }

    #[test]
    fn schema_mismatch_names_columns() {
        let (names, rows, y) = data(2, 30);
        let m = fit_super_learner(&names, &rows, &y, &small_hp(), 1).unwrap();
        let t = FeatureTable {
            ids: vec!["x".into()],
            labels: vec![crate::tender::Label::Collusive],
            names: vec!["a".into(), "b".into(), "zz".into()],
            rows: vec![vec![Some(1.0), Some(1.0), Some(1.0)]],
        };
        let err = m.predict_table(&t).unwrap_err().to_string();
        assert!(err.contains('c') && err.contains("zz"), "{err}");
    }
}
