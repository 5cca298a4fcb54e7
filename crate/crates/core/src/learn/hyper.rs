//! Learner hyperparameters as flat config keys.

use serde::{Deserialize, Serialize};

use super::forest::ForestParams;
use super::lasso::LassoParams;
use super::logistic::LogisticParams;
use super::svm::SvmParams;

/// Every tunable of the ensemble. Optional keys are unlimited / automatic
/// when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub cv_folds: usize,
    pub fold_attempts: usize,
    pub rf_trees: usize,
    pub rf_min_leaf: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rf_max_depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rf_max_features: Option<usize>,
    pub bag_trees: usize,
    pub bag_min_leaf: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bag_max_depth: Option<usize>,
    pub lasso_n_lambda: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lasso_min_ratio: Option<f64>,
    pub lasso_folds: usize,
    pub svm_c: f64,
    pub svm_epochs: usize,
    pub svm_step: f64,
    pub svm_checkpoint_every: usize,
    pub svm_calibration_folds: usize,
    pub logit_ridge: f64,
    pub logit_max_iter: usize,
}

pub const HYPER_KEYS: [&str; 19] = [
    "cv_folds",
    "fold_attempts",
    "rf_trees",
    "rf_min_leaf",
    "rf_max_depth",
    "rf_max_features",
    "bag_trees",
    "bag_min_leaf",
    "bag_max_depth",
    "lasso_n_lambda",
    "lasso_min_ratio",
    "lasso_folds",
    "svm_c",
    "svm_epochs",
    "svm_step",
    "svm_checkpoint_every",
    "svm_calibration_folds",
    "logit_ridge",
    "logit_max_iter",
];

impl Default for Hyperparameters {
    fn default() -> Self {
        let rf = ForestParams::random_forest();
        let bag = ForestParams::bagging();
        let lasso = LassoParams::default();
        let svm = SvmParams::default();
        let logit = LogisticParams::default();
        Self {
            cv_folds: 10,
            fold_attempts: 5,
            rf_trees: rf.n_trees,
            rf_min_leaf: rf.min_leaf,
            rf_max_depth: None,
            rf_max_features: None,
            bag_trees: bag.n_trees,
            bag_min_leaf: bag.min_leaf,
            bag_max_depth: None,
            lasso_n_lambda: lasso.n_lambda,
            lasso_min_ratio: None,
            lasso_folds: lasso.cv_folds,
            svm_c: svm.c,
            svm_epochs: svm.epochs,
            svm_step: svm.step,
            svm_checkpoint_every: svm.checkpoint_every,
            svm_calibration_folds: svm.calibration_folds,
            logit_ridge: logit.ridge,
            logit_max_iter: logit.max_iter,
        }
    }
}

impl Hyperparameters {
    pub fn forest(&self) -> ForestParams {
        ForestParams {
            n_trees: self.rf_trees,
            min_leaf: self.rf_min_leaf,
            max_depth: self.rf_max_depth,
            max_features: self.rf_max_features,
        }
    }

    pub fn bagging(&self) -> ForestParams {
        ForestParams {
            n_trees: self.bag_trees,
            min_leaf: self.bag_min_leaf,
            max_depth: self.bag_max_depth,
            max_features: Some(usize::MAX),
        }
    }

    pub fn lasso(&self) -> LassoParams {
        LassoParams {
            n_lambda: self.lasso_n_lambda,
            min_ratio: self.lasso_min_ratio,
            cv_folds: self.lasso_folds,
        }
    }

    pub fn svm(&self) -> SvmParams {
        SvmParams {
            c: self.svm_c,
            epochs: self.svm_epochs,
            step: self.svm_step,
            checkpoint_every: self.svm_checkpoint_every,
            calibration_folds: self.svm_calibration_folds,
        }
    }

    pub fn logistic(&self) -> LogisticParams {
        LogisticParams {
            ridge: self.logit_ridge,
            max_iter: self.logit_max_iter,
        }
    }
}
