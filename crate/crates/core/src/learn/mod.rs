//! Base classifiers and the stacked ensemble built from them.

pub mod ensemble;
pub mod folds;
pub mod forest;
pub mod hyper;
pub mod lasso;
pub mod logistic;
pub mod preprocess;
pub mod stacking;
pub mod svm;
pub mod tree;

pub use ensemble::{fit_super_learner, fit_table, is_collusive, BaseModel, TrainedEnsemble, LEARNERS};
pub use hyper::Hyperparameters;
