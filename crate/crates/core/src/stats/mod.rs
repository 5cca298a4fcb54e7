//! Two-sample tests comparing collusive and competitive screen values.

mod ks;
mod mann_whitney;
mod report;

pub use ks::{kolmogorov_survival, ks_two_sample};
pub use mann_whitney::{mann_whitney, mann_whitney_with, MwOptions};
pub use report::{screen_significance_report, write_significance_csv, SignificanceRow};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestMethod {
    MwExact,
    MwNormal,
    KsAsymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    /// `None` when the test is undefined (for instance an all-tied pooled
    /// sample under the normal approximation).
    pub p_value: Option<f64>,
    pub method: TestMethod,
    pub n1: usize,
    pub n2: usize,
}
