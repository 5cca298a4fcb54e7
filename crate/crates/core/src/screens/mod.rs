//! Behavioral screens: scalar statistics of a tender's offers.
//!
//! Undefined statistics (too few offers, zero denominators) are `None`,
//! never NaN. Imputation happens later, inside the learners.

mod classical;
mod subgroup;
mod withholding;

pub use classical::{
    bid_count, classical_screens, ks_screen, low_bid_screens, moment_screens, LowBidScreens, MomentScreens,
};
pub use subgroup::{
    enumerate_subgroups, subgroup_column_names, subgroup_summary, subgroup_summary_with_cap, SubgroupSummary,
    DEFAULT_SUBGROUP_CAP, SUBGROUP_SIZES, SUMMARY_STATS,
};
pub use withholding::{mgp_screens, WithholdingScreens, MGP_SCREEN_NAMES};

/// A screen value; `None` marks a statistic that is undefined for the tender.
pub type ScreenValue = Option<f64>;

/// Column names of the classical screens, in feature order.
pub const CLASSICAL_NAMES: [&str; 12] = [
    "var", "cv", "spread", "kurt", "diff", "diffp", "rd", "rdnor", "rdalt", "skew", "ks", "n_bids",
];

/// The twelve classical screens of one set of MSD prices.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassicalScreens {
    pub var: ScreenValue,
    pub cv: ScreenValue,
    pub spread: ScreenValue,
    pub kurt: ScreenValue,
    pub diff: ScreenValue,
    pub diffp: ScreenValue,
    pub rd: ScreenValue,
    pub rdnor: ScreenValue,
    pub rdalt: ScreenValue,
    pub skew: ScreenValue,
    pub ks: ScreenValue,
    pub n_bids: usize,
}

impl ClassicalScreens {
    /// Values in [`CLASSICAL_NAMES`] order.
    pub fn to_array(&self) -> [ScreenValue; 12] {
        [
            self.var,
            self.cv,
            self.spread,
            self.kurt,
            self.diff,
            self.diffp,
            self.rd,
            self.rdnor,
            self.rdalt,
            self.skew,
            self.ks,
            Some(self.n_bids as f64),
        ]
    }
}

/// `num / den`, or `None` when the denominator is zero or the result is
/// not finite.
pub(crate) fn ratio(num: f64, den: f64) -> ScreenValue {
    if den == 0.0 {
        return None;
    }
    let r = num / den;
    r.is_finite().then_some(r)
}
