//! Classical screens over every 3- and 4-offer subgroup of a tender,
//! summarized per tender by min, max, mean and median. Used for
//! incomplete cartels, where only some bidders in a tender collude.

use crate::error::{Error, Result};

use super::{classical_screens, ScreenValue, CLASSICAL_NAMES};

pub const SUBGROUP_SIZES: [usize; 2] = [3, 4];
pub const SUMMARY_STATS: [&str; 4] = ["min", "max", "mean", "median"];
/// Largest C(n, 4) accepted by [`subgroup_summary`].
pub const DEFAULT_SUBGROUP_CAP: u64 = 2_000_000;

const CELLS: usize = SUBGROUP_SIZES.len() * CLASSICAL_NAMES.len() * SUMMARY_STATS.len();

/// 96 summary cells, ordered size-major, then screen, then statistic;
/// see [`subgroup_column_names`].
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupSummary {
    pub values: Vec<ScreenValue>,
}

impl SubgroupSummary {
    pub fn get(&self, k: usize, screen: &str, stat: &str) -> ScreenValue {
        let ki = SUBGROUP_SIZES.iter().position(|&s| s == k)?;
        let si = CLASSICAL_NAMES.iter().position(|&s| s == screen)?;
        let ti = SUMMARY_STATS.iter().position(|&s| s == stat)?;
        self.values[(ki * CLASSICAL_NAMES.len() + si) * SUMMARY_STATS.len() + ti]
    }
}

/// `sub{k}_{screen}_{stat}` for every cell, in storage order.
pub fn subgroup_column_names() -> Vec<String> {
    let mut names = Vec::with_capacity(CELLS);
    for k in SUBGROUP_SIZES {
        for s in CLASSICAL_NAMES {
            for t in SUMMARY_STATS {
                names.push(format!("sub{k}_{s}_{t}"));
            }
        }
    }
    names
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul((n - i) as u64) / (i as u64 + 1))
}

/// Visits every k-subset of `0..n` in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n || k == 0 {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// All k-offer price subsets, lexicographic in offer index.
pub fn enumerate_subgroups(prices: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(binomial(prices.len(), k) as usize);
    for_each_combination(prices.len(), k, |idx| {
        out.push(idx.iter().map(|&i| prices[i]).collect())
    });
    out
}

fn summarize(values: &mut [f64]) -> [ScreenValue; 4] {
    if values.is_empty() {
        return [None; 4];
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    values.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    };
    // Rounding can push the mean of near-equal values just outside [min, max].
    let mean = mean.clamp(values[0], values[n - 1]);
    [Some(values[0]), Some(values[n - 1]), Some(mean), Some(median)]
}

pub fn subgroup_summary(prices: &[f64]) -> Result<SubgroupSummary> {
    subgroup_summary_with_cap(prices, DEFAULT_SUBGROUP_CAP)
}

/// Subgroup summary refusing tenders with more than `cap` 4-subsets.
pub fn subgroup_summary_with_cap(prices: &[f64], cap: u64) -> Result<SubgroupSummary> {
    let n = prices.len();
    let combos = binomial(n, 4);
    if combos > cap {
        return Err(Error::Resource(format!(
            "tender with {n} offers has {combos} four-offer subgroups, cap is {cap}"
        )));
    }
    let mut values = Vec::with_capacity(CELLS);
    let mut subset = Vec::with_capacity(4);
    for k in SUBGROUP_SIZES {
        let mut per_screen: Vec<Vec<f64>> = vec![Vec::with_capacity(binomial(n, k) as usize); CLASSICAL_NAMES.len()];
        for_each_combination(n, k, |idx| {
            subset.clear();
            subset.extend(idx.iter().map(|&i| prices[i]));
            for (col, v) in per_screen.iter_mut().zip(classical_screens(&subset).to_array()) {
                if let Some(v) = v {
                    col.push(v);
                }
            }
        });
        for col in per_screen.iter_mut() {
            values.extend(summarize(col));
        }
    }
    Ok(SubgroupSummary { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn subgroup_counts() {
        let p = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(enumerate_subgroups(&p[..4], 3).len(), 4);
        assert_eq!(enumerate_subgroups(&p[..4], 4), vec![vec![1.0, 2.0, 3.0, 4.0]]);
        assert_eq!(enumerate_subgroups(&p, 4).len(), 15);
        assert!(enumerate_subgroups(&p[..2], 3).is_empty());
        assert_eq!(
            enumerate_subgroups(&p[..4], 3),
            vec![
                vec![1.0, 2.0, 3.0],
                vec![1.0, 2.0, 4.0],
                vec![1.0, 3.0, 4.0],
                vec![2.0, 3.0, 4.0]
            ]
        );
    }

    #[test]
    fn diff_over_triples() {
        let s = subgroup_summary(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.get(3, "diff", "min"), Some(1.0));
        assert_eq!(s.get(3, "diff", "max"), Some(2.0));
        assert_eq!(s.get(3, "diff", "mean"), Some(1.25));
        assert_eq!(s.get(3, "diff", "median"), Some(1.0));
    }

    #[test]
    fn too_few_offers_for_block() {
        let s = subgroup_summary(&[1.0, 5.0, 9.0]).unwrap();
        for name in CLASSICAL_NAMES {
            for stat in SUMMARY_STATS {
                assert_eq!(s.get(4, name, stat), None);
            }
        }
        assert_eq!(s.get(3, "n_bids", "mean"), Some(3.0));
        assert_eq!(subgroup_column_names().len(), 96);
        assert_eq!(subgroup_column_names()[0], "sub3_var_min");
    }

    #[test]
    fn identical_prices() {
        let s = subgroup_summary(&[7.0; 4]).unwrap();
        for k in SUBGROUP_SIZES {
            for name in ["var", "spread", "diff", "cv"] {
                let cells: Vec<_> = SUMMARY_STATS.iter().map(|t| s.get(k, name, t)).collect();
                assert!(cells.iter().all(|c| *c == Some(0.0)), "{name} {cells:?}");
            }
            assert_eq!(s.get(k, "ks", "mean"), None);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let p: Vec<f64> = (0..10).map(f64::from).collect();
        // C(10, 4) = 210
        assert!(matches!(subgroup_summary_with_cap(&p, 209), Err(Error::Resource(_))));
        assert!(subgroup_summary_with_cap(&p, 210).is_ok());
    }

    proptest! {
        #[test]
        fn summary_order(prices in proptest::collection::vec(1.0f64..100.0, 0..8)) {
            let s = subgroup_summary(&prices).unwrap();
            for chunk in s.values.chunks(4) {
                if let [Some(lo), Some(hi), Some(mean), Some(med)] = chunk {
                    prop_assert!(lo <= med && med <= hi);
                    prop_assert!(lo <= mean && mean <= hi);
                } else {
                    prop_assert!(chunk.iter().all(Option::is_none));
                }
            }
        }
    }
}
