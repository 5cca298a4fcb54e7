use statrs::function::erf::erfc;

use crate::error::{Error, Result};

use super::{TestMethod, TestResult};

/// Largest pooled size for which the exact null distribution is used.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MwOptions {
    /// Apply the 0.5 continuity correction in the normal approximation.
    pub continuity_correction: bool,
}

impl Default for MwOptions {
    fn default() -> Self {
        Self {
            continuity_correction: true,
        }
    }
}

/// Two-sided Mann-Whitney test; the statistic is U of `x`.
pub fn mann_whitney(x: &[f64], y: &[f64]) -> Result<TestResult> {
    mann_whitney_with(x, y, MwOptions::default())
}

pub fn mann_whitney_with(x: &[f64], y: &[f64], opts: MwOptions) -> Result<TestResult> {
    let (n1, n2) = (x.len(), y.len());
    if n1 == 0 || n2 == 0 {
        return Err(Error::Input("Mann-Whitney test needs two non-empty samples".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Input("Mann-Whitney test on non-finite values".into()));
    }
    let (ranks, tie_term) = midranks(x, y);
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;

    let n = n1 + n2;
    if n <= EXACT_MAX_N && tie_term == 0.0 {
        return Ok(TestResult {
            statistic: u,
            p_value: Some(exact_p(u.round() as usize, n1, n2)),
            method: TestMethod::MwExact,
            n1,
            n2,
        });
    }

    let (n1f, n2f, nf) = (n1 as f64, n2 as f64, n as f64);
    let mu = n1f * n2f / 2.0;
    let var = n1f * n2f / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let p_value = if var > 0.0 {
        let cc = if opts.continuity_correction { 0.5 } else { 0.0 };
        let z = ((u - mu).abs() - cc).max(0.0) / var.sqrt();
        Some(erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0))
    } else {
        None
    };
    Ok(TestResult {
        statistic: u,
        p_value,
        method: TestMethod::MwNormal,
        n1,
        n2,
    })
}

/// Midranks of the pooled sample (x first) and the tie term sum(t^3 - t).
fn midranks(x: &[f64], y: &[f64]) -> (Vec<f64>, f64) {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && pooled[order[j]] == pooled[order[i]] {
            j += 1;
        }
        // positions i..j share the average of ranks i+1..=j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    (ranks, tie_term)
}

/// Number of arrangements giving each value of U, by the standard
/// recurrence c(m, n, u) = c(m-1, n, u-n) + c(m, n-1, u).
fn u_counts(n1: usize, n2: usize) -> Vec<f64> {
    let max_u = n1 * n2;
    // table[m][k] = counts for sizes (m, k)
    let mut table: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n2 + 1]; n1 + 1];
    for m in 0..=n1 {
        for k in 0..=n2 {
            let mut c = vec![0.0; m * k + 1];
            if m == 0 || k == 0 {
                c[0] = 1.0;
            } else {
                for (u, slot) in c.iter_mut().enumerate() {
                    let mut v = 0.0;
                    if u >= k {
                        v += table[m - 1][k].get(u - k).copied().unwrap_or(0.0);
                    }
                    v += table[m][k - 1].get(u).copied().unwrap_or(0.0);
                    *slot = v;
                }
            }
            table[m][k] = c;
        }
    }
    let out = std::mem::take(&mut table[n1][n2]);
    debug_assert_eq!(out.len(), max_u + 1);
    out
}

fn exact_p(u: usize, n1: usize, n2: usize) -> f64 {
    let counts = u_counts(n1, n2);
    let total: f64 = counts.iter().sum();
    let lower: f64 = counts[..=u].iter().sum::<f64>() / total;
    let upper: f64 = counts[u..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper).min(0.5)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Enumerates every assignment of pooled ranks to the first sample.
    fn permutation_p(x: &[f64], y: &[f64]) -> f64 {
        let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
        let n = pooled.len();
        let n1 = x.len();
        let u_of = |mask: u32| -> f64 {
            let mut u = 0.0;
            for i in 0..n {
                if mask & (1 << i) != 0 {
                    for j in 0..n {
                        if mask & (1 << j) == 0 && pooled[j] < pooled[i] {
                            u += 1.0;
                        }
                    }
                }
            }
            u
        };
        let observed = u_of((1u32 << n1) - 1);
        let (mut lo, mut hi, mut total) = (0.0f64, 0.0f64, 0.0f64);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != n1 {
                continue;
            }
            let u = u_of(mask);
            total += 1.0;
            if u <= observed {
                lo += 1.0;
            }
            if u >= observed {
                hi += 1.0;
            }
        }
        (2.0 * (lo / total).min(hi / total).min(0.5)).min(1.0)
    }

    #[test]
    fn shifted_pairs() {
        let r = mann_whitney(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.method, TestMethod::MwExact);
        assert!((r.p_value.unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((permutation_p(&[1.0, 2.0], &[3.0, 4.0]) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_samples() {
        let x: Vec<f64> = (0..30).map(|i| (i % 7) as f64).collect();
        let r = mann_whitney(&x, &x).unwrap();
        assert_eq!(r.statistic, 30.0 * 30.0 / 2.0);
        assert!(r.p_value.unwrap() >= 0.99);
        let small = [1.0, 5.0, 2.0];
        let r = mann_whitney(&small, &small).unwrap();
        assert_eq!(r.statistic, 4.5);
        assert!(r.p_value.unwrap() >= 0.99);
    }

    #[test]
    fn all_tied_pooled_sample_has_no_p_value() {
        let r = mann_whitney(&[2.0; 20], &[2.0; 15]).unwrap();
        assert_eq!(r.p_value, None);
        assert_eq!(r.statistic, 150.0);
    }

    #[test]
    fn rejects_empty() {
        assert!(mann_whitney(&[], &[1.0]).is_err());
    }

    #[test]
    fn continuity_flag() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<f64> = (0..20).map(|i| i as f64 + 4.5).collect();
        let with = mann_whitney(&x, &y).unwrap().p_value.unwrap();
        let without = mann_whitney_with(
            &x,
            &y,
            MwOptions {
                continuity_correction: false,
            },
        )
        .unwrap()
        .p_value
        .unwrap();
        assert!(without < with);
    }

    fn distinct(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::hash_set(-1000i32..1000, n).prop_map(|s| s.into_iter().map(f64::from).collect())
    }

    proptest! {
        #[test]
        fn exact_matches_permutation(n1 in 1usize..6, n2 in 1usize..6, pool in distinct(10)) {
            prop_assume!(n1 + n2 <= 10);
            let (x, y) = (&pool[..n1], &pool[n1..n1 + n2]);
            let r = mann_whitney(x, y).unwrap();
            prop_assert_eq!(r.method, TestMethod::MwExact);
            prop_assert!((r.p_value.unwrap() - permutation_p(x, y)).abs() <= 1e-12);
        }

        #[test]
        fn symmetry_and_rank_invariance(x in proptest::collection::vec(-50i32..50, 1..15), y in proptest::collection::vec(-50i32..50, 1..15)) {
            let x: Vec<f64> = x.into_iter().map(f64::from).collect();
            let y: Vec<f64> = y.into_iter().map(f64::from).collect();
            let a = mann_whitney(&x, &y).unwrap();
            let b = mann_whitney(&y, &x).unwrap();
            prop_assert_eq!(a.statistic + b.statistic, (x.len() * y.len()) as f64);
            prop_assert_eq!(a.p_value, b.p_value);
            prop_assert!(a.statistic >= 0.0 && a.statistic <= (x.len() * y.len()) as f64);
            if let Some(p) = a.p_value { prop_assert!((0.0..=1.0).contains(&p)); }
            let f = |v: &f64| (v / 10.0).exp() + 3.0 * v;
            let fx: Vec<f64> = x.iter().map(f).collect();
            let fy: Vec<f64> = y.iter().map(f).collect();
            let c = mann_whitney(&fx, &fy).unwrap();
            prop_assert_eq!(c.statistic, a.statistic);
            prop_assert_eq!(c.p_value, a.p_value);
        }

        // The bound holds once both samples have at least three values.
        #[test]
        fn exact_close_to_normal(n1 in 3usize..10, n2 in 3usize..10, pool in distinct(12)) {
            prop_assume!(n1 + n2 <= 12);
            let (x, y) = (&pool[..n1], &pool[n1..n1 + n2]);
            let exact = mann_whitney(x, y).unwrap().p_value.unwrap();
            let (n1f, n2f) = (n1 as f64, n2 as f64);
            let u = mann_whitney(x, y).unwrap().statistic;
            let sd = (n1f * n2f * (n1f + n2f + 1.0) / 12.0).sqrt();
            let z = ((u - n1f * n2f / 2.0).abs() - 0.5).max(0.0) / sd;
            let normal = erfc(z / std::f64::consts::SQRT_2).min(1.0);
            prop_assert!((exact - normal).abs() <= 0.05, "exact {} normal {}", exact, normal);
        }
    }
}
