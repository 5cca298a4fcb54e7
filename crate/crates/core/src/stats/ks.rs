use crate::error::{Error, Result};

use super::{TestMethod, TestResult};

const SERIES_EPS: f64 = 1e-10;

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value at
/// effective size n1*n2/(n1+n2).
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<TestResult> {
    let (n1, n2) = (x.len(), y.len());
    if n1 == 0 || n2 == 0 {
        return Err(Error::Input("KS test needs two non-empty samples".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Input("KS test on non-finite values".into()));
    }
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    // Walk the pooled order; evaluate only after consuming every copy of a value.
    while i < n1 && j < n2 {
        let v = a[i].min(b[j]);
        while i < n1 && a[i] == v {
            i += 1;
        }
        while j < n2 && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let d = d.clamp(0.0, 1.0);
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    Ok(TestResult {
        statistic: d,
        p_value: Some(kolmogorov_survival(ne.sqrt() * d)),
        method: TestMethod::KsAsymptotic,
        n1,
        n2,
    })
}

/// P(K > lambda) for the Kolmogorov distribution.
///
/// Uses the alternating series 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2) for
/// lambda >= 1, and the Jacobi-theta form of the CDF below that, where the
/// alternating series converges slowly. Both are truncated once a term
/// drops under 1e-10.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda >= 1.0 {
        let mut sum = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < SERIES_EPS {
                break;
            }
        }
        2.0 * sum
    } else {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut sum = 0.0;
        for k in 1..=100 {
            let odd = (2 * k - 1) as f64;
            let term = (-odd * odd * pi2 / (8.0 * lambda * lambda)).exp();
            sum += term;
            if term < SERIES_EPS {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    };
    p.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Evaluates both ECDFs at every pooled point by counting.
    fn brute_d(x: &[f64], y: &[f64]) -> f64 {
        let ecdf = |s: &[f64], t: f64| s.iter().filter(|v| **v <= t).count() as f64 / s.len() as f64;
        x.iter()
            .chain(y)
            .map(|&t| (ecdf(x, t) - ecdf(y, t)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn identical_and_disjoint() {
        let x = [3.0, 1.0, 2.0, 2.0];
        let r = ks_two_sample(&x, &x).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, Some(1.0));
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert!(ks_two_sample(&[], &[1.0]).is_err());
    }

    #[test]
    fn survival_branches_agree_and_match_tables() {
        // Both forms evaluated on either side of the switch point.
        assert!((kolmogorov_survival(1.0 - 1e-12) - kolmogorov_survival(1.0)).abs() < 1e-9);
        // Standard critical values: P(K > 1.358) = 0.05, P(K > 1.628) = 0.01.
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 2e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 2e-4);
        assert!(kolmogorov_survival(0.2) > 0.999_99);
        assert!(kolmogorov_survival(5.0) < 1e-20);
    }

    proptest! {
        #[test]
        fn matches_brute_force(x in proptest::collection::vec(-20i32..20, 1..25), y in proptest::collection::vec(-20i32..20, 1..25)) {
            let x: Vec<f64> = x.into_iter().map(f64::from).collect();
            let y: Vec<f64> = y.into_iter().map(f64::from).collect();
            let r = ks_two_sample(&x, &y).unwrap();
            prop_assert!((r.statistic - brute_d(&x, &y)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&r.statistic));
            let p = r.p_value.unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            let f = |v: &f64| v * v * v + v;
            let fx: Vec<f64> = x.iter().map(f).collect();
            let fy: Vec<f64> = y.iter().map(f).collect();
            prop_assert_eq!(ks_two_sample(&fx, &fy).unwrap().statistic, r.statistic);
        }
    }
}
