use crate::error::{Error, Result};
use crate::tender::Tender;

use super::{ratio, ClassicalScreens, ScreenValue};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentScreens {
    pub var: ScreenValue,
    pub cv: ScreenValue,
    pub spread: ScreenValue,
    pub kurt: ScreenValue,
    pub skew: ScreenValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LowBidScreens {
    pub diff: ScreenValue,
    pub diffp: ScreenValue,
    pub rd: ScreenValue,
    pub rdnor: ScreenValue,
    pub rdalt: ScreenValue,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

fn sorted(prices: &[f64]) -> Vec<f64> {
    let mut v = prices.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Variance (n-1), coefficient of variation, spread relative to the lowest
/// offer, raw kurtosis m4/m2^2 and skewness m3/m2^1.5.
///
/// Minimum sizes: var, cv and spread need 2 offers, skew 3, kurt 4.
pub fn moment_screens(prices: &[f64]) -> Result<MomentScreens> {
    if prices.is_empty() {
        return Err(Error::Input("moment screens of an empty price list".into()));
    }
    let n = prices.len();
    let mut out = MomentScreens::default();
    if n < 2 {
        return Ok(out);
    }
    let m = mean(prices);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &p in prices {
        let d = p - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let nf = n as f64;
    let var = m2 / (nf - 1.0);
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);

    out.var = Some(var);
    out.cv = ratio(var.sqrt(), m);
    let (lo, hi) = prices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
        (lo.min(p), hi.max(p))
    });
    out.spread = ratio(hi - lo, lo);
    if n >= 3 && m2 > 0.0 {
        out.skew = ratio(m3, m2.powf(1.5));
    }
    if n >= 4 && m2 > 0.0 {
        out.kurt = ratio(m4, m2 * m2);
    }
    Ok(out)
}

/// Screens built on the gap between the two lowest offers.
pub fn low_bid_screens(prices: &[f64]) -> LowBidScreens {
    let n = prices.len();
    let mut out = LowBidScreens::default();
    if n < 2 {
        return out;
    }
    let b = sorted(prices);
    let diff = b[1] - b[0];
    out.diff = Some(diff);
    out.diffp = ratio(diff, b[0]);

    let losing = &b[1..];
    if n >= 4 {
        out.rd = ratio(diff, sample_sd(losing));
    }
    if n >= 3 {
        // Mean adjacent gap among losing offers telescopes to range / count.
        let losing_gap = (b[n - 1] - b[1]) / (n - 2) as f64;
        out.rdnor = ratio(diff, losing_gap);
    }
    let all_gap = (b[n - 1] - b[0]) / (n - 1) as f64;
    out.rdalt = ratio(diff, all_gap);
    out
}

/// Largest distance between the empirical CDF of the min-max normalized
/// prices and the uniform CDF on [0, 1].
pub fn ks_screen(prices: &[f64]) -> ScreenValue {
    let n = prices.len();
    if n < 2 {
        return None;
    }
    let b = sorted(prices);
    let (lo, hi) = (b[0], b[n - 1]);
    let range = hi - lo;
    if range <= 0.0 {
        return None;
    }
    let nf = n as f64;
    let d = b
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let u = ((p - lo) / range).clamp(0.0, 1.0);
            let above = (i + 1) as f64 / nf - u;
            let below = u - i as f64 / nf;
            above.max(below)
        })
        .fold(0.0_f64, f64::max);
    Some(d.clamp(0.0, 1.0))
}

pub fn bid_count(tender: &Tender) -> usize {
    tender.offers.len()
}

/// All twelve classical screens. An empty price list yields all `None`
/// and a zero bid count.
pub fn classical_screens(prices: &[f64]) -> ClassicalScreens {
    let mut out = ClassicalScreens {
        n_bids: prices.len(),
        ..Default::default()
    };
    if prices.is_empty() {
        return out;
    }
    let m = moment_screens(prices).expect("non-empty prices");
    let l = low_bid_screens(prices);
    out.var = m.var;
    out.cv = m.cv;
    out.spread = m.spread;
    out.kurt = m.kurt;
    out.skew = m.skew;
    out.diff = l.diff;
    out.diffp = l.diffp;
    out.rd = l.rd;
    out.rdnor = l.rdnor;
    out.rdalt = l.rdalt;
    out.ks = ks_screen(prices);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: ScreenValue, b: f64, tol: f64) -> bool {
        a.is_some_and(|a| (a - b).abs() <= tol)
    }

    #[test]
    fn constant_prices() {
        let m = moment_screens(&[10.0; 4]).unwrap();
        assert_eq!(m.var, Some(0.0));
        assert_eq!(m.cv, Some(0.0));
        assert_eq!(m.spread, Some(0.0));
        assert_eq!(m.kurt, None);
        assert_eq!(m.skew, None);
        assert_eq!(ks_screen(&[10.0; 4]), None);
    }

    #[test]
    fn one_two_three_four() {
        let p = [1.0, 2.0, 3.0, 4.0];
        let m = moment_screens(&p).unwrap();
        assert!(close(m.var, 5.0 / 3.0, 1e-12));
        // sqrt(5/3) / 2.5
        assert!(close(m.cv, 0.516_397_779_494_322_2, 1e-12));
        assert!(close(m.spread, 3.0, 1e-12));
        assert!(close(m.skew, 0.0, 1e-12));
        // m2 = 1.25, m4 = (2*5.0625 + 2*0.0625)/4 = 2.5625 -> 1.64
        assert!(close(m.kurt, 1.64, 1e-12));
        let l = low_bid_screens(&p);
        for v in [l.diff, l.diffp, l.rd, l.rdnor, l.rdalt] {
            assert!(close(v, 1.0, 1e-12), "{v:?}");
        }
        assert!(close(ks_screen(&p), 0.25, 1e-12));
    }

    #[test]
    fn spread_out_losers() {
        let l = low_bid_screens(&[100.0, 110.0, 200.0, 500.0]);
        assert!(close(l.diff, 10.0, 1e-12));
        assert!(close(l.diffp, 0.1, 1e-12));
        // losing sd = sqrt(41700)
        assert!(close(l.rd, 10.0 / 41700f64.sqrt(), 1e-12));
        assert!(close(l.rd, 0.0490, 5e-5));
    }

    #[test]
    fn tied_lowest_bids() {
        let l = low_bid_screens(&[5.0, 5.0, 9.0]);
        assert_eq!(l.diff, Some(0.0));
        assert_eq!(l.diffp, Some(0.0));
        assert_eq!(l.rdnor, Some(0.0));
        assert_eq!(l.rdalt, Some(0.0));
        assert_eq!(l.rd, None);
    }

    #[test]
    fn ks_with_ties_at_minimum() {
        assert!(close(ks_screen(&[0.0, 0.0, 0.0, 1.0]), 0.75, 1e-12));
    }

    #[test]
    fn small_samples_and_zero_denominators() {
        assert!(moment_screens(&[]).is_err());
        let one = classical_screens(&[3.0]);
        assert_eq!(one.n_bids, 1);
        assert!(one.to_array()[..11].iter().all(Option::is_none));
        let l = low_bid_screens(&[0.0, 2.0]);
        assert_eq!(l.diffp, None);
        assert_eq!(l.rdalt, Some(1.0));
        let m = moment_screens(&[0.0, 0.0]).unwrap();
        assert_eq!(m.cv, None);
        assert_eq!(m.spread, None);
        assert_eq!(classical_screens(&[]).n_bids, 0);
    }

    #[test]
    fn raw_and_excess_kurtosis_differ_by_three() {
        let p = [3.0, 7.0, 8.0, 15.0, 21.0];
        let k = moment_screens(&p).unwrap().kurt.unwrap();
        let m = p.iter().sum::<f64>() / 5.0;
        let m2 = p.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 5.0;
        let m4 = p.iter().map(|x| (x - m).powi(4)).sum::<f64>() / 5.0;
        let excess = m4 / (m2 * m2) - 3.0;
        assert!((k - excess - 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn never_nan(prices in proptest::collection::vec(0.0f64..1e4, 0..10)) {
            for v in classical_screens(&prices).to_array().iter().flatten() {
                prop_assert!(v.is_finite());
            }
            if let Some(k) = ks_screen(&prices) {
                prop_assert!((0.0..=1.0).contains(&k));
                prop_assert!(k > 0.0);
            }
        }

        #[test]
        fn translation(prices in proptest::collection::vec(1.0f64..1e3, 2..9), s in 0.5f64..100.0) {
            let shifted: Vec<f64> = prices.iter().map(|p| p + s).collect();
            let a = classical_screens(&prices);
            let b = classical_screens(&shifted);
            let rel = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0);
            prop_assert!(rel(a.diff.unwrap(), b.diff.unwrap()));
            prop_assert!(rel(a.var.unwrap(), b.var.unwrap()));
            if a.var.unwrap() > 1e-6 {
                prop_assert!(b.spread.unwrap() < a.spread.unwrap());
                prop_assert!(b.cv.unwrap() < a.cv.unwrap());
            }
            if a.diff.unwrap() > 1e-6 {
                prop_assert!(b.diffp.unwrap() < a.diffp.unwrap());
            }
        }
    }
}
