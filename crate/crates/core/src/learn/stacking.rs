//! Convex stacking weights: argmin over the probability simplex of
//! |y - Z w|^2.
//!
//! With five learners the simplex problem is solved exactly by trying every
//! support: on a fixed support the minimizer subject to sum(w) = 1 comes from
//! one linear system, and the global optimum is the best feasible candidate.
//! Supports are visited smallest first, in learner order, and a candidate
//! replaces the incumbent only if it is strictly better, so ties (identical
//! learners, a degenerate optimum) resolve toward fewer, earlier learners.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Squared-error loss of weights `w`, averaged over rows.
pub fn stacking_loss(z: &DMatrix<f64>, y: &[f64], w: &[f64]) -> f64 {
    let n = z.nrows();
    (0..n)
        .map(|i| {
            let f: f64 = (0..z.ncols()).map(|m| w[m] * z[(i, m)]).sum();
            (y[i] - f) * (y[i] - f)
        })
        .sum::<f64>()
        / n as f64
}

fn support_candidate(gram: &DMatrix<f64>, zy: &DVector<f64>, support: &[usize]) -> Option<Vec<f64>> {
    let k = support.len();
    let mut a = DMatrix::<f64>::zeros(k + 1, k + 1);
    let mut rhs = DVector::<f64>::zeros(k + 1);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            a[(r, c)] = gram[(i, j)];
        }
        a[(r, k)] = 1.0;
        a[(k, r)] = 1.0;
        rhs[r] = zy[i];
    }
    rhs[k] = 1.0;
    let sol = a.lu().solve(&rhs)?;
    let mut w = vec![0.0; gram.nrows()];
    for (r, &i) in support.iter().enumerate() {
        let v = sol[r];
        if !v.is_finite() || v < -1e-12 {
            return None;
        }
        w[i] = v.max(0.0);
    }
    let s: f64 = w.iter().sum();
    if s <= 0.0 {
        return None;
    }
    Some(w.into_iter().map(|v| v / s).collect())
}

pub fn simplex_weights(z: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let m = z.ncols();
    if m == 0 || m > 16 {
        return Err(Error::Model(format!("cannot stack {m} learners")));
    }
    let gram = z.transpose() * z;
    let zy = z.transpose() * DVector::from_column_slice(y);
    let mut masks: Vec<u32> = (1..(1u32 << m)).collect();
    masks.sort_by_key(|mask| (mask.count_ones(), std::cmp::Reverse(mask.reverse_bits())));
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in masks {
        let support: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let Some(w) = support_candidate(&gram, &zy, &support) else {
            continue;
        };
        let loss = stacking_loss(z, y, &w);
        if best.as_ref().is_none_or(|(b, _)| loss < b - 1e-12 * (1.0 + b)) {
            best = Some((loss, w));
        }
    }
    best.map(|(_, w)| w)
        .ok_or_else(|| Error::Internal("no feasible stacking weights".into()))
}
