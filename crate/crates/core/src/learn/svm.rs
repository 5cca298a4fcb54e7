//! Linear soft-margin SVM trained by full-batch subgradient descent with
//! iterate averaging, and Platt scaling of its decision values.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::folds::{fold_split, stratified_folds};
use super::logistic::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
    /// Initial step size; epoch t uses step / sqrt(t).
    pub step: f64,
    /// Epochs between objective checkpoints.
    pub checkpoint_every: usize,
    pub calibration_folds: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            epochs: 200,
            step: 1.0,
            checkpoint_every: 20,
            calibration_folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub w: Vec<f64>,
    pub b: f64,
    /// Objective of the averaged iterate at each checkpoint.
    pub trace: Vec<f64>,
}

impl LinearSvm {
    pub fn decision(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| self.b + self.w.iter().enumerate().map(|(j, w)| w * x[(i, j)]).sum::<f64>())
            .collect()
    }
}

/// P(y = 1 | f) = 1 / (1 + exp(a * f + b)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

impl Platt {
    pub fn prob(&self, f: f64) -> f64 {
        sigmoid(-(self.a * f + self.b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedSvm {
    pub svm: LinearSvm,
    pub platt: Platt,
}

impl CalibratedSvm {
    pub fn predict_proba(&self, x: &DMatrix<f64>) -> Vec<f64> {
        self.svm.decision(x).into_iter().map(|f| self.platt.prob(f)).collect()
    }
}

/// Mean hinge loss plus (lambda / 2) |w|^2 with lambda = 1 / (C n), i.e. the
/// usual C-SVM objective divided by C n.
pub fn svm_objective(x: &DMatrix<f64>, y: &[f64], c: f64, w: &[f64], b: f64) -> f64 {
    let n = x.nrows() as f64;
    let lambda = 1.0 / (c * n);
    let hinge: f64 = (0..x.nrows())
        .map(|i| {
            let s = 2.0 * y[i] - 1.0;
            let f = b + w.iter().enumerate().map(|(j, wj)| wj * x[(i, j)]).sum::<f64>();
            (1.0 - s * f).max(0.0)
        })
        .sum::<f64>()
        / n;
    hinge + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>()
}

/// `y` holds 0/1 labels.
pub fn train_svm(x: &DMatrix<f64>, y: &[f64], params: &SvmParams) -> LinearSvm {
    let (n, p) = (x.nrows(), x.ncols());
    let nf = n as f64;
    let lambda = 1.0 / (params.c * nf);
    let s: Vec<f64> = y.iter().map(|v| 2.0 * v - 1.0).collect();
    let (mut w, mut b) = (vec![0.0; p], 0.0);
    let (mut wa, mut ba) = (vec![0.0; p], 0.0);
    let mut trace = Vec::new();
    let mut gw = vec![0.0; p];
    for t in 1..=params.epochs {
        gw.iter_mut().zip(&w).for_each(|(g, wj)| *g = lambda * wj);
        let mut gb = 0.0;
        for i in 0..n {
            let f = b + (0..p).map(|j| w[j] * x[(i, j)]).sum::<f64>();
            if s[i] * f < 1.0 {
                for j in 0..p {
                    gw[j] -= s[i] * x[(i, j)] / nf;
                }
                gb -= s[i] / nf;
            }
        }
        let eta = params.step / (t as f64).sqrt();
        for j in 0..p {
            w[j] -= eta * gw[j];
        }
        b -= eta * gb;
        let k = 1.0 / t as f64;
        for j in 0..p {
            wa[j] += (w[j] - wa[j]) * k;
        }
        ba += (b - ba) * k;
        if t % params.checkpoint_every.max(1) == 0 || t == params.epochs {
            trace.push(svm_objective(x, y, params.c, &wa, ba));
        }
    }
    LinearSvm { w: wa, b: ba, trace }
}

/// Platt's sigmoid fit with smoothed targets, Newton iterations with
/// backtracking. A non-decreasing map is forced: if the fit comes out with
/// the wrong orientation the calibrator falls back to the smoothed base rate.
pub fn fit_platt(f: &[f64], y: &[f64]) -> Platt {
    let pos = y.iter().filter(|v| **v == 1.0).count() as f64;
    let neg = y.len() as f64 - pos;
    let hi = (pos + 1.0) / (pos + 2.0);
    let lo = 1.0 / (neg + 2.0);
    let t: Vec<f64> = y.iter().map(|v| if *v == 1.0 { hi } else { lo }).collect();
    let prior = ((neg + 1.0) / (pos + 1.0)).ln();
    let loss = |a: f64, b: f64| -> f64 {
        f.iter()
            .zip(&t)
            .map(|(fi, ti)| {
                let z = a * fi + b;
                if z >= 0.0 {
                    ti * z + (-z).exp().ln_1p()
                } else {
                    (ti - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, prior);
    let mut fval = loss(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
        for (fi, ti) in f.iter().zip(&t) {
            let p = sigmoid(-(a * fi + b));
            let d2 = p * (1.0 - p);
            h11 += fi * fi * d2;
            h22 += d2;
            h21 += fi * d2;
            let d1 = ti - p;
            g1 += fi * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        let mut moved = false;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = loss(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                moved = true;
                break;
            }
            step /= 2.0;
        }
        if !moved {
            break;
        }
    }
    if a > 0.0 || !a.is_finite() || !b.is_finite() {
        return Platt { a: 0.0, b: prior };
    }
    Platt { a, b }
}

/// Trains the SVM on all rows and calibrates it on out-of-fold decision
/// values.
pub fn fit_svm(x: &DMatrix<f64>, y: &[f64], params: &SvmParams, seed: u64) -> CalibratedSvm {
    let k = params.calibration_folds.min(y.len()).max(2);
    let folds = stratified_folds(y, k, seed);
    let mut oof = vec![0.0; y.len()];
    for f in 0..k {
        let (tr, te) = fold_split(&folds, f);
        if te.is_empty() {
            continue;
        }
        let ytr: Vec<f64> = tr.iter().map(|&i| y[i]).collect();
        let m = train_svm(&x.select_rows(&tr), &ytr, params);
        for (i, d) in te.iter().zip(m.decision(&x.select_rows(&te))) {
            oof[*i] = d;
        }
    }
    CalibratedSvm {
        svm: train_svm(x, y, params),
        platt: fit_platt(&oof, y),
    }
}
