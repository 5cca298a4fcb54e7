//! Ridge-stabilized logistic regression fitted by Newton / IRLS.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Intercept plus one coefficient per (standardized) feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub converged: bool,
}

impl LinearModel {
    pub fn zeros(p: usize) -> Self {
        Self {
            intercept: 0.0,
            coef: vec![0.0; p],
            converged: true,
        }
    }

    pub fn decision(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| self.intercept + self.coef.iter().enumerate().map(|(j, c)| c * x[(i, j)]).sum::<f64>())
            .collect()
    }

    pub fn predict_proba(&self, x: &DMatrix<f64>) -> Vec<f64> {
        self.decision(x).into_iter().map(sigmoid).collect()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// L2 penalty on the slopes.
    pub ridge: f64,
    pub max_iter: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            ridge: 1e-6,
            max_iter: 100,
        }
    }
}

fn linear_predictor(x: &DMatrix<f64>, beta: &[f64]) -> Vec<f64> {
    (0..x.nrows())
        .map(|i| beta[0] + (0..x.ncols()).map(|j| beta[j + 1] * x[(i, j)]).sum::<f64>())
        .collect()
}

/// Mean negative log-likelihood plus (ridge / 2) * |slopes|^2; `beta[0]` is
/// the intercept.
pub fn logistic_objective(x: &DMatrix<f64>, y: &[f64], ridge: f64, beta: &[f64]) -> f64 {
    let n = x.nrows() as f64;
    let eta = linear_predictor(x, beta);
    let nll: f64 = eta.iter().zip(y).map(|(e, yi)| softplus(*e) - yi * e).sum::<f64>() / n;
    nll + 0.5 * ridge * beta[1..].iter().map(|b| b * b).sum::<f64>()
}

/// Analytic gradient of [`logistic_objective`].
pub fn logistic_gradient(x: &DMatrix<f64>, y: &[f64], ridge: f64, beta: &[f64]) -> Vec<f64> {
    let n = x.nrows() as f64;
    let eta = linear_predictor(x, beta);
    let mut g = vec![0.0; beta.len()];
    for (i, e) in eta.iter().enumerate() {
        let r = (sigmoid(*e) - y[i]) / n;
        g[0] += r;
        for j in 0..x.ncols() {
            g[j + 1] += r * x[(i, j)];
        }
    }
    for j in 1..beta.len() {
        g[j] += ridge * beta[j];
    }
    g
}

/// Damped Newton iterations on [`logistic_objective`]. Under perfect
/// separation the iteration cap is reached and `converged` is false; the
/// returned coefficients still give valid probabilities.
pub fn fit_logistic(x: &DMatrix<f64>, y: &[f64], params: &LogisticParams) -> LinearModel {
    let (n, p) = (x.nrows(), x.ncols());
    let d = p + 1;
    let ybar = y.iter().sum::<f64>() / n as f64;
    let mut beta = vec![0.0; d];
    beta[0] = logit(ybar.clamp(1e-6, 1.0 - 1e-6));
    let mut obj = logistic_objective(x, y, params.ridge, &beta);
    let mut converged = false;

    for _ in 0..params.max_iter {
        let eta = linear_predictor(x, &beta);
        let grad = DVector::from_vec(logistic_gradient(x, y, params.ridge, &beta));
        let mut h = DMatrix::<f64>::zeros(d, d);
        for i in 0..n {
            let pi = sigmoid(eta[i]);
            let w = (pi * (1.0 - pi)).max(1e-12) / n as f64;
            for a in 0..d {
                let xa = if a == 0 { 1.0 } else { x[(i, a - 1)] };
                if xa == 0.0 {
                    continue;
                }
                for b in a..d {
                    let xb = if b == 0 { 1.0 } else { x[(i, b - 1)] };
                    h[(a, b)] += w * xa * xb;
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
            if a > 0 {
                h[(a, a)] += params.ridge;
            }
        }
        let step = match solve_spd(h, &grad) {
            Some(s) => s,
            None => break,
        };
        // Backtracking keeps the objective monotone.
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b - t * s).collect();
            let c = logistic_objective(x, y, params.ridge, &cand);
            if c <= obj + 1e-15 * obj.abs() {
                accepted = Some((cand, c));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, c)) = accepted else { break };
        let change = beta.iter().zip(&cand).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        beta = cand;
        obj = c;
        if change < 1e-10 || grad.amax() < 1e-12 {
            converged = true;
            break;
        }
    }
    LinearModel {
        intercept: beta[0],
        coef: beta[1..].to_vec(),
        converged,
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn solve_spd(mut h: DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let d = h.nrows();
    let mut jitter = 0.0;
    for _ in 0..8 {
        if let Some(ch) = h.clone().cholesky() {
            return Some(ch.solve(g));
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 100.0 };
        for a in 0..d {
            h[(a, a)] += jitter;
        }
    }
    None
}
