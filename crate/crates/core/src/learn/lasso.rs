//! L1-penalized logistic regression on a warm-started lambda path, with the
//! penalty chosen by cross-validated deviance.
//!
//! Objective: (1/n) * sum[log(1 + e^eta) - y * eta] + lambda * |beta|_1, with
//! an unpenalized intercept. Each outer step builds the quadratic
//! approximation at the current iterate and solves it by cyclic coordinate
//! descent; a backtracking line search on the true objective keeps the outer
//! iteration monotone.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::folds::{fold_split, stratified_folds};
use super::logistic::{logit, sigmoid, softplus, LinearModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoParams {
    pub n_lambda: usize,
    /// Smallest lambda as a fraction of the largest; `None` picks 1e-4, or
    /// 1e-2 when there are more features than rows.
    pub min_ratio: Option<f64>,
    pub cv_folds: usize,
}

impl Default for LassoParams {
    fn default() -> Self {
        Self {
            n_lambda: 50,
            min_ratio: None,
            cv_folds: 10,
        }
    }
}

pub fn lasso_objective(x: &DMatrix<f64>, y: &[f64], lambda: f64, model: &LinearModel) -> f64 {
    let n = x.nrows() as f64;
    let eta = model.decision(x);
    let nll: f64 = eta.iter().zip(y).map(|(e, yi)| softplus(*e) - yi * e).sum::<f64>() / n;
    nll + lambda * model.coef.iter().map(|b| b.abs()).sum::<f64>()
}

/// Smallest lambda at which every slope is zero.
pub fn lambda_max(x: &DMatrix<f64>, y: &[f64]) -> f64 {
    let n = x.nrows() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    (0..x.ncols())
        .map(|j| (0..x.nrows()).map(|i| x[(i, j)] * (y[i] - ybar)).sum::<f64>().abs() / n)
        .fold(0.0, f64::max)
}

/// Log-spaced decreasing lambdas from [`lambda_max`].
pub fn lambda_path(x: &DMatrix<f64>, y: &[f64], params: &LassoParams) -> Vec<f64> {
    let top = lambda_max(x, y);
    if top <= 0.0 {
        return vec![0.0];
    }
    let ratio = params
        .min_ratio
        .unwrap_or(if x.nrows() < x.ncols() { 1e-2 } else { 1e-4 });
    let k = params.n_lambda.max(2);
    (0..k).map(|i| top * ratio.powf(i as f64 / (k - 1) as f64)).collect()
}

/// Coordinate descent stops when no coefficient moves by more than this
/// (in units of its weighted column norm).
const INNER_TOL: f64 = 1e-12;
const OUTER_TOL: f64 = 1e-10;
/// The path stops once this share of the null deviance is explained, or
/// once a step along it improves the deviance by less than `PATH_MIN_GAIN`
/// (relative), as the remaining fits would be indistinguishable.
const PATH_MAX_EXPLAINED: f64 = 0.999;
const PATH_MIN_GAIN: f64 = 1e-5;

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// Weighted least-squares lasso subproblem
/// (1/2n) sum w_i (z_i - b0 - x_i.beta)^2 + lambda |beta|_1, with residuals
/// `r = z - b0 - X beta` kept current.
struct Subproblem<'a> {
    cols: &'a [Vec<f64>],
    w: &'a [f64],
    xw2: &'a [f64],
    wsum: f64,
    lambda: f64,
    b0: f64,
    beta: Vec<f64>,
    r: Vec<f64>,
}

impl Subproblem<'_> {
    /// One cyclic pass; returns the largest scaled coordinate move.
    fn sweep(&mut self, only_active: bool) -> f64 {
        let n = self.r.len();
        let nf = n as f64;
        let mut delta: f64 = 0.0;
        let shift = self.r.iter().zip(self.w).map(|(ri, wi)| ri * wi).sum::<f64>() / self.wsum;
        if shift != 0.0 {
            self.b0 += shift;
            self.r.iter_mut().for_each(|ri| *ri -= shift);
            delta = delta.max(shift.abs());
        }
        for j in 0..self.beta.len() {
            let (bj, xw2) = (self.beta[j], self.xw2[j]);
            if xw2 == 0.0 || (only_active && bj == 0.0) {
                continue;
            }
            let c = &self.cols[j];
            let grad = (0..n).map(|i| self.w[i] * c[i] * self.r[i]).sum::<f64>() / nf;
            let new = soft_threshold(grad + xw2 * bj, self.lambda) / xw2;
            let d = new - bj;
            if d != 0.0 {
                for (ri, ci) in self.r.iter_mut().zip(c) {
                    *ri -= d * ci;
                }
                self.beta[j] = new;
                delta = delta.max(d.abs() * xw2.sqrt());
            }
        }
        delta
    }

    /// Moves to the exact minimizer over the active coefficients with their
    /// current signs, or as far as the signs allow. Columns that are linear
    /// combinations of earlier active ones are held fixed, so duplicated
    /// screens do not make the system singular. Returns whether the full step
    /// was taken, or `None` if the solve broke down.
    fn newton(&mut self, z: &[f64]) -> Option<bool> {
        let active: Vec<usize> = (0..self.beta.len()).filter(|&j| self.beta[j] != 0.0).collect();
        let k = active.len() + 1;
        let n = self.r.len();
        let nf = n as f64;
        let sw: Vec<f64> = self.w.iter().map(|w| w.sqrt()).collect();
        let xa = DMatrix::<f64>::from_fn(n, k, |i, a| {
            sw[i] * if a == 0 { 1.0 } else { self.cols[active[a - 1]][i] }
        });
        let g = xa.tr_mul(&xa) / nf;
        let zw = nalgebra::DVector::<f64>::from_fn(n, |i, _| sw[i] * z[i]);
        let mut rhs: Vec<f64> = (xa.tr_mul(&zw) / nf).iter().copied().collect();
        for a in 1..k {
            rhs[a] -= self.lambda * self.beta[active[a - 1]].signum();
        }
        let coef = |a: usize, s: &Self| if a == 0 { s.b0 } else { s.beta[active[a - 1]] };

        // Incremental Cholesky, dropping columns with a negligible pivot.
        let mut kept: Vec<usize> = Vec::with_capacity(k);
        let mut l: Vec<Vec<f64>> = Vec::with_capacity(k);
        for a in 0..k {
            let mut row = Vec::with_capacity(kept.len() + 1);
            for (m, &b) in kept.iter().enumerate() {
                let dot: f64 = (0..m).map(|q| l[m][q] * row[q]).sum();
                row.push((g[(a, b)] - dot) / l[m][m]);
            }
            let d = g[(a, a)] - row.iter().map(|v| v * v).sum::<f64>();
            if g[(a, a)] > 0.0 && d > 1e-10 * g[(a, a)] {
                row.push(d.sqrt());
                l.push(row);
                kept.push(a);
            }
        }
        let fixed: Vec<usize> = (0..k).filter(|a| !kept.contains(a)).collect();
        let b: Vec<f64> = kept
            .iter()
            .map(|&a| rhs[a] - fixed.iter().map(|&f| g[(a, f)] * coef(f, self)).sum::<f64>())
            .collect();
        let m = kept.len();
        let mut sol = vec![0.0; m];
        for i in 0..m {
            sol[i] = (b[i] - (0..i).map(|q| l[i][q] * sol[q]).sum::<f64>()) / l[i][i];
        }
        for i in (0..m).rev() {
            sol[i] = (sol[i] - (i + 1..m).map(|q| l[q][i] * sol[q]).sum::<f64>()) / l[i][i];
        }
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        // Walk towards the solution, stopping where the first coefficient
        // reaches zero; up to that point the signs, and so the objective, agree.
        let mut t = 1.0;
        let mut hit = None;
        for (&a, &s) in kept.iter().zip(&sol) {
            if a == 0 {
                continue;
            }
            let bj = coef(a, self);
            if s == 0.0 || s.signum() != bj.signum() {
                let tj = bj / (bj - s);
                if tj < t {
                    t = tj;
                    hit = Some(active[a - 1]);
                }
            }
        }
        for (&a, &s) in kept.iter().zip(&sol) {
            if a == 0 {
                self.b0 += t * (s - self.b0);
            } else {
                let j = active[a - 1];
                self.beta[j] += t * (s - self.beta[j]);
            }
        }
        if let Some(j) = hit {
            self.beta[j] = 0.0;
        }
        for (i, (ri, zi)) in self.r.iter_mut().zip(z).enumerate() {
            *ri = zi - self.b0 - active.iter().map(|&j| self.beta[j] * self.cols[j][i]).sum::<f64>();
        }
        Some(hit.is_none())
    }

    fn solve(&mut self, z: &[f64]) {
        for _ in 0..10_000 {
            if self.sweep(false) < INNER_TOL {
                return;
            }
            // A blocked step drops one coefficient; retry on the smaller set.
            while self.newton(z) == Some(false) {}
        }
    }
}

/// Solves the problem at a single `lambda`, starting from `warm` if given.
pub fn fit_lasso_at(x: &DMatrix<f64>, y: &[f64], lambda: f64, warm: Option<&LinearModel>) -> LinearModel {
    let (n, p) = (x.nrows(), x.ncols());
    let nf = n as f64;
    let mut model = match warm {
        Some(m) => m.clone(),
        None => {
            let ybar = y.iter().sum::<f64>() / nf;
            LinearModel {
                intercept: logit(ybar.clamp(1e-6, 1.0 - 1e-6)),
                coef: vec![0.0; p],
                converged: false,
            }
        }
    };
    let cols: Vec<Vec<f64>> = (0..p).map(|j| x.column(j).iter().copied().collect()).collect();
    let mut obj = lasso_objective(x, y, lambda, &model);
    model.converged = false;

    for _ in 0..100 {
        let eta = model.decision(x);
        let mut w = vec![0.0; n];
        let mut z = vec![0.0; n];
        for i in 0..n {
            let pi = sigmoid(eta[i]);
            w[i] = (pi * (1.0 - pi)).max(1e-5);
            z[i] = eta[i] + (y[i] - pi) / w[i];
        }
        let xw2: Vec<f64> = cols
            .iter()
            .map(|c| c.iter().zip(&w).map(|(v, wi)| wi * v * v).sum::<f64>() / nf)
            .collect();
        let wsum: f64 = w.iter().sum();

        let mut sub = Subproblem {
            cols: &cols,
            w: &w,
            xw2: &xw2,
            wsum,
            lambda,
            b0: model.intercept,
            beta: model.coef.clone(),
            r: (0..n).map(|i| z[i] - eta[i]).collect(),
        };
        sub.solve(&z);
        let (b0, beta) = (sub.b0, sub.beta);

        let mut t = 1.0;
        let mut next = None;
        for _ in 0..40 {
            let cand = LinearModel {
                intercept: model.intercept + t * (b0 - model.intercept),
                coef: model.coef.iter().zip(&beta).map(|(a, b)| a + t * (b - a)).collect(),
                converged: false,
            };
            let c = lasso_objective(x, y, lambda, &cand);
            if c <= obj + 1e-15 * obj.abs() {
                next = Some((cand, c));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, c)) = next else {
            model.converged = true;
            break;
        };
        let change = (cand.intercept - model.intercept).abs().max(
            cand.coef
                .iter()
                .zip(&model.coef)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
        model = cand;
        obj = c;
        if change < OUTER_TOL {
            model.converged = true;
            break;
        }
    }
    model
}

fn deviance(model: &LinearModel, x: &DMatrix<f64>, y: &[f64]) -> f64 {
    let eta = model.decision(x);
    2.0 * eta.iter().zip(y).map(|(e, yi)| softplus(*e) - yi * e).sum::<f64>()
}

/// Fits the path with warm starts, stopping early once the fit saturates;
/// the result may therefore be shorter than `lambdas`.
pub fn fit_lasso_path(x: &DMatrix<f64>, y: &[f64], lambdas: &[f64]) -> Vec<LinearModel> {
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let null = LinearModel {
        intercept: logit(ybar.clamp(1e-6, 1.0 - 1e-6)),
        coef: vec![0.0; x.ncols()],
        converged: true,
    };
    let null_dev = deviance(&null, x, y);
    let mut out: Vec<LinearModel> = Vec::with_capacity(lambdas.len());
    let mut prev_dev = null_dev;
    for &l in lambdas {
        let m = fit_lasso_at(x, y, l, out.last());
        let dev = deviance(&m, x, y);
        out.push(m);
        if null_dev <= 0.0 || 1.0 - dev / null_dev >= PATH_MAX_EXPLAINED {
            break;
        }
        if out.len() > 1 && (prev_dev - dev) < PATH_MIN_GAIN * prev_dev {
            break;
        }
        prev_dev = dev;
    }
    out
}

fn rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    x.select_rows(idx)
}

fn mean_deviance(model: &LinearModel, x: &DMatrix<f64>, y: &[f64]) -> f64 {
    deviance(model, x, y) / y.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub model: LinearModel,
    pub lambda: f64,
}

/// Chooses lambda by `cv_folds`-fold deviance (ties go to the larger
/// penalty) and refits on all rows.
pub fn fit_lasso_cv(x: &DMatrix<f64>, y: &[f64], params: &LassoParams, seed: u64) -> LassoFit {
    let lambdas = lambda_path(x, y, params);
    let k = params.cv_folds.min(y.len()).max(2);
    let folds = stratified_folds(y, k, seed);
    let mut dev = vec![0.0; lambdas.len()];
    for f in 0..k {
        let (tr, te) = fold_split(&folds, f);
        if te.is_empty() {
            continue;
        }
        let ytr: Vec<f64> = tr.iter().map(|&i| y[i]).collect();
        let yte: Vec<f64> = te.iter().map(|&i| y[i]).collect();
        let (xtr, xte) = (rows(x, &tr), rows(x, &te));
        let path = fit_lasso_path(&xtr, &ytr, &lambdas);
        for (l, d) in dev.iter_mut().enumerate() {
            // Past an early stop the last fit stands in for the rest.
            let m = &path[l.min(path.len() - 1)];
            *d += mean_deviance(m, &xte, &yte) * te.len() as f64;
        }
    }
    let best = (0..lambdas.len()).fold(0, |b, l| if dev[l] < dev[b] { l } else { b });
    let mut path = fit_lasso_path(x, y, &lambdas[..=best]);
    let lambda = lambdas[path.len() - 1];
    LassoFit {
        model: path.pop().expect("non-empty path"),
        lambda,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::logistic::{fit_logistic, LogisticParams};
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn problem(seed: u64, n: usize, p: usize) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = rng_from_seed(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-2.0..2.0));
        let y = (0..n)
            .map(|i| {
                let z = 1.2 * x[(i, 0)] - 0.8 * x[(i, 1)] + rng.random_range(-2.0..2.0);
                f64::from(z > 0.0)
            })
            .collect();
        (x, y)
    }

    fn kkt_violation(x: &DMatrix<f64>, y: &[f64], lambda: f64, m: &LinearModel) -> f64 {
        let n = x.nrows() as f64;
        let p = m.predict_proba(x);
        let mut worst: f64 = (0..x.nrows()).map(|i| p[i] - y[i]).sum::<f64>().abs() / n;
        for j in 0..x.ncols() {
            let g = (0..x.nrows()).map(|i| x[(i, j)] * (y[i] - p[i])).sum::<f64>() / n;
            let v = if m.coef[j] == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g - lambda * m.coef[j].signum()).abs()
            };
            worst = worst.max(v);
        }
        worst
    }

    #[test]
    fn all_zero_at_lambda_max() {
        let (x, y) = problem(1, 60, 4);
        let m = fit_lasso_at(&x, &y, lambda_max(&x, &y) * 1.0001, None);
        assert!(m.coef.iter().all(|c| *c == 0.0));
        let path = lambda_path(&x, &y, &LassoParams::default());
        assert_eq!(path.len(), 50);
        assert!((path[49] / path[0] - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn zero_penalty_matches_logistic() {
        let (x, y) = problem(2, 120, 3);
        let a = fit_lasso_at(&x, &y, 0.0, None);
        let b = fit_logistic(&x, &y, &LogisticParams::default());
        assert!((a.intercept - b.intercept).abs() < 1e-4);
        for (ca, cb) in a.coef.iter().zip(&b.coef) {
            assert!((ca - cb).abs() < 1e-4, "{ca} vs {cb}");
        }
    }

    #[test]
    fn cv_is_deterministic_and_recovers_signs() {
        let (x, y) = problem(3, 80, 6);
        let a = fit_lasso_cv(&x, &y, &LassoParams::default(), 9);
        let b = fit_lasso_cv(&x, &y, &LassoParams::default(), 9);
        assert_eq!(a, b);
        assert!(a.model.coef[0] > 0.0 && a.model.coef[1] < 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn kkt_holds(seed in 0u64..500, frac in 0.01f64..0.9) {
            let (x, y) = problem(seed, 50, 5);
            let lambda = lambda_max(&x, &y) * frac;
            let m = fit_lasso_at(&x, &y, lambda, None);
            let v = kkt_violation(&x, &y, lambda, &m);
            prop_assert!(v <= 1e-6, "violation {}", v);
        }

        #[test]
        fn path_is_monotone_in_objective(seed in 0u64..500) {
            let (x, y) = problem(seed, 40, 4);
            let lambdas = lambda_path(&x, &y, &LassoParams { n_lambda: 8, ..Default::default() });
            let path = fit_lasso_path(&x, &y, &lambdas);
            prop_assert!(!path.is_empty() && path.len() <= lambdas.len());
            for (l, m) in lambdas.iter().zip(path) {
                let zero = LinearModel::zeros(4);
                prop_assert!(lasso_objective(&x, &y, *l, &m) <= lasso_objective(&x, &y, *l, &zero) + 1e-12);
            }
        }
    }
}
