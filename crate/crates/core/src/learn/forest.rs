//! Bootstrap tree ensembles: bagging (all features at every split) and
//! random forests (a fresh feature subset per split).

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_weighted, Presorted, Tree, TreeParams};
use crate::rng::child_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    /// Features per split; `None` = ceil(sqrt(p)).
    pub max_features: Option<usize>,
}

impl ForestParams {
    pub fn bagging() -> Self {
        Self {
            n_trees: 500,
            min_leaf: 1,
            max_depth: None,
            max_features: Some(usize::MAX),
        }
    }

    pub fn random_forest() -> Self {
        Self {
            n_trees: 500,
            min_leaf: 5,
            max_depth: None,
            max_features: None,
        }
    }

    fn tree_params(&self, p: usize) -> TreeParams {
        let mtry = self
            .max_features
            .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
            .min(p);
        TreeParams {
            min_leaf: self.min_leaf,
            max_depth: self.max_depth,
            max_features: Some(mtry),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub trees: Vec<Tree>,
}

impl TreeEnsemble {
    pub fn predict_proba(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let k = self.trees.len() as f64;
        (0..x.nrows())
            .map(|i| self.trees.iter().map(|t| t.predict_row(|j| x[(i, j)])).sum::<f64>() / k)
            .collect()
    }
}

/// Tree `t` draws its bootstrap sample and split features from
/// `child_rng(seed, t)`, so the result does not depend on scheduling.
pub fn fit_ensemble(x: &DMatrix<f64>, y: &[f64], params: &ForestParams, seed: u64) -> TreeEnsemble {
    let n = x.nrows();
    let tp = params.tree_params(x.ncols());
    let pre = Presorted::new(x);
    let trees = (0..params.n_trees.max(1))
        .into_par_iter()
        .map(|t| {
            let mut rng = child_rng(seed, t as u64);
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            fit_weighted(x, y, &pre, &counts, &tp, &mut rng)
        })
        .collect();
    TreeEnsemble { trees }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn data() -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = rng_from_seed(2);
        let x = DMatrix::from_fn(80, 4, |_, _| rng.random_range(-1.0..1.0));
        let y = (0..80).map(|i| f64::from(x[(i, 0)] * x[(i, 1)] > 0.0)).collect();
        (x, y)
    }

    #[test]
    fn full_subsample_forest_equals_bagging() {
        let (x, y) = data();
        let bag = ForestParams {
            n_trees: 1,
            ..ForestParams::bagging()
        };
        let rf = ForestParams {
            n_trees: 1,
            min_leaf: 1,
            max_features: Some(4),
            ..ForestParams::random_forest()
        };
        assert_eq!(fit_ensemble(&x, &y, &bag, 17), fit_ensemble(&x, &y, &rf, 17));
    }

    #[test]
    fn deterministic_and_in_range() {
        let (x, y) = data();
        let p = ForestParams {
            n_trees: 40,
            ..ForestParams::random_forest()
        };
        let a = fit_ensemble(&x, &y, &p, 5);
        assert_eq!(a, fit_ensemble(&x, &y, &p, 5));
        let probs = a.predict_proba(&x);
        assert!(probs.iter().all(|v| (0.0..=1.0).contains(v)));
        let acc = probs
            .iter()
            .zip(&y)
            .filter(|(p, y)| (**p > 0.5) == (**y == 1.0))
            .count();
        assert!(acc >= 64, "training accuracy {acc}/80");
    }
}
