//! CART classification trees with Gini impurity.
//!
//! Rows are presorted once per feature; a node owns a contiguous segment of
//! every sorted index array, and a split stable-partitions each segment, so
//! a node costs O(p * m) instead of O(p * m log m).

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    /// Features drawn per split; `None` means all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            min_leaf: 1,
            max_depth: None,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: impl Fn(usize) -> f64) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => k = if row(feature) <= threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows()).map(|i| self.predict_row(|j| x[(i, j)])).collect()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, k: usize) -> usize {
            match t.nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

/// Sum of child Gini impurities weighted by child size, up to a factor 2.
fn weighted_gini(pos_l: f64, n_l: f64, pos_r: f64, n_r: f64) -> f64 {
    pos_l * (n_l - pos_l) / n_l + pos_r * (n_r - pos_r) / n_r
}

struct Best {
    feature: usize,
    threshold: f64,
    score: f64,
}

/// Row indices sorted by each feature (ties by row index), shared by every
/// tree grown on the same matrix.
#[derive(Debug, Clone)]
pub struct Presorted {
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(x: &DMatrix<f64>) -> Self {
        let order = (0..x.ncols())
            .map(|j| {
                let mut idx: Vec<u32> = (0..x.nrows() as u32).collect();
                idx.sort_by(|&a, &b| x[(a as usize, j)].total_cmp(&x[(b as usize, j)]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { order }
    }
}

/// Grows a tree on the rows `samples` (repeats allowed, as in a bootstrap
/// sample). `rng` is only consulted when `max_features` is below the
/// feature count.
pub fn fit_tree<R: Rng>(x: &DMatrix<f64>, y: &[f64], samples: &[usize], params: &TreeParams, rng: &mut R) -> Tree {
    let mut counts = vec![0u32; x.nrows()];
    for &i in samples {
        counts[i] += 1;
    }
    fit_weighted(x, y, &Presorted::new(x), &counts, params, rng)
}

/// Same as [`fit_tree`] with `counts[i]` copies of row `i`. Copies of a row
/// share its value, so splitting on multiplicities chooses exactly the splits
/// that the expanded sample would.
pub fn fit_weighted<R: Rng>(
    x: &DMatrix<f64>,
    y: &[f64],
    pre: &Presorted,
    counts: &[u32],
    params: &TreeParams,
    rng: &mut R,
) -> Tree {
    let p = x.ncols();
    let min_leaf = params.min_leaf.max(1) as f64;
    let mtry = params.max_features.unwrap_or(p).clamp(1, p.max(1));
    let mut sorted: Vec<Vec<u32>> = pre
        .order
        .iter()
        .map(|o| o.iter().copied().filter(|&i| counts[i as usize] > 0).collect())
        .collect();
    let m = sorted.first().map_or(0, Vec::len);
    let rows: Vec<u32> = match sorted.first() {
        Some(s) => s.clone(),
        None => (0..x.nrows() as u32).filter(|&i| counts[i as usize] > 0).collect(),
    };
    let wy: Vec<f64> = (0..x.nrows()).map(|i| f64::from(counts[i]) * y[i]).collect();
    let wc: Vec<f64> = counts.iter().map(|&c| f64::from(c)).collect();

    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut stack = vec![(0usize, 0usize, rows.len(), 0usize)];
    let mut goes_left = vec![false; x.nrows()];
    let mut buf: Vec<u32> = Vec::with_capacity(m);

    while let Some((id, start, end, depth)) = stack.pop() {
        let seg_rows: &[u32] = match sorted.first() {
            Some(s) => &s[start..end],
            None => &rows[start..end],
        };
        let (mut pos, mut nf) = (0.0, 0.0);
        for &i in seg_rows {
            pos += wy[i as usize];
            nf += wc[i as usize];
        }
        let leaf = Node::Leaf {
            value: if nf == 0.0 { 0.0 } else { pos / nf },
        };
        let parent = if nf == 0.0 { 0.0 } else { pos * (nf - pos) / nf };
        let depth_ok = params.max_depth.is_none_or(|d| depth < d);
        if p == 0 || nf < 2.0 * min_leaf || parent <= 0.0 || !depth_ok {
            nodes[id] = leaf;
            continue;
        }

        let candidates: Vec<usize> = if mtry >= p {
            (0..p).collect()
        } else {
            let mut c = sample(rng, p, mtry).into_vec();
            c.sort_unstable();
            c
        };

        let mut best: Option<Best> = None;
        for &j in &candidates {
            let seg = &sorted[j][start..end];
            let (mut pos_l, mut n_l) = (0.0, 0.0);
            for k in 0..seg.len() - 1 {
                let i = seg[k] as usize;
                pos_l += wy[i];
                n_l += wc[i];
                if n_l < min_leaf || nf - n_l < min_leaf {
                    continue;
                }
                let (a, b) = (x[(i, j)], x[(seg[k + 1] as usize, j)]);
                if a == b {
                    continue;
                }
                let score = weighted_gini(pos_l, n_l, pos - pos_l, nf - n_l);
                if best.as_ref().is_none_or(|bst| score < bst.score - 1e-12) {
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(Best {
                        feature: j,
                        threshold,
                        score,
                    });
                }
            }
        }
        let Some(best) = best.filter(|b| parent - b.score > 1e-12) else {
            nodes[id] = leaf;
            continue;
        };

        let mut n_left = 0;
        for &i in &sorted[best.feature][start..end] {
            let left = x[(i as usize, best.feature)] <= best.threshold;
            goes_left[i as usize] = left;
            n_left += usize::from(left);
        }
        for s in sorted.iter_mut() {
            buf.clear();
            buf.extend(s[start..end].iter().filter(|&&i| goes_left[i as usize]));
            buf.extend(s[start..end].iter().filter(|&&i| !goes_left[i as usize]));
            s[start..end].copy_from_slice(&buf);
        }

        let left = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right: left + 1,
        };
        stack.push((left + 1, start + n_left, end, depth + 1));
        stack.push((left, start, start + n_left, depth + 1));
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    /// Exact comparison of child impurity sums pos*(n-pos)/n via integers.
    fn score(counts: (i128, i128, i128, i128)) -> (i128, i128) {
        let (pl, nl, pr, nr) = counts;
        (pl * (nl - pl) * nr + pr * (nr - pr) * nl, nl * nr)
    }

    fn less(a: (i128, i128), b: (i128, i128)) -> bool {
        a.0 * b.1 < b.0 * a.1
    }

    type Predictor = Box<dyn Fn(&[f64]) -> f64>;

    /// Naive recursive CART: exhaustive (feature, threshold) search at every
    /// node, first best in (feature, threshold) order.
    #[allow(clippy::needless_range_loop)]
    fn oracle(x: &[Vec<f64>], y: &[f64], rows: Vec<usize>, min_leaf: usize, out: &mut Vec<(usize, f64)>) -> Predictor {
        let n = rows.len() as i128;
        let pos = rows.iter().filter(|&&i| y[i] == 1.0).count() as i128;
        let value = pos as f64 / n as f64;
        let parent = (pos * (n - pos), n);
        let mut best: Option<((i128, i128), usize, f64)> = None;
        let p = x[0].len();
        for j in 0..p {
            let mut vals: Vec<f64> = rows.iter().map(|&i| x[i][j]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let thr = w[0] + (w[1] - w[0]) / 2.0;
                let left: Vec<usize> = rows.iter().copied().filter(|&i| x[i][j] <= thr).collect();
                let nl = left.len() as i128;
                let nr = n - nl;
                if (nl as usize) < min_leaf || (nr as usize) < min_leaf {
                    continue;
                }
                let pl = left.iter().filter(|&&i| y[i] == 1.0).count() as i128;
                let s = score((pl, nl, pos - pl, nr));
                if best.as_ref().is_none_or(|b| less(s, b.0)) {
                    best = Some((s, j, thr));
                }
            }
        }
        match best {
            Some((s, j, thr)) if less(s, parent) => {
                out.push((j, thr));
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][j] <= thr);
                let lf = oracle(x, y, l, min_leaf, out);
                let rf = oracle(x, y, r, min_leaf, out);
                Box::new(move |row: &[f64]| if row[j] <= thr { lf(row) } else { rf(row) })
            }
            _ => Box::new(move |_: &[f64]| value),
        }
    }

    fn preorder(t: &Tree, k: usize, out: &mut Vec<(usize, f64)>) {
        if let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = t.nodes[k]
        {
            out.push((feature, threshold));
            preorder(t, left, out);
            preorder(t, right, out);
        }
    }

    #[test]
    fn perfect_single_split() {
        let x = DMatrix::from_row_slice(6, 2, &[1., 5., 2., 3., 3., 9., 10., 4., 11., 1., 12., 7.]);
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let t = fit_tree(
            &x,
            &y,
            &[0, 1, 2, 3, 4, 5],
            &TreeParams::default(),
            &mut rng_from_seed(0),
        );
        assert_eq!(t.depth(), 1);
        assert_eq!(t.predict(&x), y.to_vec());
        assert!(matches!(t.nodes[0], Node::Split { feature: 0, threshold, .. } if threshold == 6.5));
    }

    #[test]
    fn constant_features_give_a_leaf() {
        let x = DMatrix::from_element(5, 2, 1.0);
        let y = [0.0, 1.0, 1.0, 0.0, 1.0];
        let t = fit_tree(&x, &y, &[0, 1, 2, 3, 4], &TreeParams::default(), &mut rng_from_seed(0));
        assert_eq!(t.nodes, vec![Node::Leaf { value: 0.6 }]);
    }

    #[test]
    fn min_leaf_respected() {
        let mut rng = rng_from_seed(8);
        let x = DMatrix::from_fn(60, 3, |_, _| rng.random_range(0.0..1.0));
        let y: Vec<f64> = (0..60).map(|i| f64::from(x[(i, 0)] + 0.3 * x[(i, 1)] > 0.6)).collect();
        let rows: Vec<usize> = (0..60).collect();
        let t = fit_tree(
            &x,
            &y,
            &rows,
            &TreeParams {
                min_leaf: 5,
                ..Default::default()
            },
            &mut rng,
        );
        let mut counts = std::collections::HashMap::new();
        for i in 0..60 {
            let mut k = 0;
            while let Node::Split {
                feature,
                threshold,
                left,
                right,
            } = t.nodes[k]
            {
                k = if x[(i, feature)] <= threshold { left } else { right };
            }
            *counts.entry(k).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c >= 5), "{counts:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn matches_exhaustive_search(
            n in 2usize..=12,
            p in 1usize..=3,
            seed in 0u64..1_000_000,
            min_leaf in 1usize..3,
        ) {
            let mut rng = rng_from_seed(seed);
            // Small integer grid so that ties in values occur.
            let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(0..5) as f64).collect()).collect();
            let y: Vec<f64> = (0..n).map(|_| f64::from(rng.random_bool(0.5))).collect();
            let x = DMatrix::from_fn(n, p, |i, j| xs[i][j]);
            let rows: Vec<usize> = (0..n).collect();
            let params = TreeParams { min_leaf, ..Default::default() };
            let tree = fit_tree(&x, &y, &rows, &params, &mut rng);
            let mut want = Vec::new();
            let f = oracle(&xs, &y, rows, min_leaf, &mut want);
            let mut got = Vec::new();
            preorder(&tree, 0, &mut got);
            prop_assert_eq!(got, want);
            for row in &xs {
                let got = tree.predict_row(|j| row[j]);
                prop_assert!((got - f(row)).abs() < 1e-15);
            }
        }
    }
}
