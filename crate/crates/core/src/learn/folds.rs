use rand::seq::SliceRandom;

use crate::rng::rng_from_seed;

/// Stratified fold assignment: each class is shuffled with `seed` and dealt
/// round-robin, continuing the deal across classes so fold sizes differ by
/// at most one.
pub fn stratified_folds(y: &[f64], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_from_seed(seed);
    let mut fold = vec![0; y.len()];
    let mut next = 0;
    for class in [1.0, 0.0] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}

/// (train, held-out) row indices of fold `f`.
pub fn fold_split(folds: &[usize], f: usize) -> (Vec<usize>, Vec<usize>) {
    (0..folds.len()).partition(|&i| folds[i] != f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_and_stratified() {
        let y: Vec<f64> = (0..47).map(|i| if i < 23 { 1.0 } else { 0.0 }).collect();
        let f = stratified_folds(&y, 10, 5);
        for k in 0..10 {
            let members: Vec<usize> = (0..47).filter(|&i| f[i] == k).collect();
            assert!((4..=5).contains(&members.len()));
            let pos = members.iter().filter(|&&i| y[i] == 1.0).count();
            assert!((2..=3).contains(&pos));
        }
        assert_eq!(f, stratified_folds(&y, 10, 5));
    }
}
