//! Median imputation and standardization, fitted on training rows only.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::screens::ScreenValue;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub names: Vec<String>,
    /// Per-column training median of defined values (0 if none).
    pub medians: Vec<f64>,
    pub means: Vec<f64>,
    /// Sample standard deviation after imputation; 0 marks a constant column.
    pub sds: Vec<f64>,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

impl Preprocessor {
    pub fn fit(names: &[String], rows: &[Vec<ScreenValue>]) -> Result<Self> {
        let p = names.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::SchemaMismatch(format!(
                "row has {} values, expected {p}",
                bad.len()
            )));
        }
        let mut medians = Vec::with_capacity(p);
        let mut means = Vec::with_capacity(p);
        let mut sds = Vec::with_capacity(p);
        let n = rows.len() as f64;
        for j in 0..p {
            let mut defined: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
            let med = median(&mut defined).unwrap_or(0.0);
            let col: Vec<f64> = rows.iter().map(|r| r[j].unwrap_or(med)).collect();
            let mean = if col.is_empty() {
                0.0
            } else {
                col.iter().sum::<f64>() / n
            };
            let sd = if col.len() < 2 {
                0.0
            } else {
                (col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
            };
            medians.push(med);
            means.push(mean);
            sds.push(if sd.is_finite() && sd > 0.0 { sd } else { 0.0 });
        }
        Ok(Self {
            names: names.to_vec(),
            medians,
            means,
            sds,
        })
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn standardize(&self, j: usize, x: f64) -> f64 {
        if self.sds[j] > 0.0 {
            (x - self.means[j]) / self.sds[j]
        } else {
            0.0
        }
    }

    pub fn destandardize(&self, j: usize, z: f64) -> f64 {
        z * self.sds[j] + self.means[j]
    }

    /// Imputes and standardizes rows into an n x p matrix.
    pub fn transform(&self, rows: &[Vec<ScreenValue>]) -> Result<DMatrix<f64>> {
        let p = self.width();
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::SchemaMismatch(format!(
                "row has {} values, model expects {p}",
                bad.len()
            )));
        }
        Ok(DMatrix::from_fn(rows.len(), p, |i, j| {
            let v = rows[i][j].unwrap_or(self.medians[j]);
            self.standardize(j, v)
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("f{j}")).collect()
    }

    #[test]
    fn imputes_with_training_median() {
        let rows = vec![
            vec![Some(1.0), None],
            vec![Some(3.0), None],
            vec![None, None],
            vec![Some(10.0), None],
        ];
        let pre = Preprocessor::fit(&names(2), &rows).unwrap();
        assert_eq!(pre.medians, vec![3.0, 0.0]);
        assert_eq!(pre.sds[1], 0.0);
        let m = pre.transform(&rows).unwrap();
        assert!(m.column(1).iter().all(|v| *v == 0.0));
        let mean: f64 = m.column(0).iter().sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        let sd = (m.column(0).iter().map(|v| v * v).sum::<f64>() / 3.0).sqrt();
        assert!((sd - 1.0).abs() < 1e-12);
        assert!(pre.transform(&[vec![Some(1.0)]]).is_err());
    }

    proptest! {
        #[test]
        fn standardize_round_trip(col in proptest::collection::vec(-1e3f64..1e3, 2..30), x in -1e4f64..1e4) {
            let rows: Vec<Vec<ScreenValue>> = col.iter().map(|v| vec![Some(*v)]).collect();
            let pre = Preprocessor::fit(&names(1), &rows).unwrap();
            prop_assume!(pre.sds[0] > 1e-6);
            let back = pre.destandardize(0, pre.standardize(0, x));
            prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0) * 10.0);
        }
    }
}
