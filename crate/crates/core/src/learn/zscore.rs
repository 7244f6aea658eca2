//! Per-feature standardization fitted on training data only.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Columns whose training deviation falls below this map to 0.
pub const MIN_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub mean: Vec<f64>,
    /// Population standard deviation of each training column.
    pub std: Vec<f64>,
}

impl ZScore {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut std = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            mean.push(m);
            std.push(var.sqrt());
        }
        Self { mean, std }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            if self.std[j] < MIN_STD {
                col.fill(0.0);
            } else {
                col.apply(|v| *v = (*v - self.mean[j]) / self.std[j]);
            }
        }
        out
    }
}

/// Standardize `train` and `test` with statistics of `train`.
pub fn zscore_fit_apply(train: &DMatrix<f64>, test: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let z = ZScore::fit(train);
    (z.apply(train), z.apply(test))
}
