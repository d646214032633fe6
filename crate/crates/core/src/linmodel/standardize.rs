use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{CubvError, Result};

pub const STD_FLOOR: f64 = 1e-12;

/// Per-column centring and scaling fitted on a training sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl StandardizationParams {
    /// Population mean and standard deviation of every column; std floored
    /// at [`STD_FLOOR`]. Constant columns get their exact value as mean.
    pub fn fit(data: &Dataset) -> Result<Self> {
        let rows = data.n_samples();
        if rows < 2 {
            return Err(CubvError::invalid("standardization needs at least two rows"));
        }
        let n = data.n_features();
        let mut means = vec![0.0; n];
        for row in data.rows() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in means.iter_mut() {
            *m /= rows as f64;
        }
        let first = data.row(0);
        for j in 0..n {
            if data.rows().all(|r| r[j] == first[j]) {
                means[j] = first[j];
            }
        }
        let mut vars = vec![0.0; n];
        for row in data.rows() {
            for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stds = vars.into_iter().map(|s| (s / rows as f64).sqrt().max(STD_FLOOR)).collect();
        Ok(StandardizationParams { means, stds })
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let n = data.n_features();
        if n != self.means.len() {
            return Err(CubvError::invalid("standardization width mismatch"));
        }
        let mut out = Vec::with_capacity(data.features().len());
        for row in data.rows() {
            for j in 0..n {
                out.push((row[j] - self.means[j]) / self.stds[j]);
            }
        }
        data.with_features(n, out)
    }
}

pub fn standardize(data: &Dataset) -> Result<(Dataset, StandardizationParams)> {
    let params = StandardizationParams::fit(data)?;
    Ok((params.apply(data)?, params))
}
