//! Univariate-response PLS (PLS1) by NIPALS, deflating the predictors only.

use serde::{Deserialize, Serialize};

use super::svm::dot;
use crate::error::{CubvError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlsModel {
    pub k: usize,
    /// One unit-norm weight vector per component.
    pub x_weights: Vec<Vec<f64>>,
    pub x_loadings: Vec<Vec<f64>>,
    pub y_loadings: Vec<f64>,
    pub x_means: Vec<f64>,
    pub y_mean: f64,
}

/// Fit `k` components on the row-major `rows x cols` matrix `features`.
pub fn pls_fit(features: &[f64], cols: usize, labels: &[u8], k: usize) -> Result<PlsModel> {
    let rows = labels.len();
    if cols == 0 || features.len() != rows * cols {
        return Err(CubvError::invalid("feature matrix shape does not match labels"));
    }
    if k == 0 || k > cols.min(rows.saturating_sub(1)) {
        return Err(CubvError::invalid(format!(
            "k = {k} components requested, at most min(N - 1, m) = {} allowed",
            cols.min(rows.saturating_sub(1))
        )));
    }
    let y_mean = labels.iter().map(|&l| l as f64).sum::<f64>() / rows as f64;
    let y: Vec<f64> = labels.iter().map(|&l| l as f64 - y_mean).collect();
    if dot(&y, &y) <= 0.0 {
        return Err(CubvError::invalid("response has zero variance after centring"));
    }
    let mut x_means = vec![0.0; cols];
    for r in features.chunks_exact(cols) {
        for (m, v) in x_means.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in x_means.iter_mut() {
        *m /= rows as f64;
    }
    let mut x: Vec<f64> = features
        .chunks_exact(cols)
        .flat_map(|r| r.iter().zip(&x_means).map(|(v, m)| v - m))
        .collect();

    let mut model = PlsModel {
        k,
        x_weights: Vec::with_capacity(k),
        x_loadings: Vec::with_capacity(k),
        y_loadings: Vec::with_capacity(k),
        x_means,
        y_mean,
    };
    for comp in 0..k {
        // w = X^T y / |X^T y|
        let mut w = vec![0.0; cols];
        for (r, yi) in x.chunks_exact(cols).zip(&y) {
            for (wj, v) in w.iter_mut().zip(r) {
                *wj += v * yi;
            }
        }
        let norm = dot(&w, &w).sqrt();
        if !(norm > 1e-12) {
            return Err(CubvError::invalid(format!(
                "component {} is degenerate: deflated predictors are uncorrelated with the response",
                comp + 1
            )));
        }
        w.iter_mut().for_each(|v| *v /= norm);
        let t: Vec<f64> = x.chunks_exact(cols).map(|r| dot(r, &w)).collect();
        let tt = dot(&t, &t);
        let mut p = vec![0.0; cols];
        for (r, ti) in x.chunks_exact(cols).zip(&t) {
            for (pj, v) in p.iter_mut().zip(r) {
                *pj += v * ti;
            }
        }
        p.iter_mut().for_each(|v| *v /= tt);
        let q = dot(&y, &t) / tt;
        for (r, ti) in x.chunks_exact_mut(cols).zip(&t) {
            for (v, pj) in r.iter_mut().zip(&p) {
                *v -= ti * pj;
            }
        }
        model.x_weights.push(w);
        model.x_loadings.push(p);
        model.y_loadings.push(q);
    }
    Ok(model)
}

impl PlsModel {
    pub fn n_inputs(&self) -> usize {
        self.x_means.len()
    }

    /// Scores of new rows: centre, then project and deflate component by component.
    pub fn transform(&self, features: &[f64]) -> Result<Vec<f64>> {
        let cols = self.n_inputs();
        if features.len() % cols != 0 {
            return Err(CubvError::invalid("feature width does not match the PLS model"));
        }
        let mut scores = Vec::with_capacity(features.len() / cols * self.k);
        let mut x = vec![0.0; cols];
        for r in features.chunks_exact(cols) {
            for ((xi, v), m) in x.iter_mut().zip(r).zip(&self.x_means) {
                *xi = v - m;
            }
            for (w, p) in self.x_weights.iter().zip(&self.x_loadings) {
                let t = dot(&x, w);
                scores.push(t);
                for (xi, pj) in x.iter_mut().zip(p) {
                    *xi -= t * pj;
                }
            }
        }
        Ok(scores)
    }
}

/// Convenience wrapper matching the transform contract on the raw matrix.
pub fn pls_transform(model: &PlsModel, features: &[f64]) -> Result<Vec<f64>> {
    model.transform(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn noise(rows: usize, cols: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::seed::rng(seed);
        (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Leading eigenvector of X^T y y^T X by power iteration; for a rank-one
    /// matrix this is X^T y up to scale, reached by an independent route.
    fn power_direction(x: &[f64], cols: usize, y: &[f64]) -> Vec<f64> {
        let mut v = vec![1.0; cols];
        for _ in 0..50 {
            let xv: Vec<f64> = x.chunks_exact(cols).map(|r| dot(r, &v)).collect();
            let s = dot(&xv, y);
            let mut next = vec![0.0; cols];
            for (r, yi) in x.chunks_exact(cols).zip(y) {
                for (nj, v) in next.iter_mut().zip(r) {
                    *nj += v * yi * s;
                }
            }
            let norm = dot(&next, &next).sqrt();
            v = next.into_iter().map(|a| a / norm).collect();
        }
        v
    }

    #[test]
    fn informative_column_dominates() {
        let (rows, cols) = (60, 6);
        let mut x = noise(rows, cols, 11);
        for r in 0..rows {
            x[r * cols + 3] = if r % 2 == 0 { 1.5 } else { -1.5 } + 0.1 * x[r * cols + 3];
        }
        let labels: Vec<u8> = (0..rows).map(|r| u8::from(x[r * cols + 3] > 0.0)).collect();
        let model = pls_fit(&x, cols, &labels, 1).unwrap();
        let w = &model.x_weights[0];
        let arg = (0..cols).max_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs())).unwrap();
        assert_eq!(arg, 3);

        let ymean = labels.iter().map(|&l| l as f64).sum::<f64>() / rows as f64;
        let y: Vec<f64> = labels.iter().map(|&l| l as f64 - ymean).collect();
        let xm: Vec<f64> = (0..rows * cols).map(|i| x[i] - model.x_means[i % cols]).collect();
        let oracle = power_direction(&xm, cols, &y);
        let oarg = (0..cols).max_by(|&a, &b| oracle[a].abs().total_cmp(&oracle[b].abs())).unwrap();
        assert_eq!(oarg, 3);
        assert!((dot(w, &oracle).abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_feature_is_scaled_copy() {
        let x = vec![0.5, 1.5, -2.0, 3.0, 0.0];
        let labels = vec![0, 1, 0, 1, 1];
        let model = pls_fit(&x, 1, &labels, 1).unwrap();
        let t = model.transform(&x).unwrap();
        let mean = x.iter().sum::<f64>() / 5.0;
        let ratio = t[0] / (x[0] - mean);
        assert!((ratio.abs() - 1.0).abs() < 1e-12);
        for (ti, xi) in t.iter().zip(&x) {
            assert!((ti - ratio * (xi - mean)).abs() < 1e-12);
        }
    }

    #[test]
    fn training_scores_are_orthogonal() {
        let (rows, cols) = (40, 5);
        let x = noise(rows, cols, 5);
        let labels: Vec<u8> = (0..rows).map(|r| u8::from(x[r * cols] + x[r * cols + 1] > 0.0)).collect();
        let model = pls_fit(&x, cols, &labels, 2).unwrap();
        let s = model.transform(&x).unwrap();
        let t1: Vec<f64> = s.iter().step_by(2).copied().collect();
        let t2: Vec<f64> = s.iter().skip(1).step_by(2).copied().collect();
        let rel = dot(&t1, &t2).abs() / (dot(&t1, &t1).sqrt() * dot(&t2, &t2).sqrt());
        assert!(rel < 1e-8, "{rel}");
    }

    #[test]
    fn too_many_components() {
        let x = noise(5, 3, 1);
        assert!(pls_fit(&x, 3, &[0, 1, 0, 1, 0], 4).is_err());
        assert!(pls_fit(&x, 3, &[0, 1, 0, 1, 0], 0).is_err());
        assert!(pls_fit(&x, 3, &[1, 1, 1, 1, 1], 1).is_err());
    }
}
