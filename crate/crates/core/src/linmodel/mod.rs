//! Linear classifier training, scoring and feature preprocessing.

mod pls;
mod standardize;
mod svm;

pub use pls::{pls_fit, pls_transform, PlsModel};
pub use standardize::{standardize, StandardizationParams, STD_FLOOR};
pub use svm::{train_linear_svm, train_linear_svm_traced, LinearModel, SolveTrace};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::Result;

/// Fraction of rows whose predicted label differs from the true one.
pub fn empirical_risk(model: &LinearModel, data: &Dataset) -> Result<f64> {
    Ok(error_count(model, data)? as f64 / data.n_samples() as f64)
}

pub fn error_count(model: &LinearModel, data: &Dataset) -> Result<usize> {
    model.check_dimension(data)?;
    Ok(data
        .rows()
        .zip(data.labels())
        .filter(|(x, &l)| model.predict(x) != l)
        .count())
}

/// Everything needed to turn a training sample into a classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub reg_c: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub standardize: bool,
    /// Optional PLS feature extraction fitted inside every training set.
    pub pls_components: Option<usize>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            reg_c: 1.0,
            tol: 1e-4,
            max_iter: 2_000_000,
            standardize: true,
            pls_components: None,
        }
    }
}

impl TrainerConfig {
    pub fn with_pls(mut self, k: usize) -> Self {
        self.pls_components = Some(k);
        self
    }
}

/// Standardization, optional PLS and the SVM, all fitted on one training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub input_scaler: Option<StandardizationParams>,
    pub pls: Option<PlsModel>,
    pub score_scaler: Option<StandardizationParams>,
    pub model: LinearModel,
}

impl FittedPipeline {
    pub fn fit(train: &Dataset, config: &TrainerConfig) -> Result<Self> {
        let mut data = train.clone();
        let input_scaler = if config.standardize {
            let params = StandardizationParams::fit(&data)?;
            data = params.apply(&data)?;
            Some(params)
        } else {
            None
        };
        let mut pls = None;
        let mut score_scaler = None;
        if let Some(k) = config.pls_components {
            let model = pls_fit(data.features(), data.n_features(), data.labels(), k)?;
            data = data.with_features(k, model.transform(data.features())?)?;
            pls = Some(model);
            if config.standardize {
                let params = StandardizationParams::fit(&data)?;
                data = params.apply(&data)?;
                score_scaler = Some(params);
            }
        }
        let model = train_linear_svm(&data, config.reg_c, config.tol, config.max_iter)?;
        Ok(FittedPipeline {
            input_scaler,
            pls,
            score_scaler,
            model,
        })
    }

    /// Map raw rows into the space the classifier was trained in.
    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        let mut out = match &self.input_scaler {
            Some(p) => p.apply(data)?,
            None => data.clone(),
        };
        if let Some(pls) = &self.pls {
            out = out.with_features(pls.k, pls.transform(out.features())?)?;
        }
        if let Some(p) = &self.score_scaler {
            out = p.apply(&out)?;
        }
        Ok(out)
    }

    pub fn error_count(&self, data: &Dataset) -> Result<usize> {
        error_count(&self.model, &self.transform(data)?)
    }
}
