//! Risk bounds for linear classifiers and the CUBV decision.
//!
//! The decision adds the PAC-Bayes deviation of a dropout posterior to the
//! pooled CV error and rejects "no effect" when the sum stays at or below
//! the chance threshold `eta`.

use serde::{Deserialize, Serialize};

use crate::error::{CubvError, Result};
use crate::linmodel::LinearModel;
use crate::validate::CvOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LambdaSearch {
    pub lower: f64,
    pub upper: f64,
    pub tol: f64,
}

impl Default for LambdaSearch {
    fn default() -> Self {
        LambdaSearch {
            lower: 0.5 + 1e-6,
            upper: 1e6,
            tol: 1e-9,
        }
    }
}

impl LambdaSearch {
    pub fn validate(&self) -> Result<()> {
        if !(self.lower > 0.5 && self.upper > self.lower && self.upper.is_finite() && self.tol > 0.0) {
            return Err(CubvError::invalid(format!(
                "lambda search needs 0.5 < lower < upper < inf and tol > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundConfig {
    pub eta: f64,
    /// Dropout rate of the posterior.
    pub dropout_delta: f64,
    pub lambda_search: LambdaSearch,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            eta: 0.5,
            dropout_delta: 0.5,
            lambda_search: LambdaSearch::default(),
        }
    }
}

impl BoundConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(CubvError::invalid(format!("eta = {} must lie in (0, 1)", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.dropout_delta) {
            return Err(CubvError::invalid(format!("dropout_delta = {} must lie in [0, 1]", self.dropout_delta)));
        }
        self.lambda_search.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n_samples: usize,
    pub empirical_risk: f64,
    pub kl_value: f64,
    pub delta_bound: f64,
    pub corrected_risk: f64,
    pub lambda_star: f64,
    pub mcdiarmid_term: f64,
    pub detect: bool,
    pub config: BoundConfig,
}

impl BoundReport {
    /// Single-line JSON.
    pub fn to_json_line(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| CubvError::Serialization(e.to_string()))
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(CubvError::invalid(format!("eta = {eta} must lie in (0, 1]")))
    }
}

/// `sqrt(ln(1/eta) / (2N))`.
pub fn mcdiarmid_term(n: usize, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    if n == 0 {
        return Err(CubvError::invalid("N must be positive"));
    }
    Ok(((1.0 / eta).ln() / (2.0 * n as f64)).sqrt())
}

/// `(1 - delta)/2 * ||omega||^2`.
pub fn kl_linear_dropout(model: &LinearModel, delta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(CubvError::invalid(format!("dropout rate {delta} must lie in [0, 1]")));
    }
    Ok((1.0 - delta) / 2.0 * model.weight_norm_sq())
}

/// The bound's objective at `lambda`.
pub fn pac_bayes_objective(lambda: f64, empirical_risk: f64, n: usize, kl: f64, eta: f64) -> f64 {
    let numerator = empirical_risk + 2.0 * lambda * lambda / n as f64 * (kl + (1.0 / eta).ln());
    numerator / (2.0 * lambda - 1.0)
}

/// Minimize the bound over `lambda` by golden-section search.
/// Returns `(delta, lambda_star)`.
pub fn pac_bayes_delta(empirical_risk: f64, n: usize, kl: f64, eta: f64, search: &LambdaSearch) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&empirical_risk) {
        return Err(CubvError::invalid(format!("empirical risk {empirical_risk} must lie in [0, 1]")));
    }
    if n == 0 {
        return Err(CubvError::invalid("N must be positive"));
    }
    if !(kl >= 0.0 && kl.is_finite()) {
        return Err(CubvError::invalid(format!("KL = {kl} must be finite and nonnegative")));
    }
    check_eta(eta)?;
    search.validate()?;
    let f = |l: f64| pac_bayes_objective(l, empirical_risk, n, kl, eta);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (search.lower, search.upper);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..1000 {
        if b - a <= search.tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc <= fd { (fc, c) } else { (fd, d) };
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    if fm < best.0 {
        best = (fm, mid);
    }
    Ok(best)
}

pub fn cubv_decision(cv_error: f64, n: usize, model_full: &LinearModel, config: &BoundConfig) -> Result<BoundReport> {
    config.validate()?;
    let kl = kl_linear_dropout(model_full, config.dropout_delta)?;
    let (delta, lambda_star) = pac_bayes_delta(cv_error, n, kl, config.eta, &config.lambda_search)?;
    let corrected = (cv_error + delta).min(1.0);
    Ok(BoundReport {
        n_samples: n,
        empirical_risk: cv_error,
        kl_value: kl,
        delta_bound: delta,
        corrected_risk: corrected,
        lambda_star,
        mcdiarmid_term: mcdiarmid_term(n, config.eta)?,
        detect: corrected <= config.eta,
        config: *config,
    })
}

pub fn cubv_test(cv: &CvOutcome, config: &BoundConfig) -> Result<BoundReport> {
    cubv_decision(cv.cv_error, cv.fold_plan.assignments.len(), &cv.model_full, config)
}
