//! Permutation p-values, Monte Carlo trial counts and power estimation.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{cubv_test, BoundConfig, BoundReport};
use crate::dataset::Dataset;
use crate::error::{CubvError, Result};
use crate::linmodel::TrainerConfig;
use crate::normal;
use crate::seed;
use crate::synthgen::{sample_dataset, ProblemParams};
use crate::validate::{cv_error, cv_error_only};

/// Cap on the dB scale of emitted Monte Carlo tables.
pub const MAX_RATIO_DB: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub observed_error: f64,
    pub permuted_errors: Vec<f64>,
    pub p_value: f64,
    pub m: usize,
}

impl PermutationResult {
    fn from_errors(observed_error: f64, permuted_errors: Vec<f64>) -> Self {
        let m = permuted_errors.len();
        let count = permuted_errors.iter().filter(|&&e| e <= observed_error).count();
        PermutationResult {
            observed_error,
            permuted_errors,
            p_value: count as f64 / (m + 1) as f64,
            m,
        }
    }
}

/// Fold seed of the unpermuted CV run for a given permutation-test seed.
pub fn observed_fold_seed(seed: u64) -> u64 {
    seed::derive(seed, 0)
}

fn permuted_errors(data: &Dataset, k: usize, m: usize, seed: u64, resample_folds: bool, trainer: &TrainerConfig) -> Result<Vec<f64>> {
    (1..=m as u64)
        .into_par_iter()
        .map(|i| {
            let perm_seed = seed::hash64(seed, 1, i);
            let mut labels = data.labels().to_vec();
            labels.shuffle(&mut seed::rng(perm_seed));
            let fold_seed = if resample_folds { seed::derive(perm_seed, 1) } else { observed_fold_seed(seed) };
            cv_error_only(&data.with_labels(labels)?, k, fold_seed, trainer)
        })
        .collect()
}

/// Label-permutation p-value of the K-fold CV error, with fold plans
/// re-derived for every permutation.
pub fn permutation_pvalue(data: &Dataset, k: usize, m: usize, seed: u64, trainer: &TrainerConfig) -> Result<PermutationResult> {
    permutation_pvalue_with(data, k, m, seed, true, trainer)
}

pub fn permutation_pvalue_with(
    data: &Dataset,
    k: usize,
    m: usize,
    seed: u64,
    resample_folds: bool,
    trainer: &TrainerConfig,
) -> Result<PermutationResult> {
    if m == 0 {
        return Err(CubvError::invalid("at least one permutation is required"));
    }
    data.require_both_classes()?;
    let observed = cv_error_only(data, k, observed_fold_seed(seed), trainer)?;
    Ok(PermutationResult::from_errors(observed, permuted_errors(data, k, m, seed, resample_folds, trainer)?))
}

/// Monte Carlo realizations needed to estimate a probability `p` to within
/// relative precision `epsilon` at confidence `1 - alpha`.
pub fn required_mc_trials(p: f64, epsilon: f64, alpha: f64) -> Result<u64> {
    if p == 0.0 {
        return Err(CubvError::InfiniteTrials);
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(CubvError::invalid(format!("p = {p} must lie in (0, 1]")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(CubvError::invalid(format!("epsilon = {epsilon} must be positive")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CubvError::invalid(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    let z = normal::critical_value(alpha);
    let m = (z * z * (1.0 - p) / (epsilon * epsilon * p)).ceil();
    Ok((m as u64).max(1))
}

/// `10 log10(M / N)`, capped for reporting.
pub fn ratio_db(required: Option<u64>, n: usize) -> f64 {
    match required {
        Some(m) => (10.0 * (m as f64 / n as f64).log10()).min(MAX_RATIO_DB),
        None => MAX_RATIO_DB,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMethod {
    KfoldPerm,
    Cubv,
}

impl PowerMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            PowerMethod::KfoldPerm => "kfold_perm",
            PowerMethod::Cubv => "cubv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSetting {
    pub n_samples: usize,
    pub cohens_d: f64,
    pub dimension: usize,
    pub n_clusters: usize,
}

impl PowerSetting {
    pub fn params(&self, base: &ProblemParams) -> ProblemParams {
        ProblemParams {
            dimension: self.dimension,
            cohens_d: self.cohens_d,
            n_clusters: self.n_clusters,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerOptions {
    pub k: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub resample_folds: bool,
    pub trainer: TrainerConfig,
    pub bound: BoundConfig,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            k: 10,
            permutations: 100,
            alpha: 0.05,
            resample_folds: true,
            trainer: TrainerConfig::default(),
            bound: BoundConfig::default(),
        }
    }
}

/// Everything computed for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub cv_error: f64,
    pub p_value: Option<f64>,
    pub bound: Option<BoundReport>,
    pub permuted_errors: Vec<f64>,
}

impl TrialOutcome {
    pub fn detected(&self, method: PowerMethod, alpha: f64) -> Option<bool> {
        match method {
            PowerMethod::KfoldPerm => self.p_value.map(|p| p < alpha),
            PowerMethod::Cubv => self.bound.as_ref().map(|b| b.detect),
        }
    }
}

/// Run the requested tests on one dataset. Both share the observed CV run.
pub fn evaluate_dataset(data: &Dataset, methods: &[PowerMethod], opts: &PowerOptions, seed: u64) -> Result<TrialOutcome> {
    let fold_seed = observed_fold_seed(seed);
    let mut outcome = TrialOutcome { seed, cv_error: 0.0, p_value: None, bound: None, permuted_errors: Vec::new() };
    if methods.contains(&PowerMethod::Cubv) {
        let cv = cv_error(data, opts.k, fold_seed, &opts.trainer)?;
        outcome.cv_error = cv.cv_error;
        outcome.bound = Some(cubv_test(&cv, &opts.bound)?);
    } else {
        outcome.cv_error = cv_error_only(data, opts.k, fold_seed, &opts.trainer)?;
    }
    if methods.contains(&PowerMethod::KfoldPerm) {
        let permuted = permuted_errors(data, opts.k, opts.permutations.max(1), seed, opts.resample_folds, &opts.trainer)?;
        let res = PermutationResult::from_errors(outcome.cv_error, permuted);
        outcome.p_value = Some(res.p_value);
        outcome.permuted_errors = res.permuted_errors;
    }
    Ok(outcome)
}

/// Trial `t` of setting `j` draws its dataset from `hash64(seed, j, t)`.
pub fn run_trials(
    base: &ProblemParams,
    setting: &PowerSetting,
    setting_index: u64,
    trials: usize,
    methods: &[PowerMethod],
    opts: &PowerOptions,
    seed: u64,
) -> Result<Vec<TrialOutcome>> {
    let spec = setting.params(base).build()?;
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let trial_seed = seed::hash64(seed, setting_index, t);
            let data = sample_dataset(&spec, setting.n_samples, trial_seed)?;
            evaluate_dataset(&data, methods, opts, trial_seed)
        })
        .collect()
}

pub fn detection_rate(outcomes: &[TrialOutcome], method: PowerMethod, alpha: f64) -> f64 {
    let hits = outcomes.iter().filter(|o| o.detected(method, alpha) == Some(true)).count();
    hits as f64 / outcomes.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub grid: Vec<PowerSetting>,
    pub power: Vec<f64>,
    pub trials: Vec<usize>,
    pub method_tag: PowerMethod,
}

pub fn power_estimate(
    base: &ProblemParams,
    grid: &[PowerSetting],
    trials: usize,
    method: PowerMethod,
    opts: &PowerOptions,
    seed: u64,
) -> Result<PowerCurve> {
    if grid.is_empty() {
        return Err(CubvError::invalid("power grid is empty"));
    }
    if trials == 0 {
        return Err(CubvError::invalid("at least one trial per setting is required"));
    }
    let mut power = Vec::with_capacity(grid.len());
    for (j, setting) in grid.iter().enumerate() {
        let outcomes = run_trials(base, setting, j as u64, trials, &[method], opts, seed)?;
        power.push(detection_rate(&outcomes, method, opts.alpha));
    }
    Ok(PowerCurve {
        grid: grid.to_vec(),
        power,
        trials: vec![trials; grid.len()],
        method_tag: method,
    })
}

/// Power CSV: `N,d,n,Nc,method,trials,power`.
pub fn write_power_csv<W: Write>(curves: &[PowerCurve], mut out: W) -> std::io::Result<()> {
    writeln!(out, "N,d,n,Nc,method,trials,power")?;
    for c in curves {
        for ((s, p), t) in c.grid.iter().zip(&c.power).zip(&c.trials) {
            writeln!(out, "{},{},{},{},{},{},{}", s.n_samples, s.cohens_d, s.dimension, s.n_clusters, c.method_tag.tag(), t, p)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRequirement {
    pub n_samples: usize,
    pub cohens_d: f64,
    pub p_hat: f64,
    /// `None` when `p_hat` is zero.
    pub required_m: Option<u64>,
    pub ratio_db: f64,
}

impl McRequirement {
    pub fn new(n_samples: usize, cohens_d: f64, p_hat: f64, epsilon: f64, alpha: f64) -> Result<Self> {
        let required_m = match required_mc_trials(p_hat, epsilon, alpha) {
            Ok(m) => Some(m),
            Err(CubvError::InfiniteTrials) => None,
            Err(e) => return Err(e),
        };
        Ok(McRequirement {
            n_samples,
            cohens_d,
            p_hat,
            required_m,
            ratio_db: ratio_db(required_m, n_samples),
        })
    }
}

/// MC CSV: `N,d,p_hat,required_M,ratio_db`; an unbounded requirement is `inf`.
pub fn write_mc_csv<W: Write>(rows: &[McRequirement], mut out: W) -> std::io::Result<()> {
    writeln!(out, "N,d,p_hat,required_M,ratio_db")?;
    for r in rows {
        let m = r.required_m.map_or_else(|| "inf".to_string(), |m| m.to_string());
        writeln!(out, "{},{},{},{},{}", r.n_samples, r.cohens_d, r.p_hat, m, r.ratio_db)?;
    }
    Ok(())
}
