use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{cubv_test, BoundReport};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::inference::{
    detection_rate, evaluate_dataset, permutation_pvalue_with, McRequirement, PowerMethod, PowerOptions, TrialOutcome,
};
use crate::linmodel::FittedPipeline;
use crate::seed;
use crate::synthgen::{cohens_d, sample_dataset, theoretical_risk, ProblemParams};
use crate::validate::{cv_error, nested_cv_interval_with, proportion_ci, repeated_cv, Interval, NestedCvOptions};

use super::config::{ExperimentConfig, Scenario};
use super::ingest::{ingest_feature_reader, ingest_feature_table, stratified_subsample, MriProblem, MRI_FIXTURE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRecord {
    pub record: usize,
    pub seed: u64,
    pub cv_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub setting: usize,
    pub record: usize,
    pub seed: u64,
    pub report: BoundReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationRecord {
    pub record: usize,
    pub seed: u64,
    pub observed_error: f64,
    pub p_value: f64,
    pub m: usize,
    /// Kept for single-sample runs only.
    pub permuted_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRecord {
    pub method: PowerMethod,
    pub trials: usize,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingRecord {
    pub index: usize,
    /// Curves are grouped by this label (effect/complexity, or MRI problem).
    pub group: String,
    pub n_samples: usize,
    pub dimension: usize,
    pub cohens_d: f64,
    pub n_clusters: usize,
    pub imbalance_ratio: f64,
    /// Mean sample Cohen's d of the analysed data.
    pub measured_d: f64,
    pub cv_records: Vec<CvRecord>,
    pub bounds: Vec<BoundRecord>,
    pub permutations: Vec<PermutationRecord>,
    pub power: Vec<PowerRecord>,
    pub mc: Option<McRequirement>,
    pub intervals: Vec<Interval>,
    pub reference_risk: Option<f64>,
}

impl SettingRecord {
    fn new(index: usize, group: String, n_samples: usize, dimension: usize, cohens_d: f64, n_clusters: usize, imbalance_ratio: f64) -> Self {
        SettingRecord {
            index,
            group,
            n_samples,
            dimension,
            cohens_d,
            n_clusters,
            imbalance_ratio,
            measured_d: 0.0,
            cv_records: Vec::new(),
            bounds: Vec::new(),
            permutations: Vec::new(),
            power: Vec::new(),
            mc: None,
            intervals: Vec::new(),
            reference_risk: None,
        }
    }

    pub fn power_of(&self, method: PowerMethod) -> Option<f64> {
        self.power.iter().find(|p| p.method == method).map(|p| p.power)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub scenario: Option<Scenario>,
    pub config: Option<ExperimentConfig>,
    pub code_version: String,
    /// Not written to disk, so emitted files stay byte-reproducible.
    #[serde(skip)]
    pub wall_time_seconds: f64,
    pub settings: Vec<SettingRecord>,
}

impl ResultBundle {
    pub fn empty() -> Self {
        ResultBundle {
            scenario: None,
            config: None,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_seconds: 0.0,
            settings: Vec::new(),
        }
    }
}

fn power_options(cfg: &ExperimentConfig) -> PowerOptions {
    PowerOptions {
        k: cfg.k,
        permutations: cfg.permutations,
        alpha: cfg.alpha,
        resample_folds: true,
        trainer: cfg.trainer.clone(),
        bound: cfg.bound,
    }
}

fn active_methods(cfg: &ExperimentConfig) -> Vec<PowerMethod> {
    cfg.methods
        .iter()
        .copied()
        .filter(|m| *m != PowerMethod::KfoldPerm || cfg.permutations > 0)
        .collect()
}

struct SyntheticSetting {
    params: ProblemParams,
    n_samples: usize,
    group: String,
}

fn synthetic_settings(cfg: &ExperimentConfig) -> Vec<SyntheticSetting> {
    let g = &cfg.grid;
    let ds: Vec<f64> = if cfg.scenario == Scenario::Null { vec![0.0] } else { g.cohens_d.clone() };
    let mut out = Vec::new();
    for &nc in &g.n_clusters {
        for &r in &g.imbalance_ratio {
            for &d in &ds {
                for &n in &g.dimensions {
                    for &size in &g.n_samples {
                        let params = ProblemParams::multi_cluster(n, d, nc, r, cfg.assignment_id)
                            .with_layout_seed(cfg.layout_seed)
                            .with_convention(cfg.convention);
                        out.push(SyntheticSetting {
                            params,
                            n_samples: size,
                            group: format!("d={d};Nc={nc};r={r}"),
                        });
                    }
                }
            }
        }
    }
    out
}

fn fill_from_trials(
    rec: &mut SettingRecord,
    outcomes: &[TrialOutcome],
    ds: &[f64],
    methods: &[PowerMethod],
    cfg: &ExperimentConfig,
    keep_null: bool,
) -> Result<()> {
    for (t, o) in outcomes.iter().enumerate() {
        rec.cv_records.push(CvRecord { record: t, seed: o.seed, cv_error: o.cv_error });
        if let Some(b) = &o.bound {
            rec.bounds.push(BoundRecord { setting: rec.index, record: t, seed: o.seed, report: b.clone() });
        }
        if let Some(p) = o.p_value {
            rec.permutations.push(PermutationRecord {
                record: t,
                seed: o.seed,
                observed_error: o.cv_error,
                p_value: p,
                m: cfg.permutations,
                permuted_errors: if keep_null { o.permuted_errors.clone() } else { Vec::new() },
            });
        }
    }
    for &m in methods {
        rec.power.push(PowerRecord { method: m, trials: outcomes.len(), power: detection_rate(outcomes, m, cfg.alpha) });
    }
    if let Some(p) = rec.power_of(PowerMethod::KfoldPerm) {
        rec.mc = Some(McRequirement::new(rec.n_samples, rec.cohens_d, p, cfg.epsilon, cfg.alpha)?);
    }
    rec.measured_d = ds.iter().sum::<f64>() / ds.len().max(1) as f64;
    Ok(())
}

/// Independent datasets per setting (null and multisample designs).
fn run_ensemble(cfg: &ExperimentConfig, datasets: usize) -> Result<Vec<SettingRecord>> {
    let opts = power_options(cfg);
    let methods = active_methods(cfg);
    let mut records = Vec::new();
    for (j, s) in synthetic_settings(cfg).into_iter().enumerate() {
        let spec = s.params.build()?;
        let results: Vec<(TrialOutcome, f64)> = (0..datasets as u64)
            .into_par_iter()
            .map(|t| {
                let trial_seed = seed::hash64(cfg.master_seed, j as u64, t);
                let data = sample_dataset(&spec, s.n_samples, trial_seed)?;
                Ok((evaluate_dataset(&data, &methods, &opts, trial_seed)?, cohens_d(&data)?))
            })
            .collect::<Result<_>>()?;
        let (outcomes, ds): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        let p = &s.params;
        let mut rec = SettingRecord::new(j, s.group, s.n_samples, p.dimension, p.cohens_d, p.n_clusters, p.imbalance_ratio);
        fill_from_trials(&mut rec, &outcomes, &ds, &methods, cfg, false)?;
        if cfg.reference_risk {
            rec.reference_risk = Some(theoretical_risk(&spec, &cfg.trainer, seed::hash64(cfg.master_seed, j as u64, u64::MAX))?);
        }
        records.push(rec);
    }
    Ok(records)
}

/// Analyse one sample: F fold reshuffles, a bound per reshuffle and one
/// permutation test.
fn analyse_single(rec: &mut SettingRecord, data: &Dataset, data_seed: u64, cfg: &ExperimentConfig) -> Result<()> {
    let methods = active_methods(cfg);
    let trainer = &cfg.trainer;
    let values = repeated_cv(data, cfg.k, cfg.f, data_seed, trainer)?;
    let model_full = FittedPipeline::fit(data, trainer)?.model;
    let mut detections = 0;
    for (r, &v) in values.iter().enumerate() {
        let fold_seed = data_seed.wrapping_add(r as u64 + 1);
        rec.cv_records.push(CvRecord { record: r, seed: fold_seed, cv_error: v });
        if methods.contains(&PowerMethod::Cubv) {
            let report = crate::bounds::cubv_decision(v, data.n_samples(), &model_full, &cfg.bound)?;
            detections += usize::from(report.detect);
            rec.bounds.push(BoundRecord { setting: rec.index, record: r, seed: fold_seed, report });
        }
    }
    if methods.contains(&PowerMethod::Cubv) {
        rec.power.push(PowerRecord { method: PowerMethod::Cubv, trials: values.len(), power: detections as f64 / values.len() as f64 });
    }
    if methods.contains(&PowerMethod::KfoldPerm) {
        let perm_seed = seed::derive(data_seed, 7);
        let res = permutation_pvalue_with(data, cfg.k, cfg.permutations, perm_seed, true, trainer)?;
        let hit = res.p_value < cfg.alpha;
        rec.permutations.push(PermutationRecord {
            record: 0,
            seed: perm_seed,
            observed_error: res.observed_error,
            p_value: res.p_value,
            m: res.m,
            permuted_errors: res.permuted_errors,
        });
        rec.power.push(PowerRecord { method: PowerMethod::KfoldPerm, trials: 1, power: f64::from(u8::from(hit)) });
    }
    rec.measured_d = cohens_d(data)?;
    if cfg.nested_repetitions > 0 {
        let opts = NestedCvOptions { shrink_width: cfg.nested_shrink_width };
        let first = values[0];
        rec.intervals.push(proportion_ci(first, data.n_samples(), cfg.alpha)?);
        rec.intervals.push(nested_cv_interval_with(data, cfg.k, cfg.nested_repetitions, cfg.alpha, seed::derive(data_seed, 9), trainer, &opts)?);
    }
    Ok(())
}

fn run_single_sample(cfg: &ExperimentConfig) -> Result<Vec<SettingRecord>> {
    let mut records = Vec::new();
    for (j, s) in synthetic_settings(cfg).into_iter().enumerate() {
        let spec = s.params.build()?;
        let data_seed = seed::hash64(cfg.master_seed, j as u64, 0);
        let data = sample_dataset(&spec, s.n_samples, data_seed)?;
        let p = &s.params;
        let mut rec = SettingRecord::new(j, s.group, s.n_samples, p.dimension, p.cohens_d, p.n_clusters, p.imbalance_ratio);
        analyse_single(&mut rec, &data, data_seed, cfg)?;
        if cfg.reference_risk {
            rec.reference_risk = Some(theoretical_risk(&spec, &cfg.trainer, seed::hash64(cfg.master_seed, j as u64, u64::MAX))?);
        }
        records.push(rec);
    }
    Ok(records)
}

fn load_problem(cfg: &ExperimentConfig, problem: MriProblem) -> Result<Dataset> {
    let map = problem.group_map();
    let label = &cfg.mri.label_column;
    Ok(match &cfg.mri.table {
        Some(path) => ingest_feature_table(path, label, &map)?.0,
        None => ingest_feature_reader(MRI_FIXTURE.as_bytes(), label, &map)?.0,
    })
}

/// Problems x subsample sizes x PLS dimensions, one analysis each.
fn run_mri(cfg: &ExperimentConfig) -> Result<Vec<SettingRecord>> {
    let opts = power_options(cfg);
    let methods = active_methods(cfg);
    let mut jobs = Vec::new();
    for &problem in &cfg.mri.problems {
        let full = load_problem(cfg, problem)?;
        for &size in &cfg.mri.sizes {
            for &k in &cfg.mri.pls_components {
                jobs.push((problem, full.clone(), size, k));
            }
        }
    }
    jobs.into_par_iter()
        .enumerate()
        .map(|(j, (problem, full, size, k))| {
            let data_seed = seed::hash64(cfg.master_seed, j as u64, 0);
            let data = stratified_subsample(&full, size.min(full.n_samples()), data_seed)?;
            let trainer = cfg.trainer.clone().with_pls(k);
            let opts = PowerOptions { trainer: trainer.clone(), ..opts.clone() };
            let mut rec = SettingRecord::new(j, problem.name().to_string(), data.n_samples(), k, 0.0, 4, 1.0);
            let outcome = evaluate_dataset(&data, &methods, &opts, data_seed)?;
            // Effect size of the PLS scores the classifier sees.
            let pipeline = FittedPipeline::fit(&data, &trainer)?;
            let d = cohens_d(&pipeline.transform(&data)?)?;
            rec.cohens_d = d;
            fill_from_trials(&mut rec, std::slice::from_ref(&outcome), &[d], &methods, cfg, true)?;
            Ok(rec)
        })
        .collect()
}

/// Run the configured design. The configuration is validated first.
pub fn run_scenario(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let settings = match cfg.scenario {
        Scenario::Null => run_ensemble(cfg, cfg.trials)?,
        Scenario::Multisample => run_ensemble(cfg, cfg.m)?,
        Scenario::SingleSample => run_single_sample(cfg)?,
        Scenario::Mri => run_mri(cfg)?,
    };
    Ok(ResultBundle {
        scenario: Some(cfg.scenario),
        config: Some(cfg.clone()),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        settings,
    })
}

/// CV error and bound for a single dataset with default reporting.
pub fn analyse_dataset(data: &Dataset, cfg: &ExperimentConfig, seed: u64) -> Result<(f64, BoundReport)> {
    let cv = cv_error(data, cfg.k, seed, &cfg.trainer)?;
    let report = cubv_test(&cv, &cfg.bound)?;
    Ok((cv.cv_error, report))
}
