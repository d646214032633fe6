//! Cross-validation: stratified folds, pooled K-fold and leave-one-out
//! errors, fold-resampled repetitions and confidence intervals for the
//! CV error.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{CubvError, Result};
use crate::linmodel::{FittedPipeline, LinearModel, TrainerConfig};
use crate::normal;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// Fold index of every row.
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn fold_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Stratified K-fold plan. Rows of each class are shuffled, then dealt to
/// folds round-robin with a single counter running across both classes, so
/// fold sizes and per-class fold counts each differ by at most one.
///
/// `K == N` is accepted for any labels and yields singleton folds.
pub fn stratified_kfold(data: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    stratified_kfold_labels(data.labels(), k, seed)
}

pub(crate) fn stratified_kfold_labels(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(CubvError::invalid(format!("K = {k} must satisfy 2 <= K <= N = {n}")));
    }
    let mut rng = seed::rng(seed);
    let mut assignments = vec![0; n];
    let mut counter = 0usize;
    for class in 0..2u8 {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        if k < n && members.len() < k {
            return Err(CubvError::StratificationInfeasible {
                class,
                count: members.len(),
                folds: k,
            });
        }
        members.shuffle(&mut rng);
        for i in members {
            assignments[i] = counter % k;
            counter += 1;
        }
    }
    Ok(FoldPlan { k, assignments, seed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    /// Pooled misclassification rate over all held-out rows.
    pub cv_error: f64,
    pub error_count: usize,
    pub per_fold_errors: Vec<f64>,
    pub fold_plan: FoldPlan,
    /// Classifier trained on the whole (standardized) sample.
    pub model_full: LinearModel,
}

/// Misclassification counts per fold of `plan`, each fold scored by a
/// pipeline fitted on its complement.
pub(crate) fn fold_error_counts(data: &Dataset, plan: &FoldPlan, trainer: &TrainerConfig) -> Result<Vec<usize>> {
    (0..plan.k)
        .into_par_iter()
        .map(|fold| {
            let train = data.subset(&plan.train_indices(fold));
            let test = data.subset(&plan.fold_indices(fold));
            FittedPipeline::fit(&train, trainer)?.error_count(&test)
        })
        .collect()
}

/// Pooled K-fold error without the full-sample model.
pub fn cv_error_only(data: &Dataset, k: usize, seed: u64, trainer: &TrainerConfig) -> Result<f64> {
    let plan = stratified_kfold(data, k, seed)?;
    let counts = fold_error_counts(data, &plan, trainer)?;
    Ok(counts.iter().sum::<usize>() as f64 / data.n_samples() as f64)
}

pub fn cv_error(data: &Dataset, k: usize, seed: u64, trainer: &TrainerConfig) -> Result<CvOutcome> {
    data.require_both_classes()?;
    let plan = stratified_kfold(data, k, seed)?;
    let counts = fold_error_counts(data, &plan, trainer)?;
    let sizes = plan.fold_sizes();
    let per_fold_errors = counts.iter().zip(&sizes).map(|(&c, &s)| c as f64 / s as f64).collect();
    let error_count: usize = counts.iter().sum();
    let model_full = FittedPipeline::fit(data, trainer)?.model;
    Ok(CvOutcome {
        cv_error: error_count as f64 / data.n_samples() as f64,
        error_count,
        per_fold_errors,
        fold_plan: plan,
        model_full,
    })
}

pub fn loo_error(data: &Dataset, trainer: &TrainerConfig) -> Result<CvOutcome> {
    let counts = data.class_counts();
    if data.n_samples() < 3 || counts.iter().any(|&c| c < 2) {
        return Err(CubvError::invalid("leave-one-out needs N >= 3 and two rows of each class"));
    }
    cv_error(data, data.n_samples(), 0, trainer)
}

/// `F` K-fold errors under fold reshuffles with seeds `seed+1 ..= seed+F`.
pub fn repeated_cv(data: &Dataset, k: usize, f: usize, seed: u64, trainer: &TrainerConfig) -> Result<Vec<f64>> {
    if f == 0 {
        return Err(CubvError::invalid("F must be at least 1"));
    }
    data.require_both_classes()?;
    (1..=f as u64)
        .into_par_iter()
        .map(|i| cv_error_only(data, k, seed.wrapping_add(i), trainer))
        .collect()
}

/// CV distribution CSV: `repetition,cv_error`, repetitions numbered from 1.
pub fn write_cv_distribution<W: Write>(values: &[f64], mut out: W) -> std::io::Result<()> {
    writeln!(out, "repetition,cv_error")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, v)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    Naive,
    Nested,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub method_tag: IntervalMethod,
}

impl Interval {
    fn clipped(center: f64, half_width: f64, alpha: f64, method_tag: IntervalMethod) -> Self {
        let center = center.clamp(0.0, 1.0);
        Interval {
            center,
            lower: (center - half_width).clamp(0.0, 1.0),
            upper: (center + half_width).clamp(0.0, 1.0),
            alpha,
            method_tag,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CubvError::invalid(format!("alpha = {alpha} must lie in (0, 1)")))
    }
}

/// Normal-approximation interval for a proportion.
pub fn proportion_ci(p_hat: f64, n: usize, alpha: f64) -> Result<Interval> {
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(CubvError::invalid(format!("p_hat = {p_hat} must lie in [0, 1]")));
    }
    if n == 0 {
        return Err(CubvError::invalid("N must be positive"));
    }
    check_alpha(alpha)?;
    let half = normal::critical_value(alpha) * (p_hat * (1.0 - p_hat) / n as f64).sqrt();
    Ok(Interval::clipped(p_hat, half, alpha, IntervalMethod::Naive))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NestedCvOptions {
    /// Multiply the half-width by `sqrt((K-1)/K)`.
    pub shrink_width: bool,
}

impl Default for NestedCvOptions {
    fn default() -> Self {
        NestedCvOptions { shrink_width: false }
    }
}

/// Per outer fold: inner CV error on the remaining rows, holdout error, and
/// the holdout 0/1 variance over the holdout size.
fn nested_repetition(data: &Dataset, k: usize, rep_seed: u64, trainer: &TrainerConfig) -> Result<(Vec<(f64, f64, f64)>, usize)> {
    let outer = stratified_kfold(data, k, rep_seed)?;
    let mut out = Vec::with_capacity(k);
    let mut holdout_errors = 0;
    for j in 0..k {
        let holdout = outer.fold_indices(j);
        let rest = outer.train_indices(j);
        let rest_data = data.subset(&rest);
        let errors = FittedPipeline::fit(&rest_data, trainer)?.error_count(&data.subset(&holdout))?;
        holdout_errors += errors;
        let e_out = errors as f64 / holdout.len() as f64;
        let var_over_size = e_out * (1.0 - e_out) / holdout.len() as f64;

        let inner = if k >= 3 {
            // The remaining outer folds serve as the inner folds.
            let assignments = rest.iter().map(|&i| {
                let a = outer.assignments[i];
                if a > j { a - 1 } else { a }
            });
            FoldPlan { k: k - 1, assignments: assignments.collect(), seed: rep_seed }
        } else {
            stratified_kfold(&rest_data, 2, seed::derive(rep_seed, j as u64 + 1))?
        };
        let inner_counts = fold_error_counts(&rest_data, &inner, trainer)?;
        let e_in = inner_counts.iter().sum::<usize>() as f64 / rest.len() as f64;
        out.push((e_in, e_out, var_over_size));
    }
    Ok((out, holdout_errors))
}

/// Nested-CV interval for the K-fold error, centred on the mean pooled
/// holdout error over `R` repetitions.
pub fn nested_cv_interval(data: &Dataset, k: usize, r: usize, alpha: f64, seed: u64, trainer: &TrainerConfig) -> Result<Interval> {
    nested_cv_interval_with(data, k, r, alpha, seed, trainer, &NestedCvOptions::default())
}

pub fn nested_cv_interval_with(
    data: &Dataset,
    k: usize,
    r: usize,
    alpha: f64,
    seed: u64,
    trainer: &TrainerConfig,
    options: &NestedCvOptions,
) -> Result<Interval> {
    check_alpha(alpha)?;
    if k < 2 {
        return Err(CubvError::invalid("K must be at least 2"));
    }
    if r == 0 {
        return Err(CubvError::invalid("R must be at least 1"));
    }
    if data.n_samples() < 3 * k {
        return Err(CubvError::invalid(format!("nested CV needs N >= 3K, got N = {}", data.n_samples())));
    }
    data.require_both_classes()?;
    let reps: Vec<(Vec<(f64, f64, f64)>, usize)> = (0..r as u64)
        .into_par_iter()
        .map(|rep| nested_repetition(data, k, seed::hash64(seed, rep, 0), trainer))
        .collect::<Result<_>>()?;
    let n_terms = (r * k) as f64;
    let mut mean_sq = 0.0;
    let mut mean_var = 0.0;
    let mut center = 0.0;
    for (folds, errors) in &reps {
        for &(e_in, e_out, v) in folds {
            mean_sq += (e_in - e_out).powi(2) / n_terms;
            mean_var += v / n_terms;
        }
        center += *errors as f64 / data.n_samples() as f64 / r as f64;
    }
    let mse = (mean_sq - mean_var).max(0.0);
    let mut half = normal::critical_value(alpha) * mse.sqrt();
    if options.shrink_width {
        half *= ((k as f64 - 1.0) / k as f64).sqrt();
    }
    Ok(Interval::clipped(center, half, alpha, IntervalMethod::Nested))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, (i * 7 % 5) as f64]).collect();
        let labels = (0..n).map(|i| (i % 2) as u8).collect();
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn ten_folds_of_balanced_hundred() {
        let plan = stratified_kfold(&balanced(100), 10, 3).unwrap();
        for f in 0..10 {
            let idx = plan.fold_indices(f);
            assert_eq!(idx.len(), 10);
            assert_eq!(idx.iter().filter(|&&i| i % 2 == 1).count(), 5);
        }
    }

    #[test]
    fn uneven_sizes() {
        let plan = stratified_kfold(&balanced(23), 10, 1).unwrap();
        let sizes = plan.fold_sizes();
        assert!(sizes.iter().all(|&s| s == 2 || s == 3));
        assert_eq!(sizes.iter().sum::<usize>(), 23);
    }

    #[test]
    fn infeasible_stratification() {
        let data = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]], vec![0, 0, 0, 1]).unwrap();
        assert!(matches!(
            stratified_kfold(&data, 2, 0),
            Err(CubvError::StratificationInfeasible { class: 1, count: 1, folds: 2 })
        ));
        assert!(stratified_kfold(&data, 4, 0).is_ok());
        assert!(stratified_kfold(&data, 5, 0).is_err());
    }

    #[test]
    fn separable_wide_margin_has_zero_error() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![if i % 2 == 0 { -10.0 } else { 10.0 } + 0.01 * i as f64]).collect();
        let data = Dataset::from_rows(&rows, (0..20).map(|i| (i % 2) as u8).collect()).unwrap();
        let cfg = TrainerConfig::default();
        let out = cv_error(&data, 5, 1, &cfg).unwrap();
        assert_eq!(out.cv_error, 0.0);
        assert_eq!(loo_error(&data, &cfg).unwrap().cv_error, 0.0);
        assert!(repeated_cv(&data, 5, 4, 1, &cfg).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pooled_matches_weighted_folds() {
        let data = balanced(23);
        let out = cv_error(&data, 4, 9, &TrainerConfig::default()).unwrap();
        let sizes = out.fold_plan.fold_sizes();
        let weighted: f64 = out.per_fold_errors.iter().zip(&sizes).map(|(e, &s)| e * s as f64).sum();
        assert!((weighted - out.error_count as f64).abs() < 1e-9);
    }

    #[test]
    fn proportion_interval_values() {
        let ci = proportion_ci(0.5, 100, 0.05).unwrap();
        assert!((ci.lower - 0.402).abs() < 1e-3 && (ci.upper - 0.598).abs() < 1e-3);
        let ci = proportion_ci(0.9, 400, 0.05).unwrap();
        assert!(((ci.upper - ci.lower) / 2.0 - 0.0294).abs() < 1e-4);
        let ci = proportion_ci(0.0, 10, 0.05).unwrap();
        assert_eq!((ci.lower, ci.upper), (0.0, 0.0));
    }

    #[test]
    fn distribution_csv() {
        let mut buf = Vec::new();
        write_cv_distribution(&[0.25, 0.5], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "repetition,cv_error\n1,0.25\n2,0.5\n");
    }
}
