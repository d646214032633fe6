use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bounds::BoundConfig;
use crate::error::{CubvError, Result};
use crate::inference::PowerMethod;
use crate::linmodel::TrainerConfig;
use crate::synthgen::EffectConvention;

use super::ingest::MriProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Null,
    Multisample,
    SingleSample,
    Mri,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub n_samples: Vec<usize>,
    pub dimensions: Vec<usize>,
    pub cohens_d: Vec<f64>,
    pub n_clusters: Vec<usize>,
    pub imbalance_ratio: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            n_samples: vec![100],
            dimensions: vec![2],
            cohens_d: vec![0.0],
            n_clusters: vec![2],
            imbalance_ratio: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MriConfig {
    /// Feature table; the bundled synthetic fixture when absent.
    pub table: Option<PathBuf>,
    pub label_column: String,
    pub problems: Vec<MriProblem>,
    pub pls_components: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl Default for MriConfig {
    fn default() -> Self {
        MriConfig {
            table: None,
            label_column: "diagnosis".to_string(),
            problems: vec![MriProblem::P1, MriProblem::P2, MriProblem::P3],
            pls_components: (1..=20).collect(),
            sizes: vec![40, 80, 160, 240, 320, 400],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub grid: Grid,
    pub k: usize,
    /// Fold reshuffles of a single sample.
    pub f: usize,
    /// Independent datasets per setting (multisample).
    pub m: usize,
    /// Datasets per setting (null).
    pub trials: usize,
    /// Label permutations per dataset; 0 disables the permutation test.
    pub permutations: usize,
    pub alpha: f64,
    /// Relative precision of the Monte Carlo trial requirement.
    pub epsilon: f64,
    pub methods: Vec<PowerMethod>,
    pub assignment_id: usize,
    pub convention: EffectConvention,
    pub layout_seed: u64,
    /// Nested-CV repetitions for single-sample intervals; 0 disables.
    pub nested_repetitions: usize,
    pub nested_shrink_width: bool,
    /// Also compute the large-sample reference risk of every setting.
    pub reference_risk: bool,
    pub bound: BoundConfig,
    pub trainer: TrainerConfig,
    pub mri: MriConfig,
    pub master_seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: Scenario::Null,
            grid: Grid::default(),
            k: 10,
            f: 100,
            m: 100,
            trials: 100,
            permutations: 100,
            alpha: 0.05,
            epsilon: 0.1,
            methods: vec![PowerMethod::KfoldPerm, PowerMethod::Cubv],
            assignment_id: 0,
            convention: EffectConvention::CentroidDistance,
            layout_seed: 0,
            nested_repetitions: 0,
            nested_shrink_width: false,
            reference_risk: false,
            bound: BoundConfig::default(),
            trainer: TrainerConfig::default(),
            mri: MriConfig::default(),
            master_seed: 0,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CubvError::Config(vec![e.message().to_string()]))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CubvError::Serialization(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CubvError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Every offending field, or `Ok` when the configuration is runnable.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let g = &self.grid;
        let synthetic = self.scenario != Scenario::Mri;
        if self.k < 2 {
            bad.push(format!("k: {} must be at least 2", self.k));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bad.push(format!("alpha: {} must lie in (0, 1)", self.alpha));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            bad.push(format!("epsilon: {} must be positive", self.epsilon));
        }
        if self.methods.is_empty() {
            bad.push("methods: at least one method is required".to_string());
        }
        if let Err(e) = self.bound.validate() {
            bad.push(format!("bound: {e}"));
        }
        let t = &self.trainer;
        if !(t.reg_c > 0.0 && t.reg_c.is_finite()) {
            bad.push(format!("trainer.reg_c: {} must be positive", t.reg_c));
        }
        if !(t.tol > 0.0) {
            bad.push(format!("trainer.tol: {} must be positive", t.tol));
        }
        if t.max_iter == 0 {
            bad.push("trainer.max_iter: must be positive".to_string());
        }
        if synthetic {
            for (name, empty) in [
                ("grid.n_samples", g.n_samples.is_empty()),
                ("grid.dimensions", g.dimensions.is_empty()),
                ("grid.cohens_d", g.cohens_d.is_empty() && self.scenario != Scenario::Null),
                ("grid.n_clusters", g.n_clusters.is_empty()),
                ("grid.imbalance_ratio", g.imbalance_ratio.is_empty()),
            ] {
                if empty {
                    bad.push(format!("{name}: must not be empty"));
                }
            }
            for (i, &n) in g.n_samples.iter().enumerate() {
                if n < 2 * self.k.max(1) {
                    bad.push(format!("grid.n_samples[{i}]: N = {n} is too small for {}-fold stratified CV", self.k));
                }
            }
            for (i, &n) in g.dimensions.iter().enumerate() {
                if n == 0 {
                    bad.push(format!("grid.dimensions[{i}]: must be positive"));
                }
            }
            for (i, &d) in g.cohens_d.iter().enumerate() {
                if !(d >= 0.0 && d.is_finite()) {
                    bad.push(format!("grid.cohens_d[{i}]: {d} must be finite and nonnegative"));
                }
            }
            for (i, &nc) in g.n_clusters.iter().enumerate() {
                match crate::capacity::balanced_masks(nc) {
                    Ok(masks) if self.assignment_id >= masks.len() => bad.push(format!(
                        "assignment_id: {} out of range for grid.n_clusters[{i}] = {nc}",
                        self.assignment_id
                    )),
                    Ok(_) => {}
                    Err(e) => bad.push(format!("grid.n_clusters[{i}]: {e}")),
                }
            }
            for (i, &r) in g.imbalance_ratio.iter().enumerate() {
                if !(r > 0.0 && r <= 1.0) {
                    bad.push(format!("grid.imbalance_ratio[{i}]: {r} must lie in (0, 1]"));
                }
            }
        }
        match self.scenario {
            Scenario::Null if self.trials == 0 => bad.push("trials: must be positive for the null scenario".to_string()),
            Scenario::Multisample if self.m == 0 => bad.push("m: must be positive for the multisample scenario".to_string()),
            Scenario::SingleSample if self.f == 0 => bad.push("f: must be positive for the single_sample scenario".to_string()),
            Scenario::Mri => {
                let mri = &self.mri;
                if mri.problems.is_empty() {
                    bad.push("mri.problems: must not be empty".to_string());
                }
                if mri.pls_components.is_empty() {
                    bad.push("mri.pls_components: must not be empty".to_string());
                }
                if mri.sizes.is_empty() {
                    bad.push("mri.sizes: must not be empty".to_string());
                }
                if mri.label_column.is_empty() {
                    bad.push("mri.label_column: must not be empty".to_string());
                }
                for (i, &k) in mri.pls_components.iter().enumerate() {
                    if k == 0 {
                        bad.push(format!("mri.pls_components[{i}]: must be positive"));
                    }
                }
                for (i, &n) in mri.sizes.iter().enumerate() {
                    if n < 2 * self.k.max(1) {
                        bad.push(format!("mri.sizes[{i}]: N = {n} is too small for {}-fold stratified CV", self.k));
                    }
                }
            }
            _ => {}
        }
        if self.scenario == Scenario::SingleSample && self.nested_repetitions > 0 {
            for (i, &n) in g.n_samples.iter().enumerate() {
                if n < 3 * self.k {
                    bad.push(format!("grid.n_samples[{i}]: nested intervals need N >= 3K"));
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(CubvError::Config(bad))
        }
    }
}
