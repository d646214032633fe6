//! Synthetic two-group data from single- and multi-cluster isotropic Gaussians.
//!
//! Clusters are assigned to the two groups through a balanced dichotomy
//! (see [`crate::capacity::balanced_masks`]). Each group's mixture is
//! recentred so that its population centroid sits at the origin, then the
//! whole group 1 is shifted by the effect vector. The population centroid
//! distance is therefore exactly the requested effect, whatever the layout.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::capacity::balanced_masks;
use crate::dataset::Dataset;
use crate::error::{CubvError, Result};
use crate::linmodel::{FittedPipeline, TrainerConfig};
use crate::seed;

/// Sample size used for reference ("theoretical") risks.
pub const REFERENCE_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub centroid: Vec<f64>,
    /// Isotropic standard deviation in every dimension.
    pub covariance_scale: f64,
    /// Sampling proportion within the cluster's group.
    pub weight: f64,
    pub group: u8,
}

/// How `d` maps onto the displacement between group centroids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectConvention {
    /// Euclidean centroid distance equals `d` (in units of the cluster std).
    #[default]
    CentroidDistance,
    /// Every coordinate is shifted by `d`, so the distance is `d * sqrt(n)`.
    PerDimension,
}

/// Generative parameters; [`ProblemParams::build`] turns them into a [`ProblemSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub dimension: usize,
    pub cohens_d: f64,
    pub n_clusters: usize,
    pub imbalance_ratio: f64,
    pub assignment_id: usize,
    /// Radius of the sphere the cluster centres are drawn on, in std units.
    pub cluster_radius: f64,
    pub covariance_scale: f64,
    pub convention: EffectConvention,
    pub layout_seed: u64,
}

impl ProblemParams {
    pub fn single_mode(dimension: usize, cohens_d: f64) -> Self {
        ProblemParams {
            dimension,
            cohens_d,
            n_clusters: 2,
            imbalance_ratio: 1.0,
            assignment_id: 0,
            cluster_radius: 2.0,
            covariance_scale: 1.0,
            convention: EffectConvention::CentroidDistance,
            layout_seed: 0,
        }
    }

    pub fn multi_cluster(dimension: usize, cohens_d: f64, n_clusters: usize, imbalance_ratio: f64, assignment_id: usize) -> Self {
        ProblemParams {
            n_clusters,
            imbalance_ratio,
            assignment_id,
            ..ProblemParams::single_mode(dimension, cohens_d)
        }
    }

    pub fn with_layout_seed(mut self, layout_seed: u64) -> Self {
        self.layout_seed = layout_seed;
        self
    }

    pub fn with_convention(mut self, convention: EffectConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn build(&self) -> Result<ProblemSpec> {
        let n = self.dimension;
        if n == 0 {
            return Err(CubvError::invalid("dimension must be positive"));
        }
        if !(self.cohens_d >= 0.0 && self.cohens_d.is_finite()) {
            return Err(CubvError::invalid("Cohen's d must be finite and nonnegative"));
        }
        if !(self.imbalance_ratio > 0.0 && self.imbalance_ratio <= 1.0) {
            return Err(CubvError::invalid("imbalance ratio must lie in (0, 1]"));
        }
        if !(self.covariance_scale > 0.0 && self.covariance_scale.is_finite()) {
            return Err(CubvError::invalid("covariance scale must be positive"));
        }
        let masks = balanced_masks(self.n_clusters)?;
        let mask = *masks.get(self.assignment_id).ok_or_else(|| {
            CubvError::invalid(format!(
                "assignment id {} out of range: {} balanced dichotomies for Nc = {}",
                self.assignment_id,
                masks.len(),
                self.n_clusters
            ))
        })?;

        let mut rng = seed::rng(seed::derive(self.layout_seed, 0xC1u64));
        let mut centroids: Vec<Vec<f64>> = (0..self.n_clusters)
            .map(|_| {
                if self.n_clusters == 2 {
                    vec![0.0; n]
                } else {
                    scaled(&random_unit(&mut rng, n), self.cluster_radius * self.covariance_scale)
                }
            })
            .collect();
        let groups: Vec<u8> = (0..self.n_clusters).map(|c| ((mask >> c) & 1) as u8).collect();

        // Geometric weights r^j for the j-th cluster of each group.
        let mut weights = vec![0.0; self.n_clusters];
        for g in 0..2u8 {
            let members: Vec<usize> = (0..self.n_clusters).filter(|&c| groups[c] == g).collect();
            let raw: Vec<f64> = (0..members.len()).map(|j| self.imbalance_ratio.powi(j as i32)).collect();
            let total: f64 = raw.iter().sum();
            for (&c, r) in members.iter().zip(&raw) {
                weights[c] = r / total;
            }
            let mut centre = vec![0.0; n];
            for &c in &members {
                for (m, v) in centre.iter_mut().zip(&centroids[c]) {
                    *m += weights[c] * v;
                }
            }
            for &c in &members {
                for (v, m) in centroids[c].iter_mut().zip(&centre) {
                    *v -= m;
                }
            }
        }

        let offset: Vec<f64> = match self.convention {
            EffectConvention::CentroidDistance => scaled(&random_unit(&mut rng, n), self.cohens_d * self.covariance_scale),
            EffectConvention::PerDimension => vec![self.cohens_d * self.covariance_scale; n],
        };
        let clusters = centroids
            .into_iter()
            .enumerate()
            .map(|(c, mut centroid)| {
                if groups[c] == 1 {
                    for (v, o) in centroid.iter_mut().zip(&offset) {
                        *v += o;
                    }
                }
                ClusterSpec {
                    centroid,
                    covariance_scale: self.covariance_scale,
                    weight: weights[c],
                    group: groups[c],
                }
            })
            .collect();

        let spec = ProblemSpec {
            dimension: n,
            clusters,
            cohens_d: self.cohens_d,
            n_clusters: self.n_clusters,
            imbalance_ratio: self.imbalance_ratio,
            assignment_id: self.assignment_id,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn random_unit<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return scaled(&v, 1.0 / norm);
        }
    }
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

/// Generative description of a two-group experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub dimension: usize,
    pub clusters: Vec<ClusterSpec>,
    pub cohens_d: f64,
    pub n_clusters: usize,
    pub imbalance_ratio: f64,
    pub assignment_id: usize,
}

impl ProblemSpec {
    /// A spec from explicit clusters. `cohens_d` is set to the population
    /// centroid distance over the mean cluster scale.
    pub fn from_clusters(dimension: usize, clusters: Vec<ClusterSpec>) -> Result<Self> {
        let mut centres = [vec![0.0; dimension], vec![0.0; dimension]];
        for c in &clusters {
            if c.centroid.len() != dimension {
                return Err(CubvError::invalid("cluster centroid has the wrong dimension"));
            }
            if c.group > 1 {
                return Err(CubvError::invalid("cluster group must be 0 or 1"));
            }
            for (m, v) in centres[c.group as usize].iter_mut().zip(&c.centroid) {
                *m += c.weight * v;
            }
        }
        let dist = centres[0].iter().zip(&centres[1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let scale = clusters.iter().map(|c| c.covariance_scale).sum::<f64>() / clusters.len().max(1) as f64;
        let spec = ProblemSpec {
            dimension,
            n_clusters: clusters.len(),
            cohens_d: if scale > 0.0 { dist / scale } else { 0.0 },
            clusters,
            imbalance_ratio: 1.0,
            assignment_id: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_clusters != self.clusters.len() {
            return Err(CubvError::invalid("n_clusters does not match the cluster list"));
        }
        for g in 0..2u8 {
            let members: Vec<&ClusterSpec> = self.clusters.iter().filter(|c| c.group == g).collect();
            if members.is_empty() {
                return Err(CubvError::invalid(format!("group {g} has no cluster")));
            }
            let total: f64 = members.iter().map(|c| c.weight).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(CubvError::invalid(format!("weights of group {g} sum to {total}, not 1")));
            }
        }
        for c in &self.clusters {
            if !(c.covariance_scale > 0.0) {
                return Err(CubvError::invalid("covariance scale must be positive"));
            }
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(CubvError::invalid("cluster weight must lie in (0, 1]"));
            }
            if c.centroid.len() != self.dimension || c.centroid.iter().any(|v| !v.is_finite()) {
                return Err(CubvError::invalid("cluster centroid must be finite with the spec dimension"));
            }
        }
        if self.n_clusters % 2 == 0 {
            let count = balanced_masks(self.n_clusters).map(|m| m.len()).unwrap_or(0);
            if count > 0 && self.assignment_id >= count {
                return Err(CubvError::invalid("assignment id out of range"));
            }
        }
        Ok(())
    }
}

/// Split `total` among `weights` by largest remainder, ties to the lower index.
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &c in order.iter().take(total.saturating_sub(assigned)) {
        counts[c] += 1;
    }
    counts
}

/// Draw `n_samples` rows from `spec`. Group 0 gets `ceil(N/2)` rows.
pub fn sample_dataset(spec: &ProblemSpec, n_samples: usize, seed: u64) -> Result<Dataset> {
    sample_with_clusters(spec, n_samples, seed).map(|(d, _)| d)
}

/// As [`sample_dataset`], also returning the source cluster of every row.
pub fn sample_with_clusters(spec: &ProblemSpec, n_samples: usize, seed: u64) -> Result<(Dataset, Vec<usize>)> {
    spec.validate()?;
    if n_samples < 2 {
        return Err(CubvError::invalid(format!("N = {n_samples} cannot place one sample in each group")));
    }
    let n = spec.dimension;
    let group_sizes = [n_samples.div_ceil(2), n_samples / 2];
    let mut rng = seed::rng(seed);
    let mut features = Vec::with_capacity(n_samples * n);
    let mut labels = Vec::with_capacity(n_samples);
    let mut sources = Vec::with_capacity(n_samples);
    for g in 0..2u8 {
        let members: Vec<usize> = (0..spec.clusters.len()).filter(|&c| spec.clusters[c].group == g).collect();
        let weights: Vec<f64> = members.iter().map(|&c| spec.clusters[c].weight).collect();
        let counts = largest_remainder(group_sizes[g as usize], &weights);
        for (&c, &count) in members.iter().zip(&counts) {
            let cluster = &spec.clusters[c];
            for _ in 0..count {
                for mu in &cluster.centroid {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    features.push(mu + cluster.covariance_scale * z);
                }
                labels.push(g);
                sources.push(c);
            }
        }
    }
    Ok((Dataset::new(n, features, labels, seed)?, sources))
}

/// Multivariate Cohen's d: centroid distance over the root mean pooled
/// per-dimension variance.
pub fn cohens_d(data: &Dataset) -> Result<f64> {
    data.require_both_classes()?;
    let n = data.n_features();
    let counts = data.class_counts();
    let mut means = [vec![0.0; n], vec![0.0; n]];
    for (row, &l) in data.rows().zip(data.labels()) {
        for (m, v) in means[l as usize].iter_mut().zip(row) {
            *m += v;
        }
    }
    for g in 0..2 {
        for m in means[g].iter_mut() {
            *m /= counts[g] as f64;
        }
    }
    let mut ss = vec![0.0; n];
    for (row, &l) in data.rows().zip(data.labels()) {
        for ((s, v), m) in ss.iter_mut().zip(row).zip(&means[l as usize]) {
            *s += (v - m) * (v - m);
        }
    }
    let dist = means[0].iter().zip(&means[1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let dof = data.n_samples().saturating_sub(2);
    if dist == 0.0 {
        return Ok(0.0);
    }
    if dof == 0 {
        return Ok(f64::INFINITY);
    }
    let pooled = ss.iter().sum::<f64>() / (dof as f64 * n as f64);
    Ok(if pooled > 0.0 { dist / pooled.sqrt() } else { f64::INFINITY })
}

/// Error of a classifier trained on `REFERENCE_SAMPLES` draws, evaluated on
/// an independent draw of the same size.
pub fn theoretical_risk(spec: &ProblemSpec, trainer: &TrainerConfig, seed: u64) -> Result<f64> {
    let train = sample_dataset(spec, REFERENCE_SAMPLES, seed::derive(seed, 1))?;
    let test = sample_dataset(spec, REFERENCE_SAMPLES, seed::derive(seed, 2))?;
    let fitted = FittedPipeline::fit(&train, trainer)?;
    Ok(fitted.error_count(&test)? as f64 / test.n_samples() as f64)
}
