//! Capacity of linear classifiers: general position, separability,
//! shattering, VC dimension and the census of balanced cluster dichotomies.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{CubvError, Result};
use crate::seed;

/// Rank tolerance, relative to the largest vector norm of the subset.
pub const RANK_TOL: f64 = 1e-9;
/// Smallest signed margin, on points rescaled into the unit ball, that
/// counts as strict separation.
pub const MARGIN_TOL: f64 = 1e-10;
pub const MAX_SHATTER_POINTS: usize = 20;
pub const MAX_CLUSTERS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        Self::with_dim(dim.max(1), points)
    }

    pub fn with_dim(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(CubvError::invalid("point dimension must be at least 1"));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(CubvError::invalid("points must share one dimension"));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CubvError::invalid("points must be finite"));
        }
        Ok(PointSet { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Independent standard Gaussian points.
    pub fn gaussian(count: usize, dim: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let points = (0..count)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        PointSet { dim, points }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Visit every `k`-subset of `0..n` in lexicographic order; stop early when
/// `f` returns false. Returns whether all visits returned true.
pub(crate) fn all_combinations(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> bool) -> bool {
    if k > n {
        return true;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if !f(&idx) {
            return false;
        }
        let mut i = k;
        loop {
            if i == 0 {
                return true;
            }
            i -= 1;
            if idx[i] < n - k + i {
                break;
            }
            if i == 0 {
                return true;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Whether the given vectors are linearly independent (modified Gram-Schmidt).
pub fn linearly_independent(vectors: &[&[f64]]) -> bool {
    let scale = vectors.iter().map(|v| dot(v, v).sqrt()).fold(0.0, f64::max);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut r = v.to_vec();
        for q in &basis {
            let c = dot(&r, q);
            r.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
        let norm = dot(&r, &r).sqrt();
        if norm <= RANK_TOL * scale {
            return false;
        }
        r.iter_mut().for_each(|a| *a /= norm);
        basis.push(r);
    }
    true
}

/// Every subset of at most `n` points is linearly independent.
pub fn is_general_position(ps: &PointSet) -> bool {
    let k = ps.dim().min(ps.len());
    all_combinations(ps.len(), k, |idx| {
        let vs: Vec<&[f64]> = idx.iter().map(|&i| ps.points[i].as_slice()).collect();
        linearly_independent(&vs)
    })
}

/// Strict linear separability of the labelled points, decided by a hinge
/// solver with a very large penalty. The points are first centred and
/// rescaled, which leaves separability unchanged.
pub fn is_separable(ps: &PointSet, labels: &[u8]) -> Result<bool> {
    if labels.len() != ps.len() {
        return Err(CubvError::invalid("labels and points differ in length"));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(CubvError::invalid("labels must be 0 or 1"));
    }
    if ps.len() <= 1 || labels.iter().all(|&l| l == labels[0]) {
        return Ok(true);
    }
    let n = ps.dim();
    let mut mean = vec![0.0; n];
    for p in &ps.points {
        mean.iter_mut().zip(p).for_each(|(m, v)| *m += v / ps.len() as f64);
    }
    let radius = ps
        .points
        .iter()
        .map(|p| p.iter().zip(&mean).map(|(v, m)| (v - m) * (v - m)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let scale = if radius > 0.0 { 1.0 / radius } else { 1.0 };
    let features: Vec<f64> = ps
        .points
        .iter()
        .flat_map(|p| p.iter().zip(&mean).map(move |(v, m)| (v - m) * scale))
        .collect();
    // Maximize the worst signed margin t over |w_j| <= 1. Points lie in the
    // unit ball, so any separating offset satisfies |b| <= sqrt(n).
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let w: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (-1.0, 1.0))).collect();
    let b_max = (n as f64).sqrt() + 1.0;
    let b = lp.add_var(0.0, (-b_max, b_max));
    let t = lp.add_var(1.0, (f64::NEG_INFINITY, 1.0));
    for (x, &l) in features.chunks_exact(n).zip(labels) {
        let s = if l == 1 { 1.0 } else { -1.0 };
        let mut terms: Vec<_> = w.iter().zip(x).map(|(&v, &xv)| (v, s * xv)).collect();
        terms.push((b, s));
        terms.push((t, -1.0));
        lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, 0.0);
    }
    let solution = lp
        .solve()
        .map_err(|e| CubvError::invalid(format!("separability program failed: {e:?}")))?
        .into_solution()
        .map_err(|_| CubvError::invalid("separability program was interrupted"))?;
    // Re-evaluate the margins of the returned plane instead of trusting t.
    let wv: Vec<f64> = w.iter().map(|&v| solution.var_value(v)).collect();
    let bv = solution.var_value(b);
    let worst = features
        .chunks_exact(n)
        .zip(labels)
        .map(|(x, &l)| (if l == 1 { 1.0 } else { -1.0 }) * (dot(&wv, x) + bv))
        .fold(f64::INFINITY, f64::min);
    Ok(worst > MARGIN_TOL)
}

/// Whether every labelling of the points is linearly separable.
pub fn shatter_check(ps: &PointSet) -> Result<bool> {
    let m = ps.len();
    if m > MAX_SHATTER_POINTS {
        return Err(CubvError::ComplexityLimit(format!(
            "shattering {m} points needs 2^{m} labellings; limit is {MAX_SHATTER_POINTS} points"
        )));
    }
    if m <= 1 {
        return Ok(true);
    }
    // Inversion symmetry: fixing the first label halves the work.
    for mask in 0u32..(1 << (m - 1)) {
        let labels: Vec<u8> = (0..m).map(|i| if i == 0 { 0 } else { ((mask >> (i - 1)) & 1) as u8 }).collect();
        if !is_separable(ps, &labels)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VcVerification {
    pub dimension: usize,
    pub trials: usize,
    /// Largest set size for which some random set was shattered.
    pub vc_dimension: usize,
    pub larger_sets_tested: usize,
    pub larger_sets_shattered: usize,
}

/// Empirical VC dimension of linear classifiers in `n` dimensions.
pub fn vc_verify(n: usize, trials: usize, seed: u64) -> Result<VcVerification> {
    if n == 0 || n > 4 {
        return Err(CubvError::invalid("vc_verify supports 1 <= n <= 4"));
    }
    if trials == 0 {
        return Err(CubvError::invalid("at least one trial is required"));
    }
    let draw = |m: usize, t: usize| -> PointSet {
        let mut attempt = 0u64;
        loop {
            let ps = PointSet::gaussian(m, n, seed::hash64(seed, m as u64, (t as u64) << 8 | attempt));
            if is_general_position(&ps) {
                return ps;
            }
            attempt += 1;
        }
    };
    let mut vc = 0;
    for m in 1..=n + 1 {
        for t in 0..trials {
            if shatter_check(&draw(m, t))? {
                vc = m;
                break;
            }
        }
        if vc != m {
            break;
        }
    }
    let results: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|t| shatter_check(&draw(n + 2, t)))
        .collect::<Result<_>>()?;
    let shattered = results.iter().filter(|&&s| s).count();
    if shattered > 0 {
        vc = n + 2;
    }
    Ok(VcVerification {
        dimension: n,
        trials,
        vc_dimension: vc,
        larger_sets_tested: trials,
        larger_sets_shattered: shattered,
    })
}

/// Project every point onto the hyperplane through the origin orthogonal to `z0`.
pub fn project_orthogonal(ps: &PointSet, z0: &[f64]) -> Result<PointSet> {
    if z0.len() != ps.dim() {
        return Err(CubvError::invalid("z0 has the wrong dimension"));
    }
    let zz = dot(z0, z0);
    if !(zz > 0.0) {
        return Err(CubvError::invalid("z0 must be nonzero"));
    }
    let points = ps
        .points
        .iter()
        .map(|p| {
            let c = dot(p, z0) / zz;
            p.iter().zip(z0).map(|(a, b)| a - c * b).collect()
        })
        .collect();
    PointSet::with_dim(ps.dim(), points)
}

/// Orthonormal basis (n - 1 vectors) of the complement of `z0`.
pub fn orthogonal_complement_basis(z0: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = z0.len();
    let norm = dot(z0, z0).sqrt();
    if !(norm > 0.0) {
        return Err(CubvError::invalid("z0 must be nonzero"));
    }
    let mut basis: Vec<Vec<f64>> = vec![z0.iter().map(|v| v / norm).collect()];
    for e in 0..n {
        let mut r = vec![0.0; n];
        r[e] = 1.0;
        for q in &basis {
            let c = dot(&r, q);
            r.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
        let rn = dot(&r, &r).sqrt();
        if rn > 1e-8 {
            r.iter_mut().for_each(|a| *a /= rn);
            basis.push(r);
        }
        if basis.len() == n {
            break;
        }
    }
    basis.remove(0);
    Ok(basis)
}

/// Coordinates of the points with respect to an orthonormal basis.
pub fn express_in_basis(ps: &PointSet, basis: &[Vec<f64>]) -> Result<PointSet> {
    let points = ps.points.iter().map(|p| basis.iter().map(|b| dot(p, b)).collect()).collect();
    PointSet::with_dim(basis.len().max(1), points)
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Balanced assignments of `nc` clusters to two groups, one per label
/// inversion (cluster 0 always in group 0), in increasing bitmask order.
/// Bit `c` set means cluster `c` belongs to group 1.
pub fn balanced_masks(nc: usize) -> Result<Vec<u32>> {
    if nc == 0 || nc % 2 == 1 {
        return Err(CubvError::invalid(format!("Nc = {nc} must be a positive even number")));
    }
    if nc > MAX_CLUSTERS {
        return Err(CubvError::ComplexityLimit(format!("Nc = {nc} exceeds the limit of {MAX_CLUSTERS}")));
    }
    Ok((0u32..(1 << nc))
        .filter(|m| m & 1 == 0 && m.count_ones() as usize == nc / 2)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRow {
    pub mask: u32,
    /// Unknown until the assignments are classified against centroids.
    pub separable: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyCensus {
    pub n_clusters: usize,
    pub total_balanced: usize,
    pub distinct_after_inversion: usize,
    pub separable_count: usize,
    pub per_assignment: Vec<AssignmentRow>,
}

impl DichotomyCensus {
    pub fn non_separable_count(&self) -> usize {
        self.per_assignment.iter().filter(|r| r.separable == Some(false)).count()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| CubvError::Serialization(e.to_string()))
    }
}

pub fn balanced_dichotomies(nc: usize) -> Result<DichotomyCensus> {
    let masks = balanced_masks(nc)?;
    Ok(DichotomyCensus {
        n_clusters: nc,
        total_balanced: binomial(nc, nc / 2),
        distinct_after_inversion: masks.len(),
        separable_count: 0,
        per_assignment: masks.into_iter().map(|mask| AssignmentRow { mask, separable: None }).collect(),
    })
}

/// Census with each assignment marked by separability of the centroids.
pub fn classify_assignments(centroids: &PointSet, nc: usize) -> Result<DichotomyCensus> {
    if centroids.len() != nc {
        return Err(CubvError::invalid(format!("expected {nc} centroids, got {}", centroids.len())));
    }
    let mut census = balanced_dichotomies(nc)?;
    let flags: Vec<bool> = census
        .per_assignment
        .par_iter()
        .map(|row| {
            let labels: Vec<u8> = (0..nc).map(|c| ((row.mask >> c) & 1) as u8).collect();
            is_separable(centroids, &labels)
        })
        .collect::<Result<_>>()?;
    for (row, flag) in census.per_assignment.iter_mut().zip(&flags) {
        row.separable = Some(*flag);
    }
    census.separable_count = flags.iter().filter(|&&f| f).count();
    Ok(census)
}

/// Six well-separated 2-D centroids on a regular hexagon.
pub fn hexagon_layout(radius: f64) -> PointSet {
    let points = (0..6)
        .map(|k| {
            let a = std::f64::consts::PI / 3.0 * k as f64;
            vec![radius * a.cos(), radius * a.sin()]
        })
        .collect();
    PointSet { dim: 2, points }
}
