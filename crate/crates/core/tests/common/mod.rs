#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller, kept separate from the library's sampler.
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Acklam's rational approximation of the standard normal quantile
/// (relative error about 1.15e-9).
pub fn acklam_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];
    let low = 0.02425;
    if p < low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -acklam_quantile(1.0 - p)
    }
}

/// Standard normal CDF from the Abramowitz-Stegun 7.1.26 erf (|err| < 1.5e-7).
pub fn phi(x: f64) -> f64 {
    let z = x.abs() / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.3275911 * z);
    let poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erf = 1.0 - poly * (-z * z).exp();
    if x >= 0.0 {
        0.5 * (1.0 + erf)
    } else {
        0.5 * (1.0 - erf)
    }
}

/// Hinge SVM objective of (w, b) on 1-D data.
pub fn svm_objective_1d(xs: &[f64], ys: &[u8], c: f64, w: f64, b: f64) -> f64 {
    let hinge: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| {
            let s = if y == 1 { 1.0 } else { -1.0 };
            (1.0 - s * (w * x + b)).max(0.0)
        })
        .sum();
    0.5 * w * w + c * hinge
}

/// Exhaustive minimum over (w, b) in [-5, 5]^2 at the given step.
pub fn svm_grid_oracle(xs: &[f64], ys: &[u8], c: f64, step: f64) -> f64 {
    let steps = (10.0 / step).round() as i64;
    (0..=steps)
        .into_par_iter()
        .map(|i| {
            let w = -5.0 + i as f64 * step;
            let mut best = f64::INFINITY;
            for j in 0..=steps {
                let b = -5.0 + j as f64 * step;
                best = best.min(svm_objective_1d(xs, ys, c, w, b));
            }
            best
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Exact strict linear separability in the plane. The admissible normals
/// form an open arc bounded by directions orthogonal to pair differences,
/// so testing the midpoints between consecutive critical angles decides it.
pub fn pair_hyperplane_separable(points: &[[f64; 2]], labels: &[u8]) -> bool {
    let zeros: Vec<&[f64; 2]> = points.iter().zip(labels).filter(|(_, &l)| l == 0).map(|(p, _)| p).collect();
    let ones: Vec<&[f64; 2]> = points.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(p, _)| p).collect();
    if zeros.is_empty() || ones.is_empty() {
        return true;
    }
    let mut angles = Vec::new();
    for a in &zeros {
        for b in &ones {
            let v = [b[0] - a[0], b[1] - a[1]];
            if v == [0.0, 0.0] {
                return false;
            }
            let t = v[1].atan2(v[0]);
            angles.push(t + std::f64::consts::FRAC_PI_2);
            angles.push(t - std::f64::consts::FRAC_PI_2);
        }
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut angles: Vec<f64> = angles.into_iter().map(|t| t.rem_euclid(two_pi)).collect();
    angles.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut candidates = Vec::new();
    for i in 0..angles.len() {
        let next = if i + 1 < angles.len() { angles[i + 1] } else { angles[0] + two_pi };
        candidates.push(0.5 * (angles[i] + next));
    }
    candidates.into_iter().any(|t| {
        let w = [t.cos(), t.sin()];
        let hi0 = zeros.iter().map(|p| w[0] * p[0] + w[1] * p[1]).fold(f64::NEG_INFINITY, f64::max);
        let lo1 = ones.iter().map(|p| w[0] * p[0] + w[1] * p[1]).fold(f64::INFINITY, f64::min);
        hi0 < lo1
    })
}

/// The bound objective evaluated on a uniform lambda grid over (0.5, upper].
pub fn lambda_grid_oracle(r: f64, n: usize, kl: f64, eta: f64, upper: f64, step: f64) -> f64 {
    let steps = ((upper - 0.5) / step).round() as usize;
    let complexity = kl + (1.0 / eta).ln();
    (1..steps + 1)
        .into_par_iter()
        .with_min_len(4096)
        .map(|i| {
            let lambda = 0.5 + i as f64 * step;
            (r + 2.0 * lambda * lambda / n as f64 * complexity) / (2.0 * lambda - 1.0)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Determinant of a small square matrix by cofactor expansion.
pub fn det(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        0 => 1.0,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        n => (0..n)
            .map(|j| {
                let minor: Vec<Vec<f64>> = m[1..].iter().map(|row| row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| *v).collect()).collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][j] * det(&minor)
            })
            .sum(),
    }
}

/// Gram-determinant independence test, scale-relative.
pub fn independent_by_gram(vectors: &[&[f64]]) -> bool {
    let gram: Vec<Vec<f64>> = vectors
        .iter()
        .map(|a| vectors.iter().map(|b| a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()).collect())
        .collect();
    let scale: f64 = vectors.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>()).product();
    if scale == 0.0 {
        return false;
    }
    det(&gram) / scale > 1e-12
}

pub fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n).filter(|m| m.count_ones() as usize == size).map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect()).collect()
}
