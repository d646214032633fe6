//! L2-regularized hinge-loss linear SVM with an unregularized bias.
//!
//! Solves the dual of `1/2 |w|^2 + C sum max(0, 1 - y (w.x + b))` by
//! sequential minimal optimization with second-order working-set selection.
//! Pair selection scans indices in order and keeps the first best candidate,
//! so the solver is fully deterministic. The equality constraint of the dual
//! carries the bias exactly.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{CubvError, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub omega: Vec<f64>,
    pub bias: f64,
    pub reg_c: f64,
    pub converged: bool,
    pub final_objective: f64,
}

impl LinearModel {
    /// A fixed model, e.g. for tests or externally supplied weights.
    pub fn from_parts(omega: Vec<f64>, bias: f64, reg_c: f64) -> Self {
        LinearModel {
            omega,
            bias,
            reg_c,
            converged: true,
            final_objective: 0.0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.omega.len()
    }

    #[inline]
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.omega, x) + self.bias
    }

    /// Label 1 on the positive side of the hyperplane, 0 otherwise.
    #[inline]
    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.decision(x) > 0.0)
    }

    pub fn weight_norm_sq(&self) -> f64 {
        dot(&self.omega, &self.omega)
    }

    /// Primal objective `1/2 |w|^2 + C sum hinge` on `data`.
    pub fn objective(&self, data: &Dataset) -> Result<f64> {
        self.check_dimension(data)?;
        let hinge: f64 = data
            .rows()
            .zip(data.labels())
            .map(|(x, &l)| (1.0 - sign(l) * self.decision(x)).max(0.0))
            .sum();
        Ok(0.5 * self.weight_norm_sq() + self.reg_c * hinge)
    }

    pub(crate) fn check_dimension(&self, data: &Dataset) -> Result<()> {
        if data.n_features() != self.omega.len() {
            return Err(CubvError::invalid(format!(
                "model has {} weights but data has {} features",
                self.omega.len(),
                data.n_features()
            )));
        }
        Ok(())
    }

    /// JSON with `omega`, `bias`, `reg_c` and `converged`; reals carry 17
    /// significant digits.
    pub fn to_json(&self) -> String {
        let omega: Vec<String> = self.omega.iter().map(|v| format!("{v:.16e}")).collect();
        format!(
            "{{\"omega\":[{}],\"bias\":{:.16e},\"reg_c\":{:.16e},\"converged\":{}}}",
            omega.join(","),
            self.bias,
            self.reg_c,
            self.converged
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Wire {
            omega: Vec<f64>,
            bias: f64,
            reg_c: f64,
            converged: bool,
        }
        let w: Wire = serde_json::from_str(text).map_err(|e| CubvError::Serialization(e.to_string()))?;
        Ok(LinearModel {
            omega: w.omega,
            bias: w.bias,
            reg_c: w.reg_c,
            converged: w.converged,
            final_objective: 0.0,
        })
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn sign(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Solver statistics, mainly for diagnostics and tests.
#[derive(Debug, Clone, Default)]
pub struct SolveTrace {
    pub iterations: usize,
    /// Dual objective after every pair update.
    pub dual_objective: Vec<f64>,
}

pub fn train_linear_svm(data: &Dataset, reg_c: f64, tol: f64, max_iter: usize) -> Result<LinearModel> {
    solve(data, reg_c, tol, max_iter, None)
}

pub fn train_linear_svm_traced(data: &Dataset, reg_c: f64, tol: f64, max_iter: usize) -> Result<(LinearModel, SolveTrace)> {
    let mut trace = SolveTrace::default();
    let model = solve(data, reg_c, tol, max_iter, Some(&mut trace))?;
    Ok((model, trace))
}

fn solve(data: &Dataset, reg_c: f64, tol: f64, max_iter: usize, mut trace: Option<&mut SolveTrace>) -> Result<LinearModel> {
    if !(reg_c > 0.0 && reg_c.is_finite()) {
        return Err(CubvError::invalid("C must be positive and finite"));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(CubvError::invalid("tolerance and iteration limit must be positive"));
    }
    data.require_both_classes()?;

    let n = data.n_features();
    let m = data.n_samples();
    let x = data.features();
    let y: Vec<f64> = data.labels().iter().map(|&l| sign(l)).collect();
    let kdiag: Vec<f64> = data.rows().map(|r| dot(r, r)).collect();
    let c = reg_c;

    let mut alpha = vec![0.0; m];
    // grad[t] = y_t (w . x_t) - 1, exact for active indices only.
    let mut grad = vec![-1.0; m];
    let mut w = vec![0.0; n];
    let mut alpha_sum = 0.0;
    let mut dw = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    let row = |t: usize| &x[t * n..(t + 1) * n];
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    // Variables stuck at a bound are dropped from the active set every
    // `shrink_every` steps and restored (with fresh gradients from w)
    // before optimality is declared.
    let mut active: Vec<usize> = (0..m).collect();
    let shrink_every = m.clamp(10, 1000);
    let mut countdown = shrink_every;
    let mut unshrunk = false;

    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmax2 = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for &t in &active {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
            if in_low(alpha[t], y[t]) {
                gmax2 = gmax2.max(y[t] * grad[t]);
            }
        }

        if i == usize::MAX || gmax + gmax2 < tol {
            if active.len() < m {
                reactivate(&mut active, &mut grad, &w, x, &y, n);
                countdown = shrink_every;
                continue;
            }
            converged = true;
            break;
        }

        countdown -= 1;
        if countdown == 0 {
            countdown = shrink_every;
            if !unshrunk && gmax + gmax2 <= 10.0 * tol {
                unshrunk = true;
                reactivate(&mut active, &mut grad, &w, x, &y, n);
                continue;
            }
            active.retain(|&t| {
                let g = grad[t];
                let stuck = if alpha[t] >= c {
                    if y[t] > 0.0 { -g > gmax } else { -g > gmax2 }
                } else if alpha[t] <= 0.0 {
                    if y[t] > 0.0 { g > gmax2 } else { g > gmax }
                } else {
                    false
                };
                !stuck
            });
        }

        let xi = row(i);
        // Second index: largest guaranteed decrease among violators in I_low.
        let mut best = f64::INFINITY;
        let mut j = usize::MAX;
        let mut a_ij = TAU;
        for &t in &active {
            if in_low(alpha[t], y[t]) {
                let b = gmax + y[t] * grad[t];
                if b > 0.0 {
                    let a = (kdiag[i] + kdiag[t] - 2.0 * dot(xi, row(t))).max(TAU);
                    let obj = -b * b / a;
                    if obj < best {
                        best = obj;
                        j = t;
                        a_ij = a;
                    }
                }
            }
        }
        if j == usize::MAX {
            if active.len() < m {
                reactivate(&mut active, &mut grad, &w, x, &y, n);
                countdown = shrink_every;
                continue;
            }
            converged = true;
            break;
        }
        iterations += 1;

        // Step along alpha_i += y_i s, alpha_j -= y_j s.
        let b = -y[i] * grad[i] + y[j] * grad[j];
        let (lo_i, hi_i) = if y[i] > 0.0 { (-alpha[i], c - alpha[i]) } else { (alpha[i] - c, alpha[i]) };
        let (lo_j, hi_j) = if y[j] > 0.0 { (alpha[j] - c, alpha[j]) } else { (-alpha[j], c - alpha[j]) };
        let step = (b / a_ij).clamp(lo_i.max(lo_j), hi_i.min(hi_j));

        let old_i = alpha[i];
        let old_j = alpha[j];
        alpha[i] = snap(old_i + y[i] * step, c);
        alpha[j] = snap(old_j - y[j] * step, c);
        let di = (alpha[i] - old_i) * y[i];
        let dj = (alpha[j] - old_j) * y[j];
        alpha_sum += alpha[i] - old_i + alpha[j] - old_j;
        let xj = row(j);
        for k in 0..n {
            dw[k] = di * xi[k] + dj * xj[k];
            w[k] += dw[k];
        }
        for &t in &active {
            grad[t] += y[t] * dot(&dw, row(t));
        }
        if let Some(tr) = trace.as_deref_mut() {
            tr.dual_objective.push(0.5 * dot(&w, &w) - alpha_sum);
        }
    }
    // Exact gradients everywhere for the threshold.
    reactivate(&mut active, &mut grad, &w, x, &y, n);
    if let Some(tr) = trace.as_deref_mut() {
        tr.iterations = iterations;
    }

    let rho = offset(&alpha, &grad, &y, c);
    let mut model = LinearModel {
        omega: w,
        bias: -rho,
        reg_c,
        converged,
        final_objective: 0.0,
    };
    model.final_objective = model.objective(data)?;
    Ok(model)
}

fn reactivate(active: &mut Vec<usize>, grad: &mut [f64], w: &[f64], x: &[f64], y: &[f64], n: usize) {
    active.clear();
    active.extend(0..grad.len());
    for (t, g) in grad.iter_mut().enumerate() {
        *g = y[t] * dot(w, &x[t * n..(t + 1) * n]) - 1.0;
    }
}

#[inline]
fn snap(a: f64, c: f64) -> f64 {
    let eps = 1e-12 * c;
    if a <= eps {
        0.0
    } else if a >= c - eps {
        c
    } else {
        a
    }
}

/// Threshold `rho` (decision is `w.x - rho`): mean over free support
/// vectors, midpoint of the feasible interval when there are none.
fn offset(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] > 0.0 {
                lb = lb.max(yg);
            } else {
                ub = ub.min(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}
