//! Projected Levenberg-Marquardt for small box-constrained least squares.
//!
//! Parameters pinned at a bound whose gradient component points out of the box
//! are frozen for the step; the damped Gauss-Newton step is taken in the
//! remaining coordinates and the trial point is clamped back into the box.
//! A trial is accepted only on strict decrease of the sum of squares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the projected-gradient inf-norm falls below this fraction of its initial value.
    pub gradient_tolerance: f64,
    /// Stop when a projected step moves no coordinate by more than this.
    pub step_tolerance: f64,
    pub initial_damping: f64,
    /// Finite-difference step is `fd_step * max(1, |theta_i|)`.
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            gradient_tolerance: 1e-8,
            step_tolerance: 1e-10,
            initial_damping: 1e-3,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxIterations,
    /// The clamp cancelled a nonzero step: the descent direction leaves the box.
    StalledAtBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub objective: f64,
    /// Objective at the start point and after each accepted step.
    pub history: Vec<f64>,
    pub status: Status,
    pub iterations: usize,
}

const MAX_DAMPING: f64 = 1e16;
const MIN_DAMPING: f64 = 1e-15;

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn clamp_into(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(lo, hi);
    }
}

/// Column-major finite-difference Jacobian. Central where the stencil fits in
/// the box, one-sided otherwise.
pub fn fd_jacobian<F>(
    f: &mut F,
    x: &[f64],
    lower: &[f64],
    upper: &[f64],
    rel_step: f64,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut cols = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = rel_step * x[i].abs().max(1.0);
        let (lo_pt, hi_pt) = match (x[i] - h >= lower[i], x[i] + h <= upper[i]) {
            (true, true) => (x[i] - h, x[i] + h),
            (false, true) => (x[i], x[i] + h),
            (true, false) => (x[i] - h, x[i]),
            // box thinner than the stencil: difference across it
            (false, false) => (lower[i], upper[i]),
        };
        if hi_pt == lo_pt {
            cols.push(Vec::new());
            continue;
        }
        probe[i] = hi_pt;
        let r_hi = f(&probe)?;
        probe[i] = lo_pt;
        let r_lo = f(&probe)?;
        probe[i] = x[i];
        let inv = 1.0 / (hi_pt - lo_pt);
        cols.push(r_hi.iter().zip(&r_lo).map(|(a, b)| (a - b) * inv).collect());
    }
    let m = cols.iter().map(Vec::len).max().unwrap_or(0);
    for c in cols.iter_mut().filter(|c| c.is_empty()) {
        *c = vec![0.0; m];
    }
    Ok(cols)
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 || !a[pivot][col].is_finite() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = ((row + 1)..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

struct Linearization {
    normal: Vec<Vec<f64>>,
    gradient: Vec<f64>,
}

fn linearize(jac: &[Vec<f64>], r: &[f64]) -> Linearization {
    let n = jac.len();
    let mut normal = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v: f64 = jac[i].iter().zip(&jac[j]).map(|(a, b)| a * b).sum();
            normal[i][j] = v;
            normal[j][i] = v;
        }
    }
    // gradient of 0.5 * |r|^2
    let gradient = jac
        .iter()
        .map(|col| col.iter().zip(r).map(|(a, b)| a * b).sum())
        .collect();
    Linearization { normal, gradient }
}

fn active_set(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<bool> {
    (0..x.len())
        .map(|i| (x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0))
        .collect()
}

fn projected_gradient_norm(g: &[f64], active: &[bool]) -> f64 {
    g.iter()
        .zip(active)
        .filter(|(_, &a)| !a)
        .map(|(v, _)| v.abs())
        .fold(0.0, f64::max)
}

/// Minimizes `|f(x)|^2` over `lower <= x <= upper`.
pub fn minimize_box<F>(
    mut f: F,
    start: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &LmOptions,
) -> Result<LmOutcome>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = start.len();
    if n == 0 || lower.len() != n || upper.len() != n {
        return Err(Error::invalid(
            "start and bounds must have equal, nonzero length",
        ));
    }
    if lower.iter().zip(upper).any(|(lo, hi)| !(lo <= hi)) {
        return Err(Error::invalid("lower bound exceeds upper bound"));
    }

    let mut x = start.to_vec();
    clamp_into(&mut x, lower, upper);
    let mut r = f(&x)?;
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return Err(Error::InvalidStart(format!("objective {cost} at {x:?}")));
    }
    let mut history = vec![cost];

    let mut lin = linearize(&fd_jacobian(&mut f, &x, lower, upper, opts.fd_step)?, &r);
    let mut active = active_set(&x, &lin.gradient, lower, upper);
    let mut pg = projected_gradient_norm(&lin.gradient, &active);
    let pg_threshold = opts.gradient_tolerance * pg;

    let mut lambda = opts.initial_damping;
    let mut iterations = 0;

    let status = loop {
        if pg <= pg_threshold {
            break Status::Converged;
        }
        if iterations >= opts.max_iterations {
            break Status::MaxIterations;
        }
        iterations += 1;

        let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
        let max_diag = free.iter().map(|&i| lin.normal[i][i]).fold(0.0, f64::max);
        let floor = 1e-12 * max_diag.max(f64::MIN_POSITIVE);
        let a: Vec<Vec<f64>> = free
            .iter()
            .map(|&i| {
                free.iter()
                    .map(|&j| {
                        let v = lin.normal[i][j];
                        if i == j {
                            v + lambda * v.max(floor)
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        let b: Vec<f64> = free.iter().map(|&i| -lin.gradient[i]).collect();

        let Some(delta) = solve_dense(a, b) else {
            lambda *= 10.0;
            if lambda > MAX_DAMPING {
                break Status::Converged;
            }
            continue;
        };

        let mut trial = x.clone();
        for (&i, d) in free.iter().zip(&delta) {
            trial[i] += d;
        }
        clamp_into(&mut trial, lower, upper);
        let moved = trial
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if moved <= opts.step_tolerance {
            let wanted = delta.iter().map(|d| d.abs()).fold(0.0, f64::max);
            break if wanted > opts.step_tolerance {
                Status::StalledAtBound
            } else {
                Status::Converged
            };
        }

        let r_trial = f(&trial)?;
        let cost_trial = sum_sq(&r_trial);
        if cost_trial.is_finite() && cost_trial < cost {
            x = trial;
            r = r_trial;
            cost = cost_trial;
            history.push(cost);
            lambda = (lambda / 10.0).max(MIN_DAMPING);
            lin = linearize(&fd_jacobian(&mut f, &x, lower, upper, opts.fd_step)?, &r);
            active = active_set(&x, &lin.gradient, lower, upper);
            pg = projected_gradient_norm(&lin.gradient, &active);
        } else {
            lambda *= 10.0;
            if lambda > MAX_DAMPING {
                break Status::Converged;
            }
        }
    };

    Ok(LmOutcome {
        params: x,
        objective: cost,
        history,
        status,
        iterations,
    })
}

/// Exhaustive evaluation on a uniform grid (endpoints included) over a box
/// of dimension 1 or 2. Ties keep the first grid point in row-major order.
pub fn grid_search<F>(
    mut objective: F,
    lower: &[f64],
    upper: &[f64],
    resolution: usize,
) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let dim = lower.len();
    if dim == 0 || upper.len() != dim {
        return Err(Error::invalid(
            "grid bounds must have equal, nonzero length",
        ));
    }
    if dim > 2 {
        return Err(Error::UnsupportedMode(dim));
    }
    if resolution < 2 {
        return Err(Error::invalid("grid resolution must be at least 2"));
    }
    let axis = |d: usize, i: usize| {
        if i + 1 == resolution {
            upper[d]
        } else {
            lower[d] + (upper[d] - lower[d]) * i as f64 / (resolution - 1) as f64
        }
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    let outer = if dim == 2 { resolution } else { 1 };
    for i in 0..resolution {
        for j in 0..outer {
            let point: Vec<f64> = if dim == 2 {
                vec![axis(0, i), axis(1, j)]
            } else {
                vec![axis(0, i)]
            };
            let v = objective(&point)?;
            if v.is_finite() && best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((point, v));
            }
        }
    }
    best.ok_or_else(|| Error::invalid("objective not finite anywhere on the grid"))
}
