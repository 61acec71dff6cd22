//! Dual solver for the one-class problem over a precomputed Gram matrix:
//! minimize `1/2 a^T K a` subject to `0 <= a_i <= 1/(nu l)` and `sum a = 1`.
//!
//! [`solve_dual`] runs SMO-style maximal-violating-pair updates and is fully
//! deterministic. [`brute_force_dual`] is an independent projected-gradient
//! reference for small problems, kept unoptimized on purpose.

use crate::error::{Error, Result};
use crate::kernel::GramMatrix;

/// Alphas below this are treated as zero; alphas within it of the upper
/// bound are treated as bounded.
pub const ALPHA_ZERO_TOL: f64 = 1e-9;

/// Curvature floor for the pairwise step.
const TAU: f64 = 1e-12;

/// Default KKT violation tolerance.
pub const DEFAULT_TOL: f64 = 1e-6;

/// Default cap on pair updates.
pub const DEFAULT_MAX_ITER: u64 = 10_000_000;

/// The dual problem: a Gram matrix with the trade-off and stopping
/// parameters. `nu * l < 1` is accepted (the box constraint simply stops
/// binding); callers that care should warn.
#[derive(Debug, Clone)]
pub struct DualProblem<'a> {
    pub gram: &'a GramMatrix,
    pub nu: f64,
    pub tol: f64,
    pub max_iter: u64,
}

impl<'a> DualProblem<'a> {
    pub fn new(gram: &'a GramMatrix, nu: f64) -> Self {
        DualProblem { gram, nu, tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: u64) -> Self {
        self.max_iter = max_iter;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.gram.is_empty() {
            return Err(Error::invalid("empty Gram matrix"));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::invalid(format!("nu must be in (0, 1], got {}", self.nu)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be positive"));
        }
        if self.gram.entries().iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("NaN in Gram matrix"));
        }
        Ok(())
    }
}

/// Solution of the dual: weights, offset, diagnostics.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    /// `1/2 a^T K a` at the returned iterate.
    pub objective: f64,
    pub iterations: u64,
    pub converged: bool,
    /// Indices with `alpha_i > ALPHA_ZERO_TOL`.
    pub sv_index: Vec<usize>,
    /// Indices with `alpha_i >= 1/(nu l) - ALPHA_ZERO_TOL`.
    pub bounded_sv_index: Vec<usize>,
}

impl DualSolution {
    fn finish(alpha: Vec<f64>, gram: &GramMatrix, nu: f64, iterations: u64, converged: bool) -> Result<Self> {
        let scores = gram_scores(gram, &alpha);
        let objective = 0.5 * alpha.iter().zip(&scores).map(|(a, s)| a * s).sum::<f64>();
        let rho = rho_from_scores(&alpha, &scores, nu)?;
        let upper = 1.0 / (nu * alpha.len() as f64);
        let sv_index = (0..alpha.len()).filter(|&i| alpha[i] > ALPHA_ZERO_TOL).collect();
        let bounded_sv_index = (0..alpha.len())
            .filter(|&i| alpha[i] >= upper - ALPHA_ZERO_TOL)
            .collect();
        Ok(DualSolution { alpha, rho, objective, iterations, converged, sv_index, bounded_sv_index })
    }
}

/// Kernel expansion values `f_i = sum_j alpha_j K_ij`.
pub fn gram_scores(gram: &GramMatrix, alpha: &[f64]) -> Vec<f64> {
    let l = gram.len();
    debug_assert_eq!(alpha.len(), l);
    let mut scores = vec![0.0; l];
    for (j, &aj) in alpha.iter().enumerate() {
        if aj == 0.0 {
            continue;
        }
        let row = gram.row(j);
        for (s, k) in scores.iter_mut().zip(row) {
            *s += aj * k;
        }
    }
    scores
}

/// Deterministic feasible start: the first `floor(nu l)` coordinates at the
/// upper bound, the fractional remainder on the next one.
fn initial_alpha(l: usize, nu: f64) -> Vec<f64> {
    let nl = nu * l as f64;
    let upper = 1.0 / nl;
    let full = (nl.floor() as usize).min(l);
    let mut alpha = vec![0.0; l];
    for a in alpha.iter_mut().take(full) {
        *a = upper;
    }
    if full < l {
        let remainder = nl - full as f64;
        if remainder > 0.0 {
            alpha[full] = remainder / nl;
        }
    }
    alpha
}

/// Solves the dual by maximal-violating-pair SMO. Ties in the working-set
/// selection break toward the lowest index; the whole run is deterministic.
/// Non-convergence at `max_iter` is reported, not raised.
pub fn solve_dual(problem: &DualProblem) -> Result<DualSolution> {
    problem.validate()?;
    let gram = problem.gram;
    let l = gram.len();
    let nu = problem.nu;
    let upper = 1.0 / (nu * l as f64);

    let mut alpha = initial_alpha(l, nu);
    let mut grad = gram_scores(gram, &alpha);

    #[cfg(debug_assertions)]
    let mut prev_obj = {
        let o: f64 = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * g).sum::<f64>();
        o
    };

    let mut iterations = 0u64;
    let mut converged = false;
    while iterations < problem.max_iter {
        // Maximal violating pair: raise the lowest gradient among
        // coordinates free to grow, funded by the highest gradient among
        // coordinates free to shrink.
        let mut up: Option<usize> = None;
        let mut down: Option<usize> = None;
        for k in 0..l {
            if alpha[k] < upper && up.is_none_or(|u| grad[k] < grad[u]) {
                up = Some(k);
            }
            if alpha[k] > 0.0 && down.is_none_or(|d| grad[k] > grad[d]) {
                down = Some(k);
            }
        }
        let (i, j) = match (up, down) {
            (Some(i), Some(j)) if i != j => (i, j),
            // No feasible direction (nu = 1) or a single free coordinate.
            _ => {
                converged = true;
                break;
            }
        };
        if grad[j] - grad[i] <= problem.tol {
            converged = true;
            break;
        }

        let curvature = (gram.get(i, i) + gram.get(j, j) - 2.0 * gram.get(i, j)).max(TAU);
        let step = (grad[j] - grad[i]) / curvature;
        let room_i = upper - alpha[i];
        let room_j = alpha[j];
        let delta = step.min(room_i).min(room_j);
        alpha[i] = if delta >= room_i { upper } else { alpha[i] + delta };
        alpha[j] = if delta >= room_j { 0.0 } else { alpha[j] - delta };

        let row_i = gram.row(i);
        let row_j = gram.row(j);
        for k in 0..l {
            grad[k] += delta * (row_i[k] - row_j[k]);
        }
        iterations += 1;

        #[cfg(debug_assertions)]
        {
            let obj: f64 = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * g).sum::<f64>();
            debug_assert!(
                obj <= prev_obj + 1e-9 * (1.0 + prev_obj.abs()),
                "objective increased: {prev_obj} -> {obj} at iteration {iterations}"
            );
            prev_obj = obj;
        }
    }

    DualSolution::finish(alpha, gram, nu, iterations, converged)
}

/// Offset recovery: the mean of `f_i = sum_j alpha_j K_ij` over free support
/// measures. With no free coordinates, the midpoint between the largest `f`
/// at the upper bound and the smallest `f` at zero; with no zeros either
/// (nu = 1), the largest bounded `f`.
pub fn compute_rho(alpha: &[f64], gram: &GramMatrix, nu: f64) -> Result<f64> {
    if alpha.is_empty() {
        return Err(Error::invalid("empty alpha"));
    }
    if alpha.len() != gram.len() {
        return Err(Error::invalid(format!(
            "alpha length {} does not match Gram size {}",
            alpha.len(),
            gram.len()
        )));
    }
    let scores = gram_scores(gram, alpha);
    rho_from_scores(alpha, &scores, nu)
}

fn rho_from_scores(alpha: &[f64], scores: &[f64], nu: f64) -> Result<f64> {
    let l = alpha.len();
    let upper = 1.0 / (nu * l as f64);
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut upper_max = f64::NEG_INFINITY;
    let mut have_upper = false;
    let mut zero_min = f64::INFINITY;
    let mut have_zero = false;
    for (&a, &f) in alpha.iter().zip(scores) {
        if a > ALPHA_ZERO_TOL && a < upper - ALPHA_ZERO_TOL {
            free_sum += f;
            free_count += 1;
        } else if a >= upper - ALPHA_ZERO_TOL {
            have_upper = true;
            upper_max = upper_max.max(f);
        } else {
            have_zero = true;
            zero_min = zero_min.min(f);
        }
    }
    if free_count > 0 {
        return Ok(free_sum / free_count as f64);
    }
    match (have_upper, have_zero) {
        (true, true) => Ok((upper_max + zero_min) / 2.0),
        (true, false) => Ok(upper_max),
        _ => Err(Error::numerical("no support measures to recover rho from")),
    }
}

/// Euclidean projection onto `{0 <= x <= cap, sum x = 1}` by bisection on
/// the shift scalar.
fn project_capped_simplex(v: &[f64], cap: f64) -> Vec<f64> {
    let clip_sum = |t: f64| -> f64 {
        v.iter().map(|&vi| (vi - t).clamp(0.0, cap)).sum()
    };
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - cap - 1.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clip_sum(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    v.iter().map(|&vi| (vi - t).clamp(0.0, cap)).collect()
}

/// Reference solver: projected gradient descent on the feasible polytope,
/// run until the objective improvement falls below 1e-12. Refuses problems
/// with more than 8 groups.
pub fn brute_force_dual(problem: &DualProblem) -> Result<DualSolution> {
    problem.validate()?;
    let gram = problem.gram;
    let l = gram.len();
    if l > 8 {
        return Err(Error::invalid(format!("brute-force oracle is limited to 8 groups, got {l}")));
    }
    let nu = problem.nu;
    let cap = 1.0 / (nu * l as f64);

    // Step size from a spectral bound: max absolute row sum.
    let lipschitz = (0..l)
        .map(|i| gram.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
        .max(TAU);
    let step = 1.0 / lipschitz;

    let objective_of = |a: &[f64]| -> f64 {
        let s = gram_scores(gram, a);
        0.5 * a.iter().zip(&s).map(|(x, y)| x * y).sum::<f64>()
    };

    let mut alpha = vec![1.0 / l as f64; l];
    let mut obj = objective_of(&alpha);
    let mut iterations = 0u64;
    let mut converged = false;
    let max_iter = 500_000u64;
    while iterations < max_iter {
        let grad = gram_scores(gram, &alpha);
        let trial: Vec<f64> = alpha.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
        let next = project_capped_simplex(&trial, cap);
        let next_obj = objective_of(&next);
        iterations += 1;
        let improvement = obj - next_obj;
        alpha = next;
        obj = next_obj;
        if improvement < 1e-12 {
            converged = true;
            break;
        }
    }
    DualSolution::finish(alpha, gram, nu, iterations, converged)
}
