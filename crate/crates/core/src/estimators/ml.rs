//! Constrained maximum likelihood under perfect ranking.
//!
//! Given rank `r`, a measured unit is the `r`-th order statistic of its
//! comparison set, so category `q` has probability
//! `p_(r)q = F_r(c_q) - F_r(c_{q-1})` with `F_r(x) = B_x(r, H - r + 1)`.
//! The log-likelihood only depends on the `H x Q` table of (rank, category)
//! counts.
//!
//! The feasible region is `lo <= c_1`, `c_{j+1} - c_j >= gap`,
//! `c_{Q-1} <= hi`. Iterates are kept feasible by Euclidean projection onto
//! that region (a shifted isotonic regression followed by clipping), and
//! each accepted step must not decrease the objective. Newton directions
//! are used when the Hessian is negative definite, projected gradient
//! steps otherwise.

use nalgebra::{DMatrix, DVector};

use super::estimate_standard_jps;
use crate::error::{invalid, Result};
use crate::kernel::{binomial_tail, order_stat_density, order_stat_density_slope, pava_unchecked};
use crate::types::{EstimateResult, FitReport, JpsSample, Method};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlOptions {
    /// Stop once an accepted step raises the log-likelihood by less than this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub bound_lo: f64,
    pub bound_hi: f64,
    /// Minimum spacing between consecutive cumulative probabilities.
    pub min_gap: f64,
}

impl Default for MlOptions {
    fn default() -> Self {
        Self { tolerance: 1e-9, max_iterations: 1000, bound_lo: 0.01, bound_hi: 0.99, min_gap: 1e-6 }
    }
}

impl MlOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.bound_lo && self.bound_lo < self.bound_hi && self.bound_hi < 1.0) {
            return invalid(format!("ML bounds must satisfy 0 < lo < hi < 1, got ({}, {})", self.bound_lo, self.bound_hi));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return invalid("ML tolerance must be positive");
        }
        if self.min_gap.is_nan() || self.min_gap <= 0.0 {
            return invalid("ML minimum gap must be positive");
        }
        Ok(())
    }
}

/// Spacing used to repair a degenerate starting point.
const START_REPAIR_GAP: f64 = 1e-4;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Log-likelihood of a JPS sample as a function of `c_1..c_{Q-1}`.
#[derive(Debug, Clone)]
pub struct JpsLikelihood {
    set_size: usize,
    num_categories: usize,
    /// `counts[r][q]`: units with rank `r+1` in category `q+1`.
    counts: Vec<Vec<f64>>,
}

impl JpsLikelihood {
    pub fn new(sample: &JpsSample) -> Self {
        let mut counts = vec![vec![0.0; sample.num_categories()]; sample.set_size()];
        for (&x, &r) in sample.values().iter().zip(sample.ranks()) {
            counts[r - 1][x - 1] += 1.0;
        }
        Self { set_size: sample.set_size(), num_categories: sample.num_categories(), counts }
    }

    /// `c_0..c_Q` padded with the fixed endpoints.
    fn padded(&self, c: &[f64]) -> Vec<f64> {
        let mut full = Vec::with_capacity(self.num_categories + 1);
        full.push(0.0);
        full.extend_from_slice(c);
        full.push(1.0);
        full
    }

    pub fn value(&self, c: &[f64]) -> f64 {
        debug_assert_eq!(c.len() + 1, self.num_categories);
        let full = self.padded(c);
        let mut total = 0.0;
        for (r, row) in self.counts.iter().enumerate() {
            if row.iter().all(|n| *n == 0.0) {
                continue;
            }
            let tails: Vec<f64> = full.iter().map(|&x| binomial_tail(x, r + 1, self.set_size)).collect();
            for (q, &n) in row.iter().enumerate() {
                if n == 0.0 {
                    continue;
                }
                let p = if q + 1 == self.num_categories {
                    // Last category as 1 - sum of the others.
                    1.0 - tails[q]
                } else {
                    tails[q + 1] - tails[q]
                };
                if p.is_nan() || p <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                total += n * p.ln();
            }
        }
        total
    }

    /// Gradient and Hessian in `c_1..c_{Q-1}`, valid in the interior.
    pub fn derivatives(&self, c: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let m = c.len();
        let full = self.padded(c);
        let mut grad = DVector::zeros(m);
        let mut hess = DMatrix::zeros(m, m);
        for (r, row) in self.counts.iter().enumerate() {
            if row.iter().all(|n| *n == 0.0) {
                continue;
            }
            let rank = r + 1;
            let tails: Vec<f64> = full.iter().map(|&x| binomial_tail(x, rank, self.set_size)).collect();
            for (q, &n) in row.iter().enumerate() {
                if n == 0.0 {
                    continue;
                }
                let p = tails[q + 1] - tails[q];
                // Category q+1 spans (c_q, c_{q+1}]; free endpoints are c_j for j in 1..=m.
                let upper = q + 1;
                let lower = q;
                let mut d = [(0usize, 0.0f64, 0.0f64); 2];
                let mut len = 0;
                if lower >= 1 {
                    let x = full[lower];
                    d[len] = (lower - 1, -order_stat_density(x, rank, self.set_size), -order_stat_density_slope(x, rank, self.set_size));
                    len += 1;
                }
                if upper <= m {
                    let x = full[upper];
                    d[len] = (upper - 1, order_stat_density(x, rank, self.set_size), order_stat_density_slope(x, rank, self.set_size));
                    len += 1;
                }
                for &(j, f, _) in &d[..len] {
                    grad[j] += n * f / p;
                }
                for &(j, f, fp) in &d[..len] {
                    hess[(j, j)] += n * (fp / p - f * f / (p * p));
                }
                if len == 2 {
                    let (a, fa, _) = d[0];
                    let (b, fb, _) = d[1];
                    let cross = -n * fa * fb / (p * p);
                    hess[(a, b)] += cross;
                    hess[(b, a)] += cross;
                }
            }
        }
        (grad, hess)
    }
}

/// Conditional log-likelihood of `sample` at cumulative probabilities `c_1..c_{Q-1}`.
///
/// Returns `-inf` if the sample has positive count in a cell of zero probability.
pub fn log_likelihood(sample: &JpsSample, c: &[f64]) -> Result<f64> {
    if c.len() + 1 != sample.num_categories() {
        return invalid(format!("expected {} cumulative probabilities, got {}", sample.num_categories() - 1, c.len()));
    }
    let mut prev = 0.0;
    for &v in c {
        if !(v > prev && v < 1.0) {
            return invalid("cumulative probabilities must be strictly increasing in (0, 1)");
        }
        prev = v;
    }
    Ok(JpsLikelihood::new(sample).value(c))
}

/// Euclidean projection onto `{lo <= c_1, c_{j+1} - c_j >= gap, c_last <= hi}`.
///
/// Subtracting `j * gap` turns the spacing constraints into plain
/// monotonicity; the projection onto a monotone cone intersected with a box
/// is the isotonic fit clipped to the box.
pub fn project_ordered(c: &[f64], lo: f64, hi: f64, gap: f64) -> Vec<f64> {
    let m = c.len();
    if m == 0 {
        return Vec::new();
    }
    let upper = hi - (m - 1) as f64 * gap;
    assert!(upper >= lo, "feasible region is empty");
    let negated: Vec<f64> = c.iter().enumerate().map(|(j, v)| -(v - j as f64 * gap)).collect();
    let fitted = pava_unchecked(&negated, &vec![1.0; m]);
    fitted
        .iter()
        .enumerate()
        .map(|(j, v)| (-v).clamp(lo, upper) + j as f64 * gap)
        .collect()
}

fn is_feasible(c: &[f64], opts: &MlOptions) -> bool {
    let Some((&first, &last)) = c.first().zip(c.last()) else {
        return true;
    };
    first >= opts.bound_lo
        && last <= opts.bound_hi
        && c.windows(2).all(|w| w[1] - w[0] >= opts.min_gap * (1.0 - 1e-9))
}

/// Standard JPS estimate clipped into the box, repaired by projection if it
/// does not satisfy the spacing constraints.
fn starting_point(sample: &JpsSample, opts: &MlOptions) -> Result<Vec<f64>> {
    let st = estimate_standard_jps(sample)?;
    let clipped: Vec<f64> = st.cumulative.iter().map(|v| v.clamp(opts.bound_lo, opts.bound_hi)).collect();
    if is_feasible(&clipped, opts) {
        return Ok(clipped);
    }
    let gap = opts.min_gap.max(START_REPAIR_GAP);
    Ok(project_ordered(&clipped, opts.bound_lo, opts.bound_hi, gap))
}

/// Newton direction if `-hess` is positive definite.
fn newton_direction(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Option<DVector<f64>> {
    let neg = -hess.clone();
    let chol = neg.cholesky()?;
    let d = chol.solve(grad);
    d.iter().all(|v| v.is_finite()).then_some(d)
}

/// Maximizes the JPS log-likelihood over ordered cumulative probabilities.
///
/// The returned estimate carries a [`FitReport`]; running out of
/// iterations sets `converged = false` but still returns the best point.
pub fn estimate_ml(sample: &JpsSample, opts: &MlOptions) -> Result<EstimateResult> {
    opts.validate()?;
    if sample.is_empty() {
        return invalid("ML estimator needs at least one observation");
    }
    let m = sample.num_categories() - 1;
    if m == 0 {
        let fit = FitReport { iterations: 0, converged: true, start_objective: 0.0, final_objective: 0.0 };
        return Ok(EstimateResult::from_cumulative(Method::Ml, vec![]).with_fit(fit));
    }
    if opts.bound_lo + (m - 1) as f64 * opts.min_gap.max(START_REPAIR_GAP) > opts.bound_hi {
        return invalid("too many categories for the ML bounds and spacing");
    }
    let lik = JpsLikelihood::new(sample);
    let project = |c: &[f64]| project_ordered(c, opts.bound_lo, opts.bound_hi, opts.min_gap);

    let mut c = starting_point(sample, opts)?;
    let start_objective = lik.value(&c);
    let mut current = start_objective;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let (grad, hess) = lik.derivatives(&c);
        let mut candidates: Vec<DVector<f64>> = Vec::with_capacity(2);
        if let Some(d) = newton_direction(&grad, &hess) {
            candidates.push(d);
        }
        let gnorm = grad.amax();
        if gnorm > 0.0 {
            // Steepest ascent, scaled so the first trial moves at most 0.1.
            candidates.push(&grad * (0.1 / gnorm));
        }

        let mut accepted: Option<(Vec<f64>, f64)> = None;
        'directions: for d in &candidates {
            let mut t = 1.0;
            for _ in 0..MAX_HALVINGS {
                let trial: Vec<f64> = c.iter().zip(d.iter()).map(|(ci, di)| ci + t * di).collect();
                let trial = project(&trial);
                let moved: f64 = trial.iter().zip(&c).zip(grad.iter()).map(|((a, b), g)| (a - b) * g).sum();
                let value = lik.value(&trial);
                if value.is_finite() && value >= current + ARMIJO * moved && value >= current {
                    if trial != c {
                        accepted = Some((trial, value));
                        break 'directions;
                    }
                    break;
                }
                t *= 0.5;
            }
        }

        match accepted {
            Some((next, value)) => {
                let gain = value - current;
                c = next;
                current = value;
                if gain < opts.tolerance {
                    converged = true;
                    break;
                }
            }
            None => {
                // No ascent direction survives projection: constrained stationary point.
                converged = true;
                break;
            }
        }
    }

    let fit = FitReport { iterations, converged, start_objective, final_objective: current };
    Ok(EstimateResult::from_cumulative(Method::Ml, c).with_fit(fit))
}
