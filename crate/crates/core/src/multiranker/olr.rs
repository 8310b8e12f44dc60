//! Proportional-odds (cumulative logit) regression with common slopes.
//!
//! `logit P(X <= q | z) = alpha_q + beta' z`, `q = 1..Q-1`. With this sign
//! convention a larger linear predictor means a smaller category.
//!
//! Parameters are packed as `theta = (alpha_1..alpha_{Q-1}, beta_1..beta_K)`.
//! Fitting is Newton-Raphson with step halving. When the negated Hessian is
//! not positive definite, a ridge `lambda I` is added, starting at
//! `1e-8 * max(1, max|H_jj|)` and growing tenfold until Cholesky succeeds.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, JpsError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlrOptions {
    /// Convergence when the max-norm of the gradient falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for OlrOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 100 }
    }
}

/// Slopes beyond this magnitude are reported as (quasi-)separation.
const SEPARATION_SLOPE: f64 = 25.0;
/// A mean log-likelihood above `-SEPARATION_FIT` is a perfect fit.
const SEPARATION_FIT: f64 = 1e-6;
const MAX_HALVINGS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct OlrModel {
    pub intercepts: Vec<f64>,
    pub slopes: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Data appear (quasi-)separated: slopes diverged.
    pub separated: bool,
    pub gradient_norm: f64,
    pub initial_log_likelihood: f64,
    pub log_likelihood: f64,
}

impl OlrModel {
    /// `beta' z`; the intercept is common to every unit for a fixed `q`.
    pub fn linear_predictor(&self, z: &[f64]) -> f64 {
        self.slopes.iter().zip(z).map(|(b, v)| b * v).sum()
    }

    /// `P(X <= q | z)` for `q = 1..Q-1`.
    pub fn cumulative_probs(&self, z: &[f64]) -> Vec<f64> {
        let eta = self.linear_predictor(z);
        self.intercepts.iter().map(|a| sigmoid(a + eta)).collect()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Problem data validated once.
struct OlrData<'a> {
    x: &'a [usize],
    z: &'a [Vec<f64>],
    num_categories: usize,
    num_slopes: usize,
}

impl<'a> OlrData<'a> {
    fn new(x: &'a [usize], z: &'a [Vec<f64>], num_categories: usize) -> Result<Self> {
        if x.len() != z.len() {
            return invalid(format!("{} categories but {} covariate rows", x.len(), z.len()));
        }
        if num_categories < 2 {
            return invalid("OLR needs at least two categories");
        }
        let k = z.first().map_or(0, Vec::len);
        if z.iter().any(|row| row.len() != k) {
            return invalid("covariate rows differ in length");
        }
        if let Some(v) = x.iter().find(|v| **v == 0 || **v > num_categories) {
            return invalid(format!("category {v} outside 1..={num_categories}"));
        }
        if z.iter().flatten().any(|v| !v.is_finite()) {
            return invalid("covariates must be finite");
        }
        Ok(Self { x, z, num_categories, num_slopes: k })
    }

    fn dim(&self) -> usize {
        self.num_categories - 1 + self.num_slopes
    }

    /// Log-likelihood plus, optionally, gradient and Hessian.
    fn evaluate(&self, theta: &[f64], want_hessian: bool) -> (f64, DVector<f64>, Option<DMatrix<f64>>) {
        let m = self.num_categories - 1;
        let p = self.dim();
        let mut ll = 0.0;
        let mut grad = DVector::zeros(p);
        let mut hess = want_hessian.then(|| DMatrix::zeros(p, p));
        let (alpha, beta) = theta.split_at(m);
        let mut da = DVector::zeros(p);
        let mut db = DVector::zeros(p);
        for (&y, zi) in self.x.iter().zip(self.z) {
            let eta: f64 = beta.iter().zip(zi).map(|(b, v)| b * v).sum();
            // Upper cut q = y (absent when y = Q), lower cut q = y - 1 (absent when y = 1).
            let (fa, fa_slope, ca) = if y <= m {
                let s = sigmoid(alpha[y - 1] + eta);
                (s * (1.0 - s), s * (1.0 - s) * (1.0 - 2.0 * s), s)
            } else {
                (0.0, 0.0, 1.0)
            };
            let (fb, fb_slope, cb) = if y >= 2 {
                let s = sigmoid(alpha[y - 2] + eta);
                (s * (1.0 - s), s * (1.0 - s) * (1.0 - 2.0 * s), s)
            } else {
                (0.0, 0.0, 0.0)
            };
            let prob = ca - cb;
            if prob.is_nan() || prob <= 0.0 {
                return (f64::NEG_INFINITY, grad, hess);
            }
            ll += prob.ln();

            da.fill(0.0);
            db.fill(0.0);
            if y <= m {
                da[y - 1] = 1.0;
            }
            if y >= 2 {
                db[y - 2] = 1.0;
            }
            for (k, v) in zi.iter().enumerate() {
                da[m + k] = *v;
                db[m + k] = *v;
            }
            let gi = (&da * fa - &db * fb) / prob;
            grad += &gi;
            if let Some(h) = hess.as_mut() {
                *h += (&da * da.transpose()) * (fa_slope / prob) - (&db * db.transpose()) * (fb_slope / prob)
                    - &gi * gi.transpose();
            }
        }
        (ll, grad, hess)
    }
}

/// Proportional-odds log-likelihood at `theta = (alpha, beta)`.
pub fn olr_log_likelihood(x: &[usize], z: &[Vec<f64>], num_categories: usize, theta: &[f64]) -> Result<f64> {
    let data = OlrData::new(x, z, num_categories)?;
    if theta.len() != data.dim() {
        return invalid(format!("expected {} parameters, got {}", data.dim(), theta.len()));
    }
    Ok(data.evaluate(theta, false).0)
}

/// Analytic gradient of [`olr_log_likelihood`].
pub fn olr_gradient(x: &[usize], z: &[Vec<f64>], num_categories: usize, theta: &[f64]) -> Result<Vec<f64>> {
    let data = OlrData::new(x, z, num_categories)?;
    if theta.len() != data.dim() {
        return invalid(format!("expected {} parameters, got {}", data.dim(), theta.len()));
    }
    Ok(data.evaluate(theta, false).1.iter().copied().collect())
}

fn ridge_newton_step(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Option<DVector<f64>> {
    let neg = -hess.clone();
    let scale = neg.diagonal().amax().max(1.0);
    let mut lambda = 0.0;
    for _ in 0..20 {
        let mut a = neg.clone();
        for j in 0..a.nrows() {
            a[(j, j)] += lambda;
        }
        if let Some(chol) = a.cholesky() {
            let d = chol.solve(grad);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        lambda = if lambda == 0.0 { 1e-8 * scale } else { lambda * 10.0 };
    }
    None
}

/// Fits the proportional-odds model to categories `x` (1-based) and
/// covariate rows `z` (one row of `K` values per unit; `K` may be 0).
///
/// The start is `alpha_q = logit(q / Q)`, `beta = 0`. Non-convergence and
/// separation are flagged on the model rather than raised.
pub fn fit_olr(x: &[usize], z: &[Vec<f64>], num_categories: usize, opts: &OlrOptions) -> Result<OlrModel> {
    let data = OlrData::new(x, z, num_categories)?;
    let m = num_categories - 1;
    if x.len() <= data.num_slopes + m {
        return invalid(format!("OLR needs more than {} observations, got {}", data.num_slopes + m, x.len()));
    }
    let mut present = vec![false; num_categories];
    for &v in x {
        present[v - 1] = true;
    }
    if let Some(q) = present.iter().position(|p| !p) {
        return invalid(format!("category {} absent from OLR training data", q + 1));
    }

    let mut theta: Vec<f64> = (1..=m).map(|q| logit(q as f64 / num_categories as f64)).collect();
    theta.extend(std::iter::repeat_n(0.0, data.num_slopes));
    let (mut ll, mut grad, mut hess) = data.evaluate(&theta, true);
    let initial_log_likelihood = ll;
    let mut iterations = 0;
    let mut converged = grad.amax() < opts.tolerance;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let step = ridge_newton_step(&grad, hess.as_ref().unwrap())
            .ok_or_else(|| JpsError::OlrFailure("Hessian could not be regularized".into()))?;
        // Near the optimum the gain falls below rounding noise in `ll`.
        let slack = 1e-12 * ll.abs().max(1.0);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            let ordered = trial[..m].windows(2).all(|w| w[1] > w[0]);
            if ordered {
                let (trial_ll, _, _) = data.evaluate(&trial, false);
                if trial_ll.is_finite() && trial_ll >= ll - slack {
                    theta = trial;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
        (ll, grad, hess) = data.evaluate(&theta, true);
        converged = grad.amax() < opts.tolerance;
    }

    let slopes = theta[m..].to_vec();
    let separated =
        slopes.iter().any(|b| b.abs() > SEPARATION_SLOPE) || ll > -SEPARATION_FIT * x.len() as f64;
    Ok(OlrModel {
        intercepts: theta[..m].to_vec(),
        slopes,
        iterations,
        converged,
        separated,
        gradient_norm: grad.amax(),
        initial_log_likelihood,
        log_likelihood: ll,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{draw_jps_multi, RankerSpec};
    use crate::types::OrdinalDistribution;

    #[test]
    fn intercept_only_fit_is_empirical_logit() {
        let x = [1, 1, 2, 2, 2, 3, 3, 3, 3, 3];
        let z: Vec<Vec<f64>> = vec![vec![]; x.len()];
        let model = fit_olr(&x, &z, 3, &OlrOptions::default()).unwrap();
        assert!(model.converged);
        assert!((model.intercepts[0] - logit(0.2)).abs() < 1e-9);
        assert!((model.intercepts[1] - logit(0.5)).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let d = OrdinalDistribution::new(vec![0.3, 0.4, 0.3]).unwrap();
        let rankers = [RankerSpec::concomitant(0.8).unwrap(), RankerSpec::concomitant(0.5).unwrap()];
        let s = draw_jps_multi(&d, 60, 2, &rankers, 1).unwrap();
        let theta = [-0.7, 0.9, -1.1, 0.3];
        let g = olr_gradient(s.values(), s.concomitants(), 3, &theta).unwrap();
        let h = 1e-5;
        for j in 0..theta.len() {
            let mut up = theta;
            let mut dn = theta;
            up[j] += h;
            dn[j] -= h;
            let fd = (olr_log_likelihood(s.values(), s.concomitants(), 3, &up).unwrap()
                - olr_log_likelihood(s.values(), s.concomitants(), 3, &dn).unwrap())
                / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-6 * fd.abs().max(1.0), "{j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let d = OrdinalDistribution::new(vec![0.3, 0.4, 0.3]).unwrap();
        let rankers = [RankerSpec::concomitant(0.8).unwrap(), RankerSpec::concomitant(0.5).unwrap()];
        let s = draw_jps_multi(&d, 60, 2, &rankers, 1).unwrap();
        let data = OlrData::new(s.values(), s.concomitants(), 3).unwrap();
        let theta = [-0.7, 0.9, -1.1, 0.3];
        let hess = data.evaluate(&theta, true).2.unwrap();
        let h = 1e-5;
        for j in 0..theta.len() {
            let mut up = theta;
            let mut dn = theta;
            up[j] += h;
            dn[j] -= h;
            let fd = (data.evaluate(&up, false).1 - data.evaluate(&dn, false).1) / (2.0 * h);
            for i in 0..theta.len() {
                assert!((fd[i] - hess[(i, j)]).abs() <= 1e-5 * fd[i].abs().max(1.0), "{i},{j}: {} vs {}", fd[i], hess[(i, j)]);
            }
        }
    }

    #[test]
    fn slope_sign_follows_convention() {
        let d = OrdinalDistribution::new(vec![0.3, 0.4, 0.3]).unwrap();
        let s = draw_jps_multi(&d, 400, 1, &[RankerSpec::concomitant(0.8).unwrap()], 4).unwrap();
        let model = fit_olr(s.values(), s.concomitants(), 3, &OlrOptions::default()).unwrap();
        assert!(model.converged, "{model:?}");
        assert!(model.slopes[0] < 0.0, "{:?}", model.slopes);
        let lo = model.cumulative_probs(&[-1.0])[0];
        let hi = model.cumulative_probs(&[1.0])[0];
        assert!(lo > hi);
    }

    #[test]
    fn separated_data_is_flagged() {
        let x = [1, 1, 1, 2, 2, 2];
        let z: Vec<Vec<f64>> = [0.0, 0.1, 0.2, 1.0, 1.1, 1.2].iter().map(|v| vec![*v]).collect();
        let model = fit_olr(&x, &z, 2, &OlrOptions::default()).unwrap();
        assert!(model.separated || !model.converged, "{model:?}");
    }

    #[test]
    fn preconditions() {
        let z: Vec<Vec<f64>> = vec![vec![0.0]; 2];
        assert!(fit_olr(&[1, 2], &z, 2, &OlrOptions::default()).is_err());
        let z: Vec<Vec<f64>> = vec![vec![0.0]; 5];
        assert!(fit_olr(&[1, 1, 1, 1, 1], &z, 2, &OlrOptions::default()).is_err());
    }
}
