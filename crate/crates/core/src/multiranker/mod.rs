//! Estimators that combine ranks from several rankers.
//!
//! Each measured unit `i` spreads a unit of weight over strata:
//! `gamma_ih = sum_k delta_k I(R_ik = h)`, with ranker weights
//! `delta_k = |rho_k| / sum |rho_k|` built from the sample correlation of
//! each ranker's scores with the measured categories.

mod olr;

pub use olr::{fit_olr, olr_gradient, olr_log_likelihood, OlrModel, OlrOptions};

use rand::Rng;

use crate::error::{invalid, Result};
use crate::estimators::{estimate_standard_jps, isotonize_with_gaps, ImputeSide};
use crate::sampling::{judgment_rank, UnitSource};
use crate::stats::pearson;
use crate::types::{EstimateResult, FitReport, JpsSample, Method, MultiRankerSample};

#[derive(Debug, Clone, PartialEq)]
pub struct RankerWeights {
    pub deltas: Vec<f64>,
    pub correlations: Vec<f64>,
    /// Every correlation was zero and the weights fell back to uniform.
    pub degenerate: bool,
}

impl RankerWeights {
    /// Weights given directly, normalized to sum to one.
    pub fn from_deltas(deltas: Vec<f64>) -> Result<Self> {
        if deltas.is_empty() || deltas.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return invalid("ranker weights must be non-negative and finite");
        }
        let total: f64 = deltas.iter().sum();
        if total <= 0.0 {
            return invalid("ranker weights sum to zero");
        }
        Ok(Self {
            deltas: deltas.iter().map(|d| d / total).collect(),
            correlations: vec![f64::NAN; deltas.len()],
            degenerate: false,
        })
    }

    pub fn uniform(k: usize) -> Self {
        Self { deltas: vec![1.0 / k as f64; k], correlations: vec![f64::NAN; k], degenerate: false }
    }
}

/// Ranker weights from the sample correlations between the category index
/// and each column of `z` (rows are units).
pub fn ranker_weights(x: &[usize], z: &[Vec<f64>]) -> Result<RankerWeights> {
    if x.len() != z.len() {
        return invalid(format!("{} categories but {} score rows", x.len(), z.len()));
    }
    if x.len() < 2 {
        return invalid("ranker weights need at least two units");
    }
    let k = z[0].len();
    if k == 0 || z.iter().any(|row| row.len() != k) {
        return invalid("every unit needs one score per ranker");
    }
    let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let correlations: Vec<f64> = (0..k)
        .map(|j| pearson(&xf, &z.iter().map(|row| row[j]).collect::<Vec<_>>()))
        .collect();
    let total: f64 = correlations.iter().map(|r| r.abs()).sum();
    if total <= 0.0 {
        return Ok(RankerWeights { deltas: vec![1.0 / k as f64; k], correlations, degenerate: true });
    }
    let deltas = correlations.iter().map(|r| r.abs() / total).collect();
    Ok(RankerWeights { deltas, correlations, degenerate: false })
}

/// `gamma[i][h]` for every unit and stratum.
pub fn stratum_memberships(sample: &MultiRankerSample, weights: &RankerWeights) -> Result<Vec<Vec<f64>>> {
    if weights.deltas.len() != sample.num_rankers() {
        return invalid(format!("{} weights for {} rankers", weights.deltas.len(), sample.num_rankers()));
    }
    Ok(sample
        .ranks()
        .iter()
        .map(|row| {
            let mut g = vec![0.0; sample.set_size()];
            for (&r, &d) in row.iter().zip(&weights.deltas) {
                g[r - 1] += d;
            }
            g
        })
        .collect())
}

/// Weighted in-stratum estimates `ĉ_[h]q,sm` (`result[h][q]`) and stratum masses `sum_i gamma_ih`.
fn weighted_strata(sample: &MultiRankerSample, weights: &RankerWeights) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if sample.is_empty() {
        return invalid("multi-ranker estimators need at least one observation");
    }
    let gamma = stratum_memberships(sample, weights)?;
    let h = sample.set_size();
    let width = sample.num_categories() - 1;
    let mut mass = vec![0.0; h];
    let mut below = vec![vec![0.0; width]; h];
    for (&x, g) in sample.values().iter().zip(&gamma) {
        for s in 0..h {
            mass[s] += g[s];
            for b in &mut below[s][x - 1..] {
                *b += g[s];
            }
        }
    }
    for (row, &m) in below.iter_mut().zip(&mass) {
        if m > 0.0 {
            row.iter_mut().for_each(|v| *v /= m);
        }
    }
    if mass.iter().all(|m| *m <= 0.0) {
        return invalid("every stratum has zero weight");
    }
    Ok((below, mass))
}

/// Multi-ranker standard estimator; strata with zero mass are left out of the average.
pub fn estimate_sm(sample: &MultiRankerSample, weights: &RankerWeights) -> Result<EstimateResult> {
    let (strata, mass) = weighted_strata(sample, weights)?;
    let width = sample.num_categories() - 1;
    let kept: Vec<&Vec<f64>> = strata.iter().zip(&mass).filter(|(_, m)| **m > 0.0).map(|(s, _)| s).collect();
    let c = (0..width).map(|q| kept.iter().map(|s| s[q]).sum::<f64>() / kept.len() as f64).collect();
    Ok(EstimateResult::from_cumulative(Method::Sm, c))
}

/// Isotonized multi-ranker estimator with PAVA weights `K * sum_i gamma_ih`.
///
/// Zero-mass strata are imputed from the left and from the right, and the
/// two results averaged, as for the combined single-ranker estimator.
pub fn estimate_sm_star(sample: &MultiRankerSample, weights: &RankerWeights) -> Result<EstimateResult> {
    let (strata, mass) = weighted_strata(sample, weights)?;
    let k = sample.num_rankers() as f64;
    let pava_weights: Vec<f64> = mass.iter().map(|m| k * m).collect();
    let h = sample.set_size();
    let width = sample.num_categories() - 1;
    let c = (0..width)
        .map(|q| {
            let column: Vec<f64> = strata.iter().map(|s| s[q]).collect();
            let left = isotonize_with_gaps(&column, &pava_weights, ImputeSide::Left).expect("some mass");
            let right = isotonize_with_gaps(&column, &pava_weights, ImputeSide::Right).expect("some mass");
            left.iter().zip(&right).map(|(a, b)| 0.5 * (a + b)).sum::<f64>() / h as f64
        })
        .collect();
    Ok(EstimateResult::from_cumulative(Method::SmStar, c))
}

/// Rank of a measured unit among fresh units under a fitted OLR model:
/// the larger `beta' z`, the smaller the rank. Ties are broken at random.
pub fn rank_by_model<R: Rng + ?Sized>(model: &OlrModel, own: &[f64], comparison: &[Vec<f64>], rng: &mut R) -> usize {
    let own_score = -model.linear_predictor(own);
    judgment_rank(own_score, comparison.iter().map(|z| -model.linear_predictor(z)), rng)
}

/// OLR-ranked JPS estimator.
///
/// Trains the model on the measured units `(x, z)`, re-ranks each measured
/// unit against `H - 1` fresh units from `source`, and applies the
/// standard JPS estimator to the new ranks. The fit outcome is reported in
/// `fit` (`converged` is false on non-convergence or separation).
pub fn estimate_reg<S: UnitSource, R: Rng + ?Sized>(
    x: &[usize],
    z: &[Vec<f64>],
    source: &S,
    set_size: usize,
    opts: &OlrOptions,
    rng: &mut R,
) -> Result<EstimateResult> {
    if set_size == 0 {
        return invalid("set size must be positive");
    }
    let q = source.num_categories();
    let k = source.num_rankers();
    if z.iter().any(|row| row.len() != k) {
        return invalid(format!("score rows must have {k} entries to match the source"));
    }
    let model = fit_olr(x, z, q, opts)?;
    let mut comparison = vec![vec![0.0; k]; set_size - 1];
    let ranks: Vec<usize> = z
        .iter()
        .map(|own| {
            for unit in comparison.iter_mut() {
                source.draw_unit(rng, unit);
            }
            rank_by_model(&model, own, &comparison, rng)
        })
        .collect();
    let sample = JpsSample::new(x.to_vec(), ranks, set_size, q)?;
    let st = estimate_standard_jps(&sample)?;
    let fit = FitReport {
        iterations: model.iterations,
        converged: model.converged && !model.separated,
        start_objective: model.initial_log_likelihood,
        final_objective: model.log_likelihood,
    };
    Ok(EstimateResult { method: Method::Reg, fit: Some(fit), ..st })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{draw_jps_multi, seeded_rng, ModelSource, RankerSpec};
    use crate::types::OrdinalDistribution;

    fn multi(values: &[usize], ranks: &[[usize; 2]], h: usize, q: usize) -> MultiRankerSample {
        MultiRankerSample::new(
            values.to_vec(),
            ranks.iter().map(|r| r.to_vec()).collect(),
            vec![vec![0.0, 0.0]; values.len()],
            vec!["a".into(), "b".into()],
            h,
            q,
        )
        .unwrap()
    }

    #[test]
    fn weights_from_correlations() {
        let x = [1, 2, 3, 1, 2, 3];
        let z: Vec<Vec<f64>> = x.iter().map(|&v| vec![v as f64]).collect();
        let w = ranker_weights(&x, &z).unwrap();
        assert_eq!(w.deltas, vec![1.0]);
        assert!((w.correlations[0] - 1.0).abs() < 1e-15);

        let w = RankerWeights::from_deltas(vec![0.9, 0.3]).unwrap();
        assert!((w.deltas[0] - 0.75).abs() < 1e-15 && (w.deltas[1] - 0.25).abs() < 1e-15);

        let flat: Vec<Vec<f64>> = vec![vec![1.0, 2.0]; 6];
        let w = ranker_weights(&x, &flat).unwrap();
        assert!(w.degenerate);
        assert_eq!(w.deltas, vec![0.5, 0.5]);
    }

    #[test]
    fn weights_from_mixed_correlations() {
        // Column 2 is an exact negative copy of column 1; both get the same weight.
        let x = [1, 2, 3, 2];
        let z: Vec<Vec<f64>> = x.iter().map(|&v| vec![v as f64, -(v as f64)]).collect();
        let w = ranker_weights(&x, &z).unwrap();
        assert!((w.deltas[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sm_hand_trace() {
        let s = multi(&[1, 2], &[[1, 2], [2, 2]], 2, 2);
        let w = RankerWeights::from_deltas(vec![0.75, 0.25]).unwrap();
        let gamma = stratum_memberships(&s, &w).unwrap();
        assert_eq!(gamma, vec![vec![0.75, 0.25], vec![0.0, 1.0]]);
        let r = estimate_sm(&s, &w).unwrap();
        assert!((r.cumulative[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn sm_with_agreeing_rankers_is_standard_jps() {
        let s = multi(&[1, 2, 2, 3, 1], &[[1, 1], [2, 2], [1, 1], [2, 2], [3, 3]], 3, 3);
        let st = estimate_standard_jps(&s.ranker(0)).unwrap();
        for d in [vec![0.5, 0.5], vec![0.9, 0.1]] {
            let w = RankerWeights::from_deltas(d).unwrap();
            let sm = estimate_sm(&s, &w).unwrap();
            for (a, b) in sm.cumulative.iter().zip(&st.cumulative) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sm_star_on_monotone_and_violating_input() {
        let d = OrdinalDistribution::new(vec![0.3, 0.4, 0.3]).unwrap();
        let rankers = [RankerSpec::concomitant(0.9).unwrap(), RankerSpec::concomitant(0.6).unwrap()];
        let s = draw_jps_multi(&d, 40, 3, &rankers, 9).unwrap();
        let w = ranker_weights(s.values(), s.concomitants()).unwrap();
        let gamma = stratum_memberships(&s, &w).unwrap();
        let total: f64 = gamma.iter().flatten().sum::<f64>() * 2.0;
        assert!((total - 2.0 * 40.0).abs() < 1e-9);

        // Single stratum pair violating the order: (1 -> 2nd) pooled with weights.
        let v = multi(&[2, 1], &[[1, 1], [2, 2]], 2, 2);
        let w = RankerWeights::uniform(2);
        let sm = estimate_sm(&v, &w).unwrap();
        let star = estimate_sm_star(&v, &w).unwrap();
        assert!((sm.cumulative[0] - 0.5).abs() < 1e-15);
        // strata (0, 1) with equal mass pool to 0.5 each.
        assert!((star.cumulative[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reg_with_singleton_sets_is_srs() {
        let d = OrdinalDistribution::new(vec![0.3, 0.4, 0.3]).unwrap();
        let source = ModelSource::new(d.clone(), vec![RankerSpec::concomitant(0.8).unwrap()]).unwrap();
        let s = draw_jps_multi(&d, 50, 1, source.rankers(), 3).unwrap();
        let mut rng = seeded_rng(1);
        let r = estimate_reg(s.values(), s.concomitants(), &source, 1, &OlrOptions::default(), &mut rng).unwrap();
        let srs = crate::estimators::estimate_srs(s.values(), 3).unwrap();
        assert_eq!(r.cumulative, srs.cumulative);
        assert_eq!(r.method, Method::Reg);
    }

    #[test]
    fn model_ranking_is_scale_invariant() {
        let model = OlrModel {
            intercepts: vec![-0.5, 0.7],
            slopes: vec![-1.3, 0.4],
            iterations: 0,
            converged: true,
            separated: false,
            gradient_norm: 0.0,
            initial_log_likelihood: 0.0,
            log_likelihood: 0.0,
        };
        let scaled = OlrModel { slopes: vec![-1.3 / 4.0, 0.4 / 0.5], ..model.clone() };
        let mut rng = seeded_rng(2);
        let d = OrdinalDistribution::new(vec![0.3, 0.4, 0.3]).unwrap();
        let rankers = [RankerSpec::concomitant(0.9).unwrap(), RankerSpec::concomitant(0.5).unwrap()];
        let s = draw_jps_multi(&d, 200, 1, &rankers, 1).unwrap();
        let rescale = |z: &Vec<f64>| vec![z[0] * 4.0, z[1] * 0.5];
        for chunk in s.concomitants().chunks(5) {
            let own = &chunk[0];
            let rest = chunk[1..].to_vec();
            let rest_scaled: Vec<Vec<f64>> = rest.iter().map(rescale).collect();
            let a = rank_by_model(&model, own, &rest, &mut rng);
            let b = rank_by_model(&scaled, &rescale(own), &rest_scaled, &mut rng);
            assert_eq!(a, b);
        }
    }
}
