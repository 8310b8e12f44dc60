//! Isotonized estimators.
//!
//! In-stratum cumulative estimates should satisfy `c_[1]q >= c_[2]q >= ... >= c_[H]q`.
//! For each `q` the non-empty strata are projected onto that cone by weighted
//! PAVA (weights `n_h`). Empty strata then either drop out, or take the
//! pooled value of the nearest non-empty stratum to the left (MinMax) or to
//! the right (MaxMin). A stratum with no non-empty neighbour on its side
//! borrows from the other side.

use super::{in_stratum_estimates, tabulate};
use crate::error::{invalid, JpsError, Result};
use crate::kernel::pava_unchecked;
use crate::types::{EstimateResult, JpsSample, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImputeSide {
    /// MinMax: nearest non-empty stratum with a smaller rank.
    Left,
    /// MaxMin: nearest non-empty stratum with a larger rank.
    Right,
}

/// PAVA over the strata with positive weight, then imputation of the
/// zero-weight strata from `side`.
///
/// `values[h]` is ignored when `weights[h] == 0`. Returns `None` if every
/// weight is zero.
pub fn isotonize_with_gaps(values: &[f64], weights: &[f64], side: ImputeSide) -> Option<Vec<f64>> {
    let kept: Vec<usize> = (0..values.len()).filter(|&h| weights[h] > 0.0).collect();
    if kept.is_empty() {
        return None;
    }
    let fitted = pava_unchecked(
        &kept.iter().map(|&h| values[h]).collect::<Vec<_>>(),
        &kept.iter().map(|&h| weights[h]).collect::<Vec<_>>(),
    );
    let mut pooled: Vec<Option<f64>> = vec![None; values.len()];
    for (&h, &v) in kept.iter().zip(&fitted) {
        pooled[h] = Some(v);
    }
    Some(impute(&pooled, side))
}

fn impute(pooled: &[Option<f64>], side: ImputeSide) -> Vec<f64> {
    let nearest_left = |h: usize| pooled[..h].iter().rev().flatten().next().copied();
    let nearest_right = |h: usize| pooled[h + 1..].iter().flatten().next().copied();
    (0..pooled.len())
        .map(|h| {
            pooled[h].unwrap_or_else(|| {
                let (first, second) = match side {
                    ImputeSide::Left => (nearest_left(h), nearest_right(h)),
                    ImputeSide::Right => (nearest_right(h), nearest_left(h)),
                };
                first.or(second).expect("at least one stratum is non-empty")
            })
        })
        .collect()
}

/// Per-`q` isotonized stratum values, `result[h][q]`, over all `H` strata.
fn isotonized_strata(sample: &JpsSample, side: ImputeSide) -> Result<Vec<Vec<f64>>> {
    if sample.is_empty() {
        return invalid("isotonized estimators need at least one observation");
    }
    let counts = tabulate(sample);
    let estimates = in_stratum_estimates(&counts);
    let weights: Vec<f64> = counts.stratum_sizes.iter().map(|&n| n as f64).collect();
    let h = sample.set_size();
    let width = sample.num_categories() - 1;
    let mut strata = vec![vec![0.0; width]; h];
    for q in 0..width {
        let column: Vec<f64> = estimates.iter().map(|e| e.as_ref().map_or(0.0, |v| v[q])).collect();
        let fitted = isotonize_with_gaps(&column, &weights, side).expect("sample is non-empty");
        for (row, v) in strata.iter_mut().zip(fitted) {
            row[q] = v;
        }
    }
    Ok(strata)
}

fn average_rows<'a>(rows: impl Iterator<Item = &'a Vec<f64>>, width: usize) -> Vec<f64> {
    let mut acc = vec![0.0; width];
    let mut count = 0usize;
    for row in rows {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
        count += 1;
    }
    acc.iter().map(|a| a / count as f64).collect()
}

/// Isotonized estimator for samples where every stratum is occupied.
pub fn estimate_iso_no_empty(sample: &JpsSample) -> Result<EstimateResult> {
    if let Some(&stratum) = sample.empty_strata().first() {
        return Err(JpsError::EmptyStratum { stratum });
    }
    let strata = isotonized_strata(sample, ImputeSide::Left)?;
    let width = sample.num_categories() - 1;
    Ok(EstimateResult::from_cumulative(Method::Iso, average_rows(strata.iter(), width)))
}

/// Isotonized estimator that ignores empty strata.
pub fn estimate_iso_drop_empty(sample: &JpsSample) -> Result<EstimateResult> {
    let strata = isotonized_strata(sample, ImputeSide::Left)?;
    let sizes = sample.stratum_sizes();
    let width = sample.num_categories() - 1;
    let kept = strata.iter().zip(&sizes).filter(|(_, n)| **n > 0).map(|(row, _)| row);
    Ok(EstimateResult::from_cumulative(Method::Iso, average_rows(kept, width)))
}

/// MinMax estimator: empty strata imputed from the left.
pub fn estimate_iso_minmax(sample: &JpsSample) -> Result<EstimateResult> {
    let strata = isotonized_strata(sample, ImputeSide::Left)?;
    let width = sample.num_categories() - 1;
    Ok(EstimateResult::from_cumulative(Method::IsoMinus, average_rows(strata.iter(), width)))
}

/// MaxMin estimator: empty strata imputed from the right.
pub fn estimate_iso_maxmin(sample: &JpsSample) -> Result<EstimateResult> {
    let strata = isotonized_strata(sample, ImputeSide::Right)?;
    let width = sample.num_categories() - 1;
    Ok(EstimateResult::from_cumulative(Method::IsoPlus, average_rows(strata.iter(), width)))
}

/// Midpoint of the MinMax and MaxMin estimators.
pub fn estimate_iso_combined(sample: &JpsSample) -> Result<EstimateResult> {
    let minus = estimate_iso_minmax(sample)?;
    let plus = estimate_iso_maxmin(sample)?;
    let c = minus.cumulative.iter().zip(&plus.cumulative).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(EstimateResult::from_cumulative(Method::IsoStar, c))
}
