//! Single-ranker estimators of an ordinal population from JPS data.

mod isotonic;
mod ml;

pub use isotonic::{
    estimate_iso_combined, estimate_iso_drop_empty, estimate_iso_maxmin, estimate_iso_minmax, estimate_iso_no_empty,
    isotonize_with_gaps, ImputeSide,
};
pub use ml::{estimate_ml, log_likelihood, project_ordered, JpsLikelihood, MlOptions};

use crate::error::{invalid, Result};
use crate::types::{EstimateResult, JpsSample, Method, StratumCounts};

/// `ĉ_q = Y_q / n` with `Y_q` the number of values at or below `q`.
pub fn estimate_srs(values: &[usize], num_categories: usize) -> Result<EstimateResult> {
    if values.is_empty() {
        return invalid("SRS estimator needs at least one value");
    }
    if num_categories == 0 {
        return invalid("number of categories must be positive");
    }
    let mut counts = vec![0usize; num_categories];
    for &v in values {
        if v == 0 || v > num_categories {
            return invalid(format!("value {v} outside 1..={num_categories}"));
        }
        counts[v - 1] += 1;
    }
    let n = values.len() as f64;
    let mut acc = 0;
    let cumulative = counts[..num_categories - 1]
        .iter()
        .map(|c| {
            acc += c;
            acc as f64 / n
        })
        .collect();
    Ok(EstimateResult::from_cumulative(Method::Srs, cumulative))
}

/// Per-stratum cumulative tallies `Y_[h]q` and stratum sizes `n_h`.
pub fn tabulate(sample: &JpsSample) -> StratumCounts {
    let h = sample.set_size();
    let q = sample.num_categories();
    let mut cells = vec![vec![0usize; q]; h];
    for (&x, &r) in sample.values().iter().zip(sample.ranks()) {
        cells[r - 1][x - 1] += 1;
    }
    let stratum_sizes = cells.iter().map(|row| row.iter().sum()).collect();
    for row in cells.iter_mut() {
        for j in 1..q {
            row[j] += row[j - 1];
        }
    }
    let total_cumulative = (0..q).map(|j| cells.iter().map(|row| row[j]).sum()).collect();
    StratumCounts { cumulative_counts: cells, stratum_sizes, total_cumulative }
}

/// In-stratum estimates `ĉ_[h]q,st = Y_[h]q / n_h` for `q < Q`; `None` for empty strata.
pub(crate) fn in_stratum_estimates(counts: &StratumCounts) -> Vec<Option<Vec<f64>>> {
    counts
        .cumulative_counts
        .iter()
        .zip(&counts.stratum_sizes)
        .map(|(row, &n_h)| {
            (n_h > 0).then(|| row[..row.len() - 1].iter().map(|&y| y as f64 / n_h as f64).collect())
        })
        .collect()
}

/// Averages in-stratum cumulative estimates over the non-empty strata.
pub fn estimate_standard_jps(sample: &JpsSample) -> Result<EstimateResult> {
    if sample.is_empty() {
        return invalid("standard JPS estimator needs at least one observation");
    }
    let counts = tabulate(sample);
    Ok(EstimateResult::from_cumulative(Method::St, average_present(&in_stratum_estimates(&counts))))
}

fn average_present(strata: &[Option<Vec<f64>>]) -> Vec<f64> {
    let present: Vec<&Vec<f64>> = strata.iter().flatten().collect();
    let width = present[0].len();
    (0..width)
        .map(|q| present.iter().map(|v| v[q]).sum::<f64>() / present.len() as f64)
        .collect()
}
