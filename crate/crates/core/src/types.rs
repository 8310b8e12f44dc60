//! Domain types shared by every estimator.
//!
//! Category and rank indices are 1-based everywhere they cross a public
//! boundary (`values`, `ranks`, CSV files, the C ABI). Vectors indexed by
//! category or stratum are 0-based, so category `q` lives at `[q - 1]`.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, JpsError, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// Population law of an ordinal variable with `Q` categories.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalDistribution {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl OrdinalDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return invalid("distribution needs at least one category");
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return invalid(format!("category probabilities must be strictly positive, got {p}"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return invalid(format!("category probabilities sum to {total}, expected 1"));
        }
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        *cumulative.last_mut().unwrap() = 1.0;
        if cumulative.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("cumulative probabilities are not strictly increasing");
        }
        Ok(Self { probs, cumulative })
    }

    /// Builds the law from `c_1 .. c_{Q-1}`; `c_Q = 1` is implied.
    pub fn from_cumulative(cumulative: &[f64]) -> Result<Self> {
        let mut probs = Vec::with_capacity(cumulative.len() + 1);
        let mut prev = 0.0;
        for &c in cumulative {
            probs.push(c - prev);
            prev = c;
        }
        probs.push(1.0 - prev);
        Self::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `c_1 .. c_Q`, with `c_Q` exactly 1.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn num_categories(&self) -> usize {
        self.probs.len()
    }

    /// Mean of the 1-based category index.
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }

    /// Standard deviation of the 1-based category index.
    pub fn std_dev(&self) -> f64 {
        let mean = self.mean();
        let var: f64 = self
            .probs
            .iter()
            .enumerate()
            .map(|(i, p)| p * ((i + 1) as f64 - mean).powi(2))
            .sum();
        var.max(0.0).sqrt()
    }
}

/// Stratum sizes `n_h` of a rank vector, ranks being 1-based.
pub(crate) fn stratum_sizes(ranks: &[usize], set_size: usize) -> Vec<usize> {
    let mut sizes = vec![0; set_size];
    for &r in ranks {
        sizes[r - 1] += 1;
    }
    sizes
}

fn check_values(values: &[usize], num_categories: usize) -> Result<()> {
    if num_categories == 0 {
        return invalid("number of categories must be positive");
    }
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| **v == 0 || **v > num_categories) {
        return invalid(format!("value {v} at position {} outside 1..={num_categories}", i + 1));
    }
    Ok(())
}

fn check_ranks(ranks: &[usize], set_size: usize) -> Result<()> {
    if let Some((i, r)) = ranks.iter().enumerate().find(|(_, r)| **r == 0 || **r > set_size) {
        return invalid(format!("rank {r} at position {} outside 1..={set_size}", i + 1));
    }
    Ok(())
}

/// Single-ranker judgment post-stratified sample: measured categories with
/// the judgment rank each unit received inside its comparison set.
#[derive(Debug, Clone, PartialEq)]
pub struct JpsSample {
    values: Vec<usize>,
    ranks: Vec<usize>,
    set_size: usize,
    num_categories: usize,
}

impl JpsSample {
    pub fn new(values: Vec<usize>, ranks: Vec<usize>, set_size: usize, num_categories: usize) -> Result<Self> {
        if values.len() != ranks.len() {
            return invalid(format!("{} values but {} ranks", values.len(), ranks.len()));
        }
        if set_size == 0 {
            return invalid("set size must be positive");
        }
        check_values(&values, num_categories)?;
        check_ranks(&ranks, set_size)?;
        Ok(Self { values, ranks, set_size, num_categories })
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn set_size(&self) -> usize {
        self.set_size
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn stratum_sizes(&self) -> Vec<usize> {
        stratum_sizes(&self.ranks, self.set_size)
    }

    /// 1-based indices of strata with no observations.
    pub fn empty_strata(&self) -> Vec<usize> {
        self.stratum_sizes()
            .iter()
            .enumerate()
            .filter(|(_, n)| **n == 0)
            .map(|(h, _)| h + 1)
            .collect()
    }
}

/// Sample ranked independently by `K` rankers over shared comparison sets.
///
/// `concomitants[i][k]` is the ranking score ranker `k` observed on
/// measured unit `i`; it feeds ranker weights and the OLR ranking rule.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiRankerSample {
    values: Vec<usize>,
    ranks: Vec<Vec<usize>>,
    concomitants: Vec<Vec<f64>>,
    labels: Vec<String>,
    set_size: usize,
    num_categories: usize,
}

impl MultiRankerSample {
    pub fn new(
        values: Vec<usize>,
        ranks: Vec<Vec<usize>>,
        concomitants: Vec<Vec<f64>>,
        labels: Vec<String>,
        set_size: usize,
        num_categories: usize,
    ) -> Result<Self> {
        let n = values.len();
        if ranks.len() != n || concomitants.len() != n {
            return invalid("values, ranks and concomitants must have one row per unit");
        }
        let k = labels.len();
        if k == 0 {
            return invalid("at least one ranker is required");
        }
        if ranks.iter().any(|r| r.len() != k) || concomitants.iter().any(|z| z.len() != k) {
            return invalid(format!("every unit must carry exactly {k} ranks and scores"));
        }
        if set_size == 0 {
            return invalid("set size must be positive");
        }
        check_values(&values, num_categories)?;
        for row in &ranks {
            check_ranks(row, set_size)?;
        }
        Ok(Self { values, ranks, concomitants, labels, set_size, num_categories })
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    /// Row `i` holds the K ranks of measured unit `i`.
    pub fn ranks(&self) -> &[Vec<usize>] {
        &self.ranks
    }

    pub fn concomitants(&self) -> &[Vec<f64>] {
        &self.concomitants
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_rankers(&self) -> usize {
        self.labels.len()
    }

    pub fn set_size(&self) -> usize {
        self.set_size
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The single-ranker view through ranker `k` (0-based).
    pub fn ranker(&self, k: usize) -> JpsSample {
        assert!(k < self.num_rankers(), "ranker index {k} out of range");
        JpsSample {
            values: self.values.clone(),
            ranks: self.ranks.iter().map(|r| r[k]).collect(),
            set_size: self.set_size,
            num_categories: self.num_categories,
        }
    }

    /// Strata receiving no unit from any ranker (1-based).
    pub fn empty_strata(&self) -> Vec<usize> {
        let mut hit = vec![false; self.set_size];
        for row in &self.ranks {
            for &r in row {
                hit[r - 1] = true;
            }
        }
        hit.iter().enumerate().filter(|(_, h)| !**h).map(|(h, _)| h + 1).collect()
    }
}

/// Per-stratum cumulative tallies of a [`JpsSample`].
#[derive(Debug, Clone, PartialEq)]
pub struct StratumCounts {
    /// `cumulative_counts[h][q]` = `Y_[h+1](q+1)`, number of rank-(h+1) units in categories `1..=q+1`.
    pub cumulative_counts: Vec<Vec<usize>>,
    pub stratum_sizes: Vec<usize>,
    pub total_cumulative: Vec<usize>,
}

/// Estimator identity attached to every [`EstimateResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Srs,
    St,
    Ml,
    Iso,
    IsoMinus,
    IsoPlus,
    IsoStar,
    Sm,
    SmStar,
    Reg,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Srs,
        Method::St,
        Method::Ml,
        Method::Iso,
        Method::IsoMinus,
        Method::IsoPlus,
        Method::IsoStar,
        Method::Sm,
        Method::SmStar,
        Method::Reg,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Srs => "srs",
            Method::St => "st",
            Method::Ml => "ml",
            Method::Iso => "iso",
            Method::IsoMinus => "iso_minus",
            Method::IsoPlus => "iso_plus",
            Method::IsoStar => "iso_star",
            Method::Sm => "sm",
            Method::SmStar => "sm_star",
            Method::Reg => "reg",
        }
    }

    /// Methods that consume every ranker rather than only the first.
    pub fn is_multi_ranker(&self) -> bool {
        matches!(self, Method::Sm | Method::SmStar | Method::Reg)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = JpsError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| JpsError::InvalidArgument(format!("unknown method `{s}`")))
    }
}

/// Outcome of an iterative fit, reported alongside ML estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub iterations: usize,
    pub converged: bool,
    pub start_objective: f64,
    pub final_objective: f64,
}

/// Estimated cumulative probabilities `ĉ_1..ĉ_{Q-1}` and proportions `p̂_1..p̂_Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub method: Method,
    pub cumulative: Vec<f64>,
    pub proportions: Vec<f64>,
    pub fit: Option<FitReport>,
}

impl EstimateResult {
    /// Differencing with `ĉ_0 = 0`, `ĉ_Q = 1`.
    ///
    /// The input is clamped into `[0, 1]` and made non-decreasing by a
    /// running maximum; callers only hand in vectors that already satisfy
    /// this up to rounding.
    pub fn from_cumulative(method: Method, cumulative: Vec<f64>) -> Self {
        let mut c = cumulative;
        let mut floor = 0.0_f64;
        for v in c.iter_mut() {
            debug_assert!(*v >= floor - 1e-9, "cumulative estimate decreases: {v} < {floor}");
            *v = v.clamp(floor, 1.0);
            floor = *v;
        }
        let mut proportions = Vec::with_capacity(c.len() + 1);
        let mut prev = 0.0;
        for &v in &c {
            proportions.push(v - prev);
            prev = v;
        }
        proportions.push(1.0 - prev);
        Self { method, cumulative: c, proportions, fit: None }
    }

    pub(crate) fn with_fit(mut self, fit: FitReport) -> Self {
        self.fit = Some(fit);
        self
    }
}
