//! SRS and JPS sample generation.
//!
//! A [`UnitSource`] yields one population unit at a time: its category and
//! the score each ranker would see on it. [`JpsDesign`] turns a source into
//! JPS observations by drawing `H - 1` fresh comparison units per measured
//! unit and ranking the measured unit among them, separately for each ranker.
//! Ties in ranking scores are broken uniformly at random, which keeps every
//! rank marginally uniform on `1..=H` even for discrete scores.
//!
//! Randomness is a single ChaCha8 stream per seed. Replication `i` of a run
//! with master seed `s` uses the stream `(s, i)` (see [`replication_rng`]),
//! so results never depend on which worker executes which replication.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, JpsError, Result};
use crate::types::{stratum_sizes, JpsSample, MultiRankerSample, OrdinalDistribution};

pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for replication `index` under `master_seed`: the ChaCha8 key is
/// derived from `master_seed`, and `index` selects the stream.
pub fn replication_rng(master_seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// SplitMix64 of `master + (index + 1) * golden`; used to hand independent
/// master seeds to the scenarios of a grid.
pub fn child_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankerSpec {
    /// Ranks by the category itself.
    Perfect,
    /// Ranks by `Z = rho (X - E[X]) / SD(X) + eps sqrt(1 - rho^2)`.
    Concomitant { rho: f64 },
}

impl RankerSpec {
    pub fn concomitant(rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho.abs() <= 1.0) {
            return invalid(format!("ranker correlation {rho} outside [-1, 1]"));
        }
        Ok(RankerSpec::Concomitant { rho })
    }

    pub fn label(&self) -> String {
        match self {
            RankerSpec::Perfect => "perfect".to_string(),
            RankerSpec::Concomitant { rho } => format!("{rho}"),
        }
    }
}

/// A population that can be sampled one unit at a time.
pub trait UnitSource: Sync {
    fn num_categories(&self) -> usize;

    fn num_rankers(&self) -> usize;

    fn labels(&self) -> Vec<String>;

    /// True category proportions, used as the estimation target.
    fn target_proportions(&self) -> Vec<f64>;

    fn draw_value<R: Rng + ?Sized>(&self, rng: &mut R) -> usize;

    /// Draws a unit, writing one score per ranker into `scores`.
    fn draw_unit<R: Rng + ?Sized>(&self, rng: &mut R, scores: &mut [f64]) -> usize;
}

impl<S: UnitSource> UnitSource for &S {
    fn num_categories(&self) -> usize {
        (**self).num_categories()
    }

    fn num_rankers(&self) -> usize {
        (**self).num_rankers()
    }

    fn labels(&self) -> Vec<String> {
        (**self).labels()
    }

    fn target_proportions(&self) -> Vec<f64> {
        (**self).target_proportions()
    }

    fn draw_value<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        (**self).draw_value(rng)
    }

    fn draw_unit<R: Rng + ?Sized>(&self, rng: &mut R, scores: &mut [f64]) -> usize {
        (**self).draw_unit(rng, scores)
    }
}

fn draw_category<R: Rng + ?Sized>(dist: &OrdinalDistribution, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let c = dist.cumulative();
    c.iter().position(|&cq| u < cq).unwrap_or(c.len() - 1) + 1
}

#[inline]
fn concomitant_score<R: Rng + ?Sized>(x: usize, mean: f64, sd: f64, rho: f64, rng: &mut R) -> f64 {
    let eps: f64 = rng.sample(StandardNormal);
    rho * (x as f64 - mean) / sd + eps * (1.0 - rho * rho).max(0.0).sqrt()
}

/// One concomitant score for a unit of category `x`. Moments are those of
/// the category index under `dist`.
pub fn gen_concomitant<R: Rng + ?Sized>(x: usize, dist: &OrdinalDistribution, rho: f64, rng: &mut R) -> Result<f64> {
    RankerSpec::concomitant(rho)?;
    let sd = dist.std_dev();
    if sd <= 0.0 {
        return Err(JpsError::ZeroVariance);
    }
    Ok(concomitant_score(x, dist.mean(), sd, rho, rng))
}

/// Infinite population described by an ordinal law and simulated rankers.
#[derive(Debug, Clone)]
pub struct ModelSource {
    dist: OrdinalDistribution,
    rankers: Vec<RankerSpec>,
    mean: f64,
    sd: f64,
}

impl ModelSource {
    pub fn new(dist: OrdinalDistribution, rankers: Vec<RankerSpec>) -> Result<Self> {
        if rankers.is_empty() {
            return invalid("at least one ranker is required");
        }
        for r in &rankers {
            if let RankerSpec::Concomitant { rho } = r {
                RankerSpec::concomitant(*rho)?;
            }
        }
        let sd = dist.std_dev();
        if sd <= 0.0 && rankers.iter().any(|r| matches!(r, RankerSpec::Concomitant { .. })) {
            return Err(JpsError::ZeroVariance);
        }
        let mean = dist.mean();
        Ok(Self { dist, rankers, mean, sd })
    }

    pub fn dist(&self) -> &OrdinalDistribution {
        &self.dist
    }

    pub fn rankers(&self) -> &[RankerSpec] {
        &self.rankers
    }
}

impl UnitSource for ModelSource {
    fn num_categories(&self) -> usize {
        self.dist.num_categories()
    }

    fn num_rankers(&self) -> usize {
        self.rankers.len()
    }

    fn labels(&self) -> Vec<String> {
        self.rankers.iter().map(RankerSpec::label).collect()
    }

    fn target_proportions(&self) -> Vec<f64> {
        self.dist.probs().to_vec()
    }

    fn draw_value<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        draw_category(&self.dist, rng)
    }

    fn draw_unit<R: Rng + ?Sized>(&self, rng: &mut R, scores: &mut [f64]) -> usize {
        let x = draw_category(&self.dist, rng);
        for (s, r) in scores.iter_mut().zip(&self.rankers) {
            *s = match r {
                RankerSpec::Perfect => x as f64,
                RankerSpec::Concomitant { rho } => concomitant_score(x, self.mean, self.sd, *rho, rng),
            };
        }
        x
    }
}

/// One record of a finite population: category plus ranking variables.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationUnit {
    pub x: usize,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinitePopulation {
    rows: Vec<PopulationUnit>,
    num_categories: usize,
}

impl FinitePopulation {
    pub fn new(rows: Vec<PopulationUnit>, num_categories: usize) -> Result<Self> {
        if rows.is_empty() {
            return invalid("population is empty");
        }
        if num_categories == 0 {
            return invalid("number of categories must be positive");
        }
        let k = rows[0].z.len();
        for (i, row) in rows.iter().enumerate() {
            if row.x == 0 || row.x > num_categories {
                return invalid(format!("row {}: category {} outside 1..={num_categories}", i + 1, row.x));
            }
            if row.z.len() != k {
                return invalid(format!("row {}: {} ranking values, expected {k}", i + 1, row.z.len()));
            }
        }
        Ok(Self { rows, num_categories })
    }

    pub fn rows(&self) -> &[PopulationUnit] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    pub fn num_ranking_columns(&self) -> usize {
        self.rows[0].z.len()
    }

    pub fn proportions(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.num_categories];
        for r in &self.rows {
            counts[r.x - 1] += 1;
        }
        counts.iter().map(|&c| c as f64 / self.rows.len() as f64).collect()
    }

    /// Pearson correlation of each ranking column with the category index.
    pub fn ranker_correlations(&self) -> Vec<f64> {
        let x: Vec<f64> = self.rows.iter().map(|r| r.x as f64).collect();
        (0..self.num_ranking_columns())
            .map(|k| {
                let z: Vec<f64> = self.rows.iter().map(|r| r.z[k]).collect();
                crate::stats::pearson(&x, &z)
            })
            .collect()
    }
}

/// Bootstrap source: units drawn with replacement from a finite population,
/// ranked on the chosen `z` columns.
#[derive(Debug, Clone)]
pub struct FiniteSource {
    pop: Arc<FinitePopulation>,
    columns: Vec<usize>,
    labels: Vec<String>,
}

impl FiniteSource {
    pub fn new(pop: Arc<FinitePopulation>, columns: Vec<usize>) -> Result<Self> {
        if columns.is_empty() {
            return invalid("at least one ranking column is required");
        }
        let k = pop.num_ranking_columns();
        if let Some(c) = columns.iter().find(|c| **c >= k) {
            return invalid(format!("ranking column {c} out of range (population has {k})"));
        }
        let labels = columns.iter().map(|c| format!("z{}", c + 1)).collect();
        Ok(Self { pop, columns, labels })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.columns.len());
        self.labels = labels;
        self
    }

    pub fn population(&self) -> &FinitePopulation {
        &self.pop
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }
}

impl UnitSource for FiniteSource {
    fn num_categories(&self) -> usize {
        self.pop.num_categories
    }

    fn num_rankers(&self) -> usize {
        self.columns.len()
    }

    fn labels(&self) -> Vec<String> {
        self.labels.clone()
    }

    fn target_proportions(&self) -> Vec<f64> {
        self.pop.proportions()
    }

    fn draw_value<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.pop.rows[rng.random_range(0..self.pop.rows.len())].x
    }

    fn draw_unit<R: Rng + ?Sized>(&self, rng: &mut R, scores: &mut [f64]) -> usize {
        let row = &self.pop.rows[rng.random_range(0..self.pop.rows.len())];
        for (s, &c) in scores.iter_mut().zip(&self.columns) {
            *s = row.z[c];
        }
        row.x
    }
}

/// Rank of `own` among `own` and `others` (ascending, 1-based), ties
/// resolved by placing `own` uniformly among its equals.
pub fn judgment_rank<R: Rng + ?Sized>(own: f64, others: impl IntoIterator<Item = f64>, rng: &mut R) -> usize {
    let mut below = 0;
    let mut ties = 0;
    for s in others {
        if s < own {
            below += 1;
        } else if s == own {
            ties += 1;
        }
    }
    let offset = if ties > 0 { rng.random_range(0..=ties) } else { 0 };
    1 + below + offset
}

/// A measured unit and its judgment ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct JpsUnit {
    pub value: usize,
    pub ranks: Vec<usize>,
    pub scores: Vec<f64>,
}

/// JPS data collection: set size plus a population to draw sets from.
#[derive(Debug, Clone)]
pub struct JpsDesign<S> {
    pub source: S,
    pub set_size: usize,
}

impl<S: UnitSource> JpsDesign<S> {
    pub fn new(source: S, set_size: usize) -> Result<Self> {
        if set_size == 0 {
            return invalid("set size must be positive");
        }
        Ok(Self { source, set_size })
    }

    /// One measured unit ranked inside a fresh comparison set of `H - 1` units.
    pub fn draw_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> JpsUnit {
        let k = self.source.num_rankers();
        let mut scores = vec![0.0; k];
        let value = self.source.draw_unit(rng, &mut scores);
        let mut comparison = vec![0.0; k * (self.set_size - 1)];
        for unit in comparison.chunks_mut(k) {
            self.source.draw_unit(rng, unit);
        }
        let ranks = (0..k)
            .map(|j| judgment_rank(scores[j], comparison.chunks(k).map(|u| u[j]), rng))
            .collect();
        JpsUnit { value, ranks, scores }
    }

    pub fn draw_sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> MultiRankerSample {
        let units: Vec<JpsUnit> = (0..n).map(|_| self.draw_unit(rng)).collect();
        self.assemble(units)
    }

    fn assemble(&self, units: Vec<JpsUnit>) -> MultiRankerSample {
        let mut values = Vec::with_capacity(units.len());
        let mut ranks = Vec::with_capacity(units.len());
        let mut scores = Vec::with_capacity(units.len());
        for u in units {
            values.push(u.value);
            ranks.push(u.ranks);
            scores.push(u.scores);
        }
        MultiRankerSample::new(
            values,
            ranks,
            scores,
            self.source.labels(),
            self.set_size,
            self.source.num_categories(),
        )
        .expect("design produces valid samples")
    }
}

/// Draws `n` i.i.d. categories from a source.
pub fn draw_values<S: UnitSource, R: Rng + ?Sized>(source: &S, n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| source.draw_value(rng)).collect()
}

pub fn draw_srs(dist: &OrdinalDistribution, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return invalid("sample size must be positive");
    }
    let mut rng = seeded_rng(seed);
    Ok((0..n).map(|_| draw_category(dist, &mut rng)).collect())
}

pub fn draw_jps(dist: &OrdinalDistribution, n: usize, set_size: usize, ranker: RankerSpec, seed: u64) -> Result<JpsSample> {
    Ok(draw_jps_multi(dist, n, set_size, &[ranker], seed)?.ranker(0))
}

pub fn draw_jps_multi(
    dist: &OrdinalDistribution,
    n: usize,
    set_size: usize,
    rankers: &[RankerSpec],
    seed: u64,
) -> Result<MultiRankerSample> {
    if n == 0 {
        return invalid("sample size must be positive");
    }
    let design = JpsDesign::new(ModelSource::new(dist.clone(), rankers.to_vec())?, set_size)?;
    let mut rng = seeded_rng(seed);
    Ok(design.draw_sample(n, &mut rng))
}

/// Bootstrap JPS sample from a finite population, ranked on `columns`.
pub fn bootstrap_population(
    pop: Arc<FinitePopulation>,
    n: usize,
    set_size: usize,
    columns: &[usize],
    seed: u64,
) -> Result<MultiRankerSample> {
    if n == 0 {
        return invalid("sample size must be positive");
    }
    let design = JpsDesign::new(FiniteSource::new(pop, columns.to_vec())?, set_size)?;
    let mut rng = seeded_rng(seed);
    Ok(design.draw_sample(n, &mut rng))
}

/// Acceptance rule applied to JPS draws. Every scheme requires all `Q`
/// categories to appear among the measured units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Conditioning {
    AllCategoriesPresent,
    NoEmptyStrata,
    AtLeastOneEmptyStratum,
}

impl Conditioning {
    pub fn as_str(&self) -> &'static str {
        match self {
            Conditioning::AllCategoriesPresent => "all_categories_present",
            Conditioning::NoEmptyStrata => "no_empty_strata",
            Conditioning::AtLeastOneEmptyStratum => "at_least_one_empty_stratum",
        }
    }
}

impl std::str::FromStr for Conditioning {
    type Err = JpsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all_categories_present" => Ok(Conditioning::AllCategoriesPresent),
            "no_empty_strata" => Ok(Conditioning::NoEmptyStrata),
            "at_least_one_empty_stratum" => Ok(Conditioning::AtLeastOneEmptyStratum),
            other => invalid(format!("unknown conditioning scheme `{other}`")),
        }
    }
}

impl std::fmt::Display for Conditioning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub(crate) fn all_categories_present(values: &[usize], num_categories: usize) -> bool {
    let mut seen = vec![false; num_categories];
    for &v in values {
        seen[v - 1] = true;
    }
    seen.iter().all(|s| *s)
}

/// SRS of size `n` redrawn until every category appears.
pub fn draw_srs_conditioned<S: UnitSource, R: Rng + ?Sized>(
    source: &S,
    n: usize,
    max_attempts: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    for _ in 0..max_attempts {
        let values = draw_values(source, n, rng);
        if all_categories_present(&values, source.num_categories()) {
            return Ok(values);
        }
    }
    Err(JpsError::ConditioningExhausted { scheme: Conditioning::AllCategoriesPresent.as_str(), attempts: max_attempts })
}

/// Per-unit draw budget while waiting for a unit whose ranks avoid the
/// designated empty strata, as a multiple of the set size.
const UNIT_REJECTION_BUDGET: usize = 10_000;

/// Draws a JPS sample of size `n` satisfying `scheme`.
///
/// `AtLeastOneEmptyStratum` first picks a design: a candidate set `E` of
/// empty strata uniform over the non-empty proper subsets of `1..=H`, kept
/// with probability `1/|E|` (otherwise a new candidate is drawn). The
/// sample must then realize exactly `E` as its empty strata. Since units
/// are i.i.d., requiring all ranks to avoid `E` is done unit by unit; the
/// assembled sample is then kept only if every stratum outside `E` is
/// occupied. The result has the same law as rejecting whole samples.
///
/// `max_attempts` bounds the number of whole-sample draws (and, for the
/// empty-strata scheme, design draws).
pub fn condition_sample<S: UnitSource, R: Rng + ?Sized>(
    design: &JpsDesign<S>,
    n: usize,
    scheme: Conditioning,
    max_attempts: usize,
    rng: &mut R,
) -> Result<MultiRankerSample> {
    if n == 0 {
        return invalid("sample size must be positive");
    }
    if max_attempts == 0 {
        return invalid("max_attempts must be at least 1");
    }
    let q = design.source.num_categories();
    let h = design.set_size;
    let exhausted = || JpsError::ConditioningExhausted { scheme: scheme.as_str(), attempts: max_attempts };

    match scheme {
        Conditioning::AllCategoriesPresent | Conditioning::NoEmptyStrata => {
            for _ in 0..max_attempts {
                let sample = design.draw_sample(n, rng);
                if !all_categories_present(sample.values(), q) {
                    continue;
                }
                if scheme == Conditioning::NoEmptyStrata && !sample.empty_strata().is_empty() {
                    continue;
                }
                return Ok(sample);
            }
            Err(exhausted())
        }
        Conditioning::AtLeastOneEmptyStratum => {
            if h < 2 {
                return invalid("an empty stratum requires set size of at least 2");
            }
            if h > 63 {
                return invalid("empty-stratum designs support set sizes up to 63");
            }
            let design_mask = pick_empty_design(h, max_attempts, rng).ok_or_else(exhausted)?;
            let forbidden: Vec<bool> = (0..h).map(|s| design_mask & (1 << s) != 0).collect();
            for _ in 0..max_attempts {
                let mut units = Vec::with_capacity(n);
                for _ in 0..n {
                    let mut unit = None;
                    for _ in 0..UNIT_REJECTION_BUDGET * h {
                        let u = design.draw_unit(rng);
                        if u.ranks.iter().all(|&r| !forbidden[r - 1]) {
                            unit = Some(u);
                            break;
                        }
                    }
                    units.push(unit.ok_or_else(exhausted)?);
                }
                let sample = design.assemble(units);
                if !all_categories_present(sample.values(), q) {
                    continue;
                }
                let realized: u64 = sample.empty_strata().iter().fold(0, |m, s| m | 1 << (s - 1));
                if realized == design_mask {
                    return Ok(sample);
                }
            }
            Err(exhausted())
        }
    }
}

/// Bitmask of designated empty strata (bit `h-1` for stratum `h`).
fn pick_empty_design<R: Rng + ?Sized>(set_size: usize, max_attempts: usize, rng: &mut R) -> Option<u64> {
    let full = (1u64 << set_size) - 1;
    for _ in 0..max_attempts {
        let mask = rng.random_range(1..full);
        let size = mask.count_ones() as f64;
        if rng.random::<f64>() < 1.0 / size {
            return Some(mask);
        }
    }
    None
}

/// Stratum sizes of one ranker column of a multi-ranker sample.
pub fn ranker_stratum_sizes(sample: &MultiRankerSample, k: usize) -> Vec<usize> {
    let ranks: Vec<usize> = sample.ranks().iter().map(|r| r[k]).collect();
    stratum_sizes(&ranks, sample.set_size())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(p: &[f64]) -> OrdinalDistribution {
        OrdinalDistribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn srs_degenerate_and_deterministic() {
        assert_eq!(draw_srs(&dist(&[1.0]), 5, 3).unwrap(), vec![1; 5]);
        let d = dist(&[0.2, 0.5, 0.3]);
        assert_eq!(draw_srs(&d, 50, 9).unwrap(), draw_srs(&d, 50, 9).unwrap());
        assert_ne!(draw_srs(&d, 50, 9).unwrap(), draw_srs(&d, 50, 10).unwrap());
        assert!(draw_srs(&d, 0, 1).is_err());
    }

    #[test]
    fn srs_law_of_large_numbers() {
        let v = draw_srs(&dist(&[0.5, 0.5]), 100_000, 1).unwrap();
        let share = v.iter().filter(|x| **x == 1).count() as f64 / v.len() as f64;
        assert!((share - 0.5).abs() < 0.01, "{share}");
    }

    #[test]
    fn concomitant_extremes() {
        let d = dist(&[0.3, 0.4, 0.3]);
        let mut rng = seeded_rng(4);
        let z = gen_concomitant(3, &d, 1.0, &mut rng).unwrap();
        assert!((z - 1.0 / 0.6_f64.sqrt()).abs() < 1e-12);
        // rho = 0: identical noise stream, identical output regardless of x.
        let a = gen_concomitant(1, &d, 0.0, &mut seeded_rng(5)).unwrap();
        let b = gen_concomitant(3, &d, 0.0, &mut seeded_rng(5)).unwrap();
        assert_eq!(a, b);
        assert!(gen_concomitant(1, &dist(&[1.0]), 0.5, &mut rng).is_err());
        assert!(gen_concomitant(1, &d, 1.5, &mut rng).is_err());
    }

    #[test]
    fn concomitant_correlation() {
        let d = dist(&[0.3, 0.4, 0.3]);
        let mut rng = seeded_rng(11);
        let xs = draw_srs(&d, 100_000, 12).unwrap();
        let zs: Vec<f64> = xs.iter().map(|&x| gen_concomitant(x, &d, 0.9, &mut rng).unwrap()).collect();
        let xf: Vec<f64> = xs.iter().map(|&x| x as f64).collect();
        let r = crate::stats::pearson(&xf, &zs);
        assert!((r - 0.9).abs() < 0.02, "{r}");
    }

    #[test]
    fn judgment_rank_counts_and_breaks_ties() {
        let mut rng = seeded_rng(1);
        assert_eq!(judgment_rank(2.0, [1.0, 3.0], &mut rng), 2);
        assert_eq!(judgment_rank(0.0, [1.0, 3.0], &mut rng), 1);
        let mut hits = [0usize; 3];
        for _ in 0..30_000 {
            hits[judgment_rank(1.0, [1.0, 1.0], &mut rng) - 1] += 1;
        }
        for h in hits {
            assert!((h as f64 / 30_000.0 - 1.0 / 3.0).abs() < 0.015);
        }
    }

    #[test]
    fn singleton_sets_rank_one() {
        let s = draw_jps(&dist(&[0.3, 0.7]), 20, 1, RankerSpec::Perfect, 1).unwrap();
        assert!(s.ranks().iter().all(|r| *r == 1));
    }

    #[test]
    fn perfect_ranking_favours_low_ranks_for_low_values() {
        // Exact: a category-1 unit among two comparison units takes rank 1 with
        // probability sum over j ones among the others of C(2,j)/4 * 1/(j+1).
        let exact_r1: f64 = (0..=2).map(|j| binomial_coef(2, j) / 4.0 / (j as f64 + 1.0)).sum();
        let exact_r3: f64 = (0..=2).map(|j| binomial_coef(2, j) / 4.0 * if j == 2 { 1.0 / 3.0 } else { 0.0 }).sum();
        assert!(exact_r1 > exact_r3);
        let s = draw_jps(&dist(&[0.5, 0.5]), 100_000, 3, RankerSpec::Perfect, 2).unwrap();
        let ones: Vec<usize> = s.values().iter().zip(s.ranks()).filter(|(x, _)| **x == 1).map(|(_, r)| *r).collect();
        let f = |h: usize| ones.iter().filter(|r| **r == h).count() as f64 / ones.len() as f64;
        assert!((f(1) - exact_r1).abs() < 0.01);
        assert!((f(3) - exact_r3).abs() < 0.01);
        assert!(f(1) > f(3));
    }

    fn binomial_coef(n: usize, k: usize) -> f64 {
        crate::kernel::binomial(n, k)
    }

    #[test]
    fn multi_with_one_ranker_equals_single() {
        let d = dist(&[0.3, 0.4, 0.3]);
        let r = RankerSpec::concomitant(0.7).unwrap();
        let single = draw_jps(&d, 40, 3, r, 77).unwrap();
        let multi = draw_jps_multi(&d, 40, 3, &[r], 77).unwrap();
        assert_eq!(single, multi.ranker(0));
    }

    #[test]
    fn empty_design_split_for_two_strata() {
        let design = JpsDesign::new(ModelSource::new(dist(&[0.5, 0.5]), vec![RankerSpec::Perfect]).unwrap(), 2).unwrap();
        let mut rng = seeded_rng(3);
        let mut first = 0;
        let draws = 10_000;
        for _ in 0..draws {
            let s = condition_sample(&design, 4, Conditioning::AtLeastOneEmptyStratum, 1000, &mut rng).unwrap();
            let empty = s.empty_strata();
            assert_eq!(empty.len(), 1);
            if empty == [1] {
                first += 1;
            }
        }
        let share = first as f64 / draws as f64;
        assert!((share - 0.5).abs() < 0.02, "{share}");
    }

    #[test]
    fn conditioning_postconditions() {
        let source = ModelSource::new(dist(&[0.3, 0.4, 0.3]), vec![RankerSpec::concomitant(0.9).unwrap()]).unwrap();
        let design = JpsDesign::new(source, 3).unwrap();
        let mut rng = seeded_rng(8);
        for _ in 0..200 {
            let s = condition_sample(&design, 10, Conditioning::NoEmptyStrata, 1000, &mut rng).unwrap();
            assert!(s.empty_strata().is_empty());
            assert!(all_categories_present(s.values(), 3));
            let s = condition_sample(&design, 10, Conditioning::AtLeastOneEmptyStratum, 1000, &mut rng).unwrap();
            assert!(!s.empty_strata().is_empty());
            assert!(all_categories_present(s.values(), 3));
        }
    }

    #[test]
    fn conditioning_exhaustion_is_reported() {
        // n = 1 can never show two categories.
        let source = ModelSource::new(dist(&[0.5, 0.5]), vec![RankerSpec::Perfect]).unwrap();
        let design = JpsDesign::new(source, 2).unwrap();
        let err = condition_sample(&design, 1, Conditioning::AllCategoriesPresent, 5, &mut seeded_rng(1)).unwrap_err();
        assert!(matches!(err, JpsError::ConditioningExhausted { attempts: 5, .. }));
        assert!(condition_sample(&design, 3, Conditioning::AtLeastOneEmptyStratum, 0, &mut seeded_rng(1)).is_err());
    }

    #[test]
    fn bootstrap_single_row_population() {
        let pop = Arc::new(FinitePopulation::new(vec![PopulationUnit { x: 2, z: vec![0.5] }], 3).unwrap());
        let s = bootstrap_population(pop, 30_000, 3, &[0], 5).unwrap();
        assert!(s.values().iter().all(|v| *v == 2));
        let sizes = ranker_stratum_sizes(&s, 0);
        for n in sizes {
            assert!((n as f64 / 30_000.0 - 1.0 / 3.0).abs() < 0.015);
        }
    }

    #[test]
    fn bootstrap_rejects_bad_inputs() {
        assert!(FinitePopulation::new(vec![], 2).is_err());
        let pop = Arc::new(FinitePopulation::new(vec![PopulationUnit { x: 1, z: vec![0.1] }], 2).unwrap());
        assert!(bootstrap_population(pop, 5, 2, &[1], 0).is_err());
    }
}
