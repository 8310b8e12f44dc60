//! Population files: categorization, CSV ingestion and the synthetic surrogate.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::sampling::{seeded_rng, FinitePopulation, PopulationUnit};
use crate::stats::pearson;

/// Cut points `t_1 < ... < t_{Q-1}`; category `q` covers `(t_{q-1}, t_q]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CategorizationRule {
    thresholds: Vec<f64>,
}

impl CategorizationRule {
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.iter().any(|t| !t.is_finite()) {
            bail!("thresholds must be finite");
        }
        if thresholds.windows(2).any(|w| w[1] <= w[0]) {
            bail!("thresholds must be strictly increasing: {thresholds:?}");
        }
        Ok(Self { thresholds })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn num_categories(&self) -> usize {
        self.thresholds.len() + 1
    }
}

impl Default for CategorizationRule {
    /// Osteoporosis `T <= 0.55`, osteopenia `0.55 < T <= 0.79`, normal above.
    fn default() -> Self {
        Self { thresholds: vec![0.55, 0.79] }
    }
}

pub fn categorize(score: f64, rule: &CategorizationRule) -> Result<usize> {
    if score.is_nan() {
        bail!("cannot categorize NaN");
    }
    Ok(1 + rule.thresholds.iter().filter(|t| score > **t).count())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BmdRecord {
    pub id: String,
    pub outcome_score: f64,
    pub ranking_scores: Vec<f64>,
}

/// Which CSV columns hold the id, the outcome and the ranking variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMap {
    pub id: Option<String>,
    pub outcome: String,
    /// Empty means every column named `z<k>`, in file order.
    pub rankers: Vec<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self { id: Some("id".into()), outcome: "outcome".into(), rankers: Vec::new() }
    }
}

#[derive(Debug, Clone)]
pub struct IngestedPopulation {
    pub records: Vec<BmdRecord>,
    pub ranker_names: Vec<String>,
    pub population: FinitePopulation,
}

impl IngestedPopulation {
    pub fn report(&self) -> String {
        let props = self.population.proportions();
        let cors = self.population.ranker_correlations();
        let mut out = format!("rows: {}\n", self.records.len());
        for (q, p) in props.iter().enumerate() {
            out.push_str(&format!("category {}: {:.4}\n", q + 1, p));
        }
        for (name, r) in self.ranker_names.iter().zip(&cors) {
            out.push_str(&format!("correlation({name}, category): {r:.4}\n"));
        }
        out
    }
}

fn is_ranker_column(name: &str) -> bool {
    name.strip_prefix('z').is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

pub fn ingest_population(path: &Path, columns: &ColumnMap, rule: &CategorizationRule) -> Result<IngestedPopulation> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_population(file, columns, rule).with_context(|| format!("reading {}", path.display()))
}

/// Same as [`ingest_population`] on any reader. Row numbers in diagnostics
/// count data rows from 1 (the header is row 0).
pub fn read_population<R: Read>(reader: R, columns: &ColumnMap, rule: &CategorizationRule) -> Result<IngestedPopulation> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().context("missing header row")?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| anyhow!("missing column `{name}`"))
    };
    let id_col = columns.id.as_deref().map(|name| headers.iter().position(|h| h == name)).unwrap_or(None);
    let outcome_col = find(&columns.outcome)?;
    let ranker_names: Vec<String> = if columns.rankers.is_empty() {
        headers.iter().filter(|h| is_ranker_column(h)).map(String::from).collect()
    } else {
        columns.rankers.clone()
    };
    if ranker_names.is_empty() {
        bail!("no ranking columns (expected z1, z2, ...)");
    }
    let ranker_cols = ranker_names.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    let mut units = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row.with_context(|| format!("row {row_no}: malformed CSV"))?;
        let number = |col: usize| -> Result<f64> {
            let cell = row.get(col).unwrap_or("");
            let v: f64 = cell
                .parse()
                .map_err(|_| anyhow!("row {row_no}, column `{}`: cannot parse `{cell}` as a number", &headers[col]))?;
            if !v.is_finite() {
                bail!("row {row_no}, column `{}`: value `{cell}` is not finite", &headers[col]);
            }
            Ok(v)
        };
        let outcome_score = number(outcome_col)?;
        let ranking_scores = ranker_cols.iter().map(|&c| number(c)).collect::<Result<Vec<_>>>()?;
        let id = id_col.and_then(|c| row.get(c)).map_or_else(|| row_no.to_string(), String::from);
        let x = categorize(outcome_score, rule)?;
        units.push(PopulationUnit { x, z: ranking_scores.clone() });
        records.push(BmdRecord { id, outcome_score, ranking_scores });
    }
    if records.is_empty() {
        bail!("file has a header but no data rows");
    }
    let population = FinitePopulation::new(units, rule.num_categories())?;
    Ok(IngestedPopulation { records, ranker_names, population })
}

/// Writes `id,outcome,<ranker names>`; floats use the shortest exact form.
pub fn write_population_csv<W: Write>(out: W, records: &[BmdRecord], ranker_names: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string(), "outcome".to_string()];
    header.extend(ranker_names.iter().cloned());
    w.write_record(&header)?;
    for r in records {
        if r.ranking_scores.len() != ranker_names.len() {
            bail!("record `{}` has {} ranking values, expected {}", r.id, r.ranking_scores.len(), ranker_names.len());
        }
        let mut row = vec![r.id.clone(), r.outcome_score.to_string()];
        row.extend(r.ranking_scores.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Category counts of the surrogate (proportions 0.081, 0.658, 0.261).
pub const SURROGATE_COUNTS: [usize; 3] = [19, 154, 61];
/// Target correlations of the two surrogate ranking columns with the category.
pub const SURROGATE_CORRELATIONS: [f64; 2] = [0.86, 0.70];

/// Synthetic stand-in for a bone-mineral-density extract.
///
/// Outcome scores are uniform inside each default category band, so they
/// categorize to [`SURROGATE_COUNTS`]. Each ranking column is
/// `r u + sqrt(1 - r^2) e`, where `u` is the standardized category index and
/// `e` is Gaussian noise made exactly orthogonal to `u` and standardized, so
/// the sample correlation with the category equals `r` up to rounding.
pub fn surrogate_population(seed: u64) -> (Vec<BmdRecord>, Vec<String>) {
    let mut rng = seeded_rng(seed);
    let bands = [(0.35, 0.55), (0.55, 0.79), (0.79, 1.05)];
    let mut outcomes = Vec::new();
    let mut cats = Vec::new();
    for (q, (&count, &(lo, hi))) in SURROGATE_COUNTS.iter().zip(&bands).enumerate() {
        for _ in 0..count {
            // (lo, hi]: the upper edge belongs to this band.
            let u: f64 = rng.random();
            outcomes.push(hi - u * (hi - lo) * 0.999);
            cats.push((q + 1) as f64);
        }
    }
    let n = cats.len();
    let m = cats.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = cats.iter().map(|c| c - m).collect();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let unit_x: Vec<f64> = centered.iter().map(|c| c / norm(&centered)).collect();

    let columns: Vec<Vec<f64>> = SURROGATE_CORRELATIONS
        .iter()
        .map(|&r| {
            let raw: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let mean = raw.iter().sum::<f64>() / n as f64;
            let mut e: Vec<f64> = raw.iter().map(|v| v - mean).collect();
            let proj: f64 = e.iter().zip(&unit_x).map(|(a, b)| a * b).sum();
            for (a, b) in e.iter_mut().zip(&unit_x) {
                *a -= proj * b;
            }
            let en = norm(&e);
            // Scale so the column has unit sample variance.
            let scale = ((n - 1) as f64).sqrt();
            unit_x.iter().zip(&e).map(|(u, v)| scale * (r * u + (1.0 - r * r).sqrt() * v / en)).collect()
        })
        .collect();

    let records = (0..n)
        .map(|i| BmdRecord {
            id: format!("s{:03}", i + 1),
            outcome_score: outcomes[i],
            ranking_scores: columns.iter().map(|c| c[i]).collect(),
        })
        .collect();
    (records, vec!["z1".to_string(), "z2".to_string()])
}

/// Correlation of each ranking column with the categorized outcome.
pub fn record_correlations(records: &[BmdRecord], rule: &CategorizationRule) -> Result<Vec<f64>> {
    let x = records.iter().map(|r| categorize(r.outcome_score, rule).map(|c| c as f64)).collect::<Result<Vec<_>>>()?;
    let k = records.first().map_or(0, |r| r.ranking_scores.len());
    Ok((0..k)
        .map(|j| pearson(&x, &records.iter().map(|r| r.ranking_scores[j]).collect::<Vec<_>>()))
        .collect())
}
