//! Subcommand bodies. Each writes CSV to a caller-supplied writer so the
//! binary stays a thin argument parser.

use std::io::{Read, Write};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};

use super::config::SimulationPlan;
use super::ingest::IngestedPopulation;
use crate::estimators::{
    estimate_iso_combined, estimate_iso_drop_empty, estimate_iso_maxmin, estimate_iso_minmax, estimate_iso_no_empty,
    estimate_ml, estimate_srs, estimate_standard_jps, MlOptions,
};
use crate::harness::{run_grid, Execution, Population, Scenario, ScenarioResult};
use crate::multiranker::{estimate_sm, estimate_sm_star, ranker_weights, RankerWeights};
use crate::sampling::{child_seed, Conditioning, FiniteSource};
use crate::types::{EstimateResult, Method, MultiRankerSample};

fn fmt_f64(v: f64) -> String {
    v.to_string()
}

/// Outcome of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub scenarios: usize,
    pub rows: usize,
    /// Scenarios whose failure share exceeded the budget.
    pub flagged: usize,
}

/// Header of the simulation CSV for up to `k` rankers and `q` categories.
pub fn simulation_header(k: usize, q: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=k).map(|i| format!("rho_{i}")).collect();
    h.extend((1..=q).map(|i| format!("p{i}")));
    h.extend(["n", "H", "conditioning", "method"].map(String::from));
    h.extend((1..=q).map(|i| format!("mse_{i}")));
    h.extend(
        [
            "re",
            "re_se",
            "completed",
            "failures",
            "conditioning_failures",
            "estimator_failures",
            "non_converged",
            "flagged",
        ]
        .map(String::from),
    );
    h
}

/// Runs every planned scenario and writes one row per `(scenario, method)`.
pub fn cmd_simulate<W: Write>(plan: &SimulationPlan, execution: Execution, out: W) -> Result<SimulateSummary> {
    let k = plan.max_rankers();
    let q = plan.max_categories();
    let scenarios: Vec<Scenario> = plan.scenarios.iter().map(|p| p.scenario.clone()).collect();
    let results = run_grid(&scenarios, execution);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(simulation_header(k, q))?;
    let mut rows = 0;
    let mut flagged = 0;
    for (i, (planned, res)) in plan.scenarios.iter().zip(results).enumerate() {
        let res = res.with_context(|| format!("scenario {}", i + 1))?;
        if res.flagged_unreliable {
            flagged += 1;
        }
        let s = &planned.scenario;
        for m in &res.methods {
            let mut row: Vec<String> = (0..k).map(|j| planned.rankers.get(j).map_or(String::new(), |r| r.label())).collect();
            row.extend((0..q).map(|j| planned.probs.get(j).map_or(String::new(), |p| fmt_f64(*p))));
            row.extend([s.n.to_string(), s.set_size.to_string(), s.conditioning.to_string(), m.method.to_string()]);
            row.extend((0..q).map(|j| m.mse.get(j).map_or(String::new(), |v| fmt_f64(*v))));
            row.extend([
                fmt_f64(m.re),
                fmt_f64(m.re_se),
                res.completed.to_string(),
                res.failures().to_string(),
                res.conditioning_failures.to_string(),
                res.estimator_failures.to_string(),
                m.non_converged.to_string(),
                res.flagged_unreliable.to_string(),
            ]);
            w.write_record(&row)?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(SimulateSummary { scenarios: plan.scenarios.len(), rows, flagged })
}

/// Estimator names accepted by `estimate`. `iso_no_empty` refuses samples
/// with empty strata; `iso` drops them.
pub const ESTIMATE_METHODS: [&str; 10] =
    ["srs", "st", "ml", "iso", "iso_no_empty", "iso_minus", "iso_plus", "iso_star", "sm", "sm_star"];

#[derive(Debug, Clone, Default)]
pub struct EstimateOptions {
    pub set_size: Option<usize>,
    pub num_categories: Option<usize>,
    /// Empty means every single-ranker method, plus `sm`, `sm_star` when
    /// the file has several rankers and score columns.
    pub methods: Vec<String>,
}

struct SampleFile {
    values: Vec<usize>,
    ranks: Vec<Vec<usize>>,
    scores: Option<Vec<Vec<f64>>>,
}

fn read_sample_file<R: Read>(input: R) -> Result<SampleFile> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().context("missing header row")?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let value_col = col("value").ok_or_else(|| anyhow!("missing column `value`"))?;
    let rank_cols: Vec<usize> = match col("rank") {
        Some(c) => vec![c],
        None => (1..).map_while(|k| col(&format!("rank_{k}"))).collect(),
    };
    if rank_cols.is_empty() {
        bail!("missing column `rank` (or `rank_1`, `rank_2`, ...)");
    }
    let score_cols: Vec<usize> = (1..=rank_cols.len()).map_while(|k| col(&format!("z_{k}"))).collect();
    if !score_cols.is_empty() && score_cols.len() != rank_cols.len() {
        bail!("found {} score columns for {} rank columns", score_cols.len(), rank_cols.len());
    }

    let mut out = SampleFile { values: Vec::new(), ranks: Vec::new(), scores: (!score_cols.is_empty()).then(Vec::new) };
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row.with_context(|| format!("row {row_no}: malformed CSV"))?;
        let cell = |c: usize| row.get(c).unwrap_or("");
        let positive = |c: usize| -> Result<usize> {
            match cell(c).parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => bail!("row {row_no}, column `{}`: expected a positive integer, got `{}`", &headers[c], cell(c)),
            }
        };
        out.values.push(positive(value_col)?);
        out.ranks.push(rank_cols.iter().map(|&c| positive(c)).collect::<Result<_>>()?);
        if let Some(scores) = out.scores.as_mut() {
            let z = score_cols
                .iter()
                .map(|&c| {
                    cell(c).parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                        anyhow!("row {row_no}, column `{}`: cannot parse `{}` as a number", &headers[c], cell(c))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            scores.push(z);
        }
    }
    if out.values.is_empty() {
        bail!("sample file has no data rows");
    }
    Ok(out)
}

fn estimate_one(tag: &str, sample: &MultiRankerSample, weights: Option<&RankerWeights>) -> Result<EstimateResult> {
    let first = || sample.ranker(0);
    let need_weights = || weights.ok_or_else(|| anyhow!("`{tag}` needs score columns z_1..z_K to weight the rankers"));
    Ok(match tag {
        "srs" => estimate_srs(sample.values(), sample.num_categories())?,
        "st" => estimate_standard_jps(&first())?,
        "ml" => estimate_ml(&first(), &MlOptions::default())?,
        "iso" => estimate_iso_drop_empty(&first())?,
        "iso_no_empty" => estimate_iso_no_empty(&first())
            .map_err(|e| anyhow!("iso_no_empty refuses this sample: {e}"))?,
        "iso_minus" => estimate_iso_minmax(&first())?,
        "iso_plus" => estimate_iso_maxmin(&first())?,
        "iso_star" => estimate_iso_combined(&first())?,
        "sm" => estimate_sm(sample, need_weights()?)?,
        "sm_star" => estimate_sm_star(sample, need_weights()?)?,
        "reg" => bail!("`reg` needs fresh comparison units and is only available in simulate and bmd-study"),
        other => bail!("unknown method `{other}` (expected one of {})", ESTIMATE_METHODS.join(", ")),
    })
}

/// Estimates from a `(value, rank...)` file. Warnings go to `warn`.
pub fn cmd_estimate<R: Read, W: Write, E: Write>(input: R, opts: &EstimateOptions, out: W, mut warn: E) -> Result<()> {
    let file = read_sample_file(input)?;
    let max_rank = file.ranks.iter().flatten().copied().max().unwrap_or(1);
    let max_value = file.values.iter().copied().max().unwrap_or(1);
    let set_size = match opts.set_size {
        Some(h) => {
            if let Some((i, r)) = file.ranks.iter().enumerate().find_map(|(i, row)| row.iter().find(|r| **r > h).map(|r| (i, r))) {
                bail!("row {}: rank {r} exceeds the declared set size {h}", i + 1);
            }
            h
        }
        None => {
            writeln!(warn, "warning: set size not given; using the largest rank, H = {max_rank}")?;
            max_rank
        }
    };
    let q = match opts.num_categories {
        Some(q) => {
            if let Some(i) = file.values.iter().position(|v| *v > q) {
                bail!("row {}: category {} exceeds the declared number of categories {q}", i + 1, file.values[i]);
            }
            q
        }
        None => {
            writeln!(warn, "warning: number of categories not given; using the largest value, Q = {max_value}")?;
            max_value
        }
    };
    let k = file.ranks[0].len();
    let scores = file.scores.clone().unwrap_or_else(|| vec![vec![0.0; k]; file.values.len()]);
    let labels = (1..=k).map(|i| format!("ranker_{i}")).collect();
    let sample = MultiRankerSample::new(file.values.clone(), file.ranks.clone(), scores, labels, set_size, q)?;
    let weights = match &file.scores {
        Some(z) => Some(ranker_weights(&file.values, z)?),
        None => None,
    };

    let methods: Vec<String> = if opts.methods.is_empty() {
        let mut m: Vec<String> =
            ["srs", "st", "ml", "iso", "iso_minus", "iso_plus", "iso_star"].map(String::from).to_vec();
        if k > 1 && weights.is_some() {
            m.extend(["sm", "sm_star"].map(String::from));
        }
        m
    } else {
        opts.methods.clone()
    };

    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["method".to_string()];
    header.extend((1..q).map(|i| format!("c_{i}")));
    header.extend((1..=q).map(|i| format!("p_{i}")));
    w.write_record(&header)?;
    for tag in &methods {
        let est = estimate_one(tag, &sample, weights.as_ref())?;
        let mut row = vec![tag.clone()];
        row.extend(est.cumulative.iter().map(|v| fmt_f64(*v)));
        row.extend(est.proportions.iter().map(|v| fmt_f64(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct BmdStudyOptions {
    pub sample_sizes: Vec<usize>,
    pub set_sizes: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub max_attempts: usize,
    pub execution: Execution,
}

impl Default for BmdStudyOptions {
    fn default() -> Self {
        Self {
            sample_sizes: vec![30, 60],
            set_sizes: vec![3, 6],
            replications: 2000,
            seed: 2024,
            max_attempts: 100_000,
            execution: Execution::Parallel,
        }
    }
}

pub const BMD_HEADER: [&str; 13] = [
    "table",
    "rankers",
    "correlations",
    "n",
    "H",
    "conditioning",
    "method",
    "re",
    "re_se",
    "total_mse",
    "completed",
    "failures",
    "flagged",
];

/// One bootstrap scenario of the BMD study with its table coordinates.
#[derive(Debug, Clone)]
pub struct BmdScenario {
    pub table: &'static str,
    pub rankers: String,
    pub correlations: String,
    pub scenario: Scenario,
}

/// Scenarios of the bootstrap study: each ranker alone with and without
/// empty strata, and all rankers together for the multi-ranker methods.
pub fn plan_bmd_study(pop: &IngestedPopulation, opts: &BmdStudyOptions) -> Result<Vec<BmdScenario>> {
    if opts.replications == 0 {
        bail!("replications must be at least 1");
    }
    let shared = Arc::new(pop.population.clone());
    let cors = pop.population.ranker_correlations();
    let k = pop.ranker_names.len();
    let mut tables: Vec<(&'static str, Vec<usize>, Conditioning, Vec<Method>)> = Vec::new();
    for j in 0..k {
        use Method::*;
        tables.push(("single_empty", vec![j], Conditioning::AtLeastOneEmptyStratum, vec![St, Iso, IsoMinus, IsoPlus, IsoStar, Ml]));
        tables.push(("single_no_empty", vec![j], Conditioning::NoEmptyStrata, vec![St, Iso, Ml]));
    }
    if k > 1 {
        tables.push((
            "multi",
            (0..k).collect(),
            Conditioning::AllCategoriesPresent,
            vec![Method::Sm, Method::SmStar, Method::Reg],
        ));
    }
    let mut out = Vec::new();
    for (table, columns, conditioning, methods) in tables {
        let names: Vec<String> = columns.iter().map(|&c| pop.ranker_names[c].clone()).collect();
        let source = FiniteSource::new(shared.clone(), columns.clone())?.with_labels(names.clone());
        let correlations = columns.iter().map(|&c| format!("{:.4}", cors[c])).collect::<Vec<_>>().join("+");
        for &n in &opts.sample_sizes {
            for &h in &opts.set_sizes {
                let seed = child_seed(opts.seed, out.len() as u64);
                let mut scenario = Scenario::new(
                    Population::Finite(source.clone()),
                    n,
                    h,
                    conditioning,
                    methods.clone(),
                    opts.replications,
                    seed,
                )?;
                scenario.max_attempts = opts.max_attempts;
                out.push(BmdScenario { table, rankers: names.join("+"), correlations: correlations.clone(), scenario });
            }
        }
    }
    Ok(out)
}

/// Bootstrap RE tables for a finite population.
pub fn cmd_bmd_study<W: Write>(pop: &IngestedPopulation, opts: &BmdStudyOptions, out: W) -> Result<SimulateSummary> {
    let planned = plan_bmd_study(pop, opts)?;
    let scenarios: Vec<Scenario> = planned.iter().map(|p| p.scenario.clone()).collect();
    let results = run_grid(&scenarios, opts.execution);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BMD_HEADER)?;
    let mut rows = 0;
    let mut flagged = 0;
    for (p, res) in planned.iter().zip(results) {
        let res: ScenarioResult =
            res.with_context(|| format!("table {} rankers {} n={} H={}", p.table, p.rankers, p.scenario.n, p.scenario.set_size))?;
        flagged += usize::from(res.flagged_unreliable);
        for m in &res.methods {
            w.write_record([
                p.table.to_string(),
                p.rankers.clone(),
                p.correlations.clone(),
                p.scenario.n.to_string(),
                p.scenario.set_size.to_string(),
                p.scenario.conditioning.to_string(),
                m.method.to_string(),
                fmt_f64(m.re),
                fmt_f64(m.re_se),
                fmt_f64(m.total_mse),
                res.completed.to_string(),
                res.failures().to_string(),
                res.flagged_unreliable.to_string(),
            ])?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(SimulateSummary { scenarios: planned.len(), rows, flagged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::SimulationConfig;
    use crate::cli::ingest::{read_population, surrogate_population, write_population_csv, CategorizationRule, ColumnMap};

    fn estimate(text: &str, opts: &EstimateOptions) -> Result<(String, String)> {
        let mut out = Vec::new();
        let mut warn = Vec::new();
        cmd_estimate(text.as_bytes(), opts, &mut out, &mut warn)?;
        Ok((String::from_utf8(out).unwrap(), String::from_utf8(warn).unwrap()))
    }

    #[test]
    fn estimate_hand_traced_file() {
        // Stratum 1: values (1, 2) -> c_1 = 0.5; stratum 2: values (2, 3) -> c_1 = 0, c_2 = 0.5.
        let text = "value,rank\n1,1\n2,1\n2,2\n3,2\n";
        let opts = EstimateOptions { set_size: Some(2), num_categories: Some(3), methods: vec!["st".into()] };
        let (out, warn) = estimate(text, &opts).unwrap();
        assert_eq!(out, "method,c_1,c_2,p_1,p_2,p_3\nst,0.25,0.75,0.25,0.5,0.25\n");
        assert!(warn.is_empty());
    }

    #[test]
    fn estimate_singleton_sets_match_srs() {
        let text = "value,rank\n1,1\n2,1\n2,1\n3,1\n3,1\n";
        let opts = EstimateOptions { set_size: Some(1), num_categories: Some(3), ..Default::default() };
        let (out, _) = estimate(text, &opts).unwrap();
        let lines: Vec<&str> = out.lines().skip(1).collect();
        let srs = lines[0].split_once(',').unwrap().1;
        for line in &lines {
            let (method, rest) = line.split_once(',').unwrap();
            if method == "ml" {
                let a: Vec<f64> = rest.split(',').map(|v| v.parse().unwrap()).collect();
                let b: Vec<f64> = srs.split(',').map(|v| v.parse().unwrap()).collect();
                assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-4), "{line}");
            } else {
                assert_eq!(rest, srs, "{line}");
            }
        }
    }

    #[test]
    fn estimate_refusals_and_inference() {
        let text = "value,rank\n1,1\n2,1\n2,3\n";
        let opts = EstimateOptions { set_size: Some(3), num_categories: Some(2), methods: vec!["iso_no_empty".into()] };
        let err = estimate(text, &opts).unwrap_err().to_string();
        assert!(err.contains("stratum 2"), "{err}");

        let opts = EstimateOptions { set_size: Some(2), ..Default::default() };
        assert!(estimate(text, &opts).unwrap_err().to_string().contains("rank 3"));
        let opts = EstimateOptions { num_categories: Some(1), ..Default::default() };
        assert!(estimate(text, &opts).is_err());

        let (_, warn) = estimate(text, &EstimateOptions::default()).unwrap();
        assert!(warn.contains("H = 3") && warn.contains("Q = 2"), "{warn}");

        let opts = EstimateOptions { methods: vec!["reg".into()], ..Default::default() };
        assert!(estimate(text, &opts).is_err());
        let opts = EstimateOptions { methods: vec!["sm".into()], ..Default::default() };
        assert!(estimate(text, &opts).unwrap_err().to_string().contains("z_1"));
    }

    #[test]
    fn estimate_multi_ranker_file() {
        let text = "value,rank_1,rank_2,z_1,z_2\n1,1,2,0.1,0.5\n2,2,2,0.9,0.7\n1,1,1,0.2,0.1\n2,2,1,1.1,0.2\n";
        let opts = EstimateOptions { set_size: Some(2), num_categories: Some(2), methods: vec![] };
        let (out, _) = estimate(text, &opts).unwrap();
        assert!(out.lines().any(|l| l.starts_with("sm,")) && out.lines().any(|l| l.starts_with("sm_star,")));
    }

    #[test]
    fn simulate_minimal_config_is_reproducible() {
        let cfg = SimulationConfig::from_toml(
            r#"
seed = 3
replications = 30
[[study]]
conditioning = "all_categories_present"
methods = ["st", "ml"]
rankers = ["0.8"]
n = [20]
set_size = [3]
probs = [[0.3, 0.4, 0.3]]
"#,
        )
        .unwrap();
        let plan = cfg.plan().unwrap();
        let mut a = Vec::new();
        let summary = cmd_simulate(&plan, Execution::Parallel, &mut a).unwrap();
        assert_eq!(summary.rows, 3);
        let mut b = Vec::new();
        cmd_simulate(&plan, Execution::Serial, &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        let srs_row = text.lines().nth(1).unwrap();
        assert!(srs_row.contains(",srs,") && srs_row.split(',').nth(11) == Some("1"), "{srs_row}");
    }

    #[test]
    fn bmd_study_smoke() {
        let (records, names) = surrogate_population(1);
        let mut buf = Vec::new();
        write_population_csv(&mut buf, &records, &names).unwrap();
        let pop = read_population(buf.as_slice(), &ColumnMap::default(), &CategorizationRule::default()).unwrap();
        let opts = BmdStudyOptions {
            sample_sizes: vec![30],
            set_sizes: vec![3],
            replications: 1,
            ..Default::default()
        };
        let mut out = Vec::new();
        let summary = cmd_bmd_study(&pop, &opts, &mut out).unwrap();
        // Two rankers x (7 + 4 rows) + multi-ranker 4 rows.
        assert_eq!(summary.rows, 2 * (7 + 4) + 4);
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), BMD_HEADER.join(","));
        assert!(text.lines().skip(1).all(|l| l.split(',').count() == BMD_HEADER.len()));
    }
}
