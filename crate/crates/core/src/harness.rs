//! Monte-Carlo replication engine.
//!
//! A [`Scenario`] fixes a population, a JPS design and a list of methods.
//! Replication `i` draws one conditioned JPS sample and then one SRS sample
//! of the same size from [`replication_rng`]`(master_seed, i)`, so numbers
//! do not depend on how replications are scheduled. Per-replication outputs
//! are collected in index order and reduced serially.

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, JpsError, Result};
use crate::estimators::{
    estimate_iso_combined, estimate_iso_drop_empty, estimate_iso_maxmin, estimate_iso_minmax, estimate_ml,
    estimate_srs, estimate_standard_jps, MlOptions,
};
use crate::multiranker::{estimate_reg, estimate_sm, estimate_sm_star, ranker_weights, OlrOptions};
use crate::sampling::{
    condition_sample, draw_srs_conditioned, replication_rng, Conditioning, FiniteSource, JpsDesign, ModelSource,
    RankerSpec, UnitSource,
};
use crate::types::{EstimateResult, Method, MultiRankerSample, OrdinalDistribution};

/// Share of failed replications above which a scenario is flagged unreliable.
pub const FAILURE_BUDGET: f64 = 0.10;

#[derive(Debug, Clone)]
pub enum Population {
    Model(ModelSource),
    Finite(FiniteSource),
}

impl Population {
    pub fn model(dist: OrdinalDistribution, rankers: Vec<RankerSpec>) -> Result<Self> {
        Ok(Population::Model(ModelSource::new(dist, rankers)?))
    }
}

impl UnitSource for Population {
    fn num_categories(&self) -> usize {
        match self {
            Population::Model(s) => s.num_categories(),
            Population::Finite(s) => s.num_categories(),
        }
    }

    fn num_rankers(&self) -> usize {
        match self {
            Population::Model(s) => s.num_rankers(),
            Population::Finite(s) => s.num_rankers(),
        }
    }

    fn labels(&self) -> Vec<String> {
        match self {
            Population::Model(s) => s.labels(),
            Population::Finite(s) => s.labels(),
        }
    }

    fn target_proportions(&self) -> Vec<f64> {
        match self {
            Population::Model(s) => s.target_proportions(),
            Population::Finite(s) => s.target_proportions(),
        }
    }

    fn draw_value<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            Population::Model(s) => s.draw_value(rng),
            Population::Finite(s) => s.draw_value(rng),
        }
    }

    fn draw_unit<R: Rng + ?Sized>(&self, rng: &mut R, scores: &mut [f64]) -> usize {
        match self {
            Population::Model(s) => s.draw_unit(rng, scores),
            Population::Finite(s) => s.draw_unit(rng, scores),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub population: Population,
    pub n: usize,
    pub set_size: usize,
    pub conditioning: Conditioning,
    /// Methods to evaluate; SRS is always added in front if missing.
    pub methods: Vec<Method>,
    pub replications: usize,
    pub master_seed: u64,
    /// Whole-sample draws allowed per conditioned sample.
    pub max_attempts: usize,
    pub ml: MlOptions,
    pub olr: OlrOptions,
}

impl Scenario {
    pub fn new(
        population: Population,
        n: usize,
        set_size: usize,
        conditioning: Conditioning,
        methods: Vec<Method>,
        replications: usize,
        master_seed: u64,
    ) -> Result<Self> {
        let s = Self {
            population,
            n,
            set_size,
            conditioning,
            methods,
            replications,
            master_seed,
            max_attempts: 100_000,
            ml: MlOptions::default(),
            olr: OlrOptions::default(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid("n must be at least 1");
        }
        if self.set_size == 0 {
            return invalid("set size must be at least 1");
        }
        if self.replications == 0 {
            return invalid("replications must be at least 1");
        }
        if self.max_attempts == 0 {
            return invalid("max_attempts must be at least 1");
        }
        if self.methods.is_empty() {
            return invalid("at least one method is required");
        }
        let mut seen = HashSet::new();
        if let Some(m) = self.methods.iter().find(|m| !seen.insert(**m)) {
            return invalid(format!("method `{m}` listed twice"));
        }
        if self.conditioning == Conditioning::NoEmptyStrata {
            if let Some(m) =
                self.methods.iter().find(|m| matches!(m, Method::IsoMinus | Method::IsoPlus | Method::IsoStar))
            {
                return invalid(format!("method `{m}` targets empty strata but conditioning is no_empty_strata"));
            }
        }
        if self.conditioning == Conditioning::AtLeastOneEmptyStratum && self.set_size < 2 {
            return invalid("at_least_one_empty_stratum needs a set size of at least 2");
        }
        self.ml.validate()
    }

    /// Methods in evaluation order, SRS first.
    pub fn method_order(&self) -> Vec<Method> {
        let mut order = vec![Method::Srs];
        order.extend(self.methods.iter().copied().filter(|m| *m != Method::Srs));
        order
    }
}

/// Estimates of one replication, aligned with [`Scenario::method_order`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutput {
    pub estimates: Vec<EstimateResult>,
}

fn run_method<R: Rng + ?Sized>(
    scenario: &Scenario,
    method: Method,
    sample: &MultiRankerSample,
    srs: &[usize],
    rng: &mut R,
) -> Result<EstimateResult> {
    let q = sample.num_categories();
    match method {
        Method::Srs => estimate_srs(srs, q),
        Method::St => estimate_standard_jps(&sample.ranker(0)),
        Method::Ml => estimate_ml(&sample.ranker(0), &scenario.ml),
        Method::Iso => estimate_iso_drop_empty(&sample.ranker(0)),
        Method::IsoMinus => estimate_iso_minmax(&sample.ranker(0)),
        Method::IsoPlus => estimate_iso_maxmin(&sample.ranker(0)),
        Method::IsoStar => estimate_iso_combined(&sample.ranker(0)),
        Method::Sm => estimate_sm(sample, &ranker_weights(sample.values(), sample.concomitants())?),
        Method::SmStar => estimate_sm_star(sample, &ranker_weights(sample.values(), sample.concomitants())?),
        Method::Reg => estimate_reg(
            sample.values(),
            sample.concomitants(),
            &scenario.population,
            scenario.set_size,
            &scenario.olr,
            rng,
        ),
    }
}

/// Runs one replication. Errors are either conditioning exhaustion or an
/// estimator failure; both make the replication count as failed.
pub fn run_replication(scenario: &Scenario, index: usize) -> Result<ReplicationOutput> {
    let mut rng = replication_rng(scenario.master_seed, index as u64);
    let design = JpsDesign::new(&scenario.population, scenario.set_size)?;
    let sample = condition_sample(&design, scenario.n, scenario.conditioning, scenario.max_attempts, &mut rng)?;
    let srs = draw_srs_conditioned(&scenario.population, scenario.n, scenario.max_attempts, &mut rng)?;
    let estimates = scenario
        .method_order()
        .into_iter()
        .map(|m| run_method(scenario, m, &sample, &srs, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicationOutput { estimates })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    /// `MSE_q` for `q = 1..Q`.
    pub mse: Vec<f64>,
    pub total_mse: f64,
    /// Total relative efficiency against SRS.
    pub re: f64,
    /// Delta-method Monte-Carlo standard error of `re`.
    pub re_se: f64,
    /// Replications whose iterative fit did not converge (ML, reg).
    pub non_converged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub target: Vec<f64>,
    pub methods: Vec<MethodSummary>,
    pub requested: usize,
    pub completed: usize,
    pub conditioning_failures: usize,
    pub estimator_failures: usize,
    pub flagged_unreliable: bool,
}

impl ScenarioResult {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// RE of `method`; panics if it was not evaluated.
    pub fn re(&self, method: Method) -> f64 {
        self.method(method).unwrap_or_else(|| panic!("method {method} not in scenario")).re
    }

    pub fn failures(&self) -> usize {
        self.conditioning_failures + self.estimator_failures
    }
}

pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioResult> {
    run_scenario_with(scenario, Execution::Parallel)
}

pub fn run_scenario_with(scenario: &Scenario, execution: Execution) -> Result<ScenarioResult> {
    scenario.validate()?;
    let outputs: Vec<Result<ReplicationOutput>> = match execution {
        Execution::Serial => (0..scenario.replications).map(|i| run_replication(scenario, i)).collect(),
        Execution::Parallel => (0..scenario.replications).into_par_iter().map(|i| run_replication(scenario, i)).collect(),
    };
    Ok(summarize(scenario, &outputs))
}

fn summarize(scenario: &Scenario, outputs: &[Result<ReplicationOutput>]) -> ScenarioResult {
    let target = scenario.population.target_proportions();
    let order = scenario.method_order();
    let q = target.len();
    let mut conditioning_failures = 0;
    let mut estimator_failures = 0;
    // losses[m][r]: total squared error of method m at completed replication r.
    let mut losses: Vec<Vec<f64>> = vec![Vec::new(); order.len()];
    let mut sums = vec![vec![0.0; q]; order.len()];
    let mut non_converged = vec![0usize; order.len()];
    for out in outputs {
        match out {
            Ok(rep) => {
                for (m, est) in rep.estimates.iter().enumerate() {
                    let mut total = 0.0;
                    for (j, (p_hat, p)) in est.proportions.iter().zip(&target).enumerate() {
                        let e = (p_hat - p) * (p_hat - p);
                        sums[m][j] += e;
                        total += e;
                    }
                    losses[m].push(total);
                    if est.fit.is_some_and(|f| !f.converged) {
                        non_converged[m] += 1;
                    }
                }
            }
            Err(JpsError::ConditioningExhausted { .. }) => conditioning_failures += 1,
            Err(_) => estimator_failures += 1,
        }
    }
    let completed = outputs.len() - conditioning_failures - estimator_failures;
    let methods = order
        .iter()
        .enumerate()
        .map(|(m, &method)| {
            let mse: Vec<f64> =
                sums[m].iter().map(|s| if completed > 0 { s / completed as f64 } else { f64::NAN }).collect();
            let total_mse = mse.iter().sum();
            let (re, re_se) = relative_efficiency(&losses[0], &losses[m]);
            MethodSummary { method, mse, total_mse, re, re_se, non_converged: non_converged[m] }
        })
        .collect();
    let failed = conditioning_failures + estimator_failures;
    ScenarioResult {
        target,
        methods,
        requested: outputs.len(),
        completed,
        conditioning_failures,
        estimator_failures,
        flagged_unreliable: failed as f64 > FAILURE_BUDGET * outputs.len() as f64,
    }
}

/// `RE = mean(a) / mean(b)` for paired per-replication losses, with the
/// delta-method standard error.
fn relative_efficiency(srs: &[f64], method: &[f64]) -> (f64, f64) {
    let r = srs.len();
    if r == 0 {
        return (f64::NAN, f64::NAN);
    }
    let a = srs.iter().sum::<f64>() / r as f64;
    let b = method.iter().sum::<f64>() / r as f64;
    if b == 0.0 {
        return if a == 0.0 { (1.0, 0.0) } else { (f64::INFINITY, f64::NAN) };
    }
    let re = a / b;
    if r < 2 {
        return (re, f64::NAN);
    }
    let denom = (r - 1) as f64;
    let var_a = srs.iter().map(|x| (x - a).powi(2)).sum::<f64>() / denom;
    let var_b = method.iter().map(|x| (x - b).powi(2)).sum::<f64>() / denom;
    let cov = srs.iter().zip(method).map(|(x, y)| (x - a) * (y - b)).sum::<f64>() / denom;
    let var = (var_a / (a * a) + var_b / (b * b) - 2.0 * cov / (a * b)) * re * re / r as f64;
    (re, var.max(0.0).sqrt())
}

/// Runs every scenario; failures stay local to their scenario.
pub fn run_grid(scenarios: &[Scenario], execution: Execution) -> Vec<Result<ScenarioResult>> {
    match execution {
        Execution::Serial => scenarios.iter().map(|s| run_scenario_with(s, Execution::Serial)).collect(),
        Execution::Parallel => scenarios.par_iter().map(|s| run_scenario_with(s, Execution::Parallel)).collect(),
    }
}

/// One point of a `(rho, p, n, H)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub rho: f64,
    pub probs: Vec<f64>,
    pub n: usize,
    pub set_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedPoint {
    pub rho: f64,
    pub p2: f64,
    pub p3: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridPlan {
    pub points: Vec<GridPoint>,
    pub skipped: Vec<SkippedPoint>,
}

/// Cartesian grid over three-category laws `p = (1 - p2 - p3, p2, p3)`.
/// Points outside the open simplex are skipped and recorded.
pub fn three_category_grid(rhos: &[f64], p2s: &[f64], p3s: &[f64], ns: &[usize], set_sizes: &[usize]) -> GridPlan {
    let mut plan = GridPlan::default();
    for &rho in rhos {
        for &p3 in p3s {
            for &p2 in p2s {
                let p1 = 1.0 - p2 - p3;
                if p1 <= 1e-9 || p2 <= 0.0 || p3 <= 0.0 {
                    plan.skipped.push(SkippedPoint {
                        rho,
                        p2,
                        p3,
                        reason: format!("p1 = {:.3} is not a valid proportion", p1.max(0.0)),
                    });
                    continue;
                }
                let probs = vec![p1, p2, p3];
                for &n in ns {
                    for &set_size in set_sizes {
                        plan.points.push(GridPoint { rho, probs: probs.clone(), n, set_size });
                    }
                }
            }
        }
    }
    plan
}

/// Reference grid: rho in {0.5, 0.7, 0.9}, p2 in 0.1..=0.8, p3 in {0.1, 0.4, 0.6}, n in {30, 60}, H in {3, 6}.
pub fn reference_grid() -> GridPlan {
    let p2s: Vec<f64> = (1..=8).map(|i| i as f64 / 10.0).collect();
    three_category_grid(&[0.5, 0.7, 0.9], &p2s, &[0.1, 0.4, 0.6], &[30, 60], &[3, 6])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::seeded_rng;

    fn scenario(methods: Vec<Method>, conditioning: Conditioning, r: usize) -> Scenario {
        let dist = OrdinalDistribution::new(vec![0.3, 0.4, 0.3]).unwrap();
        let pop = Population::model(dist, vec![RankerSpec::concomitant(0.9).unwrap()]).unwrap();
        Scenario::new(pop, 30, 3, conditioning, methods, r, 11).unwrap()
    }

    #[test]
    fn srs_only_has_unit_efficiency() {
        let res = run_scenario(&scenario(vec![Method::Srs], Conditioning::AllCategoriesPresent, 50)).unwrap();
        assert_eq!(res.methods.len(), 1);
        assert_eq!(res.re(Method::Srs), 1.0);
        assert_eq!(res.completed, 50);
    }

    #[test]
    fn replication_is_reproducible_and_decomposes() {
        let s = scenario(vec![Method::St, Method::Ml, Method::Iso], Conditioning::NoEmptyStrata, 5);
        let a = run_replication(&s, 3).unwrap();
        assert_eq!(a, run_replication(&s, 3).unwrap());
        assert_ne!(a, run_replication(&s, 4).unwrap());

        let mut rng = replication_rng(11, 3);
        let design = JpsDesign::new(&s.population, 3).unwrap();
        let sample = condition_sample(&design, 30, Conditioning::NoEmptyStrata, s.max_attempts, &mut rng).unwrap();
        let srs = draw_srs_conditioned(&s.population, 30, s.max_attempts, &mut rng).unwrap();
        assert_eq!(a.estimates[0], estimate_srs(&srs, 3).unwrap());
        assert_eq!(a.estimates[1], estimate_standard_jps(&sample.ranker(0)).unwrap());
        assert_eq!(a.estimates[2], estimate_ml(&sample.ranker(0), &MlOptions::default()).unwrap());
    }

    #[test]
    fn serial_and_parallel_agree() {
        let methods = vec![Method::St, Method::IsoMinus, Method::IsoPlus, Method::IsoStar, Method::Ml];
        let s = scenario(methods, Conditioning::AtLeastOneEmptyStratum, 40);
        let a = run_scenario_with(&s, Execution::Serial).unwrap();
        let b = run_scenario_with(&s, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_two_category_law() {
        let dist = OrdinalDistribution::new(vec![1.0]).unwrap();
        let pop = Population::model(dist, vec![RankerSpec::Perfect]).unwrap();
        let s = Scenario::new(pop, 10, 2, Conditioning::AllCategoriesPresent, vec![Method::St, Method::Ml], 5, 1)
            .unwrap();
        let res = run_scenario(&s).unwrap();
        for m in &res.methods {
            assert_eq!(m.total_mse, 0.0);
            assert_eq!(m.re, 1.0);
        }
    }

    #[test]
    fn validation() {
        let dist = OrdinalDistribution::new(vec![0.5, 0.5]).unwrap();
        let pop = Population::model(dist, vec![RankerSpec::Perfect]).unwrap();
        let mk = |methods, cond, r| Scenario::new(pop.clone(), 10, 2, cond, methods, r, 0);
        assert!(mk(vec![], Conditioning::NoEmptyStrata, 1).is_err());
        assert!(mk(vec![Method::St], Conditioning::NoEmptyStrata, 0).is_err());
        assert!(mk(vec![Method::IsoStar], Conditioning::NoEmptyStrata, 1).is_err());
        assert!(mk(vec![Method::St, Method::St], Conditioning::NoEmptyStrata, 1).is_err());
        assert!(mk(vec![Method::IsoStar], Conditioning::AtLeastOneEmptyStratum, 1).is_ok());
    }

    #[test]
    fn failures_are_counted_and_flagged() {
        // n = 1 cannot show all three categories.
        let mut s = scenario(vec![Method::St], Conditioning::AllCategoriesPresent, 4);
        s.n = 1;
        s.max_attempts = 3;
        let res = run_scenario(&s).unwrap();
        assert_eq!(res.conditioning_failures, 4);
        assert_eq!(res.completed, 0);
        assert!(res.flagged_unreliable);
    }

    #[test]
    fn relative_efficiency_matches_ratio_and_bootstrap_spread() {
        let mut rng = seeded_rng(3);
        let a: Vec<f64> = (0..4000).map(|_| rng.random::<f64>() * 2.0).collect();
        let b: Vec<f64> = a.iter().map(|x| 0.5 * x + rng.random::<f64>() * 0.2).collect();
        let (re, se) = relative_efficiency(&a, &b);
        let ratio = a.iter().sum::<f64>() / b.iter().sum::<f64>();
        assert!((re - ratio).abs() < 1e-12);
        // Spread of the ratio over disjoint halves, scaled to the full length.
        let halves: Vec<f64> = a
            .chunks(400)
            .zip(b.chunks(400))
            .map(|(x, y)| x.iter().sum::<f64>() / y.iter().sum::<f64>())
            .collect();
        let m = halves.iter().sum::<f64>() / halves.len() as f64;
        let sd = (halves.iter().map(|h| (h - m).powi(2)).sum::<f64>() / (halves.len() - 1) as f64).sqrt();
        let expected = sd / (10f64).sqrt();
        assert!(se > 0.4 * expected && se < 2.5 * expected, "{se} vs {expected}");
        assert_eq!(relative_efficiency(&[0.0, 0.0], &[0.0, 0.0]), (1.0, 0.0));
    }

    #[test]
    fn reference_grid_shape() {
        let plan = reference_grid();
        assert_eq!(plan.points.len(), 192);
        // p3 = 0.4 drops p2 in {0.6, 0.7, 0.8}; p3 = 0.6 drops p2 in {0.4, .., 0.8}; per rho.
        assert_eq!(plan.skipped.len(), 3 * (3 + 5));
        for p in &plan.points {
            assert!(p.probs.iter().all(|v| *v > 0.0));
            assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
