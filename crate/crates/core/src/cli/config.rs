//! Simulation config files (TOML).
//!
//! ```toml
//! seed = 2024
//! replications = 500
//! out = "results.csv"
//!
//! [[study]]
//! conditioning = "no_empty_strata"
//! methods = ["st", "iso", "ml"]
//! rankers = ["0.5", "0.9", "0.9+0.7", "perfect"]
//! n = [30, 60]
//! set_size = [3, 6]
//! probs = [[0.3, 0.4, 0.3]]
//! ```
//!
//! Instead of `probs`, a study may give `[study.grid]` with `p2` and `p3`
//! lists; each pair becomes `(1 - p2 - p3, p2, p3)` and pairs outside the
//! simplex are skipped.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use crate::harness::{three_category_grid, Population, Scenario, SkippedPoint};
use crate::sampling::{child_seed, Conditioning, RankerSpec};
use crate::types::{Method, OrdinalDistribution};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub seed: u64,
    pub replications: usize,
    pub out: Option<String>,
    pub max_attempts: Option<usize>,
    #[serde(rename = "study")]
    pub studies: Vec<StudyConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub conditioning: String,
    pub methods: Vec<String>,
    pub rankers: Vec<String>,
    pub n: Vec<usize>,
    pub set_size: Vec<usize>,
    pub probs: Option<Vec<Vec<f64>>>,
    pub grid: Option<GridConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub p2: Vec<f64>,
    pub p3: Vec<f64>,
}

/// Parses `"perfect"`, `"0.9"` or `"0.9+0.7"` (one term per ranker).
pub fn parse_rankers(text: &str) -> Result<Vec<RankerSpec>> {
    text.split('+')
        .map(|part| {
            let part = part.trim();
            if part.eq_ignore_ascii_case("perfect") {
                return Ok(RankerSpec::Perfect);
            }
            let rho: f64 = part.parse().map_err(|_| anyhow!("cannot parse ranker `{part}`"))?;
            Ok(RankerSpec::concomitant(rho)?)
        })
        .collect()
}

pub fn parse_methods(items: &[String]) -> Result<Vec<Method>> {
    items.iter().map(|m| m.parse::<Method>().map_err(|e| anyhow!("{e}"))).collect()
}

/// Scenario plus the parameters shown in output rows.
#[derive(Debug, Clone)]
pub struct PlannedScenario {
    pub scenario: Scenario,
    pub rankers: Vec<RankerSpec>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct SimulationPlan {
    pub scenarios: Vec<PlannedScenario>,
    pub skipped: Vec<SkippedPoint>,
}

impl SimulationPlan {
    pub fn max_rankers(&self) -> usize {
        self.scenarios.iter().map(|s| s.rankers.len()).max().unwrap_or(0)
    }

    pub fn max_categories(&self) -> usize {
        self.scenarios.iter().map(|s| s.probs.len()).max().unwrap_or(0)
    }
}

impl SimulationConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimulationConfig = toml::from_str(text)?;
        if cfg.replications == 0 {
            bail!("`replications` must be at least 1");
        }
        if cfg.max_attempts == Some(0) {
            bail!("`max_attempts` must be at least 1");
        }
        if cfg.studies.is_empty() {
            bail!("at least one [[study]] table is required");
        }
        Ok(cfg)
    }

    /// Expands every study into scenarios. Scenario `i` (in expansion
    /// order) gets master seed `child_seed(seed, i)`.
    pub fn plan(&self) -> Result<SimulationPlan> {
        let mut plan = SimulationPlan::default();
        for (s, study) in self.studies.iter().enumerate() {
            let ctx = |field: &str| format!("study {}: field `{field}`", s + 1);
            let conditioning: Conditioning =
                study.conditioning.parse().map_err(|e| anyhow!("{e}")).with_context(|| ctx("conditioning"))?;
            let methods = parse_methods(&study.methods).with_context(|| ctx("methods"))?;
            if methods.is_empty() {
                bail!("{}: at least one method is required", ctx("methods"));
            }
            if study.rankers.is_empty() {
                bail!("{}: at least one ranker configuration is required", ctx("rankers"));
            }
            let rankers =
                study.rankers.iter().map(|r| parse_rankers(r)).collect::<Result<Vec<_>>>().with_context(|| ctx("rankers"))?;
            if study.n.is_empty() || study.n.contains(&0) {
                bail!("{}: sample sizes must be a non-empty list of positive integers", ctx("n"));
            }
            if study.set_size.is_empty() || study.set_size.contains(&0) {
                bail!("{}: set sizes must be a non-empty list of positive integers", ctx("set_size"));
            }
            let laws: Vec<Vec<f64>> = match (&study.probs, &study.grid) {
                (Some(_), Some(_)) => bail!("study {}: give either `probs` or `[grid]`, not both", s + 1),
                (None, None) => bail!("study {}: one of `probs` or `[grid]` is required", s + 1),
                (Some(p), None) => p.clone(),
                (None, Some(g)) => {
                    let grid = three_category_grid(&[f64::NAN], &g.p2, &g.p3, &[1], &[1]);
                    for set in &rankers {
                        let rho = match set.first() {
                            Some(RankerSpec::Concomitant { rho }) => *rho,
                            _ => f64::NAN,
                        };
                        plan.skipped.extend(grid.skipped.iter().map(|k| SkippedPoint { rho, ..k.clone() }));
                    }
                    grid.points.into_iter().map(|p| p.probs).collect()
                }
            };
            for ranker_set in &rankers {
                for probs in &laws {
                    let dist = OrdinalDistribution::new(probs.clone()).with_context(|| ctx("probs"))?;
                    let population = Population::model(dist, ranker_set.clone()).with_context(|| ctx("rankers"))?;
                    for &n in &study.n {
                        for &h in &study.set_size {
                            let seed = child_seed(self.seed, plan.scenarios.len() as u64);
                            let mut scenario = Scenario::new(
                                population.clone(),
                                n,
                                h,
                                conditioning,
                                methods.clone(),
                                self.replications,
                                seed,
                            )
                            .with_context(|| format!("study {}", s + 1))?;
                            if let Some(m) = self.max_attempts {
                                scenario.max_attempts = m;
                            }
                            plan.scenarios.push(PlannedScenario {
                                scenario,
                                rankers: ranker_set.clone(),
                                probs: probs.clone(),
                            });
                        }
                    }
                }
            }
        }
        Ok(plan)
    }
}
