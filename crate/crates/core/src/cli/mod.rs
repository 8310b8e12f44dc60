//! Building blocks of the `jps` command-line tool.

mod commands;
mod config;
mod ingest;

pub use commands::{
    cmd_bmd_study, cmd_estimate, cmd_simulate, plan_bmd_study, simulation_header, BmdScenario, BmdStudyOptions,
    EstimateOptions, SimulateSummary, BMD_HEADER, ESTIMATE_METHODS,
};
pub use config::{parse_methods, parse_rankers, GridConfig, PlannedScenario, SimulationConfig, SimulationPlan, StudyConfig};
pub use ingest::{
    categorize, ingest_population, read_population, record_correlations, surrogate_population, write_population_csv,
    BmdRecord, CategorizationRule, ColumnMap, IngestedPopulation, SURROGATE_CORRELATIONS, SURROGATE_COUNTS,
};
