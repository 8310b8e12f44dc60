//! Estimation of ordinal population proportions from judgment post-stratified samples.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod kernel;
pub mod multiranker;
pub mod sampling;
pub mod stats;
pub mod types;

pub use error::{JpsError, Result};
pub use types::{EstimateResult, FitReport, JpsSample, Method, MultiRankerSample, OrdinalDistribution, StratumCounts};
