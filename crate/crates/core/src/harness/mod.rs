//! CLI plumbing, experiment orchestration and the verification suite.

pub mod acceptance;
pub mod config;
pub mod metrics;
pub mod oracles;
pub mod run;

pub use config::{ExperimentKind, RunConfig};
pub use metrics::MetricsRecord;
