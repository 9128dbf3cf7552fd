//! Headless, seeded simulator for comparing render strategies under load.
//!
//! A generated trace is fed to one strategy on a virtual clock. Each cycle is
//! charged simulated work from a cost model, and the run is summarised as a
//! [`MetricsReport`].

use thiserror::Error;

pub mod compare;
pub mod cost;
pub mod run;
pub mod script;
pub mod search;
pub mod workload;

pub use compare::{compare_strategies, render_table};
pub use cost::CostModel;
pub use run::{run_simulation, simulate, MetricsReport, SimOptions, SimRun, Strategy};
pub use script::AnalystScript;
pub use search::{find_max_sustainable, Criteria, SearchBounds, SearchOutcome};
pub use workload::{generate_stream, Population, WorkloadSpec};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid workload: {0}")]
    InvalidSpec(String),
    #[error("invalid cost model: {0}")]
    InvalidCost(String),
    #[error("invalid analyst script: {0}")]
    InvalidScript(String),
    #[error("analyst script ends at {end_ms} ms but the run lasts {duration_ms} ms")]
    ScriptTooShort { end_ms: u64, duration_ms: u64 },
    #[error("unknown strategy `{0}` (expected baseline, fixed or ai-ar)")]
    UnknownStrategy(String),
    #[error(transparent)]
    Config(#[from] aiar_core::ConfigError),
}
