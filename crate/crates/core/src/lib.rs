//! Adaptive rendering for high-rate security telemetry.
//!
//! Events flow through a bounded buffer, get a priority class from a small
//! logistic model, are folded into clusters when a burst hits, and reach the
//! display as render commands at a cadence that follows the analyst.

pub mod buffer;
pub mod compactor;
pub mod config;
pub mod event;
pub mod orchestrator;
pub mod pipeline;
pub mod scorer;
pub mod sink;

pub use buffer::{BufferedEvent, EnqueueOutcome, RingBuffer};
pub use compactor::{BurstCompactor, ClusterNode};
pub use config::{ConfigError, PipelineConfig};
pub use event::{InvalidEvent, Millis, PriorityClass, TelemetryEvent};
pub use orchestrator::{AnalystState, Orchestrator, RenderPolicy, SystemSignals};
pub use pipeline::{CycleReport, Ledger, Pipeline};
pub use scorer::{InvestigationContext, Scorer, ScorerModel};
pub use sink::{CommandBody, CommandTransport, RenderCommand, RenderSink};
