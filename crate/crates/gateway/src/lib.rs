//! Connects the pipeline to its inputs and to dashboards.

pub mod hub;
pub mod run;
pub mod serve;
pub mod settings;
pub mod wire;
