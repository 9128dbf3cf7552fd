//! Telemetry events and the priority classes assigned to them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Milliseconds on the pipeline clock. Monotone within a run.
pub type Millis = u64;

pub const MAX_SEVERITY: u8 = 10;

/// One security event as it arrives from the telemetry stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryEvent {
    pub event_id: String,
    pub ts: Millis,
    /// 0..=10
    pub severity: u8,
    pub source_id: String,
    pub actor_id: String,
    pub kind: String,
    /// 0.0..=1.0, 1.0 is the worst reputation.
    pub reputation: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvalidEvent {
    #[error("severity {0} outside 0..=10")]
    Severity(u8),
    #[error("reputation {0} outside [0, 1]")]
    Reputation(f64),
}

impl TelemetryEvent {
    pub fn validate(&self) -> Result<(), InvalidEvent> {
        if self.severity > MAX_SEVERITY {
            return Err(InvalidEvent::Severity(self.severity));
        }
        // NaN fails the range check too.
        if !(0.0..=1.0).contains(&self.reputation) {
            return Err(InvalidEvent::Reputation(self.reputation));
        }
        Ok(())
    }
}

/// Scorer output. The numeric codes are fixed and double as the render
/// ordering key: lower code renders first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum PriorityClass {
    Critical = 0,
    Warning = 1,
    Informational = 2,
}

impl PriorityClass {
    pub const ALL: [PriorityClass; 3] = [
        PriorityClass::Critical,
        PriorityClass::Warning,
        PriorityClass::Informational,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(PriorityClass::Critical),
            1 => Some(PriorityClass::Warning),
            2 => Some(PriorityClass::Informational),
            _ => None,
        }
    }

    /// The more urgent of two classes.
    pub fn max_urgency(self, other: Self) -> Self {
        self.min(other)
    }
}

#[cfg(test)]
pub(crate) fn test_event(id: &str, ts: Millis) -> TelemetryEvent {
    TelemetryEvent {
        event_id: id.to_string(),
        ts,
        severity: 5,
        source_id: "10.0.0.1".to_string(),
        actor_id: "a1".to_string(),
        kind: "login_failure".to_string(),
        reputation: 0.5,
        message: "test".to_string(),
    }
}
