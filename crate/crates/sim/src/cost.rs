//! Simulated render cost. Stands in for a browser's layout and paint time.

use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    pub per_command_us: f64,
    pub per_score_us: f64,
    pub cpu_capacity_us_per_s: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            per_command_us: 100.0,
            per_score_us: 5.0,
            cpu_capacity_us_per_s: 1_000_000.0,
        }
    }
}

impl CostModel {
    pub fn with_cores(cores: f64) -> Self {
        Self {
            cpu_capacity_us_per_s: 1_000_000.0 * cores,
            ..Self::default()
        }
    }

    /// Zero unit costs are allowed; capacity must be positive.
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !ok(self.per_command_us) || !ok(self.per_score_us) {
            return Err(SimError::InvalidCost("unit costs must be finite and non-negative".into()));
        }
        if !(self.cpu_capacity_us_per_s > 0.0 && self.cpu_capacity_us_per_s.is_finite()) {
            return Err(SimError::InvalidCost("cpu capacity must be positive".into()));
        }
        Ok(())
    }

    pub fn work_us(&self, commands: usize, scored: u64) -> u64 {
        (commands as f64 * self.per_command_us + scored as f64 * self.per_score_us).round() as u64
    }
}
