//! Timed analyst behaviour that replaces a human at the dashboard.

use serde::{Deserialize, Serialize};

use aiar_core::event::Millis;
use aiar_core::{InvestigationContext, SystemSignals};

use crate::workload::{source_address, Population};
use crate::SimError;

/// Signals that hold from `at_ms` until the next step. Interaction age keeps
/// growing from `last_interaction_age_ms` while the step is in force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptStep {
    pub at_ms: Millis,
    #[serde(default)]
    pub scroll_velocity: f64,
    #[serde(default)]
    pub selection_active: bool,
    #[serde(default)]
    pub selection_context: Option<InvestigationContext>,
    #[serde(default)]
    pub last_interaction_age_ms: Millis,
}

impl ScriptStep {
    fn at(at_ms: Millis) -> Self {
        Self {
            at_ms,
            scroll_velocity: 0.0,
            selection_active: false,
            selection_context: None,
            last_interaction_age_ms: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalystScript {
    pub name: String,
    /// The script is defined on `[0, end_ms]`.
    pub end_ms: Millis,
    pub steps: Vec<ScriptStep>,
}

pub const BUILTIN_SCRIPTS: &[&str] = &["idle", "scrolling", "investigating"];

impl AnalystScript {
    /// Watching the feed without touching it. A glance every 5 s keeps the
    /// analyst from being treated as away.
    pub fn idle(end_ms: Millis) -> Self {
        let steps = (0..=end_ms / 5_000)
            .map(|i| ScriptStep {
                last_interaction_age_ms: 2_000,
                ..ScriptStep::at(i * 5_000)
            })
            .collect();
        Self {
            name: "idle".into(),
            end_ms,
            steps,
        }
    }

    /// Two seconds of fast scrolling followed by three still seconds, repeated.
    pub fn scrolling(end_ms: Millis) -> Self {
        let mut steps = Vec::new();
        for i in 0..=end_ms / 5_000 {
            let t = i * 5_000;
            steps.push(ScriptStep {
                scroll_velocity: 120.0,
                ..ScriptStep::at(t)
            });
            steps.push(ScriptStep::at(t + 2_000));
        }
        Self {
            name: "scrolling".into(),
            end_ms,
            steps,
        }
    }

    /// One critical-like source stays selected for the whole run.
    pub fn investigating(end_ms: Millis) -> Self {
        let ctx = InvestigationContext::with_source(source_address(Population::CriticalLike, 0));
        let steps = (0..=end_ms / 5_000)
            .map(|i| ScriptStep {
                selection_active: true,
                selection_context: Some(ctx.clone()),
                ..ScriptStep::at(i * 5_000)
            })
            .collect();
        Self {
            name: "investigating".into(),
            end_ms,
            steps,
        }
    }

    pub fn builtin(name: &str, end_ms: Millis) -> Option<Self> {
        match name {
            "idle" => Some(Self::idle(end_ms)),
            "scrolling" => Some(Self::scrolling(end_ms)),
            "investigating" => Some(Self::investigating(end_ms)),
            _ => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Self = serde_json::from_str(text).map_err(|e| SimError::InvalidScript(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        match self.steps.first() {
            Some(s) if s.at_ms == 0 => {}
            _ => return Err(SimError::InvalidScript("first step must be at 0 ms".into())),
        }
        if self.steps.windows(2).any(|w| w[0].at_ms > w[1].at_ms) {
            return Err(SimError::InvalidScript("steps must be in time order".into()));
        }
        Ok(())
    }

    /// Errors if the script ends before `duration_ms`.
    pub fn check_covers(&self, duration_ms: Millis) -> Result<(), SimError> {
        self.validate()?;
        if self.end_ms < duration_ms {
            return Err(SimError::ScriptTooShort {
                end_ms: self.end_ms,
                duration_ms,
            });
        }
        Ok(())
    }

    /// Signals at `t_ms`. Past `end_ms` the last step stays in force.
    /// Load and queue fill are left at zero for the caller to fill in.
    pub fn signals_at(&self, t_ms: Millis) -> SystemSignals {
        let i = self.steps.partition_point(|s| s.at_ms <= t_ms).saturating_sub(1);
        let s = &self.steps[i];
        SystemSignals {
            cpu_load: 0.0,
            scroll_velocity: s.scroll_velocity,
            selection_active: s.selection_active,
            selection_context: s.selection_context.clone(),
            queue_fill_ratio: 0.0,
            last_interaction_age_ms: s.last_interaction_age_ms + (t_ms - s.at_ms),
        }
    }
}
