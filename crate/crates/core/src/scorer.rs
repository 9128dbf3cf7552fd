//! Relevance scoring: a fixed logistic model over four event features.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{Millis, PriorityClass, TelemetryEvent, MAX_SEVERITY};

pub const DEFAULT_WEIGHTS: [f64; 4] = [2.5, 1.5, 1.0, 2.0];
pub const DEFAULT_BIAS: f64 = -2.0;
pub const DEFAULT_CRITICAL_MIN: f64 = 0.8;
pub const DEFAULT_WARNING_MIN: f64 = 0.4;
pub const DEFAULT_ACTOR_WINDOW_MS: Millis = 60_000;
pub const DEFAULT_FREQUENCY_NORM: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub severity_level: f64,
    pub source_reputation_score: f64,
    pub actor_frequency_count: f64,
    pub user_interaction_context_match: f64,
}

impl FeatureVector {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.severity_level,
            self.source_reputation_score,
            self.actor_frequency_count,
            self.user_interaction_context_match,
        ]
    }

    pub fn from_array(x: [f64; 4]) -> Self {
        Self {
            severity_level: x[0],
            source_reputation_score: x[1],
            actor_frequency_count: x[2],
            user_interaction_context_match: x[3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("thresholds must satisfy 0 < warning_min ({warning_min}) < critical_min ({critical_min}) < 1")]
    Thresholds { warning_min: f64, critical_min: f64 },
    #[error("model parameter {0} is not finite")]
    NonFinite(&'static str),
}

/// Logistic model. Immutable once validated; share it freely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerModel {
    pub weights: [f64; 4],
    pub bias: f64,
    pub critical_min: f64,
    pub warning_min: f64,
}

impl Default for ScorerModel {
    fn default() -> Self {
        Self {
            weights: DEFAULT_WEIGHTS,
            bias: DEFAULT_BIAS,
            critical_min: DEFAULT_CRITICAL_MIN,
            warning_min: DEFAULT_WARNING_MIN,
        }
    }
}

impl ScorerModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(ModelError::NonFinite("weights"));
        }
        if !self.bias.is_finite() {
            return Err(ModelError::NonFinite("bias"));
        }
        let ordered = 0.0 < self.warning_min
            && self.warning_min < self.critical_min
            && self.critical_min < 1.0;
        if !ordered {
            return Err(ModelError::Thresholds {
                warning_min: self.warning_min,
                critical_min: self.critical_min,
            });
        }
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn score_event(model: &ScorerModel, x: &FeatureVector) -> f64 {
    let z = model
        .weights
        .iter()
        .zip(x.as_array())
        .fold(model.bias, |acc, (w, xi)| acc + w * xi);
    sigmoid(z)
}

pub fn classify(model: &ScorerModel, score: f64) -> PriorityClass {
    if score >= model.critical_min {
        PriorityClass::Critical
    } else if score >= model.warning_min {
        PriorityClass::Warning
    } else {
        PriorityClass::Informational
    }
}

/// Sliding-window recurrence counts per actor.
#[derive(Debug, Clone)]
pub struct ActorFrequencyTracker {
    window_ms: Millis,
    per_actor: HashMap<String, VecDeque<Millis>>,
    latest: Millis,
    last_sweep: Millis,
}

impl ActorFrequencyTracker {
    /// # Panics
    ///
    /// Panics if `window_ms` is 0.
    pub fn new(window_ms: Millis) -> Self {
        assert!(window_ms > 0, "actor window must be positive");
        Self {
            window_ms,
            per_actor: HashMap::new(),
            latest: 0,
            last_sweep: 0,
        }
    }

    pub fn window_ms(&self) -> Millis {
        self.window_ms
    }

    /// Latest timestamp recorded so far.
    pub fn latest(&self) -> Millis {
        self.latest
    }

    pub fn tracked_actors(&self) -> usize {
        self.per_actor.len()
    }

    /// Records one occurrence. Timestamps earlier than the latest recorded
    /// one are clamped forward so the per-actor queues stay sorted.
    pub fn record_actor(&mut self, actor_id: &str, ts: Millis) {
        let ts = ts.max(self.latest);
        self.latest = ts;
        // Entries at or before `horizon` have left the window.
        let horizon = ts.checked_sub(self.window_ms);
        match self.per_actor.get_mut(actor_id) {
            Some(q) => {
                if let Some(h) = horizon {
                    while q.front().is_some_and(|&t| t <= h) {
                        q.pop_front();
                    }
                }
                q.push_back(ts);
            }
            None => {
                self.per_actor.insert(actor_id.to_string(), VecDeque::from([ts]));
            }
        }
        if ts - self.last_sweep >= self.window_ms {
            self.sweep();
        }
    }

    fn sweep(&mut self) {
        self.last_sweep = self.latest;
        if self.latest < self.window_ms {
            return;
        }
        let horizon = self.latest - self.window_ms;
        self.per_actor.retain(|_, q| {
            while q.front().is_some_and(|&t| t <= horizon) {
                q.pop_front();
            }
            !q.is_empty()
        });
    }

    /// Number of recorded occurrences in `(now - window, now]`.
    pub fn count(&self, actor_id: &str, now: Millis) -> usize {
        let Some(q) = self.per_actor.get(actor_id) else {
            return 0;
        };
        let upto_now = q.partition_point(|&t| t <= now);
        let expired = if now >= self.window_ms {
            q.partition_point(|&t| t <= now - self.window_ms)
        } else {
            0
        };
        upto_now.saturating_sub(expired)
    }
}

impl Default for ActorFrequencyTracker {
    fn default() -> Self {
        Self::new(DEFAULT_ACTOR_WINDOW_MS)
    }
}

/// What the analyst is currently looking at. Empty sets mean no active
/// investigation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvestigationContext {
    #[serde(default)]
    pub watched_sources: BTreeSet<String>,
    #[serde(default)]
    pub watched_actors: BTreeSet<String>,
    #[serde(default)]
    pub watched_kinds: BTreeSet<String>,
}

impl InvestigationContext {
    pub fn with_source(source: impl Into<String>) -> Self {
        let mut ctx = Self::default();
        ctx.watched_sources.insert(source.into());
        ctx
    }

    pub fn is_empty(&self) -> bool {
        self.watched_sources.is_empty()
            && self.watched_actors.is_empty()
            && self.watched_kinds.is_empty()
    }

    pub fn matches(&self, source_id: &str, actor_id: &str, kind: &str) -> bool {
        self.watched_sources.contains(source_id)
            || self.watched_actors.contains(actor_id)
            || self.watched_kinds.contains(kind)
    }

    pub fn matches_event(&self, ev: &TelemetryEvent) -> bool {
        self.matches(&ev.source_id, &ev.actor_id, &ev.kind)
    }
}

pub fn extract_features(
    ev: &TelemetryEvent,
    tracker: &ActorFrequencyTracker,
    ctx: &InvestigationContext,
    now: Millis,
    frequency_norm: f64,
) -> FeatureVector {
    let freq = tracker.count(&ev.actor_id, now) as f64 / frequency_norm;
    FeatureVector {
        severity_level: f64::from(ev.severity) / f64::from(MAX_SEVERITY),
        source_reputation_score: ev.reputation,
        actor_frequency_count: freq.min(1.0),
        user_interaction_context_match: if ctx.matches_event(ev) { 1.0 } else { 0.0 },
    }
}

/// The scoring context: model, actor history and the current
/// investigation, owned by whichever execution context does the scoring.
#[derive(Debug, Clone)]
pub struct Scorer {
    model: ScorerModel,
    frequency_norm: f64,
    tracker: ActorFrequencyTracker,
    context: InvestigationContext,
    scored: u64,
}

impl Scorer {
    pub fn new(model: ScorerModel, actor_window_ms: Millis, frequency_norm: f64) -> Self {
        Self {
            model,
            frequency_norm,
            tracker: ActorFrequencyTracker::new(actor_window_ms),
            context: InvestigationContext::default(),
            scored: 0,
        }
    }

    pub fn model(&self) -> &ScorerModel {
        &self.model
    }

    pub fn tracker(&self) -> &ActorFrequencyTracker {
        &self.tracker
    }

    pub fn set_context(&mut self, ctx: InvestigationContext) {
        self.context = ctx;
    }

    pub fn context(&self) -> &InvestigationContext {
        &self.context
    }

    /// Events scored so far.
    pub fn scored(&self) -> u64 {
        self.scored
    }

    /// Scores one event against the actor history that precedes it, then
    /// records the event's actor.
    pub fn score(&mut self, ev: &TelemetryEvent) -> (f64, PriorityClass) {
        let now = ev.ts.max(self.tracker.latest());
        let x = extract_features(ev, &self.tracker, &self.context, now, self.frequency_norm);
        let s = score_event(&self.model, &x);
        self.tracker.record_actor(&ev.actor_id, now);
        self.scored += 1;
        (s, classify(&self.model, s))
    }
}

impl Default for Scorer {
    fn default() -> Self {
        Self::new(
            ScorerModel::default(),
            DEFAULT_ACTOR_WINDOW_MS,
            DEFAULT_FREQUENCY_NORM,
        )
    }
}
