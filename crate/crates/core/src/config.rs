//! Flat, dotted-key configuration for the whole pipeline.

use thiserror::Error;

use crate::buffer::{DEFAULT_CAPACITY, DEFAULT_TTL_MS};
use crate::compactor::CompactorConfig;
use crate::event::Millis;
use crate::orchestrator::PolicyConfig;
use crate::scorer::{ScorerModel, DEFAULT_ACTOR_WINDOW_MS, DEFAULT_FREQUENCY_NORM};
use crate::sink::{SinkConfig, INFORMATIONAL_OPACITY_BAND};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub buffer_capacity: usize,
    pub ttl_ms: Millis,
    pub model: ScorerModel,
    pub actor_window_ms: Millis,
    pub frequency_norm: f64,
    pub compactor: CompactorConfig,
    pub policy: PolicyConfig,
    pub sink: SinkConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            buffer_capacity: DEFAULT_CAPACITY,
            ttl_ms: DEFAULT_TTL_MS,
            model: ScorerModel::default(),
            actor_window_ms: DEFAULT_ACTOR_WINDOW_MS,
            frequency_norm: DEFAULT_FREQUENCY_NORM,
            compactor: CompactorConfig::default(),
            policy: PolicyConfig::default(),
            sink: SinkConfig::default(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "buffer.capacity",
    "buffer.ttl_ms",
    "scorer.weights",
    "scorer.bias",
    "scorer.critical_min",
    "scorer.warning_min",
    "scorer.actor_window_ms",
    "scorer.frequency_norm",
    "compactor.threshold",
    "compactor.window_ms",
    "compactor.key_fields",
    "compactor.retain_raw_max",
    "policy.interval_idle_ms",
    "policy.interval_interacting_ms",
    "policy.interval_detached_ms",
    "policy.budget",
    "policy.cpu_strain_threshold",
    "policy.burst_threshold",
    "policy.scroll_threshold",
    "policy.detach_ms",
    "policy.strain_multiplier",
    "sink.informational_opacity",
    "sink.pulse_duration_ms",
    "sink.message_max_chars",
    "sink.retry_capacity",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn invalid(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

impl PipelineConfig {
    /// Applies one `key=value` setting. Lists are comma separated.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "buffer.capacity" => self.buffer_capacity = parse(key, value)?,
            "buffer.ttl_ms" => self.ttl_ms = parse(key, value)?,
            "scorer.weights" => {
                let ws: Vec<f64> = value
                    .trim_matches(|c| c == '[' || c == ']')
                    .split(',')
                    .map(|w| parse(key, w))
                    .collect::<Result<_, _>>()?;
                self.model.weights = ws
                    .try_into()
                    .map_err(|_| invalid(key, value, "expected exactly 4 weights"))?;
            }
            "scorer.bias" => self.model.bias = parse(key, value)?,
            "scorer.critical_min" => self.model.critical_min = parse(key, value)?,
            "scorer.warning_min" => self.model.warning_min = parse(key, value)?,
            "scorer.actor_window_ms" => self.actor_window_ms = parse(key, value)?,
            "scorer.frequency_norm" => self.frequency_norm = parse(key, value)?,
            "compactor.threshold" => self.compactor.threshold = parse(key, value)?,
            "compactor.window_ms" => self.compactor.window_ms = parse(key, value)?,
            "compactor.key_fields" => {
                let mut fields: Vec<&str> = value
                    .trim_matches(|c| c == '[' || c == ']')
                    .split(',')
                    .map(|f| f.trim().trim_matches('"'))
                    .collect();
                fields.sort_unstable();
                self.compactor.key_by_actor = match fields.as_slice() {
                    ["kind", "source"] => false,
                    ["actor", "kind", "source"] => true,
                    _ => {
                        return Err(invalid(
                            key,
                            value,
                            "expected `source,kind` or `source,kind,actor`",
                        ))
                    }
                };
            }
            "compactor.retain_raw_max" => self.compactor.retain_raw_max = parse(key, value)?,
            "policy.interval_idle_ms" => self.policy.interval_idle_ms = parse(key, value)?,
            "policy.interval_interacting_ms" => self.policy.interval_interacting_ms = parse(key, value)?,
            "policy.interval_detached_ms" => self.policy.interval_detached_ms = parse(key, value)?,
            "policy.budget" => self.policy.budget = parse(key, value)?,
            "policy.cpu_strain_threshold" => self.policy.cpu_strain_threshold = parse(key, value)?,
            "policy.burst_threshold" => self.policy.burst_threshold = parse(key, value)?,
            "policy.scroll_threshold" => self.policy.scroll_threshold = parse(key, value)?,
            "policy.detach_ms" => self.policy.detach_ms = parse(key, value)?,
            "policy.strain_multiplier" => self.policy.strain_multiplier = parse(key, value)?,
            "sink.informational_opacity" => self.sink.informational_opacity = parse(key, value)?,
            "sink.pulse_duration_ms" => self.sink.pulse_duration_ms = parse(key, value)?,
            "sink.message_max_chars" => self.sink.message_max_chars = parse(key, value)?,
            "sink.retry_capacity" => self.sink.retry_capacity = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Parses `key=value`.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| ConfigError::Invalid(format!("expected key=value, got `{pair}`")))?;
        self.set(k.trim(), v)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.buffer_capacity == 0 {
            return fail("buffer.capacity must be positive");
        }
        if self.ttl_ms == 0 {
            return fail("buffer.ttl_ms must be positive");
        }
        self.model
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.actor_window_ms == 0 {
            return fail("scorer.actor_window_ms must be positive");
        }
        if !(self.frequency_norm > 0.0 && self.frequency_norm.is_finite()) {
            return fail("scorer.frequency_norm must be positive");
        }
        if self.compactor.threshold == 0 {
            return fail("compactor.threshold must be at least 1");
        }
        if self.compactor.window_ms == 0 {
            return fail("compactor.window_ms must be positive");
        }
        let p = &self.policy;
        if p.budget == 0 {
            return fail("policy.budget must be positive");
        }
        if p.interval_idle_ms == 0 || p.interval_interacting_ms == 0 || p.interval_detached_ms == 0 {
            return fail("policy intervals must be positive");
        }
        if !(250..=500).contains(&p.interval_interacting_ms) {
            return fail("policy.interval_interacting_ms must lie in 250..=500");
        }
        if p.interval_detached_ms < 1_000 {
            return fail("policy.interval_detached_ms must be at least 1000");
        }
        if !(p.strain_multiplier >= 1.0 && p.strain_multiplier.is_finite()) {
            return fail("policy.strain_multiplier must be at least 1");
        }
        for (name, v) in [
            ("policy.cpu_strain_threshold", p.cpu_strain_threshold),
            ("policy.burst_threshold", p.burst_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::Invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(p.scroll_threshold >= 0.0) {
            return fail("policy.scroll_threshold must be non-negative");
        }
        let (lo, hi) = INFORMATIONAL_OPACITY_BAND;
        if !(lo..=hi).contains(&self.sink.informational_opacity) {
            return Err(ConfigError::Invalid(format!(
                "sink.informational_opacity must lie in [{lo}, {hi}]"
            )));
        }
        if self.sink.pulse_duration_ms == 0 {
            return fail("sink.pulse_duration_ms must be positive");
        }
        Ok(())
    }
}
