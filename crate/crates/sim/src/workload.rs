//! Seeded synthetic telemetry with Poisson arrivals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use aiar_core::TelemetryEvent;

use crate::SimError;

/// Which synthetic population an event was drawn from. Only the critical-like
/// population counts as ground truth for recall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Population {
    CriticalLike,
    WarningLike,
    InfoLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMix {
    pub critical: f64,
    pub warning: f64,
    pub info: f64,
}

impl Default for ClassMix {
    fn default() -> Self {
        Self {
            critical: 0.01,
            warning: 0.09,
            info: 0.90,
        }
    }
}

/// Extra traffic for one (source, kind) key during a time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstSpec {
    pub start_s: f64,
    pub duration_s: f64,
    /// Total rate during the burst is `rate_eps * rate_multiplier`.
    pub rate_multiplier: f64,
    pub source_id: String,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub rate_eps: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub class_mix: ClassMix,
    #[serde(default)]
    pub burst: Option<BurstSpec>,
    pub seed: u64,
}

impl WorkloadSpec {
    pub fn new(rate_eps: f64, duration_s: f64, seed: u64) -> Self {
        Self {
            rate_eps,
            duration_s,
            class_mix: ClassMix::default(),
            burst: None,
            seed,
        }
    }

    pub fn with_rate(&self, rate_eps: f64) -> Self {
        Self {
            rate_eps,
            ..self.clone()
        }
    }

    pub fn duration_us(&self) -> u64 {
        (self.duration_s * 1e6).round() as u64
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidSpec(m));
        if !(self.rate_eps > 0.0 && self.rate_eps.is_finite()) {
            return bad(format!("rate_eps must be positive, got {}", self.rate_eps));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration_s must be positive, got {}", self.duration_s));
        }
        let m = self.class_mix;
        if [m.critical, m.warning, m.info].iter().any(|p| !(*p >= 0.0)) {
            return bad("class_mix proportions must be non-negative".into());
        }
        if ((m.critical + m.warning + m.info) - 1.0).abs() > 1e-9 {
            return bad("class_mix proportions must sum to 1".into());
        }
        if let Some(b) = &self.burst {
            if !(b.rate_multiplier >= 1.0 && b.rate_multiplier.is_finite()) {
                return bad("burst rate_multiplier must be at least 1".into());
            }
            if !(b.start_s >= 0.0 && b.duration_s >= 0.0) {
                return bad("burst window must be non-negative".into());
            }
        }
        Ok(())
    }
}

struct Profile {
    sources: u32,
    source_prefix: &'static str,
    actors: u32,
    actor_prefix: &'static str,
    kinds: &'static [&'static str],
    severity: (u8, u8),
    reputation: (f64, f64),
}

const CRITICAL_LIKE: Profile = Profile {
    sources: 16,
    source_prefix: "10.66",
    actors: 32,
    actor_prefix: "svc",
    kinds: &["ioc_match", "malware_detected", "privilege_escalation"],
    severity: (8, 10),
    reputation: (0.8, 1.0),
};

// Large actor spaces keep per-actor frequency low, as it is for real
// background traffic.
const WARNING_LIKE: Profile = Profile {
    sources: 128,
    source_prefix: "10.77",
    actors: 100_000,
    actor_prefix: "user",
    kinds: &["login_failure", "port_scan", "policy_violation"],
    severity: (4, 7),
    reputation: (0.3, 0.8),
};

const INFO_LIKE: Profile = Profile {
    sources: 512,
    source_prefix: "10.88",
    actors: 500_000,
    actor_prefix: "host",
    kinds: &["dns_query", "http_request", "auth_success", "netflow"],
    severity: (0, 3),
    reputation: (0.0, 0.3),
};

fn profile(p: Population) -> &'static Profile {
    match p {
        Population::CriticalLike => &CRITICAL_LIKE,
        Population::WarningLike => &WARNING_LIKE,
        Population::InfoLike => &INFO_LIKE,
    }
}

/// Source address of the `n`th host of a population.
pub fn source_address(p: Population, n: u32) -> String {
    let prof = profile(p);
    let n = n % prof.sources;
    format!("{}.{}.{}", prof.source_prefix, n / 256, n % 256)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arrival {
    /// Microseconds since the start of the run.
    pub at_us: u64,
    pub population: Population,
    pub event: TelemetryEvent,
}

/// Lazy event stream. Arrivals are ordered by time.
pub struct EventStream {
    rng: ChaCha8Rng,
    spec: WorkloadSpec,
    t_s: f64,
    next_id: u64,
}

/// Builds the stream for `spec`, which must already be validated.
pub fn generate_stream(spec: &WorkloadSpec) -> EventStream {
    EventStream {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        spec: spec.clone(),
        t_s: 0.0,
        next_id: 0,
    }
}

impl EventStream {
    // Burst window as [start, end) together with the extra rate inside it.
    fn burst_window(&self) -> Option<(f64, f64, f64)> {
        self.spec.burst.as_ref().map(|b| {
            (
                b.start_s,
                b.start_s + b.duration_s,
                self.spec.rate_eps * (b.rate_multiplier - 1.0),
            )
        })
    }

    fn extra_rate_at(&self, t: f64) -> f64 {
        match self.burst_window() {
            Some((s, e, extra)) if t >= s && t < e => extra,
            _ => 0.0,
        }
    }

    // Next point where the total rate changes, if any lies ahead of `t`.
    fn next_boundary(&self, t: f64) -> Option<f64> {
        let (s, e, _) = self.burst_window()?;
        [s, e].into_iter().find(|&b| b > t)
    }

    fn draw_event(&mut self, population: Population, ts: u64, key: Option<(String, String)>) -> TelemetryEvent {
        let prof = profile(population);
        let rng = &mut self.rng;
        let (source_id, kind) = key.unwrap_or_else(|| {
            (
                source_address(population, rng.random_range(0..prof.sources)),
                prof.kinds[rng.random_range(0..prof.kinds.len())].to_string(),
            )
        });
        let actor_id = format!("{}-{}", prof.actor_prefix, rng.random_range(0..prof.actors));
        let severity = rng.random_range(prof.severity.0..=prof.severity.1);
        let reputation = rng.random_range(prof.reputation.0..=prof.reputation.1);
        let event_id = format!("ev-{:09}", self.next_id);
        self.next_id += 1;
        TelemetryEvent {
            message: format!("{kind} {source_id} -> {actor_id}"),
            event_id,
            ts,
            severity,
            source_id,
            actor_id,
            kind,
            reputation,
        }
    }
}

impl Iterator for EventStream {
    type Item = Arrival;

    fn next(&mut self) -> Option<Arrival> {
        let end = self.spec.duration_s;
        loop {
            let rate = self.spec.rate_eps + self.extra_rate_at(self.t_s);
            let gap = Exp::new(rate).expect("rate is positive").sample(&mut self.rng);
            let candidate = self.t_s + gap;
            // Memorylessness lets us restart the draw at a rate change.
            if let Some(b) = self.next_boundary(self.t_s) {
                if candidate >= b {
                    self.t_s = b;
                    if b >= end {
                        return None;
                    }
                    continue;
                }
            }
            if candidate >= end {
                self.t_s = end;
                return None;
            }
            self.t_s = candidate;
            let at_us = (candidate * 1e6) as u64;
            let ts = at_us / 1_000;

            let extra = self.extra_rate_at(candidate);
            if extra > 0.0 && self.rng.random::<f64>() < extra / rate {
                let b = self.spec.burst.as_ref().unwrap();
                let key = (b.source_id.clone(), b.kind.clone());
                let event = self.draw_event(Population::InfoLike, ts, Some(key));
                return Some(Arrival {
                    at_us,
                    population: Population::InfoLike,
                    event,
                });
            }

            let u: f64 = self.rng.random();
            let mix = self.spec.class_mix;
            let population = if u < mix.critical {
                Population::CriticalLike
            } else if u < mix.critical + mix.warning {
                Population::WarningLike
            } else {
                Population::InfoLike
            };
            let event = self.draw_event(population, ts, None);
            return Some(Arrival {
                at_us,
                population,
                event,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_are_valid_and_ordered() {
        let spec = WorkloadSpec::new(2_000.0, 2.0, 3);
        let mut last = 0;
        for a in generate_stream(&spec) {
            a.event.validate().unwrap();
            assert!(a.at_us >= last);
            assert!(a.at_us < 2_000_000);
            last = a.at_us;
            let prof = profile(a.population);
            assert!((prof.severity.0..=prof.severity.1).contains(&a.event.severity));
        }
    }

    #[test]
    fn burst_adds_keyed_traffic() {
        let mut spec = WorkloadSpec::new(100.0, 10.0, 5);
        spec.burst = Some(BurstSpec {
            start_s: 2.0,
            duration_s: 1.0,
            rate_multiplier: 20.0,
            source_id: "10.21.55.120".into(),
            kind: "login_failure".into(),
        });
        spec.validate().unwrap();
        let keyed: Vec<_> = generate_stream(&spec)
            .filter(|a| a.event.source_id == "10.21.55.120")
            .collect();
        // 1900 expected, sd about 44.
        assert!((1_700..2_100).contains(&keyed.len()), "{}", keyed.len());
        assert!(keyed.iter().all(|a| (2_000_000..3_000_000).contains(&a.at_us)));
    }

    #[test]
    fn spec_validation() {
        assert!(WorkloadSpec::new(0.0, 1.0, 0).validate().is_err());
        assert!(WorkloadSpec::new(1.0, 0.0, 0).validate().is_err());
        let mut s = WorkloadSpec::new(1.0, 1.0, 0);
        s.class_mix.info = 0.5;
        assert!(s.validate().is_err());
    }
}
