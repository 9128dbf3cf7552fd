//! Burst compaction: runs of same-key events inside a time window collapse
//! into one counted cluster node.
//!
//! A window opens at the first event for a key and admits later events as
//! long as the span of timestamps it covers stays within `window_ms`. Once
//! `threshold` events are pending in a window they are replaced by a
//! [`ClusterNode`]; later events in the same window only bump its count.
//! Critical events are never absorbed.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::event::{Millis, PriorityClass, TelemetryEvent};

pub const DEFAULT_THRESHOLD: usize = 3;
pub const DEFAULT_WINDOW_MS: Millis = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClusterKey {
    pub source_id: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompactorConfig {
    pub threshold: usize,
    pub window_ms: Millis,
    /// Include the actor in the cluster key.
    pub key_by_actor: bool,
    /// Raw events kept per cluster for expansion; 0 keeps none.
    pub retain_raw_max: usize,
}

impl Default for CompactorConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            window_ms: DEFAULT_WINDOW_MS,
            key_by_actor: false,
            retain_raw_max: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterNode {
    pub id: u64,
    pub key: ClusterKey,
    pub count: u64,
    pub window_start: Millis,
    pub window_end: Millis,
    pub representative: TelemetryEvent,
    pub max_class: PriorityClass,
    pub raw: Vec<TelemetryEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster_id: u64,
    pub key: ClusterKey,
    pub count: u64,
    pub window_start: Millis,
    pub window_end: Millis,
    pub representative: TelemetryEvent,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub raw: Vec<TelemetryEvent>,
}

pub fn expand(node: &ClusterNode) -> ClusterSummary {
    ClusterSummary {
        cluster_id: node.id,
        key: node.key.clone(),
        count: node.count,
        window_start: node.window_start,
        window_end: node.window_end,
        representative: node.representative.clone(),
        raw: node.raw.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AbsorbOutcome {
    PassThrough(TelemetryEvent),
    Absorbed,
    ClusterFormed(ClusterNode),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Flushed {
    Cluster(ClusterNode),
    Single(TelemetryEvent, PriorityClass),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CompactorCounters {
    pub absorbed_in: u64,
    pub passed_through: u64,
    pub released_singles: u64,
    pub clustered_events: u64,
    pub clusters_formed: u64,
}

#[derive(Debug, Clone)]
struct Window {
    start: Millis,
    end: Millis,
    singles: Vec<(TelemetryEvent, PriorityClass)>,
    cluster: Option<ClusterNode>,
}

impl Window {
    fn admits(&self, ts: Millis, window_ms: Millis) -> bool {
        self.end.max(ts) - self.start.min(ts) <= window_ms
    }

    fn into_flushed(self, out: &mut Vec<Flushed>, counters: &mut CompactorCounters) {
        match self.cluster {
            Some(node) => out.push(Flushed::Cluster(node)),
            None => {
                counters.released_singles += self.singles.len() as u64;
                out.extend(self.singles.into_iter().map(|(e, c)| Flushed::Single(e, c)));
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BurstCompactor {
    config: CompactorConfig,
    open: HashMap<ClusterKey, Window>,
    closed: Vec<Window>,
    next_id: u64,
    pending_singles: u64,
    counters: CompactorCounters,
}

impl BurstCompactor {
    /// # Panics
    ///
    /// Panics if the threshold is below 1.
    pub fn new(config: CompactorConfig) -> Self {
        assert!(config.threshold >= 1, "cluster threshold must be at least 1");
        Self {
            config,
            open: HashMap::new(),
            closed: Vec::new(),
            next_id: 0,
            pending_singles: 0,
            counters: CompactorCounters::default(),
        }
    }

    pub fn config(&self) -> &CompactorConfig {
        &self.config
    }

    pub fn counters(&self) -> CompactorCounters {
        self.counters
    }

    /// Events held as singles, not yet released or clustered.
    pub fn pending_singles(&self) -> u64 {
        self.pending_singles
    }

    pub fn is_idle(&self) -> bool {
        self.open.is_empty() && self.closed.is_empty()
    }

    pub fn key_for(&self, ev: &TelemetryEvent) -> ClusterKey {
        ClusterKey {
            source_id: ev.source_id.clone(),
            kind: ev.kind.clone(),
            actor_id: self.config.key_by_actor.then(|| ev.actor_id.clone()),
        }
    }

    pub fn absorb(&mut self, ev: TelemetryEvent, cls: PriorityClass, _now: Millis) -> AbsorbOutcome {
        self.counters.absorbed_in += 1;
        if cls == PriorityClass::Critical {
            self.counters.passed_through += 1;
            return AbsorbOutcome::PassThrough(ev);
        }

        let key = self.key_for(&ev);
        let window_ms = self.config.window_ms;
        if let Some(w) = self.open.get(&key) {
            if !w.admits(ev.ts, window_ms) {
                let w = self.open.remove(&key).unwrap();
                self.pending_singles -= w.singles.len() as u64;
                self.closed.push(w);
            }
        }

        let ts = ev.ts;
        let w = self.open.entry(key.clone()).or_insert_with(|| Window {
            start: ts,
            end: ts,
            singles: Vec::new(),
            cluster: None,
        });
        w.start = w.start.min(ts);
        w.end = w.end.max(ts);

        if let Some(node) = &mut w.cluster {
            node.count += 1;
            node.window_start = w.start;
            node.window_end = w.end;
            node.max_class = node.max_class.max_urgency(cls);
            if node.raw.len() < self.config.retain_raw_max {
                node.raw.push(ev);
            }
            self.counters.clustered_events += 1;
            return AbsorbOutcome::Absorbed;
        }

        w.singles.push((ev, cls));
        self.pending_singles += 1;
        if w.singles.len() < self.config.threshold {
            return AbsorbOutcome::Absorbed;
        }

        let singles = std::mem::take(&mut w.singles);
        let count = singles.len() as u64;
        let max_class = singles
            .iter()
            .fold(PriorityClass::Informational, |acc, (_, c)| acc.max_urgency(*c));
        let representative = singles[0].0.clone();
        let raw = singles
            .into_iter()
            .map(|(e, _)| e)
            .take(self.config.retain_raw_max)
            .collect();
        let node = ClusterNode {
            id: self.next_id,
            key,
            count,
            window_start: w.start,
            window_end: w.end,
            representative,
            max_class,
            raw,
        };
        self.next_id += 1;
        w.cluster = Some(node.clone());
        self.pending_singles -= count;
        self.counters.clustered_events += count;
        self.counters.clusters_formed += 1;
        AbsorbOutcome::ClusterFormed(node)
    }

    /// Emits every window that has closed or whose span has elapsed by
    /// `now`: the cluster if one formed, otherwise the singles individually.
    pub fn flush_window(&mut self, now: Millis) -> Vec<Flushed> {
        let window_ms = self.config.window_ms;
        let mut expired: Vec<ClusterKey> = self
            .open
            .iter()
            .filter(|(_, w)| w.start + window_ms < now)
            .map(|(k, _)| k.clone())
            .collect();
        // HashMap order is arbitrary; emission order must not be.
        expired.sort_unstable_by(|a, b| {
            let (wa, wb) = (&self.open[a], &self.open[b]);
            wa.start.cmp(&wb.start).then_with(|| a.cmp(b))
        });

        let mut out = Vec::new();
        for w in self.closed.drain(..) {
            w.into_flushed(&mut out, &mut self.counters);
        }
        for key in expired {
            let w = self.open.remove(&key).unwrap();
            self.pending_singles -= w.singles.len() as u64;
            w.into_flushed(&mut out, &mut self.counters);
        }
        out
    }

    /// Emits everything regardless of window state.
    pub fn flush_all(&mut self) -> Vec<Flushed> {
        self.flush_window(Millis::MAX)
    }
}

impl Default for BurstCompactor {
    fn default() -> Self {
        Self::new(CompactorConfig::default())
    }
}
