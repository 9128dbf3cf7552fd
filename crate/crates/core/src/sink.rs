//! Turns planned renderables into UI-neutral render commands and hands
//! them to a transport.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compactor::ClusterNode;
use crate::event::{Millis, PriorityClass, TelemetryEvent};
use crate::orchestrator::{CyclePlan, Renderable};

pub const DEFAULT_INFORMATIONAL_OPACITY: f64 = 0.35;
pub const INFORMATIONAL_OPACITY_BAND: (f64, f64) = (0.30, 0.40);
pub const DEFAULT_PULSE_MS: Millis = 3_000;
pub const DEFAULT_MESSAGE_MAX_CHARS: usize = 512;
pub const DEFAULT_RETRY_CAPACITY: usize = 4_096;

const ELLIPSIS: char = '…';

#[derive(Debug, Clone, PartialEq)]
pub struct SinkConfig {
    pub informational_opacity: f64,
    pub pulse_duration_ms: Millis,
    pub message_max_chars: usize,
    pub retry_capacity: usize,
}

impl Default for SinkConfig {
    fn default() -> Self {
        Self {
            informational_opacity: DEFAULT_INFORMATIONAL_OPACITY,
            pulse_duration_ms: DEFAULT_PULSE_MS,
            message_max_chars: DEFAULT_MESSAGE_MAX_CHARS,
            retry_capacity: DEFAULT_RETRY_CAPACITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisualStyle {
    pub opacity: f64,
    pub pulse_highlight: bool,
    pub pulse_duration_ms: Millis,
}

pub fn style_for(cfg: &SinkConfig, cls: PriorityClass) -> VisualStyle {
    match cls {
        PriorityClass::Critical => VisualStyle {
            opacity: 1.0,
            pulse_highlight: true,
            pulse_duration_ms: cfg.pulse_duration_ms,
        },
        PriorityClass::Warning => VisualStyle {
            opacity: 1.0,
            pulse_highlight: false,
            pulse_duration_ms: cfg.pulse_duration_ms,
        },
        PriorityClass::Informational => VisualStyle {
            opacity: cfg.informational_opacity,
            pulse_highlight: false,
            pulse_duration_ms: cfg.pulse_duration_ms,
        },
    }
}

/// Style for events rendered without a priority (strategies that do not
/// score).
pub fn neutral_style(cfg: &SinkConfig) -> VisualStyle {
    style_for(cfg, PriorityClass::Warning)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSummary {
    pub event_id: String,
    pub ts: Millis,
    pub severity: u8,
    pub source_id: String,
    pub actor_id: String,
    pub kind: String,
    pub reputation: f64,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<PriorityClass>,
}

impl EventSummary {
    pub fn new(ev: &TelemetryEvent, class: Option<PriorityClass>, max_chars: usize) -> Self {
        Self {
            event_id: ev.event_id.clone(),
            ts: ev.ts,
            severity: ev.severity,
            source_id: ev.source_id.clone(),
            actor_id: ev.actor_id.clone(),
            kind: ev.kind.clone(),
            reputation: ev.reputation,
            message: truncate_message(&ev.message, max_chars),
            class,
        }
    }
}

pub fn truncate_message(msg: &str, max_chars: usize) -> String {
    match msg.char_indices().nth(max_chars) {
        None => msg.to_string(),
        Some((cut, _)) => {
            let mut s = msg[..cut].to_string();
            s.push(ELLIPSIS);
            s
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterView {
    pub cluster_id: u64,
    pub source_id: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor_id: Option<String>,
    pub count: u64,
    pub window_start: Millis,
    pub window_end: Millis,
    pub class: PriorityClass,
    pub representative: EventSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpireTarget {
    pub target_seq: u64,
    pub event_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum CommandBody {
    InsertEvent(EventSummary),
    InsertCluster(ClusterView),
    UpdateClusterCount(ClusterView),
    ExpireHighlight(ExpireTarget),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderCommand {
    pub seq: u64,
    #[serde(rename = "cycle")]
    pub cycle_id: u64,
    pub style: VisualStyle,
    #[serde(flatten)]
    pub body: CommandBody,
}

impl RenderCommand {
    /// Insert and update commands write nodes; expirations only restyle.
    pub fn writes_node(&self) -> bool {
        !matches!(self.body, CommandBody::ExpireHighlight(_))
    }
}

#[derive(Debug, Error)]
#[error("transport rejected {count} commands: {reason}")]
pub struct TransportError {
    pub count: usize,
    pub reason: String,
}

pub trait CommandTransport {
    fn send(&mut self, cmds: &[RenderCommand]) -> Result<(), TransportError>;
}

/// Captures every delivered command in order.
#[derive(Debug, Clone, Default)]
pub struct RecordingTransport {
    pub commands: Vec<RenderCommand>,
}

impl CommandTransport for RecordingTransport {
    fn send(&mut self, cmds: &[RenderCommand]) -> Result<(), TransportError> {
        self.commands.extend_from_slice(cmds);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DiscardTransport;

impl CommandTransport for DiscardTransport {
    fn send(&mut self, _cmds: &[RenderCommand]) -> Result<(), TransportError> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SinkCounters {
    pub commands: u64,
    pub events_rendered: u64,
    /// Sum of cluster count increments made visible by insert/update commands.
    pub cluster_events_rendered: u64,
    pub expirations: u64,
    pub transport_failures: u64,
    pub dropped_commands: u64,
}

#[derive(Debug, Clone)]
struct Pulse {
    expire_at: Millis,
    target_seq: u64,
    event_id: String,
}

#[derive(Debug)]
pub struct RenderSink<T> {
    config: SinkConfig,
    transport: T,
    next_seq: u64,
    cycle_id: u64,
    pulses: VecDeque<Pulse>,
    cluster_counts: HashMap<u64, u64>,
    retry: VecDeque<RenderCommand>,
    counters: SinkCounters,
}

pub fn recording_sink(config: SinkConfig) -> RenderSink<RecordingTransport> {
    RenderSink::new(config, RecordingTransport::default())
}

impl<T: CommandTransport> RenderSink<T> {
    pub fn new(config: SinkConfig, transport: T) -> Self {
        Self {
            config,
            transport,
            next_seq: 0,
            cycle_id: 0,
            pulses: VecDeque::new(),
            cluster_counts: HashMap::new(),
            retry: VecDeque::new(),
            counters: SinkCounters::default(),
        }
    }

    pub fn config(&self) -> &SinkConfig {
        &self.config
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn transport_mut(&mut self) -> &mut T {
        &mut self.transport
    }

    pub fn into_transport(self) -> T {
        self.transport
    }

    pub fn counters(&self) -> SinkCounters {
        self.counters
    }

    pub fn active_pulses(&self) -> usize {
        self.pulses.len()
    }

    pub fn pending_retry(&self) -> usize {
        self.retry.len()
    }

    /// Count last made visible for a cluster, if it has been rendered.
    pub fn rendered_cluster_count(&self, cluster_id: u64) -> Option<u64> {
        self.cluster_counts.get(&cluster_id).copied()
    }

    /// Drops bookkeeping for a cluster that will not change again.
    pub fn forget_cluster(&mut self, cluster_id: u64) {
        self.cluster_counts.remove(&cluster_id);
    }

    fn command(&mut self, style: VisualStyle, body: CommandBody) -> RenderCommand {
        let cmd = RenderCommand {
            seq: self.next_seq,
            cycle_id: self.cycle_id,
            style,
            body,
        };
        self.next_seq += 1;
        cmd
    }

    fn cluster_view(&self, node: &ClusterNode) -> ClusterView {
        ClusterView {
            cluster_id: node.id,
            source_id: node.key.source_id.clone(),
            kind: node.key.kind.clone(),
            actor_id: node.key.actor_id.clone(),
            count: node.count,
            window_start: node.window_start,
            window_end: node.window_end,
            class: node.max_class,
            representative: EventSummary::new(
                &node.representative,
                Some(node.max_class),
                self.config.message_max_chars,
            ),
        }
    }

    /// One command per planned renderable, followed by expirations for
    /// pulses that have run their course.
    pub fn emit_plan(&mut self, plan: &CyclePlan, now: Millis) -> Vec<RenderCommand> {
        self.cycle_id += 1;
        let mut out = Vec::with_capacity(plan.emit.len());
        for item in &plan.emit {
            match item {
                Renderable::Event(p) => {
                    let style = style_for(&self.config, p.class);
                    let summary = EventSummary::new(&p.event, Some(p.class), self.config.message_max_chars);
                    let cmd = self.command(style, CommandBody::InsertEvent(summary));
                    if style.pulse_highlight {
                        self.pulses.push_back(Pulse {
                            expire_at: now + style.pulse_duration_ms,
                            target_seq: cmd.seq,
                            event_id: p.event.event_id.clone(),
                        });
                    }
                    self.counters.events_rendered += 1;
                    out.push(cmd);
                }
                Renderable::Cluster(node) => {
                    let view = self.cluster_view(node);
                    let style = style_for(&self.config, node.max_class);
                    let prev = self.cluster_counts.insert(node.id, node.count);
                    let delta = node.count.saturating_sub(prev.unwrap_or(0));
                    self.counters.cluster_events_rendered += delta;
                    let body = if prev.is_some() {
                        CommandBody::UpdateClusterCount(view)
                    } else {
                        CommandBody::InsertCluster(view)
                    };
                    out.push(self.command(style, body));
                }
            }
        }
        self.append_expirations(now, &mut out);
        self.deliver(&out);
        out
    }

    /// Renders events without priority treatment, as strategies that do not
    /// score would.
    pub fn emit_unprioritized(&mut self, events: &[TelemetryEvent], _now: Millis) -> Vec<RenderCommand> {
        self.cycle_id += 1;
        let style = neutral_style(&self.config);
        let mut out = Vec::with_capacity(events.len());
        for ev in events {
            let summary = EventSummary::new(ev, None, self.config.message_max_chars);
            out.push(self.command(style, CommandBody::InsertEvent(summary)));
        }
        self.counters.events_rendered += events.len() as u64;
        self.deliver(&out);
        out
    }

    fn append_expirations(&mut self, now: Millis, out: &mut Vec<RenderCommand>) {
        // Pulses are registered with a fixed duration, so expire_at is
        // non-decreasing along the queue.
        while self.pulses.front().is_some_and(|p| p.expire_at <= now) {
            let p = self.pulses.pop_front().unwrap();
            let style = VisualStyle {
                opacity: 1.0,
                pulse_highlight: false,
                pulse_duration_ms: self.config.pulse_duration_ms,
            };
            let cmd = self.command(
                style,
                CommandBody::ExpireHighlight(ExpireTarget {
                    target_seq: p.target_seq,
                    event_id: p.event_id,
                }),
            );
            self.counters.expirations += 1;
            out.push(cmd);
        }
    }

    fn deliver(&mut self, fresh: &[RenderCommand]) {
        self.counters.commands += fresh.len() as u64;
        if !self.retry.is_empty() {
            let backlog: Vec<RenderCommand> = self.retry.iter().cloned().collect();
            if self.transport.send(&backlog).is_err() {
                self.counters.transport_failures += 1;
                self.stash(fresh);
                return;
            }
            self.retry.clear();
        }
        if fresh.is_empty() {
            return;
        }
        if self.transport.send(fresh).is_err() {
            self.counters.transport_failures += 1;
            self.stash(fresh);
        }
    }

    fn stash(&mut self, cmds: &[RenderCommand]) {
        self.retry.extend(cmds.iter().cloned());
        while self.retry.len() > self.config.retry_capacity {
            self.retry.pop_front();
            self.counters.dropped_commands += 1;
        }
    }
}
