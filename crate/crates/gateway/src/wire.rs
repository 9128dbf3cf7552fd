//! Line-delimited JSON records exchanged with producers and dashboards.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use aiar_core::event::{Millis, MAX_SEVERITY};
use aiar_core::sink::TransportError;
use aiar_core::{CommandTransport, InvestigationContext, RenderCommand, SystemSignals, TelemetryEvent};

/// A rejected input line. `key` names the offending field when there is one.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {}{reason}", key.map(|k| format!("`{k}`: ")).unwrap_or_default())]
pub struct ParseError {
    pub line: usize,
    pub key: Option<&'static str>,
    pub reason: String,
}

fn field<'a>(obj: &'a Map<String, Value>, key: &'static str, line: usize) -> Result<&'a Value, ParseError> {
    obj.get(key).ok_or_else(|| ParseError {
        line,
        key: Some(key),
        reason: "missing required key".into(),
    })
}

fn mismatch(key: &'static str, line: usize, expected: &str) -> ParseError {
    ParseError {
        line,
        key: Some(key),
        reason: format!("expected {expected}"),
    }
}

fn string(obj: &Map<String, Value>, key: &'static str, line: usize) -> Result<String, ParseError> {
    field(obj, key, line)?
        .as_str()
        .map(str::to_owned)
        .ok_or_else(|| mismatch(key, line, "a string"))
}

/// Parses one event record. Blank lines yield `Ok(None)`. Keys other than
/// the eight required ones are ignored.
pub fn parse_event_line(text: &str, line: usize) -> Result<Option<TelemetryEvent>, ParseError> {
    if text.trim().is_empty() {
        return Ok(None);
    }
    let value: Value = serde_json::from_str(text).map_err(|e| ParseError {
        line,
        key: None,
        reason: format!("not valid JSON: {e}"),
    })?;
    let Value::Object(obj) = value else {
        return Err(ParseError {
            line,
            key: None,
            reason: "expected a JSON object".into(),
        });
    };

    let ts = field(&obj, "ts", line)?
        .as_u64()
        .ok_or_else(|| mismatch("ts", line, "a non-negative integer"))?;
    let severity = field(&obj, "severity", line)?
        .as_i64()
        .ok_or_else(|| mismatch("severity", line, "an integer"))?;
    if !(0..=i64::from(MAX_SEVERITY)).contains(&severity) {
        return Err(ParseError {
            line,
            key: Some("severity"),
            reason: format!("{severity} outside 0..={MAX_SEVERITY}"),
        });
    }
    let reputation = field(&obj, "reputation", line)?
        .as_f64()
        .ok_or_else(|| mismatch("reputation", line, "a number"))?;
    if !(0.0..=1.0).contains(&reputation) {
        return Err(ParseError {
            line,
            key: Some("reputation"),
            reason: format!("{reputation} outside [0, 1]"),
        });
    }
    Ok(Some(TelemetryEvent {
        event_id: string(&obj, "id", line)?,
        ts,
        severity: severity as u8,
        source_id: string(&obj, "source", line)?,
        actor_id: string(&obj, "actor", line)?,
        kind: string(&obj, "kind", line)?,
        reputation,
        message: string(&obj, "msg", line)?,
    }))
}

/// The inverse of [`parse_event_line`].
pub fn event_line(ev: &TelemetryEvent) -> String {
    serde_json::json!({
        "id": ev.event_id,
        "ts": ev.ts,
        "severity": ev.severity,
        "source": ev.source_id,
        "actor": ev.actor_id,
        "kind": ev.kind,
        "reputation": ev.reputation,
        "msg": ev.message,
    })
    .to_string()
}

pub fn command_line(cmd: &RenderCommand) -> String {
    serde_json::to_string(cmd).expect("commands always serialize")
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Selection {
    pub sources: Vec<String>,
    pub actors: Vec<String>,
    pub kinds: Vec<String>,
}

impl Selection {
    pub fn context(&self) -> InvestigationContext {
        InvestigationContext {
            watched_sources: self.sources.iter().cloned().collect(),
            watched_actors: self.actors.iter().cloned().collect(),
            watched_kinds: self.kinds.iter().cloned().collect(),
        }
    }
}

/// Analyst activity reported by a dashboard. Unknown keys are ignored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WireSignal {
    /// px/s; the sign (direction) is ignored.
    pub scroll_velocity: f64,
    pub selection_active: bool,
    pub selection: Selection,
    pub client_ts: Option<u64>,
}

impl WireSignal {
    pub fn parse(text: &str) -> Option<Self> {
        let s: Self = serde_json::from_str(text).ok()?;
        s.scroll_velocity.is_finite().then_some(s)
    }

    /// Scrolling, or a selection that differs from `prev`. Heartbeats are not
    /// interactions.
    pub fn is_interaction(&self, prev: &WireSignal) -> bool {
        self.scroll_velocity != 0.0
            || self.selection_active != prev.selection_active
            || (self.selection_active && self.selection != prev.selection)
    }
}

/// Pipeline-side view of the dashboard: the latest signal plus the time of
/// the last interaction, on the pipeline's clock.
#[derive(Debug, Clone)]
pub struct SignalTracker {
    current: WireSignal,
    last_interaction: Millis,
}

impl SignalTracker {
    pub fn new(now: Millis) -> Self {
        Self {
            current: WireSignal::default(),
            last_interaction: now,
        }
    }

    pub fn update(&mut self, signal: WireSignal, interacted: bool, now: Millis) {
        if interacted {
            self.last_interaction = now;
        }
        self.current = signal;
    }

    /// Load and queue fill are left for the caller.
    pub fn snapshot(&self, now: Millis) -> SystemSignals {
        let s = &self.current;
        SystemSignals {
            cpu_load: 0.0,
            scroll_velocity: s.scroll_velocity.abs(),
            selection_active: s.selection_active,
            selection_context: s.selection_active.then(|| s.selection.context()),
            queue_fill_ratio: 0.0,
            last_interaction_age_ms: now.saturating_sub(self.last_interaction),
        }
    }
}

/// Writes each command as one JSON line and flushes per batch.
pub struct LineTransport<W> {
    out: W,
}

impl<W: Write> LineTransport<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> CommandTransport for LineTransport<W> {
    fn send(&mut self, cmds: &[RenderCommand]) -> Result<(), TransportError> {
        let fail = |e: std::io::Error| TransportError {
            count: cmds.len(),
            reason: e.to_string(),
        };
        for c in cmds {
            writeln!(self.out, "{}", command_line(c)).map_err(fail)?;
        }
        self.out.flush().map_err(fail)
    }
}
