//! Drives one strategy over a generated trace on a virtual clock.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use aiar_core::event::Millis;
use aiar_core::sink::DiscardTransport;
use aiar_core::{CommandBody, Pipeline, PipelineConfig, RenderCommand, RenderSink, TelemetryEvent};

use crate::cost::CostModel;
use crate::script::AnalystScript;
use crate::workload::{generate_stream, Population, WorkloadSpec};
use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Every arrival rendered at the next 16 ms frame. No scoring, no budget.
    #[serde(rename = "baseline")]
    BaselineVirtualized,
    /// Every arrival rendered in a batch once a second.
    #[serde(rename = "fixed")]
    FixedThrottle,
    #[serde(rename = "ai-ar")]
    Aiar,
}

pub const BASELINE_INTERVAL_MS: Millis = 16;
pub const FIXED_INTERVAL_MS: Millis = 1_000;

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::BaselineVirtualized, Strategy::FixedThrottle, Strategy::Aiar];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::BaselineVirtualized => "baseline",
            Strategy::FixedThrottle => "fixed",
            Strategy::Aiar => "ai-ar",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "baseline" => Ok(Strategy::BaselineVirtualized),
            "fixed" => Ok(Strategy::FixedThrottle),
            "ai-ar" | "aiar" => Ok(Strategy::Aiar),
            other => Err(SimError::UnknownStrategy(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub pipeline: PipelineConfig,
    /// Keep cycling after arrivals stop until nothing is pending. Recall and
    /// the final ledger need it; throughput probes do not.
    pub drain: bool,
    pub drain_horizon_ms: Millis,
    pub record_rendered: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            drain: true,
            drain_horizon_ms: 60_000,
            record_rendered: false,
        }
    }
}

impl SimOptions {
    pub fn probe() -> Self {
        Self {
            drain: false,
            ..Self::default()
        }
    }
}

/// Rates and counters for one run. Load, jank and work cover the cycles that
/// start before the end of the workload; recall and the ledger also include
/// the drain that follows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub strategy: Strategy,
    pub rate_eps: f64,
    pub duration_s: f64,
    pub seed: u64,
    #[serde(default)]
    pub max_sustainable_eps: Option<f64>,
    pub avg_cpu_load: f64,
    pub jank_pct: f64,
    pub p95_work_ratio: f64,
    pub recall_proxy: f64,
    pub render_work_total_us: u64,
    pub cycles: u64,
    pub janky_cycles: u64,
    pub commands: u64,
    pub scored: u64,
    pub critical_truth: u64,
    pub critical_recalled: u64,
    pub generated: u64,
    pub rendered_individually: u64,
    pub rendered_in_clusters: u64,
    pub pruned: u64,
    pub dropped_critical: u64,
    pub downgraded: u64,
    pub pending: u64,
}

impl MetricsReport {
    pub fn conserves(&self) -> bool {
        self.generated
            == self.rendered_individually
                + self.rendered_in_clusters
                + self.pruned
                + self.dropped_critical
                + self.pending
    }
}

#[derive(Debug, Clone)]
pub struct SimRun {
    pub report: MetricsReport,
    /// Individually rendered event ids in render order, when requested.
    pub rendered_ids: Vec<String>,
}

#[derive(Default)]
struct Meter {
    generated: u64,
    cycles: u64,
    janky: u64,
    work_total: u64,
    commands: u64,
    scored: u64,
    ratios: Vec<f64>,
    recent: VecDeque<(u64, u64)>,
    recent_work: u64,
    truth: HashMap<String, Millis>,
    truth_total: u64,
    recalled: u64,
    rendered_ids: Vec<String>,
}

impl Meter {
    fn admit(&mut self, ev: &TelemetryEvent, pop: Population) {
        self.generated += 1;
        if pop == Population::CriticalLike {
            self.truth.insert(ev.event_id.clone(), ev.ts);
            self.truth_total += 1;
        }
    }

    /// Work over the last second as a fraction of capacity.
    fn load(&mut self, t_us: u64, capacity: f64) -> f64 {
        while self.recent.front().is_some_and(|&(s, _)| s + 1_000_000 <= t_us) {
            self.recent_work -= self.recent.pop_front().unwrap().1;
        }
        (self.recent_work as f64 / capacity).min(1.0)
    }

    fn record_cycle(&mut self, t_us: u64, work: u64, interval_us: u64, commands: usize, scored: u64, in_window: bool) {
        self.recent.push_back((t_us, work));
        self.recent_work += work;
        if in_window {
            self.cycles += 1;
            self.work_total += work;
            self.commands += commands as u64;
            self.scored += scored;
            if work > interval_us {
                self.janky += 1;
            }
            self.ratios.push(work as f64 / interval_us as f64);
        }
    }

    fn rendered(&mut self, cmds: &[RenderCommand], render_at_us: u64, ttl_ms: Millis, record: bool) {
        for c in cmds {
            if let CommandBody::InsertEvent(s) = &c.body {
                if let Some(ts) = self.truth.remove(&s.event_id) {
                    if render_at_us <= (ts + ttl_ms) * 1_000 {
                        self.recalled += 1;
                    }
                }
                if record {
                    self.rendered_ids.push(s.event_id.clone());
                }
            }
        }
    }
}

/// Nearest-rank percentile of an unsorted sample. Zero for an empty sample.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank - 1]
}

pub fn run_simulation(
    spec: &WorkloadSpec,
    strategy: Strategy,
    cost: &CostModel,
    script: &AnalystScript,
) -> Result<MetricsReport, SimError> {
    simulate(spec, strategy, cost, script, &SimOptions::default()).map(|r| r.report)
}

pub fn simulate(
    spec: &WorkloadSpec,
    strategy: Strategy,
    cost: &CostModel,
    script: &AnalystScript,
    opts: &SimOptions,
) -> Result<SimRun, SimError> {
    spec.validate()?;
    cost.validate()?;
    opts.pipeline.validate()?;
    let duration_us = spec.duration_us();
    script.check_covers(duration_us.div_ceil(1_000))?;

    let mut arrivals = generate_stream(spec).peekable();
    let mut meter = Meter::default();
    let horizon_us = duration_us + opts.drain_horizon_ms * 1_000;
    let ttl = opts.pipeline.ttl_ms;
    let mut t_us = 0u64;

    let mut report = match strategy {
        Strategy::Aiar => {
            let mut pipeline = Pipeline::new(&opts.pipeline, DiscardTransport);
            loop {
                let in_window = t_us < duration_us;
                while let Some(a) = arrivals.next_if(|a| a.at_us <= t_us) {
                    meter.admit(&a.event, a.population);
                    pipeline.ingest(a.event, a.at_us / 1_000).expect("generated events are valid");
                }
                if !in_window
                    && (!opts.drain
                        || t_us >= horizon_us
                        || (arrivals.peek().is_none() && pipeline.is_quiescent()))
                {
                    break;
                }
                let t_ms = t_us / 1_000;
                let mut sig = script.signals_at(t_ms);
                sig.cpu_load = meter.load(t_us, cost.cpu_capacity_us_per_s);
                let cycle = pipeline.run_cycle(&sig, t_ms);
                let work = cost.work_us(cycle.commands.len(), cycle.scored);
                let interval_us = cycle.policy.interval_ms * 1_000;
                meter.record_cycle(t_us, work, interval_us, cycle.commands.len(), cycle.scored, in_window);
                meter.rendered(&cycle.commands, t_us + work, ttl, opts.record_rendered);
                t_us += interval_us.max(work);
            }
            let l = pipeline.ledger();
            let b = pipeline.buffer().counters();
            partial_report(l.rendered_individually, l.rendered_in_clusters, l.pruned, l.dropped_critical, b.downgraded, l.pending)
        }
        Strategy::BaselineVirtualized | Strategy::FixedThrottle => {
            let interval_us = if strategy == Strategy::FixedThrottle {
                FIXED_INTERVAL_MS
            } else {
                BASELINE_INTERVAL_MS
            } * 1_000;
            let mut sink = RenderSink::new(opts.pipeline.sink.clone(), DiscardTransport);
            let mut pending: Vec<TelemetryEvent> = Vec::new();
            loop {
                let in_window = t_us < duration_us;
                while let Some(a) = arrivals.next_if(|a| a.at_us <= t_us) {
                    meter.admit(&a.event, a.population);
                    pending.push(a.event);
                }
                if !in_window
                    && (!opts.drain
                        || t_us >= horizon_us
                        || (arrivals.peek().is_none() && pending.is_empty()))
                {
                    break;
                }
                let cmds = sink.emit_unprioritized(&pending, t_us / 1_000);
                pending.clear();
                let work = cost.work_us(cmds.len(), 0);
                meter.load(t_us, cost.cpu_capacity_us_per_s);
                meter.record_cycle(t_us, work, interval_us, cmds.len(), 0, in_window);
                meter.rendered(&cmds, t_us + work, ttl, opts.record_rendered);
                t_us += interval_us.max(work);
            }
            let unseen = arrivals.by_ref().count() as u64;
            meter.generated += unseen;
            let rendered = sink.counters().events_rendered;
            partial_report(rendered, 0, 0, 0, 0, pending.len() as u64 + unseen)
        }
    };
    // Arrivals never pulled into the AIAR loop still count as generated.
    if strategy == Strategy::Aiar {
        let unseen = arrivals.count() as u64;
        meter.generated += unseen;
        report.pending += unseen;
    }

    report.strategy = strategy;
    report.rate_eps = spec.rate_eps;
    report.duration_s = spec.duration_s;
    report.seed = spec.seed;
    report.generated = meter.generated;
    report.cycles = meter.cycles;
    report.janky_cycles = meter.janky;
    report.jank_pct = if meter.cycles == 0 { 0.0 } else { meter.janky as f64 / meter.cycles as f64 };
    report.avg_cpu_load = (meter.work_total as f64 / (spec.duration_s * cost.cpu_capacity_us_per_s)).min(1.0);
    report.p95_work_ratio = percentile(&meter.ratios, 95.0);
    report.render_work_total_us = meter.work_total;
    report.commands = meter.commands;
    report.scored = meter.scored;
    report.critical_truth = meter.truth_total;
    report.critical_recalled = meter.recalled;
    report.recall_proxy = if meter.truth_total == 0 {
        1.0
    } else {
        meter.recalled as f64 / meter.truth_total as f64
    };
    Ok(SimRun {
        report,
        rendered_ids: meter.rendered_ids,
    })
}

fn partial_report(
    rendered_individually: u64,
    rendered_in_clusters: u64,
    pruned: u64,
    dropped_critical: u64,
    downgraded: u64,
    pending: u64,
) -> MetricsReport {
    MetricsReport {
        strategy: Strategy::Aiar,
        rate_eps: 0.0,
        duration_s: 0.0,
        seed: 0,
        max_sustainable_eps: None,
        avg_cpu_load: 0.0,
        jank_pct: 0.0,
        p95_work_ratio: 0.0,
        recall_proxy: 0.0,
        render_work_total_us: 0,
        cycles: 0,
        janky_cycles: 0,
        commands: 0,
        scored: 0,
        critical_truth: 0,
        critical_recalled: 0,
        generated: 0,
        rendered_individually,
        rendered_in_clusters,
        pruned,
        dropped_critical,
        downgraded,
        pending,
    }
}
