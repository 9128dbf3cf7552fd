//! One render cycle end to end: prune, score, compact, plan, emit.
//!
//! The ring buffer holds every event that has not been routed elsewhere.
//! Events leave it by being rendered, pruned, evicted into the compactor,
//! or diverted into the compactor while aggregation is on. Whatever the
//! compactor hands back (pass-throughs, released singles, clusters) waits in
//! a small ready list that competes with the buffer for the cycle budget.

use std::collections::HashSet;

use crate::buffer::{BufferedEvent, Disposition, EnqueueOutcome, RingBuffer};
use crate::compactor::{AbsorbOutcome, BurstCompactor, Flushed};
use crate::config::PipelineConfig;
use crate::event::{InvalidEvent, Millis, PriorityClass, TelemetryEvent};
use crate::orchestrator::{
    eligible, plan_cycle, AnalystState, CyclePlan, Orchestrator, PendingEvent, Plannable,
    RenderPolicy, Renderable, SystemSignals,
};
use crate::scorer::{InvestigationContext, Scorer};
use crate::sink::{CommandTransport, RenderCommand, RenderSink};

impl Plannable for BufferedEvent {
    /// Only meaningful for scored entries.
    fn class(&self) -> PriorityClass {
        self.current_class.unwrap_or(PriorityClass::Informational)
    }

    fn ts(&self) -> Millis {
        self.event.ts
    }

    fn matches(&self, ctx: &InvestigationContext) -> bool {
        ctx.matches_event(&self.event)
    }
}

enum Origin {
    Buffer(u64),
    Ready,
}

struct Candidate {
    origin: Origin,
    item: Renderable,
}

impl Plannable for Candidate {
    fn class(&self) -> PriorityClass {
        self.item.class()
    }

    fn ts(&self) -> Millis {
        self.item.ts()
    }

    fn matches(&self, ctx: &InvestigationContext) -> bool {
        self.item.matches(ctx)
    }
}

#[derive(Debug, Clone)]
pub struct CycleReport {
    pub commands: Vec<RenderCommand>,
    /// Events scored since the previous cycle, eviction victims included.
    pub scored: u64,
    pub state: AnalystState,
    pub policy: RenderPolicy,
    pub next_cycle_at: Millis,
}

/// Where every accepted event currently stands.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct Ledger {
    pub accepted: u64,
    pub rejected: u64,
    pub rendered_individually: u64,
    pub rendered_in_clusters: u64,
    pub pruned: u64,
    pub dropped_critical: u64,
    pub pending: u64,
}

impl Ledger {
    pub fn balances(&self) -> bool {
        self.accepted
            == self.rendered_individually
                + self.rendered_in_clusters
                + self.pruned
                + self.dropped_critical
                + self.pending
    }
}

pub struct Pipeline<T> {
    ttl_ms: Millis,
    buffer: RingBuffer,
    scorer: Scorer,
    compactor: BurstCompactor,
    orchestrator: Orchestrator,
    sink: RenderSink<T>,
    ready: Vec<Renderable>,
    /// Clusters whose window has closed; forgotten once their final count is drawn.
    closed: HashSet<u64>,
    rejected: u64,
    pruned_ready: u64,
    scored_reported: u64,
}

impl<T: CommandTransport> Pipeline<T> {
    /// `config` should already be validated.
    pub fn new(config: &PipelineConfig, transport: T) -> Self {
        Self {
            ttl_ms: config.ttl_ms,
            buffer: RingBuffer::new(config.buffer_capacity, config.ttl_ms),
            scorer: Scorer::new(config.model.clone(), config.actor_window_ms, config.frequency_norm),
            compactor: BurstCompactor::new(config.compactor.clone()),
            orchestrator: Orchestrator::new(config.policy.clone()),
            sink: RenderSink::new(config.sink.clone(), transport),
            ready: Vec::new(),
            closed: HashSet::new(),
            rejected: 0,
            pruned_ready: 0,
            scored_reported: 0,
        }
    }

    pub fn buffer(&self) -> &RingBuffer {
        &self.buffer
    }

    pub fn scorer(&self) -> &Scorer {
        &self.scorer
    }

    pub fn compactor(&self) -> &BurstCompactor {
        &self.compactor
    }

    pub fn orchestrator(&self) -> &Orchestrator {
        &self.orchestrator
    }

    pub fn sink(&self) -> &RenderSink<T> {
        &self.sink
    }

    pub fn sink_mut(&mut self) -> &mut RenderSink<T> {
        &mut self.sink
    }

    pub fn into_sink(self) -> RenderSink<T> {
        self.sink
    }

    /// Validates and stores one event. An eviction victim is handed to the
    /// compactor instead of being lost.
    pub fn ingest(&mut self, ev: TelemetryEvent, now: Millis) -> Result<(), InvalidEvent> {
        match self.buffer.enqueue(ev, now) {
            Err(e) => {
                self.rejected += 1;
                Err(e)
            }
            Ok(EnqueueOutcome::StoredWithEviction(victim)) => {
                let class = match victim.current_class {
                    Some(c) => c,
                    None => self.scorer.score(&victim.event).1,
                };
                self.absorb(victim.event, class, victim.ttl_deadline, now);
                Ok(())
            }
            Ok(_) => Ok(()),
        }
    }

    fn absorb(&mut self, ev: TelemetryEvent, class: PriorityClass, deadline: Millis, now: Millis) {
        match self.compactor.absorb(ev, class, now) {
            AbsorbOutcome::PassThrough(event) => self.ready.push(Renderable::Event(PendingEvent {
                event,
                class,
                ttl_deadline: deadline,
            })),
            AbsorbOutcome::Absorbed => {}
            AbsorbOutcome::ClusterFormed(node) => self.ready.push(Renderable::Cluster(node)),
        }
    }

    fn accept_flushed(&mut self, flushed: Vec<Flushed>, now: Millis) {
        for f in flushed {
            match f {
                Flushed::Single(event, class) => self.ready.push(Renderable::Event(PendingEvent {
                    event,
                    class,
                    ttl_deadline: now + self.ttl_ms,
                })),
                Flushed::Cluster(node) => {
                    let queued = self.ready.iter_mut().find_map(|r| match r {
                        Renderable::Cluster(n) if n.id == node.id => Some(n),
                        _ => None,
                    });
                    if let Some(slot) = queued {
                        *slot = node;
                        self.closed.insert(slot.id);
                    } else if node.count > self.sink.rendered_cluster_count(node.id).unwrap_or(0) {
                        self.closed.insert(node.id);
                        self.ready.push(Renderable::Cluster(node));
                    } else {
                        self.sink.forget_cluster(node.id);
                    }
                }
            }
        }
    }

    /// Runs one cycle at `now`. `signals.queue_fill_ratio` is overwritten
    /// with the buffer's own fill ratio.
    pub fn run_cycle(&mut self, signals: &SystemSignals, now: Millis) -> CycleReport {
        self.buffer.prune_expired(now);
        let before = self.ready.len();
        self.ready.retain(|r| match r {
            Renderable::Event(p) => p.ttl_deadline >= now,
            Renderable::Cluster(_) => true,
        });
        self.pruned_ready += (before - self.ready.len()) as u64;

        let mut sig = signals.clone();
        sig.queue_fill_ratio = self.buffer.len() as f64 / self.buffer.capacity() as f64;
        let ctx = if sig.selection_active {
            sig.selection_context.clone().unwrap_or_default()
        } else {
            InvestigationContext::default()
        };
        self.scorer.set_context(ctx);
        let next_cycle_at = self.orchestrator.tick(&sig, now);
        let policy = self.orchestrator.policy().clone();
        let state = self.orchestrator.state();

        let scorer = &mut self.scorer;
        let aggregate = policy.aggregation_mode;
        let diverted = self.buffer.score_unscored(|ev| {
            let (_, class) = scorer.score(ev);
            if aggregate && class != PriorityClass::Critical {
                Disposition::Divert(class)
            } else {
                Disposition::Keep(class)
            }
        });
        for d in diverted {
            let class = d.current_class.unwrap_or(PriorityClass::Informational);
            self.absorb(d.event, class, d.ttl_deadline, now);
        }
        let flushed = self.compactor.flush_window(now);
        self.accept_flushed(flushed, now);

        let mut candidates: Vec<Candidate> = std::mem::take(&mut self.ready)
            .into_iter()
            .map(|item| Candidate { origin: Origin::Ready, item })
            .collect();
        candidates.extend(
            self.buffer
                .render_candidates(policy.budget, |e| eligible(&policy, e))
                .into_iter()
                .map(|b| Candidate {
                    origin: Origin::Buffer(b.seq()),
                    item: Renderable::Event(PendingEvent {
                        event: b.event.clone(),
                        class: b.class(),
                        ttl_deadline: b.ttl_deadline,
                    }),
                }),
        );
        let plan = plan_cycle(&policy, candidates, now);

        let mut taken = Vec::new();
        let mut emit = Vec::with_capacity(plan.emit.len());
        for c in plan.emit {
            if let Origin::Buffer(seq) = c.origin {
                taken.push(seq);
            }
            emit.push(c.item);
        }
        self.buffer.take_by_seq(&taken);
        self.ready.extend(
            plan.deferred
                .into_iter()
                .filter(|c| matches!(c.origin, Origin::Ready))
                .map(|c| c.item),
        );

        let render_plan = CyclePlan {
            emit,
            deferred: Vec::new(),
            cycle_deadline: plan.cycle_deadline,
        };
        let commands = self.sink.emit_plan(&render_plan, now);
        for item in &render_plan.emit {
            if let Renderable::Cluster(n) = item {
                if self.closed.remove(&n.id) {
                    self.sink.forget_cluster(n.id);
                }
            }
        }

        let scored = self.scorer.scored() - self.scored_reported;
        self.scored_reported = self.scorer.scored();
        CycleReport {
            commands,
            scored,
            state,
            policy,
            next_cycle_at,
        }
    }

    /// Events accepted but not yet rendered, pruned or dropped.
    pub fn pending(&self) -> u64 {
        let ready_events = self
            .ready
            .iter()
            .filter(|r| matches!(r, Renderable::Event(_)))
            .count() as u64;
        let cluster_backlog = self.compactor.counters().clustered_events
            - self.sink.counters().cluster_events_rendered;
        self.buffer.len() as u64 + ready_events + self.compactor.pending_singles() + cluster_backlog
    }

    /// True when nothing is waiting anywhere, pulses included.
    pub fn is_quiescent(&self) -> bool {
        self.buffer.is_empty()
            && self.ready.is_empty()
            && self.compactor.is_idle()
            && self.sink.active_pulses() == 0
    }

    pub fn ledger(&self) -> Ledger {
        let b = self.buffer.counters();
        let s = self.sink.counters();
        Ledger {
            accepted: b.enqueued,
            rejected: self.rejected,
            rendered_individually: s.events_rendered,
            rendered_in_clusters: s.cluster_events_rendered,
            pruned: b.pruned_ttl + self.pruned_ready,
            dropped_critical: b.dropped_critical,
            pending: self.pending(),
        }
    }
}
