//! Render policy control: analyst state from interaction signals, the
//! render interval and filters that state implies, and per-cycle planning
//! under the render budget.

use serde::{Deserialize, Serialize};

use crate::compactor::ClusterNode;
use crate::event::{Millis, PriorityClass, TelemetryEvent};
use crate::scorer::InvestigationContext;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub interval_idle_ms: Millis,
    pub interval_interacting_ms: Millis,
    pub interval_detached_ms: Millis,
    pub budget: usize,
    pub cpu_strain_threshold: f64,
    pub burst_threshold: f64,
    /// px/s
    pub scroll_threshold: f64,
    pub detach_ms: Millis,
    pub strain_multiplier: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            interval_idle_ms: 16,
            interval_interacting_ms: 300,
            interval_detached_ms: 1_000,
            budget: 50,
            cpu_strain_threshold: 0.7,
            burst_threshold: 0.5,
            scroll_threshold: 50.0,
            detach_ms: 30_000,
            strain_multiplier: 2.0,
        }
    }
}

/// One snapshot of everything the policy reacts to.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemSignals {
    /// 0..=1
    pub cpu_load: f64,
    /// px/s, non-negative.
    pub scroll_velocity: f64,
    pub selection_active: bool,
    pub selection_context: Option<InvestigationContext>,
    /// 0..=1
    pub queue_fill_ratio: f64,
    pub last_interaction_age_ms: Millis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalystState {
    Idle,
    Interacting,
    Investigating,
    Detached,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderPolicy {
    pub interval_ms: Millis,
    pub budget: usize,
    pub aggregation_mode: bool,
    pub lane_filter: Option<InvestigationContext>,
    pub background_paused: bool,
}

pub fn derive_analyst_state(cfg: &PolicyConfig, sig: &SystemSignals) -> AnalystState {
    if sig.selection_active {
        AnalystState::Investigating
    } else if sig.scroll_velocity > cfg.scroll_threshold {
        AnalystState::Interacting
    } else if sig.last_interaction_age_ms > cfg.detach_ms {
        AnalystState::Detached
    } else {
        AnalystState::Idle
    }
}

pub fn select_policy(cfg: &PolicyConfig, state: AnalystState, sig: &SystemSignals) -> RenderPolicy {
    let mut policy = RenderPolicy {
        interval_ms: cfg.interval_idle_ms,
        budget: cfg.budget,
        aggregation_mode: false,
        lane_filter: None,
        background_paused: false,
    };
    match state {
        AnalystState::Idle => {}
        AnalystState::Interacting => {
            policy.interval_ms = cfg.interval_interacting_ms;
            policy.background_paused = true;
        }
        AnalystState::Investigating => {
            policy.lane_filter = Some(sig.selection_context.clone().unwrap_or_default());
        }
        AnalystState::Detached => policy.interval_ms = cfg.interval_detached_ms,
    }
    if sig.cpu_load >= cfg.cpu_strain_threshold {
        policy.interval_ms = ((policy.interval_ms as f64) * cfg.strain_multiplier).round() as Millis;
    }
    policy.aggregation_mode = sig.queue_fill_ratio >= cfg.burst_threshold;
    policy
}

/// Anything the planner can order and filter.
pub trait Plannable {
    fn class(&self) -> PriorityClass;
    fn ts(&self) -> Millis;
    fn matches(&self, ctx: &InvestigationContext) -> bool;
}

#[derive(Debug, Clone, PartialEq)]
pub struct PendingEvent {
    pub event: TelemetryEvent,
    pub class: PriorityClass,
    pub ttl_deadline: Millis,
}

/// A unit the render sink can turn into a command.
#[derive(Debug, Clone, PartialEq)]
pub enum Renderable {
    Event(PendingEvent),
    Cluster(ClusterNode),
}

impl Plannable for Renderable {
    fn class(&self) -> PriorityClass {
        match self {
            Renderable::Event(p) => p.class,
            Renderable::Cluster(n) => n.max_class,
        }
    }

    fn ts(&self) -> Millis {
        match self {
            Renderable::Event(p) => p.event.ts,
            Renderable::Cluster(n) => n.window_start,
        }
    }

    fn matches(&self, ctx: &InvestigationContext) -> bool {
        match self {
            Renderable::Event(p) => ctx.matches_event(&p.event),
            Renderable::Cluster(n) => ctx.matches(
                &n.key.source_id,
                n.key.actor_id.as_deref().unwrap_or(&n.representative.actor_id),
                &n.key.kind,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CyclePlan<T = Renderable> {
    pub emit: Vec<T>,
    pub deferred: Vec<T>,
    pub cycle_deadline: Millis,
}

/// Whether `item` may render under `policy` at all. Critical items are
/// always eligible.
pub fn eligible<T: Plannable>(policy: &RenderPolicy, item: &T) -> bool {
    if item.class() == PriorityClass::Critical {
        return true;
    }
    if policy.background_paused {
        return false;
    }
    policy.lane_filter.as_ref().is_none_or(|f| item.matches(f))
}

/// Picks at most `policy.budget` eligible items in (class, timestamp,
/// arrival) order. Everything else is deferred, keeping its original order.
pub fn plan_cycle<T: Plannable>(policy: &RenderPolicy, pending: Vec<T>, now: Millis) -> CyclePlan<T> {
    let mut keys: Vec<(u8, Millis, usize)> = pending
        .iter()
        .enumerate()
        .filter(|(_, item)| eligible(policy, *item))
        .map(|(i, item)| (item.class().code(), item.ts(), i))
        .collect();
    if keys.len() > policy.budget {
        if policy.budget == 0 {
            keys.clear();
        } else {
            keys.select_nth_unstable(policy.budget - 1);
            keys.truncate(policy.budget);
        }
    }
    keys.sort_unstable();

    let mut slots: Vec<Option<T>> = pending.into_iter().map(Some).collect();
    let emit = keys.iter().map(|&(_, _, i)| slots[i].take().unwrap()).collect();
    let deferred = slots.into_iter().flatten().collect();
    CyclePlan {
        emit,
        deferred,
        cycle_deadline: now + policy.interval_ms,
    }
}

/// Owns the cycle loop's policy state.
#[derive(Debug, Clone)]
pub struct Orchestrator {
    config: PolicyConfig,
    state: AnalystState,
    policy: RenderPolicy,
}

impl Orchestrator {
    pub fn new(config: PolicyConfig) -> Self {
        let quiet = SystemSignals::default();
        let state = derive_analyst_state(&config, &quiet);
        let policy = select_policy(&config, state, &quiet);
        Self { config, state, policy }
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn state(&self) -> AnalystState {
        self.state
    }

    pub fn policy(&self) -> &RenderPolicy {
        &self.policy
    }

    /// Re-derives state and policy from `sig`; returns when the next cycle
    /// is due under the new policy.
    pub fn tick(&mut self, sig: &SystemSignals, now: Millis) -> Millis {
        self.state = derive_analyst_state(&self.config, sig);
        self.policy = select_policy(&self.config, self.state, sig);
        now + self.policy.interval_ms
    }
}

impl Default for Orchestrator {
    fn default() -> Self {
        Self::new(PolicyConfig::default())
    }
}
