//! Largest input rate a strategy sustains under a cost model.

use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::run::{simulate, MetricsReport, SimOptions, Strategy};
use crate::script::AnalystScript;
use crate::workload::WorkloadSpec;
use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criteria {
    pub max_jank_pct: f64,
    pub max_dropped_critical: u64,
    /// p95 of work / interval over the run's cycles.
    pub max_p95_work_ratio: f64,
}

impl Default for Criteria {
    fn default() -> Self {
        Self {
            max_jank_pct: 0.12,
            max_dropped_critical: 0,
            max_p95_work_ratio: 1.0,
        }
    }
}

impl Criteria {
    pub fn accepts(&self, r: &MetricsReport) -> bool {
        r.jank_pct <= self.max_jank_pct
            && r.dropped_critical <= self.max_dropped_critical
            && r.p95_work_ratio <= self.max_p95_work_ratio
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBounds {
    pub min_eps: f64,
    pub cap_eps: f64,
    /// Bisection stops once (hi - lo) / hi falls to this.
    pub rel_width: f64,
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self {
            min_eps: 1.0,
            cap_eps: 200_000.0,
            rel_width: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SearchOutcome {
    Found { eps: f64, probes: u32 },
    /// Sustained even at the search cap.
    AtLeastCap { eps: f64, probes: u32 },
    /// Fails even at the minimum rate.
    Unsustainable { probes: u32 },
}

impl SearchOutcome {
    pub fn eps(&self) -> Option<f64> {
        match *self {
            SearchOutcome::Found { eps, .. } | SearchOutcome::AtLeastCap { eps, .. } => Some(eps),
            SearchOutcome::Unsustainable { .. } => None,
        }
    }
}

/// Doubles from the template's rate until the criteria fail (or the cap
/// holds), then bisects. The template's duration and seed are used for
/// every probe.
pub fn find_max_sustainable(
    strategy: Strategy,
    cost: &CostModel,
    template: &WorkloadSpec,
    script: &AnalystScript,
    criteria: &Criteria,
    bounds: &SearchBounds,
    opts: &SimOptions,
) -> Result<SearchOutcome, SimError> {
    let mut probes = 0u32;
    let mut probe = |rate: f64| -> Result<bool, SimError> {
        probes += 1;
        let run = simulate(&template.with_rate(rate), strategy, cost, script, opts)?;
        Ok(criteria.accepts(&run.report))
    };

    let mut rate = template.rate_eps.clamp(bounds.min_eps, bounds.cap_eps);
    let (mut lo, mut hi);
    if probe(rate)? {
        lo = rate;
        loop {
            if lo >= bounds.cap_eps {
                return Ok(SearchOutcome::AtLeastCap { eps: bounds.cap_eps, probes });
            }
            rate = (lo * 2.0).min(bounds.cap_eps);
            if probe(rate)? {
                lo = rate;
            } else {
                hi = rate;
                break;
            }
        }
    } else {
        hi = rate;
        loop {
            if hi <= bounds.min_eps {
                return Ok(SearchOutcome::Unsustainable { probes });
            }
            rate = (hi / 2.0).max(bounds.min_eps);
            if probe(rate)? {
                lo = rate;
                break;
            }
            hi = rate;
        }
    }
    while (hi - lo) / hi > bounds.rel_width {
        let mid = 0.5 * (lo + hi);
        if probe(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(SearchOutcome::Found { eps: lo, probes })
}
