use aiar_sim::run::{percentile, BASELINE_INTERVAL_MS, FIXED_INTERVAL_MS};
use aiar_sim::workload::{generate_stream, Arrival, Population};
use aiar_sim::*;

fn idle_for(spec: &WorkloadSpec) -> AnalystScript {
    AnalystScript::idle((spec.duration_s * 1_000.0).ceil() as u64)
}

#[test]
fn same_seed_same_trace() {
    let spec = WorkloadSpec::new(100.0, 10.0, 42);
    let a: Vec<Arrival> = generate_stream(&spec).collect();
    let b: Vec<Arrival> = generate_stream(&spec).collect();
    assert_eq!(a, b);
    let c: Vec<Arrival> = generate_stream(&WorkloadSpec::new(100.0, 10.0, 43)).collect();
    assert_ne!(a, c);
}

#[test]
fn arrival_count_is_poisson() {
    // Mean 1000, sd sqrt(1000).
    let bound = 3.0 * 1000f64.sqrt();
    for seed in 0..20 {
        let n = generate_stream(&WorkloadSpec::new(100.0, 10.0, seed)).count() as f64;
        assert!((n - 1000.0).abs() <= bound, "seed {seed}: {n}");
    }
}

#[test]
fn population_shares_follow_the_mix() {
    let spec = WorkloadSpec::new(10_000.0, 10.0, 9);
    let mut counts = [0usize; 3];
    for a in generate_stream(&spec) {
        counts[match a.population {
            Population::CriticalLike => 0,
            Population::WarningLike => 1,
            Population::InfoLike => 2,
        }] += 1;
    }
    let total: usize = counts.iter().sum();
    assert!(total > 95_000);
    for (n, want) in counts.iter().zip([0.01, 0.09, 0.90]) {
        let share = *n as f64 / total as f64;
        assert!((share - want).abs() <= 0.01, "{share} vs {want}");
    }
}

#[test]
fn underloaded_run_is_clean() {
    let spec = WorkloadSpec::new(10.0, 20.0, 1);
    let r = run_simulation(&spec, Strategy::Aiar, &CostModel::default(), &idle_for(&spec)).unwrap();
    assert_eq!(r.jank_pct, 0.0);
    assert_eq!(r.recall_proxy, 1.0);
    assert!(r.conserves());
    assert_eq!(r.pending, 0);
}

#[test]
fn identical_inputs_identical_reports() {
    let spec = WorkloadSpec::new(20_000.0, 3.0, 5);
    let script = idle_for(&spec);
    for s in Strategy::ALL {
        let a = run_simulation(&spec, s, &CostModel::default(), &script).unwrap();
        let b = run_simulation(&spec, s, &CostModel::default(), &script).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn short_script_is_rejected_before_running() {
    let spec = WorkloadSpec::new(10.0, 20.0, 1);
    let err = run_simulation(&spec, Strategy::Aiar, &CostModel::default(), &AnalystScript::idle(19_999));
    assert!(matches!(err, Err(SimError::ScriptTooShort { .. })));
}

#[test]
fn invalid_inputs_are_rejected() {
    let spec = WorkloadSpec::new(10.0, 1.0, 1);
    let script = idle_for(&spec);
    let cost = CostModel {
        cpu_capacity_us_per_s: 0.0,
        ..CostModel::default()
    };
    assert!(run_simulation(&spec, Strategy::Aiar, &cost, &script).is_err());
    let cost = CostModel {
        per_command_us: -1.0,
        ..CostModel::default()
    };
    assert!(run_simulation(&spec, Strategy::Aiar, &cost, &script).is_err());
}

// Independent replay of a lightly loaded run. At this load no budget binds
// and nothing is aggregated, so every strategy renders each arrival at the
// first cycle that starts at or after it. Pulses last longer than the run, so
// no expirations fall inside the measured window.
struct Expected {
    cycles: u64,
    janky: u64,
    work_total: u64,
    commands: u64,
    scored: u64,
    ratios: Vec<f64>,
    recalled: u64,
    truth: u64,
}

fn replay(arrivals: &[Arrival], interval_us: u64, scoring: bool, duration_us: u64, cost: &CostModel) -> Expected {
    let mut e = Expected {
        cycles: 0,
        janky: 0,
        work_total: 0,
        commands: 0,
        scored: 0,
        ratios: Vec::new(),
        recalled: 0,
        truth: arrivals.iter().filter(|a| a.population == Population::CriticalLike).count() as u64,
    };
    let mut t = 0u64;
    let mut next = 0usize;
    while t < duration_us || next < arrivals.len() {
        let mut batch = Vec::new();
        while next < arrivals.len() && arrivals[next].at_us <= t {
            batch.push(&arrivals[next]);
            next += 1;
        }
        let n = batch.len() as f64;
        let work = (n * cost.per_command_us + if scoring { n * cost.per_score_us } else { 0.0 }).round() as u64;
        for a in &batch {
            if a.population == Population::CriticalLike && t + work <= (a.event.ts + 5_000) * 1_000 {
                e.recalled += 1;
            }
        }
        if t < duration_us {
            e.cycles += 1;
            e.work_total += work;
            e.commands += batch.len() as u64;
            e.scored += if scoring { batch.len() as u64 } else { 0 };
            e.janky += u64::from(work > interval_us);
            e.ratios.push(work as f64 / interval_us as f64);
        }
        t += interval_us.max(work);
    }
    e
}

#[test]
fn tiny_trace_matches_replay_oracle() {
    let cost = CostModel::default();
    let mut spec = WorkloadSpec::new(10.0, 2.0, 0);
    spec.class_mix.critical = 0.3;
    spec.class_mix.warning = 0.1;
    spec.class_mix.info = 0.6;
    let arrivals: Vec<Arrival> = generate_stream(&spec).collect();
    assert!((12..=30).contains(&arrivals.len()), "{}", arrivals.len());
    assert!(arrivals.iter().any(|a| a.population == Population::CriticalLike));
    let duration_us = spec.duration_us();

    for (strategy, interval_ms, scoring) in [
        (Strategy::BaselineVirtualized, BASELINE_INTERVAL_MS, false),
        (Strategy::FixedThrottle, FIXED_INTERVAL_MS, false),
        (Strategy::Aiar, 16, true),
    ] {
        let r = run_simulation(&spec, strategy, &cost, &idle_for(&spec)).unwrap();
        let e = replay(&arrivals, interval_ms * 1_000, scoring, duration_us, &cost);
        assert_eq!(r.generated, arrivals.len() as u64, "{strategy}");
        assert_eq!(r.rendered_individually, arrivals.len() as u64, "{strategy}");
        assert_eq!(r.pending, 0);
        assert_eq!(r.cycles, e.cycles, "{strategy}");
        assert_eq!(r.janky_cycles, e.janky, "{strategy}");
        assert_eq!(r.render_work_total_us, e.work_total, "{strategy}");
        assert_eq!(r.commands, e.commands, "{strategy}");
        assert_eq!(r.scored, e.scored, "{strategy}");
        assert_eq!(r.critical_truth, e.truth, "{strategy}");
        assert_eq!(r.critical_recalled, e.recalled, "{strategy}");
        assert_eq!(r.p95_work_ratio, percentile(&e.ratios, 95.0), "{strategy}");
        let cpu = e.work_total as f64 / (2.0 * cost.cpu_capacity_us_per_s);
        assert!((r.avg_cpu_load - cpu).abs() < 1e-12, "{strategy}");
        assert_eq!(r.jank_pct, e.janky as f64 / e.cycles as f64);
    }
}

#[test]
fn zero_command_cost_reaches_the_cap() {
    let cost = CostModel {
        per_command_us: 0.0,
        ..CostModel::default()
    };
    let spec = WorkloadSpec::new(1_000.0, 1.0, 3);
    let bounds = SearchBounds {
        cap_eps: 50_000.0,
        ..SearchBounds::default()
    };
    let out = find_max_sustainable(
        Strategy::BaselineVirtualized,
        &cost,
        &spec,
        &idle_for(&spec),
        &Criteria::default(),
        &bounds,
        &SimOptions::probe(),
    )
    .unwrap();
    assert_eq!(out, SearchOutcome::AtLeastCap { eps: 50_000.0, probes: 7 });
}

#[test]
fn dearer_commands_never_raise_throughput() {
    let spec = WorkloadSpec::new(1_000.0, 2.0, 3);
    let script = idle_for(&spec);
    let max_at = |per_command_us| {
        let cost = CostModel {
            per_command_us,
            ..CostModel::default()
        };
        find_max_sustainable(
            Strategy::BaselineVirtualized,
            &cost,
            &spec,
            &script,
            &Criteria::default(),
            &SearchBounds::default(),
            &SimOptions::probe(),
        )
        .unwrap()
        .eps()
        .unwrap()
    };
    let (cheap, dear) = (max_at(100.0), max_at(200.0));
    assert!(dear <= cheap, "{dear} > {cheap}");
    assert!(dear > 0.0);
}

#[test]
fn impossible_criteria_are_unsustainable() {
    let spec = WorkloadSpec::new(100.0, 1.0, 3);
    let criteria = Criteria {
        max_p95_work_ratio: -1.0,
        ..Criteria::default()
    };
    let out = find_max_sustainable(
        Strategy::FixedThrottle,
        &CostModel::default(),
        &spec,
        &idle_for(&spec),
        &criteria,
        &SearchBounds::default(),
        &SimOptions::probe(),
    )
    .unwrap();
    assert!(matches!(out, SearchOutcome::Unsustainable { .. }));
    assert_eq!(out.eps(), None);
}

#[test]
fn comparison_has_one_row_per_strategy() {
    let spec = WorkloadSpec::new(500.0, 2.0, 4);
    let reports =
        compare_strategies(&spec, &CostModel::default(), &idle_for(&spec), None, &SimOptions::default()).unwrap();
    let names: Vec<_> = reports.iter().map(|r| r.strategy).collect();
    assert_eq!(names, Strategy::ALL);
    assert!(reports.iter().all(|r| r.generated == reports[0].generated));
    let table = render_table(&reports);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0].split_whitespace().collect::<Vec<_>>(), aiar_sim::compare::TABLE_COLUMNS);
    let json = serde_json::to_string(&reports).unwrap();
    let back: Vec<MetricsReport> = serde_json::from_str(&json).unwrap();
    assert_eq!(back, reports);
    for r in &reports {
        for v in [r.avg_cpu_load, r.jank_pct, r.recall_proxy] {
            assert!((0.0..=1.0).contains(&v));
        }
    }
}

#[test]
fn aiar_recall_beats_fixed_under_overload() {
    let spec = WorkloadSpec::new(15_000.0, 10.0, 8);
    let script = idle_for(&spec);
    let cost = CostModel::default();
    let aiar = run_simulation(&spec, Strategy::Aiar, &cost, &script).unwrap();
    let fixed = run_simulation(&spec, Strategy::FixedThrottle, &cost, &script).unwrap();
    assert!(aiar.recall_proxy >= fixed.recall_proxy);
    assert!(aiar.conserves() && fixed.conserves());
}
