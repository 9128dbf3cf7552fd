//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aiar_core::buffer::{Disposition, EnqueueOutcome, RingBuffer};
use aiar_core::compactor::{AbsorbOutcome, BurstCompactor, CompactorConfig, Flushed};
use aiar_core::scorer::ActorFrequencyTracker;
use aiar_core::sink::DiscardTransport;
use aiar_core::{InvestigationContext, Pipeline, PipelineConfig, PriorityClass, Scorer, SystemSignals, TelemetryEvent};
use aiar_sim::workload::generate_stream;
use aiar_sim::*;

struct Verdict {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(name: &'static str, pass: bool, detail: String) -> Verdict {
    Verdict { name, pass, detail }
}

const SEED: u64 = 7;
const OVERLOAD_FACTOR: f64 = 1.5;
const RUN_S: f64 = 30.0;
// Tolerance for "about equal" recall.
const RECALL_TIE: f64 = 0.02;

fn idle(duration_s: f64) -> AnalystScript {
    AnalystScript::idle((duration_s * 1_000.0).ceil() as u64)
}

fn event(id: u64, ts: u64, severity: u8, source: &str, actor: &str, kind: &str) -> TelemetryEvent {
    TelemetryEvent {
        event_id: format!("t{id}"),
        ts,
        severity,
        source_id: source.into(),
        actor_id: actor.into(),
        kind: kind.into(),
        reputation: 0.5,
        message: String::new(),
    }
}

struct Throughput {
    aiar: SearchOutcome,
    baseline: SearchOutcome,
    wall: Duration,
}

fn throughput() -> Throughput {
    let start = Instant::now();
    let template = WorkloadSpec::new(1_000.0, 5.0, SEED);
    let script = idle(template.duration_s);
    let search = |s| {
        find_max_sustainable(
            s,
            &CostModel::default(),
            &template,
            &script,
            &Criteria::default(),
            &SearchBounds::default(),
            &SimOptions::probe(),
        )
        .expect("search runs")
    };
    let (aiar, baseline) = std::thread::scope(|sc| {
        let a = sc.spawn(|| search(Strategy::Aiar));
        let b = sc.spawn(|| search(Strategy::BaselineVirtualized));
        (a.join().unwrap(), b.join().unwrap())
    });
    Throughput {
        aiar,
        baseline,
        wall: start.elapsed(),
    }
}

fn throughput_verdict(t: &Throughput) -> Verdict {
    let (a, b) = (t.aiar.eps(), t.baseline.eps());
    let ratio = match (a, b) {
        (Some(a), Some(b)) => a / b,
        _ => f64::NAN,
    };
    let capped = if matches!(t.aiar, SearchOutcome::AtLeastCap { .. }) { " (at cap)" } else { "" };
    verdict(
        "throughput ratio",
        ratio >= 3.0 && t.wall < Duration::from_secs(120),
        format!(
            "ai-ar {:.0}{capped} / baseline {:.0} eps = {ratio:.2} (need >= 3.0), wall {:.1}s (need < 120s)",
            a.unwrap_or(f64::NAN),
            b.unwrap_or(f64::NAN),
            t.wall.as_secs_f64()
        ),
    )
}

fn jank_verdict(rows: &[MetricsReport]) -> Verdict {
    let (b, a) = (&rows[0], &rows[2]);
    verdict(
        "jank reduction",
        b.jank_pct > 0.0 && a.jank_pct <= 0.40 * b.jank_pct,
        format!(
            "at {:.0} eps: ai-ar {:.3} vs baseline {:.3} (need <= 0.40x)",
            a.rate_eps, a.jank_pct, b.jank_pct
        ),
    )
}

fn recall_verdict(rows: &[MetricsReport]) -> Verdict {
    let (b, f, a) = (rows[0].recall_proxy, rows[1].recall_proxy, rows[2].recall_proxy);
    let pass = a > b && (b > f || (b - f).abs() <= RECALL_TIE) && a - b >= 0.15;
    verdict(
        "recall ordering",
        pass,
        format!("ai-ar {a:.3} > baseline {b:.3} >= fixed {f:.3} (tie {RECALL_TIE}), gap {:.3} (need >= 0.15)", a - b),
    )
}

fn work_verdict(rows: &[MetricsReport]) -> Verdict {
    let (b, a) = (&rows[0], &rows[2]);
    let ratio = a.render_work_total_us as f64 / b.render_work_total_us as f64;
    verdict(
        "render work reduction",
        (0.35..=0.65).contains(&ratio),
        format!(
            "at {:.0} eps: ai-ar {} us / baseline {} us = {ratio:.3} (need 0.35..=0.65)",
            a.rate_eps, a.render_work_total_us, b.render_work_total_us
        ),
    )
}

fn scoring_latency() -> Verdict {
    let spec = WorkloadSpec::new(40_000.0, 5.0, SEED);
    let mut scorer = Scorer::default();
    scorer.set_context(InvestigationContext::with_source("10.66.0.0"));
    let mut samples: Vec<Duration> = Vec::with_capacity(200_000);
    for a in generate_stream(&spec) {
        let t = Instant::now();
        std::hint::black_box(scorer.score(&a.event));
        samples.push(t.elapsed());
    }
    samples.sort_unstable();
    let p95 = samples[(samples.len() * 95).div_ceil(100) - 1];
    verdict(
        "scoring latency p95",
        p95 <= Duration::from_micros(1_300),
        format!("{} events, p95 {:.4} ms (need <= 1.3 ms)", samples.len(), p95.as_secs_f64() * 1e3),
    )
}

fn budget_invariant() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut cycles = 0u64;
    let mut violations = 0u64;
    let mut max_writes = 0usize;
    let mut id = 0u64;
    let kinds = ["login_failure", "port_scan", "dns_query", "ioc_match"];
    while cycles < 10_000 {
        let mut cfg = PipelineConfig::default();
        cfg.buffer_capacity = rng.random_range(50..3_000);
        let mut p = Pipeline::new(&cfg, DiscardTransport);
        let mut now = 0u64;
        for _ in 0..rng.random_range(50..400) {
            for _ in 0..rng.random_range(0..600) {
                let ev = event(
                    id,
                    now,
                    rng.random_range(0..=10),
                    &format!("10.0.0.{}", rng.random_range(0..8)),
                    &format!("a{}", rng.random_range(0..20)),
                    kinds[rng.random_range(0..kinds.len())],
                );
                id += 1;
                p.ingest(ev, now).unwrap();
            }
            let sig = SystemSignals {
                cpu_load: rng.random(),
                scroll_velocity: if rng.random_bool(0.2) { 200.0 } else { 0.0 },
                selection_active: rng.random_bool(0.2),
                selection_context: Some(InvestigationContext::with_source("10.0.0.1")),
                queue_fill_ratio: 0.0,
                last_interaction_age_ms: rng.random_range(0..60_000),
            };
            let r = p.run_cycle(&sig, now);
            let writes = r.commands.iter().filter(|c| c.writes_node()).count();
            max_writes = max_writes.max(writes);
            if writes > 50 || writes > r.policy.budget {
                violations += 1;
            }
            cycles += 1;
            now += rng.random_range(1..1_500);
        }
    }
    verdict(
        "budget invariant",
        violations == 0,
        format!("{cycles} random cycles, max node writes {max_writes}, violations {violations} (need 0, budget 50)"),
    )
}

fn conservation() -> Verdict {
    let failures: Vec<String> = std::thread::scope(|sc| {
        let handles: Vec<_> = (0..4u64)
            .map(|lane| {
                sc.spawn(move || {
                    let mut bad = Vec::new();
                    for run in (lane..100).step_by(4) {
                        let mut rng = ChaCha8Rng::seed_from_u64(1_000 + run);
                        let strategy = Strategy::ALL[run as usize % 3];
                        let spec = WorkloadSpec::new(rng.random_range(20.0..25_000.0), rng.random_range(0.5..3.0), run);
                        let end_ms = (spec.duration_s * 1_000.0).ceil() as u64;
                        let script = AnalystScript::builtin(
                            script::BUILTIN_SCRIPTS[rng.random_range(0..3)],
                            end_ms,
                        )
                        .unwrap();
                        let mut opts = SimOptions::default();
                        opts.pipeline.buffer_capacity = rng.random_range(100..60_000);
                        opts.drain = rng.random_bool(0.7);
                        opts.drain_horizon_ms = rng.random_range(0..20_000);
                        let r = simulate(&spec, strategy, &CostModel::default(), &script, &opts).unwrap().report;
                        if !r.conserves() {
                            bad.push(format!("run {run} ({strategy})"));
                        }
                    }
                    bad
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    verdict(
        "conservation invariant",
        failures.is_empty(),
        format!("100 seeded runs, {} imbalanced {:?}", failures.len(), failures),
    )
}

// Brute-force buffer: a flat list in arrival order. The victim is the oldest
// entry of the lowest tier present, where unscored ranks with Informational.
fn buffer_oracle_case(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let capacity = rng.random_range(1..24);
    let mut buf = RingBuffer::new(capacity, 1_000_000);
    let mut model: Vec<(u64, Option<PriorityClass>)> = Vec::new();
    let class_of = |id: u64| PriorityClass::from_code((id * 7 % 3) as u8).unwrap();
    let tier = |c: Option<PriorityClass>| match c {
        None | Some(PriorityClass::Informational) => 0,
        Some(PriorityClass::Warning) => 1,
        Some(PriorityClass::Critical) => 2,
    };
    for id in 0..rng.random_range(1..80u64) {
        if rng.random_bool(0.3) {
            buf.score_unscored(|e| Disposition::Keep(class_of(e.event_id[1..].parse().unwrap())));
            for m in &mut model {
                m.1.get_or_insert(class_of(m.0));
            }
        }
        let outcome = buf.enqueue(event(id, 0, 5, "s", "a", "k"), 0).unwrap();
        let expected_victim = if model.len() == capacity {
            let t = model.iter().map(|m| tier(m.1)).min().unwrap();
            let pos = model.iter().position(|m| tier(m.1) == t).unwrap();
            Some((model.remove(pos), t))
        } else {
            None
        };
        model.push((id, None));
        match (outcome, expected_victim) {
            (EnqueueOutcome::Stored, None) => {}
            (EnqueueOutcome::StoredWithEviction(v), Some(((vid, _), t))) if t < 2 && v.event.event_id == format!("t{vid}") => {}
            (EnqueueOutcome::DroppedCritical, Some((_, 2))) => {}
            (got, want) => return Err(format!("enqueue {id}: got {got:?}, want {want:?}")),
        }
        let ids: Vec<(u64, Option<PriorityClass>)> = buf
            .iter_fifo()
            .map(|e| (e.event.event_id[1..].parse().unwrap(), e.current_class))
            .collect();
        if ids != model {
            return Err(format!("after enqueue {id}: {ids:?} vs {model:?}"));
        }
    }
    Ok(())
}

fn actor_oracle_case(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let window = rng.random_range(1..200);
    let mut tracker = ActorFrequencyTracker::new(window);
    let mut log: Vec<(u8, u64)> = Vec::new();
    let mut latest = 0u64;
    for _ in 0..rng.random_range(1..300) {
        let actor = rng.random_range(0..5u8);
        // Mostly forward, sometimes late.
        let ts = if rng.random_bool(0.1) {
            latest.saturating_sub(rng.random_range(0..50))
        } else {
            latest + rng.random_range(0..30)
        };
        tracker.record_actor(&format!("u{actor}"), ts);
        latest = latest.max(ts);
        log.push((actor, latest));
        let q = rng.random_range(0..5u8);
        let now = latest + rng.random_range(0..window * 2);
        let want = log.iter().filter(|&&(a, t)| a == q && t + window > now && t <= now).count();
        let got = tracker.count(&format!("u{q}"), now);
        if got != want {
            return Err(format!("count(u{q}, {now}) window {window}: got {got}, want {want}"));
        }
    }
    Ok(())
}

fn cluster_oracle_case(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let threshold = rng.random_range(1..6);
    let window = rng.random_range(1..2_000);
    let mut c = BurstCompactor::new(CompactorConfig {
        threshold,
        window_ms: window,
        ..CompactorConfig::default()
    });
    let mut steps: Vec<(u8, u64)> = Vec::new();
    let mut got: Vec<(u8, u64)> = Vec::new();
    let key_of = |e: &TelemetryEvent| e.source_id[1..].parse::<u8>().unwrap();
    let collect = |f: Vec<Flushed>, got: &mut Vec<(u8, u64)>| {
        for x in f {
            match x {
                Flushed::Cluster(n) => got.push((n.key.source_id[1..].parse().unwrap(), n.count)),
                Flushed::Single(e, _) => got.push((key_of(&e), 1)),
            }
        }
    };
    for i in 0..rng.random_range(1..300u64) {
        let k = rng.random_range(0..6u8);
        let ts = rng.random_range(0..5_000);
        steps.push((k, ts));
        match c.absorb(event(i, ts, 5, &format!("s{k}"), "a", "k"), PriorityClass::Warning, ts) {
            AbsorbOutcome::PassThrough(_) => return Err("non-critical passed through".into()),
            AbsorbOutcome::Absorbed | AbsorbOutcome::ClusterFormed(_) => {}
        }
    }
    collect(c.flush_all(), &mut got);
    got.sort_unstable();

    let mut groups: Vec<(u8, u64, u64, u64)> = Vec::new();
    let mut open: HashMap<u8, usize> = HashMap::new();
    for &(k, ts) in &steps {
        match open.get(&k) {
            Some(&g) if groups[g].2.max(ts) - groups[g].1.min(ts) <= window => {
                let g = &mut groups[g];
                g.1 = g.1.min(ts);
                g.2 = g.2.max(ts);
                g.3 += 1;
            }
            _ => {
                open.insert(k, groups.len());
                groups.push((k, ts, ts, 1));
            }
        }
    }
    let mut want: Vec<(u8, u64)> = Vec::new();
    for (k, _, _, n) in groups {
        if n as usize >= threshold {
            want.push((k, n));
        } else {
            want.extend(std::iter::repeat_n((k, 1), n as usize));
        }
    }
    want.sort_unstable();
    if got != want {
        return Err(format!("threshold {threshold} window {window}: {got:?} vs {want:?}"));
    }
    Ok(())
}

fn oracle_suites() -> Verdict {
    type Case = fn(&mut ChaCha8Rng) -> Result<(), String>;
    let suites: [(&str, Case); 3] = [
        ("eviction", buffer_oracle_case),
        ("actor frequency", actor_oracle_case),
        ("cluster grouping", cluster_oracle_case),
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    for (i, (name, case)) in suites.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + i as u64);
        let mut first_err = None;
        let mut ok = 0;
        for _ in 0..1_000 {
            match case(&mut rng) {
                Ok(()) => ok += 1,
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        pass &= ok == 1_000;
        parts.push(format!("{name} {ok}/1000"));
        if let Some(e) = first_err {
            parts.push(format!("first mismatch: {e}"));
        }
    }
    verdict("oracle equivalence", pass, parts.join(", "))
}

fn low_rate_noop() -> Verdict {
    let mut details = Vec::new();
    let mut pass = true;
    for rate in [5.0, 20.0, 50.0] {
        let spec = WorkloadSpec::new(rate, RUN_S, SEED);
        let opts = SimOptions {
            record_rendered: true,
            ..SimOptions::default()
        };
        let run = |s| simulate(&spec, s, &CostModel::default(), &idle(RUN_S), &opts).unwrap();
        let (a, b) = (run(Strategy::Aiar), run(Strategy::BaselineVirtualized));
        let sa: BTreeSet<_> = a.rendered_ids.iter().collect();
        let sb: BTreeSet<_> = b.rendered_ids.iter().collect();
        let same = sa == sb && sa.len() as u64 == b.report.generated;
        pass &= same;
        details.push(format!("{rate} eps: {} vs {} ids{}", sa.len(), sb.len(), if same { "" } else { " DIFFER" }));
    }
    verdict("low-rate no-op", pass, details.join(", "))
}

fn main() {
    let started = Instant::now();
    let mut verdicts: Vec<Option<Verdict>> = (0..9).map(|_| None).collect();

    std::thread::scope(|sc| {
        let independent = [
            sc.spawn(scoring_latency),
            sc.spawn(budget_invariant),
            sc.spawn(conservation),
            sc.spawn(oracle_suites),
            sc.spawn(low_rate_noop),
        ];

        let t = throughput();
        verdicts[0] = Some(throughput_verdict(&t));
        match t.baseline.eps() {
            Some(base) => {
                let cost = CostModel::default();
                let script = idle(RUN_S);
                let opts = SimOptions::default();
                let overload = WorkloadSpec::new(OVERLOAD_FACTOR * base, RUN_S, SEED);
                let equal = WorkloadSpec::new(base, RUN_S, SEED);
                let (over, eq) = std::thread::scope(|inner| {
                    let o = inner.spawn(|| compare_strategies(&overload, &cost, &script, None, &opts).unwrap());
                    let e = inner.spawn(|| compare_strategies(&equal, &cost, &script, None, &opts).unwrap());
                    (o.join().unwrap(), e.join().unwrap())
                });
                println!("overload comparison:\n{}", render_table(&over));
                println!("equal-rate comparison:\n{}", render_table(&eq));
                verdicts[1] = Some(jank_verdict(&over));
                verdicts[2] = Some(work_verdict(&eq));
                verdicts[3] = Some(recall_verdict(&over));
            }
            None => {
                for (slot, name) in [(1, "jank reduction"), (2, "render work reduction"), (3, "recall ordering")] {
                    verdicts[slot] = Some(verdict(name, false, "baseline has no sustainable rate".into()));
                }
            }
        }
        for (slot, h) in (4..9).zip(independent) {
            verdicts[slot] = Some(h.join().expect("criterion panicked"));
        }
    });

    let mut failed = 0;
    for v in verdicts.into_iter().flatten() {
        failed += usize::from(!v.pass);
        println!("{} {:<24} {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    println!(
        "{} of 9 criteria passed in {:.1}s",
        9 - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
