//! All three strategies on one trace, as a table.

use std::fmt::Write as _;

use crate::cost::CostModel;
use crate::run::{simulate, MetricsReport, SimOptions, Strategy};
use crate::script::AnalystScript;
use crate::search::{find_max_sustainable, Criteria, SearchBounds};
use crate::workload::WorkloadSpec;
use crate::SimError;

/// Runs every strategy on the same trace and script, one thread each. With
/// `search`, each row also carries that strategy's max sustainable rate,
/// probed with the same template.
pub fn compare_strategies(
    spec: &WorkloadSpec,
    cost: &CostModel,
    script: &AnalystScript,
    search: Option<(&Criteria, &SearchBounds)>,
    opts: &SimOptions,
) -> Result<Vec<MetricsReport>, SimError> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = Strategy::ALL
            .iter()
            .map(|&strategy| {
                scope.spawn(move || -> Result<MetricsReport, SimError> {
                    let mut report = simulate(spec, strategy, cost, script, opts)?.report;
                    if let Some((criteria, bounds)) = search {
                        let probe_opts = SimOptions { drain: false, ..opts.clone() };
                        report.max_sustainable_eps =
                            find_max_sustainable(strategy, cost, spec, script, criteria, bounds, &probe_opts)?
                                .eps();
                    }
                    Ok(report)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}

pub const TABLE_COLUMNS: &[&str] = &[
    "strategy",
    "max_sustainable_eps",
    "avg_cpu_load",
    "jank_pct",
    "recall_proxy",
    "render_work_total_us",
    "dropped_critical",
    "downgraded",
    "pruned",
];

/// Aligned text table, one row per report.
pub fn render_table(reports: &[MetricsReport]) -> String {
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.strategy.to_string(),
                r.max_sustainable_eps.map_or("-".into(), |e| format!("{e:.0}")),
                format!("{:.3}", r.avg_cpu_load),
                format!("{:.3}", r.jank_pct),
                format!("{:.3}", r.recall_proxy),
                r.render_work_total_us.to_string(),
                r.dropped_critical.to_string(),
                r.downgraded.to_string(),
                r.pruned.to_string(),
            ]
        })
        .collect();
    let widths: Vec<usize> = TABLE_COLUMNS
        .iter()
        .enumerate()
        .map(|(i, h)| rows.iter().map(|r| r[i].len()).chain([h.len()]).max().unwrap())
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &mut TABLE_COLUMNS.iter().copied());
    for r in &rows {
        line(&mut out, &mut r.iter().map(String::as_str));
    }
    out
}
