//! The pipeline context: owns the pipeline and drives its cycles.

use std::collections::VecDeque;
use std::io::{BufRead, Write};
use std::sync::mpsc::{Receiver, RecvTimeoutError, TryRecvError};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;

use aiar_core::event::Millis;
use aiar_core::sink::SinkCounters;
use aiar_core::{CommandTransport, Ledger, Pipeline, PipelineConfig, SystemSignals, TelemetryEvent};

use crate::serve::{SignalCounters, SignalInbox};
use crate::settings::CliError;
use crate::wire::{parse_event_line, ParseError, SignalTracker};

/// Cycles keep running after input ends until nothing is pending, or this
/// long on the pipeline clock.
pub const DRAIN_HORIZON_MS: Millis = 60_000;

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunCounters {
    pub lines: u64,
    pub parse_errors: u64,
    pub cycles: u64,
    pub ledger: Ledger,
    pub sink: SinkCounters,
    pub signals: SignalCounters,
}

/// Either side of an ingestion queue item.
pub enum Ingested {
    Event(TelemetryEvent),
    Rejected(ParseError),
}

struct Driver<T> {
    pipeline: Pipeline<T>,
    tracker: SignalTracker,
    inbox: Option<SignalInbox>,
    next_cycle: Millis,
    cycles: u64,
    recent_busy: VecDeque<(Instant, Duration)>,
}

impl<T: CommandTransport> Driver<T> {
    fn new(cfg: &PipelineConfig, transport: T, inbox: Option<SignalInbox>, start: Millis) -> Self {
        Self {
            pipeline: Pipeline::new(cfg, transport),
            tracker: SignalTracker::new(start),
            inbox,
            next_cycle: start,
            cycles: 0,
            recent_busy: VecDeque::new(),
        }
    }

    // Share of the last second of wall time spent inside cycles.
    fn load(&mut self) -> f64 {
        let now = Instant::now();
        while self
            .recent_busy
            .front()
            .is_some_and(|(t, _)| now.duration_since(*t) > Duration::from_secs(1))
        {
            self.recent_busy.pop_front();
        }
        let busy: Duration = self.recent_busy.iter().map(|(_, d)| *d).sum();
        busy.as_secs_f64().min(1.0)
    }

    fn cycle(&mut self, now: Millis, measure_load: bool) {
        if let Some((sig, interacted)) = self.inbox.as_ref().and_then(SignalInbox::take) {
            self.tracker.update(sig, interacted, now);
        }
        let sig = SystemSignals {
            cpu_load: if measure_load { self.load() } else { 0.0 },
            ..self.tracker.snapshot(now)
        };
        let started = Instant::now();
        let report = self.pipeline.run_cycle(&sig, now);
        self.recent_busy.push_back((started, started.elapsed()));
        self.next_cycle = report.next_cycle_at;
        self.cycles += 1;
    }

    fn finish(self, mut counters: RunCounters) -> (RunCounters, T) {
        counters.cycles = self.cycles;
        counters.ledger = self.pipeline.ledger();
        counters.sink = self.pipeline.sink().counters();
        counters.signals = self.inbox.map(|i| i.counters()).unwrap_or_default();
        (counters, self.pipeline.into_sink().into_transport())
    }
}

/// Replays line-delimited events on a virtual clock that starts at the
/// first valid event's timestamp and follows event time. `speed` > 0 paces
/// the replay against the wall clock at that multiple; 0 runs flat out.
/// Bad lines are reported to `errors` and skipped.
pub fn replay<R: BufRead, T: CommandTransport>(
    input: R,
    cfg: &PipelineConfig,
    transport: T,
    speed: f64,
    inbox: Option<SignalInbox>,
    errors: &mut dyn Write,
) -> Result<(RunCounters, T), CliError> {
    let mut counters = RunCounters::default();
    let mut driver: Option<Driver<T>> = None;
    let mut transport = Some(transport);
    let mut clock: Millis = 0;
    let wall_start = Instant::now();
    let mut first_ts = 0;

    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| CliError::io("reading input", e))?;
        counters.lines += 1;
        let ev = match parse_event_line(&line, i + 1) {
            Ok(Some(ev)) => ev,
            Ok(None) => continue,
            Err(e) => {
                counters.parse_errors += 1;
                let _ = writeln!(errors, "{e}");
                continue;
            }
        };
        let d = driver.get_or_insert_with(|| {
            clock = ev.ts;
            first_ts = ev.ts;
            Driver::new(cfg, transport.take().unwrap(), inbox.clone(), ev.ts)
        });
        clock = clock.max(ev.ts);
        if speed > 0.0 {
            let due = Duration::from_secs_f64((clock - first_ts) as f64 / 1_000.0 / speed);
            if let Some(wait) = due.checked_sub(wall_start.elapsed()) {
                thread::sleep(wait);
            }
        }
        while d.next_cycle < clock {
            let at = d.next_cycle;
            d.cycle(at, false);
        }
        d.pipeline.ingest(ev, clock).expect("parsed events are in range");
    }

    let Some(mut d) = driver else {
        return Ok((counters, transport.unwrap()));
    };
    let horizon = clock + DRAIN_HORIZON_MS;
    while !d.pipeline.is_quiescent() && d.next_cycle <= horizon {
        let at = d.next_cycle;
        d.cycle(at, false);
    }
    Ok(d.finish(counters))
}

/// Runs in real time until the ingestion side hangs up and everything
/// pending has been rendered. The pipeline clock is milliseconds since start.
pub fn run_live<T: CommandTransport>(
    events: Receiver<Ingested>,
    cfg: &PipelineConfig,
    transport: T,
    inbox: SignalInbox,
) -> (RunCounters, T) {
    let start = Instant::now();
    let now = || start.elapsed().as_millis() as Millis;
    let mut counters = RunCounters::default();
    let mut d = Driver::new(cfg, transport, Some(inbox), 0);
    let mut open = true;
    let mut closed_at = 0;

    let accept = |item: Ingested, d: &mut Driver<T>, counters: &mut RunCounters| {
        counters.lines += 1;
        match item {
            Ingested::Event(ev) => {
                let _ = d.pipeline.ingest(ev, now());
            }
            Ingested::Rejected(e) => {
                counters.parse_errors += 1;
                log::warn!("{e}");
            }
        }
    };

    loop {
        if open {
            loop {
                match events.try_recv() {
                    Ok(item) => accept(item, &mut d, &mut counters),
                    Err(TryRecvError::Empty) => break,
                    Err(TryRecvError::Disconnected) => {
                        open = false;
                        closed_at = now();
                        break;
                    }
                }
            }
        }
        if !open && (d.pipeline.is_quiescent() || now() > closed_at + DRAIN_HORIZON_MS) {
            break;
        }
        if now() >= d.next_cycle {
            d.cycle(now(), true);
        }
        let wait = Duration::from_millis(d.next_cycle.saturating_sub(now()));
        if open {
            match events.recv_timeout(wait) {
                Ok(item) => accept(item, &mut d, &mut counters),
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => {
                    open = false;
                    closed_at = now();
                }
            }
        } else {
            thread::sleep(wait);
        }
    }
    d.finish(counters)
}

/// Parses lines into `tx` until the reader ends. Blocks when the queue is
/// full, which is how a slow pipeline pushes back on its producer.
pub fn ingest_lines<R: BufRead>(reader: R, tx: &std::sync::mpsc::SyncSender<Ingested>) {
    for (i, line) in reader.lines().enumerate() {
        let Ok(line) = line else { break };
        let item = match parse_event_line(&line, i + 1) {
            Ok(Some(ev)) => Ingested::Event(ev),
            Ok(None) => continue,
            Err(e) => Ingested::Rejected(e),
        };
        if tx.send(item).is_err() {
            break;
        }
    }
}
