//! Bounded ingest buffer between the telemetry stream and the scorer.
//!
//! Every arriving event lands here first and stays until it is rendered,
//! diverted to the compactor, or pruned by TTL. The buffer is split into
//! per-class lanes (plus one lane for events not yet scored) so that the
//! overflow victim, "the oldest entry of the lowest class present", is
//! found in constant time. Each lane is ordered by arrival sequence, which
//! makes the union of the lanes a FIFO.
//!
//! Unscored entries rank with Informational for eviction: an unscored
//! event is never kept in preference to a scored Critical.

use std::collections::VecDeque;

use serde::Serialize;

use crate::event::{InvalidEvent, Millis, PriorityClass, TelemetryEvent};

pub const DEFAULT_CAPACITY: usize = 50_000;
pub const DEFAULT_TTL_MS: Millis = 5_000;

const UNSCORED: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct BufferedEvent {
    pub event: TelemetryEvent,
    pub enqueued_at: Millis,
    pub ttl_deadline: Millis,
    pub current_class: Option<PriorityClass>,
    seq: u64,
}

impl BufferedEvent {
    /// Arrival sequence number, unique per buffer.
    pub fn seq(&self) -> u64 {
        self.seq
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnqueueOutcome {
    Stored,
    /// The buffer was full; `evicted` must be routed to the aggregation path.
    StoredWithEviction(BufferedEvent),
    /// The buffer held only Critical entries; the oldest one was lost.
    DroppedCritical,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BufferCounters {
    pub enqueued: u64,
    pub drained: u64,
    pub pruned_ttl: u64,
    pub downgraded: u64,
    pub dropped_critical: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Occupancy {
    pub length: usize,
    pub fill_ratio: f64,
    pub counters: BufferCounters,
}

/// What the scoring stage does with a freshly scored entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposition {
    /// Stay in the buffer, now carrying a class.
    Keep(PriorityClass),
    /// Leave the buffer for the aggregation path.
    Divert(PriorityClass),
}

#[derive(Debug, Clone)]
pub struct RingBuffer {
    capacity: usize,
    ttl_ms: Millis,
    /// Critical, Warning, Informational, Unscored.
    lanes: [VecDeque<BufferedEvent>; 4],
    len: usize,
    next_seq: u64,
    clock: Millis,
    counters: BufferCounters,
}

impl RingBuffer {
    /// # Panics
    ///
    /// Panics if `capacity` is 0.
    pub fn new(capacity: usize, ttl_ms: Millis) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            capacity,
            ttl_ms,
            lanes: Default::default(),
            len: 0,
            next_seq: 0,
            clock: 0,
            counters: BufferCounters::default(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn ttl_ms(&self) -> Millis {
        self.ttl_ms
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn counters(&self) -> BufferCounters {
        self.counters
    }

    pub fn unscored_len(&self) -> usize {
        self.lanes[UNSCORED].len()
    }

    pub fn class_len(&self, class: PriorityClass) -> usize {
        self.lanes[class.code() as usize].len()
    }

    /// Stores `ev`, evicting when full.
    ///
    /// `now` is clamped to the latest time the buffer has seen, so TTL
    /// deadlines stay ordered by arrival even if the caller's clock jitters.
    pub fn enqueue(
        &mut self,
        ev: TelemetryEvent,
        now: Millis,
    ) -> Result<EnqueueOutcome, InvalidEvent> {
        ev.validate()?;
        self.clock = self.clock.max(now);

        let outcome = if self.len == self.capacity {
            let victim_lane = self.victim_lane();
            let victim = self.lanes[victim_lane]
                .pop_front()
                .expect("victim lane is non-empty");
            self.len -= 1;
            if victim_lane == PriorityClass::Critical.code() as usize {
                self.counters.dropped_critical += 1;
                EnqueueOutcome::DroppedCritical
            } else {
                self.counters.downgraded += 1;
                EnqueueOutcome::StoredWithEviction(victim)
            }
        } else {
            EnqueueOutcome::Stored
        };

        let entry = BufferedEvent {
            event: ev,
            enqueued_at: self.clock,
            ttl_deadline: self.clock + self.ttl_ms,
            current_class: None,
            seq: self.next_seq,
        };
        self.next_seq += 1;
        self.lanes[UNSCORED].push_back(entry);
        self.len += 1;
        self.counters.enqueued += 1;
        Ok(outcome)
    }

    // Lowest class first; Informational and Unscored share a rank, so the
    // older of their two heads goes.
    fn victim_lane(&self) -> usize {
        let info = self.lanes[PriorityClass::Informational.code() as usize].front();
        let unscored = self.lanes[UNSCORED].front();
        match (info, unscored) {
            (Some(i), Some(u)) => {
                if i.seq < u.seq {
                    PriorityClass::Informational.code() as usize
                } else {
                    UNSCORED
                }
            }
            (Some(_), None) => PriorityClass::Informational.code() as usize,
            (None, Some(_)) => UNSCORED,
            (None, None) => {
                if self.lanes[PriorityClass::Warning.code() as usize].is_empty() {
                    PriorityClass::Critical.code() as usize
                } else {
                    PriorityClass::Warning.code() as usize
                }
            }
        }
    }

    /// Removes and returns every entry whose deadline is strictly before
    /// `now`, in arrival order.
    pub fn prune_expired(&mut self, now: Millis) -> Vec<BufferedEvent> {
        self.clock = self.clock.max(now);
        let mut pruned = Vec::new();
        for lane in &mut self.lanes {
            // Deadlines are non-decreasing along each lane.
            while lane.front().is_some_and(|e| e.ttl_deadline < now) {
                pruned.push(lane.pop_front().unwrap());
            }
        }
        self.len -= pruned.len();
        self.counters.pruned_ttl += pruned.len() as u64;
        pruned.sort_unstable_by_key(|e| e.seq);
        pruned
    }

    /// Removes up to `max_n` entries in arrival order. Expired entries are
    /// pruned first against the latest clock the buffer has seen.
    pub fn drain_batch(&mut self, max_n: usize) -> Vec<BufferedEvent> {
        self.prune_expired(self.clock);
        let mut out = Vec::with_capacity(max_n.min(self.len));
        while out.len() < max_n {
            let lane = (0..self.lanes.len())
                .filter_map(|i| self.lanes[i].front().map(|e| (e.seq, i)))
                .min();
            match lane {
                Some((_, i)) => out.push(self.lanes[i].pop_front().unwrap()),
                None => break,
            }
        }
        self.len -= out.len();
        self.counters.drained += out.len() as u64;
        out
    }

    pub fn occupancy(&mut self) -> Occupancy {
        self.prune_expired(self.clock);
        Occupancy {
            length: self.len,
            fill_ratio: self.len as f64 / self.capacity as f64,
            counters: self.counters,
        }
    }

    /// Scores every unscored entry in arrival order. Diverted entries leave
    /// the buffer (counted as drained) and are returned with their class set.
    pub fn score_unscored<F>(&mut self, mut decide: F) -> Vec<BufferedEvent>
    where
        F: FnMut(&TelemetryEvent) -> Disposition,
    {
        let mut diverted = Vec::new();
        // Every scored entry is older than every unscored one, so appending
        // keeps the class lanes in arrival order.
        while let Some(mut entry) = self.lanes[UNSCORED].pop_front() {
            match decide(&entry.event) {
                Disposition::Keep(class) => {
                    entry.current_class = Some(class);
                    self.lanes[class.code() as usize].push_back(entry);
                }
                Disposition::Divert(class) => {
                    entry.current_class = Some(class);
                    diverted.push(entry);
                }
            }
        }
        self.len -= diverted.len();
        self.counters.drained += diverted.len() as u64;
        diverted
    }

    /// Scored entries in (class, arrival) order that pass `eligible`, at most
    /// `per_class` from each class.
    pub fn render_candidates<F>(&self, per_class: usize, mut eligible: F) -> Vec<&BufferedEvent>
    where
        F: FnMut(&BufferedEvent) -> bool,
    {
        let mut out = Vec::new();
        for class in PriorityClass::ALL {
            out.extend(
                self.lanes[class.code() as usize]
                    .iter()
                    .filter(|e| eligible(e))
                    .take(per_class),
            );
        }
        out
    }

    /// Removes the entries with the given sequence numbers (counted as
    /// drained) and returns them. Unknown sequence numbers are ignored.
    pub fn take_by_seq(&mut self, seqs: &[u64]) -> Vec<BufferedEvent> {
        let mut out = Vec::with_capacity(seqs.len());
        for &seq in seqs {
            for lane in &mut self.lanes {
                if let Ok(pos) = lane.binary_search_by_key(&seq, |e| e.seq) {
                    out.push(lane.remove(pos).unwrap());
                    break;
                }
            }
        }
        self.len -= out.len();
        self.counters.drained += out.len() as u64;
        out
    }

    /// All entries in arrival order.
    pub fn iter_fifo(&self) -> impl Iterator<Item = &BufferedEvent> {
        let mut all: Vec<&BufferedEvent> = self.lanes.iter().flatten().collect();
        all.sort_unstable_by_key(|e| e.seq);
        all.into_iter()
    }
}

impl Default for RingBuffer {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY, DEFAULT_TTL_MS)
    }
}
