//! Event loop of the flow-level simulator.
//!
//! Each AP is a processor-sharing server. Its capacity is the aggregate
//! throughput of its current association state and changes only when a
//! station joins or leaves. Service is tracked in virtual time: `v` is the
//! number of bits every active download at the AP has received so far, so a
//! download that starts at `v0` with `b` bits finishes when `v = v0 + b`.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use rand::distributions::{Distribution, WeightedIndex};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;

use crate::delay::FileClassMix;
use crate::error::{config, Error, Result};
use crate::units::Bits;

/// Relative tolerance of the flow-accounting audit.
pub const AUDIT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug)]
struct Tag {
    finish_v: f64,
    seq: u64,
    sta: usize,
}

impl PartialEq for Tag {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Tag {}

impl PartialOrd for Tag {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Tag {
    fn cmp(&self, other: &Self) -> Ordering {
        self.finish_v.total_cmp(&other.finish_v).then(self.seq.cmp(&other.seq))
    }
}

/// A processor-sharing server in virtual time.
#[derive(Debug)]
pub(crate) struct PsServer {
    capacity_bps: f64,
    v: f64,
    last_t: f64,
    queue: BinaryHeap<Reverse<Tag>>,
    seq: u64,
    /// Bits served per active download, integrated explicitly.
    audit: Option<HashMap<usize, (f64, f64)>>,
    audit_max_rel_error: f64,
}

impl PsServer {
    pub(crate) fn new(audit: bool) -> Self {
        PsServer {
            capacity_bps: 0.0,
            v: 0.0,
            last_t: 0.0,
            queue: BinaryHeap::new(),
            seq: 0,
            audit: audit.then(HashMap::new),
            audit_max_rel_error: 0.0,
        }
    }

    pub(crate) fn active(&self) -> usize {
        self.queue.len()
    }

    pub(crate) fn audit_max_rel_error(&self) -> f64 {
        self.audit_max_rel_error
    }

    fn advance(&mut self, t: f64) {
        let n = self.queue.len();
        if n > 0 && t > self.last_t {
            let share = self.capacity_bps / n as f64;
            let served = (t - self.last_t) * share;
            self.v += served;
            if let Some(audit) = self.audit.as_mut() {
                let shares: f64 = audit.len() as f64 * share;
                let gap = (shares - self.capacity_bps).abs() / self.capacity_bps;
                self.audit_max_rel_error = self.audit_max_rel_error.max(gap);
                for (served_bits, _) in audit.values_mut() {
                    *served_bits += served;
                }
            }
        }
        self.last_t = self.last_t.max(t);
    }

    pub(crate) fn set_capacity(&mut self, t: f64, capacity_bps: f64) {
        self.advance(t);
        self.capacity_bps = capacity_bps;
    }

    pub(crate) fn start(&mut self, t: f64, sta: usize, size_bits: f64) {
        self.advance(t);
        self.seq += 1;
        self.queue.push(Reverse(Tag { finish_v: self.v + size_bits, seq: self.seq, sta }));
        if let Some(audit) = self.audit.as_mut() {
            audit.insert(sta, (0.0, size_bits));
        }
    }

    /// Time of the next completion, if any download is active.
    pub(crate) fn next_completion(&self) -> Option<f64> {
        let Reverse(head) = self.queue.peek()?;
        let n = self.queue.len() as f64;
        Some(self.last_t + (head.finish_v - self.v).max(0.0) * n / self.capacity_bps)
    }

    /// Completes the head download at time `t`; returns its station.
    pub(crate) fn complete(&mut self, t: f64) -> usize {
        self.advance(t);
        let Reverse(head) = self.queue.pop().expect("completion on an idle server");
        // Snap to the exact finish tag so rounding does not accumulate.
        self.v = self.v.max(head.finish_v);
        if let Some(audit) = self.audit.as_mut() {
            if let Some((served, size)) = audit.remove(&head.sta) {
                let err = (served - size).abs() / size;
                self.audit_max_rel_error = self.audit_max_rel_error.max(err);
            }
        }
        head.sta
    }
}

/// Draws file classes, sizes and read times for one run.
#[derive(Debug)]
pub(crate) struct FileSampler {
    class: WeightedIndex<f64>,
    size: Vec<Exp<f64>>,
    read: Vec<Exp<f64>>,
}

impl FileSampler {
    pub(crate) fn new(mix: &FileClassMix) -> Result<Self> {
        mix.validate()?;
        let class = WeightedIndex::new(mix.classes.iter().map(|c| c.probability))
            .map_err(|e| config(format!("file class law: {e}")))?;
        let exp = |mean: f64| Exp::new(1.0 / mean).map_err(|e| Error::Config(format!("exponential mean {mean}: {e}")));
        let size = mix
            .classes
            .iter()
            .map(|c| exp(Bits::from_bytes(c.mean_size_bytes).0))
            .collect::<Result<_>>()?;
        let read = mix.classes.iter().map(|c| exp(c.mean_read_s)).collect::<Result<_>>()?;
        Ok(FileSampler { class, size, read })
    }

    /// Class and size in bits of a fresh file.
    pub(crate) fn file(&self, rng: &mut ChaCha8Rng) -> (usize, f64) {
        let l = self.class.sample(rng);
        (l, self.size[l].sample(rng))
    }

    pub(crate) fn read_time(&self, class: usize, rng: &mut ChaCha8Rng) -> f64 {
        self.read[class].sample(rng)
    }
}

/// Timed events other than download completions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum TimerKind {
    Arrival,
    ReadEnd(usize),
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Timer {
    pub(crate) t: f64,
    seq: u64,
    pub(crate) kind: TimerKind,
}

impl PartialEq for Timer {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Timer {}

impl PartialOrd for Timer {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Timer {
    fn cmp(&self, other: &Self) -> Ordering {
        self.t.total_cmp(&other.t).then(self.seq.cmp(&other.seq))
    }
}

#[derive(Debug, Default)]
pub(crate) struct Timers {
    heap: BinaryHeap<Reverse<Timer>>,
    seq: u64,
}

impl Timers {
    pub(crate) fn push(&mut self, t: f64, kind: TimerKind) {
        self.seq += 1;
        self.heap.push(Reverse(Timer { t, seq: self.seq, kind }));
    }

    pub(crate) fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|Reverse(x)| x.t)
    }

    pub(crate) fn pop(&mut self) -> Option<Timer> {
        self.heap.pop().map(|Reverse(x)| x)
    }
}
