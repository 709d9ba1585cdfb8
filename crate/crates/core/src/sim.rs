//! Deterministic discrete-event kernel.
//!
//! Time is kept as integer nanoseconds so that event ordering is exact and
//! identical on every platform. Events are ordered by `(fire_at, seq)` where
//! `seq` is a per-queue monotone counter, giving FIFO execution for events
//! scheduled at the same instant.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::io::{self, Write};
use std::ops::{Add, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::NodeId;

const NANOS_PER_SEC: u64 = 1_000_000_000;

/// Simulated time in nanoseconds since the start of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * NANOS_PER_SEC)
    }

    /// Rounds to the nearest nanosecond. Negative and non-finite inputs clamp to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        if !s.is_finite() || s <= 0.0 {
            return SimTime::ZERO;
        }
        SimTime((s * NANOS_PER_SEC as f64).round() as u64)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / NANOS_PER_SEC as f64
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    /// Signed difference `self - rhs` in nanoseconds.
    pub fn signed_diff(self, rhs: SimTime) -> i64 {
        self.0 as i64 - rhs.0 as i64
    }

    pub fn times(self, k: u64) -> SimTime {
        SimTime(self.0 * k)
    }

    /// Parses a decimal seconds string (e.g. `12.000000001`) exactly, without
    /// going through floating point when at most nine fractional digits are given.
    pub fn parse_secs(s: &str) -> Option<SimTime> {
        let s = s.trim();
        let (int, frac) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int.is_empty() && frac.is_empty() {
            return None;
        }
        if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let secs: u64 = if int.is_empty() { 0 } else { int.parse().ok()? };
        let mut nanos: u64 = 0;
        let mut scale = NANOS_PER_SEC / 10;
        for (i, c) in frac.chars().enumerate() {
            let d = c.to_digit(10)? as u64;
            if i < 9 {
                nanos += d * scale;
                scale /= 10;
            } else if i == 9 {
                // round half up on the tenth digit
                if d >= 5 {
                    nanos += 1;
                }
                break;
            }
        }
        secs.checked_mul(NANOS_PER_SEC)?.checked_add(nanos).map(SimTime)
    }

    /// Fixed-point rendering with the given number of decimals (at most 9).
    pub fn fmt_decimals(self, decimals: u32) -> String {
        let decimals = decimals.min(9);
        let secs = self.0 / NANOS_PER_SEC;
        let nanos = self.0 % NANOS_PER_SEC;
        if decimals == 0 {
            let rounded = secs + u64::from(nanos >= NANOS_PER_SEC / 2);
            return rounded.to_string();
        }
        let div = 10u64.pow(9 - decimals);
        let mut frac = (nanos + div / 2) / div;
        let mut secs = secs;
        let limit = 10u64.pow(decimals);
        if frac >= limit {
            frac -= limit;
            secs += 1;
        }
        format!("{secs}.{frac:0width$}", width = decimals as usize)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fmt_decimals(9))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("cannot schedule at {at} s: clock is already at {now} s")]
    SchedulingInPast { at: SimTime, now: SimTime },
}

/// Payloads carried by events must name their kind for the event log.
pub trait EventKind {
    fn kind(&self) -> &'static str;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventHandle(u64);

#[derive(Debug, Clone, PartialEq)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub target: NodeId,
    pub payload: P,
}

/// Event queue plus simulated clock.
pub struct Scheduler<P> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Reverse<(SimTime, u64)>>,
    pending: HashMap<u64, (NodeId, P)>,
    log: Option<Vec<String>>,
}

impl<P: EventKind> Default for Scheduler<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P: EventKind> Scheduler<P> {
    pub fn new() -> Self {
        Scheduler { now: SimTime::ZERO, next_seq: 0, heap: BinaryHeap::new(), pending: HashMap::new(), log: None }
    }

    /// Record every executed event as one line of text.
    pub fn with_event_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn schedule(&mut self, fire_at: SimTime, target: NodeId, payload: P) -> Result<EventHandle, SimError> {
        if fire_at < self.now {
            return Err(SimError::SchedulingInPast { at: fire_at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse((fire_at, seq)));
        self.pending.insert(seq, (target, payload));
        Ok(EventHandle(seq))
    }

    /// Schedule `delay` after the current clock; never fails.
    pub fn schedule_in(&mut self, delay: SimTime, target: NodeId, payload: P) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, target, payload).expect("relative schedule is never in the past")
    }

    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.pending.remove(&handle.0).is_some()
    }

    pub fn is_pending(&self, handle: EventHandle) -> bool {
        self.pending.contains_key(&handle.0)
    }

    /// Pops the next live event with `fire_at <= t_end`, advancing the clock to it.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<Event<P>> {
        while let Some(&Reverse((at, seq))) = self.heap.peek() {
            if at > t_end {
                return None;
            }
            self.heap.pop();
            if let Some((target, payload)) = self.pending.remove(&seq) {
                debug_assert!(at >= self.now);
                self.now = at;
                if let Some(log) = self.log.as_mut() {
                    log.push(format!("{} {} {} {}", at.fmt_decimals(9), seq, target, payload.kind()));
                }
                return Some(Event { fire_at: at, seq, target, payload });
            }
        }
        None
    }

    /// Executes every event with `fire_at <= t_end` in order, then sets the clock to `t_end`.
    /// The handler may schedule further events, including at the current instant.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> usize
    where
        F: FnMut(&mut Scheduler<P>, Event<P>),
    {
        let mut count = 0;
        while let Some(ev) = self.pop_until(t_end) {
            handler(self, ev);
            count += 1;
        }
        if t_end > self.now {
            self.now = t_end;
        }
        count
    }

    pub fn event_log(&self) -> Option<&[String]> {
        self.log.as_deref()
    }

    pub fn write_event_log<W: Write>(&self, mut w: W) -> io::Result<()> {
        if let Some(log) = &self.log {
            for line in log {
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }
}

/// Seeded random stream. The generator is ChaCha8 (portable, fixed output for
/// a given seed on every platform); sub-streams are derived by hashing a label
/// into the parent seed so that subsystems draw independently.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn derive(seed: u64, label: &str) -> Self {
        RngStream::new(derive_seed(seed, label))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform integer in `[0, n)`; `n` must be non-zero.
    pub fn below(&mut self, n: u32) -> u32 {
        self.rng.random_range(0..n)
    }

    /// Uniform duration in `[0, max)`.
    pub fn time_below(&mut self, max: SimTime) -> SimTime {
        if max.as_nanos() == 0 {
            return SimTime::ZERO;
        }
        SimTime::from_nanos(self.rng.random_range(0..max.as_nanos()))
    }

    pub fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Stable 64-bit hash of `(seed, label)`: FNV-1a over the bytes followed by a
/// SplitMix64 finalizer. Stable across Rust releases, unlike `DefaultHasher`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(label.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Clone, PartialEq)]
    enum Ev {
        A(u32),
        Spawn,
    }

    impl EventKind for Ev {
        fn kind(&self) -> &'static str {
            match self {
                Ev::A(_) => "a",
                Ev::Spawn => "spawn",
            }
        }
    }

    #[test]
    fn schedule_at_zero_fires_first() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_secs(1), 0, Ev::A(1)).unwrap();
        s.schedule(SimTime::ZERO, 0, Ev::A(0)).unwrap();
        let mut seen = vec![];
        s.run_until(SimTime::from_secs(5), |_, e| seen.push(e.payload));
        assert_eq!(seen, vec![Ev::A(0), Ev::A(1)]);
    }

    #[test]
    fn ties_run_in_seq_order() {
        let mut s = Scheduler::new();
        let t = SimTime::from_millis(3);
        for i in 0..5 {
            s.schedule(t, 0, Ev::A(i)).unwrap();
        }
        let mut seen = vec![];
        s.run_until(t, |_, e| seen.push(e.payload));
        assert_eq!(seen, (0..5).map(Ev::A).collect::<Vec<_>>());
    }

    #[test]
    fn scheduling_in_past_is_rejected() {
        let mut s: Scheduler<Ev> = Scheduler::new();
        s.run_until(SimTime::from_secs(2), |_, _| {});
        let err = s.schedule(SimTime::from_secs(1), 0, Ev::A(0)).unwrap_err();
        assert_eq!(err, SimError::SchedulingInPast { at: SimTime::from_secs(1), now: SimTime::from_secs(2) });
    }

    #[test]
    fn empty_run_advances_clock() {
        let mut s: Scheduler<Ev> = Scheduler::new();
        assert_eq!(s.run_until(SimTime::from_secs(10), |_, _| {}), 0);
        assert_eq!(s.now(), SimTime::from_secs(10));
    }

    #[test]
    fn run_until_stops_at_horizon() {
        let mut s = Scheduler::new();
        for i in 1..=3 {
            s.schedule(SimTime::from_secs(i), 0, Ev::A(i as u32)).unwrap();
        }
        let n = s.run_until(SimTime::from_millis(2500), |_, _| {});
        assert_eq!(n, 2);
        assert_eq!(s.now(), SimTime::from_millis(2500));
        assert_eq!(s.pending_len(), 1);
    }

    #[test]
    fn child_at_same_instant_runs_after_parent() {
        let mut s = Scheduler::new().with_event_log();
        s.schedule(SimTime::from_secs(1), 7, Ev::Spawn).unwrap();
        s.schedule(SimTime::from_secs(1), 8, Ev::A(1)).unwrap();
        let mut seen = vec![];
        s.run_until(SimTime::from_secs(1), |sch, e| {
            if e.payload == Ev::Spawn {
                sch.schedule(sch.now(), 9, Ev::A(2)).unwrap();
            }
            seen.push((e.target, e.payload));
        });
        // hand trace: parent (seq 0), sibling (seq 1), child (seq 2)
        assert_eq!(seen, vec![(7, Ev::Spawn), (8, Ev::A(1)), (9, Ev::A(2))]);
        assert_eq!(s.event_log().unwrap(), ["1.000000000 0 7 spawn", "1.000000000 1 8 a", "1.000000000 2 9 a"]);
    }

    #[test]
    fn cancel_semantics() {
        let mut s = Scheduler::new();
        let h = s.schedule(SimTime::from_secs(1), 0, Ev::A(1)).unwrap();
        let fired = s.schedule(SimTime::from_millis(500), 0, Ev::A(0)).unwrap();
        assert!(s.cancel(h));
        assert!(!s.cancel(h));
        let mut seen = vec![];
        s.run_until(SimTime::from_secs(2), |_, e| seen.push(e.payload));
        assert_eq!(seen, vec![Ev::A(0)]);
        assert!(!s.cancel(fired));
    }

    #[test]
    fn time_formatting_and_parsing() {
        let t = SimTime::from_nanos(66_633_333_333);
        assert_eq!(t.to_string(), "66.633333333");
        assert_eq!(t.fmt_decimals(6), "66.633333");
        assert_eq!(SimTime::from_nanos(999_999_999).fmt_decimals(6), "1.000000");
        assert_eq!(SimTime::parse_secs("66.633333333"), Some(t));
        assert_eq!(SimTime::parse_secs("3"), Some(SimTime::from_secs(3)));
        assert_eq!(SimTime::parse_secs("0.5"), Some(SimTime::from_millis(500)));
        assert_eq!(SimTime::parse_secs("-1"), None);
        assert_eq!(SimTime::parse_secs("x"), None);
    }

    #[test]
    fn rng_streams_are_reproducible_and_independent() {
        let mut a = RngStream::derive(42, "mac");
        let mut b = RngStream::derive(42, "mac");
        let mut c = RngStream::derive(42, "routing");
        let xa: Vec<u32> = (0..16).map(|_| a.below(1024)).collect();
        let xb: Vec<u32> = (0..16).map(|_| b.below(1024)).collect();
        let xc: Vec<u32> = (0..16).map(|_| c.below(1024)).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
        assert_eq!(derive_seed(1, "x"), derive_seed(1, "x"));
        assert_ne!(derive_seed(1, "x"), derive_seed(2, "x"));
    }
}
