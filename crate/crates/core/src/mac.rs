//! Simplified 802.11 DCF.
//!
//! Each node senses the medium with the same range it receives with. Before
//! every transmission a node counts down a uniform backoff in `[0, CW)` slots
//! after DIFS of idle medium, freezing the countdown while the medium is busy.
//! Unicast frames are acknowledged SIFS after reception and retransmitted up
//! to the retry limit with a doubling contention window; broadcasts are sent
//! once. Two overlapping receptions at a node corrupt each other (no capture),
//! and a node cannot receive while it transmits.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::packet::{Packet, PacketKind};
use crate::sim::{EventHandle, SimTime};
use crate::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct MacParams {
    pub slot: SimTime,
    pub sifs: SimTime,
    pub difs: SimTime,
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
    /// Preamble plus MAC/PHY header time added to every frame.
    pub overhead: SimTime,
    pub queue_limit: usize,
    pub ack_bytes: u32,
}

impl Default for MacParams {
    fn default() -> Self {
        MacParams {
            slot: SimTime::from_micros(20),
            sifs: SimTime::from_micros(10),
            difs: SimTime::from_micros(50),
            cw_min: 32,
            cw_max: 1024,
            retry_limit: 7,
            overhead: SimTime::from_micros(192),
            queue_limit: 50,
            ack_bytes: 14,
        }
    }
}

impl MacParams {
    /// Time on air for `bytes` of payload at `bitrate` bits/s.
    pub fn airtime(&self, bytes: u32, bitrate: f64) -> SimTime {
        SimTime::from_secs_f64(f64::from(bytes) * 8.0 / bitrate) + self.overhead
    }

    pub fn ack_timeout(&self, bitrate: f64) -> SimTime {
        self.sifs + self.airtime(self.ack_bytes, bitrate) + self.slot
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if self.cw_min == 0 || self.cw_max < self.cw_min {
            return Err("contention window bounds");
        }
        if self.queue_limit == 0 {
            return Err("queue_limit");
        }
        if self.slot == SimTime::ZERO {
            return Err("slot");
        }
        Ok(())
    }
}

/// What a node is doing about the head-of-line frame.
#[derive(Debug, Clone, PartialEq)]
pub enum MacPhase {
    Idle,
    /// Medium busy; `slots` of backoff remain once it goes idle.
    Deferring {
        slots: u32,
    },
    /// Counting down: transmission starts at `fire_at` unless frozen.
    Counting {
        slots: u32,
        started: SimTime,
        fire_at: SimTime,
        timer: EventHandle,
    },
    Transmitting,
    AwaitingAck {
        timer: EventHandle,
    },
}

/// Per-node MAC state.
#[derive(Debug, Clone)]
pub struct MacState {
    pub queue: VecDeque<Packet>,
    pub current: Option<Packet>,
    pub retries: u32,
    pub cw: u32,
    pub phase: MacPhase,
    /// Audible transmissions in progress (including our own ACKs).
    pub busy: u32,
    /// Transmissions currently arriving at this node.
    pub receiving: Vec<u64>,
    pub transmitting: Option<u64>,
    /// Last unicast uid accepted from each neighbor, for duplicate suppression.
    pub last_uid: HashMap<NodeId, u64>,
}

impl MacState {
    pub fn new(params: &MacParams) -> Self {
        MacState {
            queue: VecDeque::new(),
            current: None,
            retries: 0,
            cw: params.cw_min,
            phase: MacPhase::Idle,
            busy: 0,
            receiving: Vec::new(),
            transmitting: None,
            last_uid: HashMap::new(),
        }
    }

    pub fn backlog(&self) -> usize {
        self.queue.len() + usize::from(self.current.is_some())
    }

    /// Removes queued (not yet in service) unicast packets for `next_hop`.
    pub fn drain_for(&mut self, next_hop: NodeId) -> Vec<Packet> {
        let mut out = Vec::new();
        let mut keep = VecDeque::with_capacity(self.queue.len());
        for p in self.queue.drain(..) {
            if p.next_hop == Some(next_hop) {
                out.push(p);
            } else {
                keep.push_back(p);
            }
        }
        self.queue = keep;
        out
    }

    /// Slots left if the countdown that started at `started` is frozen at `now`.
    pub fn remaining_slots(slots: u32, started: SimTime, now: SimTime, params: &MacParams) -> u32 {
        let counted = now.saturating_sub(started).saturating_sub(params.difs);
        let elapsed = (counted.as_nanos() / params.slot.as_nanos()) as u32;
        slots.saturating_sub(elapsed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Packet(Packet),
    Ack { to: NodeId, uid: u64 },
}

impl Frame {
    pub fn stat_kind(&self) -> StatKind {
        match self {
            Frame::Packet(p) => StatKind::Packet(p.kind()),
            Frame::Ack { .. } => StatKind::Ack,
        }
    }

    /// Node expected to receive this frame, if unicast.
    pub fn addressee(&self) -> Option<NodeId> {
        match self {
            Frame::Packet(p) => p.next_hop,
            Frame::Ack { to, .. } => Some(*to),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Transmission {
    pub id: u64,
    pub sender: NodeId,
    pub frame: Frame,
    pub end: SimTime,
    /// Every node that hears this transmission, with a corrupted flag.
    pub audience: Vec<(NodeId, bool)>,
}

impl Transmission {
    pub fn corrupt(&mut self, node: NodeId) {
        if let Some(slot) = self.audience.iter_mut().find(|(n, _)| *n == node) {
            slot.1 = true;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StatKind {
    Packet(PacketKind),
    Ack,
}

impl StatKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StatKind::Packet(k) => k.as_str(),
            StatKind::Ack => "ACK",
        }
    }

    pub fn all() -> impl Iterator<Item = StatKind> {
        PacketKind::ALL.into_iter().map(StatKind::Packet).chain(std::iter::once(StatKind::Ack))
    }
}

/// Per-kind link-layer counters.
///
/// Per transmission: `sent = delivered + collided + unreached` once nothing is
/// on air. Per packet handed to the MAC: `offered = completed + dropped_queue
/// + dropped_retry + stranded + still queued`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KindCounters {
    pub offered: u64,
    /// Transmissions started.
    pub sent: u64,
    /// Clean receptions at the addressee (every clean receiver for broadcasts).
    pub delivered: u64,
    /// Receptions lost to overlap or half-duplex at the addressee.
    pub collided: u64,
    /// Unicast transmissions whose addressee was out of range.
    pub unreached: u64,
    /// Packets acknowledged, or broadcasts put on air.
    pub completed: u64,
    pub dropped_queue: u64,
    pub dropped_retry: u64,
    /// Queued behind a failed link and handed back to routing.
    pub stranded: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChannelStats {
    pub per_kind: BTreeMap<StatKind, KindCounters>,
}

impl ChannelStats {
    pub fn entry(&mut self, kind: StatKind) -> &mut KindCounters {
        self.per_kind.entry(kind).or_default()
    }

    pub fn get(&self, kind: StatKind) -> KindCounters {
        self.per_kind.get(&kind).copied().unwrap_or_default()
    }

    pub const CSV_HEADER: &'static str = "kind,sent,delivered,collided,dropped";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for k in StatKind::all() {
            let c = self.get(k);
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                k.as_str(),
                c.sent,
                c.delivered,
                c.collided,
                c.dropped_queue + c.dropped_retry
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn airtime_of_full_segment() {
        let p = MacParams::default();
        // 1024 B at 2 Mb/s = 4.096 ms, plus 192 us overhead
        assert_eq!(p.airtime(1024, 2.0e6), SimTime::from_micros(4096 + 192));
        assert_eq!(p.airtime(14, 2.0e6), SimTime::from_micros(56 + 192));
    }

    #[test]
    fn frozen_countdown_keeps_uncounted_slots() {
        let p = MacParams::default();
        let start = SimTime::from_millis(1);
        // DIFS not yet over: nothing counted
        assert_eq!(MacState::remaining_slots(10, start, start + SimTime::from_micros(40), &p), 10);
        // DIFS + 3.5 slots elapsed: 3 whole slots consumed
        let now = start + p.difs + SimTime::from_micros(70);
        assert_eq!(MacState::remaining_slots(10, start, now, &p), 7);
        assert_eq!(MacState::remaining_slots(2, start, start + SimTime::from_secs(1), &p), 0);
    }

    #[test]
    fn csv_lists_every_kind() {
        let mut s = ChannelStats::default();
        s.entry(StatKind::Packet(PacketKind::Data)).sent = 3;
        let csv = s.to_csv();
        assert!(csv.starts_with("kind,sent,delivered,collided,dropped\nDATA,3,0,0,0\n"));
        assert_eq!(csv.lines().count(), 7);
    }
}
