//! Reactive on-demand distance-vector routing.
//!
//! Route discovery floods RREQs; the destination (or an intermediate node
//! holding a fresh-enough route) answers with a unicast RREP that travels the
//! reverse path. Link failures are learned only from MAC retry exhaustion and
//! are announced with broadcast RERRs. There are no HELLO beacons, no local
//! repair, and no expanding-ring search.

use std::collections::{BTreeMap, HashSet, VecDeque};

use crate::packet::{Body, Packet};
use crate::routing::{Control, DropReason, NextHop, Outbound, RouteEvent, RouteEventKind, RouteTimer};
use crate::sim::SimTime;
use crate::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct AodvConfig {
    pub active_route_timeout: SimTime,
    /// Wait for a RREP before re-flooding.
    pub rrep_wait: SimTime,
    /// Re-floods after the first RREQ.
    pub rreq_retries: u32,
    /// Initial RREQ time-to-live.
    pub ttl: u8,
    pub buffer_limit: usize,
    pub buffer_timeout: SimTime,
    /// Upper bound of the random delay applied before rebroadcasting.
    pub rebroadcast_jitter: SimTime,
}

impl Default for AodvConfig {
    fn default() -> Self {
        AodvConfig {
            active_route_timeout: SimTime::from_secs(10),
            rrep_wait: SimTime::from_secs(1),
            rreq_retries: 2,
            ttl: 16,
            buffer_limit: 64,
            buffer_timeout: SimTime::from_secs(30),
            rebroadcast_jitter: SimTime::from_millis(10),
        }
    }
}

impl AodvConfig {
    /// TTL bound of twice the grid side for an `n_nodes` square grid.
    pub fn ttl_for_grid(n_nodes: usize) -> u8 {
        let side = (n_nodes as f64).sqrt().ceil() as usize;
        (2 * side).clamp(2, u8::MAX as usize) as u8
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AodvRouteEntry {
    pub dest: NodeId,
    pub next_hop: NodeId,
    pub hop_count: u32,
    pub dest_seq: u32,
    pub seq_known: bool,
    pub expires_at: SimTime,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RreqMessage {
    pub origin: NodeId,
    pub origin_seq: u32,
    pub rreq_id: u32,
    pub dest: NodeId,
    pub known_dest_seq: Option<u32>,
    pub hop_count: u32,
    pub ttl: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrepMessage {
    pub origin: NodeId,
    pub dest: NodeId,
    pub dest_seq: u32,
    /// Hops from the responder to `dest`.
    pub hop_count: u32,
    pub lifetime: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerrMessage {
    pub unreachable: Vec<(NodeId, u32)>,
}

pub const RREQ_BYTES: u32 = 24;
pub const RREP_BYTES: u32 = 20;

pub fn rerr_bytes(msg: &RerrMessage) -> u32 {
    4 + 8 * msg.unreachable.len() as u32
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AodvStats {
    pub rreq_originated: u64,
    pub rreq_forwarded: u64,
    pub rrep_sent: u64,
    pub rerr_sent: u64,
    pub discoveries_failed: u64,
}

/// Per-node AODV state.
#[derive(Debug, Clone)]
pub struct Aodv {
    id: NodeId,
    cfg: AodvConfig,
    own_seq: u32,
    next_rreq_id: u32,
    table: BTreeMap<NodeId, AodvRouteEntry>,
    seen: HashSet<(NodeId, u32)>,
    /// Destinations with a discovery in progress, mapped to the attempt index.
    discoveries: BTreeMap<NodeId, u32>,
    buffer: VecDeque<(SimTime, Packet)>,
    stats: AodvStats,
    seq_regressions: u64,
}

impl Aodv {
    pub fn new(id: NodeId, cfg: AodvConfig) -> Self {
        Aodv {
            id,
            cfg,
            own_seq: 0,
            next_rreq_id: 0,
            table: BTreeMap::new(),
            seen: HashSet::new(),
            discoveries: BTreeMap::new(),
            buffer: VecDeque::new(),
            stats: AodvStats::default(),
            seq_regressions: 0,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn own_seq(&self) -> u32 {
        self.own_seq
    }

    pub fn stats(&self) -> &AodvStats {
        &self.stats
    }

    pub fn entry(&self, dest: NodeId) -> Option<&AodvRouteEntry> {
        self.table.get(&dest)
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn discovery_pending(&self, dest: NodeId) -> bool {
        self.discoveries.contains_key(&dest)
    }

    /// Number of times a stored sequence number would have gone backwards (always 0).
    pub fn seq_regressions(&self) -> u64 {
        self.seq_regressions
    }

    /// Valid, unexpired route to `dest`, or `None` on a miss.
    pub fn route_lookup(&self, dest: NodeId, now: SimTime) -> Option<NextHop> {
        if dest == self.id {
            return Some(NextHop { node: self.id, hop_count: 0 });
        }
        self.table
            .get(&dest)
            .filter(|e| e.valid && e.expires_at > now)
            .map(|e| NextHop { node: e.next_hop, hop_count: e.hop_count })
    }

    /// Like [`route_lookup`](Self::route_lookup) but retires an expired entry.
    fn active_route(&mut self, dest: NodeId, now: SimTime, out: &mut Vec<Outbound>) -> Option<NextHop> {
        if let Some(e) = self.table.get_mut(&dest) {
            if e.valid && e.expires_at <= now {
                e.valid = false;
                out.push(Outbound::Log(RouteEvent {
                    time: now,
                    node: self.id,
                    kind: RouteEventKind::Expire,
                    dest,
                    hop_count: Some(e.hop_count),
                }));
            }
        }
        self.route_lookup(dest, now)
    }

    fn refresh(&mut self, dest: NodeId, now: SimTime) {
        let until = now + self.cfg.active_route_timeout;
        if let Some(e) = self.table.get_mut(&dest) {
            if e.valid && e.expires_at < until {
                e.expires_at = until;
            }
        }
    }

    fn set_seq(&mut self, dest: NodeId, seq: u32) {
        if let Some(e) = self.table.get_mut(&dest) {
            if seq < e.dest_seq {
                self.seq_regressions += 1;
                debug_assert!(false, "sequence number regression for {dest}");
                return;
            }
            e.dest_seq = seq;
        }
    }

    /// Creates or updates the route to `dest`. Returns true when the offered
    /// route was accepted, even if the entry ended up unchanged. Only real
    /// changes are logged.
    #[allow(clippy::too_many_arguments)]
    fn update_route(
        &mut self,
        dest: NodeId,
        next_hop: NodeId,
        hop_count: u32,
        seq: Option<u32>,
        lifetime: SimTime,
        now: SimTime,
        out: &mut Vec<Outbound>,
    ) -> bool {
        if dest == self.id {
            return false;
        }
        let expires = now + lifetime;
        let (accepted, changed) = match self.table.get_mut(&dest) {
            None => {
                self.table.insert(
                    dest,
                    AodvRouteEntry {
                        dest,
                        next_hop,
                        hop_count,
                        dest_seq: seq.unwrap_or(0),
                        seq_known: seq.is_some(),
                        expires_at: expires,
                        valid: true,
                    },
                );
                (true, true)
            }
            Some(e) => {
                let accept = match seq {
                    Some(s) => {
                        !e.seq_known || s > e.dest_seq || (s == e.dest_seq && (!e.valid || hop_count < e.hop_count))
                    }
                    None => !e.valid || hop_count < e.hop_count || e.next_hop == next_hop,
                };
                if !accept {
                    // same route heard again: keep it alive
                    if e.valid && e.next_hop == next_hop && e.hop_count == hop_count && e.expires_at < expires {
                        e.expires_at = expires;
                    }
                    return false;
                }
                let changed = !e.valid
                    || e.next_hop != next_hop
                    || e.hop_count != hop_count
                    || seq.is_some_and(|s| s > e.dest_seq);
                e.next_hop = next_hop;
                e.hop_count = hop_count;
                e.valid = true;
                if e.expires_at < expires {
                    e.expires_at = expires;
                }
                if let Some(s) = seq {
                    // sequence numbers only move forward
                    e.dest_seq = e.dest_seq.max(s);
                    e.seq_known = true;
                }
                (true, changed)
            }
        };
        if changed {
            out.push(Outbound::Log(RouteEvent {
                time: now,
                node: self.id,
                kind: RouteEventKind::Install,
                dest,
                hop_count: Some(hop_count),
            }));
            self.flush_buffer(dest, now, out);
        }
        accepted
    }

    fn touch_neighbor(&mut self, neighbor: NodeId, now: SimTime, out: &mut Vec<Outbound>) {
        let lt = self.cfg.active_route_timeout;
        self.update_route(neighbor, neighbor, 1, None, lt, now, out);
    }

    fn flush_buffer(&mut self, dest: NodeId, now: SimTime, out: &mut Vec<Outbound>) {
        let Some(nh) = self.route_lookup(dest, now) else { return };
        self.discoveries.remove(&dest);
        if !self.buffer.iter().any(|(_, p)| p.dst == dest) {
            return;
        }
        let mut keep = VecDeque::with_capacity(self.buffer.len());
        for (t, pkt) in self.buffer.drain(..) {
            if pkt.dst == dest {
                out.push(Outbound::Forward { pkt, next_hop: nh.node });
            } else {
                keep.push_back((t, pkt));
            }
        }
        self.buffer = keep;
        self.refresh(dest, now);
        self.refresh(nh.node, now);
    }

    fn prune_buffer(&mut self, now: SimTime, out: &mut Vec<Outbound>) {
        while let Some((t, _)) = self.buffer.front() {
            if now.saturating_sub(*t) < self.cfg.buffer_timeout {
                break;
            }
            let (_, pkt) = self.buffer.pop_front().unwrap();
            out.push(Outbound::Drop { pkt, reason: DropReason::BufferTimeout });
        }
    }

    fn enqueue(&mut self, pkt: Packet, now: SimTime, out: &mut Vec<Outbound>) {
        if self.buffer.len() >= self.cfg.buffer_limit {
            if let Some((_, old)) = self.buffer.pop_front() {
                out.push(Outbound::Drop { pkt: old, reason: DropReason::BufferOverflow });
            }
        }
        self.buffer.push_back((now, pkt));
    }

    /// Data originated at this node: forward on a hit, otherwise buffer and discover.
    pub fn send_data(&mut self, pkt: Packet, now: SimTime, out: &mut Vec<Outbound>) {
        self.prune_buffer(now, out);
        let dest = pkt.dst;
        match self.active_route(dest, now, out) {
            Some(nh) if !self.buffer.iter().any(|(_, p)| p.dst == dest) => {
                self.refresh(dest, now);
                self.refresh(nh.node, now);
                out.push(Outbound::Forward { pkt, next_hop: nh.node });
            }
            _ => {
                self.enqueue(pkt, now, out);
                if self.route_lookup(dest, now).is_some() {
                    self.flush_buffer(dest, now, out);
                } else {
                    self.originate_discovery(dest, now, out);
                }
            }
        }
    }

    /// Data received from `from` and addressed to another node.
    pub fn forward_data(&mut self, mut pkt: Packet, from: NodeId, now: SimTime, out: &mut Vec<Outbound>) {
        self.touch_neighbor(from, now, out);
        if pkt.ttl <= 1 {
            out.push(Outbound::Drop { pkt, reason: DropReason::TtlExpired });
            return;
        }
        let dest = pkt.dst;
        match self.active_route(dest, now, out) {
            Some(nh) => {
                self.refresh(dest, now);
                self.refresh(nh.node, now);
                self.refresh(pkt.src, now);
                pkt.ttl -= 1;
                out.push(Outbound::Forward { pkt, next_hop: nh.node });
            }
            None => {
                let seq = self.table.get(&dest).map_or(0, |e| e.dest_seq);
                out.push(Outbound::Drop { pkt, reason: DropReason::NoRoute });
                self.stats.rerr_sent += 1;
                out.push(Outbound::Broadcast {
                    msg: Control::Rerr(RerrMessage { unreachable: vec![(dest, seq)] }),
                    jitter: false,
                });
            }
        }
    }

    /// Data addressed to this node arrived from `from`.
    pub fn deliver_local(&mut self, pkt: &Packet, from: NodeId, now: SimTime, out: &mut Vec<Outbound>) {
        self.touch_neighbor(from, now, out);
        self.refresh(pkt.src, now);
    }

    /// Starts a route discovery unless one is already running for `dest`.
    pub fn originate_discovery(&mut self, dest: NodeId, now: SimTime, out: &mut Vec<Outbound>) {
        if dest == self.id || self.discoveries.contains_key(&dest) {
            return;
        }
        self.discoveries.insert(dest, 0);
        out.push(Outbound::Log(RouteEvent {
            time: now,
            node: self.id,
            kind: RouteEventKind::Discover,
            dest,
            hop_count: None,
        }));
        self.flood(dest, 0, now, out);
    }

    fn flood(&mut self, dest: NodeId, attempt: u32, now: SimTime, out: &mut Vec<Outbound>) {
        self.own_seq += 1;
        self.next_rreq_id += 1;
        let rreq_id = self.next_rreq_id;
        self.seen.insert((self.id, rreq_id));
        let known_dest_seq = self.table.get(&dest).filter(|e| e.seq_known).map(|e| e.dest_seq);
        self.stats.rreq_originated += 1;
        out.push(Outbound::Broadcast {
            msg: Control::Rreq(RreqMessage {
                origin: self.id,
                origin_seq: self.own_seq,
                rreq_id,
                dest,
                known_dest_seq,
                hop_count: 0,
                ttl: self.cfg.ttl,
            }),
            jitter: false,
        });
        out.push(Outbound::Timer { at: now + self.cfg.rrep_wait, timer: RouteTimer::RrepWait { dest, attempt } });
    }

    pub fn on_timer(&mut self, timer: RouteTimer, now: SimTime, out: &mut Vec<Outbound>) {
        let RouteTimer::RrepWait { dest, attempt } = timer else { return };
        if self.discoveries.get(&dest) != Some(&attempt) {
            return;
        }
        if self.active_route(dest, now, out).is_some() {
            self.flush_buffer(dest, now, out);
            return;
        }
        self.prune_buffer(now, out);
        if attempt < self.cfg.rreq_retries {
            self.discoveries.insert(dest, attempt + 1);
            self.flood(dest, attempt + 1, now, out);
            return;
        }
        self.discoveries.remove(&dest);
        self.stats.discoveries_failed += 1;
        out.push(Outbound::Log(RouteEvent {
            time: now,
            node: self.id,
            kind: RouteEventKind::Fail,
            dest,
            hop_count: None,
        }));
        let mut keep = VecDeque::with_capacity(self.buffer.len());
        for (t, pkt) in self.buffer.drain(..) {
            if pkt.dst == dest {
                out.push(Outbound::Drop { pkt, reason: DropReason::DiscoveryFailed });
            } else {
                keep.push_back((t, pkt));
            }
        }
        self.buffer = keep;
    }

    pub fn handle_rreq(&mut self, msg: &RreqMessage, from: NodeId, now: SimTime, out: &mut Vec<Outbound>) {
        if msg.origin == self.id || self.seen.contains(&(msg.origin, msg.rreq_id)) {
            return;
        }
        self.seen.insert((msg.origin, msg.rreq_id));
        self.touch_neighbor(from, now, out);
        let hops = msg.hop_count + 1;
        let lt = self.cfg.active_route_timeout;
        self.update_route(msg.origin, from, hops, Some(msg.origin_seq), lt, now, out);

        if msg.dest == self.id {
            if let Some(s) = msg.known_dest_seq {
                self.own_seq = self.own_seq.max(s);
            }
            self.stats.rrep_sent += 1;
            out.push(Outbound::Unicast {
                to: from,
                msg: Control::Rrep(RrepMessage {
                    origin: msg.origin,
                    dest: self.id,
                    dest_seq: self.own_seq,
                    hop_count: 0,
                    lifetime: self.cfg.active_route_timeout,
                }),
            });
            return;
        }

        let fresh = self.active_route(msg.dest, now, out).and_then(|_| {
            let e = &self.table[&msg.dest];
            let fresh_enough = e.seq_known && msg.known_dest_seq.is_none_or(|s| e.dest_seq >= s);
            (fresh_enough && e.next_hop != from).then_some((e.dest_seq, e.hop_count, e.expires_at))
        });
        if let Some((dest_seq, hop_count, expires_at)) = fresh {
            self.stats.rrep_sent += 1;
            out.push(Outbound::Unicast {
                to: from,
                msg: Control::Rrep(RrepMessage {
                    origin: msg.origin,
                    dest: msg.dest,
                    dest_seq,
                    hop_count,
                    lifetime: expires_at.saturating_sub(now),
                }),
            });
            return;
        }

        if msg.ttl <= 1 {
            return;
        }
        let table_seq = self.table.get(&msg.dest).filter(|e| e.seq_known).map(|e| e.dest_seq);
        let known_dest_seq = match (msg.known_dest_seq, table_seq) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        self.stats.rreq_forwarded += 1;
        out.push(Outbound::Broadcast {
            msg: Control::Rreq(RreqMessage { hop_count: hops, ttl: msg.ttl - 1, known_dest_seq, ..msg.clone() }),
            jitter: true,
        });
    }

    pub fn handle_rrep(&mut self, msg: &RrepMessage, from: NodeId, now: SimTime, out: &mut Vec<Outbound>) {
        self.touch_neighbor(from, now, out);
        let hops = msg.hop_count + 1;
        let lifetime = if msg.lifetime == SimTime::ZERO { self.cfg.active_route_timeout } else { msg.lifetime };
        let updated = self.update_route(msg.dest, from, hops, Some(msg.dest_seq), lifetime, now, out);
        if msg.origin == self.id {
            if self.route_lookup(msg.dest, now).is_some() {
                self.discoveries.remove(&msg.dest);
            }
            return;
        }
        if !updated {
            return;
        }
        if let Some(nh) = self.active_route(msg.origin, now, out) {
            self.refresh(msg.origin, now);
            out.push(Outbound::Unicast {
                to: nh.node,
                msg: Control::Rrep(RrepMessage { hop_count: hops, ..msg.clone() }),
            });
        }
    }

    pub fn handle_rerr(&mut self, msg: &RerrMessage, from: NodeId, now: SimTime, out: &mut Vec<Outbound>) {
        let mut affected = Vec::new();
        for &(dest, seq) in &msg.unreachable {
            let Some(e) = self.table.get_mut(&dest) else { continue };
            if !(e.valid && e.next_hop == from) {
                continue;
            }
            e.valid = false;
            let new_seq = e.dest_seq.max(seq);
            affected.push((dest, new_seq));
            self.set_seq(dest, new_seq);
            out.push(Outbound::Log(RouteEvent {
                time: now,
                node: self.id,
                kind: RouteEventKind::Rerr,
                dest,
                hop_count: None,
            }));
        }
        if !affected.is_empty() {
            self.stats.rerr_sent += 1;
            out.push(Outbound::Broadcast { msg: Control::Rerr(RerrMessage { unreachable: affected }), jitter: true });
        }
    }

    /// Invalidates every route through `neighbor` and announces them in a RERR.
    pub fn handle_link_break(&mut self, neighbor: NodeId, now: SimTime, out: &mut Vec<Outbound>) {
        let mut affected = Vec::new();
        for e in self.table.values_mut() {
            if e.valid && e.next_hop == neighbor {
                e.valid = false;
                e.dest_seq += 1;
                affected.push((e.dest, e.dest_seq));
                out.push(Outbound::Log(RouteEvent {
                    time: now,
                    node: self.id,
                    kind: RouteEventKind::Break,
                    dest: e.dest,
                    hop_count: None,
                }));
            }
        }
        if !affected.is_empty() {
            self.stats.rerr_sent += 1;
            out.push(Outbound::Broadcast { msg: Control::Rerr(RerrMessage { unreachable: affected }), jitter: false });
        }
    }

    /// MAC gave up on `neighbor`. `stranded` are the unicast packets that were
    /// queued for it (the failed one first); locally originated data is
    /// re-buffered for a new discovery, everything else is dropped.
    pub fn link_failed(&mut self, neighbor: NodeId, stranded: Vec<Packet>, now: SimTime, out: &mut Vec<Outbound>) {
        self.handle_link_break(neighbor, now, out);
        for pkt in stranded {
            match pkt.body {
                Body::Data { .. } if pkt.src == self.id => self.send_data(pkt, now, out),
                Body::Data { .. } => {
                    let dest = pkt.dst;
                    match self.active_route(dest, now, out) {
                        Some(nh) => out.push(Outbound::Forward { pkt, next_hop: nh.node }),
                        None => out.push(Outbound::Drop { pkt, reason: DropReason::LinkBreak }),
                    }
                }
                _ => out.push(Outbound::Drop { pkt, reason: DropReason::LinkBreak }),
            }
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = &AodvRouteEntry> {
        self.table.values()
    }
}
