//! Proactive destination-sequenced distance-vector routing.
//!
//! Every node broadcasts its full table once per update period. Even sequence
//! numbers are issued by the destination itself; odd numbers mark a broken
//! route. A route learned from a neighbor is only re-advertised once it has
//! been held for the settling time; until then the previously settled copy is
//! advertised instead. With periodic dumps that are phase-aligned to within
//! the settling time, each period therefore carries routing information
//! exactly one hop further.

use std::collections::BTreeMap;

use crate::packet::Packet;
use crate::routing::{Control, DropReason, NextHop, Outbound, RouteEvent, RouteEventKind, RouteTimer};
use crate::sim::SimTime;
use crate::NodeId;

pub const INFINITE_METRIC: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct DsdvConfig {
    pub update_period: SimTime,
    pub settling_time: SimTime,
    /// First dump of each node is drawn uniformly from `[0, start_jitter)`.
    pub start_jitter: SimTime,
    pub header_bytes: u32,
    pub entry_bytes: u32,
}

impl Default for DsdvConfig {
    fn default() -> Self {
        DsdvConfig {
            update_period: SimTime::from_secs(15),
            settling_time: SimTime::from_secs(6),
            start_jitter: SimTime::from_secs(1),
            header_bytes: 8,
            entry_bytes: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Advert {
    pub dest: NodeId,
    pub metric: u32,
    pub seq: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsdvUpdate {
    pub sender: NodeId,
    pub entries: Vec<Advert>,
    pub full_dump: bool,
}

impl DsdvUpdate {
    pub fn size_bytes(&self, cfg: &DsdvConfig) -> u32 {
        cfg.header_bytes + cfg.entry_bytes * self.entries.len() as u32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsdvRouteEntry {
    pub dest: NodeId,
    pub next_hop: NodeId,
    pub metric: u32,
    pub dest_seq: u32,
    pub installed_at: SimTime,
    /// Last settled `(metric, seq)`, the version put into dumps while the
    /// current one is still settling.
    pub settled: Option<(u32, u32)>,
}

impl DsdvRouteEntry {
    pub fn is_reachable(&self) -> bool {
        self.metric != INFINITE_METRIC && self.dest_seq.is_multiple_of(2)
    }

    pub fn is_settling(&self, now: SimTime, settling: SimTime) -> bool {
        now.saturating_sub(self.installed_at) < settling
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DsdvStats {
    pub periodic_updates: u64,
    pub triggered_updates: u64,
    pub routes_adopted: u64,
}

#[derive(Debug, Clone)]
pub struct Dsdv {
    id: NodeId,
    cfg: DsdvConfig,
    own_seq: u32,
    table: BTreeMap<NodeId, DsdvRouteEntry>,
    stats: DsdvStats,
    seq_regressions: u64,
}

impl Dsdv {
    pub fn new(id: NodeId, cfg: DsdvConfig) -> Self {
        let mut table = BTreeMap::new();
        table.insert(
            id,
            DsdvRouteEntry {
                dest: id,
                next_hop: id,
                metric: 0,
                dest_seq: 0,
                installed_at: SimTime::ZERO,
                settled: Some((0, 0)),
            },
        );
        Dsdv { id, cfg, own_seq: 0, table, stats: DsdvStats::default(), seq_regressions: 0 }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn config(&self) -> &DsdvConfig {
        &self.cfg
    }

    pub fn own_seq(&self) -> u32 {
        self.own_seq
    }

    pub fn entry(&self, dest: NodeId) -> Option<&DsdvRouteEntry> {
        self.table.get(&dest)
    }

    pub fn entries(&self) -> impl Iterator<Item = &DsdvRouteEntry> {
        self.table.values()
    }

    pub fn stats(&self) -> &DsdvStats {
        &self.stats
    }

    /// Times a stored sequence number would have decreased. Must stay 0.
    pub fn seq_regressions(&self) -> u64 {
        self.seq_regressions
    }

    pub fn route_lookup(&self, dest: NodeId) -> Option<NextHop> {
        if dest == self.id {
            return Some(NextHop { node: self.id, hop_count: 0 });
        }
        self.table.get(&dest).filter(|e| e.is_reachable()).map(|e| NextHop { node: e.next_hop, hop_count: e.metric })
    }

    /// Builds this period's full dump and re-arms the periodic timer.
    pub fn periodic_update(&mut self, now: SimTime, out: &mut Vec<Outbound>) -> DsdvUpdate {
        let update = self.full_dump(now);
        self.stats.periodic_updates += 1;
        out.push(Outbound::Broadcast { msg: Control::Dsdv(update.clone()), jitter: false });
        out.push(Outbound::Timer { at: now + self.cfg.update_period, timer: RouteTimer::Periodic });
        update
    }

    /// Full table snapshot with a freshly incremented own sequence number.
    pub fn full_dump(&mut self, now: SimTime) -> DsdvUpdate {
        self.own_seq += 2;
        let own_seq = self.own_seq;
        let settling = self.cfg.settling_time;
        let mut entries = Vec::with_capacity(self.table.len());
        for e in self.table.values_mut() {
            if e.dest == self.id {
                e.dest_seq = own_seq;
                e.installed_at = now;
                e.settled = Some((0, own_seq));
                entries.push(Advert { dest: e.dest, metric: 0, seq: own_seq });
                continue;
            }
            if !e.is_reachable() || !e.is_settling(now, settling) {
                e.settled = Some((e.metric, e.dest_seq));
            }
            if let Some((metric, seq)) = e.settled {
                entries.push(Advert { dest: e.dest, metric, seq });
            }
        }
        DsdvUpdate { sender: self.id, entries, full_dump: true }
    }

    pub fn on_timer(&mut self, timer: RouteTimer, now: SimTime, out: &mut Vec<Outbound>) {
        if timer == RouteTimer::Periodic {
            self.periodic_update(now, out);
        }
    }

    fn write_seq(&mut self, dest: NodeId, entry: DsdvRouteEntry) {
        if let Some(old) = self.table.get(&dest) {
            if entry.dest_seq < old.dest_seq {
                self.seq_regressions += 1;
                debug_assert!(false, "sequence regression at {} for {}", self.id, dest);
                return;
            }
        }
        self.table.insert(dest, entry);
    }

    /// Applies a neighbor's advertisement.
    pub fn process_update(&mut self, msg: &DsdvUpdate, from: NodeId, now: SimTime, out: &mut Vec<Outbound>) {
        let settling = self.cfg.settling_time;
        let mut broken = Vec::new();
        for adv in &msg.entries {
            if adv.dest == self.id {
                continue;
            }
            let existing = self.table.get(&adv.dest).cloned();
            if adv.seq % 2 == 1 || adv.metric == INFINITE_METRIC {
                // broken-route advertisement
                if let Some(e) = existing {
                    if e.next_hop == from && e.is_reachable() && e.dest_seq < adv.seq {
                        let mut e2 = e.clone();
                        if !e.is_settling(now, settling) {
                            e2.settled = Some((e.metric, e.dest_seq));
                        }
                        e2.metric = INFINITE_METRIC;
                        e2.dest_seq = adv.seq;
                        e2.installed_at = now;
                        self.write_seq(adv.dest, e2);
                        broken.push(Advert { dest: adv.dest, metric: INFINITE_METRIC, seq: adv.seq });
                        out.push(Outbound::Log(RouteEvent {
                            time: now,
                            node: self.id,
                            kind: RouteEventKind::Break,
                            dest: adv.dest,
                            hop_count: None,
                        }));
                    }
                }
                continue;
            }
            let metric = adv.metric.saturating_add(1);
            let adopt = match &existing {
                None => true,
                Some(e) => adv.seq > e.dest_seq || (adv.seq == e.dest_seq && metric < e.metric),
            };
            if !adopt {
                continue;
            }
            let settled = match &existing {
                Some(e) if !e.is_settling(now, settling) || !e.is_reachable() => Some((e.metric, e.dest_seq)),
                Some(e) => e.settled,
                None => None,
            };
            let newly_reachable = existing.as_ref().is_none_or(|e| !e.is_reachable());
            let path_changed = existing.as_ref().is_none_or(|e| e.next_hop != from || e.metric != metric);
            self.write_seq(
                adv.dest,
                DsdvRouteEntry {
                    dest: adv.dest,
                    next_hop: from,
                    metric,
                    dest_seq: adv.seq,
                    installed_at: now,
                    settled,
                },
            );
            if newly_reachable || path_changed {
                self.stats.routes_adopted += 1;
                out.push(Outbound::Log(RouteEvent {
                    time: now,
                    node: self.id,
                    kind: RouteEventKind::Install,
                    dest: adv.dest,
                    hop_count: Some(metric),
                }));
            }
        }
        if !broken.is_empty() {
            self.trigger(broken, out);
        }
    }

    fn trigger(&mut self, entries: Vec<Advert>, out: &mut Vec<Outbound>) {
        self.stats.triggered_updates += 1;
        out.push(Outbound::Broadcast {
            msg: Control::Dsdv(DsdvUpdate { sender: self.id, entries, full_dump: false }),
            jitter: true,
        });
    }

    /// Marks every route through `neighbor` broken (odd sequence, infinite
    /// metric) and announces them in a triggered update.
    pub fn link_break(&mut self, neighbor: NodeId, now: SimTime, out: &mut Vec<Outbound>) {
        let settling = self.cfg.settling_time;
        let mut broken = Vec::new();
        for e in self.table.values_mut() {
            if e.dest != self.id && e.next_hop == neighbor && e.is_reachable() {
                if !e.is_settling(now, settling) {
                    e.settled = Some((e.metric, e.dest_seq));
                }
                e.metric = INFINITE_METRIC;
                e.dest_seq += 1;
                e.installed_at = now;
                broken.push(Advert { dest: e.dest, metric: INFINITE_METRIC, seq: e.dest_seq });
                out.push(Outbound::Log(RouteEvent {
                    time: now,
                    node: self.id,
                    kind: RouteEventKind::Break,
                    dest: e.dest,
                    hop_count: None,
                }));
            }
        }
        if !broken.is_empty() {
            self.trigger(broken, out);
        }
    }

    /// Sends or forwards a data packet; a miss drops it.
    pub fn route_data(&mut self, mut pkt: Packet, forwarding: bool, out: &mut Vec<Outbound>) {
        if forwarding {
            if pkt.ttl <= 1 {
                out.push(Outbound::Drop { pkt, reason: DropReason::TtlExpired });
                return;
            }
            pkt.ttl -= 1;
        }
        match self.route_lookup(pkt.dst) {
            Some(nh) if nh.node != self.id => out.push(Outbound::Forward { pkt, next_hop: nh.node }),
            _ => out.push(Outbound::Drop { pkt, reason: DropReason::NoRoute }),
        }
    }

    /// MAC gave up on `neighbor`: break its routes and re-route the stranded packets.
    pub fn link_failed(&mut self, neighbor: NodeId, stranded: Vec<Packet>, now: SimTime, out: &mut Vec<Outbound>) {
        self.link_break(neighbor, now, out);
        for pkt in stranded {
            match self.route_lookup(pkt.dst) {
                Some(nh) if pkt.segment().is_some() && nh.node != self.id => {
                    out.push(Outbound::Forward { pkt, next_hop: nh.node })
                }
                _ => out.push(Outbound::Drop { pkt, reason: DropReason::LinkBreak }),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{in_range, RadioParams};
    use crate::scenario::matrix_topology;
    use std::collections::VecDeque;

    fn adv(dest: NodeId, metric: u32, seq: u32) -> DsdvUpdate {
        DsdvUpdate { sender: 0, entries: vec![Advert { dest, metric, seq }], full_dump: false }
    }

    fn t(s: u64) -> SimTime {
        SimTime::from_secs(s)
    }

    #[test]
    fn sequence_and_metric_rules() {
        let mut d = Dsdv::new(1, DsdvConfig::default());
        let mut out = Vec::new();
        d.process_update(&adv(9, 3, 10), 2, t(0), &mut out);
        assert_eq!(d.route_lookup(9), Some(NextHop { node: 2, hop_count: 4 }));
        // older sequence number loses even with a better metric
        d.process_update(&adv(9, 0, 8), 3, t(1), &mut out);
        assert_eq!(d.route_lookup(9).unwrap().node, 2);
        // equal sequence number, worse metric: ignored
        d.process_update(&adv(9, 5, 10), 4, t(1), &mut out);
        assert_eq!(d.route_lookup(9).unwrap().node, 2);
        // equal sequence number, better metric: adopted
        d.process_update(&adv(9, 1, 10), 5, t(1), &mut out);
        assert_eq!(d.route_lookup(9), Some(NextHop { node: 5, hop_count: 2 }));
        // newer sequence number wins even when longer
        d.process_update(&adv(9, 7, 12), 6, t(2), &mut out);
        assert_eq!(d.route_lookup(9), Some(NextHop { node: 6, hop_count: 8 }));
        assert_eq!(d.entry(9).unwrap().dest_seq, 12);
        assert_eq!(d.seq_regressions(), 0);
    }

    #[test]
    fn two_nodes_learn_each_other() {
        let mut a = Dsdv::new(0, DsdvConfig::default());
        let mut b = Dsdv::new(1, DsdvConfig::default());
        let mut out = Vec::new();
        let ua = a.periodic_update(t(0), &mut out);
        let ub = b.periodic_update(t(0), &mut out);
        b.process_update(&ua, 0, t(0), &mut out);
        a.process_update(&ub, 1, t(0), &mut out);
        assert_eq!(a.route_lookup(1), Some(NextHop { node: 1, hop_count: 1 }));
        assert_eq!(b.route_lookup(0), Some(NextHop { node: 0, hop_count: 1 }));
        assert_eq!(a.own_seq() % 2, 0);
        assert!(out.iter().any(|o| matches!(o, Outbound::Timer { timer: RouteTimer::Periodic, .. })));
    }

    #[test]
    fn settling_routes_advertise_previous_copy() {
        let mut d = Dsdv::new(1, DsdvConfig::default());
        let mut out = Vec::new();
        d.process_update(&adv(9, 0, 2), 9, t(0), &mut out);
        // fresh route is still settling: not advertised yet
        let dump = d.full_dump(t(1));
        assert!(!dump.entries.iter().any(|a| a.dest == 9));
        let dump = d.full_dump(t(15));
        assert!(dump.entries.contains(&Advert { dest: 9, metric: 1, seq: 2 }));
    }

    /// Synchronous rounds: every node dumps, then every dump is delivered.
    fn run_rounds(adj: &[Vec<NodeId>], rounds: u64) -> Vec<Dsdv> {
        let cfg = DsdvConfig::default();
        let mut nodes: Vec<Dsdv> = (0..adj.len()).map(|i| Dsdv::new(i, cfg.clone())).collect();
        for r in 0..rounds {
            let now = cfg.update_period.times(r);
            let mut out = Vec::new();
            let dumps: Vec<DsdvUpdate> = nodes.iter_mut().map(|n| n.periodic_update(now, &mut out)).collect();
            for (from, dump) in dumps.iter().enumerate() {
                for &to in &adj[from] {
                    nodes[to].process_update(dump, from, now, &mut out);
                }
            }
        }
        nodes
    }

    fn bfs(adj: &[Vec<NodeId>], src: NodeId) -> Vec<Option<u32>> {
        let mut dist = vec![None; adj.len()];
        dist[src] = Some(0);
        let mut q = VecDeque::from([src]);
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(dist[u].unwrap() + 1);
                    q.push_back(v);
                }
            }
        }
        dist
    }

    fn radio_adjacency(n: usize, spacing: f64) -> Vec<Vec<NodeId>> {
        let pos = matrix_topology(n, spacing);
        let radio = RadioParams::default();
        (0..n).map(|a| (0..n).filter(|&b| b != a && in_range(pos[a], pos[b], &radio)).collect()).collect()
    }

    #[test]
    fn chain_needs_one_period_per_hop() {
        let adj: Vec<Vec<NodeId>> = vec![vec![1], vec![0, 2], vec![1, 3], vec![2]];
        let nodes = run_rounds(&adj, 2);
        assert_eq!(nodes[0].route_lookup(2).map(|h| h.hop_count), Some(2));
        assert!(nodes[0].route_lookup(3).is_none());
        let nodes = run_rounds(&adj, 3);
        assert_eq!(nodes[0].route_lookup(3), Some(NextHop { node: 1, hop_count: 3 }));
    }

    #[test]
    fn converged_metrics_match_bfs_on_grids() {
        for n in [4, 9, 16, 25] {
            for spacing in [20.0, 50.0, 100.0, 150.0, 200.0] {
                let adj = radio_adjacency(n, spacing);
                let nodes = run_rounds(&adj, 12);
                for (src, node) in nodes.iter().enumerate() {
                    let want = bfs(&adj, src);
                    for (dst, w) in want.iter().enumerate() {
                        let got = node.route_lookup(dst).map(|h| h.hop_count);
                        assert_eq!(got, *w, "n={n} d={spacing} {src}->{dst}");
                    }
                    assert_eq!(node.seq_regressions(), 0);
                }
            }
        }
    }

    #[test]
    fn link_break_marks_routes_odd_and_infinite() {
        let adj: Vec<Vec<NodeId>> = vec![vec![1], vec![0, 2], vec![1]];
        let mut nodes = run_rounds(&adj, 4);
        let before = nodes[0].entry(2).unwrap().dest_seq;
        let mut out = Vec::new();
        nodes[0].link_failed(1, vec![], t(100), &mut out);
        let e = nodes[0].entry(2).unwrap();
        assert_eq!(e.metric, INFINITE_METRIC);
        assert_eq!(e.dest_seq, before + 1);
        assert!(nodes[0].route_lookup(1).is_none());
        assert!(nodes[0].route_lookup(2).is_none());
        let trig = out.iter().find_map(|o| match o {
            Outbound::Broadcast { msg: Control::Dsdv(u), .. } => Some(u.clone()),
            _ => None,
        });
        let trig = trig.expect("triggered update");
        assert!(!trig.full_dump);
        assert!(trig.entries.contains(&Advert { dest: 2, metric: INFINITE_METRIC, seq: before + 1 }));

        // a fresher even sequence number from the destination restores the route
        let mut out = Vec::new();
        nodes[0].process_update(&adv(2, 1, before + 2), 1, t(101), &mut out);
        assert_eq!(nodes[0].route_lookup(2), Some(NextHop { node: 1, hop_count: 2 }));
        assert_eq!(nodes[0].seq_regressions(), 0);
    }

    #[test]
    fn broken_advert_from_next_hop_propagates() {
        let mut d = Dsdv::new(1, DsdvConfig::default());
        let mut out = Vec::new();
        d.process_update(&adv(9, 2, 4), 2, t(0), &mut out);
        let mut out = Vec::new();
        // a break heard from some other neighbor does not matter
        d.process_update(&adv(9, INFINITE_METRIC, 5), 3, t(1), &mut out);
        assert!(d.route_lookup(9).is_some());
        d.process_update(&adv(9, INFINITE_METRIC, 5), 2, t(1), &mut out);
        assert!(d.route_lookup(9).is_none());
        assert_eq!(d.stats().triggered_updates, 1);
    }

    #[test]
    fn data_without_route_is_dropped() {
        let mut d = Dsdv::new(0, DsdvConfig::default());
        let pkt = Packet {
            uid: 1,
            src: 0,
            dst: 5,
            prev_hop: 0,
            next_hop: None,
            size: 100,
            ttl: 8,
            sent_at: SimTime::ZERO,
            body: crate::packet::Body::Data { frame_id: 0, segment_index: 0 },
        };
        let mut out = Vec::new();
        d.route_data(pkt, false, &mut out);
        assert!(matches!(out[0], Outbound::Drop { reason: DropReason::NoRoute, .. }));
    }
}
