//! The simulated network: nodes running the DCF MAC and a routing protocol
//! over a shared channel, plus the video sender and sink agents.

use std::collections::{BTreeMap, HashMap};

use crate::aodv::{rerr_bytes, Aodv, AodvStats, RREP_BYTES, RREQ_BYTES};
use crate::dsdv::{Dsdv, DsdvConfig, DsdvStats};
use crate::mac::{ChannelStats, Frame, KindCounters, MacParams, MacPhase, MacState, StatKind, Transmission};
use crate::packet::{Body, Packet, BROADCAST};
use crate::phy::RadioParams;
use crate::routing::{Control, DropReason, Outbound, RouteEvent, RouteTimer};
use crate::scenario::config::{Protocol, ScenarioConfig};
use crate::scenario::topology::MobilityPlan;
use crate::sim::{Event, EventKind, RngStream, Scheduler, SimTime};
use crate::video::logs::{LogRecord, SegmentLog};
use crate::video::trace::VideoTrace;
use crate::NodeId;

#[derive(Debug, Clone)]
pub enum NetEvent {
    /// The sender hands frame `frame_id` to the network.
    FrameGen {
        frame_id: u32,
    },
    BackoffDone,
    TxEnd {
        tx: u64,
    },
    SendAck {
        to: NodeId,
        uid: u64,
    },
    AckTimeout,
    Route(RouteTimer),
    /// A broadcast held back by a random delay.
    Jittered(Box<Packet>),
}

impl EventKind for NetEvent {
    fn kind(&self) -> &'static str {
        match self {
            NetEvent::FrameGen { .. } => "frame_gen",
            NetEvent::BackoffDone => "backoff_done",
            NetEvent::TxEnd { .. } => "tx_end",
            NetEvent::SendAck { .. } => "send_ack",
            NetEvent::AckTimeout => "ack_timeout",
            NetEvent::Route(RouteTimer::RrepWait { .. }) => "rrep_wait",
            NetEvent::Route(RouteTimer::Periodic) => "dsdv_periodic",
            NetEvent::Jittered(_) => "jittered_send",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Router {
    Aodv(Aodv),
    Dsdv(Dsdv),
}

impl Router {
    pub fn seq_regressions(&self) -> u64 {
        match self {
            Router::Aodv(a) => a.seq_regressions(),
            Router::Dsdv(d) => d.seq_regressions(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: NodeId,
    pub mac: MacState,
    pub router: Router,
    mac_rng: RngStream,
    route_rng: RngStream,
}

/// Everything a finished network run reports.
#[derive(Debug, Clone)]
pub struct NetOutcome {
    pub sender_log: SegmentLog,
    pub receiver_log: SegmentLog,
    pub channel: ChannelStats,
    pub route_events: Vec<RouteEvent>,
    /// DATA packets dropped by the routing layer, by reason.
    pub routing_drops: BTreeMap<DropReason, u64>,
    pub aodv: AodvStats,
    pub dsdv: DsdvStats,
    pub seq_regressions: u64,
    pub events: u64,
    pub event_log: Option<Vec<String>>,
    /// DATA packets still held by MAC queues at the horizon.
    pub data_in_mac: u64,
}

pub struct Network<'a> {
    trace: &'a VideoTrace,
    radio: RadioParams,
    mac: MacParams,
    dsdv_cfg: DsdvConfig,
    jitter_max: SimTime,
    data_ttl: u8,
    sender: NodeId,
    receiver: NodeId,
    sched: Scheduler<NetEvent>,
    nodes: Vec<Node>,
    plan: MobilityPlan,
    neighbors: Option<Vec<Vec<NodeId>>>,
    active: HashMap<u64, Transmission>,
    next_tx: u64,
    next_uid: u64,
    channel: ChannelStats,
    sender_log: SegmentLog,
    receiver_log: SegmentLog,
    route_events: Vec<RouteEvent>,
    routing_drops: BTreeMap<DropReason, u64>,
    events: u64,
}

impl<'a> Network<'a> {
    pub fn new(cfg: &ScenarioConfig, trace: &'a VideoTrace, event_log: bool) -> Self {
        let plan = MobilityPlan::new(cfg.n_nodes, cfg.spacing, cfg.mobility, cfg.clip_duration());
        let radio = cfg.radio.clone();
        let neighbors = plan.is_static().then(|| {
            (0..cfg.n_nodes)
                .map(|a| {
                    (0..cfg.n_nodes)
                        .filter(|&b| b != a && radio.in_range_at(plan.initial[a].distance(&plan.initial[b])))
                        .collect()
                })
                .collect()
        });
        let aodv_cfg = cfg.aodv_config();
        let nodes = (0..cfg.n_nodes)
            .map(|id| Node {
                id,
                mac: MacState::new(&cfg.mac),
                router: match cfg.protocol {
                    Protocol::Aodv => Router::Aodv(Aodv::new(id, aodv_cfg.clone())),
                    Protocol::Dsdv => Router::Dsdv(Dsdv::new(id, cfg.dsdv.clone())),
                },
                mac_rng: RngStream::derive(cfg.seed, &format!("mac/{id}")),
                route_rng: RngStream::derive(cfg.seed, &format!("route/{id}")),
            })
            .collect();
        let sched = if event_log { Scheduler::new().with_event_log() } else { Scheduler::new() };
        Network {
            trace,
            radio,
            mac: cfg.mac.clone(),
            dsdv_cfg: cfg.dsdv.clone(),
            jitter_max: cfg.aodv.rebroadcast_jitter,
            data_ttl: cfg.data_ttl,
            sender: cfg.sender(),
            receiver: cfg.receiver(),
            sched,
            nodes,
            plan,
            neighbors,
            active: HashMap::new(),
            next_tx: 0,
            next_uid: 0,
            channel: ChannelStats::default(),
            sender_log: SegmentLog::new(),
            receiver_log: SegmentLog::new(),
            route_events: Vec::new(),
            routing_drops: BTreeMap::new(),
            events: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Schedules the video frames and the DSDV start-up dumps.
    pub fn start(&mut self) {
        for e in &self.trace.entries {
            self.sched
                .schedule(e.gen_time, self.sender, NetEvent::FrameGen { frame_id: e.frame_id })
                .expect("frames are scheduled before the clock moves");
        }
        for n in 0..self.nodes.len() {
            if matches!(self.nodes[n].router, Router::Dsdv(_)) {
                let at = self.nodes[n].route_rng.time_below(self.dsdv_cfg.start_jitter);
                self.sched.schedule(at, n, NetEvent::Route(RouteTimer::Periodic)).expect("start is at time zero");
            }
        }
    }

    /// Executes events up to `until` inclusive.
    pub fn run_until(&mut self, until: SimTime) {
        while let Some(ev) = self.sched.pop_until(until) {
            self.events += 1;
            self.handle(ev);
        }
    }

    pub fn finish(self) -> NetOutcome {
        let mut aodv = AodvStats::default();
        let mut dsdv = DsdvStats::default();
        let mut seq_regressions = 0;
        let mut data_in_mac = 0;
        for n in &self.nodes {
            seq_regressions += n.router.seq_regressions();
            data_in_mac +=
                n.mac.queue.iter().chain(n.mac.current.as_ref()).filter(|p| p.segment().is_some()).count() as u64;
            match &n.router {
                Router::Aodv(a) => {
                    let s = a.stats();
                    aodv.rreq_originated += s.rreq_originated;
                    aodv.rreq_forwarded += s.rreq_forwarded;
                    aodv.rrep_sent += s.rrep_sent;
                    aodv.rerr_sent += s.rerr_sent;
                    aodv.discoveries_failed += s.discoveries_failed;
                }
                Router::Dsdv(d) => {
                    let s = d.stats();
                    dsdv.periodic_updates += s.periodic_updates;
                    dsdv.triggered_updates += s.triggered_updates;
                    dsdv.routes_adopted += s.routes_adopted;
                }
            }
        }
        NetOutcome {
            event_log: self.sched.event_log().map(<[String]>::to_vec),
            sender_log: self.sender_log,
            receiver_log: self.receiver_log,
            channel: self.channel,
            route_events: self.route_events,
            routing_drops: self.routing_drops,
            aodv,
            dsdv,
            seq_regressions,
            events: self.events,
            data_in_mac,
        }
    }

    fn handle(&mut self, ev: Event<NetEvent>) {
        let n = ev.target;
        match ev.payload {
            NetEvent::FrameGen { frame_id } => self.on_frame(frame_id),
            NetEvent::BackoffDone => self.on_backoff_done(n),
            NetEvent::TxEnd { tx } => self.on_tx_end(tx),
            NetEvent::SendAck { to, uid } => {
                if self.nodes[n].mac.transmitting.is_none() {
                    self.transmit(n, Frame::Ack { to, uid });
                }
            }
            NetEvent::AckTimeout => self.on_ack_timeout(n),
            NetEvent::Route(timer) => {
                let now = self.now();
                let mut out = Vec::new();
                match &mut self.nodes[n].router {
                    Router::Aodv(a) => a.on_timer(timer, now, &mut out),
                    Router::Dsdv(d) => d.on_timer(timer, now, &mut out),
                }
                self.apply(n, out);
            }
            NetEvent::Jittered(pkt) => self.mac_enqueue(n, *pkt),
        }
    }

    fn counters(&mut self, kind: StatKind) -> &mut KindCounters {
        self.channel.entry(kind)
    }

    fn on_frame(&mut self, frame_id: u32) {
        let now = self.now();
        let s = self.sender;
        for (k, size) in self.trace.segment_sizes(frame_id).into_iter().enumerate() {
            let uid = self.next_uid;
            self.next_uid += 1;
            let segment_index = k as u32;
            self.sender_log.record(LogRecord { time: now, packet_uid: uid, frame_id, segment_index });
            let pkt = Packet {
                uid,
                src: s,
                dst: self.receiver,
                prev_hop: s,
                next_hop: None,
                size,
                ttl: self.data_ttl,
                sent_at: now,
                body: Body::Data { frame_id, segment_index },
            };
            let mut out = Vec::new();
            match &mut self.nodes[s].router {
                Router::Aodv(a) => a.send_data(pkt, now, &mut out),
                Router::Dsdv(d) => d.route_data(pkt, false, &mut out),
            }
            self.apply(s, out);
        }
    }

    fn control_packet(&mut self, node: NodeId, msg: Control, to: Option<NodeId>) -> Packet {
        let uid = self.next_uid;
        self.next_uid += 1;
        let (size, body) = match msg {
            Control::Rreq(m) => (RREQ_BYTES, Body::Rreq(m)),
            Control::Rrep(m) => (RREP_BYTES, Body::Rrep(m)),
            Control::Rerr(m) => (rerr_bytes(&m), Body::Rerr(m)),
            Control::Dsdv(u) => (u.size_bytes(&self.dsdv_cfg), Body::Dsdv(u)),
        };
        Packet {
            uid,
            src: node,
            dst: to.unwrap_or(BROADCAST),
            prev_hop: node,
            next_hop: to,
            size,
            ttl: 1,
            sent_at: self.now(),
            body,
        }
    }

    /// Carries out the actions a routing handler asked for.
    fn apply(&mut self, node: NodeId, out: Vec<Outbound>) {
        let now = self.now();
        for o in out {
            match o {
                Outbound::Broadcast { msg, jitter } => {
                    let pkt = self.control_packet(node, msg, None);
                    if jitter {
                        let delay = self.nodes[node].route_rng.time_below(self.jitter_max);
                        self.sched.schedule_in(delay, node, NetEvent::Jittered(Box::new(pkt)));
                    } else {
                        self.mac_enqueue(node, pkt);
                    }
                }
                Outbound::Unicast { to, msg } => {
                    let pkt = self.control_packet(node, msg, Some(to));
                    self.mac_enqueue(node, pkt);
                }
                Outbound::Forward { mut pkt, next_hop } => {
                    pkt.prev_hop = node;
                    pkt.next_hop = Some(next_hop);
                    self.mac_enqueue(node, pkt);
                }
                Outbound::Drop { pkt, reason } => {
                    if pkt.segment().is_some() {
                        *self.routing_drops.entry(reason).or_default() += 1;
                    }
                }
                Outbound::Timer { at, timer } => {
                    self.sched.schedule(at.max(now), node, NetEvent::Route(timer)).expect("clamped to now");
                }
                Outbound::Log(ev) => self.route_events.push(ev),
            }
        }
    }

    fn mac_enqueue(&mut self, n: NodeId, pkt: Packet) {
        let kind = StatKind::Packet(pkt.kind());
        self.counters(kind).offered += 1;
        if self.nodes[n].mac.queue.len() >= self.mac.queue_limit {
            self.counters(kind).dropped_queue += 1;
            return;
        }
        let m = &mut self.nodes[n].mac;
        m.queue.push_back(pkt);
        if m.current.is_none() && m.phase == MacPhase::Idle {
            self.next_service(n);
        }
    }

    fn next_service(&mut self, n: NodeId) {
        let cw_min = self.mac.cw_min;
        let node = &mut self.nodes[n];
        match node.mac.queue.pop_front() {
            Some(p) => {
                node.mac.current = Some(p);
                node.mac.retries = 0;
                node.mac.cw = cw_min;
                let slots = node.mac_rng.below(cw_min);
                self.contend(n, slots);
            }
            None => node.mac.phase = MacPhase::Idle,
        }
    }

    fn medium_idle(&self, n: NodeId) -> bool {
        let m = &self.nodes[n].mac;
        m.busy == 0 && m.transmitting.is_none()
    }

    fn contend(&mut self, n: NodeId, slots: u32) {
        if self.medium_idle(n) {
            self.start_counting(n, slots);
        } else {
            self.nodes[n].mac.phase = MacPhase::Deferring { slots };
        }
    }

    fn start_counting(&mut self, n: NodeId, slots: u32) {
        let now = self.now();
        let fire_at = now + self.mac.difs + self.mac.slot.times(u64::from(slots));
        let timer = self.sched.schedule(fire_at, n, NetEvent::BackoffDone).expect("fires in the future");
        self.nodes[n].mac.phase = MacPhase::Counting { slots, started: now, fire_at, timer };
    }

    /// The medium just turned busy for `n`: freeze a running countdown. A
    /// countdown ending at this very instant goes ahead (same-slot collision).
    fn freeze(&mut self, n: NodeId) {
        let now = self.now();
        if let MacPhase::Counting { slots, started, fire_at, timer } = self.nodes[n].mac.phase {
            if fire_at > now {
                self.sched.cancel(timer);
                let left = MacState::remaining_slots(slots, started, now, &self.mac);
                self.nodes[n].mac.phase = MacPhase::Deferring { slots: left };
            }
        }
    }

    fn resume_if_idle(&mut self, n: NodeId) {
        if let MacPhase::Deferring { slots } = self.nodes[n].mac.phase {
            if self.medium_idle(n) {
                self.start_counting(n, slots);
            }
        }
    }

    fn audience(&self, sender: NodeId) -> Vec<NodeId> {
        if let Some(nb) = &self.neighbors {
            return nb[sender].clone();
        }
        let pos = self.plan.positions_at(self.now());
        (0..self.nodes.len())
            .filter(|&b| b != sender && self.radio.in_range_at(pos[sender].distance(&pos[b])))
            .collect()
    }

    fn on_backoff_done(&mut self, n: NodeId) {
        if self.nodes[n].mac.transmitting.is_some() {
            // our own ACK went out in the same instant; count down again
            self.nodes[n].mac.phase = MacPhase::Deferring { slots: 0 };
            return;
        }
        let Some(pkt) = self.nodes[n].mac.current.clone() else {
            self.nodes[n].mac.phase = MacPhase::Idle;
            return;
        };
        self.nodes[n].mac.phase = MacPhase::Transmitting;
        self.transmit(n, Frame::Packet(pkt));
    }

    fn transmit(&mut self, sender: NodeId, frame: Frame) {
        let id = self.next_tx;
        self.next_tx += 1;
        let bytes = match &frame {
            Frame::Packet(p) => p.size,
            Frame::Ack { .. } => self.mac.ack_bytes,
        };
        let end = self.now() + self.mac.airtime(bytes, self.radio.bitrate);
        self.counters(frame.stat_kind()).sent += 1;

        // half duplex: whatever the sender was receiving is lost
        let receiving = std::mem::take(&mut self.nodes[sender].mac.receiving);
        for rid in &receiving {
            if let Some(t) = self.active.get_mut(rid) {
                t.corrupt(sender);
            }
        }
        self.nodes[sender].mac.receiving = receiving;
        self.nodes[sender].mac.transmitting = Some(id);
        self.freeze(sender);

        let listeners = self.audience(sender);
        let mut audience = Vec::with_capacity(listeners.len());
        for n in listeners {
            let mut corrupted = self.nodes[n].mac.transmitting.is_some();
            if !self.nodes[n].mac.receiving.is_empty() {
                corrupted = true;
                for rid in &self.nodes[n].mac.receiving {
                    if let Some(t) = self.active.get_mut(rid) {
                        t.corrupt(n);
                    }
                }
            }
            self.nodes[n].mac.receiving.push(id);
            self.nodes[n].mac.busy += 1;
            self.freeze(n);
            audience.push((n, corrupted));
        }
        self.active.insert(id, Transmission { id, sender, frame, end, audience });
        self.sched.schedule(end, sender, NetEvent::TxEnd { tx: id }).expect("ends in the future");
    }

    fn on_tx_end(&mut self, id: u64) {
        let Some(tx) = self.active.remove(&id) else { return };
        let sender = tx.sender;
        self.nodes[sender].mac.transmitting = None;
        for &(n, _) in &tx.audience {
            let m = &mut self.nodes[n].mac;
            m.receiving.retain(|&r| r != id);
            m.busy -= 1;
        }

        let kind = tx.frame.stat_kind();
        match tx.frame.addressee() {
            Some(a) => match tx.audience.iter().find(|(n, _)| *n == a) {
                Some((_, true)) => self.counters(kind).collided += 1,
                Some((_, false)) => self.counters(kind).delivered += 1,
                None => self.counters(kind).unreached += 1,
            },
            None => {
                for &(_, c) in &tx.audience {
                    if c {
                        self.counters(kind).collided += 1;
                    } else {
                        self.counters(kind).delivered += 1;
                    }
                }
            }
        }

        for &(n, corrupted) in &tx.audience {
            if !corrupted {
                self.receive(n, sender, &tx.frame);
            }
        }

        if let Frame::Packet(p) = &tx.frame {
            if p.next_hop.is_some() {
                let timer =
                    self.sched.schedule_in(self.mac.ack_timeout(self.radio.bitrate), sender, NetEvent::AckTimeout);
                self.nodes[sender].mac.phase = MacPhase::AwaitingAck { timer };
            } else {
                self.counters(kind).completed += 1;
                self.nodes[sender].mac.current = None;
                self.next_service(sender);
            }
        }

        self.resume_if_idle(sender);
        for &(n, _) in &tx.audience {
            self.resume_if_idle(n);
        }
    }

    fn receive(&mut self, n: NodeId, from: NodeId, frame: &Frame) {
        match frame {
            Frame::Ack { to, uid } => {
                if *to != n {
                    return;
                }
                let m = &mut self.nodes[n].mac;
                let MacPhase::AwaitingAck { timer } = m.phase else { return };
                if m.current.as_ref().map(|p| p.uid) != Some(*uid) {
                    return;
                }
                self.sched.cancel(timer);
                let pkt = m.current.take().expect("checked above");
                m.phase = MacPhase::Idle;
                self.counters(StatKind::Packet(pkt.kind())).completed += 1;
                self.next_service(n);
            }
            Frame::Packet(p) => match p.next_hop {
                Some(a) if a == n => {
                    self.sched.schedule_in(self.mac.sifs, n, NetEvent::SendAck { to: from, uid: p.uid });
                    if self.nodes[n].mac.last_uid.insert(from, p.uid) == Some(p.uid) {
                        return;
                    }
                    self.net_receive(n, from, p.clone());
                }
                Some(_) => {}
                None => self.net_receive(n, from, p.clone()),
            },
        }
    }

    fn net_receive(&mut self, n: NodeId, from: NodeId, pkt: Packet) {
        let now = self.now();
        let mut out = Vec::new();
        let router = &mut self.nodes[n].router;
        match (&pkt.body, router) {
            (Body::Data { frame_id, segment_index }, router) => {
                if pkt.dst == n {
                    if n == self.receiver {
                        self.receiver_log.record(LogRecord {
                            time: now,
                            packet_uid: pkt.uid,
                            frame_id: *frame_id,
                            segment_index: *segment_index,
                        });
                    }
                    if let Router::Aodv(a) = router {
                        a.deliver_local(&pkt, from, now, &mut out);
                    }
                } else {
                    match router {
                        Router::Aodv(a) => a.forward_data(pkt, from, now, &mut out),
                        Router::Dsdv(d) => d.route_data(pkt, true, &mut out),
                    }
                }
            }
            (Body::Rreq(m), Router::Aodv(a)) => a.handle_rreq(m, from, now, &mut out),
            (Body::Rrep(m), Router::Aodv(a)) => a.handle_rrep(m, from, now, &mut out),
            (Body::Rerr(m), Router::Aodv(a)) => a.handle_rerr(m, from, now, &mut out),
            (Body::Dsdv(u), Router::Dsdv(d)) => d.process_update(u, from, now, &mut out),
            _ => {}
        }
        self.apply(n, out);
    }

    fn on_ack_timeout(&mut self, n: NodeId) {
        let retry_limit = self.mac.retry_limit;
        let cw_max = self.mac.cw_max;
        let m = &mut self.nodes[n].mac;
        m.retries += 1;
        if m.retries < retry_limit {
            m.cw = (m.cw * 2).min(cw_max);
            let cw = m.cw;
            let slots = self.nodes[n].mac_rng.below(cw);
            self.contend(n, slots);
            return;
        }
        let pkt = m.current.take().expect("awaiting an ack implies a packet in service");
        m.phase = MacPhase::Idle;
        m.retries = 0;
        let neighbor = pkt.next_hop.expect("only unicast frames await acks");
        let mut stranded = vec![pkt];
        stranded.extend(m.drain_for(neighbor));
        self.counters(StatKind::Packet(stranded[0].kind())).dropped_retry += 1;
        for p in &stranded[1..] {
            self.counters(StatKind::Packet(p.kind())).stranded += 1;
        }
        let now = self.now();
        let mut out = Vec::new();
        match &mut self.nodes[n].router {
            Router::Aodv(a) => a.link_failed(neighbor, stranded, now, &mut out),
            Router::Dsdv(d) => d.link_failed(neighbor, stranded, now, &mut out),
        }
        self.apply(n, out);
        if self.nodes[n].mac.current.is_none() && self.nodes[n].mac.phase == MacPhase::Idle {
            self.next_service(n);
        }
    }
}
