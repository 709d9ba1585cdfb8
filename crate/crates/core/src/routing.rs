//! Types shared by the routing protocols and the network that hosts them.
//!
//! Protocols are plain state machines: every handler appends [`Outbound`]
//! actions that the hosting network executes (transmit, drop, arm a timer).

use std::fmt;

use crate::aodv::{RerrMessage, RrepMessage, RreqMessage};
use crate::dsdv::DsdvUpdate;
use crate::packet::Packet;
use crate::sim::SimTime;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NextHop {
    pub node: NodeId,
    pub hop_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DropReason {
    /// No usable route and the protocol keeps no discovery buffer.
    NoRoute,
    /// Route discovery gave up after its final retry.
    DiscoveryFailed,
    /// Discovery buffer full or entry timed out.
    BufferOverflow,
    BufferTimeout,
    /// The next hop stopped acknowledging and no alternative exists.
    LinkBreak,
    TtlExpired,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::NoRoute => "no_route",
            DropReason::DiscoveryFailed => "discovery_failed",
            DropReason::BufferOverflow => "buffer_overflow",
            DropReason::BufferTimeout => "buffer_timeout",
            DropReason::LinkBreak => "link_break",
            DropReason::TtlExpired => "ttl_expired",
        }
    }
}

/// Control payloads a protocol asks the network to transmit.
#[derive(Debug, Clone, PartialEq)]
pub enum Control {
    Rreq(RreqMessage),
    Rrep(RrepMessage),
    Rerr(RerrMessage),
    Dsdv(DsdvUpdate),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RouteTimer {
    /// AODV: no RREP arrived within the wait window for this discovery attempt.
    RrepWait { dest: NodeId, attempt: u32 },
    /// DSDV: periodic full dump.
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outbound {
    Broadcast { msg: Control, jitter: bool },
    Unicast { to: NodeId, msg: Control },
    Forward { pkt: Packet, next_hop: NodeId },
    Drop { pkt: Packet, reason: DropReason },
    Timer { at: SimTime, timer: RouteTimer },
    Log(RouteEvent),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteEventKind {
    Discover,
    Install,
    Expire,
    Rerr,
    Fail,
    Break,
}

impl RouteEventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RouteEventKind::Discover => "discover",
            RouteEventKind::Install => "install",
            RouteEventKind::Expire => "expire",
            RouteEventKind::Rerr => "rerr",
            RouteEventKind::Fail => "fail",
            RouteEventKind::Break => "break",
        }
    }
}

/// One row of the route-event log.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteEvent {
    pub time: SimTime,
    pub node: NodeId,
    pub kind: RouteEventKind,
    pub dest: NodeId,
    /// `None` for unreachable destinations.
    pub hop_count: Option<u32>,
}

impl fmt::Display for RouteEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{},", self.time.fmt_decimals(9), self.node, self.kind.as_str(), self.dest)?;
        if let Some(h) = self.hop_count {
            write!(f, "{h}")?;
        }
        Ok(())
    }
}

pub const ROUTE_EVENT_HEADER: &str = "time,node,event,dest,hop_count";
