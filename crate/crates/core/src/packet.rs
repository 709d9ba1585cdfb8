use std::fmt;

use crate::aodv::{RerrMessage, RrepMessage, RreqMessage};
use crate::dsdv::DsdvUpdate;
use crate::sim::SimTime;
use crate::NodeId;

/// Destination address of link-local broadcasts.
pub const BROADCAST: NodeId = NodeId::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PacketKind {
    Data,
    Rreq,
    Rrep,
    Rerr,
    DsdvUpdate,
}

impl PacketKind {
    pub const ALL: [PacketKind; 5] =
        [PacketKind::Data, PacketKind::Rreq, PacketKind::Rrep, PacketKind::Rerr, PacketKind::DsdvUpdate];

    pub fn as_str(self) -> &'static str {
        match self {
            PacketKind::Data => "DATA",
            PacketKind::Rreq => "RREQ",
            PacketKind::Rrep => "RREP",
            PacketKind::Rerr => "RERR",
            PacketKind::DsdvUpdate => "DSDV_UPDATE",
        }
    }
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Data { frame_id: u32, segment_index: u32 },
    Rreq(RreqMessage),
    Rrep(RrepMessage),
    Rerr(RerrMessage),
    Dsdv(DsdvUpdate),
}

/// A network-layer packet. `next_hop == None` means link-layer broadcast.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub uid: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub prev_hop: NodeId,
    pub next_hop: Option<NodeId>,
    /// Bytes on air, excluding the fixed per-frame MAC/PHY overhead.
    pub size: u32,
    pub ttl: u8,
    pub sent_at: SimTime,
    pub body: Body,
}

impl Packet {
    pub fn kind(&self) -> PacketKind {
        match self.body {
            Body::Data { .. } => PacketKind::Data,
            Body::Rreq(_) => PacketKind::Rreq,
            Body::Rrep(_) => PacketKind::Rrep,
            Body::Rerr(_) => PacketKind::Rerr,
            Body::Dsdv(_) => PacketKind::DsdvUpdate,
        }
    }

    pub fn is_broadcast(&self) -> bool {
        self.next_hop.is_none()
    }

    pub fn segment(&self) -> Option<(u32, u32)> {
        match self.body {
            Body::Data { frame_id, segment_index } => Some((frame_id, segment_index)),
            _ => None,
        }
    }
}
