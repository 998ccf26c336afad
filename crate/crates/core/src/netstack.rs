//! Per-node stack below routing: packets, the 50-slot priority interface
//! queue, the abstract contention MAC's link model, and unit-disk
//! connectivity.
//!
//! The MAC abstraction: per-packet airtime from the channel rate, a
//! uniform jitter draw standing in for carrier-sense backoff, per-hop
//! acknowledgment with bounded retransmission for unicast, jittered
//! unacknowledged delivery for broadcast. The event wiring lives in
//! [`crate::runtime`]; this module holds the types and pure rules.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::dsdv::DsdvUpdateMsg;
use crate::dsr::{RerrMsg, RreqMsg, RrepMsg};
use crate::engine::SimTime;
use crate::ids::{NodeId, UnknownNode};
use crate::scenario::Position;

pub const DSDV_ENTRY_WIRE_BYTES: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PacketKind {
    Data,
    RouteRequest,
    RouteReply,
    RouteError,
    DsdvUpdate,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PacketBody {
    Data,
    RouteRequest(RreqMsg),
    RouteReply(RrepMsg),
    RouteError(RerrMsg),
    DsdvUpdate(DsdvUpdateMsg),
}

/// A simulated protocol data unit, data or routing control.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub uid: u64,
    pub origin: NodeId,
    pub final_dest: NodeId,
    pub payload_size: u32,
    pub created_at: SimTime,
    pub hop_count_traversed: u32,
    /// Full hop list for source-routed packets (DSR data and the
    /// reverse-routed control packets). None under hop-by-hop forwarding.
    pub source_route: Option<Vec<NodeId>>,
    /// Index of the packet's current holder within `source_route`.
    pub route_cursor: usize,
    pub salvaged: bool,
    pub ttl: u32,
    pub sent_logged: bool,
    pub body: PacketBody,
}

pub const DATA_TTL: u32 = 32;

impl Packet {
    pub fn kind(&self) -> PacketKind {
        match self.body {
            PacketBody::Data => PacketKind::Data,
            PacketBody::RouteRequest(_) => PacketKind::RouteRequest,
            PacketBody::RouteReply(_) => PacketKind::RouteReply,
            PacketBody::RouteError(_) => PacketKind::RouteError,
            PacketBody::DsdvUpdate(_) => PacketKind::DsdvUpdate,
        }
    }

    pub fn is_control(&self) -> bool {
        self.kind() != PacketKind::Data
    }

    /// Header bytes: a fixed base plus 4 bytes per listed hop for source
    /// routes and route records, or 12 bytes per advertised entry for
    /// DSDV updates.
    pub fn header_size(&self, link: &LinkModel) -> u32 {
        let base = link.base_header_bytes;
        let per_hop = link.per_hop_header_bytes;
        let transport = self.source_route.as_ref().map_or(0, |r| r.len() as u32);
        match &self.body {
            PacketBody::Data => base + per_hop * transport,
            PacketBody::RouteRequest(rreq) => base + per_hop * rreq.route_record.len() as u32,
            PacketBody::RouteReply(rrep) => {
                base + per_hop * (transport + rrep.route.len() as u32)
            }
            PacketBody::RouteError(_) => base + per_hop * transport,
            PacketBody::DsdvUpdate(msg) => base + DSDV_ENTRY_WIRE_BYTES * msg.entries.len() as u32,
        }
    }

    pub fn wire_size(&self, link: &LinkModel) -> u32 {
        self.payload_size + self.header_size(link)
    }
}

/// Radio and MAC parameters. The numeric defaults are artifact decisions
/// standing in for a 2 Mbps WaveLAN-class radio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkModel {
    pub tx_range: f64,
    pub bandwidth_bps: f64,
    pub broadcast_jitter_max: f64,
    pub max_unicast_retries: u32,
    pub base_header_bytes: u32,
    pub per_hop_header_bytes: u32,
    /// Sensitivity toggle: a node receiving two temporally overlapping
    /// frames loses both. Off by default.
    pub busy_receiver_collisions: bool,
}

impl Default for LinkModel {
    fn default() -> Self {
        LinkModel {
            tx_range: 250.0,
            bandwidth_bps: 2_000_000.0,
            broadcast_jitter_max: 0.010,
            max_unicast_retries: 7,
            base_header_bytes: 20,
            per_hop_header_bytes: 4,
            busy_receiver_collisions: false,
        }
    }
}

impl LinkModel {
    pub fn validate(&self) -> Result<(), String> {
        if self.tx_range <= 0.0
            || self.bandwidth_bps <= 0.0
            || self.broadcast_jitter_max <= 0.0
            || self.base_header_bytes == 0
        {
            return Err("link model fields must be strictly positive".into());
        }
        Ok(())
    }

    /// Time on air for one frame of `bytes` total size.
    pub fn airtime(&self, bytes: u32) -> SimTime {
        SimTime::from_secs_f64(8.0 * bytes as f64 / self.bandwidth_bps)
    }
}

/// Wireless-plane nodes within transmission range of `node`, excluding
/// `node` itself. Symmetric and irreflexive by construction.
pub fn neighbors(
    positions: &BTreeMap<NodeId, Position>,
    node: NodeId,
    tx_range: f64,
) -> Result<BTreeSet<NodeId>, UnknownNode> {
    let own = positions
        .get(&node)
        .ok_or_else(|| UnknownNode(node.to_string()))?;
    Ok(positions
        .iter()
        .filter(|(id, pos)| **id != node && own.distance(pos) <= tx_range)
        .map(|(id, _)| *id)
        .collect())
}

/// One queued frame: the packet plus its MAC addressing (None = broadcast).
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub pkt: Packet,
    pub mac_dest: Option<NodeId>,
}

#[derive(Debug, PartialEq)]
pub enum EnqueueOutcome {
    Accepted,
    /// A control packet arrived at a full queue holding data: the newest
    /// data packet was evicted in its favor.
    AcceptedEvictingData(Frame),
    DroppedQueueFull,
}

/// The per-node transmit queue between routing and MAC: a bounded
/// priority queue where routing control rides ahead of data, FIFO within
/// each class.
#[derive(Debug)]
pub struct InterfaceQueue {
    capacity: usize,
    control: VecDeque<Frame>,
    data: VecDeque<Frame>,
}

impl Default for InterfaceQueue {
    fn default() -> Self {
        InterfaceQueue::new(50)
    }
}

impl InterfaceQueue {
    pub fn new(capacity: usize) -> InterfaceQueue {
        InterfaceQueue {
            capacity,
            control: VecDeque::new(),
            data: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.control.len() + self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn enqueue(&mut self, frame: Frame) -> EnqueueOutcome {
        let full = self.len() >= self.capacity;
        if frame.pkt.is_control() {
            if full {
                match self.data.pop_back() {
                    Some(victim) => {
                        self.control.push_back(frame);
                        EnqueueOutcome::AcceptedEvictingData(victim)
                    }
                    None => EnqueueOutcome::DroppedQueueFull,
                }
            } else {
                self.control.push_back(frame);
                EnqueueOutcome::Accepted
            }
        } else if full {
            EnqueueOutcome::DroppedQueueFull
        } else {
            self.data.push_back(frame);
            EnqueueOutcome::Accepted
        }
    }

    pub fn pop(&mut self) -> Option<Frame> {
        self.control.pop_front().or_else(|| self.data.pop_front())
    }

    /// Queued packets in service order, for assertions.
    pub fn iter(&self) -> impl Iterator<Item = &Frame> {
        self.control.iter().chain(self.data.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Streams;

    fn data_pkt(uid: u64) -> Packet {
        Packet {
            uid,
            origin: NodeId::Wireless(0),
            final_dest: NodeId::Wireless(1),
            payload_size: 512,
            created_at: SimTime::ZERO,
            hop_count_traversed: 0,
            source_route: None,
            route_cursor: 0,
            salvaged: false,
            ttl: DATA_TTL,
            sent_logged: false,
            body: PacketBody::Data,
        }
    }

    fn control_pkt(uid: u64) -> Packet {
        Packet {
            body: PacketBody::RouteRequest(RreqMsg {
                origin: NodeId::Wireless(0),
                target: NodeId::Wireless(1),
                request_id: 0,
                route_record: vec![NodeId::Wireless(0)],
            }),
            payload_size: 0,
            ..data_pkt(uid)
        }
    }

    fn frame(pkt: Packet) -> Frame {
        Frame {
            pkt,
            mac_dest: None,
        }
    }

    #[test]
    fn neighbors_boundary_inclusive() {
        let mut pos = BTreeMap::new();
        pos.insert(NodeId::Wireless(0), Position::new(0.0, 0.0));
        pos.insert(NodeId::Wireless(1), Position::new(250.0, 0.0));
        let n = neighbors(&pos, NodeId::Wireless(0), 250.0).unwrap();
        assert!(n.contains(&NodeId::Wireless(1)));

        pos.insert(NodeId::Wireless(1), Position::new(250.001, 0.0));
        let n = neighbors(&pos, NodeId::Wireless(0), 250.0).unwrap();
        assert!(n.is_empty());
    }

    /// Oracle: O(n^2) pairwise distance check.
    #[test]
    fn neighbor_relation_symmetric_irreflexive() {
        let mut streams = Streams::new(11);
        let s = streams.stream("positions");
        let mut pos = BTreeMap::new();
        for k in 0..50 {
            pos.insert(
                NodeId::Wireless(k),
                Position::new(s.range(0.0, 800.0), s.range(0.0, 500.0)),
            );
        }
        let ids: Vec<NodeId> = pos.keys().copied().collect();
        for &a in &ids {
            let na = neighbors(&pos, a, 250.0).unwrap();
            assert!(!na.contains(&a));
            for &b in &ids {
                if a == b {
                    continue;
                }
                let nb = neighbors(&pos, b, 250.0).unwrap();
                let direct = pos[&a].distance(&pos[&b]) <= 250.0;
                assert_eq!(na.contains(&b), direct);
                assert_eq!(na.contains(&b), nb.contains(&a), "symmetry for {a},{b}");
            }
        }
    }

    #[test]
    fn unknown_node_in_neighbors() {
        let pos = BTreeMap::new();
        assert!(neighbors(&pos, NodeId::Wireless(3), 250.0).is_err());
    }

    #[test]
    fn control_inserts_ahead_of_data() {
        let mut q = InterfaceQueue::new(50);
        q.enqueue(frame(data_pkt(1)));
        q.enqueue(frame(data_pkt(2)));
        q.enqueue(frame(control_pkt(3)));
        let order: Vec<u64> = q.iter().map(|f| f.pkt.uid).collect();
        assert_eq!(order, vec![3, 1, 2]);
    }

    #[test]
    fn full_queue_drops_arriving_data() {
        let mut q = InterfaceQueue::new(50);
        for i in 0..50 {
            assert_eq!(q.enqueue(frame(data_pkt(i))), EnqueueOutcome::Accepted);
        }
        assert_eq!(q.enqueue(frame(data_pkt(50))), EnqueueOutcome::DroppedQueueFull);
        assert_eq!(q.len(), 50);
    }

    /// Oracle: replay of the stated eviction rule — an arriving control
    /// packet evicts the newest data packet from a full queue.
    #[test]
    fn control_evicts_newest_data_when_full() {
        let mut q = InterfaceQueue::new(50);
        for i in 0..50 {
            q.enqueue(frame(data_pkt(i)));
        }
        match q.enqueue(frame(control_pkt(100))) {
            EnqueueOutcome::AcceptedEvictingData(victim) => assert_eq!(victim.pkt.uid, 49),
            other => panic!("expected eviction, got {other:?}"),
        }
        assert_eq!(q.len(), 50);
        assert_eq!(q.iter().next().unwrap().pkt.uid, 100);

        // All-control full queue rejects further control arrivals.
        let mut q = InterfaceQueue::new(4);
        for i in 0..4 {
            q.enqueue(frame(control_pkt(i)));
        }
        assert_eq!(q.enqueue(frame(control_pkt(9))), EnqueueOutcome::DroppedQueueFull);
    }

    #[test]
    fn priority_ordering_holds_after_mixed_ops() {
        let mut q = InterfaceQueue::new(10);
        for i in 0..4 {
            q.enqueue(frame(if i % 2 == 0 {
                data_pkt(i)
            } else {
                control_pkt(i)
            }));
        }
        q.pop();
        q.enqueue(frame(control_pkt(8)));
        let mut seen_data = false;
        for f in q.iter() {
            if f.pkt.is_control() {
                assert!(!seen_data, "control queued behind data");
            } else {
                seen_data = true;
            }
        }
        assert!(q.len() <= q.capacity());
    }

    #[test]
    fn airtime_matches_formula() {
        let link = LinkModel::default();
        // 532 bytes at 2 Mbps = 2128 us exactly.
        assert_eq!(link.airtime(532), SimTime::from_micros(2128));
    }
}
