//! Per-run wiring: node state, the MAC event machine, CBR traffic
//! injection, routing-agent dispatch and the wired forwarding plane.
//!
//! A run is strictly single-threaded: one event at a time mutates the
//! world. Every random draw comes from a labelled stream, so identical
//! (config, seed) pairs replay identically.

use std::collections::BTreeMap;

use crate::dsdv::DsdvAgent;
use crate::dsr::{BreakDisposition, DsrAgent, RetryOutcome, RreqOutcome, SendOutcome};
use crate::engine::{Engine, SimTime, Streams};
use crate::harness::{ConfigError, Protocol, RunConfig};
use crate::hybrid::{classify, Domain, WiredTopology};
use crate::ids::NodeId;
use crate::metrics::{DropReason, HopClass, RunReport, Trace, TraceKind};
use crate::netstack::{
    neighbors, EnqueueOutcome, Frame, InterfaceQueue, Packet, PacketBody, DATA_TTL,
};
use crate::scenario::{self, MovementScript, Position, TrafficScript};

#[derive(Debug)]
pub enum SimEvent {
    CbrSend { flow: usize },
    MacDone { node: NodeId },
    /// Carrier-sense recheck after deferring to a busy neighborhood.
    MacDeferred { node: NodeId },
    RxWireless { node: NodeId, pkt: Packet },
    RxWired { node: NodeId, pkt: Packet },
    DsdvPeriodic { node: NodeId },
    DsdvFlush { node: NodeId },
    DsrSweep { node: NodeId },
    DsrRetry { node: NodeId, target: NodeId },
}

enum Agent {
    Dsdv(DsdvAgent),
    Dsr(DsrAgent),
}

struct CurrentTx {
    frame: Frame,
    attempt: u32,
    will_deliver: bool,
}

struct Node {
    iface: InterfaceQueue,
    tx: Option<CurrentTx>,
    agent: Agent,
    /// End of this node's current transmission window; neighbors defer
    /// their own transmissions until then (sender-side carrier sense).
    tx_busy_until: SimTime,
    /// Receiver occupancy horizon for the busy-receiver collision toggle.
    rx_busy_until: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkBreakRecord {
    pub at: SimTime,
    pub node: NodeId,
    pub lost_neighbor: NodeId,
    pub attempts: u32,
    pub pkt_uid: u64,
}

struct Flow {
    source: NodeId,
    dest: NodeId,
    start: SimTime,
    stop: SimTime,
    period: SimTime,
    size: u32,
}

pub struct Sim {
    cfg: RunConfig,
    duration: SimTime,
    engine: Engine<SimEvent>,
    streams: Streams,
    movement: MovementScript,
    traffic: TrafficScript,
    wired: WiredTopology,
    nodes: BTreeMap<NodeId, Node>,
    flows: Vec<Flow>,
    trace: Trace,
    next_uid: u64,
    link_breaks: Vec<LinkBreakRecord>,
    started: bool,
}

impl Sim {
    pub fn new(cfg: RunConfig) -> Result<Sim, ConfigError> {
        cfg.validate()?;
        let mut streams = Streams::new(cfg.seed);
        let duration = SimTime::from_secs_f64(cfg.duration);

        let mut mobility = cfg.mobility.clone();
        mobility.duration = cfg.duration;
        let movement = match &cfg.movement_script {
            Some(s) => {
                for k in 0..mobility.node_count {
                    if !s.initial.contains_key(&NodeId::Wireless(k)) {
                        return Err(ConfigError::new(
                            "movement_script",
                            format!("missing node w{k}"),
                        ));
                    }
                }
                s.clone()
            }
            None => scenario::generate_movement(&mobility, streams.stream("mobility"))
                .map_err(|e| ConfigError::new("mobility", e.to_string()))?,
        };

        let mut traffic_params = cfg.traffic.clone();
        traffic_params.duration = cfg.duration;
        let wireless_ids: Vec<NodeId> = (0..mobility.node_count).map(NodeId::Wireless).collect();
        let wired_ids: Vec<NodeId> = (0..cfg.wired_node_count).map(NodeId::Wired).collect();
        let traffic = match &cfg.traffic_script {
            Some(s) => s.clone(),
            None => {
                scenario::generate_traffic(
                    &traffic_params,
                    &wireless_ids,
                    &wired_ids,
                    streams.stream("traffic"),
                )
                .map_err(|e| ConfigError::new("traffic", e.to_string()))?
            }
        };

        let wired = WiredTopology::new(cfg.wired.clone())
            .map_err(|e| ConfigError::new("wired", e.to_string()))?;

        for (i, c) in traffic.connections.iter().enumerate() {
            let known = |id: NodeId| match id {
                NodeId::Wireless(k) => k < mobility.node_count,
                NodeId::BaseStation => true,
                _ => wired.contains(id),
            };
            if !known(c.source) || !known(c.dest) {
                return Err(ConfigError::new(
                    "traffic",
                    format!("connection {i} references an unknown node"),
                ));
            }
        }

        let mut nodes = BTreeMap::new();
        let mut plane_ids = wireless_ids.clone();
        plane_ids.push(NodeId::BaseStation);
        for id in &plane_ids {
            let agent = match cfg.protocol {
                Protocol::Dsdv => Agent::Dsdv(DsdvAgent::new(*id, cfg.dsdv.clone())),
                Protocol::Dsr => Agent::Dsr(DsrAgent::new(*id, cfg.dsr.clone())),
            };
            nodes.insert(
                *id,
                Node {
                    iface: InterfaceQueue::new(cfg.iface_queue_capacity),
                    tx: None,
                    agent,
                    tx_busy_until: SimTime::ZERO,
                    rx_busy_until: SimTime::ZERO,
                },
            );
        }

        let flows = traffic
            .connections
            .iter()
            .map(|c| Flow {
                source: c.source,
                dest: c.dest,
                start: SimTime::from_secs_f64(c.start),
                stop: SimTime::from_secs_f64(c.stop.min(cfg.duration)),
                period: SimTime::from_secs_f64(1.0 / c.rate).max(SimTime::from_micros(1)),
                size: c.size,
            })
            .collect();

        Ok(Sim {
            duration,
            engine: Engine::new(),
            streams,
            movement,
            traffic,
            wired,
            nodes,
            flows,
            trace: Trace::default(),
            next_uid: 0,
            link_breaks: Vec::new(),
            started: false,
            cfg,
        })
    }

    pub fn run(&mut self) -> RunReport {
        self.start();
        self.run_until(self.duration);
        self.report()
    }

    /// Schedule the initial events. Idempotent via the started flag.
    pub fn start(&mut self) {
        if !self.started {
            self.started = true;
            self.schedule_initial();
        }
    }

    /// Drive the run up to `t` (capped at the configured duration), leaving
    /// later events pending. Useful for mid-run state inspection.
    pub fn run_until(&mut self, t: SimTime) {
        self.start();
        let until = t.min(self.duration);
        while let Some((_, ev)) = self.engine.pop_due(until) {
            self.dispatch(ev);
        }
        self.engine.finish(until);
    }

    pub fn report(&self) -> RunReport {
        crate::metrics::run_report(&self.trace, SimTime::from_secs_f64(self.cfg.warmup_seconds))
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn movement(&self) -> &MovementScript {
        &self.movement
    }

    pub fn traffic(&self) -> &TrafficScript {
        &self.traffic
    }

    pub fn link_breaks(&self) -> &[LinkBreakRecord] {
        &self.link_breaks
    }

    pub fn dsdv_agent(&self, id: NodeId) -> Option<&DsdvAgent> {
        match &self.nodes.get(&id)?.agent {
            Agent::Dsdv(a) => Some(a),
            _ => None,
        }
    }

    pub fn dsr_agent(&self, id: NodeId) -> Option<&DsrAgent> {
        match &self.nodes.get(&id)?.agent {
            Agent::Dsr(a) => Some(a),
            _ => None,
        }
    }

    pub fn wireless_plane_ids(&self) -> Vec<NodeId> {
        self.nodes.keys().copied().collect()
    }

    pub fn queue_len(&self, id: NodeId) -> usize {
        self.nodes[&id].iface.len()
    }

    fn schedule_initial(&mut self) {
        for i in 0..self.flows.len() {
            let f = &self.flows[i];
            if f.start < f.stop {
                let at = f.start;
                self.engine
                    .schedule(at, SimEvent::CbrSend { flow: i })
                    .expect("start in future");
            }
        }
        if self.cfg.protocol == Protocol::Dsdv {
            let interval = self.cfg.dsdv.periodic_interval;
            let ids: Vec<NodeId> = self.nodes.keys().copied().collect();
            for id in ids {
                let phase = self.streams.stream("scenario").range(0.0, interval);
                self.engine
                    .schedule(
                        SimTime::from_secs_f64(phase),
                        SimEvent::DsdvPeriodic { node: id },
                    )
                    .expect("phase in future");
            }
        }
    }

    fn dispatch(&mut self, ev: SimEvent) {
        match ev {
            SimEvent::CbrSend { flow } => self.on_cbr(flow),
            SimEvent::MacDone { node } => self.on_mac_done(node),
            SimEvent::MacDeferred { node } => {
                if self.nodes[&node].tx.is_some() {
                    self.begin_attempt(node);
                }
            }
            SimEvent::RxWireless { node, pkt } => self.on_broadcast_rx(node, pkt),
            SimEvent::RxWired { node, pkt } => self.on_rx_wired(node, pkt),
            SimEvent::DsdvPeriodic { node } => self.on_dsdv_periodic(node),
            SimEvent::DsdvFlush { node } => self.on_dsdv_flush(node),
            SimEvent::DsrSweep { node } => self.on_dsr_sweep(node),
            SimEvent::DsrRetry { node, target } => self.on_dsr_retry(node, target),
        }
    }

    fn now(&self) -> SimTime {
        self.engine.now()
    }

    fn alloc_uid(&mut self) -> u64 {
        let uid = self.next_uid;
        self.next_uid += 1;
        uid
    }

    /// Position of a wireless-plane node at time `t`.
    fn position_of(&self, id: NodeId, t: SimTime) -> Position {
        match id {
            NodeId::BaseStation => self.cfg.base_station_position,
            _ => scenario::position_at(&self.movement, id, t.as_secs_f64())
                .expect("wireless node has a movement entry"),
        }
    }

    pub fn position(&self, id: NodeId, t: SimTime) -> Option<Position> {
        match id {
            NodeId::BaseStation => Some(self.cfg.base_station_position),
            NodeId::Wireless(_) => {
                scenario::position_at(&self.movement, id, t.as_secs_f64()).ok()
            }
            _ => None,
        }
    }

    fn plane_positions(&self, t: SimTime) -> BTreeMap<NodeId, Position> {
        self.nodes
            .keys()
            .map(|id| (*id, self.position_of(*id, t)))
            .collect()
    }

    fn in_range(&self, a: NodeId, b: NodeId, t: SimTime) -> bool {
        let pa = self.position_of(a, t);
        let pb = self.position_of(b, t);
        pa.distance(&pb) <= self.cfg.link.tx_range
    }

    /// Wireless-plane routing target: wired destinations route toward the
    /// gateway, wireless ones toward themselves.
    fn plane_target(&self, final_dest: NodeId) -> NodeId {
        match classify(final_dest) {
            Domain::Wired => NodeId::BaseStation,
            Domain::Wireless => final_dest,
        }
    }

    fn mark_sent(&mut self, pkt: &mut Packet, node: NodeId) {
        if !pkt.sent_logged {
            pkt.sent_logged = true;
            self.trace.push(self.now(), TraceKind::Sent, pkt.uid, node);
        }
    }

    fn drop_data(&mut self, node: NodeId, pkt: &Packet, reason: DropReason) {
        if pkt.kind() == crate::netstack::PacketKind::Data {
            self.trace
                .push(self.now(), TraceKind::Dropped(reason), pkt.uid, node);
        }
    }

    // ------------------------------------------------------------------
    // Traffic injection
    // ------------------------------------------------------------------

    fn on_cbr(&mut self, flow_idx: usize) {
        let now = self.now();
        let (source, dest, size, next, stop) = {
            let f = &self.flows[flow_idx];
            (f.source, f.dest, f.size, now + f.period, f.stop)
        };
        let uid = self.alloc_uid();
        let pkt = Packet {
            uid,
            origin: source,
            final_dest: dest,
            payload_size: size,
            created_at: now,
            hop_count_traversed: 0,
            source_route: None,
            route_cursor: 0,
            salvaged: false,
            ttl: DATA_TTL,
            sent_logged: false,
            body: PacketBody::Data,
        };
        self.trace.push(now, TraceKind::Generated, uid, source);
        if source.on_wireless_plane() {
            self.agent_originate(source, pkt);
        } else {
            let mut pkt = pkt;
            self.mark_sent(&mut pkt, source);
            self.wired_forward(source, pkt);
        }
        if next < stop {
            self.engine
                .schedule(next, SimEvent::CbrSend { flow: flow_idx })
                .expect("future tick");
        }
    }

    /// Hand a fresh data packet to the node's routing agent.
    fn agent_originate(&mut self, node: NodeId, mut pkt: Packet) {
        let now = self.now();
        if classify(pkt.final_dest) == Domain::Wired && node == NodeId::BaseStation {
            // Gateway-originated traffic toward the wired side skips the
            // radio entirely.
            self.mark_sent(&mut pkt, node);
            self.gateway_to_wired(pkt);
            return;
        }
        let target = self.plane_target(pkt.final_dest);
        debug_assert_ne!(target, node);
        enum Routed {
            DsdvHop(Option<NodeId>),
            Dsr(SendOutcome),
        }
        let routed = match &mut self.nodes.get_mut(&node).expect("node").agent {
            Agent::Dsdv(agent) => Routed::DsdvHop(agent.next_hop(target)),
            Agent::Dsr(agent) => Routed::Dsr(agent.send(pkt.clone(), target, now)),
        };
        match routed {
            Routed::DsdvHop(Some(nh)) => {
                self.mark_sent(&mut pkt, node);
                self.enqueue_or_drop(
                    node,
                    Frame {
                        pkt,
                        mac_dest: Some(nh),
                    },
                );
            }
            Routed::DsdvHop(None) => self.drop_data(node, &pkt, DropReason::NoRoute),
            Routed::Dsr(SendOutcome::SentWithRoute(mut pkt)) => {
                let next = pkt.source_route.as_ref().expect("route")[1];
                self.mark_sent(&mut pkt, node);
                self.enqueue_or_drop(
                    node,
                    Frame {
                        pkt,
                        mac_dest: Some(next),
                    },
                );
            }
            Routed::Dsr(SendOutcome::BufferedAndDiscovering { start_discovery }) => {
                self.ensure_sweep(node);
                if start_discovery {
                    self.start_discovery(node, target);
                }
            }
            Routed::Dsr(SendOutcome::DroppedBufferFull(pkt)) => {
                self.drop_data(node, &pkt, DropReason::BufferFull)
            }
        }
    }

    // ------------------------------------------------------------------
    // MAC machine
    // ------------------------------------------------------------------

    /// Queue a frame for transmission, tracing any drop of a data packet
    /// (the arriving frame or an evicted queue victim).
    fn enqueue_or_drop(&mut self, node: NodeId, frame: Frame) {
        let is_data = !frame.pkt.is_control();
        let uid = frame.pkt.uid;
        let outcome = self
            .nodes
            .get_mut(&node)
            .expect("node")
            .iface
            .enqueue(frame);
        match outcome {
            EnqueueOutcome::Accepted => {}
            EnqueueOutcome::AcceptedEvictingData(victim) => {
                self.drop_data(node, &victim.pkt, DropReason::QueueFull);
            }
            EnqueueOutcome::DroppedQueueFull => {
                if is_data {
                    self.trace.push(
                        self.now(),
                        TraceKind::Dropped(DropReason::QueueFull),
                        uid,
                        node,
                    );
                }
            }
        }
        self.try_start_tx(node);
    }

    fn try_start_tx(&mut self, node: NodeId) {
        {
            let n = self.nodes.get_mut(&node).expect("node");
            if n.tx.is_some() {
                return;
            }
            let Some(frame) = n.iface.pop() else { return };
            n.tx = Some(CurrentTx {
                frame,
                attempt: 0,
                will_deliver: false,
            });
        }
        self.begin_attempt(node);
    }

    /// Latest time a current neighbor's transmission window runs to.
    fn channel_clear_at(&self, node: NodeId, now: SimTime) -> SimTime {
        let own_pos = self.position_of(node, now);
        let mut clear = now;
        for (id, n) in &self.nodes {
            if *id == node || n.tx_busy_until <= now {
                continue;
            }
            if own_pos.distance(&self.position_of(*id, now)) <= self.cfg.link.tx_range {
                clear = clear.max(n.tx_busy_until);
            }
        }
        clear
    }

    fn begin_attempt(&mut self, node: NodeId) {
        let now = self.now();
        // Sender-side carrier sense: hold off while a neighbor transmits.
        let clear_at = self.channel_clear_at(node, now);
        if clear_at > now {
            self.engine
                .schedule(clear_at, SimEvent::MacDeferred { node })
                .expect("future");
            return;
        }
        let (pkt, mac_dest, attempt) = {
            let tx = self.nodes[&node].tx.as_ref().expect("tx in flight");
            (tx.frame.pkt.clone(), tx.frame.mac_dest, tx.attempt)
        };
        let airtime = self.cfg.link.airtime(pkt.wire_size(&self.cfg.link));
        let hop_class = if pkt.is_control() {
            HopClass::RoutingControl
        } else {
            HopClass::Data
        };
        match mac_dest {
            None => {
                // Broadcast: one transmission, per-receiver jittered copies,
                // no acknowledgment.
                self.trace
                    .push(now, TraceKind::HopTx(hop_class), pkt.uid, node);
                let positions = self.plane_positions(now);
                let nbrs =
                    neighbors(&positions, node, self.cfg.link.tx_range).expect("node has position");
                let jitter_max = self.cfg.link.broadcast_jitter_max;
                for r in nbrs {
                    let jitter =
                        SimTime::from_secs_f64(self.streams.stream("mac-jitter").range(0.0, jitter_max));
                    self.engine
                        .schedule(
                            now + airtime + jitter,
                            SimEvent::RxWireless {
                                node: r,
                                pkt: pkt.clone(),
                            },
                        )
                        .expect("future");
                }
                self.nodes.get_mut(&node).expect("node").tx_busy_until = now + airtime;
                self.engine
                    .schedule(now + airtime, SimEvent::MacDone { node })
                    .expect("future");
            }
            Some(dest) => {
                // Unicast: success decided by range at the attempt start;
                // the attempt occupies airtime plus a backoff jitter whose
                // window doubles per retry (capped), 802.11-style.
                if attempt == 0 {
                    self.trace
                        .push(now, TraceKind::HopTx(hop_class), pkt.uid, node);
                }
                let base = self.cfg.link.broadcast_jitter_max;
                let window = (base * 2f64.powi(attempt as i32)).min(base * 16.0);
                let jitter = SimTime::from_secs_f64(
                    self.streams.stream("mac-jitter").range(0.0, window),
                );
                let in_range = self.in_range(node, dest, now);
                {
                    let n = self.nodes.get_mut(&node).expect("node");
                    n.tx.as_mut().expect("tx").will_deliver = in_range;
                    // Neighbors sense the frame itself; the jitter tail is
                    // idle backoff and leaves the channel free.
                    n.tx_busy_until = now + airtime;
                }
                self.engine
                    .schedule(now + airtime + jitter, SimEvent::MacDone { node })
                    .expect("future");
            }
        }
    }

    fn on_mac_done(&mut self, node: NodeId) {
        let tx = self
            .nodes
            .get_mut(&node)
            .expect("node")
            .tx
            .take()
            .expect("tx in flight");
        match tx.frame.mac_dest {
            None => {
                self.try_start_tx(node);
            }
            Some(dest) => {
                if tx.will_deliver {
                    self.try_start_tx(node);
                    self.rx_wireless(dest, tx.frame.pkt);
                } else if tx.attempt < self.cfg.link.max_unicast_retries {
                    self.nodes.get_mut(&node).expect("node").tx = Some(CurrentTx {
                        frame: tx.frame,
                        attempt: tx.attempt + 1,
                        will_deliver: false,
                    });
                    self.begin_attempt(node);
                } else {
                    let attempts = tx.attempt + 1;
                    self.link_breaks.push(LinkBreakRecord {
                        at: self.now(),
                        node,
                        lost_neighbor: dest,
                        attempts,
                        pkt_uid: tx.frame.pkt.uid,
                    });
                    self.try_start_tx(node);
                    self.handle_link_break(node, dest, tx.frame.pkt);
                }
            }
        }
    }

    fn handle_link_break(&mut self, node: NodeId, lost: NodeId, pkt: Packet) {
        let now = self.now();
        enum Broke {
            Dsdv { trigger: bool },
            Dsr(crate::dsr::LinkBreakOutcome),
        }
        let broke = match &mut self.nodes.get_mut(&node).expect("node").agent {
            Agent::Dsdv(agent) => Broke::Dsdv {
                trigger: agent.on_link_break(lost, now),
            },
            Agent::Dsr(agent) => Broke::Dsr(agent.on_link_break(pkt.clone(), lost, now)),
        };
        match broke {
            Broke::Dsdv { trigger } => {
                if trigger {
                    self.request_flush(node);
                }
                self.drop_data(node, &pkt, DropReason::LinkBreakExhausted);
            }
            Broke::Dsr(out) => {
                if let Some((rerr, transport)) = out.rerr {
                    if transport.len() >= 2 {
                        let uid = self.alloc_uid();
                        let next = transport[1];
                        let final_dest = *transport.last().expect("nonempty");
                        let rerr_pkt = Packet {
                            uid,
                            origin: node,
                            final_dest,
                            payload_size: 0,
                            created_at: now,
                            hop_count_traversed: 0,
                            source_route: Some(transport),
                            route_cursor: 0,
                            salvaged: false,
                            ttl: DATA_TTL,
                            sent_logged: true,
                            body: PacketBody::RouteError(rerr),
                        };
                        self.enqueue_or_drop(
                            node,
                            Frame {
                                pkt: rerr_pkt,
                                mac_dest: Some(next),
                            },
                        );
                    }
                }
                match out.disposition {
                    BreakDisposition::Salvaged(pkt) => {
                        let next = pkt.source_route.as_ref().expect("route")[1];
                        self.enqueue_or_drop(
                            node,
                            Frame {
                                pkt,
                                mac_dest: Some(next),
                            },
                        );
                    }
                    BreakDisposition::Dropped(pkt) => {
                        self.drop_data(node, &pkt, DropReason::LinkBreakExhausted);
                    }
                    BreakDisposition::BufferedForRediscovery {
                        target,
                        start_discovery,
                    } => {
                        self.ensure_sweep(node);
                        if start_discovery {
                            self.start_discovery(node, target);
                        }
                    }
                    BreakDisposition::BufferOverflow(pkt) => {
                        self.drop_data(node, &pkt, DropReason::BufferFull);
                    }
                }
            }
        }
    }

    // ------------------------------------------------------------------
    // Reception paths
    // ------------------------------------------------------------------

    /// Broadcast reception event (unicast deliveries are handled inline at
    /// MacDone). Applies the optional busy-receiver collision rule.
    fn on_broadcast_rx(&mut self, node: NodeId, pkt: Packet) {
        let now = self.now();
        if self.cfg.link.busy_receiver_collisions {
            let airtime = self.cfg.link.airtime(pkt.wire_size(&self.cfg.link));
            let n = self.nodes.get_mut(&node).expect("node");
            if now < n.rx_busy_until {
                // Overlapping frame lost. Broadcasts carry control only.
                return;
            }
            n.rx_busy_until = now + airtime;
        }
        self.rx_wireless(node, pkt);
    }

    fn rx_wireless(&mut self, node: NodeId, pkt: Packet) {
        match &pkt.body {
            PacketBody::DsdvUpdate(_) => self.on_dsdv_update_rx(node, pkt),
            PacketBody::RouteRequest(_) => self.on_rreq_rx(node, pkt),
            _ => {
                if pkt.source_route.is_some() {
                    self.transport_rx(node, pkt);
                } else {
                    self.dsdv_data_rx(node, pkt);
                }
            }
        }
    }

    /// Source-routed packet (DSR data, ROUTE REPLY, ROUTE ERROR) arriving
    /// at the next hop on its route.
    fn transport_rx(&mut self, node: NodeId, mut pkt: Packet) {
        let now = self.now();
        pkt.route_cursor += 1;
        let route = pkt.source_route.clone().expect("source-routed");
        debug_assert_eq!(route.get(pkt.route_cursor), Some(&node));

        if pkt.kind() == crate::netstack::PacketKind::Data {
            pkt.hop_count_traversed += 1;
            if pkt.ttl == 0 {
                self.drop_data(node, &pkt, DropReason::TtlExceeded);
                return;
            }
            pkt.ttl -= 1;
        }
        // ROUTE ERROR purges stale links at every node it visits.
        if let PacketBody::RouteError(rerr) = &pkt.body {
            if let Agent::Dsr(agent) = &mut self.nodes.get_mut(&node).expect("node").agent {
                agent.purge_link(rerr.broken_from, rerr.broken_to);
            }
        }

        if pkt.route_cursor + 1 == route.len() {
            // Transport endpoint reached.
            match pkt.body.clone() {
                PacketBody::Data => self.data_at_plane_target(node, pkt),
                PacketBody::RouteReply(rrep) => {
                    let drained = {
                        match &mut self.nodes.get_mut(&node).expect("node").agent {
                            Agent::Dsr(agent) => agent.handle_rrep(&rrep.route, now),
                            Agent::Dsdv(_) => Vec::new(),
                        }
                    };
                    for mut p in drained {
                        let next = p.source_route.as_ref().expect("route")[1];
                        self.mark_sent(&mut p, node);
                        self.enqueue_or_drop(
                            node,
                            Frame {
                                pkt: p,
                                mac_dest: Some(next),
                            },
                        );
                    }
                }
                PacketBody::RouteError(_) => {}
                _ => unreachable!("transport endpoint for non-transport body"),
            }
        } else {
            // Forward along the route, snoop-caching as we go.
            let next = {
                match &mut self.nodes.get_mut(&node).expect("node").agent {
                    Agent::Dsr(agent) => match agent.forward_on_route(&pkt, now) {
                        Ok(next) => next,
                        Err(_) => {
                            self.drop_data(node, &pkt, DropReason::NoRoute);
                            return;
                        }
                    },
                    Agent::Dsdv(_) => route[pkt.route_cursor + 1],
                }
            };
            self.enqueue_or_drop(
                node,
                Frame {
                    pkt,
                    mac_dest: Some(next),
                },
            );
        }
    }

    /// Data packet reached its wireless-plane target: final delivery or
    /// gateway handoff.
    fn data_at_plane_target(&mut self, node: NodeId, mut pkt: Packet) {
        if node == pkt.final_dest {
            self.trace
                .push(self.now(), TraceKind::Delivered, pkt.uid, node);
        } else if node == NodeId::BaseStation && classify(pkt.final_dest) == Domain::Wired {
            pkt.source_route = None;
            pkt.route_cursor = 0;
            self.gateway_to_wired(pkt);
        } else {
            debug_assert!(false, "plane target mismatch at {node}");
            self.drop_data(node, &pkt, DropReason::NoRoute);
        }
    }

    /// Hop-by-hop (DSDV) data reception.
    fn dsdv_data_rx(&mut self, node: NodeId, mut pkt: Packet) {
        pkt.hop_count_traversed += 1;
        if node == pkt.final_dest {
            self.trace
                .push(self.now(), TraceKind::Delivered, pkt.uid, node);
            return;
        }
        if node == NodeId::BaseStation && classify(pkt.final_dest) == Domain::Wired {
            self.gateway_to_wired(pkt);
            return;
        }
        if pkt.ttl == 0 {
            self.drop_data(node, &pkt, DropReason::TtlExceeded);
            return;
        }
        pkt.ttl -= 1;
        let target = self.plane_target(pkt.final_dest);
        let hop = match &self.nodes[&node].agent {
            Agent::Dsdv(agent) => agent.next_hop(target),
            Agent::Dsr(_) => unreachable!("hop-by-hop data under DSR"),
        };
        match hop {
            Some(nh) => self.enqueue_or_drop(
                node,
                Frame {
                    pkt,
                    mac_dest: Some(nh),
                },
            ),
            None => self.drop_data(node, &pkt, DropReason::NoRoute),
        }
    }

    fn on_rreq_rx(&mut self, node: NodeId, pkt: Packet) {
        let now = self.now();
        let PacketBody::RouteRequest(rreq) = &pkt.body else {
            unreachable!()
        };
        let outcome = match &mut self.nodes.get_mut(&node).expect("node").agent {
            Agent::Dsr(agent) => agent.handle_rreq(rreq, now),
            Agent::Dsdv(_) => return,
        };
        match outcome {
            RreqOutcome::Ignore => {}
            RreqOutcome::Reply {
                discovered,
                transport,
            } => {
                let uid = self.alloc_uid();
                let next = transport[1];
                let final_dest = *transport.last().expect("nonempty");
                let reply = Packet {
                    uid,
                    origin: node,
                    final_dest,
                    payload_size: 0,
                    created_at: now,
                    hop_count_traversed: 0,
                    source_route: Some(transport),
                    route_cursor: 0,
                    salvaged: false,
                    ttl: DATA_TTL,
                    sent_logged: true,
                    body: PacketBody::RouteReply(crate::dsr::RrepMsg { route: discovered }),
                };
                self.enqueue_or_drop(
                    node,
                    Frame {
                        pkt: reply,
                        mac_dest: Some(next),
                    },
                );
            }
            RreqOutcome::Forward(fwd) => {
                let uid = self.alloc_uid();
                let rebroadcast = Packet {
                    uid,
                    origin: fwd.origin,
                    final_dest: fwd.target,
                    payload_size: 0,
                    created_at: now,
                    hop_count_traversed: 0,
                    source_route: None,
                    route_cursor: 0,
                    salvaged: false,
                    ttl: DATA_TTL,
                    sent_logged: true,
                    body: PacketBody::RouteRequest(fwd),
                };
                self.enqueue_or_drop(
                    node,
                    Frame {
                        pkt: rebroadcast,
                        mac_dest: None,
                    },
                );
            }
        }
    }

    fn on_dsdv_update_rx(&mut self, node: NodeId, pkt: Packet) {
        let now = self.now();
        let PacketBody::DsdvUpdate(msg) = &pkt.body else {
            unreachable!()
        };
        let trigger = match &mut self.nodes.get_mut(&node).expect("node").agent {
            Agent::Dsdv(agent) => agent.handle_update(msg, now),
            Agent::Dsr(_) => false,
        };
        if trigger {
            self.request_flush(node);
        }
    }

    // ------------------------------------------------------------------
    // DSDV timers
    // ------------------------------------------------------------------

    fn on_dsdv_periodic(&mut self, node: NodeId) {
        let now = self.now();
        let msg = match &mut self.nodes.get_mut(&node).expect("node").agent {
            Agent::Dsdv(agent) => agent.periodic_advertise(now),
            Agent::Dsr(_) => return,
        };
        self.broadcast_dsdv(node, msg);
        let interval = SimTime::from_secs_f64(self.cfg.dsdv.periodic_interval);
        self.engine
            .schedule(now + interval, SimEvent::DsdvPeriodic { node })
            .expect("future");
    }

    fn request_flush(&mut self, node: NodeId) {
        let now = self.now();
        let at = match &mut self.nodes.get_mut(&node).expect("node").agent {
            Agent::Dsdv(agent) => {
                if agent.flush_scheduled {
                    return;
                }
                agent.flush_scheduled = true;
                agent.flush_time(now)
            }
            Agent::Dsr(_) => return,
        };
        self.engine
            .schedule(at, SimEvent::DsdvFlush { node })
            .expect("future");
    }

    fn on_dsdv_flush(&mut self, node: NodeId) {
        let now = self.now();
        let msg = match &mut self.nodes.get_mut(&node).expect("node").agent {
            Agent::Dsdv(agent) => agent.take_triggered(now),
            Agent::Dsr(_) => None,
        };
        if let Some(msg) = msg {
            self.broadcast_dsdv(node, msg);
        }
    }

    fn broadcast_dsdv(&mut self, node: NodeId, msg: crate::dsdv::DsdvUpdateMsg) {
        let uid = self.alloc_uid();
        let pkt = Packet {
            uid,
            origin: node,
            final_dest: node,
            payload_size: 0,
            created_at: self.now(),
            hop_count_traversed: 0,
            source_route: None,
            route_cursor: 0,
            salvaged: false,
            ttl: 1,
            sent_logged: true,
            body: PacketBody::DsdvUpdate(msg),
        };
        self.enqueue_or_drop(node, Frame { pkt, mac_dest: None });
    }

    // ------------------------------------------------------------------
    // DSR timers
    // ------------------------------------------------------------------

    fn ensure_sweep(&mut self, node: NodeId) {
        let interval = {
            match &mut self.nodes.get_mut(&node).expect("node").agent {
                Agent::Dsr(agent) => {
                    if agent.sweep_scheduled || agent.buffer_len() == 0 {
                        return;
                    }
                    agent.sweep_scheduled = true;
                    agent.cfg.sweep_interval
                }
                Agent::Dsdv(_) => return,
            }
        };
        self.engine
            .schedule_in(SimTime::from_secs_f64(interval), SimEvent::DsrSweep { node });
    }

    fn on_dsr_sweep(&mut self, node: NodeId) {
        let now = self.now();
        let (expired, remaining, interval) = {
            match &mut self.nodes.get_mut(&node).expect("node").agent {
                Agent::Dsr(agent) => {
                    let expired = agent.sweep(now);
                    agent.sweep_scheduled = false;
                    (expired, agent.buffer_len(), agent.cfg.sweep_interval)
                }
                Agent::Dsdv(_) => return,
            }
        };
        for pkt in &expired {
            self.drop_data(node, pkt, DropReason::BufferTimeout);
        }
        if remaining > 0 {
            if let Agent::Dsr(agent) = &mut self.nodes.get_mut(&node).expect("node").agent {
                agent.sweep_scheduled = true;
            }
            self.engine
                .schedule_in(SimTime::from_secs_f64(interval), SimEvent::DsrSweep { node });
        }
    }

    fn start_discovery(&mut self, node: NodeId, target: NodeId) {
        let (rreq, backoff) = match &mut self.nodes.get_mut(&node).expect("node").agent {
            Agent::Dsr(agent) => agent.initial_flood(target),
            Agent::Dsdv(_) => return,
        };
        self.flood(node, rreq);
        self.engine.schedule_in(
            SimTime::from_secs_f64(backoff),
            SimEvent::DsrRetry { node, target },
        );
    }

    fn flood(&mut self, node: NodeId, rreq: crate::dsr::RreqMsg) {
        let uid = self.alloc_uid();
        let pkt = Packet {
            uid,
            origin: rreq.origin,
            final_dest: rreq.target,
            payload_size: 0,
            created_at: self.now(),
            hop_count_traversed: 0,
            source_route: None,
            route_cursor: 0,
            salvaged: false,
            ttl: DATA_TTL,
            sent_logged: true,
            body: PacketBody::RouteRequest(rreq),
        };
        self.enqueue_or_drop(node, Frame { pkt, mac_dest: None });
    }

    fn on_dsr_retry(&mut self, node: NodeId, target: NodeId) {
        let now = self.now();
        let outcome = match &mut self.nodes.get_mut(&node).expect("node").agent {
            Agent::Dsr(agent) => agent.retry_tick(target, now),
            Agent::Dsdv(_) => return,
        };
        match outcome {
            RetryOutcome::Flood { rreq, backoff } => {
                self.flood(node, rreq);
                self.engine.schedule_in(
                    SimTime::from_secs_f64(backoff),
                    SimEvent::DsrRetry { node, target },
                );
            }
            RetryOutcome::Drain(pkts) => {
                for mut p in pkts {
                    let next = p.source_route.as_ref().expect("route")[1];
                    self.mark_sent(&mut p, node);
                    self.enqueue_or_drop(
                        node,
                        Frame {
                            pkt: p,
                            mac_dest: Some(next),
                        },
                    );
                }
            }
            RetryOutcome::Stop => {}
        }
    }

    // ------------------------------------------------------------------
    // Wired plane
    // ------------------------------------------------------------------

    fn gateway_to_wired(&mut self, pkt: Packet) {
        self.wired_forward(NodeId::BaseStation, pkt);
    }

    fn wired_forward(&mut self, at: NodeId, pkt: Packet) {
        let now = self.now();
        let routing_dest = match classify(pkt.final_dest) {
            Domain::Wired => pkt.final_dest,
            Domain::Wireless => NodeId::BaseStation,
        };
        let Some(next) = self.wired.next_hop(at, routing_dest) else {
            self.drop_data(at, &pkt, DropReason::NoRoute);
            return;
        };
        let size = pkt.payload_size + self.cfg.link.base_header_bytes;
        let delay = self
            .wired
            .hop_delay(at, next, size)
            .expect("precomputed next hop has a link");
        self.trace
            .push(now, TraceKind::HopTx(HopClass::Data), pkt.uid, at);
        self.engine
            .schedule(now + delay, SimEvent::RxWired { node: next, pkt })
            .expect("future");
    }

    fn on_rx_wired(&mut self, node: NodeId, mut pkt: Packet) {
        pkt.hop_count_traversed += 1;
        if node == pkt.final_dest {
            self.trace
                .push(self.now(), TraceKind::Delivered, pkt.uid, node);
            return;
        }
        if node == NodeId::BaseStation && classify(pkt.final_dest) == Domain::Wireless {
            // Wired-to-wireless handoff: the gateway's ad hoc agent takes
            // over (table lookup under DSDV, cache/discovery under DSR).
            self.agent_originate(node, pkt);
            return;
        }
        self.wired_forward(node, pkt);
    }
}
