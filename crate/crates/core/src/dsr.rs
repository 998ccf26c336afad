//! DSR routing agent: route cache, send buffer, route discovery
//! (ROUTE REQUEST flood / ROUTE REPLY), source-routed forwarding with
//! snoop caching, and route maintenance (ROUTE ERROR, salvage,
//! rediscovery).
//!
//! Links are modeled bidirectional, so replies always travel the reversed
//! route record. Cached routes never expire by time; they disappear only
//! through ROUTE ERROR purges or capacity eviction.

use std::collections::{BTreeMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::ids::NodeId;
use crate::netstack::Packet;

/// ROUTE REQUEST flood message. `(origin, request_id)` identifies one
/// discovery flood; the route record accumulates the traversed nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RreqMsg {
    pub origin: NodeId,
    pub target: NodeId,
    pub request_id: u64,
    pub route_record: Vec<NodeId>,
}

/// ROUTE REPLY payload: the discovered route from origin to target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RrepMsg {
    pub route: Vec<NodeId>,
}

/// ROUTE ERROR naming a broken directed link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RerrMsg {
    pub reporter: NodeId,
    pub broken_from: NodeId,
    pub broken_to: NodeId,
    pub original_sender: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheSource {
    Reply,
    Snooped,
    RouteRecord,
}

/// A cached source route from this node to the route's last element.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteCacheEntry {
    pub route: Vec<NodeId>,
    pub learned_at: SimTime,
    pub source: CacheSource,
    /// Insertion order, the eviction tie-break.
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DsrConfig {
    pub cache_capacity: usize,
    pub send_buffer_capacity: usize,
    /// Buffered packets older than this are dropped by the sweep, seconds.
    pub send_buffer_lifetime: f64,
    pub sweep_interval: f64,
    /// Discovery retry backoff: base * 2^attempt, capped.
    pub backoff_base: f64,
    pub backoff_cap: f64,
    /// Safety cap on route-record growth during floods.
    pub max_route_len: usize,
}

impl Default for DsrConfig {
    fn default() -> Self {
        DsrConfig {
            cache_capacity: 64,
            send_buffer_capacity: 64,
            send_buffer_lifetime: 30.0,
            sweep_interval: 1.0,
            backoff_base: 0.5,
            backoff_cap: 10.0,
            max_route_len: 16,
        }
    }
}

#[derive(Debug)]
pub struct BufferedPacket {
    pub pkt: Packet,
    /// Wireless-plane discovery target (the base station for wired
    /// destinations).
    pub target: NodeId,
    pub buffered_at: SimTime,
}

#[derive(Debug, PartialEq)]
pub enum SendOutcome {
    /// Cache hit: the packet now carries the full source route.
    SentWithRoute(Packet),
    /// Cache miss: packet buffered; `start_discovery` is true when no
    /// discovery for this target was already in flight.
    BufferedAndDiscovering { start_discovery: bool },
    /// Send buffer full: the incoming packet is the drop victim.
    DroppedBufferFull(Packet),
}

#[derive(Debug, PartialEq)]
pub enum RreqOutcome {
    Ignore,
    /// Answer the flood: `discovered` is the full origin-to-target route
    /// carried in the reply, `transport` the reversed path the reply
    /// travels on.
    Reply {
        discovered: Vec<NodeId>,
        transport: Vec<NodeId>,
    },
    /// Rebroadcast with this node appended to the record.
    Forward(RreqMsg),
}

#[derive(Debug, PartialEq)]
pub enum BreakDisposition {
    /// Alternate cached route substituted; forward the packet again.
    Salvaged(Packet),
    Dropped(Packet),
    /// This node originated the packet: it went back to the send buffer.
    BufferedForRediscovery {
        target: NodeId,
        start_discovery: bool,
    },
    /// Origin wanted to rebuffer but the buffer was full.
    BufferOverflow(Packet),
}

#[derive(Debug, PartialEq)]
pub struct LinkBreakOutcome {
    /// ROUTE ERROR to source-route back toward the packet's route origin,
    /// with its transport path. None when this node is that origin.
    pub rerr: Option<(RerrMsg, Vec<NodeId>)>,
    pub disposition: BreakDisposition,
}

#[derive(Debug, PartialEq)]
pub enum RetryOutcome {
    /// Re-flood with a fresh request id, then check back after `backoff`
    /// seconds.
    Flood { rreq: RreqMsg, backoff: f64 },
    /// A route appeared in the cache meanwhile: these buffered packets are
    /// ready to go.
    Drain(Vec<Packet>),
    /// Nothing left buffered for the target; discovery ends.
    Stop,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
#[error("node {node} is not on the packet's source route")]
pub struct MalformedRoute {
    pub node: NodeId,
}

#[derive(Debug)]
struct PendingDiscovery {
    attempt: u32,
}

#[derive(Debug)]
pub struct DsrAgent {
    me: NodeId,
    pub cfg: DsrConfig,
    cache: Vec<RouteCacheEntry>,
    insert_seq: u64,
    buffer: VecDeque<BufferedPacket>,
    seen_requests: HashSet<(NodeId, u64)>,
    next_request_id: u64,
    pending: BTreeMap<NodeId, PendingDiscovery>,
    pub sweep_scheduled: bool,
    /// Per-flood forward tally, for the no-duplicate-forward property.
    pub forward_counts: BTreeMap<(NodeId, u64), u32>,
}

impl DsrAgent {
    pub fn new(me: NodeId, cfg: DsrConfig) -> DsrAgent {
        DsrAgent {
            me,
            cfg,
            cache: Vec::new(),
            insert_seq: 0,
            buffer: VecDeque::new(),
            seen_requests: HashSet::new(),
            next_request_id: 0,
            pending: BTreeMap::new(),
            sweep_scheduled: false,
            forward_counts: BTreeMap::new(),
        }
    }

    pub fn me(&self) -> NodeId {
        self.me
    }

    pub fn cache(&self) -> &[RouteCacheEntry] {
        &self.cache
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn buffered_ages_ok(&self, now: SimTime, slack: f64) -> bool {
        let limit = SimTime::from_secs_f64(self.cfg.send_buffer_lifetime + slack);
        self.buffer
            .iter()
            .all(|b| now.saturating_sub(b.buffered_at) <= limit)
    }

    pub fn discovery_pending(&self, target: NodeId) -> bool {
        self.pending.contains_key(&target)
    }

    /// Insert a route (starting at this node) into the cache. Duplicates
    /// refresh in place; a full cache evicts its oldest entry.
    pub fn cache_insert(&mut self, route: Vec<NodeId>, source: CacheSource, now: SimTime) {
        if route.len() < 2 || route[0] != self.me {
            return;
        }
        let mut seen = HashSet::new();
        if !route.iter().all(|n| seen.insert(*n)) {
            debug_assert!(false, "route with repeated nodes: {route:?}");
            return;
        }
        if let Some(existing) = self.cache.iter_mut().find(|e| e.route == route) {
            existing.learned_at = now;
            return;
        }
        if self.cache.len() >= self.cfg.cache_capacity {
            let oldest = self
                .cache
                .iter()
                .enumerate()
                .min_by_key(|(_, e)| (e.learned_at, e.seq))
                .map(|(i, _)| i)
                .expect("cache nonempty");
            self.cache.remove(oldest);
        }
        self.insert_seq += 1;
        self.cache.push(RouteCacheEntry {
            route,
            learned_at: now,
            source,
            seq: self.insert_seq,
        });
    }

    /// Shortest cached route to `dest` (an entry prefix counts), ties
    /// broken toward the oldest entry.
    pub fn find_route(&self, dest: NodeId) -> Option<Vec<NodeId>> {
        let mut best: Option<(usize, u64, &RouteCacheEntry, usize)> = None;
        for e in &self.cache {
            if let Some(idx) = e.route.iter().position(|&n| n == dest) {
                if idx == 0 {
                    continue;
                }
                let key = (idx, e.seq);
                if best.map_or(true, |(len, seq, _, _)| key < (len, seq)) {
                    best = Some((idx, e.seq, e, idx));
                }
            }
        }
        best.map(|(_, _, e, idx)| e.route[..=idx].to_vec())
    }

    /// Remove every cache entry containing the directed link `from -> to`.
    /// Returns the number of purged entries.
    pub fn purge_link(&mut self, from: NodeId, to: NodeId) -> usize {
        let before = self.cache.len();
        self.cache.retain(|e| {
            !e.route
                .windows(2)
                .any(|w| w[0] == from && w[1] == to)
        });
        before - self.cache.len()
    }

    fn backoff(&self, attempt: u32) -> f64 {
        (self.cfg.backoff_base * 2f64.powi(attempt as i32)).min(self.cfg.backoff_cap)
    }

    /// Fresh ROUTE REQUEST for `target`, record seeded with this node.
    fn new_request(&mut self, target: NodeId) -> RreqMsg {
        let request_id = self.next_request_id;
        self.next_request_id += 1;
        RreqMsg {
            origin: self.me,
            target,
            request_id,
            route_record: vec![self.me],
        }
    }

    /// Originate a data packet toward the wireless-plane `target`.
    pub fn send(&mut self, mut pkt: Packet, target: NodeId, now: SimTime) -> SendOutcome {
        debug_assert_ne!(target, self.me);
        if let Some(route) = self.find_route(target) {
            pkt.source_route = Some(route);
            pkt.route_cursor = 0;
            return SendOutcome::SentWithRoute(pkt);
        }
        if self.buffer.len() >= self.cfg.send_buffer_capacity {
            return SendOutcome::DroppedBufferFull(pkt);
        }
        self.buffer.push_back(BufferedPacket {
            pkt,
            target,
            buffered_at: now,
        });
        let start_discovery = !self.pending.contains_key(&target);
        if start_discovery {
            self.pending.insert(target, PendingDiscovery { attempt: 0 });
        }
        SendOutcome::BufferedAndDiscovering { start_discovery }
    }

    /// First flood for a discovery started by [`DsrAgent::send`]. Returns
    /// the request plus the backoff (seconds) until the first retry check.
    pub fn initial_flood(&mut self, target: NodeId) -> (RreqMsg, f64) {
        let rreq = self.new_request(target);
        let backoff = self.backoff(0);
        (rreq, backoff)
    }

    /// Process a received ROUTE REQUEST broadcast.
    pub fn handle_rreq(&mut self, rreq: &RreqMsg, now: SimTime) -> RreqOutcome {
        if rreq.route_record.contains(&self.me) {
            return RreqOutcome::Ignore;
        }
        if !self.seen_requests.insert((rreq.origin, rreq.request_id)) {
            return RreqOutcome::Ignore;
        }
        // Bidirectional links: the first-heard copy's record yields a
        // cached reverse route toward the flood origin.
        if !rreq.route_record.is_empty() {
            let mut reverse = Vec::with_capacity(rreq.route_record.len() + 1);
            reverse.push(self.me);
            reverse.extend(rreq.route_record.iter().rev());
            self.cache_insert(reverse, CacheSource::RouteRecord, now);
        }
        let mut transport: Vec<NodeId> = Vec::with_capacity(rreq.route_record.len() + 1);
        transport.push(self.me);
        transport.extend(rreq.route_record.iter().rev());
        if self.me == rreq.target {
            let mut discovered = rreq.route_record.clone();
            discovered.push(self.me);
            return RreqOutcome::Reply {
                discovered,
                transport,
            };
        }
        if let Some(cached) = self.find_route(rreq.target) {
            // Duplicate-node check: the cached suffix must be disjoint
            // from the record (this node is already known disjoint).
            if cached[1..].iter().all(|n| !rreq.route_record.contains(n)) {
                let mut discovered = rreq.route_record.clone();
                discovered.extend(cached.iter());
                return RreqOutcome::Reply {
                    discovered,
                    transport,
                };
            }
        }
        if rreq.route_record.len() < self.cfg.max_route_len {
            *self
                .forward_counts
                .entry((rreq.origin, rreq.request_id))
                .or_insert(0) += 1;
            let mut fwd = rreq.clone();
            fwd.route_record.push(self.me);
            RreqOutcome::Forward(fwd)
        } else {
            RreqOutcome::Ignore
        }
    }

    /// A ROUTE REPLY reached this discovery origin: cache the route and
    /// drain every buffered packet whose target is now routable.
    pub fn handle_rrep(&mut self, route: &[NodeId], now: SimTime) -> Vec<Packet> {
        self.cache_insert(route.to_vec(), CacheSource::Reply, now);
        self.drain_routable()
    }

    /// Pop buffered packets (in FIFO order) whose plane target has a
    /// cached route, installing the route on each.
    pub fn drain_routable(&mut self) -> Vec<Packet> {
        let mut sent = Vec::new();
        let mut keep = VecDeque::new();
        while let Some(entry) = self.buffer.pop_front() {
            match self.find_route(entry.target) {
                Some(route) => {
                    let mut pkt = entry.pkt;
                    pkt.source_route = Some(route);
                    pkt.route_cursor = 0;
                    sent.push(pkt);
                }
                None => keep.push_back(entry),
            }
        }
        self.buffer = keep;
        let targets: Vec<NodeId> = self.pending.keys().copied().collect();
        for target in targets {
            if self.find_route(target).is_some() {
                self.pending.remove(&target);
            }
        }
        sent
    }

    /// Advance the hop cursor at a forwarding node and snoop-cache the
    /// route's usable suffix and reversed prefix.
    pub fn forward_on_route(&mut self, pkt: &Packet, now: SimTime) -> Result<NodeId, MalformedRoute> {
        let route = pkt
            .source_route
            .as_ref()
            .ok_or(MalformedRoute { node: self.me })?;
        let idx = pkt.route_cursor;
        if route.get(idx) != Some(&self.me) {
            return Err(MalformedRoute { node: self.me });
        }
        let next = *route.get(idx + 1).ok_or(MalformedRoute { node: self.me })?;
        self.cache_insert(route[idx..].to_vec(), CacheSource::Snooped, now);
        let mut prefix: Vec<NodeId> = route[..=idx].to_vec();
        prefix.reverse();
        self.cache_insert(prefix, CacheSource::Snooped, now);
        Ok(next)
    }

    /// Handle a MAC-level link break for a source-routed packet held here.
    pub fn on_link_break(
        &mut self,
        mut pkt: Packet,
        failed_next: NodeId,
        now: SimTime,
    ) -> LinkBreakOutcome {
        self.purge_link(self.me, failed_next);

        let route = pkt.source_route.clone().unwrap_or_default();
        let idx = pkt.route_cursor.min(route.len().saturating_sub(1));
        let route_origin = route.first().copied().unwrap_or(self.me);
        let is_rerr = matches!(pkt.body, crate::netstack::PacketBody::RouteError(_));

        let rerr = if !is_rerr && route_origin != self.me && !route.is_empty() {
            let mut transport: Vec<NodeId> = route[..=idx].to_vec();
            transport.reverse();
            Some((
                RerrMsg {
                    reporter: self.me,
                    broken_from: self.me,
                    broken_to: failed_next,
                    original_sender: pkt.origin,
                },
                transport,
            ))
        } else {
            None
        };

        if is_rerr {
            return LinkBreakOutcome {
                rerr: None,
                disposition: BreakDisposition::Dropped(pkt),
            };
        }

        let salvage_target = route.last().copied();
        if !pkt.salvaged {
            if let Some(target) = salvage_target {
                if let Some(alt) = self.find_route(target) {
                    pkt.salvaged = true;
                    pkt.source_route = Some(alt);
                    pkt.route_cursor = 0;
                    return LinkBreakOutcome {
                        rerr,
                        disposition: BreakDisposition::Salvaged(pkt),
                    };
                }
            }
        }

        let is_data = matches!(pkt.body, crate::netstack::PacketBody::Data);
        if is_data && pkt.origin == self.me {
            let target = salvage_target.unwrap_or(pkt.final_dest);
            if self.buffer.len() >= self.cfg.send_buffer_capacity {
                return LinkBreakOutcome {
                    rerr,
                    disposition: BreakDisposition::BufferOverflow(pkt),
                };
            }
            pkt.source_route = None;
            pkt.route_cursor = 0;
            self.buffer.push_back(BufferedPacket {
                pkt,
                target,
                buffered_at: now,
            });
            let start_discovery = !self.pending.contains_key(&target);
            if start_discovery {
                self.pending.insert(target, PendingDiscovery { attempt: 0 });
            }
            return LinkBreakOutcome {
                rerr,
                disposition: BreakDisposition::BufferedForRediscovery {
                    target,
                    start_discovery,
                },
            };
        }

        LinkBreakOutcome {
            rerr,
            disposition: BreakDisposition::Dropped(pkt),
        }
    }

    /// Periodic retry check for an in-flight discovery.
    pub fn retry_tick(&mut self, target: NodeId, _now: SimTime) -> RetryOutcome {
        if !self.pending.contains_key(&target) {
            return RetryOutcome::Stop;
        }
        if self.find_route(target).is_some() {
            // A snooped or record-learned route appeared: use it.
            self.pending.remove(&target);
            return RetryOutcome::Drain(self.drain_routable());
        }
        if self.buffer.iter().any(|b| b.target == target) {
            let attempt = {
                let state = self.pending.get_mut(&target).expect("pending");
                state.attempt += 1;
                state.attempt
            };
            let backoff = self.backoff(attempt);
            let rreq = self.new_request(target);
            RetryOutcome::Flood { rreq, backoff }
        } else {
            self.pending.remove(&target);
            RetryOutcome::Stop
        }
    }

    /// Drop buffered packets older than the send-buffer lifetime.
    pub fn sweep(&mut self, now: SimTime) -> Vec<Packet> {
        let limit = SimTime::from_secs_f64(self.cfg.send_buffer_lifetime);
        let mut expired = Vec::new();
        let mut keep = VecDeque::new();
        while let Some(entry) = self.buffer.pop_front() {
            if now.saturating_sub(entry.buffered_at) > limit {
                expired.push(entry.pkt);
            } else {
                keep.push_back(entry);
            }
        }
        self.buffer = keep;
        expired
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netstack::{PacketBody, DATA_TTL};

    fn t(secs: f64) -> SimTime {
        SimTime::from_secs_f64(secs)
    }

    fn w(k: u16) -> NodeId {
        NodeId::Wireless(k)
    }

    fn agent(me: NodeId) -> DsrAgent {
        DsrAgent::new(me, DsrConfig::default())
    }

    fn data(origin: NodeId, dest: NodeId, uid: u64) -> Packet {
        Packet {
            uid,
            origin,
            final_dest: dest,
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

    #[test]
    fn cache_hit_sends_with_route() {
        let mut a = agent(w(0));
        a.cache_insert(vec![w(0), w(1), w(9)], CacheSource::Reply, t(1.0));
        match a.send(data(w(0), w(9), 1), w(9), t(2.0)) {
            SendOutcome::SentWithRoute(p) => {
                assert_eq!(p.source_route.unwrap(), vec![w(0), w(1), w(9)]);
            }
            other => panic!("expected route hit, got {other:?}"),
        }
    }

    #[test]
    fn cache_miss_buffers_and_discovers_once() {
        let mut a = agent(w(0));
        assert_eq!(
            a.send(data(w(0), w(9), 1), w(9), t(0.0)),
            SendOutcome::BufferedAndDiscovering {
                start_discovery: true
            }
        );
        let (rreq, backoff) = a.initial_flood(w(9));
        assert_eq!(rreq.route_record, vec![w(0)]);
        assert_eq!(backoff, 0.5);
        assert_eq!(
            a.send(data(w(0), w(9), 2), w(9), t(0.1)),
            SendOutcome::BufferedAndDiscovering {
                start_discovery: false
            },
            "second packet piggybacks on the in-flight discovery"
        );
        assert_eq!(a.buffer_len(), 2);
    }

    #[test]
    fn buffer_full_drops_the_incoming_packet() {
        let mut a = agent(w(0));
        for uid in 0..64 {
            a.send(data(w(0), w(9), uid), w(9), t(0.0));
        }
        assert_eq!(a.buffer_len(), 64);
        match a.send(data(w(0), w(9), 64), w(9), t(1.0)) {
            SendOutcome::DroppedBufferFull(p) => assert_eq!(p.uid, 64),
            other => panic!("expected overflow drop, got {other:?}"),
        }
        assert_eq!(a.buffer_len(), 64);
    }

    #[test]
    fn target_replies_along_reversed_record() {
        let mut a = agent(w(2));
        let rreq = RreqMsg {
            origin: w(0),
            target: w(2),
            request_id: 0,
            route_record: vec![w(0), w(1)],
        };
        match a.handle_rreq(&rreq, t(0.0)) {
            RreqOutcome::Reply {
                discovered,
                transport,
            } => {
                assert_eq!(discovered, vec![w(0), w(1), w(2)]);
                assert_eq!(transport, vec![w(2), w(1), w(0)]);
            }
            other => panic!("expected reply, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_flood_copies_ignored() {
        let mut a = agent(w(5));
        let rreq = RreqMsg {
            origin: w(0),
            target: w(9),
            request_id: 3,
            route_record: vec![w(0)],
        };
        assert!(matches!(a.handle_rreq(&rreq, t(0.0)), RreqOutcome::Forward(_)));
        let again = RreqMsg {
            route_record: vec![w(0), w(1)],
            ..rreq.clone()
        };
        assert_eq!(a.handle_rreq(&again, t(0.1)), RreqOutcome::Ignore);
        assert_eq!(a.forward_counts[&(w(0), 3)], 1, "one forward per flood");
    }

    #[test]
    fn node_already_in_record_ignores() {
        let mut a = agent(w(1));
        let rreq = RreqMsg {
            origin: w(0),
            target: w(9),
            request_id: 0,
            route_record: vec![w(0), w(1)],
        };
        assert_eq!(a.handle_rreq(&rreq, t(0.0)), RreqOutcome::Ignore);
    }

    #[test]
    fn intermediate_cached_route_reply() {
        let mut a = agent(w(5));
        a.cache_insert(vec![w(5), w(7), w(9)], CacheSource::Reply, t(0.0));
        let rreq = RreqMsg {
            origin: w(0),
            target: w(9),
            request_id: 0,
            route_record: vec![w(0)],
        };
        match a.handle_rreq(&rreq, t(1.0)) {
            RreqOutcome::Reply {
                discovered,
                transport,
            } => {
                assert_eq!(discovered, vec![w(0), w(5), w(7), w(9)]);
                assert_eq!(transport, vec![w(5), w(0)]);
            }
            other => panic!("expected cached reply, got {other:?}"),
        }
    }

    #[test]
    fn cached_reply_with_overlap_forwards_instead() {
        let mut a = agent(w(5));
        a.cache_insert(vec![w(5), w(1), w(9)], CacheSource::Reply, t(0.0));
        let rreq = RreqMsg {
            origin: w(0),
            target: w(9),
            request_id: 0,
            route_record: vec![w(0), w(1)],
        };
        match a.handle_rreq(&rreq, t(1.0)) {
            RreqOutcome::Forward(f) => {
                assert_eq!(f.route_record, vec![w(0), w(1), w(5)]);
            }
            other => panic!("expected forward, got {other:?}"),
        }
    }

    #[test]
    fn reply_drains_buffer_fifo() {
        let mut a = agent(w(0));
        for uid in 0..3 {
            a.send(data(w(0), w(9), uid), w(9), t(0.0));
        }
        let drained = a.handle_rrep(&[w(0), w(1), w(9)], t(0.5));
        assert_eq!(drained.iter().map(|p| p.uid).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(a.buffer_len(), 0);
        assert!(!a.discovery_pending(w(9)));
        assert!(drained
            .iter()
            .all(|p| p.source_route.as_deref() == Some(&[w(0), w(1), w(9)][..])));
    }

    #[test]
    fn reply_for_other_target_leaves_buffer() {
        let mut a = agent(w(0));
        a.send(data(w(0), w(8), 1), w(8), t(0.0));
        let drained = a.handle_rrep(&[w(0), w(1), w(9)], t(0.5));
        assert!(drained.is_empty());
        assert_eq!(a.buffer_len(), 1);
        assert_eq!(a.cache().len(), 1, "cache still grows");
    }

    #[test]
    fn sweep_enforces_lifetime() {
        let mut a = agent(w(0));
        a.send(data(w(0), w(9), 1), w(9), t(0.0));
        a.send(data(w(0), w(9), 2), w(9), t(5.0));
        assert!(a.sweep(t(30.0)).is_empty(), "exactly 30 s old survives");
        let expired = a.sweep(t(31.0));
        assert_eq!(expired.iter().map(|p| p.uid).collect::<Vec<_>>(), vec![1]);
        assert_eq!(a.buffer_len(), 1);
        // A reply arriving after the sweep finds that packet gone.
        let drained = a.handle_rrep(&[w(0), w(9)], t(36.0));
        assert_eq!(drained.iter().map(|p| p.uid).collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn forward_snoops_suffix_and_prefix() {
        let mut a = agent(w(1));
        let mut pkt = data(w(0), w(3), 1);
        pkt.source_route = Some(vec![w(0), w(1), w(2), w(3)]);
        pkt.route_cursor = 1;
        let next = a.forward_on_route(&pkt, t(1.0)).unwrap();
        assert_eq!(next, w(2));
        let routes: Vec<&[NodeId]> = a.cache().iter().map(|e| e.route.as_slice()).collect();
        assert!(routes.contains(&&[w(1), w(2), w(3)][..]), "suffix cached");
        assert!(routes.contains(&&[w(1), w(0)][..]), "reversed prefix cached");
    }

    #[test]
    fn one_hop_forward_needs_no_new_cache() {
        let mut a = agent(w(0));
        let mut pkt = data(w(0), w(1), 1);
        pkt.source_route = Some(vec![w(0), w(1)]);
        pkt.route_cursor = 0;
        let next = a.forward_on_route(&pkt, t(0.0)).unwrap();
        assert_eq!(next, w(1));
        assert_eq!(a.cache().len(), 1, "only the route itself");
        assert_eq!(a.cache()[0].route, vec![w(0), w(1)]);
    }

    #[test]
    fn malformed_route_rejected() {
        let mut a = agent(w(7));
        let mut pkt = data(w(0), w(3), 1);
        pkt.source_route = Some(vec![w(0), w(1), w(3)]);
        pkt.route_cursor = 1;
        assert_eq!(
            a.forward_on_route(&pkt, t(0.0)),
            Err(MalformedRoute { node: w(7) })
        );
    }

    #[test]
    fn link_break_salvages_from_second_route() {
        let mut a = agent(w(0));
        a.cache_insert(vec![w(0), w(1), w(9)], CacheSource::Reply, t(0.0));
        a.cache_insert(vec![w(0), w(2), w(9)], CacheSource::Reply, t(0.5));
        let mut pkt = data(w(0), w(9), 1);
        pkt.source_route = Some(vec![w(0), w(1), w(9)]);
        let out = a.on_link_break(pkt, w(1), t(1.0));
        assert!(out.rerr.is_none(), "origin keeps the purge local");
        match out.disposition {
            BreakDisposition::Salvaged(p) => {
                assert_eq!(p.source_route.unwrap(), vec![w(0), w(2), w(9)]);
                assert!(p.salvaged);
            }
            other => panic!("expected salvage, got {other:?}"),
        }
        assert_eq!(a.cache().len(), 1, "broken route purged");
    }

    #[test]
    fn link_break_without_alternate_rebuffers_at_origin() {
        let mut a = agent(w(0));
        a.cache_insert(vec![w(0), w(1), w(9)], CacheSource::Reply, t(0.0));
        let mut pkt = data(w(0), w(9), 1);
        pkt.source_route = Some(vec![w(0), w(1), w(9)]);
        let out = a.on_link_break(pkt, w(1), t(1.0));
        assert_eq!(
            out.disposition,
            BreakDisposition::BufferedForRediscovery {
                target: w(9),
                start_discovery: true
            }
        );
        assert_eq!(a.buffer_len(), 1);
        assert!(a.cache().is_empty());
    }

    #[test]
    fn intermediate_break_emits_rerr_and_drops() {
        let mut a = agent(w(1));
        let mut pkt = data(w(0), w(9), 1);
        pkt.source_route = Some(vec![w(0), w(1), w(2), w(9)]);
        pkt.route_cursor = 1;
        let out = a.on_link_break(pkt, w(2), t(1.0));
        let (rerr, transport) = out.rerr.expect("RERR toward the origin");
        assert_eq!(rerr.broken_from, w(1));
        assert_eq!(rerr.broken_to, w(2));
        assert_eq!(rerr.original_sender, w(0));
        assert_eq!(transport, vec![w(1), w(0)]);
        assert!(matches!(out.disposition, BreakDisposition::Dropped(_)));
    }

    #[test]
    fn salvage_happens_at_most_once() {
        let mut a = agent(w(1));
        a.cache_insert(vec![w(1), w(3), w(9)], CacheSource::Reply, t(0.0));
        let mut pkt = data(w(0), w(9), 1);
        pkt.source_route = Some(vec![w(0), w(1), w(2), w(9)]);
        pkt.route_cursor = 1;
        pkt.salvaged = true;
        let out = a.on_link_break(pkt, w(2), t(1.0));
        assert!(
            matches!(out.disposition, BreakDisposition::Dropped(_)),
            "already-salvaged packet is not salvaged again"
        );
    }

    /// Oracle: set-filter over a hand-built cache of 5 routes.
    #[test]
    fn rerr_purges_every_entry_with_the_broken_link() {
        let mut a = agent(w(0));
        let routes: Vec<Vec<NodeId>> = vec![
            vec![w(0), w(1), w(2), w(3)], // contains 1->2
            vec![w(0), w(1), w(4)],
            vec![w(0), w(4), w(1), w(2)], // contains 1->2
            vec![w(0), w(2), w(1)],       // contains 2->1, not 1->2
            vec![w(0), w(5), w(6)],
        ];
        for (i, r) in routes.iter().enumerate() {
            a.cache_insert(r.clone(), CacheSource::Reply, t(i as f64));
        }
        let expected: Vec<Vec<NodeId>> = routes
            .iter()
            .filter(|r| !r.windows(2).any(|p| p[0] == w(1) && p[1] == w(2)))
            .cloned()
            .collect();
        let purged = a.purge_link(w(1), w(2));
        assert_eq!(purged, 2);
        let remaining: Vec<Vec<NodeId>> = a.cache().iter().map(|e| e.route.clone()).collect();
        assert_eq!(remaining, expected);
    }

    #[test]
    fn retry_backoff_doubles_and_caps() {
        let mut a = agent(w(0));
        a.send(data(w(0), w(9), 1), w(9), t(0.0));
        let (_, first) = a.initial_flood(w(9));
        assert_eq!(first, 0.5);
        let mut backoffs = Vec::new();
        for i in 0..6 {
            match a.retry_tick(w(9), t(i as f64)) {
                RetryOutcome::Flood { backoff, .. } => backoffs.push(backoff),
                other => panic!("expected flood, got {other:?}"),
            }
        }
        assert_eq!(backoffs, vec![1.0, 2.0, 4.0, 8.0, 10.0, 10.0]);
    }

    #[test]
    fn retry_stops_once_buffer_empties() {
        let mut a = agent(w(0));
        a.send(data(w(0), w(9), 1), w(9), t(0.0));
        a.initial_flood(w(9));
        // The 30 s sweep eventually clears the buffer; retries then stop.
        a.sweep(t(31.0));
        assert_eq!(a.retry_tick(w(9), t(31.0)), RetryOutcome::Stop);
        assert!(!a.discovery_pending(w(9)));
    }

    #[test]
    fn retry_uses_fresh_request_ids() {
        let mut a = agent(w(0));
        a.send(data(w(0), w(9), 1), w(9), t(0.0));
        let (r0, _) = a.initial_flood(w(9));
        let r1 = match a.retry_tick(w(9), t(1.0)) {
            RetryOutcome::Flood { rreq, .. } => rreq,
            other => panic!("{other:?}"),
        };
        assert_ne!(r0.request_id, r1.request_id);
    }

    #[test]
    fn cache_eviction_removes_oldest() {
        let mut a = DsrAgent::new(
            w(0),
            DsrConfig {
                cache_capacity: 2,
                ..Default::default()
            },
        );
        a.cache_insert(vec![w(0), w(1)], CacheSource::Reply, t(1.0));
        a.cache_insert(vec![w(0), w(2)], CacheSource::Reply, t(2.0));
        a.cache_insert(vec![w(0), w(3)], CacheSource::Reply, t(3.0));
        let routes: Vec<Vec<NodeId>> = a.cache().iter().map(|e| e.route.clone()).collect();
        assert_eq!(routes, vec![vec![w(0), w(2)], vec![w(0), w(3)]]);
    }

    #[test]
    fn record_caching_learns_reverse_routes() {
        let mut a = agent(w(5));
        let rreq = RreqMsg {
            origin: w(0),
            target: w(9),
            request_id: 0,
            route_record: vec![w(0), w(1), w(2)],
        };
        a.handle_rreq(&rreq, t(0.0));
        assert!(a
            .cache()
            .iter()
            .any(|e| e.route == vec![w(5), w(2), w(1), w(0)] && e.source == CacheSource::RouteRecord));
    }

    #[test]
    fn find_route_prefers_shortest() {
        let mut a = agent(w(0));
        a.cache_insert(vec![w(0), w(1), w(2), w(9)], CacheSource::Reply, t(0.0));
        a.cache_insert(vec![w(0), w(3), w(9)], CacheSource::Reply, t(1.0));
        assert_eq!(a.find_route(w(9)).unwrap(), vec![w(0), w(3), w(9)]);
        // Prefixes count as routes to intermediate nodes.
        assert_eq!(a.find_route(w(2)).unwrap(), vec![w(0), w(1), w(2)]);
    }
}
