//! The wired domain, hierarchical addressing, and the gateway plumbing
//! that bridges ad hoc routing and static wired routing.
//!
//! Wired routing is static for the whole run: next hops are precomputed
//! shortest-latency paths. The base station is dual-homed: it appears
//! here as a wired endpoint and participates as an ordinary node on the
//! wireless plane.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::ids::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Wired,
    Wireless,
}

/// Domain of a node per the id scheme: `f*` and `r*` are wired, `w*` and
/// the base station wireless (the base station is also the wired egress).
pub fn classify(id: NodeId) -> Domain {
    match id {
        NodeId::Wired(_) | NodeId::Router(_) => Domain::Wired,
        NodeId::Wireless(_) | NodeId::BaseStation => Domain::Wireless,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WiredLink {
    pub a: NodeId,
    pub b: NodeId,
    pub bandwidth_bps: f64,
    pub latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HybridError {
    #[error("no wired path from {from} to {to}")]
    Unreachable { from: NodeId, to: NodeId },
    #[error("invalid wired topology: {0}")]
    InvalidTopology(String),
}

/// Static wired topology with precomputed next-hop tables.
#[derive(Debug, Clone)]
pub struct WiredTopology {
    links: Vec<WiredLink>,
    nodes: BTreeSet<NodeId>,
    link_params: BTreeMap<(NodeId, NodeId), (f64, f64)>,
    next_hop: BTreeMap<(NodeId, NodeId), NodeId>,
}

impl WiredTopology {
    /// Default wired plane: bs0 and each fixed host hang off one router,
    /// every link 10 Mbps with 2 ms latency.
    pub fn star(fixed_count: u16) -> WiredTopology {
        let router = NodeId::Router(0);
        let mut links = vec![WiredLink {
            a: NodeId::BaseStation,
            b: router,
            bandwidth_bps: 10_000_000.0,
            latency_s: 0.002,
        }];
        for k in 0..fixed_count {
            links.push(WiredLink {
                a: router,
                b: NodeId::Wired(k),
                bandwidth_bps: 10_000_000.0,
                latency_s: 0.002,
            });
        }
        WiredTopology::new(links).expect("star topology is valid")
    }

    pub fn new(links: Vec<WiredLink>) -> Result<WiredTopology, HybridError> {
        let mut nodes = BTreeSet::new();
        let mut adjacency: BTreeMap<NodeId, Vec<(NodeId, u64)>> = BTreeMap::new();
        let mut link_params = BTreeMap::new();
        for l in &links {
            if l.a == l.b {
                return Err(HybridError::InvalidTopology(format!("self-link at {}", l.a)));
            }
            if classify(l.a) == Domain::Wireless && l.a != NodeId::BaseStation
                || classify(l.b) == Domain::Wireless && l.b != NodeId::BaseStation
            {
                return Err(HybridError::InvalidTopology(format!(
                    "wired link {}-{} touches a mobile node",
                    l.a, l.b
                )));
            }
            if l.bandwidth_bps <= 0.0 || l.latency_s <= 0.0 {
                return Err(HybridError::InvalidTopology(
                    "link bandwidth and latency must be positive".into(),
                ));
            }
            nodes.insert(l.a);
            nodes.insert(l.b);
            let cost = SimTime::from_secs_f64(l.latency_s).as_micros();
            adjacency.entry(l.a).or_default().push((l.b, cost));
            adjacency.entry(l.b).or_default().push((l.a, cost));
            link_params.insert((l.a, l.b), (l.bandwidth_bps, l.latency_s));
            link_params.insert((l.b, l.a), (l.bandwidth_bps, l.latency_s));
        }
        for neigh in adjacency.values_mut() {
            neigh.sort();
        }

        // Shortest-latency predecessor trees from every node.
        let mut next_hop = BTreeMap::new();
        for &src in &nodes {
            let mut dist: BTreeMap<NodeId, u64> = BTreeMap::new();
            let mut prev: BTreeMap<NodeId, NodeId> = BTreeMap::new();
            let mut heap = BinaryHeap::new();
            dist.insert(src, 0);
            heap.push(Reverse((0u64, src)));
            while let Some(Reverse((d, u))) = heap.pop() {
                if dist.get(&u).copied() != Some(d) {
                    continue;
                }
                for &(v, w) in adjacency.get(&u).into_iter().flatten() {
                    let nd = d + w;
                    if dist.get(&v).map_or(true, |&cur| nd < cur) {
                        dist.insert(v, nd);
                        prev.insert(v, u);
                        heap.push(Reverse((nd, v)));
                    }
                }
            }
            for &dst in &nodes {
                if dst == src || !dist.contains_key(&dst) {
                    continue;
                }
                // Walk back from dst to find the first hop out of src.
                let mut hop = dst;
                while prev[&hop] != src {
                    hop = prev[&hop];
                }
                next_hop.insert((src, dst), hop);
            }
        }
        Ok(WiredTopology {
            links,
            nodes,
            link_params,
            next_hop,
        })
    }

    pub fn links(&self) -> &[WiredLink] {
        &self.links
    }

    pub fn nodes(&self) -> &BTreeSet<NodeId> {
        &self.nodes
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains(&id)
    }

    pub fn next_hop(&self, from: NodeId, dest: NodeId) -> Option<NodeId> {
        if from == dest {
            return Some(dest);
        }
        self.next_hop.get(&(from, dest)).copied()
    }

    /// Full shortest-latency path, endpoints inclusive.
    pub fn route(&self, src: NodeId, dst: NodeId) -> Result<Vec<NodeId>, HybridError> {
        if !self.nodes.contains(&src) || !self.nodes.contains(&dst) {
            return Err(HybridError::Unreachable { from: src, to: dst });
        }
        let mut path = vec![src];
        let mut at = src;
        while at != dst {
            at = self
                .next_hop(at, dst)
                .ok_or(HybridError::Unreachable { from: src, to: dst })?;
            path.push(at);
        }
        Ok(path)
    }

    /// Total latency cost of the path from `src` to `dst`, microseconds.
    pub fn path_cost(&self, src: NodeId, dst: NodeId) -> Result<u64, HybridError> {
        let path = self.route(src, dst)?;
        Ok(path
            .windows(2)
            .map(|w| SimTime::from_secs_f64(self.link_params[&(w[0], w[1])].1).as_micros())
            .sum())
    }

    /// Per-hop forwarding delay: link latency plus serialization time.
    pub fn hop_delay(&self, from: NodeId, to: NodeId, bytes: u32) -> Option<SimTime> {
        let &(bandwidth, latency) = self.link_params.get(&(from, to))?;
        Some(SimTime::from_secs_f64(latency + 8.0 * bytes as f64 / bandwidth))
    }
}
