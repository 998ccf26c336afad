//! Node identifiers for the hybrid topology.
//!
//! Wireless nodes are `w0..wN`, fixed wired hosts `f0..fN`, wired routers
//! `r0..rN`, and the single dual-homed base station is `bs0`. The textual
//! forms appear verbatim in scenario files, trace files and the CLI.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NodeId {
    /// Mobile ad hoc node, `w<k>`.
    Wireless(u16),
    /// Fixed wired host, `f<k>`.
    Wired(u16),
    /// Wired router, `r<k>`.
    Router(u16),
    /// The gateway between the domains, `bs0`.
    BaseStation,
}

impl NodeId {
    /// True for nodes that participate in the ad hoc radio plane
    /// (mobile nodes and the base station).
    pub fn on_wireless_plane(&self) -> bool {
        matches!(self, NodeId::Wireless(_) | NodeId::BaseStation)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Wireless(k) => write!(f, "w{k}"),
            NodeId::Wired(k) => write!(f, "f{k}"),
            NodeId::Router(k) => write!(f, "r{k}"),
            NodeId::BaseStation => write!(f, "bs0"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown node id {0:?}")]
pub struct UnknownNode(pub String);

impl FromStr for NodeId {
    type Err = UnknownNode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "bs0" {
            return Ok(NodeId::BaseStation);
        }
        let (prefix, rest) = s.split_at(s.len().min(1));
        let index: u16 = rest.parse().map_err(|_| UnknownNode(s.to_string()))?;
        match prefix {
            "w" => Ok(NodeId::Wireless(index)),
            "f" => Ok(NodeId::Wired(index)),
            "r" => Ok(NodeId::Router(index)),
            _ => Err(UnknownNode(s.to_string())),
        }
    }
}

impl TryFrom<String> for NodeId {
    type Error = UnknownNode;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<NodeId> for String {
    fn from(id: NodeId) -> String {
        id.to_string()
    }
}
