//! Shared fixtures: hand-placed static topologies and single-flow traffic
//! scripts for the hand-traceable scenarios.

use manetsim::harness::{Protocol, RunConfig};
use manetsim::ids::NodeId;
use manetsim::netstack::LinkModel;
use manetsim::scenario::{
    Connection, Leg, MobilityParams, MovementScript, Position, TrafficParams, TrafficScript,
};

/// A link model whose jitter quantizes to zero on the microsecond grid,
/// making event timelines exactly hand-computable.
pub fn exact_link() -> LinkModel {
    LinkModel {
        broadcast_jitter_max: 1e-7,
        ..Default::default()
    }
}

pub fn static_movement(positions: &[(NodeId, (f64, f64))]) -> MovementScript {
    let mut script = MovementScript::default();
    for (id, (x, y)) in positions {
        script.initial.insert(*id, Position::new(*x, *y));
        script.legs.insert(*id, Vec::new());
    }
    script
}

pub fn leg(depart: f64, x: f64, y: f64, speed: f64) -> Leg {
    Leg {
        depart,
        dest: Position::new(x, y),
        speed,
    }
}

pub fn flow(source: NodeId, dest: NodeId, start: f64, stop: f64) -> Connection {
    Connection {
        source,
        dest,
        start,
        stop,
        rate: 4.0,
        size: 512,
    }
}

/// A fully pinned scenario: provided placement and flows, exact-timing
/// link model, no generated randomness in motion or traffic.
pub fn pinned_config(
    protocol: Protocol,
    positions: &[(NodeId, (f64, f64))],
    connections: Vec<Connection>,
    duration: f64,
) -> RunConfig {
    let node_count = positions
        .iter()
        .filter_map(|(id, _)| match id {
            NodeId::Wireless(k) => Some(k + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    RunConfig {
        protocol,
        mobility: MobilityParams {
            node_count,
            ..Default::default()
        },
        traffic: TrafficParams {
            source_count: connections.len().min(u16::MAX as usize) as u16,
            ..Default::default()
        },
        link: exact_link(),
        duration,
        movement_script: Some(static_movement(positions)),
        traffic_script: Some(TrafficScript { connections }),
        ..Default::default()
    }
}

pub fn w(k: u16) -> NodeId {
    NodeId::Wireless(k)
}
