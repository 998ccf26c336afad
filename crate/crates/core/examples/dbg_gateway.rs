use manetsim::harness::{Protocol, RunConfig};
use manetsim::ids::NodeId;
use manetsim::scenario::{Connection, MobilityParams, MovementScript, Position, TrafficParams, TrafficScript};

fn main() {
    let mut movement = MovementScript::default();
    movement.initial.insert(NodeId::Wireless(0), Position::new(300.0, 250.0));
    movement.legs.insert(NodeId::Wireless(0), vec![]);
    let cfg = RunConfig {
        protocol: Protocol::Dsr,
        mobility: MobilityParams { node_count: 1, ..Default::default() },
        traffic: TrafficParams { source_count: 1, ..Default::default() },
        link: manetsim::netstack::LinkModel { broadcast_jitter_max: 1e-7, ..Default::default() },
        duration: 10.0,
        movement_script: Some(movement),
        traffic_script: Some(TrafficScript { connections: vec![Connection {
            source: NodeId::Wired(2), dest: NodeId::Wireless(0),
            start: 1.0, stop: 3.5, rate: 4.0, size: 512 }] }),
        ..Default::default()
    };
    let mut sim = manetsim::runtime::Sim::new(cfg).unwrap();
    sim.run();
    for e in &sim.trace().events {
        if e.pkt_uid <= 4 {
            println!("{:>10} {:?} uid={} node={}", e.at.as_micros(), e.kind, e.pkt_uid, e.node);
        }
    }
}
