//! Movement scripts (random waypoint) and traffic scripts (CBR
//! connections), plus their native text formats.
//!
//! All generated coordinates, times and speeds are quantized to the
//! simulator's microsecond/micro-unit grid, which makes the text formats
//! lossless: `parse(write(s)) == s` exactly.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::RandomStream;
use crate::format_num;
use crate::ids::{NodeId, UnknownNode};

/// Round to 6 fractional digits (the file-format resolution).
fn q6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Round up to 6 fractional digits. Used for leg arrival times so the
/// next departure never lands before the true arrival.
fn ceil6(x: f64) -> f64 {
    (x * 1e6).ceil() / 1e6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Position {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Area {
    pub fn contains(&self, p: &Position) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MobilityParams {
    pub node_count: u16,
    pub area: Area,
    pub pause_time: f64,
    pub max_speed: f64,
    pub min_speed: f64,
    pub duration: f64,
}

impl Default for MobilityParams {
    fn default() -> Self {
        MobilityParams {
            node_count: 50,
            area: Area {
                width: 800.0,
                height: 500.0,
            },
            pause_time: 0.0,
            max_speed: 20.0,
            min_speed: 0.1,
            duration: 800.0,
        }
    }
}

/// One travel leg: depart at `depart`, move to `dest` at `speed`.
#[derive(Debug, Clone, PartialEq)]
pub struct Leg {
    pub depart: f64,
    pub dest: Position,
    pub speed: f64,
}

impl Leg {
    /// Arrival time on the microsecond grid, given the leg's start point.
    pub fn arrival(&self, from: &Position) -> f64 {
        ceil6(self.depart + from.distance(&self.dest) / self.speed)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MovementScript {
    pub initial: BTreeMap<NodeId, Position>,
    pub legs: BTreeMap<NodeId, Vec<Leg>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error(transparent)]
    UnknownNode(#[from] UnknownNode),
}

fn parse_err(line: usize, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::ParseError {
        line,
        reason: reason.into(),
    }
}

/// Random waypoint generation: uniform initial positions, then per node an
/// alternation of exact `pause_time` dwells and travel legs with uniform
/// destinations and speeds in `(min_speed, max_speed]`.
pub fn generate_movement(
    params: &MobilityParams,
    stream: &mut RandomStream,
) -> Result<MovementScript, ScenarioError> {
    if params.area.width <= 0.0 || params.area.height <= 0.0 {
        return Err(ScenarioError::InvalidParams("area must be positive".into()));
    }
    if params.max_speed <= 0.0 {
        return Err(ScenarioError::InvalidParams(
            "max_speed must be positive".into(),
        ));
    }
    if params.min_speed < 0.0 || params.min_speed >= params.max_speed {
        return Err(ScenarioError::InvalidParams(
            "min_speed must satisfy 0 <= min_speed < max_speed".into(),
        ));
    }
    if params.pause_time < 0.0 || params.duration < 0.0 {
        return Err(ScenarioError::InvalidParams(
            "pause_time and duration must be nonnegative".into(),
        ));
    }

    let pause = q6(params.pause_time);
    let mut script = MovementScript::default();
    for k in 0..params.node_count {
        let node = NodeId::Wireless(k);
        let mut pos = Position {
            x: q6(stream.unit() * params.area.width),
            y: q6(stream.unit() * params.area.height),
        };
        script.initial.insert(node, pos);

        let mut legs = Vec::new();
        let mut t = 0.0;
        loop {
            let depart = q6(t + pause);
            if depart >= params.duration {
                break;
            }
            let dest = Position {
                x: q6(stream.unit() * params.area.width),
                y: q6(stream.unit() * params.area.height),
            };
            // Uniform on (min, max]: u = 0 gives max, u -> 1 approaches min.
            let raw = params.max_speed - stream.unit() * (params.max_speed - params.min_speed);
            let speed = q6(raw).max(1e-6);
            let leg = Leg {
                depart,
                dest,
                speed,
            };
            let mut arrival = leg.arrival(&pos);
            if arrival <= depart {
                arrival = q6(depart + 1e-6);
            }
            legs.push(leg);
            pos = dest;
            t = arrival;
        }
        script.legs.insert(node, legs);
    }
    Ok(script)
}

/// Position of `node` at time `t` (seconds): linear interpolation along the
/// active leg, the held waypoint during pauses.
pub fn position_at(
    script: &MovementScript,
    node: NodeId,
    t: f64,
) -> Result<Position, UnknownNode> {
    let initial = script
        .initial
        .get(&node)
        .ok_or_else(|| UnknownNode(node.to_string()))?;
    let legs = script.legs.get(&node).map(Vec::as_slice).unwrap_or(&[]);

    // Index of the last leg with depart <= t.
    let idx = legs.partition_point(|l| l.depart <= t);
    if idx == 0 {
        return Ok(*initial);
    }
    let leg = &legs[idx - 1];
    let start = if idx >= 2 { legs[idx - 2].dest } else { *initial };
    let dist = start.distance(&leg.dest);
    if dist == 0.0 {
        return Ok(leg.dest);
    }
    let travel = dist / leg.speed;
    let elapsed = t - leg.depart;
    if elapsed >= travel {
        return Ok(leg.dest);
    }
    let frac = elapsed / travel;
    Ok(Position {
        x: start.x + frac * (leg.dest.x - start.x),
        y: start.y + frac * (leg.dest.y - start.y),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficParams {
    pub source_count: u16,
    pub packet_size: u32,
    pub rate: f64,
    pub cross_domain_fraction: f64,
    pub start_window: f64,
    pub duration: f64,
}

impl Default for TrafficParams {
    fn default() -> Self {
        TrafficParams {
            source_count: 15,
            packet_size: 512,
            rate: 4.0,
            cross_domain_fraction: 0.5,
            start_window: 30.0,
            duration: 800.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub source: NodeId,
    pub dest: NodeId,
    pub start: f64,
    pub stop: f64,
    pub rate: f64,
    pub size: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrafficScript {
    pub connections: Vec<Connection>,
}

/// CBR connection generation: `source_count` distinct wireless sources, a
/// rounded `cross_domain_fraction` share targeting uniformly chosen wired
/// nodes and the rest targeting distinct wireless peers, starts uniform
/// over the start window, stop at `duration`.
pub fn generate_traffic(
    params: &TrafficParams,
    wireless: &[NodeId],
    wired: &[NodeId],
    stream: &mut RandomStream,
) -> Result<TrafficScript, ScenarioError> {
    let n = params.source_count as usize;
    if n > wireless.len() {
        return Err(ScenarioError::InvalidParams(format!(
            "source_count {} exceeds wireless node count {}",
            n,
            wireless.len()
        )));
    }
    if params.packet_size == 0 || params.rate <= 0.0 {
        return Err(ScenarioError::InvalidParams(
            "packet_size and rate must be positive".into(),
        ));
    }
    if !(0.0..=1.0).contains(&params.cross_domain_fraction) {
        return Err(ScenarioError::InvalidParams(
            "cross_domain_fraction must lie in [0, 1]".into(),
        ));
    }
    if params.start_window < 0.0 {
        return Err(ScenarioError::InvalidParams(
            "start_window must be nonnegative".into(),
        ));
    }

    // Partial Fisher-Yates for distinct sources.
    let mut pool: Vec<NodeId> = wireless.to_vec();
    let mut sources = Vec::with_capacity(n);
    for i in 0..n {
        let j = i + stream.index(pool.len() - i);
        pool.swap(i, j);
        sources.push(pool[i]);
    }

    let cross = ((params.cross_domain_fraction * n as f64).round() as usize).min(n);
    if cross > 0 && wired.is_empty() {
        return Err(ScenarioError::InvalidParams(
            "cross-domain traffic requested but no wired nodes given".into(),
        ));
    }

    let mut connections = Vec::with_capacity(n);
    for (i, &source) in sources.iter().enumerate() {
        let dest = if i < cross {
            wired[stream.index(wired.len())]
        } else {
            // Uniform over wireless nodes other than the source.
            let self_pos = wireless.iter().position(|&w| w == source).unwrap();
            let j = stream.index(wireless.len() - 1);
            wireless[if j >= self_pos { j + 1 } else { j }]
        };
        let start = if params.start_window > 0.0 {
            q6(stream.range(0.0, params.start_window))
        } else {
            0.0
        };
        connections.push(Connection {
            source,
            dest,
            start,
            stop: params.duration,
            rate: params.rate,
            size: params.packet_size,
        });
    }
    Ok(TrafficScript { connections })
}

pub const MOVEMENT_HEADER: &str = "#manetsim-movement v1";
pub const TRAFFIC_HEADER: &str = "#manetsim-traffic v1";

pub fn write_movement(script: &MovementScript) -> String {
    let mut out = String::from(MOVEMENT_HEADER);
    out.push('\n');
    for (node, pos) in &script.initial {
        out.push_str(&format!(
            "init {node} {} {}\n",
            format_num(pos.x),
            format_num(pos.y)
        ));
    }
    let mut legs: Vec<(NodeId, &Leg)> = script
        .legs
        .iter()
        .flat_map(|(node, legs)| legs.iter().map(move |l| (*node, l)))
        .collect();
    legs.sort_by(|a, b| {
        a.1.depart
            .partial_cmp(&b.1.depart)
            .unwrap()
            .then(a.0.cmp(&b.0))
    });
    for (node, leg) in legs {
        out.push_str(&format!(
            "leg {node} {} {} {} {}\n",
            format_num(leg.depart),
            format_num(leg.dest.x),
            format_num(leg.dest.y),
            format_num(leg.speed)
        ));
    }
    out
}

pub fn parse_movement(text: &str) -> Result<MovementScript, ScenarioError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l == MOVEMENT_HEADER => {}
        _ => return Err(parse_err(1, format!("expected header {MOVEMENT_HEADER:?}"))),
    }

    let mut script = MovementScript::default();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(' ').collect();
        match fields.as_slice() {
            ["init", node, x, y] => {
                let node = NodeId::from_str(node).map_err(|e| parse_err(lineno, e.to_string()))?;
                let x = parse_coord(x, lineno, "x")?;
                let y = parse_coord(y, lineno, "y")?;
                if script.initial.insert(node, Position { x, y }).is_some() {
                    return Err(parse_err(lineno, format!("duplicate init for {node}")));
                }
                script.legs.entry(node).or_default();
            }
            ["leg", node, depart, x, y, speed] => {
                let node = NodeId::from_str(node).map_err(|e| parse_err(lineno, e.to_string()))?;
                if !script.initial.contains_key(&node) {
                    return Err(parse_err(lineno, format!("leg for {node} before its init")));
                }
                let depart = parse_coord(depart, lineno, "depart time")?;
                let x = parse_coord(x, lineno, "dest x")?;
                let y = parse_coord(y, lineno, "dest y")?;
                let speed: f64 = speed
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad speed {speed:?}")))?;
                if !(speed > 0.0) || !speed.is_finite() {
                    return Err(parse_err(
                        lineno,
                        format!("speed must be positive, got {speed}"),
                    ));
                }
                let legs = script.legs.entry(node).or_default();
                if let Some(last) = legs.last() {
                    if depart < last.depart {
                        return Err(parse_err(lineno, "legs out of time order"));
                    }
                }
                legs.push(Leg {
                    depart,
                    dest: Position { x, y },
                    speed,
                });
            }
            _ => return Err(parse_err(lineno, format!("unrecognized line {line:?}"))),
        }
    }
    Ok(script)
}

fn parse_coord(s: &str, lineno: usize, what: &str) -> Result<f64, ScenarioError> {
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(lineno, format!("bad {what} {s:?}")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(parse_err(
            lineno,
            format!("{what} must be finite and nonnegative, got {v}"),
        ));
    }
    Ok(v)
}

pub fn write_traffic(script: &TrafficScript) -> String {
    let mut out = String::from(TRAFFIC_HEADER);
    out.push('\n');
    for c in &script.connections {
        out.push_str(&format!(
            "cbr {} {} {} {} {} {}\n",
            c.source,
            c.dest,
            format_num(c.start),
            format_num(c.stop),
            format_num(c.rate),
            c.size
        ));
    }
    out
}

pub fn parse_traffic(text: &str) -> Result<TrafficScript, ScenarioError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l == TRAFFIC_HEADER => {}
        _ => return Err(parse_err(1, format!("expected header {TRAFFIC_HEADER:?}"))),
    }
    let mut script = TrafficScript::default();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(' ').collect();
        match fields.as_slice() {
            ["cbr", src, dst, start, stop, rate, size] => {
                let source = NodeId::from_str(src).map_err(|e| parse_err(lineno, e.to_string()))?;
                let dest = NodeId::from_str(dst).map_err(|e| parse_err(lineno, e.to_string()))?;
                if source == dest {
                    return Err(parse_err(lineno, "source equals destination"));
                }
                let start = parse_coord(start, lineno, "start")?;
                let stop = parse_coord(stop, lineno, "stop")?;
                let rate: f64 = rate
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad rate {rate:?}")))?;
                if !(rate > 0.0) {
                    return Err(parse_err(lineno, format!("rate must be positive, got {rate}")));
                }
                let size: u32 = size
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad size {size:?}")))?;
                if size == 0 {
                    return Err(parse_err(lineno, "size must be positive"));
                }
                script.connections.push(Connection {
                    source,
                    dest,
                    start,
                    stop,
                    rate,
                    size,
                });
            }
            _ => return Err(parse_err(lineno, format!("unrecognized line {line:?}"))),
        }
    }
    Ok(script)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Streams;
    use proptest::prelude::*;

    fn stream(seed: u64, label: &str) -> Streams {
        let mut s = Streams::new(seed);
        s.stream(label); // touch to create
        s
    }

    #[test]
    fn pause_equal_duration_is_motionless() {
        let params = MobilityParams {
            pause_time: 800.0,
            ..Default::default()
        };
        let mut streams = stream(1, "mobility");
        let script = generate_movement(&params, streams.stream("mobility")).unwrap();
        assert_eq!(script.initial.len(), 50);
        assert!(script.legs.values().all(|l| l.is_empty()));
    }

    #[test]
    fn pause_zero_legs_are_back_to_back() {
        let params = MobilityParams {
            node_count: 10,
            pause_time: 0.0,
            ..Default::default()
        };
        let mut streams = stream(2, "mobility");
        let script = generate_movement(&params, streams.stream("mobility")).unwrap();
        for (node, legs) in &script.legs {
            assert!(!legs.is_empty());
            let mut pos = script.initial[node];
            for w in legs.windows(2) {
                let arrival = w[0].arrival(&pos);
                assert_eq!(
                    w[1].depart, arrival,
                    "no idle gap between consecutive legs at pause 0"
                );
                pos = w[0].dest;
            }
        }
    }

    #[test]
    fn pause_gap_is_exact() {
        let params = MobilityParams {
            node_count: 8,
            pause_time: 100.0,
            ..Default::default()
        };
        let mut streams = stream(3, "mobility");
        let script = generate_movement(&params, streams.stream("mobility")).unwrap();
        for (node, legs) in &script.legs {
            let mut pos = script.initial[node];
            assert_eq!(legs[0].depart, 100.0);
            for w in legs.windows(2) {
                let arrival = w[0].arrival(&pos);
                assert_eq!(q6(w[1].depart - arrival), 100.0);
                pos = w[0].dest;
            }
        }
    }

    /// Oracle: direct statistics over the generated draws.
    #[test]
    fn speeds_uniform_on_open_closed_interval() {
        let params = MobilityParams {
            node_count: 50,
            pause_time: 0.0,
            min_speed: 0.1,
            max_speed: 20.0,
            duration: 20_000.0,
            ..Default::default()
        };
        let mut streams = stream(4, "mobility");
        let script = generate_movement(&params, streams.stream("mobility")).unwrap();
        let speeds: Vec<f64> = script
            .legs
            .values()
            .flat_map(|legs| legs.iter().map(|l| l.speed))
            .collect();
        assert!(speeds.len() >= 10_000, "want 10k speeds, got {}", speeds.len());
        assert!(speeds.iter().all(|&s| s > 0.0 && s <= 20.0));
        let n = speeds.len() as f64;
        let mean = speeds.iter().sum::<f64>() / n;
        let midpoint = (0.1 + 20.0) / 2.0;
        // Std dev of U(a,b) is (b-a)/sqrt(12); allow 3 standard errors.
        let se = (20.0 - 0.1) / 12f64.sqrt() / n.sqrt();
        assert!(
            (mean - midpoint).abs() <= 3.0 * se,
            "mean {mean} vs midpoint {midpoint} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn position_during_pause_is_held() {
        let mut script = MovementScript::default();
        let n = NodeId::Wireless(0);
        script.initial.insert(n, Position::new(100.0, 100.0));
        script.legs.insert(
            n,
            vec![Leg {
                depart: 50.0,
                dest: Position::new(200.0, 100.0),
                speed: 10.0,
            }],
        );
        for t in [0.0, 10.0, 49.999999] {
            assert_eq!(position_at(&script, n, t).unwrap(), Position::new(100.0, 100.0));
        }
    }

    #[test]
    fn position_linear_motion() {
        let mut script = MovementScript::default();
        let n = NodeId::Wireless(3);
        script.initial.insert(n, Position::new(0.0, 0.0));
        script.legs.insert(
            n,
            vec![Leg {
                depart: 0.0,
                dest: Position::new(100.0, 0.0),
                speed: 10.0,
            }],
        );
        assert_eq!(position_at(&script, n, 5.0).unwrap(), Position::new(50.0, 0.0));
        assert_eq!(position_at(&script, n, 10.0).unwrap(), Position::new(100.0, 0.0));
        assert_eq!(position_at(&script, n, 400.0).unwrap(), Position::new(100.0, 0.0));
    }

    #[test]
    fn unknown_node_rejected() {
        let script = MovementScript::default();
        assert!(position_at(&script, NodeId::Wireless(7), 0.0).is_err());
    }

    /// Oracle: exhaustive containment check over sampled (node, t) pairs.
    #[test]
    fn sampled_positions_stay_inside_area() {
        let params = MobilityParams {
            node_count: 20,
            pause_time: 20.0,
            ..Default::default()
        };
        let mut streams = stream(5, "mobility");
        let script = generate_movement(&params, streams.stream("mobility")).unwrap();
        let mut probe = Streams::new(99);
        let probe = probe.stream("probe");
        for _ in 0..1000 {
            let node = NodeId::Wireless(probe.index(20) as u16);
            let t = probe.range(0.0, 800.0);
            let p = position_at(&script, node, t).unwrap();
            assert!(params.area.contains(&p), "{node} at {t}: {p:?} out of area");
        }
    }

    #[test]
    fn traffic_peer_to_peer_when_fraction_zero() {
        let wireless: Vec<NodeId> = (0..50).map(NodeId::Wireless).collect();
        let wired: Vec<NodeId> = (0..10).map(NodeId::Wired).collect();
        let params = TrafficParams {
            source_count: 15,
            cross_domain_fraction: 0.0,
            ..Default::default()
        };
        let mut streams = stream(6, "traffic");
        let script =
            generate_traffic(&params, &wireless, &wired, streams.stream("traffic")).unwrap();
        assert_eq!(script.connections.len(), 15);
        let mut sources: Vec<NodeId> = script.connections.iter().map(|c| c.source).collect();
        sources.sort();
        sources.dedup();
        assert_eq!(sources.len(), 15, "sources are distinct");
        for c in &script.connections {
            assert!(matches!(c.dest, NodeId::Wireless(_)));
            assert_ne!(c.source, c.dest);
            assert!(c.start >= 0.0 && c.start < 30.0);
            assert_eq!(c.stop, 800.0);
        }
    }

    #[test]
    fn traffic_all_wired_when_fraction_one() {
        let wireless: Vec<NodeId> = (0..50).map(NodeId::Wireless).collect();
        let wired: Vec<NodeId> = (0..10).map(NodeId::Wired).collect();
        let params = TrafficParams {
            source_count: 25,
            cross_domain_fraction: 1.0,
            ..Default::default()
        };
        let mut streams = stream(7, "traffic");
        let script =
            generate_traffic(&params, &wireless, &wired, streams.stream("traffic")).unwrap();
        assert!(script.connections.iter().all(|c| matches!(c.dest, NodeId::Wired(_))));
    }

    /// Oracle: count destinations in the generated script.
    #[test]
    fn traffic_cross_domain_count_rounds() {
        let wireless: Vec<NodeId> = (0..50).map(NodeId::Wireless).collect();
        let wired: Vec<NodeId> = (0..10).map(NodeId::Wired).collect();
        let params = TrafficParams {
            source_count: 25,
            cross_domain_fraction: 0.48,
            ..Default::default()
        };
        let mut streams = stream(8, "traffic");
        let script =
            generate_traffic(&params, &wireless, &wired, streams.stream("traffic")).unwrap();
        let cross = script
            .connections
            .iter()
            .filter(|c| matches!(c.dest, NodeId::Wired(_)))
            .count();
        assert_eq!(cross, 12, "round(0.48 * 25) = 12 cross-domain connections");
    }

    #[test]
    fn empty_script_roundtrips_as_header_only() {
        let script = MovementScript::default();
        let text = write_movement(&script);
        assert_eq!(text, format!("{MOVEMENT_HEADER}\n"));
        assert_eq!(parse_movement(&text).unwrap(), script);

        let traffic = TrafficScript::default();
        let text = write_traffic(&traffic);
        assert_eq!(text, format!("{TRAFFIC_HEADER}\n"));
        assert_eq!(parse_traffic(&text).unwrap(), traffic);
    }

    #[test]
    fn negative_speed_names_the_line() {
        let text = format!(
            "{MOVEMENT_HEADER}\ninit w0 1 2\nleg w0 0.5 3 4 -3\n"
        );
        match parse_movement(&text) {
            Err(ScenarioError::ParseError { line, reason }) => {
                assert_eq!(line, 3);
                assert!(reason.contains("speed"), "reason: {reason}");
            }
            other => panic!("expected ParseError, got {other:?}"),
        }
    }

    #[test]
    fn identical_seed_identical_script_distinct_seeds_differ() {
        let params = MobilityParams::default();
        let gen = |seed: u64| {
            let mut s = Streams::new(seed);
            generate_movement(&params, s.stream("mobility")).unwrap()
        };
        assert_eq!(gen(42), gen(42));
        let base = gen(0);
        let distinct = (1..=10).filter(|&s| gen(s) != base).count();
        assert_eq!(distinct, 10, "distinct seeds give distinct scripts");
    }

    proptest! {
        #[test]
        fn movement_roundtrip(seed in 0u64..500, nodes in 0u16..8, pause in 0.0f64..300.0) {
            let params = MobilityParams {
                node_count: nodes,
                pause_time: pause,
                duration: 400.0,
                ..Default::default()
            };
            let mut s = Streams::new(seed);
            let script = generate_movement(&params, s.stream("mobility")).unwrap();
            prop_assert_eq!(parse_movement(&write_movement(&script)).unwrap(), script);
        }

        #[test]
        fn traffic_roundtrip(seed in 0u64..500, n in 1u16..25, frac in 0.0f64..1.0) {
            let wireless: Vec<NodeId> = (0..50).map(NodeId::Wireless).collect();
            let wired: Vec<NodeId> = (0..10).map(NodeId::Wired).collect();
            let params = TrafficParams {
                source_count: n,
                cross_domain_fraction: frac,
                ..Default::default()
            };
            let mut s = Streams::new(seed);
            let script = generate_traffic(&params, &wireless, &wired, s.stream("traffic")).unwrap();
            prop_assert_eq!(parse_traffic(&write_traffic(&script)).unwrap(), script);
        }
    }
}
