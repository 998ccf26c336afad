//! Trace collection and the three run metrics: packet delivery fraction,
//! average end-to-end delay, normalized routing load.
//!
//! The trace is an append-only event log owned by the run; metric
//! computation is a pure post-pass over a finished trace. Delivery and
//! delay cover CBR data packets only; NRL counts hop-wise transmissions
//! of routing control packets per delivered data packet.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::engine::SimTime;
use crate::format_num;
use crate::ids::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DropReason {
    QueueFull,
    BufferTimeout,
    BufferFull,
    NoRoute,
    LinkBreakExhausted,
    TtlExceeded,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DropReason::QueueFull => "queue-full",
            DropReason::BufferTimeout => "buffer-timeout",
            DropReason::BufferFull => "buffer-full",
            DropReason::NoRoute => "no-route",
            DropReason::LinkBreakExhausted => "link-break",
            DropReason::TtlExceeded => "ttl-exceeded",
        };
        f.write_str(s)
    }
}

impl FromStr for DropReason {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "queue-full" => Ok(DropReason::QueueFull),
            "buffer-timeout" => Ok(DropReason::BufferTimeout),
            "buffer-full" => Ok(DropReason::BufferFull),
            "no-route" => Ok(DropReason::NoRoute),
            "link-break" => Ok(DropReason::LinkBreakExhausted),
            "ttl-exceeded" => Ok(DropReason::TtlExceeded),
            other => Err(format!("unknown drop reason {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopClass {
    RoutingControl,
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Generated,
    Sent,
    HopTx(HopClass),
    Delivered,
    Dropped(DropReason),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub at: SimTime,
    pub kind: TraceKind,
    pub pkt_uid: u64,
    pub node: NodeId,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn push(&mut self, at: SimTime, kind: TraceKind, pkt_uid: u64, node: NodeId) {
        self.events.push(TraceEvent {
            at,
            kind,
            pkt_uid,
            node,
        });
    }

    pub fn write_to_string(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let kind = match e.kind {
                TraceKind::Generated => "generated".to_string(),
                TraceKind::Sent => "sent".to_string(),
                TraceKind::HopTx(HopClass::RoutingControl) => "hoptx-routing".to_string(),
                TraceKind::HopTx(HopClass::Data) => "hoptx-data".to_string(),
                TraceKind::Delivered => "delivered".to_string(),
                TraceKind::Dropped(r) => format!("dropped {r}"),
            };
            out.push_str(&format!(
                "{} {} {} {}\n",
                format_num(e.at.as_secs_f64()),
                kind,
                e.pkt_uid,
                e.node
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Trace, MetricsError> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(' ').collect();
            let bad = |reason: String| MetricsError::TraceParse {
                line: lineno,
                reason,
            };
            let (at, kind, uid, node) = match fields.as_slice() {
                [t, k, uid, node] => (*t, (*k, None), *uid, *node),
                [t, "dropped", reason, uid, node] => (*t, ("dropped", Some(*reason)), *uid, *node),
                _ => return Err(bad(format!("unrecognized line {line:?}"))),
            };
            let at: f64 = at
                .parse()
                .map_err(|_| bad(format!("bad timestamp {at:?}")))?;
            let kind = match kind {
                ("generated", None) => TraceKind::Generated,
                ("sent", None) => TraceKind::Sent,
                ("hoptx-routing", None) => TraceKind::HopTx(HopClass::RoutingControl),
                ("hoptx-data", None) => TraceKind::HopTx(HopClass::Data),
                ("delivered", None) => TraceKind::Delivered,
                ("dropped", Some(r)) => TraceKind::Dropped(r.parse().map_err(bad)?),
                (k, _) => return Err(bad(format!("unknown event kind {k:?}"))),
            };
            let uid: u64 = uid.parse().map_err(|_| bad(format!("bad uid {uid:?}")))?;
            let node: NodeId = node
                .parse()
                .map_err(|_| bad(format!("bad node id {node:?}")))?;
            events.push(TraceEvent {
                at: SimTime::from_secs_f64(at),
                kind,
                pkt_uid: uid,
                node,
            });
        }
        Ok(Trace { events })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("no CBR data packets were generated")]
    ZeroGenerated,
    #[error("trace line {line}: {reason}")]
    TraceParse { line: usize, reason: String },
}

/// Per-run metric bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub generated: u64,
    pub delivered: u64,
    pub pdf: f64,
    /// Mean end-to-end delay over delivered data packets, seconds. Absent
    /// when nothing was delivered.
    pub avg_delay: Option<f64>,
    /// Hop-wise routing control transmissions.
    pub routing_tx: u64,
    /// routing_tx / delivered; absent when nothing was delivered.
    pub nrl: Option<f64>,
    pub drops_by_reason: BTreeMap<DropReason, u64>,
}

fn metric_uids(trace: &Trace, warmup: SimTime) -> BTreeMap<u64, SimTime> {
    // Data packets counted for metrics: generated at or after warm-up end.
    trace
        .events
        .iter()
        .filter(|e| e.kind == TraceKind::Generated && e.at >= warmup)
        .map(|e| (e.pkt_uid, e.at))
        .collect()
}

pub fn compute_pdf(trace: &Trace) -> Result<f64, MetricsError> {
    compute_pdf_with_warmup(trace, SimTime::ZERO)
}

pub fn compute_pdf_with_warmup(trace: &Trace, warmup: SimTime) -> Result<f64, MetricsError> {
    let generated = metric_uids(trace, warmup);
    if generated.is_empty() {
        return Err(MetricsError::ZeroGenerated);
    }
    let delivered = trace
        .events
        .iter()
        .filter(|e| e.kind == TraceKind::Delivered && generated.contains_key(&e.pkt_uid))
        .count();
    Ok(delivered as f64 / generated.len() as f64)
}

pub fn compute_avg_delay(trace: &Trace) -> Option<f64> {
    compute_avg_delay_with_warmup(trace, SimTime::ZERO)
}

pub fn compute_avg_delay_with_warmup(trace: &Trace, warmup: SimTime) -> Option<f64> {
    let generated = metric_uids(trace, warmup);
    let mut sum = 0.0;
    let mut count = 0u64;
    for e in &trace.events {
        if e.kind == TraceKind::Delivered {
            if let Some(&gen_at) = generated.get(&e.pkt_uid) {
                sum += e.at.saturating_sub(gen_at).as_secs_f64();
                count += 1;
            }
        }
    }
    (count > 0).then(|| sum / count as f64)
}

pub fn compute_nrl(trace: &Trace) -> Option<f64> {
    compute_nrl_with_warmup(trace, SimTime::ZERO)
}

pub fn compute_nrl_with_warmup(trace: &Trace, warmup: SimTime) -> Option<f64> {
    let generated = metric_uids(trace, warmup);
    let delivered = trace
        .events
        .iter()
        .filter(|e| e.kind == TraceKind::Delivered && generated.contains_key(&e.pkt_uid))
        .count() as u64;
    if delivered == 0 {
        return None;
    }
    let routing_tx = trace
        .events
        .iter()
        .filter(|e| e.kind == TraceKind::HopTx(HopClass::RoutingControl) && e.at >= warmup)
        .count() as u64;
    Some(routing_tx as f64 / delivered as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConservationViolation {
    pub pkt_uid: u64,
    pub detail: String,
}

/// Every generated data packet must be accounted exactly once: delivered,
/// finally dropped, or still in flight at run end.
pub fn conservation_check(trace: &Trace) -> Result<(), Vec<ConservationViolation>> {
    #[derive(Default)]
    struct Counts {
        generated: u32,
        delivered: u32,
        dropped: u32,
    }
    let mut per_uid: BTreeMap<u64, Counts> = BTreeMap::new();
    for e in &trace.events {
        let c = per_uid.entry(e.pkt_uid).or_default();
        match e.kind {
            TraceKind::Generated => c.generated += 1,
            TraceKind::Delivered => c.delivered += 1,
            TraceKind::Dropped(_) => c.dropped += 1,
            _ => {}
        }
    }
    let mut violations = Vec::new();
    for (uid, c) in &per_uid {
        if c.generated == 0 {
            if c.delivered > 0 || c.dropped > 0 {
                // Control packets never carry Generated/Delivered/Dropped
                // events, so any terminal without a Generated is a bug.
                violations.push(ConservationViolation {
                    pkt_uid: *uid,
                    detail: format!(
                        "terminal events without generation (delivered {}, dropped {})",
                        c.delivered, c.dropped
                    ),
                });
            }
            continue;
        }
        if c.generated > 1 {
            violations.push(ConservationViolation {
                pkt_uid: *uid,
                detail: format!("generated {} times", c.generated),
            });
        }
        if c.delivered + c.dropped > 1 {
            violations.push(ConservationViolation {
                pkt_uid: *uid,
                detail: format!(
                    "{} terminal events (delivered {}, dropped {})",
                    c.delivered + c.dropped,
                    c.delivered,
                    c.dropped
                ),
            });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

pub fn run_report(trace: &Trace, warmup: SimTime) -> RunReport {
    let generated = metric_uids(trace, warmup);
    let mut delivered = 0u64;
    let mut delay_sum = 0.0;
    let mut routing_tx = 0u64;
    let mut drops: BTreeMap<DropReason, u64> = BTreeMap::new();
    for e in &trace.events {
        match e.kind {
            TraceKind::Delivered => {
                if let Some(&gen_at) = generated.get(&e.pkt_uid) {
                    delivered += 1;
                    delay_sum += e.at.saturating_sub(gen_at).as_secs_f64();
                }
            }
            TraceKind::HopTx(HopClass::RoutingControl) => {
                if e.at >= warmup {
                    routing_tx += 1;
                }
            }
            TraceKind::Dropped(reason) => {
                if generated.contains_key(&e.pkt_uid) {
                    *drops.entry(reason).or_insert(0) += 1;
                }
            }
            _ => {}
        }
    }
    let generated = generated.len() as u64;
    RunReport {
        generated,
        delivered,
        pdf: if generated > 0 {
            delivered as f64 / generated as f64
        } else {
            0.0
        },
        avg_delay: (delivered > 0).then(|| delay_sum / delivered as f64),
        routing_tx,
        nrl: (delivered > 0).then(|| routing_tx as f64 / delivered as f64),
        drops_by_reason: drops,
    }
}
