//! DSDV routing agent: sequence-numbered distance-vector table, periodic
//! full-dump/incremental advertisements, triggered updates, and
//! broken-link (odd sequence, infinite metric) handling.
//!
//! Destination-originated sequence numbers are even; a node that detects a
//! broken link advertises the affected destinations with an infinite
//! metric and the next (odd) sequence number. Fresher sequence numbers
//! always win; at equal sequence the smaller hop count wins.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::ids::NodeId;

/// Hop-count metric. `Infinite` marks a broken route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    Finite(u32),
    Infinite,
}

impl Metric {
    pub fn is_finite(&self) -> bool {
        matches!(self, Metric::Finite(_))
    }

    fn bump(&self) -> Metric {
        match self {
            Metric::Finite(h) => Metric::Finite(h + 1),
            Metric::Infinite => Metric::Infinite,
        }
    }
}

/// One destination's routing record.
#[derive(Debug, Clone, PartialEq)]
pub struct DsdvEntry {
    pub dest: NodeId,
    pub next_hop: NodeId,
    pub hop_count: Metric,
    pub seq: u64,
    pub installed_at: SimTime,
    pub changed_since_full_dump: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateKind {
    FullDump,
    Incremental,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdvertisedEntry {
    pub dest: NodeId,
    pub hop_count: Metric,
    pub seq: u64,
}

/// A routing advertisement, broadcast to immediate neighbors as a single
/// control packet.
#[derive(Debug, Clone, PartialEq)]
pub struct DsdvUpdateMsg {
    pub sender: NodeId,
    pub kind: UpdateKind,
    pub entries: Vec<AdvertisedEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DsdvConfig {
    /// Periodic advertisement interval, seconds. Each node offsets its
    /// timer by a uniform phase in [0, interval).
    pub periodic_interval: f64,
    /// Every Nth periodic advertisement is a full dump.
    pub full_dump_period: u64,
    /// An incremental that would exceed this many entries is promoted to
    /// a full dump (the single-NPDU rule).
    pub npdu_capacity: usize,
    /// Minimum spacing between triggered advertisements per node, seconds.
    /// Changes accumulate and flush together.
    pub triggered_damping: f64,
}

impl Default for DsdvConfig {
    fn default() -> Self {
        DsdvConfig {
            periodic_interval: 15.0,
            full_dump_period: 3,
            npdu_capacity: 100,
            triggered_damping: 1.0,
        }
    }
}

#[derive(Debug)]
pub struct DsdvAgent {
    me: NodeId,
    pub cfg: DsdvConfig,
    table: BTreeMap<NodeId, DsdvEntry>,
    own_seq: u64,
    advert_round: u64,
    /// Destinations with changes awaiting a triggered advertisement.
    pending_trigger: BTreeSet<NodeId>,
    pub last_triggered_at: Option<SimTime>,
    pub flush_scheduled: bool,
    pub stale_discarded: u64,
}

impl DsdvAgent {
    pub fn new(me: NodeId, cfg: DsdvConfig) -> DsdvAgent {
        let mut table = BTreeMap::new();
        table.insert(
            me,
            DsdvEntry {
                dest: me,
                next_hop: me,
                hop_count: Metric::Finite(0),
                seq: 0,
                installed_at: SimTime::ZERO,
                changed_since_full_dump: true,
            },
        );
        DsdvAgent {
            me,
            cfg,
            table,
            own_seq: 0,
            advert_round: 0,
            pending_trigger: BTreeSet::new(),
            last_triggered_at: None,
            flush_scheduled: false,
            stale_discarded: 0,
        }
    }

    pub fn me(&self) -> NodeId {
        self.me
    }

    pub fn own_seq(&self) -> u64 {
        self.own_seq
    }

    pub fn table(&self) -> &BTreeMap<NodeId, DsdvEntry> {
        &self.table
    }

    /// Route lookup. `None` means no finite-metric entry: the data plane
    /// drops the packet (DSDV has no send buffer).
    pub fn next_hop(&self, dest: NodeId) -> Option<NodeId> {
        if dest == self.me {
            return Some(self.me);
        }
        match self.table.get(&dest) {
            Some(e) if e.hop_count.is_finite() => Some(e.next_hop),
            _ => None,
        }
    }

    /// Periodic advertisement: bump own sequence by 2, emit a full dump on
    /// schedule (or when the changed set would not fit one NPDU), else an
    /// incremental of the entries changed since the last full dump.
    pub fn periodic_advertise(&mut self, now: SimTime) -> DsdvUpdateMsg {
        self.own_seq += 2;
        let me = self.me;
        let own = self.table.get_mut(&me).expect("own entry");
        own.seq = self.own_seq;
        own.installed_at = now;
        own.changed_since_full_dump = true;

        let changed = self
            .table
            .values()
            .filter(|e| e.changed_since_full_dump)
            .count();
        let full = self.advert_round % self.cfg.full_dump_period == 0 || changed > self.cfg.npdu_capacity;
        self.advert_round += 1;

        let entries: Vec<AdvertisedEntry> = self
            .table
            .values()
            .filter(|e| full || e.changed_since_full_dump)
            .map(|e| AdvertisedEntry {
                dest: e.dest,
                hop_count: e.hop_count,
                seq: e.seq,
            })
            .collect();
        if full {
            for e in self.table.values_mut() {
                e.changed_since_full_dump = false;
            }
        }
        // Either kind advertises everything pending, so the triggered
        // backlog is clear.
        self.pending_trigger.clear();
        DsdvUpdateMsg {
            sender: self.me,
            kind: if full {
                UpdateKind::FullDump
            } else {
                UpdateKind::Incremental
            },
            entries,
        }
    }

    /// Apply a received advertisement. Returns true when an adoption
    /// warrants a triggered advertisement: a brand-new destination, a
    /// route going infinite, or an infinite route recovering to a finite
    /// metric. Finite-to-finite metric drift and next-hop swaps ride the
    /// periodic updates instead; without settling-time damping they flap
    /// on every advertisement round and would flood the channel.
    pub fn handle_update(&mut self, msg: &DsdvUpdateMsg, now: SimTime) -> bool {
        let mut trigger = false;
        for adv in &msg.entries {
            if adv.dest == self.me {
                // Own entry is authoritative; the next periodic bump
                // supersedes any broken-link advertisement about us.
                continue;
            }
            debug_assert_eq!(
                adv.seq % 2 == 1,
                adv.hop_count == Metric::Infinite,
                "advertised parity/metric mismatch"
            );
            let new_metric = adv.hop_count.bump();
            let adopt = match self.table.get(&adv.dest) {
                None => true,
                Some(cur) => {
                    adv.seq > cur.seq || (adv.seq == cur.seq && new_metric < cur.hop_count)
                }
            };
            if !adopt {
                self.stale_discarded += 1;
                continue;
            }
            let material = match self.table.get(&adv.dest) {
                None => true,
                Some(cur) => cur.hop_count.is_finite() != new_metric.is_finite(),
            };
            self.table.insert(
                adv.dest,
                DsdvEntry {
                    dest: adv.dest,
                    next_hop: msg.sender,
                    hop_count: new_metric,
                    seq: adv.seq,
                    installed_at: now,
                    changed_since_full_dump: true,
                },
            );
            if material {
                self.pending_trigger.insert(adv.dest);
                trigger = true;
            }
        }
        trigger
    }

    /// A neighbor became unreachable: every route through it gets an
    /// infinite metric and the next odd sequence number. Returns true when
    /// a triggered advertisement should be scheduled.
    pub fn on_link_break(&mut self, lost_neighbor: NodeId, now: SimTime) -> bool {
        let mut any = false;
        for e in self.table.values_mut() {
            if e.dest != self.me && e.next_hop == lost_neighbor && e.hop_count.is_finite() {
                e.hop_count = Metric::Infinite;
                e.seq += 1; // odd
                e.installed_at = now;
                e.changed_since_full_dump = true;
                self.pending_trigger.insert(e.dest);
                any = true;
            }
        }
        any
    }

    /// Drain the pending triggered changes into an advertisement, if any.
    /// Called by the runtime when the damped flush timer fires.
    pub fn take_triggered(&mut self, now: SimTime) -> Option<DsdvUpdateMsg> {
        self.flush_scheduled = false;
        if self.pending_trigger.is_empty() {
            return None;
        }
        let entries: Vec<AdvertisedEntry> = self
            .pending_trigger
            .iter()
            .filter_map(|dest| self.table.get(dest))
            .map(|e| AdvertisedEntry {
                dest: e.dest,
                hop_count: e.hop_count,
                seq: e.seq,
            })
            .collect();
        self.pending_trigger.clear();
        self.last_triggered_at = Some(now);
        Some(DsdvUpdateMsg {
            sender: self.me,
            kind: UpdateKind::Incremental,
            entries,
        })
    }

    /// Earliest time a triggered flush may run, honoring the damping floor.
    pub fn flush_time(&self, now: SimTime) -> SimTime {
        match self.last_triggered_at {
            Some(last) => {
                let earliest = last + SimTime::from_secs_f64(self.cfg.triggered_damping);
                earliest.max(now)
            }
            None => now,
        }
    }

    /// Invariant check: even own sequence, and seq parity matching metric
    /// finiteness for every entry.
    pub fn check_parity_invariants(&self) -> Result<(), String> {
        if self.own_seq % 2 != 0 {
            return Err(format!("{}: own seq {} is odd", self.me, self.own_seq));
        }
        for e in self.table.values() {
            let finite = e.hop_count.is_finite();
            if finite != (e.seq % 2 == 0) {
                return Err(format!(
                    "{}: entry for {} has seq {} with metric {:?}",
                    self.me, e.dest, e.seq, e.hop_count
                ));
            }
        }
        Ok(())
    }
}
