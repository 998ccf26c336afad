//! Deterministic discrete-event simulator for hybrid wired/wireless ad
//! hoc networks, with DSDV and DSR routing agents and an experiment
//! harness for comparative protocol studies.
//!
//! The crate is organized around the run pipeline:
//!
//! - [`engine`]: virtual clock, event queue, labelled random streams
//! - [`scenario`]: random-waypoint movement and CBR traffic scripts
//! - [`netstack`]: packets, priority interface queue, abstract MAC model
//! - [`dsdv`] / [`dsr`]: the two routing agents
//! - [`hybrid`]: wired domain and the base-station gateway
//! - [`metrics`]: trace events, PDF / delay / NRL, conservation checks
//! - [`runtime`]: per-run event wiring
//! - [`harness`]: run configuration, sweeps, CSV output

pub mod dsdv;
pub mod dsr;
pub mod engine;
pub mod harness;
pub mod hybrid;
pub mod ids;
pub mod metrics;
pub mod netstack;
pub mod runtime;
pub mod scenario;

/// Decimal formatting shared by every text format: up to 6 fractional
/// digits, trailing zeros trimmed.
pub fn format_num(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Seconds formatting for display contexts.
pub fn format_seconds(v: f64) -> String {
    format_num(v)
}

/// FNV-1a 64-bit, used to fingerprint scenario files.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
