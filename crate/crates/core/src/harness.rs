//! Experiment orchestration: run configuration, the sweep matrix
//! (protocol x sources x pause time x seed), aggregation and CSV output.
//!
//! A sweep reuses the same movement and traffic scripts across protocols
//! at equal (pause, sources, seed) by construction: scenario generation
//! draws only from the protocol-independent "mobility" and "traffic"
//! streams.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::dsdv::DsdvConfig;
use crate::dsr::DsrConfig;
use crate::hybrid::{WiredLink, WiredTopology};
use crate::metrics::{conservation_check, ConservationViolation, RunReport};
use crate::netstack::LinkModel;
use crate::runtime::Sim;
use crate::scenario::{
    self, MobilityParams, MovementScript, Position, TrafficParams, TrafficScript,
};
use crate::{fnv1a, format_num};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Dsdv,
    Dsr,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::Dsdv => f.write_str("dsdv"),
            Protocol::Dsr => f.write_str("dsr"),
        }
    }
}

impl FromStr for Protocol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dsdv" => Ok(Protocol::Dsdv),
            "dsr" => Ok(Protocol::Dsr),
            other => Err(format!("unknown protocol {other:?} (expected dsdv or dsr)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config error at {field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
}

fn default_wired_links() -> Vec<WiredLink> {
    WiredTopology::star(10).links().to_vec()
}

/// One run's full configuration. Defaults reproduce the reference
/// experiment: 50 mobile nodes and a 10-host wired domain on an
/// 800 m x 500 m field, 512-byte CBR at 4 packets/s, 800 s duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub protocol: Protocol,
    pub mobility: MobilityParams,
    pub traffic: TrafficParams,
    pub link: LinkModel,
    pub dsdv: DsdvConfig,
    pub dsr: DsrConfig,
    pub wired: Vec<WiredLink>,
    pub wired_node_count: u16,
    pub base_station_position: Position,
    pub iface_queue_capacity: usize,
    pub duration: f64,
    pub seed: u64,
    pub warmup_seconds: f64,
    /// Optional scenario files to load instead of generating.
    pub movement_file: Option<String>,
    pub traffic_file: Option<String>,
    #[serde(skip)]
    pub movement_script: Option<MovementScript>,
    #[serde(skip)]
    pub traffic_script: Option<TrafficScript>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            protocol: Protocol::Dsdv,
            mobility: MobilityParams::default(),
            traffic: TrafficParams::default(),
            link: LinkModel::default(),
            dsdv: DsdvConfig::default(),
            dsr: DsrConfig::default(),
            wired: default_wired_links(),
            wired_node_count: 10,
            base_station_position: Position::new(400.0, 250.0),
            iface_queue_capacity: 50,
            duration: 800.0,
            seed: 1,
            warmup_seconds: 0.0,
            movement_file: None,
            traffic_file: None,
            movement_script: None,
            traffic_script: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::new("config", e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn err(field: &str, message: impl Into<String>) -> ConfigError {
            ConfigError::new(field, message.into())
        }
        if !self.duration.is_finite() || self.duration < 0.0 {
            return Err(err("duration", "must be finite and nonnegative"));
        }
        if self.warmup_seconds < 0.0 || self.warmup_seconds > self.duration {
            return Err(err("warmup_seconds", "must lie in [0, duration]"));
        }
        self.link.validate().map_err(|m| err("link", m))?;
        if self.traffic.source_count > self.mobility.node_count {
            return Err(err(
                "traffic.source_count",
                format!(
                    "{} exceeds mobility.node_count {}",
                    self.traffic.source_count, self.mobility.node_count
                ),
            ));
        }
        if self.dsdv.periodic_interval <= 0.0 || self.dsdv.full_dump_period == 0 {
            return Err(err("dsdv", "periodic_interval and full_dump_period must be positive"));
        }
        if self.dsdv.triggered_damping < 0.0 {
            return Err(err("dsdv.triggered_damping", "must be nonnegative"));
        }
        if self.dsr.send_buffer_capacity == 0
            || self.dsr.cache_capacity == 0
            || self.dsr.sweep_interval <= 0.0
            || self.dsr.backoff_base <= 0.0
        {
            return Err(err("dsr", "capacities and timers must be positive"));
        }
        if self.iface_queue_capacity == 0 {
            return Err(err("iface_queue_capacity", "must be positive"));
        }
        if !self.mobility.area.contains(&self.base_station_position) {
            return Err(err(
                "base_station_position",
                "must lie inside the simulation area",
            ));
        }
        Ok(())
    }

    /// Resolve `movement_file` / `traffic_file` into loaded scripts.
    pub fn load_scripts(&mut self) -> Result<(), HarnessError> {
        if let (Some(path), None) = (&self.movement_file, &self.movement_script) {
            let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
                path: path.clone(),
                source,
            })?;
            self.movement_script = Some(scenario::parse_movement(&text)?);
        }
        if let (Some(path), None) = (&self.traffic_file, &self.traffic_script) {
            let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
                path: path.clone(),
                source,
            })?;
            self.traffic_script = Some(scenario::parse_traffic(&text)?);
        }
        Ok(())
    }
}

/// Everything observable from one run, beyond the metric bundle.
#[derive(Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub movement_text: String,
    pub traffic_text: String,
    pub conservation: Result<(), Vec<ConservationViolation>>,
    pub trace_text: Option<String>,
    pub wall: std::time::Duration,
}

pub fn run_experiment(cfg: &RunConfig) -> Result<RunReport, HarnessError> {
    Ok(run_experiment_full(cfg, false)?.report)
}

pub fn run_experiment_full(cfg: &RunConfig, want_trace: bool) -> Result<RunOutput, HarnessError> {
    let mut cfg = cfg.clone();
    cfg.load_scripts()?;
    let started = std::time::Instant::now();
    let mut sim = Sim::new(cfg)?;
    let report = sim.run();
    let wall = started.elapsed();
    Ok(RunOutput {
        report,
        movement_text: scenario::write_movement(sim.movement()),
        traffic_text: scenario::write_traffic(sim.traffic()),
        conservation: conservation_check(sim.trace()),
        trace_text: want_trace.then(|| sim.trace().write_to_string()),
        wall,
    })
}

pub const PAPER_PAUSE_TIMES: [f64; 9] =
    [0.0, 100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub pause_times: Vec<f64>,
    pub source_counts: Vec<u16>,
    pub seeds: Vec<u64>,
    pub protocols: Vec<Protocol>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            base: RunConfig::default(),
            pause_times: PAPER_PAUSE_TIMES.to_vec(),
            source_counts: vec![15, 25],
            seeds: (1..=10).collect(),
            protocols: vec![Protocol::Dsdv, Protocol::Dsr],
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
struct SweepAxes {
    pause_times: Option<Vec<f64>>,
    source_counts: Option<Vec<u16>>,
    seeds: Option<Vec<u64>>,
    protocols: Option<Vec<Protocol>>,
}

impl SweepSpec {
    /// Parse a sweep spec from a config file: the RunConfig fields plus
    /// optional top-level `pause_times` / `source_counts` / `seeds` /
    /// `protocols` arrays.
    pub fn from_toml(text: &str) -> Result<SweepSpec, ConfigError> {
        let base = RunConfig::from_toml(text)?;
        let axes: SweepAxes =
            toml::from_str(text).map_err(|e| ConfigError::new("sweep", e.to_string()))?;
        let mut spec = SweepSpec {
            base,
            ..Default::default()
        };
        if let Some(p) = axes.pause_times {
            spec.pause_times = p;
        }
        if let Some(s) = axes.source_counts {
            spec.source_counts = s;
        }
        if let Some(s) = axes.seeds {
            spec.seeds = s;
        }
        if let Some(p) = axes.protocols {
            spec.protocols = p;
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.pause_times.is_empty()
            || self.source_counts.is_empty()
            || self.seeds.is_empty()
            || self.protocols.is_empty()
        {
            return Err(ConfigError::new("sweep", "every axis must be non-empty"));
        }
        self.base.validate()
    }

    pub fn run_count(&self) -> usize {
        self.protocols.len() * self.source_counts.len() * self.pause_times.len() * self.seeds.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub protocol: Protocol,
    pub sources: u16,
    pub pause_time: f64,
    pub seed: u64,
    pub report: RunReport,
    pub conservation_ok: bool,
    pub movement_hash: u64,
    pub traffic_hash: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub protocol: Protocol,
    pub sources: u16,
    pub pause_time: f64,
    pub generated: f64,
    pub delivered: f64,
    pub pdf: f64,
    pub avg_delay: Option<f64>,
    pub routing_tx: f64,
    pub nrl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<AggregateRow>,
}

impl SweepOutput {
    pub fn aggregate(
        &self,
        protocol: Protocol,
        sources: u16,
        pause_time: f64,
    ) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|a| a.protocol == protocol && a.sources == sources && a.pause_time == pause_time)
    }
}

/// Execute the full Cartesian product. `parallel` bounds the number of
/// concurrently executing (fully independent) runs; results are ordered
/// by (protocol, sources, pause, seed) regardless of completion order.
pub fn sweep(spec: &SweepSpec, parallel: usize) -> Result<SweepOutput, HarnessError> {
    spec.validate()?;
    let mut jobs = Vec::with_capacity(spec.run_count());
    for &protocol in &spec.protocols {
        for &sources in &spec.source_counts {
            for &pause in &spec.pause_times {
                for &seed in &spec.seeds {
                    let mut cfg = spec.base.clone();
                    cfg.protocol = protocol;
                    cfg.traffic.source_count = sources;
                    cfg.mobility.pause_time = pause;
                    cfg.seed = seed;
                    jobs.push((protocol, sources, pause, seed, cfg));
                }
            }
        }
    }

    let execute = |job: &(Protocol, u16, f64, u64, RunConfig)| -> Result<SweepRow, HarnessError> {
        let (protocol, sources, pause, seed, cfg) = job;
        let out = run_experiment_full(cfg, false)?;
        Ok(SweepRow {
            protocol: *protocol,
            sources: *sources,
            pause_time: *pause,
            seed: *seed,
            report: out.report,
            conservation_ok: out.conservation.is_ok(),
            movement_hash: fnv1a(out.movement_text.as_bytes()),
            traffic_hash: fnv1a(out.traffic_text.as_bytes()),
        })
    };

    let rows: Vec<SweepRow> = if parallel <= 1 || jobs.len() <= 1 {
        jobs.iter().map(execute).collect::<Result<_, _>>()?
    } else {
        let threads = parallel.min(jobs.len());
        let slots: Vec<Mutex<Option<Result<SweepRow, HarnessError>>>> =
            jobs.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= jobs.len() {
                        break;
                    }
                    let result = execute(&jobs[i]);
                    *slots[i].lock().expect("slot") = Some(result);
                });
            }
        });
        let mut rows = Vec::with_capacity(jobs.len());
        for slot in slots {
            rows.push(slot.into_inner().expect("slot")  .expect("every job ran")?);
        }
        rows
    };

    let aggregates = aggregate_rows(&rows);
    Ok(SweepOutput { rows, aggregates })
}

fn aggregate_rows(rows: &[SweepRow]) -> Vec<AggregateRow> {
    let mut groups: Vec<(Protocol, u16, f64)> = Vec::new();
    for r in rows {
        let key = (r.protocol, r.sources, r.pause_time);
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    groups
        .into_iter()
        .map(|(protocol, sources, pause_time)| {
            let members: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| {
                    r.protocol == protocol && r.sources == sources && r.pause_time == pause_time
                })
                .collect();
            let n = members.len() as f64;
            let mean = |f: &dyn Fn(&SweepRow) -> f64| members.iter().map(|r| f(r)).sum::<f64>() / n;
            let opt_mean = |f: &dyn Fn(&SweepRow) -> Option<f64>| {
                let vals: Vec<f64> = members.iter().filter_map(|r| f(r)).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            };
            AggregateRow {
                protocol,
                sources,
                pause_time,
                generated: mean(&|r| r.report.generated as f64),
                delivered: mean(&|r| r.report.delivered as f64),
                pdf: mean(&|r| r.report.pdf),
                avg_delay: opt_mean(&|r| r.report.avg_delay),
                routing_tx: mean(&|r| r.report.routing_tx as f64),
                nrl: opt_mean(&|r| r.report.nrl),
            }
        })
        .collect()
}

pub const CSV_HEADER: &str =
    "protocol,sources,pause_time,seed,generated,delivered,pdf,avg_delay_ms,routing_tx,nrl";

fn fmt_opt6(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Render the sweep as CSV: one line per run, then one `seed=mean` line
/// per aggregate group. Fractional values carry 6 decimal digits.
pub fn emit_csv(out: &SweepOutput) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &out.rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{:.6},{},{},{}\n",
            r.protocol,
            r.sources,
            format_num(r.pause_time),
            r.seed,
            r.report.generated,
            r.report.delivered,
            r.report.pdf,
            fmt_opt6(r.report.avg_delay.map(|d| d * 1000.0)),
            r.report.routing_tx,
            fmt_opt6(r.report.nrl),
        ));
    }
    for a in &out.aggregates {
        s.push_str(&format!(
            "{},{},{},mean,{:.6},{:.6},{:.6},{},{:.6},{}\n",
            a.protocol,
            a.sources,
            format_num(a.pause_time),
            a.generated,
            a.delivered,
            a.pdf,
            fmt_opt6(a.avg_delay.map(|d| d * 1000.0)),
            a.routing_tx,
            fmt_opt6(a.nrl),
        ));
    }
    s
}

/// Parse an emitted CSV back into raw field rows (header checked).
pub fn parse_csv(text: &str) -> Result<Vec<Vec<String>>, ConfigError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(ConfigError::new(
                "csv",
                format!("bad header: {other:?}"),
            ))
        }
    }
    Ok(lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}
