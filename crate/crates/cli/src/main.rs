//! Command-line front end: scenario generation, single runs, the full
//! sweep matrix, and metric recomputation from saved traces.
//!
//! Exit codes: 0 on success, 1 on configuration or parse errors, 2 on
//! I/O errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use manetsim::engine::Streams;
use manetsim::harness::{
    emit_csv, run_experiment_full, sweep, HarnessError, Protocol, RunConfig, SweepOutput,
    SweepRow, SweepSpec,
};
use manetsim::metrics::{run_report, RunReport, Trace};
use manetsim::scenario::{self, TrafficScript};
use manetsim::engine::SimTime;

#[derive(Parser)]
#[command(
    name = "manetsim",
    about = "Deterministic hybrid wired/wireless ad hoc network simulator (DSDV vs DSR)",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigOverrides {
    /// Run configuration file (TOML); defaults reproduce the reference
    /// experiment when omitted.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Routing protocol to simulate.
    #[arg(long)]
    protocol: Option<Protocol>,
    /// Random-waypoint pause time, seconds.
    #[arg(long)]
    pause: Option<f64>,
    /// Number of CBR sources.
    #[arg(long)]
    sources: Option<u16>,
    /// Run seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigOverrides {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_toml(&read(path)?).map_err(HarnessError::Config)?,
            None => RunConfig::default(),
        };
        if let Some(p) = self.protocol {
            cfg.protocol = p;
        }
        if let Some(p) = self.pause {
            cfg.mobility.pause_time = p;
        }
        if let Some(s) = self.sources {
            cfg.traffic.source_count = s;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate movement and traffic scenario files.
    Generate {
        #[command(flatten)]
        overrides: ConfigOverrides,
        /// Output directory for movement.txt and traffic.txt.
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
    },
    /// Execute a single run and print its metrics.
    Run {
        #[command(flatten)]
        overrides: ConfigOverrides,
        /// Also write the event trace file.
        #[arg(long)]
        trace: bool,
        /// Output directory for results.csv (and trace.txt with --trace).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Execute the experiment matrix and write the aggregate CSV.
    Sweep {
        #[command(flatten)]
        overrides: ConfigOverrides,
        /// Number of seeds per point (seeds 1..=N).
        #[arg(long, value_name = "N")]
        seeds: Option<u64>,
        /// Concurrent independent runs.
        #[arg(long, value_name = "N", default_value_t = default_parallel())]
        parallel: usize,
        /// Output directory for results.csv.
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
    },
    /// Recompute metrics from a saved trace file.
    Report {
        /// Trace file written by `run --trace`.
        #[arg(long, value_name = "FILE")]
        trace: PathBuf,
        /// Warm-up seconds to exclude from the metrics.
        #[arg(long, default_value_t = 0.0)]
        warmup: f64,
    },
}

fn default_parallel() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

enum CliError {
    Config(String),
    Io(String),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> CliError {
        match e {
            HarnessError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn print_report(report: &RunReport) {
    println!("generated      {}", report.generated);
    println!("delivered      {}", report.delivered);
    println!("pdf            {:.6}", report.pdf);
    match report.avg_delay {
        Some(d) => println!("avg_delay_ms   {:.6}", d * 1000.0),
        None => println!("avg_delay_ms   -"),
    }
    println!("routing_tx     {}", report.routing_tx);
    match report.nrl {
        Some(n) => println!("nrl            {:.6}", n),
        None => println!("nrl            -"),
    }
    for (reason, count) in &report.drops_by_reason {
        println!("dropped[{reason}] {count}");
    }
}

fn cmd_generate(overrides: &ConfigOverrides, out: &Path) -> Result<(), CliError> {
    let cfg = overrides.resolve()?;
    cfg.validate().map_err(HarnessError::Config)?;
    let mut streams = Streams::new(cfg.seed);
    let mut mobility = cfg.mobility.clone();
    mobility.duration = cfg.duration;
    let movement = scenario::generate_movement(&mobility, streams.stream("mobility"))
        .map_err(HarnessError::Scenario)?;
    let mut traffic_params = cfg.traffic.clone();
    traffic_params.duration = cfg.duration;
    let wireless: Vec<_> = (0..cfg.mobility.node_count)
        .map(manetsim::ids::NodeId::Wireless)
        .collect();
    let wired: Vec<_> = (0..cfg.wired_node_count)
        .map(manetsim::ids::NodeId::Wired)
        .collect();
    let traffic: TrafficScript =
        scenario::generate_traffic(&traffic_params, &wireless, &wired, streams.stream("traffic"))
            .map_err(HarnessError::Scenario)?;
    write(&out.join("movement.txt"), &scenario::write_movement(&movement))?;
    write(&out.join("traffic.txt"), &scenario::write_traffic(&traffic))?;
    println!(
        "wrote {} and {}",
        out.join("movement.txt").display(),
        out.join("traffic.txt").display()
    );
    Ok(())
}

fn cmd_run(overrides: &ConfigOverrides, want_trace: bool, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = overrides.resolve()?;
    let result = run_experiment_full(&cfg, want_trace)?;
    println!(
        "protocol={} sources={} pause={} seed={}",
        cfg.protocol,
        cfg.traffic.source_count,
        manetsim::format_num(cfg.mobility.pause_time),
        cfg.seed
    );
    print_report(&result.report);
    if let Err(violations) = &result.conservation {
        return Err(CliError::Config(format!(
            "conservation check failed for {} packets",
            violations.len()
        )));
    }
    if let Some(dir) = out {
        let row = SweepRow {
            protocol: cfg.protocol,
            sources: cfg.traffic.source_count,
            pause_time: cfg.mobility.pause_time,
            seed: cfg.seed,
            report: result.report.clone(),
            conservation_ok: true,
            movement_hash: 0,
            traffic_hash: 0,
        };
        let csv = emit_csv(&SweepOutput {
            rows: vec![row],
            aggregates: vec![],
        });
        write(&dir.join("results.csv"), &csv)?;
        if let Some(trace) = &result.trace_text {
            write(&dir.join("trace.txt"), trace)?;
        }
    }
    Ok(())
}

fn cmd_sweep(
    overrides: &ConfigOverrides,
    seeds: Option<u64>,
    parallel: usize,
    out: &Path,
) -> Result<(), CliError> {
    let mut spec = match &overrides.config {
        Some(path) => SweepSpec::from_toml(&read(path)?).map_err(HarnessError::Config)?,
        None => SweepSpec::default(),
    };
    spec.base = overrides.resolve()?;
    if let Some(p) = overrides.protocol {
        spec.protocols = vec![p];
    }
    if let Some(p) = overrides.pause {
        spec.pause_times = vec![p];
    }
    if let Some(s) = overrides.sources {
        spec.source_counts = vec![s];
    }
    if let Some(n) = seeds {
        spec.seeds = (1..=n).collect();
    }
    eprintln!(
        "sweep: {} runs across {} protocols x {} source counts x {} pause times x {} seeds, {} parallel",
        spec.run_count(),
        spec.protocols.len(),
        spec.source_counts.len(),
        spec.pause_times.len(),
        spec.seeds.len(),
        parallel
    );
    let started = std::time::Instant::now();
    let output = sweep(&spec, parallel)?;
    let path = out.join("results.csv");
    write(&path, &emit_csv(&output))?;
    eprintln!(
        "wrote {} ({} rows + {} aggregates) in {:.1?}",
        path.display(),
        output.rows.len(),
        output.aggregates.len(),
        started.elapsed()
    );
    Ok(())
}

fn cmd_report(path: &Path, warmup: f64) -> Result<(), CliError> {
    let text = read(path)?;
    let trace = Trace::parse(&text).map_err(|e| CliError::Config(e.to_string()))?;
    let report = run_report(&trace, SimTime::from_secs_f64(warmup.max(0.0)));
    print_report(&report);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate { overrides, out } => cmd_generate(overrides, out),
        Command::Run {
            overrides,
            trace,
            out,
        } => cmd_run(overrides, *trace, out.as_deref()),
        Command::Sweep {
            overrides,
            seeds,
            parallel,
            out,
        } => cmd_sweep(overrides, *seeds, *parallel, out),
        Command::Report { trace, warmup } => cmd_report(trace, *warmup),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
