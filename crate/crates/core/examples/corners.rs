use manetsim::harness::{sweep, Protocol, RunConfig, SweepSpec};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seeds: u64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(10);
    let pauses: Vec<f64> = args
        .get(2)
        .map(|s| s.split(',').map(|x| x.parse().unwrap()).collect())
        .unwrap_or_else(|| vec![0.0, 800.0]);
    let spec = SweepSpec {
        base: RunConfig::default(),
        pause_times: pauses,
        source_counts: vec![15, 25],
        seeds: (1..=seeds).collect(),
        protocols: vec![Protocol::Dsdv, Protocol::Dsr],
    };
    let started = std::time::Instant::now();
    let out = sweep(&spec, std::thread::available_parallelism().map(|n| n.get()).unwrap_or(4)).unwrap();
    for a in &out.aggregates {
        println!(
            "{:>4} src={} pause={:>3}: pdf={:.4} delay={:>9.3}ms rtx={:>8.0} nrl={:.4}",
            a.protocol.to_string(),
            a.sources,
            a.pause_time,
            a.pdf,
            a.avg_delay.unwrap_or(f64::NAN) * 1000.0,
            a.routing_tx,
            a.nrl.unwrap_or(f64::NAN),
        );
    }
    println!("wall: {:?} for {} runs", started.elapsed(), out.rows.len());
}
