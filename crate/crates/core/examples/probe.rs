use manetsim::harness::{run_experiment_full, Protocol, RunConfig};
use manetsim::scenario::MobilityParams;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let pause: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(800.0);
    let sources: u16 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(15);
    let seed: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1);
    for protocol in [Protocol::Dsdv, Protocol::Dsr] {
        let cfg = RunConfig {
            protocol,
            mobility: MobilityParams {
                pause_time: pause,
                ..Default::default()
            },
            traffic: manetsim::scenario::TrafficParams {
                source_count: sources,
                ..Default::default()
            },
            seed,
            ..Default::default()
        };
        let out = run_experiment_full(&cfg, false).unwrap();
        let r = &out.report;
        println!(
            "{protocol} pause={pause} src={sources} seed={seed}: gen={} del={} pdf={:.4} delay={:?}ms rtx={} nrl={:?} drops={:?} wall={:?} cons={}",
            r.generated,
            r.delivered,
            r.pdf,
            r.avg_delay.map(|d| (d * 1000.0 * 100.0).round() / 100.0),
            r.routing_tx,
            r.nrl.map(|n| (n * 1000.0).round() / 1000.0),
            r.drops_by_reason,
            out.wall,
            out.conservation.is_ok(),
        );
    }
}
