use manetsim::harness::{run_experiment_full, Protocol, RunConfig};
use manetsim::metrics::TraceKind;
use manetsim::scenario::{MobilityParams, TrafficParams};
use std::collections::BTreeMap;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let pause: f64 = args[1].parse().unwrap();
    let sources: u16 = args[2].parse().unwrap();
    let seed: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1);
    let cfg = RunConfig {
        protocol: Protocol::Dsdv,
        mobility: MobilityParams { pause_time: pause, ..Default::default() },
        traffic: TrafficParams { source_count: sources, ..Default::default() },
        seed,
        ..Default::default()
    };
    let mut sim = manetsim::runtime::Sim::new(cfg).unwrap();
    sim.run();
    let trace = sim.trace();
    let mut gen: BTreeMap<u64, f64> = BTreeMap::new();
    let mut hops: BTreeMap<u64, u32> = BTreeMap::new();
    for e in &trace.events {
        match e.kind {
            TraceKind::Generated => { gen.insert(e.pkt_uid, e.at.as_secs_f64()); }
            TraceKind::HopTx(manetsim::metrics::HopClass::Data) => { *hops.entry(e.pkt_uid).or_insert(0) += 1; }
            _ => {}
        }
    }
    // bucket delays by generation decile
    let mut buckets: Vec<(f64, f64, u64)> = vec![(0.0, 0.0, 0); 8];
    for e in &trace.events {
        if e.kind == TraceKind::Delivered {
            if let Some(&g) = gen.get(&e.pkt_uid) {
                let d = e.at.as_secs_f64() - g;
                let h = *hops.get(&e.pkt_uid).unwrap_or(&0) as f64;
                let b = ((g / 100.0) as usize).min(7);
                buckets[b].0 += d;
                buckets[b].1 += h;
                buckets[b].2 += 1;
            }
        }
    }
    println!("dsdv pause={pause} src={sources} seed={seed}: per-100s-bucket (mean delay ms, mean hops, n)");
    for (i, (d, h, n)) in buckets.iter().enumerate() {
        if *n > 0 {
            println!("  [{:>3}-{:>3}s): {:>7.3} ms  {:.2} hops  n={}", i * 100, (i + 1) * 100, d / *n as f64 * 1000.0, h / *n as f64, n);
        }
    }
}
