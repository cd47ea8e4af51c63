//! Does one group's throughput depend on the other group being there?
//! Runs 8+8 at full speed with both groups, then each group alone.
//!
//! ```text
//! cargo run --release --example independence -- [secs] [impl]
//! ```

use std::time::Duration;

use dnbq::harness::{run_batch, ExperimentConfig, Mode, Role, Setting};
use dnbq::Algorithm;

fn main() {
    let mut args = std::env::args().skip(1);
    let secs: u64 = args.next().map_or(10, |a| a.parse().expect("seconds"));
    let alg: Algorithm = args
        .next()
        .map_or(Algorithm::Dnb2, |a| a.parse().expect("dnb2 or ms"));
    let configs: Vec<_> = [Mode::Both, Mode::EnqOnly, Mode::DeqOnly]
        .into_iter()
        .map(|m| {
            ExperimentConfig::eight_by_eight(alg, Setting::Uniform)
                .with_mode(m)
                .with_duration(Duration::from_secs(secs))
        })
        .collect();
    let r: Vec<_> = run_batch(&configs, 3)
        .into_iter()
        .map(|r| r.expect("experiment failed"))
        .collect();
    println!("{alg}, {secs}s per run: process, ops with both groups, ops alone, change");
    for p in 0..16 {
        let alone = if r[0].config.role(p) == Role::Enqueuer {
            &r[1]
        } else {
            &r[2]
        };
        let (b, a) = (r[0].process(p).unwrap().ops, alone.process(p).unwrap().ops);
        println!(
            "  {p:>2} {:<8} {b:>6} {a:>6} {:>+6.1}%",
            r[0].config.role(p).to_string(),
            100.0 * (b as f64 - a as f64) / a.max(1) as f64
        );
    }
}
