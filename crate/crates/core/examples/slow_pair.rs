//! Two enqueuers and two dequeuers, one of each slowed down by `k`.
//!
//! ```text
//! cargo run --release --example slow_pair -- [k] [secs] [seed]
//! ```

use std::time::Duration;

use dnbq::harness::{run_batch, ExperimentConfig, Role};
use dnbq::Algorithm;

fn main() {
    let mut args = std::env::args()
        .skip(1)
        .map(|a| a.parse::<u64>().expect("numeric argument"));
    let k = args.next().unwrap_or(11) as u32;
    let secs = args.next().unwrap_or(10);
    let seed = args.next().unwrap_or(1);
    let configs: Vec<_> = [Algorithm::Dnb2, Algorithm::Ms]
        .into_iter()
        .map(|alg| {
            ExperimentConfig::slow_pair(alg, k)
                .with_duration(Duration::from_secs(secs))
                .with_seed(seed)
        })
        .collect();
    println!("slow pair at k = {k}, {secs}s per run");
    for report in run_batch(&configs, 2) {
        let report = report.expect("experiment failed");
        println!("{}:", report.config.algorithm);
        for p in &report.processes {
            println!(
                "  {:<8} k={:<3} ops={:>7}  fair share {:>5.1}%  attained {:>5.1}%",
                p.role.to_string(),
                p.slowdown,
                p.ops,
                p.fair_share * 100.0,
                p.attainment * 100.0
            );
        }
        let (e, d) = (
            report.group_throughput(Role::Enqueuer),
            report.group_throughput(Role::Dequeuer),
        );
        println!(
            "  throughput: {e} enqueues, {d} dequeues; audit clean: {}",
            report.audit.is_clean()
        );
    }
}
