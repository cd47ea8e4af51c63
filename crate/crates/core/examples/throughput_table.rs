//! Eight enqueuers and eight dequeuers under the three standard speed
//! settings, for both queues, printed as a throughput table.
//!
//! ```text
//! cargo run --release --example throughput_table -- [secs] [seed]
//! ```

use std::time::Duration;

use dnbq::harness::{
    run_batch, throughput_table, ExperimentConfig, Setting, Throughput, ThroughputRow,
};
use dnbq::Algorithm;

fn main() {
    let mut args = std::env::args()
        .skip(1)
        .map(|a| a.parse::<u64>().expect("numeric argument"));
    let secs = args.next().unwrap_or(10);
    let seed = args.next().unwrap_or(0);
    let configs: Vec<_> = Setting::ALL
        .iter()
        .flat_map(|&s| {
            [Algorithm::Ms, Algorithm::Dnb2].map(|a| ExperimentConfig::eight_by_eight(a, s))
        })
        .map(|c| c.with_duration(Duration::from_secs(secs)).with_seed(seed))
        .collect();
    println!("8+8, {secs}s per run, {} runs", configs.len());
    let reports: Vec<_> = run_batch(&configs, configs.len())
        .into_iter()
        .map(|r| r.expect("experiment failed"))
        .collect();
    let rows: Vec<ThroughputRow> = Setting::ALL
        .iter()
        .zip(reports.chunks(2))
        .map(|(&setting, pair)| ThroughputRow {
            setting,
            ms: Throughput::from(&pair[0]),
            dnb2: Throughput::from(&pair[1]),
        })
        .collect();
    print!("{}", throughput_table(&rows));
    for r in &reports {
        let slowest = r
            .processes
            .iter()
            .map(|p| p.attainment)
            .fold(f64::INFINITY, f64::min);
        println!(
            "{} {:?}: lowest attainment {:.1}%",
            r.config.algorithm,
            r.config.slowdown[..8].to_vec(),
            slowest * 100.0
        );
    }
}
