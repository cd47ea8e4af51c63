//! Speed-controlled fairness and throughput experiments.
//!
//! Every process sleeps for an exponentially distributed time after each
//! shared-memory access, with mean `k_i * mu` where `k_i` is its slowdown.
//! A process's speed is `1 / (k_i * mu)` and its fair share within its group
//! (enqueuers or dequeuers) is its speed over the group's total speed. The
//! report gives each process's share of the completed operations divided by
//! its fair share: 100% means it got exactly what its speed entitles it to.

mod config;
mod delay;
mod output;
mod report;
mod run;

pub use config::{ExperimentConfig, Mode, Role, Setting, DEFAULT_BASE_DELAY_US};
pub use delay::{sample_delay, DelayHook};
pub use output::{
    csv_rows, emit_report, reference_ratio, summarize_csv, summarize_csv_file, throughput_table,
    to_csv, to_json, write_csv_rows, CsvRow, CsvSummary, Format, GroupLine, Throughput,
    ThroughputRow,
};
pub use report::{compute_fair_share, Audit, FairnessReport, GroupSummary, ProcessReport};
pub use run::{median, run_batch, run_experiment};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("failed to spawn worker thread: {0}")]
    Spawn(std::io::Error),
    #[error("failed to set timer slack: {0}")]
    TimerSlack(std::io::Error),
    #[error("worker {0} panicked")]
    WorkerPanicked(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
