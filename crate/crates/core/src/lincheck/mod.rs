//! Linearizability checking for recorded histories.

mod campaign;
mod checker;
mod history;
mod spec;

pub use campaign::{
    check_run, random_history_campaign, run_seed, CampaignConfig, CampaignFailure, CampaignReport,
    FailureKind, RunEnd, SeedRun, Target, DEFAULT_STEP_BUDGET,
};
pub use checker::{check, check_with_limit, CheckError, Verdict, DEFAULT_OP_LIMIT};
pub use history::{
    EventKind, History, HistoryError, HistoryEvent, OpName, Operation, Recorder, Ret, SinkFull,
};
pub use spec::{CounterSpec, QueueSpec, RegisterSpec, Specification};
