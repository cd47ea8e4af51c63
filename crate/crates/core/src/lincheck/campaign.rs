//! Randomized linearizability campaigns.
//!
//! Each seed fixes a program (how many processes, which operations each one
//! runs) and a schedule: the processes run under the controlled scheduler,
//! which picks the next process uniformly at random after every
//! shared-memory access. Histories are recorded and checked. Because the
//! scheduler serializes the processes, rerunning a seed reproduces the same
//! history exactly, so a failing seed is a replay file in itself.

use std::collections::VecDeque;
use std::fmt;
use std::ops::{Range, RangeInclusive};
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checker::{check, CheckError, Verdict};
use super::history::{History, OpName, Recorder, Ret};
use super::spec::{CounterSpec, QueueSpec};
use crate::dnb::{DnbQueue, Mutation};
use crate::ms::MsQueue;
use crate::queue::{ConcurrentQueue, QueueHandle};
use crate::sched::{RunOutcome, Sim, Status};
use crate::universal::{Counter, CounterOp, IntQueue, IntQueueOp, IntQueueResponse, Universal2Nb};

/// Implementation under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Dnb2,
    /// DNB-2 with the already-threaded check disabled. Expected to fail.
    Dnb2Mutant,
    Ms,
    UniversalCounter,
    UniversalQueue,
}

impl Target {
    pub const ALL: [Target; 5] = [
        Target::Dnb2,
        Target::Dnb2Mutant,
        Target::Ms,
        Target::UniversalCounter,
        Target::UniversalQueue,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Target::Dnb2 => "dnb2",
            Target::Dnb2Mutant => "dnb2-mutant",
            Target::Ms => "ms",
            Target::UniversalCounter => "universal-counter",
            Target::UniversalQueue => "universal-queue",
        }
    }

    fn is_counter(self) -> bool {
        self == Target::UniversalCounter
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Target::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Target::ALL.iter().map(|t| t.name()).collect();
                format!(
                    "unknown target `{s}` (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub target: Target,
    pub procs: RangeInclusive<usize>,
    pub ops: RangeInclusive<usize>,
    pub seeds: Range<u64>,
    /// Scheduling decisions allowed per history before it counts as stalled.
    pub step_budget: u64,
    /// Stop once this many failures have been seen.
    pub stop_after: Option<u64>,
}

impl CampaignConfig {
    pub fn new(
        target: Target,
        procs: RangeInclusive<usize>,
        ops: RangeInclusive<usize>,
        seeds: Range<u64>,
    ) -> Self {
        CampaignConfig {
            target,
            procs,
            ops,
            seeds,
            step_budget: DEFAULT_STEP_BUDGET,
            stop_after: None,
        }
    }

    pub fn stop_after(mut self, failures: u64) -> Self {
        self.stop_after = Some(failures);
        self
    }
}

pub const DEFAULT_STEP_BUDGET: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Planned {
    op: OpName,
    arg: Option<i64>,
}

/// How an execution ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunEnd {
    Completed,
    /// The step budget ran out with operations still pending.
    Stalled,
    Panicked(String),
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub processes: usize,
    pub history: History,
    pub end: RunEnd,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailureKind {
    NonLinearizable { stalled: bool },
    Stalled,
    Panicked(String),
    Refused(String),
}

#[derive(Debug, Clone)]
pub struct CampaignFailure {
    pub seed: u64,
    pub kind: FailureKind,
    pub history: History,
}

impl fmt::Display for CampaignFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# seed {} failed: {:?}", self.seed, self.kind)?;
        f.write_str(&self.history.to_text())
    }
}

#[derive(Debug, Clone)]
pub struct CampaignReport {
    pub target: Target,
    pub runs: u64,
    pub failures: Vec<CampaignFailure>,
    pub non_linearizable: u64,
    pub stalled: u64,
    pub panicked: u64,
    pub refused: u64,
    pub max_ops: usize,
}

impl CampaignReport {
    pub fn failure_count(&self) -> u64 {
        self.non_linearizable + self.stalled + self.panicked + self.refused
    }

    pub fn is_clean(&self) -> bool {
        self.failure_count() == 0
    }
}

impl fmt::Display for CampaignReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} histories, {} failures ({} non-linearizable, {} stalled, {} panicked, {} refused), up to {} ops",
            self.target,
            self.runs,
            self.failure_count(),
            self.non_linearizable,
            self.stalled,
            self.panicked,
            self.refused,
            self.max_ops
        )
    }
}

/// Full failure records kept per campaign; the counters cover the rest.
const KEPT_FAILURES: usize = 16;

fn plan(target: Target, rng: &mut ChaCha8Rng, procs: usize, ops: usize) -> Vec<Vec<Planned>> {
    let mut programs = vec![Vec::new(); procs];
    let mut next_value = 1;
    for i in 0..ops {
        // every process gets at least one operation when possible
        let p = if i < procs {
            i
        } else {
            rng.random_range(0..procs)
        };
        let planned = if target.is_counter() {
            if rng.random_bool(2.0 / 3.0) {
                Planned {
                    op: OpName::Add,
                    arg: Some(rng.random_range(1..=3)),
                }
            } else {
                Planned {
                    op: OpName::Get,
                    arg: None,
                }
            }
        } else if rng.random_bool(0.5) {
            next_value += 1;
            Planned {
                op: OpName::Enqueue,
                arg: Some(next_value - 1),
            }
        } else {
            Planned {
                op: OpName::Dequeue,
                arg: None,
            }
        };
        programs[p].push(planned);
    }
    programs
}

fn spawn_queue<Q>(
    sim: &mut Sim,
    queue: &Arc<Q>,
    rec: &Arc<Recorder>,
    pid: usize,
    program: Vec<Planned>,
) where
    Q: ConcurrentQueue<i64> + 'static,
{
    let queue = Arc::clone(queue);
    let rec = Arc::clone(rec);
    sim.spawn(move |hook| {
        let mut h = queue.attach(hook);
        for p in program {
            rec.invoke(pid, p.op, p.arg).expect("history sink overflow");
            let ret = match p.op {
                OpName::Enqueue => {
                    h.enqueue(p.arg.expect("enqueue carries a value"));
                    Ret::Done
                }
                _ => h.dequeue().map_or(Ret::Bottom, Ret::Int),
            };
            rec.respond(pid, p.op, ret).expect("history sink overflow");
        }
    });
}

fn spawn_universal_counter(
    sim: &mut Sim,
    object: &Arc<Universal2Nb<Counter>>,
    rec: &Arc<Recorder>,
    pid: usize,
    program: Vec<Planned>,
) {
    let object = Arc::clone(object);
    let rec = Arc::clone(rec);
    sim.spawn(move |hook| {
        let mut h = object.handle_with(hook);
        for p in program {
            rec.invoke(pid, p.op, p.arg).expect("history sink overflow");
            let op = match p.op {
                OpName::Add => CounterOp::Add(p.arg.expect("add carries a value")),
                _ => CounterOp::Get,
            };
            let ret = Ret::Int(h.invoke(op));
            rec.respond(pid, p.op, ret).expect("history sink overflow");
        }
    });
}

fn spawn_universal_queue(
    sim: &mut Sim,
    object: &Arc<Universal2Nb<IntQueue>>,
    rec: &Arc<Recorder>,
    pid: usize,
    program: Vec<Planned>,
) {
    let object = Arc::clone(object);
    let rec = Arc::clone(rec);
    sim.spawn(move |hook| {
        let mut h = object.handle_with(hook);
        for p in program {
            rec.invoke(pid, p.op, p.arg).expect("history sink overflow");
            let op = match p.op {
                OpName::Enqueue => IntQueueOp::Enqueue(p.arg.expect("enqueue carries a value")),
                _ => IntQueueOp::Dequeue,
            };
            let ret = match h.invoke(op) {
                IntQueueResponse::Done => Ret::Done,
                IntQueueResponse::Value(v) => Ret::Int(v),
                IntQueueResponse::Empty => Ret::Bottom,
            };
            rec.respond(pid, p.op, ret).expect("history sink overflow");
        }
    });
}

/// Execute one seed. Deterministic: the same arguments give the same history.
pub fn run_seed(
    target: Target,
    procs: RangeInclusive<usize>,
    ops: RangeInclusive<usize>,
    seed: u64,
    step_budget: u64,
) -> SeedRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_procs = rng.random_range(procs);
    let n_ops = rng.random_range(ops);
    let programs = plan(target, &mut rng, n_procs, n_ops);
    let rec = Arc::new(Recorder::default());
    let mut sim = Sim::new();

    match target {
        Target::Dnb2 | Target::Dnb2Mutant => {
            let mutation = if target == Target::Dnb2Mutant {
                Mutation::SkipThreadedCheck
            } else {
                Mutation::None
            };
            let q = Arc::new(DnbQueue::<i64>::with_mutation(mutation));
            for (pid, program) in programs.into_iter().enumerate() {
                spawn_queue(&mut sim, &q, &rec, pid, program);
            }
        }
        Target::Ms => {
            let q = Arc::new(MsQueue::<i64>::new());
            for (pid, program) in programs.into_iter().enumerate() {
                spawn_queue(&mut sim, &q, &rec, pid, program);
            }
        }
        Target::UniversalCounter => {
            let u = Arc::new(Universal2Nb::new(Counter, 0));
            for (pid, program) in programs.into_iter().enumerate() {
                spawn_universal_counter(&mut sim, &u, &rec, pid, program);
            }
        }
        Target::UniversalQueue => {
            let u = Arc::new(Universal2Nb::new(IntQueue, VecDeque::new()));
            for (pid, program) in programs.into_iter().enumerate() {
                spawn_universal_queue(&mut sim, &u, &rec, pid, program);
            }
        }
    }

    let outcome = sim.run_random(&mut rng, step_budget, |_, _| false, || false);
    let mut end = match outcome {
        RunOutcome::BudgetExhausted => RunEnd::Stalled,
        _ => RunEnd::Completed,
    };
    for pid in 0..sim.len() {
        if sim.status(pid) == Status::Panicked {
            end = RunEnd::Panicked(sim.panic_message(pid).unwrap_or_default());
        }
    }
    let steps = sim.steps();
    drop(sim);
    SeedRun {
        seed,
        processes: n_procs,
        history: rec.snapshot(),
        end,
        steps,
    }
}

/// Check a recorded run against the specification matching its target.
pub fn check_run(target: Target, run: &SeedRun) -> Result<Verdict, CheckError> {
    if target.is_counter() {
        check(&run.history, &CounterSpec)
    } else {
        check(&run.history, &QueueSpec)
    }
}

pub fn random_history_campaign(cfg: &CampaignConfig) -> CampaignReport {
    let mut report = CampaignReport {
        target: cfg.target,
        runs: 0,
        failures: Vec::new(),
        non_linearizable: 0,
        stalled: 0,
        panicked: 0,
        refused: 0,
        max_ops: 0,
    };
    for seed in cfg.seeds.clone() {
        let run = run_seed(
            cfg.target,
            cfg.procs.clone(),
            cfg.ops.clone(),
            seed,
            cfg.step_budget,
        );
        report.runs += 1;
        report.max_ops = report.max_ops.max(run.history.len().div_ceil(2));
        let kind = match (&run.end, check_run(cfg.target, &run)) {
            (RunEnd::Panicked(msg), _) => {
                report.panicked += 1;
                Some(FailureKind::Panicked(msg.clone()))
            }
            (_, Err(e)) => {
                report.refused += 1;
                Some(FailureKind::Refused(e.to_string()))
            }
            (end, Ok(v)) if !v.linearizable => {
                report.non_linearizable += 1;
                Some(FailureKind::NonLinearizable {
                    stalled: *end == RunEnd::Stalled,
                })
            }
            (RunEnd::Stalled, Ok(_)) => {
                report.stalled += 1;
                Some(FailureKind::Stalled)
            }
            _ => None,
        };
        if let Some(kind) = kind {
            if report.failures.len() < KEPT_FAILURES {
                report.failures.push(CampaignFailure {
                    seed,
                    kind,
                    history: run.history,
                });
            }
        }
        if cfg.stop_after.is_some_and(|n| report.failure_count() >= n) {
            break;
        }
    }
    report
}
