use std::collections::{HashMap, HashSet};
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, Mode, Role};
use super::delay::{tighten_timer_slack, DelayHook};
use super::report::{Audit, FairnessReport};
use super::HarnessError;
use crate::dnb::DnbQueue;
use crate::ms::MsQueue;
use crate::queue::{Algorithm, ConcurrentQueue, QueueHandle};

const PRODUCER_SHIFT: u32 = 40;

fn encode(producer: usize, seq: u64) -> u64 {
    ((producer as u64) << PRODUCER_SHIFT) | seq
}

fn decode(value: u64) -> (usize, u64) {
    (
        (value >> PRODUCER_SHIFT) as usize,
        value & ((1 << PRODUCER_SHIFT) - 1),
    )
}

/// Time between spawning the workers and the start of the measured window.
const STARTUP: Duration = Duration::from_millis(50);

struct WorkerResult {
    /// Operations completed before the deadline.
    counted: u64,
    /// Operations started, including ones finished after the deadline.
    started: u64,
    dequeued: Vec<u64>,
}

fn worker_rng(seed: u64, process: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(process as u64 + 1);
    rng
}

fn worker<Q: ConcurrentQueue<u64>>(
    queue: &Q,
    cfg: &ExperimentConfig,
    process: usize,
    start: Instant,
    deadline: Instant,
) -> Result<WorkerResult, HarnessError> {
    tighten_timer_slack().map_err(HarnessError::TimerSlack)?;
    let hook = DelayHook::new(
        worker_rng(cfg.seed, process),
        cfg.mean_delay(process),
        deadline,
    );
    let mut h = queue.attach(hook);
    let mut result = WorkerResult {
        counted: 0,
        started: 0,
        dequeued: Vec::new(),
    };
    if let Some(wait) = start.checked_duration_since(Instant::now()) {
        thread::sleep(wait);
    }
    let role = cfg.role(process);
    while Instant::now() < deadline {
        result.started += 1;
        match role {
            Role::Enqueuer => h.enqueue(encode(process, result.started - 1)),
            Role::Dequeuer => {
                if let Some(v) = h.dequeue() {
                    result.dequeued.push(v);
                }
            }
        }
        if Instant::now() < deadline {
            result.counted += 1;
        }
    }
    Ok(result)
}

/// Values enqueued before a dequeuers-only run: twice what the dequeuers
/// could take if every access were a full mean delay apart.
fn prefill_len(cfg: &ExperimentConfig) -> u64 {
    if cfg.mode != Mode::DeqOnly {
        return 0;
    }
    (0..cfg.processes())
        .filter(|&p| cfg.role(p) == Role::Dequeuer)
        .map(|p| {
            2 * cfg.duration().as_micros() as u64
                / cfg.mean_delay(p).as_micros().max(1) as u64
                / MIN_DEQUEUE_ACCESSES
        })
        .sum()
}

/// Fewest shared accesses a dequeue that returns a value can take.
const MIN_DEQUEUE_ACCESSES: u64 = 8;

fn audit(
    cfg: &ExperimentConfig,
    results: &[Option<WorkerResult>],
    drained: Vec<u64>,
    prefill: u64,
) -> Audit {
    let mut out = Audit::default();
    let mut produced: HashMap<usize, u64> = results
        .iter()
        .enumerate()
        .filter(|&(p, _)| cfg.role(p) == Role::Enqueuer)
        .filter_map(|(p, r)| r.as_ref().map(|r| (p, r.started)))
        .collect();
    if prefill > 0 {
        produced.insert(cfg.processes(), prefill);
    }
    out.enqueued = produced.values().sum();
    let mut seen = HashSet::new();
    let mut check = |v: u64, out: &mut Audit| {
        let (p, seq) = decode(v);
        if produced.get(&p).is_none_or(|&n| seq >= n) {
            out.unknown += 1;
        } else if !seen.insert(v) {
            out.duplicates += 1;
        }
    };
    for r in results.iter().flatten() {
        let mut last: HashMap<usize, u64> = HashMap::new();
        for &v in &r.dequeued {
            out.dequeued += 1;
            check(v, &mut out);
            let (p, seq) = decode(v);
            if last.insert(p, seq).is_some_and(|prev| prev >= seq) {
                out.reordered += 1;
            }
        }
    }
    // the drain is one more sequential consumer
    let mut last: HashMap<usize, u64> = HashMap::new();
    for v in drained {
        out.drained += 1;
        check(v, &mut out);
        let (p, seq) = decode(v);
        if last.insert(p, seq).is_some_and(|prev| prev >= seq) {
            out.reordered += 1;
        }
    }
    out.lost = out.enqueued - seen.len() as u64;
    out
}

fn run_on<Q: ConcurrentQueue<u64>>(
    queue: &Q,
    cfg: &ExperimentConfig,
) -> Result<FairnessReport, HarnessError> {
    let prefill = prefill_len(cfg);
    {
        // filled values come from a producer id past the last process
        let mut h = queue.attach(crate::hook::NoHook);
        for seq in 0..prefill {
            h.enqueue(encode(cfg.processes(), seq));
        }
    }
    let start = Instant::now() + STARTUP;
    let deadline = start + cfg.duration();
    let slots: Vec<Mutex<Option<Result<WorkerResult, HarnessError>>>> =
        (0..cfg.processes()).map(|_| Mutex::new(None)).collect();
    thread::scope(|s| -> Result<(), HarnessError> {
        for (p, slot) in slots.iter().enumerate() {
            if !cfg.mode.runs(cfg.role(p)) {
                continue;
            }
            thread::Builder::new()
                .name(format!("{}-{p}", cfg.role(p)))
                .spawn_scoped(s, move || {
                    // a panicking worker leaves its slot empty
                    let r = panic::catch_unwind(AssertUnwindSafe(|| {
                        worker(queue, cfg, p, start, deadline)
                    }));
                    if let Ok(r) = r {
                        *slot.lock().unwrap() = Some(r);
                    }
                })
                .map_err(HarnessError::Spawn)?;
        }
        Ok(())
    })?;
    let mut results = Vec::with_capacity(slots.len());
    for (p, slot) in slots.into_iter().enumerate() {
        match slot.into_inner().unwrap() {
            Some(r) => results.push(Some(r?)),
            None if cfg.mode.runs(cfg.role(p)) => return Err(HarnessError::WorkerPanicked(p)),
            None => results.push(None),
        }
    }
    let mut h = queue.attach(crate::hook::NoHook);
    let drained: Vec<u64> = std::iter::from_fn(|| h.dequeue()).collect();
    let audit = audit(cfg, &results, drained, prefill);
    let counts: Vec<Option<u64>> = results
        .iter()
        .map(|r| r.as_ref().map(|r| r.counted))
        .collect();
    FairnessReport::from_counts(cfg, &counts, audit)
}

/// Run one timed experiment. Blocks for the configured duration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<FairnessReport, HarnessError> {
    cfg.validate()?;
    match cfg.algorithm {
        Algorithm::Dnb2 => run_on(&DnbQueue::new(), cfg),
        Algorithm::Ms => run_on(&MsQueue::new(), cfg),
    }
}

/// Run experiments with up to `parallel` of them at a time. The workers
/// spend nearly all their time asleep, so several runs can share a core.
pub fn run_batch(
    configs: &[ExperimentConfig],
    parallel: usize,
) -> Vec<Result<FairnessReport, HarnessError>> {
    let next = AtomicUsize::new(0);
    let out: Vec<Mutex<Option<Result<FairnessReport, HarnessError>>>> =
        configs.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|s| {
        for _ in 0..parallel.max(1).min(configs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cfg) = configs.get(i) else { break };
                *out[i].lock().unwrap() = Some(run_experiment(cfg));
            });
        }
    });
    out.into_iter()
        .map(|m| m.into_inner().unwrap().expect("every config was run"))
        .collect()
}

/// Median of a non-empty slice.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
