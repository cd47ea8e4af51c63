#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use itertools::Itertools;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use dnbq::hook::{Step, StepHook, Trace};
use dnbq::lincheck::{History, OpName, Operation, Recorder, Ret, Specification};

/// Linearizability by enumeration: every subset of pending operations,
/// every permutation of the chosen operations, no pruning.
pub fn brute_force<S: Specification>(history: &History, spec: &S) -> bool {
    let ops = history.operations().expect("well-formed history");
    let pending: Vec<usize> = (0..ops.len()).filter(|&i| ops[i].is_pending()).collect();
    let complete: Vec<usize> = (0..ops.len()).filter(|&i| !ops[i].is_pending()).collect();
    for mask in 0..(1u32 << pending.len()) {
        let chosen: Vec<usize> = complete
            .iter()
            .copied()
            .chain(
                pending
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| mask & (1 << b) != 0)
                    .map(|(_, &i)| i),
            )
            .collect();
        let n = chosen.len();
        for order in chosen.into_iter().permutations(n) {
            if respects_real_time(&ops, &order) && replays(&ops, &order, spec) {
                return true;
            }
        }
    }
    false
}

fn respects_real_time(ops: &[Operation], order: &[usize]) -> bool {
    for (i, &a) in order.iter().enumerate() {
        for &b in &order[i + 1..] {
            if ops[b].precedes(&ops[a]) {
                return false;
            }
        }
    }
    true
}

fn replays<S: Specification>(ops: &[Operation], order: &[usize], spec: &S) -> bool {
    let mut state = spec.initial();
    for &i in order {
        let Some((next, ret)) = spec.apply(&state, ops[i].op, ops[i].arg) else {
            return false;
        };
        if ops[i].ret.is_some_and(|r| r != ret) {
            return false;
        }
        state = next;
    }
    true
}

/// A random well-formed queue history with made-up responses: up to
/// `max_ops` operations over 1 to 3 processes, some left pending.
pub fn random_queue_history<R: Rng>(rng: &mut R, max_ops: usize) -> History {
    let n_ops = rng.random_range(1..=max_ops);
    let procs = rng.random_range(1..=3usize);
    let rec = Recorder::default();
    let mut active: Vec<Option<OpName>> = vec![None; procs];
    let mut started = 0;
    let mut next_value = 1;
    loop {
        let idle = active.iter().all(Option::is_none);
        if started == n_ops && idle {
            break;
        }
        let p = rng.random_range(0..procs);
        match active[p] {
            None if started < n_ops => {
                let (op, arg) = if rng.random_bool(0.5) {
                    next_value += 1;
                    (OpName::Enqueue, Some(next_value - 1))
                } else {
                    (OpName::Dequeue, None)
                };
                rec.invoke(p, op, arg).unwrap();
                active[p] = Some(op);
                started += 1;
            }
            None => {}
            Some(op) => {
                if started == n_ops && rng.random_bool(0.15) {
                    // leave it pending
                    active[p] = None;
                    continue;
                }
                let ret = match op {
                    OpName::Enqueue => Ret::Done,
                    _ => match rng.random_range(0..4) {
                        0 => Ret::Bottom,
                        _ => Ret::Int(rng.random_range(1..=next_value.max(2))),
                    },
                };
                rec.respond(p, op, ret).unwrap();
                active[p] = None;
            }
        }
    }
    rec.snapshot()
}

/// Per-thread trace auditor for the structural invariants. Checks that can
/// be decided locally run as events arrive; the rest happen in [`merge`].
#[derive(Default)]
pub struct TraceAudit {
    pub events: u64,
    pub accesses: u64,
    appended: Vec<usize>,
    linked_after: Vec<usize>,
    installed: Vec<usize>,
    next_seen: HashMap<usize, usize>,
    flag_seen: HashSet<usize>,
    delivered: HashMap<usize, usize>,
    pub violations: Vec<String>,
}

impl StepHook for TraceAudit {
    const TRACES: bool = true;

    fn after_access(&mut self, _: Step) {
        self.accesses += 1;
    }

    fn trace(&mut self, event: Trace) {
        self.events += 1;
        match event {
            Trace::NextCas {
                pred,
                node,
                ok: true,
            } => {
                self.appended.push(node);
                self.linked_after.push(pred);
            }
            Trace::TailCas {
                ok: true,
                flag: false,
                to,
            } => {
                self.violations
                    .push(format!("tail swung to {to:#x} with flag 0"));
            }
            Trace::HeadCas { cell, ok: true } | Trace::RecordCas { cell, ok: true } => {
                self.installed.push(cell)
            }
            Trace::FlagWrite { node, value: false } => {
                self.violations
                    .push(format!("flag of {node:#x} written to 0"));
            }
            Trace::FlagRead { node, value } => {
                if value {
                    self.flag_seen.insert(node);
                } else if self.flag_seen.contains(&node) {
                    self.violations
                        .push(format!("flag of {node:#x} went back to 0"));
                }
            }
            Trace::NextRead { node, next } => {
                if next == 0 {
                    if self.next_seen.contains_key(&node) {
                        self.violations
                            .push(format!("next of {node:#x} went back to null"));
                    }
                } else if let Some(prev) = self.next_seen.insert(node, next) {
                    if prev != next {
                        self.violations.push(format!("next of {node:#x} changed"));
                    }
                }
            }
            Trace::CellWrite { cell, source } => {
                if let Some(prev) = self.delivered.insert(cell, source) {
                    if prev != source {
                        self.violations
                            .push(format!("cell {cell:#x} got two different values"));
                    }
                }
            }
            _ => {}
        }
    }
}

#[derive(Debug, Default)]
pub struct AuditSummary {
    pub events: u64,
    pub accesses: u64,
    pub appends: usize,
    pub installs: usize,
    pub violations: Vec<String>,
}

/// Combine per-thread audits and run the cross-thread checks.
pub fn merge(audits: impl IntoIterator<Item = TraceAudit>) -> AuditSummary {
    let mut out = AuditSummary::default();
    let mut appended = HashSet::new();
    let mut linked_after = HashSet::new();
    let mut installed = HashSet::new();
    let mut next_seen: HashMap<usize, usize> = HashMap::new();
    let mut delivered: HashMap<usize, usize> = HashMap::new();
    for a in audits {
        out.events += a.events;
        out.accesses += a.accesses;
        out.violations.extend(a.violations);
        for n in a.appended {
            out.appends += 1;
            if !appended.insert(n) {
                out.violations.push(format!("node {n:#x} appended twice"));
            }
        }
        for p in a.linked_after {
            if !linked_after.insert(p) {
                out.violations
                    .push(format!("two nodes linked after {p:#x}"));
            }
        }
        for c in a.installed {
            out.installs += 1;
            if !installed.insert(c) {
                out.violations.push(format!("cell {c:#x} installed twice"));
            }
        }
        for (n, next) in a.next_seen {
            if next_seen.insert(n, next).is_some_and(|prev| prev != next) {
                out.violations
                    .push(format!("threads disagree on next of {n:#x}"));
            }
        }
        for (c, s) in a.delivered {
            if delivered.insert(c, s).is_some_and(|prev| prev != s) {
                out.violations
                    .push(format!("threads delivered different values into {c:#x}"));
            }
        }
    }
    out
}

/// Yields the OS thread after roughly one access in `period`, to shake up
/// interleavings on machines with few cores.
pub struct Jitter {
    state: u64,
    period: u64,
}

impl Jitter {
    pub fn new(seed: u64, period: u64) -> Self {
        Jitter {
            state: seed | 1,
            period,
        }
    }
}

impl StepHook for Jitter {
    fn after_access(&mut self, _: Step) {
        // xorshift64
        self.state ^= self.state << 13;
        self.state ^= self.state >> 7;
        self.state ^= self.state << 17;
        if self.state.is_multiple_of(self.period) {
            std::thread::yield_now();
        }
    }
}

#[derive(Debug, Default)]
pub struct StressOutcome {
    pub trace: AuditSummary,
    pub ops: u64,
    pub empty_dequeues: u64,
    pub value_errors: Vec<String>,
    pub probe: Option<String>,
}

/// Hammer a DNB-2 queue from `enq` enqueuers and `deq` dequeuers, each doing
/// `per_thread` operations, with trace auditing on every handle.
pub fn dnb_stress(enq: usize, deq: usize, per_thread: u64, seed: u64) -> StressOutcome {
    use dnbq::DnbQueue;
    let q = DnbQueue::<u64>::new();
    let mut audits = Vec::new();
    let mut consumed: Vec<Vec<u64>> = Vec::new();
    let mut empty = 0;
    std::thread::scope(|s| {
        let mut handles = Vec::new();
        for p in 0..enq + deq {
            let q = &q;
            handles.push(s.spawn(move || {
                let hook = (
                    TraceAudit::default(),
                    Jitter::new(seed ^ (p as u64 * 0x9e37_79b9), 97),
                );
                let mut h = q.handle_with(hook);
                let mut got = Vec::new();
                let mut empty = 0;
                for i in 0..per_thread {
                    if p < enq {
                        h.enqueue(((p as u64) << 40) | i);
                    } else {
                        match h.dequeue() {
                            Some(v) => got.push(v),
                            None => empty += 1,
                        }
                    }
                }
                let audit = std::mem::take(&mut h.hook_mut().0);
                (audit, got, empty)
            }));
        }
        for h in handles {
            let (a, got, e) = h.join().expect("stress worker panicked");
            audits.push(a);
            consumed.push(got);
            empty += e;
        }
    });
    let mut out = StressOutcome {
        trace: merge(audits),
        ops: (enq + deq) as u64 * per_thread,
        empty_dequeues: empty,
        ..Default::default()
    };
    if let Err(e) = q.probe_invariants() {
        out.probe = Some(e.to_string());
    }
    let mut drained = Vec::new();
    while let Some(v) = q.dequeue() {
        drained.push(v);
    }
    consumed.push(drained);
    let mut seen = HashSet::new();
    for list in &consumed {
        let mut last: HashMap<u64, u64> = HashMap::new();
        for &v in list {
            if !seen.insert(v) {
                out.value_errors
                    .push(format!("value {v:#x} delivered twice"));
            }
            let (p, i) = (v >> 40, v & ((1 << 40) - 1));
            if last.insert(p, i).is_some_and(|prev| prev >= i) {
                out.value_errors.push(format!("producer {p} out of order"));
            }
        }
    }
    let expected = enq as u64 * per_thread;
    if seen.len() as u64 != expected {
        out.value_errors.push(format!(
            "{} distinct values delivered, {expected} enqueued",
            seen.len()
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiveTarget {
    Enqueue,
    Dequeue,
    Universal,
}

#[derive(Debug)]
pub struct LivenessRun {
    pub completed: [u64; 2],
    pub steps: u64,
    pub outcome: dnbq::sched::RunOutcome,
}

impl LivenessRun {
    pub fn reached(&self, need: u64) -> bool {
        self.completed.iter().all(|&c| c >= need)
    }
}

/// One process announces its operation and is then paused for good; two
/// others run under a seeded random schedule until each has completed
/// `need` operations or `budget` scheduling decisions have been made.
pub fn liveness_run(target: LiveTarget, seed: u64, need: u64, budget: u64) -> LivenessRun {
    use std::sync::atomic::{AtomicU64, Ordering};
    use std::sync::Arc;

    use dnbq::sched::Sim;
    use dnbq::universal::{Counter, CounterOp, Universal2Nb};
    use dnbq::DnbQueue;
    use rand::SeedableRng;

    let counters: Vec<Arc<AtomicU64>> = (0..2).map(|_| Arc::new(AtomicU64::new(0))).collect();
    let mut sim = Sim::new();
    let limit = need + 10;
    let (victim, others, before_cas, nth) = match target {
        LiveTarget::Enqueue | LiveTarget::Dequeue => {
            let q = Arc::new(DnbQueue::<u64>::new());
            if target == LiveTarget::Dequeue {
                for i in 0..(2 * limit + 10) {
                    q.enqueue(i);
                }
            }
            let enq = target == LiveTarget::Enqueue;
            let spawn = |sim: &mut Sim, counter: Option<Arc<AtomicU64>>| {
                let q = Arc::clone(&q);
                sim.spawn(move |hook| {
                    let mut h = q.handle_with(hook);
                    let rounds = if counter.is_some() { limit } else { 1 };
                    for i in 0..rounds {
                        if enq {
                            h.enqueue(i);
                        } else {
                            h.dequeue();
                        }
                        if let Some(c) = &counter {
                            c.fetch_add(1, Ordering::SeqCst);
                        }
                    }
                })
            };
            let victim = spawn(&mut sim, None);
            let others = [
                spawn(&mut sim, Some(Arc::clone(&counters[0]))),
                spawn(&mut sim, Some(Arc::clone(&counters[1]))),
            ];
            if enq {
                (victim, others, Step::ReadNodeFlag, 2)
            } else {
                (victim, others, Step::ReadNextValue, 1)
            }
        }
        LiveTarget::Universal => {
            let u = Arc::new(Universal2Nb::new(Counter, 0));
            let spawn = |sim: &mut Sim, counter: Option<Arc<AtomicU64>>| {
                let u = Arc::clone(&u);
                sim.spawn(move |hook| {
                    let mut h = u.handle_with(hook);
                    let rounds = if counter.is_some() { limit } else { 1 };
                    for _ in 0..rounds {
                        h.invoke(CounterOp::Add(1));
                        if let Some(c) = &counter {
                            c.fetch_add(1, Ordering::SeqCst);
                        }
                    }
                })
            };
            let victim = spawn(&mut sim, None);
            let others = [
                spawn(&mut sim, Some(Arc::clone(&counters[0]))),
                spawn(&mut sim, Some(Arc::clone(&counters[1]))),
            ];
            (victim, others, Step::UReadOwnCell, 2)
        }
    };

    // force the victim to lose a race and announce
    assert!(
        sim.run_to_nth(victim, before_cas, nth),
        "victim finished early"
    );
    while counters[0].load(Ordering::SeqCst) == 0 {
        sim.step(others[0]);
    }
    let announced = sim.run_until(victim, |s| s.is_announcement());
    assert!(announced.is_some(), "victim did not announce");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outcome = sim.run_random(
        &mut rng,
        budget,
        |id, _| id == victim,
        || counters.iter().all(|c| c.load(Ordering::SeqCst) >= need),
    );
    LivenessRun {
        completed: [
            counters[0].load(Ordering::SeqCst),
            counters[1].load(Ordering::SeqCst),
        ],
        steps: sim.steps(),
        outcome,
    }
}
