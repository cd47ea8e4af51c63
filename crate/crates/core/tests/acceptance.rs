//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero if
//! any criterion fails. The timed experiments take several minutes; set
//! `DNBQ_ACCEPT_SECS` to shorten them while iterating locally.

mod common;

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_force, dnb_stress, liveness_run, LiveTarget};
use dnbq::harness::{
    median, reference_ratio, run_batch, throughput_table, ExperimentConfig, FairnessReport, Mode,
    Role, Setting, Throughput, ThroughputRow,
};
use dnbq::lincheck::{check, random_history_campaign, CampaignConfig, QueueSpec, Target};
use dnbq::sched::RunOutcome;
use dnbq::{Algorithm, ConcurrentQueue, DnbQueue, MsQueue, NoHook, QueueHandle};

const SEQ_PROGRAMS: u64 = 1000;
const SEQ_MAX_OPS: usize = 1000;

const CAMPAIGN_SEEDS: u64 = 10_000;
const CAMPAIGN_PROCS: std::ops::RangeInclusive<usize> = 2..=4;
const CAMPAIGN_OPS: std::ops::RangeInclusive<usize> = 6..=12;

const CHECKER_HISTORIES: u64 = 1000;
const CHECKER_MAX_OPS: usize = 8;

const STRESS_SIDE: usize = 4;
const STRESS_PER_THREAD: u64 = 125_000;
const STRESS_MIN_OPS: u64 = 1_000_000;

const FAIRNESS_SEEDS: u64 = 5;
const RUN_SECS: f64 = 30.0;
const PARALLEL_RUNS: usize = 6;
const SLOW_PAIR_KS: [u32; 4] = [2, 5, 8, 11];
const DNB_MIN_ATTAINMENT: f64 = 0.50;
const MS_SLOW_DEQUEUER_MAX: f64 = 0.05;
const MS_SLOW_ENQUEUER_MAX_8X8: f64 = 0.15;
const RATIO_BAND: (f64, f64) = (60.0, 110.0);
const INDEPENDENCE_TOLERANCE: f64 = 0.15;

const LIVENESS_SEEDS: u64 = 100;
const LIVENESS_NEED: u64 = 100;
const LIVENESS_BUDGET: u64 = 1_000_000;

struct Outcome {
    criterion: u8,
    pass: bool,
    detail: String,
}

fn line(o: &Outcome) -> String {
    format!(
        "[{}] criterion {}: {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.criterion,
        o.detail
    )
}

fn record(all: &mut Vec<Outcome>, criterion: u8, pass: bool, detail: String) {
    let o = Outcome {
        criterion,
        pass,
        detail,
    };
    println!("{}", line(&o));
    all.push(o);
}

fn run_secs() -> f64 {
    std::env::var("DNBQ_ACCEPT_SECS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(RUN_SECS)
}

fn sequential_mismatches<Q: ConcurrentQueue<u64>>(make: impl Fn() -> Q) -> u64 {
    let mut mismatches = 0;
    for seed in 0..SEQ_PROGRAMS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = make();
        let mut h = q.attach(NoHook);
        let mut model = VecDeque::new();
        let len = rng.random_range(0..=SEQ_MAX_OPS);
        let enq_bias = rng.random_range(0.2..0.8);
        for i in 0..len as u64 {
            if rng.random_bool(enq_bias) {
                h.enqueue(i);
                model.push_back(i);
            } else if h.dequeue() != model.pop_front() {
                mismatches += 1;
                break;
            }
        }
    }
    mismatches
}

fn criterion_1(all: &mut Vec<Outcome>) {
    let dnb = sequential_mismatches(DnbQueue::new);
    let ms = sequential_mismatches(MsQueue::new);
    record(
        all,
        1,
        dnb == 0 && ms == 0,
        format!("sequential conformance over {SEQ_PROGRAMS} programs: dnb2 {dnb} mismatches, ms {ms} (allowed 0)"),
    );
}

fn criterion_2(all: &mut Vec<Outcome>) {
    let mut parts = Vec::new();
    let mut pass = true;
    for target in [Target::Dnb2, Target::Ms, Target::UniversalCounter] {
        let cfg = CampaignConfig::new(target, CAMPAIGN_PROCS, CAMPAIGN_OPS, 0..CAMPAIGN_SEEDS);
        let r = random_history_campaign(&cfg);
        pass &= r.is_clean() && r.runs == CAMPAIGN_SEEDS;
        parts.push(format!(
            "{target} {}/{} clean",
            r.runs - r.failure_count(),
            r.runs
        ));
    }
    let cfg = CampaignConfig::new(
        Target::Dnb2Mutant,
        CAMPAIGN_PROCS,
        CAMPAIGN_OPS,
        0..CAMPAIGN_SEEDS,
    )
    .stop_after(1);
    let r = random_history_campaign(&cfg);
    let caught = r.failure_count() >= 1;
    pass &= caught;
    let how = r.failures.first().map_or("none".to_string(), |f| {
        format!("seed {} {:?}", f.seed, f.kind)
    });
    parts.push(format!("mutant caught after {} seeds ({how})", r.runs));
    record(
        all,
        2,
        pass,
        format!("linearizability campaign: {}", parts.join(", ")),
    );
}

fn criterion_3(all: &mut Vec<Outcome>) {
    let mut agree = 0;
    let mut rejected = 0;
    for seed in 0..CHECKER_HISTORIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = common::random_queue_history(&mut rng, CHECKER_MAX_OPS);
        let fast = check(&h, &QueueSpec).unwrap().linearizable;
        if fast == brute_force(&h, &QueueSpec) {
            agree += 1;
        }
        if !fast {
            rejected += 1;
        }
    }
    record(
        all,
        3,
        agree == CHECKER_HISTORIES,
        format!(
            "checker agrees with full enumeration on {agree}/{CHECKER_HISTORIES} histories ({rejected} not linearizable)"
        ),
    );
}

fn criterion_4(all: &mut Vec<Outcome>) {
    let out = dnb_stress(STRESS_SIDE, STRESS_SIDE, STRESS_PER_THREAD, 1);
    let pass = out.ops >= STRESS_MIN_OPS
        && out.trace.violations.is_empty()
        && out.value_errors.is_empty()
        && out.probe.is_none();
    let mut detail = format!(
        "{STRESS_SIDE}+{STRESS_SIDE} traced stress, {} ops, {} appends, {} installs, {} violations",
        out.ops,
        out.trace.appends,
        out.trace.installs,
        out.trace.violations.len() + out.value_errors.len() + out.probe.iter().count()
    );
    if let Some(v) = out
        .trace
        .violations
        .iter()
        .chain(&out.value_errors)
        .chain(&out.probe)
        .next()
    {
        detail += &format!(" (first: {v})");
    }
    record(all, 4, pass, detail);
}

fn criterion_9(all: &mut Vec<Outcome>) {
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, target) in [
        ("enqueue", LiveTarget::Enqueue),
        ("dequeue", LiveTarget::Dequeue),
        ("universal", LiveTarget::Universal),
    ] {
        let mut timeouts = 0;
        let mut worst = 0;
        for seed in 0..LIVENESS_SEEDS {
            let r = liveness_run(target, seed, LIVENESS_NEED, LIVENESS_BUDGET);
            if r.outcome != RunOutcome::Goal || !r.reached(LIVENESS_NEED) {
                timeouts += 1;
            }
            worst = worst.max(r.steps);
        }
        pass &= timeouts == 0;
        parts.push(format!("{name} {timeouts} timeouts (most steps {worst})"));
    }
    record(
        all,
        9,
        pass,
        format!(
            "paused announcer, two others reach {LIVENESS_NEED} ops within {LIVENESS_BUDGET} steps over {LIVENESS_SEEDS} seeds: {}",
            parts.join(", ")
        ),
    );
}

/// Timed experiments, run together so they can share the machine.
struct Experiments {
    slow_pair_dnb: Vec<(u32, Vec<FairnessReport>)>,
    slow_pair_ms: Vec<FairnessReport>,
    eight: Vec<(Setting, Algorithm, Vec<FairnessReport>)>,
    enq_only: Vec<FairnessReport>,
    deq_only: Vec<FairnessReport>,
}

fn run_experiments(secs: f64) -> Experiments {
    let duration = Duration::from_secs_f64(secs);
    let seeded = |cfg: ExperimentConfig| -> Vec<ExperimentConfig> {
        (0..FAIRNESS_SEEDS)
            .map(|s| cfg.clone().with_duration(duration).with_seed(s))
            .collect()
    };
    let mut groups: Vec<Vec<ExperimentConfig>> = Vec::new();
    for &k in &SLOW_PAIR_KS {
        groups.push(seeded(ExperimentConfig::slow_pair(Algorithm::Dnb2, k)));
    }
    groups.push(seeded(ExperimentConfig::slow_pair(Algorithm::Ms, 11)));
    for setting in Setting::ALL {
        for alg in [Algorithm::Dnb2, Algorithm::Ms] {
            groups.push(seeded(ExperimentConfig::eight_by_eight(alg, setting)));
        }
    }
    for mode in [Mode::EnqOnly, Mode::DeqOnly] {
        groups.push(seeded(
            ExperimentConfig::eight_by_eight(Algorithm::Dnb2, Setting::Uniform).with_mode(mode),
        ));
    }
    let flat: Vec<ExperimentConfig> = groups.iter().flatten().cloned().collect();
    let mut results = run_batch(&flat, PARALLEL_RUNS)
        .into_iter()
        .map(|r| r.expect("experiment failed to run"));
    let mut take =
        || -> Vec<FairnessReport> { results.by_ref().take(FAIRNESS_SEEDS as usize).collect() };
    let slow_pair_dnb = SLOW_PAIR_KS.iter().map(|&k| (k, take())).collect();
    let slow_pair_ms = take();
    let mut eight = Vec::new();
    for setting in Setting::ALL {
        for alg in [Algorithm::Dnb2, Algorithm::Ms] {
            eight.push((setting, alg, take()));
        }
    }
    let enq_only = take();
    let deq_only = take();
    Experiments {
        slow_pair_dnb,
        slow_pair_ms,
        eight,
        enq_only,
        deq_only,
    }
}

fn attainment_median(reports: &[FairnessReport], process: usize) -> f64 {
    let v: Vec<f64> = reports
        .iter()
        .map(|r| r.process(process).unwrap().attainment)
        .collect();
    median(&v)
}

fn ops_median(reports: &[FairnessReport], process: usize) -> f64 {
    let v: Vec<f64> = reports
        .iter()
        .map(|r| r.process(process).unwrap().ops as f64)
        .collect();
    median(&v)
}

fn eight_runs(e: &Experiments, setting: Setting, alg: Algorithm) -> &[FairnessReport] {
    &e.eight
        .iter()
        .find(|(s, a, _)| *s == setting && *a == alg)
        .unwrap()
        .2
}

fn audits_clean(e: &Experiments) -> bool {
    e.slow_pair_dnb
        .iter()
        .flat_map(|(_, r)| r)
        .chain(&e.slow_pair_ms)
        .chain(e.eight.iter().flat_map(|(_, _, r)| r))
        .chain(&e.enq_only)
        .chain(&e.deq_only)
        .all(|r| r.audit.is_clean())
}

fn criterion_5(all: &mut Vec<Outcome>, e: &Experiments) {
    // slow pair: processes 1 (enqueuer) and 3 (dequeuer)
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, runs) in &e.slow_pair_dnb {
        let enq = attainment_median(runs, 1);
        let deq = attainment_median(runs, 3);
        pass &= enq >= DNB_MIN_ATTAINMENT && deq >= DNB_MIN_ATTAINMENT;
        parts.push(format!("k={k} {:.0}%/{:.0}%", 100.0 * enq, 100.0 * deq));
    }
    let ms_deq = attainment_median(&e.slow_pair_ms, 3);
    let ms_enq = attainment_median(&e.slow_pair_ms, 1);
    pass &= ms_deq <= MS_SLOW_DEQUEUER_MAX;
    record(
        all,
        5,
        pass,
        format!(
            "2+2 slow pair, median of {FAIRNESS_SEEDS} seeds, slow enqueuer/dequeuer attainment: dnb2 {} (need >= {:.0}%); ms k=11 slow dequeuer {:.1}% (need <= {:.0}%), slow enqueuer {:.1}%",
            parts.join(" "),
            100.0 * DNB_MIN_ATTAINMENT,
            100.0 * ms_deq,
            100.0 * MS_SLOW_DEQUEUER_MAX,
            100.0 * ms_enq
        ),
    );
}

fn criterion_6(all: &mut Vec<Outcome>, e: &Experiments) {
    let mut pass = true;
    let mut parts = Vec::new();
    for setting in [Setting::Linear, Setting::Geometric] {
        let runs = eight_runs(e, setting, Algorithm::Dnb2);
        // the slowest process of each group is the last one
        let enq = attainment_median(runs, 7);
        let deq = attainment_median(runs, 15);
        let slowest = enq.min(deq);
        pass &= slowest >= DNB_MIN_ATTAINMENT;
        parts.push(format!(
            "dnb2 {setting} slowest enqueuer {:.0}% dequeuer {:.0}%",
            100.0 * enq,
            100.0 * deq
        ));
    }
    let ms = attainment_median(eight_runs(e, Setting::Linear, Algorithm::Ms), 7);
    pass &= ms <= MS_SLOW_ENQUEUER_MAX_8X8;
    parts.push(format!("ms linear slowdown-8 enqueuer {:.1}%", 100.0 * ms));
    record(
        all,
        6,
        pass,
        format!(
            "8+8 fairness, median of {FAIRNESS_SEEDS} seeds: {} (need dnb2 >= {:.0}%, ms <= {:.0}%)",
            parts.join(", "),
            100.0 * DNB_MIN_ATTAINMENT,
            100.0 * MS_SLOW_ENQUEUER_MAX_8X8
        ),
    );
}

fn summed(runs: &[FairnessReport]) -> Throughput {
    runs.iter()
        .map(Throughput::from)
        .fold(Throughput::default(), |a, t| Throughput {
            enqueue: a.enqueue + t.enqueue,
            dequeue: a.dequeue + t.dequeue,
            total: a.total + t.total,
        })
}

fn criterion_7(all: &mut Vec<Outcome>, e: &Experiments) {
    let rows: Vec<ThroughputRow> = Setting::ALL
        .iter()
        .map(|&setting| ThroughputRow {
            setting,
            ms: summed(eight_runs(e, setting, Algorithm::Ms)),
            dnb2: summed(eight_runs(e, setting, Algorithm::Dnb2)),
        })
        .collect();
    println!(
        "8+8 throughput summed over {FAIRNESS_SEEDS} seeds:\n{}",
        throughput_table(&rows)
    );
    let pass = rows
        .iter()
        .all(|r| (RATIO_BAND.0..=RATIO_BAND.1).contains(&r.ratio()));
    let parts: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{} {:.2}% (reference {:.2}%)",
                r.setting,
                r.ratio(),
                reference_ratio(r.setting)
            )
        })
        .collect();
    record(
        all,
        7,
        pass,
        format!(
            "dnb2/ms throughput {} (need {:.0}%..{:.0}%)",
            parts.join(", "),
            RATIO_BAND.0,
            RATIO_BAND.1
        ),
    );
}

fn criterion_8(all: &mut Vec<Outcome>, e: &Experiments) {
    let both = eight_runs(e, Setting::Uniform, Algorithm::Dnb2);
    let mut worst: [(f64, usize); 2] = [(0.0, 0); 2];
    for p in 0..16 {
        let alone = if p < 8 { &e.enq_only } else { &e.deq_only };
        let (b, a) = (ops_median(both, p), ops_median(alone, p));
        let dev = if a > 0.0 {
            (b - a).abs() / a
        } else {
            f64::INFINITY
        };
        let slot = &mut worst[usize::from(both[0].config.role(p) == Role::Dequeuer)];
        if dev >= slot.0 {
            *slot = (dev, p);
        }
    }
    let pass = worst.iter().all(|&(d, _)| d <= INDEPENDENCE_TOLERANCE);
    record(
        all,
        8,
        pass,
        format!(
            "dnb2 8+8 uniform, per-process median ops with both groups vs one group: worst enqueuer {:.1}% (process {}), worst dequeuer {:.1}% (process {}) (need <= {:.0}%)",
            100.0 * worst[0].0,
            worst[0].1,
            100.0 * worst[1].0,
            worst[1].1,
            100.0 * INDEPENDENCE_TOLERANCE
        ),
    );
}

fn main() {
    // runs as a plain binary so its report is never captured
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let t0 = Instant::now();
    let mut all = Vec::new();
    criterion_1(&mut all);
    criterion_2(&mut all);
    criterion_3(&mut all);
    criterion_4(&mut all);
    criterion_9(&mut all);
    let secs = run_secs();
    println!("running timed experiments at {secs} s each, {PARALLEL_RUNS} at a time");
    let e = run_experiments(secs);
    criterion_5(&mut all, &e);
    criterion_6(&mut all, &e);
    criterion_7(&mut all, &e);
    criterion_8(&mut all, &e);
    let clean = audits_clean(&e);
    println!("timed runs audit clean: {clean}");

    all.sort_by_key(|o| o.criterion);
    println!(
        "\nacceptance summary ({:.0} s):",
        t0.elapsed().as_secs_f64()
    );
    for o in &all {
        println!("{}", line(o));
    }
    let failed: Vec<u8> = all
        .iter()
        .filter(|o| !o.pass)
        .map(|o| o.criterion)
        .collect();
    if !clean {
        println!("a timed run lost, duplicated or reordered values");
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
    }
    if !clean || !failed.is_empty() {
        std::process::exit(1);
    }
}
