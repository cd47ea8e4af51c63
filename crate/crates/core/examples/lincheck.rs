//! Record a concurrent history, check it, then run small randomized
//! campaigns against the real queue and a deliberately broken one.
//!
//! ```text
//! cargo run --release --example lincheck
//! ```

use std::thread;

use dnbq::lincheck::{
    check, random_history_campaign, CampaignConfig, OpName, QueueSpec, Recorder, Ret, Target,
};
use dnbq::DnbQueue;

fn main() {
    let q = DnbQueue::<i64>::new();
    let rec = Recorder::with_capacity(64);
    thread::scope(|s| {
        for p in 0..3 {
            let (q, rec) = (&q, &rec);
            s.spawn(move || {
                let mut h = q.handle();
                for i in 0..3 {
                    let v = (10 * p + i) as i64;
                    rec.invoke(p, OpName::Enqueue, Some(v)).unwrap();
                    h.enqueue(v);
                    rec.respond(p, OpName::Enqueue, Ret::Done).unwrap();
                    rec.invoke(p, OpName::Dequeue, None).unwrap();
                    let got = h.dequeue();
                    rec.respond(p, OpName::Dequeue, got.map_or(Ret::Bottom, Ret::Int))
                        .unwrap();
                }
            });
        }
    });
    let history = rec.snapshot();
    print!("{}", history.to_text());
    let verdict = check(&history, &QueueSpec).unwrap();
    println!(
        "linearizable: {} witness {:?}\n",
        verdict.linearizable, verdict.witness
    );

    for target in [Target::Dnb2, Target::Ms, Target::Dnb2Mutant] {
        let cfg = CampaignConfig::new(target, 2..=4, 6..=12, 0..300).stop_after(1);
        let report = random_history_campaign(&cfg);
        println!("{report}");
        if let Some(f) = report.failures.first() {
            println!("first failure, {:?}:\n{f}", f.kind);
        }
    }
}
