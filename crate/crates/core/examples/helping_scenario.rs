//! A scripted race under the step scheduler: an enqueuer loses its link
//! CAS, announces its node, and the next enqueuer appends it first.
//!
//! ```text
//! cargo run --example helping_scenario
//! ```

use std::sync::Arc;

use dnbq::hook::{Step, StepLog};
use dnbq::sched::Sim;
use dnbq::DnbQueue;

fn main() {
    let q = Arc::new(DnbQueue::<i64>::new());
    let mut sim = Sim::new();
    let spawn = |sim: &mut Sim, v: i64| {
        let q = Arc::clone(&q);
        sim.spawn(move |hook| {
            let mut h = q.handle_with((StepLog::default(), hook));
            h.enqueue(v);
            h.hook().0.steps.clone()
        })
    };
    let slow = spawn(&mut sim, 7);
    let rival = spawn(&mut sim, 3);
    let helper = spawn(&mut sim, 9);

    sim.run_to_nth(slow, Step::ReadNodeFlag, 2);
    println!("slow enqueuer paused just before its link CAS");
    let steps: Vec<Step> = sim.finish(rival);
    println!("rival enqueued 3 in {} accesses", steps.len());
    let announced = sim.run_until(slow, |s| s.is_announcement());
    println!("slow enqueuer lost the race and made {announced:?}");

    let steps: Vec<Step> = sim.finish(helper);
    let links = steps.iter().filter(|&&s| s == Step::LinkCas).count();
    println!(
        "helper finished after {} accesses and {links} link CASes",
        steps.len()
    );
    let steps: Vec<Step> = sim.finish(slow);
    println!("slow enqueuer found its node threaded: {steps:?}");

    let mut q = Arc::try_unwrap(q).unwrap_or_else(|_| panic!("queue still shared"));
    println!("final contents {:?}", q.contents());
}
