//! The universal construction: a shared fetch-and-add counter, and a
//! user-defined object built from its sequential specification.
//!
//! ```text
//! cargo run --release --example universal_counter
//! ```

use std::thread;

use dnbq::universal::{Counter, CounterOp, SeqSpec, Universal2Nb};

/// Keeps the largest value offered so far.
struct MaxRegister;

impl SeqSpec for MaxRegister {
    type State = u64;
    type Op = u64;
    type Response = u64;

    fn apply(&self, offer: &u64, best: &u64) -> (u64, u64) {
        let next = (*best).max(*offer);
        (next, next)
    }
}

fn main() {
    let counter = Universal2Nb::new(Counter, 0);
    thread::scope(|s| {
        for _ in 0..4 {
            s.spawn(|| {
                let mut h = counter.handle();
                for _ in 0..5000 {
                    h.invoke(CounterOp::Add(1));
                }
            });
        }
    });
    println!(
        "counter after 4 x 5000 increments: {}",
        counter.invoke(CounterOp::Get)
    );

    let offer = |t: u64, i: u64| (i * 7 + t * 13) % 5000;
    let max = Universal2Nb::new(MaxRegister, 0);
    thread::scope(|s| {
        for t in 0..4u64 {
            let (max, offer) = (&max, &offer);
            s.spawn(move || {
                let mut h = max.handle();
                for i in 0..1000 {
                    h.invoke(offer(t, i));
                }
            });
        }
    });
    let expected = (0..4)
        .flat_map(|t| (0..1000).map(move |i| offer(t, i)))
        .max()
        .unwrap();
    println!("max register holds {} (expected {expected})", max.state());
}
