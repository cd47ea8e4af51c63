//! Both queues behind the common trait, shared by a few threads.
//!
//! ```text
//! cargo run --release --example basic_queue
//! ```

use std::thread;

use dnbq::{ConcurrentQueue, DnbQueue, MsQueue, NoHook, QueueHandle};

const PRODUCERS: u64 = 3;
const PER_PRODUCER: u64 = 10_000;

fn exercise<Q: ConcurrentQueue<u64> + Sync>(name: &str, queue: &Q) {
    let taken: u64 = thread::scope(|s| {
        for p in 0..PRODUCERS {
            s.spawn(move || {
                let mut h = queue.attach(NoHook);
                for i in 0..PER_PRODUCER {
                    h.enqueue(p * PER_PRODUCER + i);
                }
            });
        }
        let consumers: Vec<_> = (0..2)
            .map(|_| {
                s.spawn(|| {
                    let mut h = queue.attach(NoHook);
                    let mut sum = 0;
                    for _ in 0..PER_PRODUCER {
                        sum += h.dequeue().unwrap_or(0);
                    }
                    sum
                })
            })
            .collect();
        consumers.into_iter().map(|c| c.join().unwrap()).sum()
    });
    let mut h = queue.attach(NoHook);
    let rest: u64 = std::iter::from_fn(|| h.dequeue()).sum();
    let n = PRODUCERS * PER_PRODUCER;
    println!(
        "{name}: sum of dequeued values {} (expected {})",
        taken + rest,
        n * (n - 1) / 2
    );
}

fn main() {
    let q = DnbQueue::new();
    q.enqueue(41);
    assert_eq!(q.dequeue(), Some(41));
    assert_eq!(q.dequeue(), None);
    exercise("dnb2", &q);
    exercise("ms", &MsQueue::new());
}
