//! Doubly-nonblocking FIFO queues and the tools to test them.
//!
//! * [`dnb::DnbQueue`]: a queue whose enqueuers only need each other to be
//!   lock-free, and likewise for dequeuers, so that a slow dequeuer cannot be
//!   starved by fast ones and vice versa.
//! * [`ms::MsQueue`]: the classic Michael-Scott lock-free queue, for comparison.
//! * [`universal::Universal2Nb`]: a universal construction that gives any
//!   sequential object the same two-group progress property.
//! * [`lincheck`]: history recording and a linearizability checker.
//! * [`sched::Sim`]: a deterministic scheduler that interleaves processes at
//!   the granularity of single shared-memory accesses.
//! * [`harness`]: fairness and throughput experiments with per-process
//!   slowdowns.
//!
//! Every shared access made by the algorithms calls
//! [`StepHook::after_access`](hook::StepHook::after_access), which is how the
//! scheduler and the benchmark harness insert their pauses. With the default
//! [`NoHook`](hook::NoHook) this compiles to nothing.

pub mod dnb;
pub mod harness;
pub mod hook;
pub mod lincheck;
pub mod ms;
pub mod queue;
pub mod sched;
pub mod universal;

pub use dnb::DnbQueue;
pub use hook::{NoHook, Step, StepHook};
pub use ms::MsQueue;
pub use queue::{Algorithm, ConcurrentQueue, QueueHandle};
pub use universal::{SeqSpec, Universal2Nb};
