//! A controlled scheduler for deterministic interleavings.
//!
//! Each simulated process runs on its own OS thread, but only one of them is
//! allowed to run at any moment. A process yields back to the controller
//! after every shared-memory access (through [`SimHook`], a [`StepHook`]), so
//! the controller decides the exact interleaving of accesses: scripted, for
//! unit tests that freeze a process at a chosen line, or seeded-random, for
//! campaigns and liveness runs. Given the same decisions, a run is
//! reproducible.
//!
//! Dropping the [`Sim`] aborts processes that have not finished by unwinding
//! them out of their current yield point.

use std::any::Any;
use std::fmt;
use std::panic::{self, AssertUnwindSafe};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};

use rand::Rng;

use crate::hook::{Step, StepHook};

pub type Pid = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Spawned, not scheduled yet.
    Ready,
    /// Stopped right after the given access.
    Yielded(Step),
    Running,
    Finished,
    /// The process closure panicked.
    Panicked,
    Aborted,
}

impl Status {
    pub fn is_done(self) -> bool {
        matches!(self, Status::Finished | Status::Panicked | Status::Aborted)
    }
}

/// How [`Sim::run_random`] stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    /// The goal predicate became true.
    Goal,
    /// No process is runnable (all finished or paused).
    Quiescent,
    BudgetExhausted,
}

struct State {
    turn: Option<Pid>,
    status: Vec<Status>,
    abort: bool,
}

struct Shared {
    state: Mutex<State>,
    cv: Condvar,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }
}

struct Abort;

type Outcome = Result<Box<dyn Any + Send>, Box<dyn Any + Send>>;

/// The hook a simulated process passes to the algorithm under test.
pub struct SimHook {
    shared: Arc<Shared>,
    id: Pid,
}

impl fmt::Debug for SimHook {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SimHook({})", self.id)
    }
}

impl SimHook {
    pub fn pid(&self) -> Pid {
        self.id
    }
}

impl StepHook for SimHook {
    fn after_access(&mut self, step: Step) {
        let mut st = self.shared.lock();
        st.status[self.id] = Status::Yielded(step);
        st.turn = None;
        self.shared.cv.notify_all();
        while st.turn != Some(self.id) && !st.abort {
            st = self.shared.cv.wait(st).unwrap_or_else(|e| e.into_inner());
        }
        if st.abort {
            drop(st);
            panic::resume_unwind(Box::new(Abort));
        }
        st.status[self.id] = Status::Running;
    }
}

pub struct Sim {
    shared: Arc<Shared>,
    threads: Vec<Option<JoinHandle<Outcome>>>,
    results: Vec<Option<Outcome>>,
    steps: u64,
}

impl fmt::Debug for Sim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Sim")
            .field("status", &self.shared.lock().status)
            .field("steps", &self.steps)
            .finish()
    }
}

impl Default for Sim {
    fn default() -> Self {
        Self::new()
    }
}

impl Sim {
    pub fn new() -> Self {
        Sim {
            shared: Arc::new(Shared {
                state: Mutex::new(State {
                    turn: None,
                    status: Vec::new(),
                    abort: false,
                }),
                cv: Condvar::new(),
            }),
            threads: Vec::new(),
            results: Vec::new(),
            steps: 0,
        }
    }

    /// Spawn a process. It does not run until scheduled.
    pub fn spawn<F, R>(&mut self, body: F) -> Pid
    where
        F: FnOnce(SimHook) -> R + Send + 'static,
        R: Send + 'static,
    {
        let id = {
            let mut st = self.shared.lock();
            st.status.push(Status::Ready);
            st.status.len() - 1
        };
        let shared = Arc::clone(&self.shared);
        let handle = thread::Builder::new()
            .name(format!("sim-{id}"))
            .spawn(move || {
                {
                    let mut st = shared.lock();
                    while st.turn != Some(id) && !st.abort {
                        st = shared.cv.wait(st).unwrap_or_else(|e| e.into_inner());
                    }
                    if st.abort {
                        st.status[id] = Status::Aborted;
                        return Err(Box::new(Abort) as Box<dyn Any + Send>);
                    }
                    st.status[id] = Status::Running;
                }
                let hook = SimHook {
                    shared: Arc::clone(&shared),
                    id,
                };
                let result = panic::catch_unwind(AssertUnwindSafe(move || body(hook)));
                let mut st = shared.lock();
                st.status[id] = match &result {
                    Ok(_) => Status::Finished,
                    Err(payload) if payload.is::<Abort>() => Status::Aborted,
                    Err(_) => Status::Panicked,
                };
                st.turn = None;
                shared.cv.notify_all();
                result.map(|r| Box::new(r) as Box<dyn Any + Send>)
            })
            .expect("failed to spawn simulated process");
        self.threads.push(Some(handle));
        self.results.push(None);
        id
    }

    pub fn status(&self, id: Pid) -> Status {
        self.shared.lock().status[id]
    }

    pub fn is_done(&self, id: Pid) -> bool {
        self.status(id).is_done()
    }

    pub fn len(&self) -> usize {
        self.threads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.threads.is_empty()
    }

    /// Scheduling decisions taken so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Let `id` run up to its next yield point (or completion).
    pub fn step(&mut self, id: Pid) -> Status {
        let mut st = self.shared.lock();
        assert!(
            !st.status[id].is_done(),
            "process {id} cannot be scheduled: {:?}",
            st.status[id]
        );
        st.turn = Some(id);
        st.status[id] = Status::Running;
        self.shared.cv.notify_all();
        while st.turn == Some(id) {
            st = self.shared.cv.wait(st).unwrap_or_else(|e| e.into_inner());
        }
        self.steps += 1;
        st.status[id]
    }

    /// Step `id` until it yields at a step satisfying `stop`. Returns that
    /// step, or `None` if the process finished first.
    pub fn run_until(&mut self, id: Pid, mut stop: impl FnMut(Step) -> bool) -> Option<Step> {
        loop {
            match self.step(id) {
                Status::Yielded(s) if stop(s) => return Some(s),
                Status::Yielded(_) | Status::Running | Status::Ready => {}
                _ => return None,
            }
        }
    }

    /// Step `id` until it yields at the `nth` (1-based) occurrence of `step`.
    pub fn run_to_nth(&mut self, id: Pid, step: Step, nth: usize) -> bool {
        let mut seen = 0;
        self.run_until(id, |s| {
            if s == step {
                seen += 1;
            }
            seen == nth
        })
        .is_some()
    }

    /// Run `id` to completion and return its result.
    pub fn finish<R: 'static>(&mut self, id: Pid) -> R {
        while !self.is_done(id) {
            self.step(id);
        }
        self.join(id)
    }

    /// Result of a finished process. Panics if it did not finish normally.
    pub fn join<R: 'static>(&mut self, id: Pid) -> R {
        match self.take_outcome(id) {
            Some(Ok(boxed)) => *boxed.downcast::<R>().expect("result type mismatch"),
            Some(Err(payload)) => panic::resume_unwind(payload),
            None => panic!("process {id} has not finished"),
        }
    }

    /// Result of a finished process, or `None` if it panicked or was aborted.
    pub fn try_join<R: 'static>(&mut self, id: Pid) -> Option<R> {
        match self.take_outcome(id) {
            Some(Ok(boxed)) => boxed.downcast::<R>().ok().map(|b| *b),
            _ => None,
        }
    }

    /// Panic message of a process that panicked.
    pub fn panic_message(&mut self, id: Pid) -> Option<String> {
        self.collect(id);
        match &self.results[id] {
            Some(Err(p)) if !p.is::<Abort>() => Some(
                p.downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "non-string panic".into()),
            ),
            _ => None,
        }
    }

    fn collect(&mut self, id: Pid) {
        if self.results[id].is_none() && self.is_done(id) {
            if let Some(handle) = self.threads[id].take() {
                self.results[id] = Some(handle.join().unwrap_or_else(Err));
            }
        }
    }

    fn take_outcome(&mut self, id: Pid) -> Option<Outcome> {
        self.collect(id);
        self.results[id].take()
    }

    /// Schedule uniformly at random among runnable processes.
    ///
    /// `paused(id, status)` is consulted before each decision; paused
    /// processes are not scheduled. Stops when `goal()` holds, when nothing
    /// is runnable, or after `budget` decisions.
    pub fn run_random<G: Rng>(
        &mut self,
        rng: &mut G,
        budget: u64,
        mut paused: impl FnMut(Pid, Status) -> bool,
        mut goal: impl FnMut() -> bool,
    ) -> RunOutcome {
        let start = self.steps;
        let mut runnable = Vec::with_capacity(self.len());
        loop {
            if goal() {
                return RunOutcome::Goal;
            }
            if self.steps - start >= budget {
                return RunOutcome::BudgetExhausted;
            }
            runnable.clear();
            {
                let st = self.shared.lock();
                for (id, s) in st.status.iter().enumerate() {
                    if !s.is_done() && !paused(id, *s) {
                        runnable.push(id);
                    }
                }
            }
            if runnable.is_empty() {
                return RunOutcome::Quiescent;
            }
            let id = runnable[rng.random_range(0..runnable.len())];
            self.step(id);
        }
    }

    fn abort_all(&mut self) {
        {
            let mut st = self.shared.lock();
            st.abort = true;
            self.shared.cv.notify_all();
        }
        for id in 0..self.threads.len() {
            if let Some(handle) = self.threads[id].take() {
                self.results[id] = Some(handle.join().unwrap_or_else(Err));
            }
        }
    }
}

impl Drop for Sim {
    fn drop(&mut self) {
        self.abort_all();
    }
}
