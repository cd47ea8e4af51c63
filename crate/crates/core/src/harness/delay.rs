use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::hook::{Step, StepHook};

/// Draw an exponentially distributed delay with the given mean.
///
/// # Panics
///
/// If `mean` is zero.
pub fn sample_delay<R: Rng + ?Sized>(rng: &mut R, mean: Duration) -> Duration {
    assert!(!mean.is_zero(), "mean delay must be positive");
    let exp = Exp::new(1.0 / mean.as_secs_f64()).expect("positive rate");
    Duration::from_secs_f64(exp.sample(rng))
}

/// Sleeps for an exponentially distributed time after every shared access.
///
/// Once the deadline passes the hook stops sleeping, so operations still in
/// flight finish quickly.
pub struct DelayHook<R> {
    rng: R,
    exp: Exp<f64>,
    deadline: Instant,
    accesses: u64,
    delays: u64,
}

impl<R: Rng> DelayHook<R> {
    pub fn new(rng: R, mean: Duration, deadline: Instant) -> Self {
        assert!(!mean.is_zero(), "mean delay must be positive");
        DelayHook {
            rng,
            exp: Exp::new(1.0 / mean.as_secs_f64()).expect("positive rate"),
            deadline,
            accesses: 0,
            delays: 0,
        }
    }

    pub fn accesses(&self) -> u64 {
        self.accesses
    }

    pub fn delays(&self) -> u64 {
        self.delays
    }

    pub fn deadline(&self) -> Instant {
        self.deadline
    }
}

impl<R: Rng> StepHook for DelayHook<R> {
    fn after_access(&mut self, _: Step) {
        self.accesses += 1;
        let now = Instant::now();
        if now >= self.deadline {
            return;
        }
        self.delays += 1;
        let d = Duration::from_secs_f64(self.exp.sample(&mut self.rng));
        std::thread::sleep(d.min(self.deadline - now));
    }
}

/// Ask the kernel for fine-grained sleep wakeups on the calling thread.
#[cfg(target_os = "linux")]
pub(crate) fn tighten_timer_slack() -> std::io::Result<()> {
    // SAFETY: PR_SET_TIMERSLACK takes an integer argument and touches no memory.
    let rc = unsafe { libc::prctl(libc::PR_SET_TIMERSLACK, 1 as libc::c_ulong, 0, 0, 0) };
    if rc == 0 {
        Ok(())
    } else {
        Err(std::io::Error::last_os_error())
    }
}

#[cfg(not(target_os = "linux"))]
pub(crate) fn tighten_timer_slack() -> std::io::Result<()> {
    Ok(())
}
