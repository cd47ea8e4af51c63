use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::queue::Algorithm;

/// Which groups of processes take part in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Both,
    EnqOnly,
    /// Dequeuers only, on a queue filled up front so they take the same
    /// path as when enqueuers keep it non-empty.
    DeqOnly,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Both => "both",
            Mode::EnqOnly => "enq-only",
            Mode::DeqOnly => "deq-only",
        }
    }

    pub fn runs(self, role: Role) -> bool {
        !matches!(
            (self, role),
            (Mode::EnqOnly, Role::Dequeuer) | (Mode::DeqOnly, Role::Enqueuer)
        )
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "both" => Ok(Mode::Both),
            "enq-only" => Ok(Mode::EnqOnly),
            "deq-only" => Ok(Mode::DeqOnly),
            _ => Err(format!(
                "unknown mode `{s}` (expected both, enq-only or deq-only)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Enqueuer,
    Dequeuer,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Enqueuer => "enqueuer",
            Role::Dequeuer => "dequeuer",
        })
    }
}

/// One benchmark run.
///
/// Processes are numbered enqueuers first: `0..enqueuers` enqueue and
/// `enqueuers..enqueuers + dequeuers` dequeue. `slowdown[i]` is the factor
/// by which process `i`'s mean delay exceeds `base_delay_us`; an empty
/// vector means every process runs at full speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(rename = "impl")]
    pub algorithm: Algorithm,
    pub enqueuers: usize,
    pub dequeuers: usize,
    pub slowdown: Vec<u32>,
    pub base_delay_us: u64,
    pub duration_ms: u64,
    pub seed: u64,
    pub mode: Mode,
}

pub const DEFAULT_BASE_DELAY_US: u64 = 1000;

impl ExperimentConfig {
    pub fn new(algorithm: Algorithm, enqueuers: usize, dequeuers: usize) -> Self {
        ExperimentConfig {
            algorithm,
            enqueuers,
            dequeuers,
            slowdown: Vec::new(),
            base_delay_us: DEFAULT_BASE_DELAY_US,
            duration_ms: 30_000,
            seed: 0,
            mode: Mode::Both,
        }
    }

    /// Two enqueuers and two dequeuers; the second of each is slowed by `k`.
    pub fn slow_pair(algorithm: Algorithm, k: u32) -> Self {
        ExperimentConfig::new(algorithm, 2, 2).with_slowdown(vec![1, k, 1, k])
    }

    /// Eight enqueuers and eight dequeuers under one of the standard settings.
    pub fn eight_by_eight(algorithm: Algorithm, setting: Setting) -> Self {
        let group = setting.slowdowns(8);
        let slowdown = group.iter().chain(group.iter()).copied().collect();
        ExperimentConfig::new(algorithm, 8, 8).with_slowdown(slowdown)
    }

    pub fn with_slowdown(mut self, slowdown: Vec<u32>) -> Self {
        self.slowdown = slowdown;
        self
    }

    pub fn with_duration(mut self, duration: Duration) -> Self {
        self.duration_ms = duration.as_millis() as u64;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_base_delay(mut self, mu: Duration) -> Self {
        self.base_delay_us = mu.as_micros() as u64;
        self
    }

    pub fn processes(&self) -> usize {
        self.enqueuers + self.dequeuers
    }

    pub fn role(&self, process: usize) -> Role {
        if process < self.enqueuers {
            Role::Enqueuer
        } else {
            Role::Dequeuer
        }
    }

    pub fn slowdown_of(&self, process: usize) -> u32 {
        self.slowdown.get(process).copied().unwrap_or(1)
    }

    /// Mean delay after each shared access by `process`.
    pub fn mean_delay(&self, process: usize) -> Duration {
        Duration::from_micros(self.base_delay_us) * self.slowdown_of(process)
    }

    pub fn duration(&self) -> Duration {
        Duration::from_millis(self.duration_ms)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if !self.slowdown.is_empty() && self.slowdown.len() != self.processes() {
            return bad(format!(
                "slowdown has {} entries for {} processes",
                self.slowdown.len(),
                self.processes()
            ));
        }
        if let Some(k) = self.slowdown.iter().find(|&&k| k < 1) {
            return bad(format!("slowdown factor {k} is below 1"));
        }
        if self.duration_ms == 0 {
            return bad("duration must be positive".into());
        }
        if self.base_delay_us == 0 {
            return bad("base delay must be positive".into());
        }
        if self.processes() == 0 {
            return bad("no processes configured".into());
        }
        Ok(())
    }
}

/// The standard slowdown patterns for a group of processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    /// Everyone at full speed.
    Uniform,
    /// Process `i` (from 1) slowed by `i`.
    Linear,
    /// Process `i` (from 1) slowed by `2^(i-1)`.
    Geometric,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Uniform, Setting::Linear, Setting::Geometric];

    pub fn slowdowns(self, n: usize) -> Vec<u32> {
        (0..n as u32)
            .map(|i| match self {
                Setting::Uniform => 1,
                Setting::Linear => i + 1,
                Setting::Geometric => 1 << i,
            })
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Setting::Uniform => "uniform",
            Setting::Linear => "linear",
            Setting::Geometric => "geometric",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
