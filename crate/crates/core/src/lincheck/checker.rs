//! Exhaustive linearizability search with memoization (Wing-Gong style).
//!
//! The search repeatedly picks an operation that may be linearized next:
//! one not yet linearized whose real-time predecessors all are. Completed
//! operations must produce their recorded response; pending operations may
//! either be left out or be linearized with whatever response the
//! specification gives them, which covers every completion of the history
//! because the specifications are deterministic. Configurations (set of
//! linearized operations, object state) already known to be dead ends are
//! memoized and skipped.

use std::collections::HashSet;

use super::history::{History, HistoryError, Operation};
use super::spec::Specification;

/// Histories with more operations than this are refused by [`check`].
pub const DEFAULT_OP_LIMIT: usize = 24;

/// Hard limit of the bitset representation.
const MAX_OPS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub linearizable: bool,
    /// Operation indices (into [`History::operations`]) in linearization
    /// order. Pending operations left out of the completion do not appear.
    pub witness: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error("history has {ops} operations, limit is {limit}")]
    TooLarge { ops: usize, limit: usize },
    #[error("malformed history: {0}")]
    Malformed(#[from] HistoryError),
    #[error("specification does not support operation {0}")]
    Unsupported(String),
}

pub fn check<S: Specification>(history: &History, spec: &S) -> Result<Verdict, CheckError> {
    check_with_limit(history, spec, DEFAULT_OP_LIMIT)
}

pub fn check_with_limit<S: Specification>(
    history: &History,
    spec: &S,
    limit: usize,
) -> Result<Verdict, CheckError> {
    let ops = history.operations()?;
    let limit = limit.min(MAX_OPS);
    if ops.len() > limit {
        return Err(CheckError::TooLarge {
            ops: ops.len(),
            limit,
        });
    }
    let mut search = Search::new(&ops, spec);
    let found = search.run(0, spec.initial())?;
    Ok(Verdict {
        linearizable: found,
        witness: found.then(|| search.path.clone()),
    })
}

struct Search<'a, S: Specification> {
    ops: &'a [Operation],
    spec: &'a S,
    /// Bitmask of operations that must be linearized before each operation.
    preds: Vec<u64>,
    required: u64,
    dead: HashSet<(u64, S::State)>,
    path: Vec<usize>,
}

impl<'a, S: Specification> Search<'a, S> {
    fn new(ops: &'a [Operation], spec: &'a S) -> Self {
        let preds = ops
            .iter()
            .map(|b| {
                ops.iter()
                    .enumerate()
                    .filter(|(_, a)| a.precedes(b))
                    .fold(0u64, |m, (i, _)| m | (1 << i))
            })
            .collect();
        let required = ops
            .iter()
            .enumerate()
            .filter(|(_, o)| !o.is_pending())
            .fold(0u64, |m, (i, _)| m | (1 << i));
        Search {
            ops,
            spec,
            preds,
            required,
            dead: HashSet::new(),
            path: Vec::new(),
        }
    }

    fn run(&mut self, done: u64, state: S::State) -> Result<bool, CheckError> {
        if done & self.required == self.required {
            return Ok(true);
        }
        if self.dead.contains(&(done, state.clone())) {
            return Ok(false);
        }
        for i in 0..self.ops.len() {
            let bit = 1u64 << i;
            if done & bit != 0 || self.preds[i] & !done != 0 {
                continue;
            }
            let op = &self.ops[i];
            let (next, ret) = self
                .spec
                .apply(&state, op.op, op.arg)
                .ok_or_else(|| CheckError::Unsupported(op.op.to_string()))?;
            if let Some(observed) = op.ret {
                if observed != ret {
                    continue;
                }
            }
            self.path.push(i);
            if self.run(done | bit, next)? {
                return Ok(true);
            }
            self.path.pop();
        }
        self.dead.insert((done, state));
        Ok(false)
    }
}
