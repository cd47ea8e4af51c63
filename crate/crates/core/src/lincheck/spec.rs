//! Sequential specifications the checker can test histories against.

use std::collections::VecDeque;
use std::hash::Hash;

use super::history::{OpName, Ret};

/// A deterministic sequential object. `apply` returns `None` for operations
/// the object does not support.
pub trait Specification {
    type State: Clone + Eq + Hash;

    fn initial(&self) -> Self::State;

    fn apply(
        &self,
        state: &Self::State,
        op: OpName,
        arg: Option<i64>,
    ) -> Option<(Self::State, Ret)>;
}

/// FIFO queue of integers: `enqueue v -> done`, `dequeue -> front | bot`.
#[derive(Debug, Clone, Copy, Default)]
pub struct QueueSpec;

impl Specification for QueueSpec {
    type State = VecDeque<i64>;

    fn initial(&self) -> Self::State {
        VecDeque::new()
    }

    fn apply(
        &self,
        state: &Self::State,
        op: OpName,
        arg: Option<i64>,
    ) -> Option<(Self::State, Ret)> {
        let mut next = state.clone();
        match op {
            OpName::Enqueue => {
                next.push_back(arg?);
                Some((next, Ret::Done))
            }
            OpName::Dequeue => {
                let ret = next.pop_front().map_or(Ret::Bottom, Ret::Int);
                Some((next, ret))
            }
            _ => None,
        }
    }
}

/// Fetch-and-add counter: `add d -> previous value`, `get -> value`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CounterSpec;

impl Specification for CounterSpec {
    type State = i64;

    fn initial(&self) -> i64 {
        0
    }

    fn apply(&self, state: &i64, op: OpName, arg: Option<i64>) -> Option<(i64, Ret)> {
        match op {
            OpName::Add => Some((state + arg?, Ret::Int(*state))),
            OpName::Get => Some((*state, Ret::Int(*state))),
            _ => None,
        }
    }
}

/// Read/write register starting at 0: `write v -> done`, `read -> value`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RegisterSpec;

impl Specification for RegisterSpec {
    type State = i64;

    fn initial(&self) -> i64 {
        0
    }

    fn apply(&self, state: &i64, op: OpName, arg: Option<i64>) -> Option<(i64, Ret)> {
        match op {
            OpName::Write => Some((arg?, Ret::Done)),
            OpName::Read => Some((*state, Ret::Int(*state))),
            _ => None,
        }
    }
}
