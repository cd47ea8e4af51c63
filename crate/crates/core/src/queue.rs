//! The queue interface shared by the algorithms, plus allocation bookkeeping.

use std::fmt;
use std::ptr::NonNull;
use std::str::FromStr;

use crate::hook::StepHook;

/// One logical process's view of a concurrent queue.
///
/// `dequeue` returns `None` for the empty-queue result.
pub trait QueueHandle<T> {
    fn enqueue(&mut self, value: T);
    fn dequeue(&mut self) -> Option<T>;
}

/// A queue that hands out per-process handles carrying a [`StepHook`].
pub trait ConcurrentQueue<T>: Send + Sync {
    type Handle<'q, H: StepHook + 'q>: QueueHandle<T>
    where
        Self: 'q;

    fn attach<'q, H: StepHook + 'q>(&'q self, hook: H) -> Self::Handle<'q, H>;

    fn algorithm(&self) -> Algorithm;
}

/// Selects an algorithm by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dnb2,
    Ms,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dnb2 => "dnb2",
            Algorithm::Ms => "ms",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dnb2" | "dnb" => Ok(Algorithm::Dnb2),
            "ms" => Ok(Algorithm::Ms),
            other => Err(format!("unknown algorithm `{other}` (expected dnb2 or ms)")),
        }
    }
}

/// A heap allocation owned by a queue graveyard. Freed when dropped.
pub(crate) struct Owned<X>(pub(crate) NonNull<X>);

impl<X> Owned<X> {
    pub(crate) fn new(value: X) -> (Self, *mut X) {
        let ptr = Box::into_raw(Box::new(value));
        // SAFETY: Box::into_raw never returns null.
        (Owned(unsafe { NonNull::new_unchecked(ptr) }), ptr)
    }
}

// SAFETY: an `Owned<X>` is a uniquely owned box.
unsafe impl<X: Send> Send for Owned<X> {}

impl<X> Drop for Owned<X> {
    fn drop(&mut self) {
        // SAFETY: created from Box::into_raw and only dropped once.
        unsafe { drop(Box::from_raw(self.0.as_ptr())) }
    }
}

/// Allocate `value` and hand out a raw pointer; the allocation is recorded in
/// `owner` and lives until `owner` is dropped.
pub(crate) fn keep<X>(owner: &mut Vec<Owned<X>>, value: X) -> *mut X {
    let (owned, ptr) = Owned::new(value);
    owner.push(owned);
    ptr
}
