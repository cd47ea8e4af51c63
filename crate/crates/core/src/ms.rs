//! The Michael-Scott nonblocking queue, used as the baseline.
//!
//! This follows the original formulation step for step (dummy head node,
//! consistency re-reads of `tail`/`head`, tail repair by whoever notices it
//! lagging) without backoff or other tuning. The original's counted pointers
//! are not needed: nodes are never reclaimed while the queue is alive, so a
//! node address is never reused and identity CAS cannot suffer ABA.

use std::fmt;
use std::ptr;
use std::sync::atomic::{AtomicPtr, Ordering::SeqCst};
use std::sync::Mutex;

use crate::hook::{addr, NoHook, OpKind, Step, StepHook, Trace};
use crate::queue::{keep, Algorithm, ConcurrentQueue, Owned, QueueHandle};

pub struct MsNode<T> {
    value: Option<T>,
    next: AtomicPtr<MsNode<T>>,
}

pub struct MsQueue<T> {
    head: AtomicPtr<MsNode<T>>,
    tail: AtomicPtr<MsNode<T>>,
    graveyard: Mutex<Vec<Owned<MsNode<T>>>>,
}

// SAFETY: shared state is atomics plus queue-owned allocations.
unsafe impl<T: Send + Sync> Send for MsQueue<T> {}
unsafe impl<T: Send + Sync> Sync for MsQueue<T> {}

impl<T> fmt::Debug for MsQueue<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MsQueue")
            .field("head", &self.head.load(SeqCst))
            .field("tail", &self.tail.load(SeqCst))
            .finish_non_exhaustive()
    }
}

impl<T: Clone + Send + Sync> Default for MsQueue<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Clone + Send + Sync> MsQueue<T> {
    pub fn new() -> Self {
        let mut yard = Vec::new();
        let dummy = keep(
            &mut yard,
            MsNode {
                value: None,
                next: AtomicPtr::new(ptr::null_mut()),
            },
        );
        MsQueue {
            head: AtomicPtr::new(dummy),
            tail: AtomicPtr::new(dummy),
            graveyard: Mutex::new(yard),
        }
    }

    pub fn handle(&self) -> MsHandle<'_, T> {
        self.handle_with(NoHook)
    }

    pub fn handle_with<H: StepHook>(&self, hook: H) -> MsHandle<'_, T, H> {
        MsHandle {
            queue: self,
            hook,
            yard: Vec::new(),
        }
    }

    pub fn enqueue(&self, value: T) {
        self.handle().enqueue(value)
    }

    pub fn dequeue(&self) -> Option<T> {
        self.handle().dequeue()
    }

    /// Whether head and tail reference the same node.
    pub fn head_is_tail(&self) -> bool {
        self.head.load(SeqCst) == self.tail.load(SeqCst)
    }

    /// Number of nodes the tail trails the last node by. At most one.
    pub fn tail_lag(&mut self) -> usize {
        let mut node = self.tail.load(SeqCst);
        let mut lag = 0;
        loop {
            // SAFETY: nodes live as long as the queue.
            let next = unsafe { (*node).next.load(SeqCst) };
            if next.is_null() {
                return lag;
            }
            lag += 1;
            node = next;
        }
    }

    /// Values currently in the queue, front first.
    pub fn contents(&mut self) -> Vec<T> {
        let mut out = Vec::new();
        let mut node = self.head.load(SeqCst);
        loop {
            // SAFETY: nodes live as long as the queue.
            let next = unsafe { (*node).next.load(SeqCst) };
            if next.is_null() {
                return out;
            }
            if let Some(v) = unsafe { &(*next).value } {
                out.push(v.clone());
            }
            node = next;
        }
    }
}

pub struct MsHandle<'q, T, H: StepHook = NoHook> {
    queue: &'q MsQueue<T>,
    hook: H,
    yard: Vec<Owned<MsNode<T>>>,
}

impl<T, H: StepHook> Drop for MsHandle<'_, T, H> {
    fn drop(&mut self) {
        let mut yard = self
            .queue
            .graveyard
            .lock()
            .unwrap_or_else(|e| e.into_inner());
        yard.append(&mut self.yard);
    }
}

impl<T: Clone + Send + Sync, H: StepHook> MsHandle<'_, T, H> {
    pub fn hook(&self) -> &H {
        &self.hook
    }

    pub fn hook_mut(&mut self) -> &mut H {
        &mut self.hook
    }

    #[inline(always)]
    fn step(&mut self, step: Step) {
        self.hook.after_access(step);
    }

    #[inline(always)]
    fn trace(&mut self, event: impl FnOnce() -> Trace) {
        if H::TRACES {
            self.hook.trace(event());
        }
    }

    fn cas_tail(&mut self, from: *mut MsNode<T>, to: *mut MsNode<T>, step: Step) {
        let ok = self
            .queue
            .tail
            .compare_exchange(from, to, SeqCst, SeqCst)
            .is_ok();
        self.step(step);
        self.trace(|| Trace::TailCas {
            to: addr(to),
            ok,
            flag: ok,
        });
    }

    pub fn enqueue(&mut self, value: T) {
        self.trace(|| Trace::OpBegin(OpKind::Enqueue));
        let q = self.queue;
        let node = keep(
            &mut self.yard,
            MsNode {
                value: Some(value),
                next: AtomicPtr::new(ptr::null_mut()),
            },
        );
        self.step(Step::MsValueInit);
        // SAFETY (whole function): nodes live as long as the queue.
        unsafe { (*node).next.store(ptr::null_mut(), SeqCst) };
        self.step(Step::MsNextInit);
        let tail = loop {
            let tail = q.tail.load(SeqCst);
            self.step(Step::MsEnqReadTail);
            let next = unsafe { (*tail).next.load(SeqCst) };
            self.step(Step::MsEnqReadNext);
            let consistent = tail == q.tail.load(SeqCst);
            self.step(Step::MsEnqRecheckTail);
            if !consistent {
                continue;
            }
            if next.is_null() {
                let linked = unsafe {
                    (*tail)
                        .next
                        .compare_exchange(next, node, SeqCst, SeqCst)
                        .is_ok()
                };
                self.step(Step::MsLinkCas);
                self.trace(|| Trace::NextCas {
                    pred: addr(tail),
                    node: addr(node),
                    ok: linked,
                });
                if linked {
                    break tail;
                }
            } else {
                self.cas_tail(tail, next, Step::MsEnqTailFixCas);
            }
        };
        self.cas_tail(tail, node, Step::MsTailSwingCas);
        self.trace(|| Trace::OpEnd(OpKind::Enqueue));
    }

    pub fn dequeue(&mut self) -> Option<T> {
        self.trace(|| Trace::OpBegin(OpKind::Dequeue));
        let q = self.queue;
        let value = loop {
            let head = q.head.load(SeqCst);
            self.step(Step::MsDeqReadHead);
            let tail = q.tail.load(SeqCst);
            self.step(Step::MsDeqReadTail);
            // SAFETY (loop body): nodes live as long as the queue.
            let next = unsafe { (*head).next.load(SeqCst) };
            self.step(Step::MsDeqReadNext);
            let consistent = head == q.head.load(SeqCst);
            self.step(Step::MsDeqRecheckHead);
            if !consistent {
                continue;
            }
            if head == tail {
                if next.is_null() {
                    break None;
                }
                self.cas_tail(tail, next, Step::MsDeqTailFixCas);
            } else {
                // read the value before the CAS: afterwards another dequeuer
                // may treat `next` as the new dummy
                let value = unsafe { (*next).value.clone() };
                self.step(Step::MsReadValue);
                let ok = q.head.compare_exchange(head, next, SeqCst, SeqCst).is_ok();
                self.step(Step::MsHeadCas);
                if ok {
                    break value;
                }
            }
        };
        self.trace(|| Trace::OpEnd(OpKind::Dequeue));
        value
    }
}

impl<T: Clone + Send + Sync, H: StepHook> QueueHandle<T> for MsHandle<'_, T, H> {
    fn enqueue(&mut self, value: T) {
        MsHandle::enqueue(self, value)
    }

    fn dequeue(&mut self) -> Option<T> {
        MsHandle::dequeue(self)
    }
}

impl<T: Clone + Send + Sync> ConcurrentQueue<T> for MsQueue<T> {
    type Handle<'q, H: StepHook + 'q>
        = MsHandle<'q, T, H>
    where
        T: 'q;

    fn attach<'q, H: StepHook + 'q>(&'q self, hook: H) -> Self::Handle<'q, H> {
        self.handle_with(hook)
    }

    fn algorithm(&self) -> Algorithm {
        Algorithm::Ms
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hook::StepLog;

    #[test]
    fn new_queue_is_empty() {
        let q = MsQueue::<u64>::new();
        assert!(q.head_is_tail());
        assert_eq!(q.dequeue(), None);
    }

    #[test]
    fn enqueue_then_dequeue() {
        let mut q = MsQueue::new();
        q.enqueue(1u64);
        assert!(!q.head_is_tail());
        q.enqueue(2);
        assert_eq!(q.contents(), vec![1, 2]);
        assert_eq!(q.tail_lag(), 0);
        assert_eq!(q.dequeue(), Some(1));
        assert_eq!(q.dequeue(), Some(2));
        assert_eq!(q.dequeue(), None);
    }

    #[test]
    fn uncontended_access_counts() {
        let q = MsQueue::new();
        let mut h = q.handle_with(StepLog::default());
        h.enqueue(1u64);
        assert_eq!(h.hook().steps.len(), 7);
        h.hook_mut().clear();
        assert_eq!(h.dequeue(), Some(1));
        assert_eq!(h.hook().steps.len(), 6);
        h.hook_mut().clear();
        assert_eq!(h.dequeue(), None);
        assert_eq!(h.hook().steps.len(), 4);
    }

    #[test]
    fn value_read_precedes_head_cas() {
        let q = MsQueue::new();
        let mut h = q.handle_with(StepLog::default());
        for i in 0..3u64 {
            h.enqueue(i);
        }
        h.hook_mut().clear();
        for _ in 0..3 {
            h.dequeue();
        }
        let steps = &h.hook().steps;
        for (i, s) in steps.iter().enumerate() {
            if *s == Step::MsHeadCas {
                assert_eq!(steps[i - 1], Step::MsReadValue);
            }
        }
        assert!(h
            .hook()
            .traces
            .iter()
            .all(|t| !matches!(t, Trace::CellWrite { .. })));
    }
}
