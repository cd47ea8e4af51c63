//! Observation points inside the algorithms.
//!
//! Every shared-memory access (read, write or CAS) performed by one of the
//! queue algorithms is followed by a call to [`StepHook::after_access`] with a
//! [`Step`] label naming the access. The benchmark harness uses this to inject
//! delays, the controlled scheduler uses it as a preemption point, and tests
//! use it to count accesses. [`NoHook`] does nothing and compiles away.
//!
//! Hooks that set [`StepHook::TRACES`] additionally receive [`Trace`] events
//! describing CAS outcomes and the identities of the objects involved. The
//! algorithms only construct trace events when `TRACES` is true, so untraced
//! builds pay nothing for them.

/// Labels for every shared-memory access made by the algorithms in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Step {
    // DNB-2 enqueue
    ReadEnqAnnouncement,
    NodeValueWrite,
    NodeNextInit,
    NodeFlagInit,
    AnnounceNode,
    // DNB-2 try-to-enqueue
    ReadTail,
    ReadTailNext,
    ReadNodeFlag,
    RereadTail,
    RereadTailNext,
    ThreadedSuccessorFlag,
    ThreadedTailCas,
    LaggingSuccessorFlag,
    LaggingTailCas,
    LinkCas,
    LinkedFlag,
    LinkedTailCas,
    // DNB-2 dequeue
    ReadDeqAnnouncement,
    ReadAnnouncedCell,
    CellInit,
    AnnounceCell,
    // DNB-2 try-to-dequeue
    ReadHead,
    ReadTailForDequeue,
    DeliverPrevious,
    ReadOwnCell,
    RereadOwnCell,
    HeadCasEmpty,
    ReadHeadNext,
    ReadNextValue,
    HeadCasTake,
    // Michael-Scott enqueue
    MsValueInit,
    MsNextInit,
    MsEnqReadTail,
    MsEnqReadNext,
    MsEnqRecheckTail,
    MsLinkCas,
    MsEnqTailFixCas,
    MsTailSwingCas,
    // Michael-Scott dequeue
    MsDeqReadHead,
    MsDeqReadTail,
    MsDeqReadNext,
    MsDeqRecheckHead,
    MsDeqTailFixCas,
    MsReadValue,
    MsHeadCas,
    // universal construction
    UReadAnnouncement,
    UCellInit,
    UAnnounce,
    UReadRecord,
    UDeliverPrevious,
    UReadOwnCell,
    URereadOwnCell,
    URecordCas,
}

impl Step {
    /// True for the steps that announce a pending operation in a help register.
    pub fn is_announcement(self) -> bool {
        matches!(
            self,
            Step::AnnounceNode | Step::AnnounceCell | Step::UAnnounce
        )
    }

    pub fn is_cas(self) -> bool {
        matches!(
            self,
            Step::ThreadedTailCas
                | Step::LaggingTailCas
                | Step::LinkCas
                | Step::LinkedTailCas
                | Step::HeadCasEmpty
                | Step::HeadCasTake
                | Step::MsLinkCas
                | Step::MsEnqTailFixCas
                | Step::MsTailSwingCas
                | Step::MsDeqTailFixCas
                | Step::MsHeadCas
                | Step::URecordCas
        )
    }
}

/// Kind of high-level operation a trace belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Enqueue,
    Dequeue,
    Invoke,
}

/// Instrumentation events. Object identities are addresses, which stay unique
/// for the lifetime of a queue because nothing is reclaimed before teardown.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trace {
    OpBegin(OpKind),
    OpEnd(OpKind),
    /// A CAS on some node's `next` link; `node` is the node being appended.
    NextCas {
        pred: usize,
        node: usize,
        ok: bool,
    },
    /// A CAS on the tail pointer. `flag` is the new tail's flag read just after
    /// a successful CAS.
    TailCas {
        to: usize,
        ok: bool,
        flag: bool,
    },
    /// A CAS on the head descriptor installing `cell` as the delivery cell.
    HeadCas {
        cell: usize,
        ok: bool,
    },
    /// A CAS on the universal construction's state record.
    RecordCas {
        cell: usize,
        ok: bool,
    },
    /// A flag write; the algorithms only ever write 1 after publication.
    FlagWrite {
        node: usize,
        value: bool,
    },
    FlagRead {
        node: usize,
        value: bool,
    },
    NextRead {
        node: usize,
        next: usize,
    },
    /// A helper delivering `source` (a descriptor or state record) into `cell`.
    CellWrite {
        cell: usize,
        source: usize,
    },
}

pub trait StepHook {
    /// Whether [`StepHook::trace`] wants events.
    const TRACES: bool = false;

    fn after_access(&mut self, step: Step);

    fn trace(&mut self, _event: Trace) {}
}

/// The hook used by benchmark and production builds.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoHook;

impl StepHook for NoHook {
    #[inline(always)]
    fn after_access(&mut self, _step: Step) {}
}

impl<A: StepHook, B: StepHook> StepHook for (A, B) {
    const TRACES: bool = A::TRACES || B::TRACES;

    #[inline]
    fn after_access(&mut self, step: Step) {
        self.0.after_access(step);
        self.1.after_access(step);
    }

    #[inline]
    fn trace(&mut self, event: Trace) {
        if A::TRACES {
            self.0.trace(event);
        }
        if B::TRACES {
            self.1.trace(event);
        }
    }
}

impl<H: StepHook> StepHook for &mut H {
    const TRACES: bool = H::TRACES;

    #[inline]
    fn after_access(&mut self, step: Step) {
        (**self).after_access(step);
    }

    #[inline]
    fn trace(&mut self, event: Trace) {
        (**self).trace(event);
    }
}

/// Records every step label, in order. Handy for unit tests.
#[derive(Debug, Default, Clone)]
pub struct StepLog {
    pub steps: Vec<Step>,
    pub traces: Vec<Trace>,
}

impl StepLog {
    pub fn count(&self, step: Step) -> usize {
        self.steps.iter().filter(|s| **s == step).count()
    }

    pub fn clear(&mut self) {
        self.steps.clear();
        self.traces.clear();
    }
}

impl StepHook for StepLog {
    const TRACES: bool = true;

    fn after_access(&mut self, step: Step) {
        self.steps.push(step);
    }

    fn trace(&mut self, event: Trace) {
        self.traces.push(event);
    }
}

pub(crate) fn addr<T>(ptr: *const T) -> usize {
    ptr as usize
}
