//! A universal 2-nonblocking construction.
//!
//! Any object with a deterministic sequential specification ([`SeqSpec`])
//! becomes a shared object whose state, last response and delivery cell sit
//! in one immutable [`StateRecord`] replaced by CAS. An invocation helps the
//! currently announced operation once, then keeps trying its own, announcing
//! it (operation and cell together) in the single shared register after each
//! failure. Whoever replaces a record first delivers that record's response
//! into the record's cell, which is how helped processes get their result.
//!
//! States are immutable snapshots, so `apply` has to build a new state rather
//! than mutate the old one; several helpers may call it on the same state.

use std::collections::VecDeque;
use std::fmt;
use std::marker::PhantomData;
use std::ptr;
use std::sync::atomic::{AtomicPtr, Ordering::SeqCst};
use std::sync::Mutex;

use crate::dnb::Attempt;
use crate::hook::{addr, NoHook, OpKind, Step, StepHook, Trace};
use crate::queue::{keep, Owned};

/// A deterministic sequential specification.
pub trait SeqSpec: Send + Sync {
    type State: Clone + Send + Sync;
    type Op: Clone + Send + Sync;
    type Response: Clone + Send + Sync;

    fn apply(&self, op: &Self::Op, state: &Self::State) -> (Self::State, Self::Response);
}

/// Published state: the object state after the last applied operation, that
/// operation's response, and the cell its invoker is waiting on.
pub struct StateRecord<S: SeqSpec> {
    state: S::State,
    /// `None` only in the initial record.
    response: Option<S::Response>,
    addr: *mut UCell<S>,
}

/// Delivery cell: null until some record carrying this cell's response is
/// written into it.
pub struct UCell<S: SeqSpec> {
    slot: AtomicPtr<StateRecord<S>>,
}

/// Content of the announcement register.
struct Announcement<S: SeqSpec> {
    /// `None` for the initial, already satisfied announcement.
    op: Option<S::Op>,
    addr: *mut UCell<S>,
}

// SAFETY: raw pointers refer to object-owned allocations; records and
// announcements are immutable once published.
unsafe impl<S: SeqSpec> Send for StateRecord<S> {}
unsafe impl<S: SeqSpec> Sync for StateRecord<S> {}
unsafe impl<S: SeqSpec> Send for Announcement<S> {}

struct Graveyard<S: SeqSpec> {
    records: Vec<Owned<StateRecord<S>>>,
    cells: Vec<Owned<UCell<S>>>,
    announcements: Vec<Owned<Announcement<S>>>,
}

impl<S: SeqSpec> Graveyard<S> {
    fn new() -> Self {
        Graveyard {
            records: Vec::new(),
            cells: Vec::new(),
            announcements: Vec::new(),
        }
    }

    fn absorb(&mut self, other: &mut Self) {
        self.records.append(&mut other.records);
        self.cells.append(&mut other.cells);
        self.announcements.append(&mut other.announcements);
    }
}

pub struct Universal2Nb<S: SeqSpec> {
    spec: S,
    record: AtomicPtr<StateRecord<S>>,
    announcement: AtomicPtr<Announcement<S>>,
    graveyard: Mutex<Graveyard<S>>,
}

// SAFETY: shared state is atomics plus object-owned allocations.
unsafe impl<S: SeqSpec> Send for Universal2Nb<S> {}
unsafe impl<S: SeqSpec> Sync for Universal2Nb<S> {}

impl<S: SeqSpec> fmt::Debug for Universal2Nb<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Universal2Nb")
            .field("record", &self.record.load(SeqCst))
            .finish_non_exhaustive()
    }
}

impl<S: SeqSpec> Universal2Nb<S> {
    pub fn new(spec: S, initial: S::State) -> Self {
        let mut yard = Graveyard::new();
        // Two distinct sentinel cells: the initial record delivers its
        // (empty) response into its own cell, which must not be the cell the
        // initial announcement points at.
        let record_cell = keep(
            &mut yard.cells,
            UCell {
                slot: AtomicPtr::new(ptr::null_mut()),
            },
        );
        let ann_cell = keep(
            &mut yard.cells,
            UCell {
                slot: AtomicPtr::new(ptr::null_mut()),
            },
        );
        let record = keep(
            &mut yard.records,
            StateRecord {
                state: initial,
                response: None,
                addr: record_cell,
            },
        );
        // SAFETY: not shared yet. Both sentinels start out non-null.
        unsafe {
            (*record_cell).slot.store(record, SeqCst);
            (*ann_cell).slot.store(record, SeqCst);
        }
        let announcement = keep(
            &mut yard.announcements,
            Announcement {
                op: None,
                addr: ann_cell,
            },
        );
        Universal2Nb {
            spec,
            record: AtomicPtr::new(record),
            announcement: AtomicPtr::new(announcement),
            graveyard: Mutex::new(yard),
        }
    }

    pub fn spec(&self) -> &S {
        &self.spec
    }

    pub fn handle(&self) -> UHandle<'_, S> {
        self.handle_with(NoHook)
    }

    pub fn handle_with<H: StepHook>(&self, hook: H) -> UHandle<'_, S, H> {
        UHandle {
            object: self,
            hook,
            yard: Graveyard::new(),
        }
    }

    pub fn invoke(&self, op: S::Op) -> S::Response {
        self.handle().invoke(op)
    }

    /// The state in the currently published record.
    pub fn state(&self) -> S::State {
        // SAFETY: records live as long as the object.
        unsafe { (*self.record.load(SeqCst)).state.clone() }
    }

    /// The cell of the announcement currently in the register.
    pub fn announced_cell(&self) -> UCellRef<'_, S> {
        // SAFETY: announcements live as long as the object.
        UCellRef::new(unsafe { (*self.announcement.load(SeqCst)).addr })
    }
}

/// A reference to a delivery cell of a live object.
pub struct UCellRef<'u, S: SeqSpec> {
    ptr: *mut UCell<S>,
    _object: PhantomData<&'u Universal2Nb<S>>,
}

impl<S: SeqSpec> Clone for UCellRef<'_, S> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<S: SeqSpec> Copy for UCellRef<'_, S> {}

impl<S: SeqSpec> PartialEq for UCellRef<'_, S> {
    fn eq(&self, other: &Self) -> bool {
        self.ptr == other.ptr
    }
}

impl<S: SeqSpec> fmt::Debug for UCellRef<'_, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UCellRef({:p})", self.ptr)
    }
}

impl<'u, S: SeqSpec> UCellRef<'u, S> {
    fn new(ptr: *mut UCell<S>) -> Self {
        UCellRef {
            ptr,
            _object: PhantomData,
        }
    }

    /// `None` while not helped; otherwise the delivered response (itself
    /// `None` only for the sentinel cells).
    pub fn delivered(&self) -> Option<Option<&'u S::Response>> {
        // SAFETY: cells and records live as long as the object.
        let r = unsafe { (*self.ptr).slot.load(SeqCst) };
        (!r.is_null()).then(|| unsafe { (*r).response.as_ref() })
    }

    pub fn addr(&self) -> usize {
        addr(self.ptr)
    }
}

pub struct UHandle<'u, S: SeqSpec, H: StepHook = NoHook> {
    object: &'u Universal2Nb<S>,
    hook: H,
    yard: Graveyard<S>,
}

impl<S: SeqSpec, H: StepHook> Drop for UHandle<'_, S, H> {
    fn drop(&mut self) {
        let mut yard = self
            .object
            .graveyard
            .lock()
            .unwrap_or_else(|e| e.into_inner());
        yard.absorb(&mut self.yard);
    }
}

impl<'u, S: SeqSpec, H: StepHook> UHandle<'u, S, H> {
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

    pub fn invoke(&mut self, op: S::Op) -> S::Response {
        self.trace(|| Trace::OpBegin(OpKind::Invoke));
        let o = self.object;
        let announced = o.announcement.load(SeqCst);
        self.step(Step::UReadAnnouncement);
        // SAFETY: announcements live as long as the object.
        let (other_op, other_cell) = unsafe { ((*announced).op.as_ref(), (*announced).addr) };
        self.try_to_do_raw(other_op, other_cell);

        let cell = self.new_cell().ptr;
        let response = loop {
            match self.try_to_do_raw(Some(&op), cell) {
                Attempt::Done(r) => {
                    break r.expect("an invocation's own cell always receives a response")
                }
                Attempt::Failed => {
                    let ann = keep(
                        &mut self.yard.announcements,
                        Announcement {
                            op: Some(op.clone()),
                            addr: cell,
                        },
                    );
                    o.announcement.store(ann, SeqCst);
                    self.step(Step::UAnnounce);
                }
            }
        };
        self.trace(|| Trace::OpEnd(OpKind::Invoke));
        response
    }

    pub fn new_cell(&mut self) -> UCellRef<'u, S> {
        let cell = keep(
            &mut self.yard.cells,
            UCell {
                slot: AtomicPtr::new(ptr::null_mut()),
            },
        );
        // SAFETY: just allocated.
        unsafe { (*cell).slot.store(ptr::null_mut(), SeqCst) };
        self.step(Step::UCellInit);
        UCellRef::new(cell)
    }

    /// One attempt to apply `op` on behalf of the owner of `cell`.
    pub fn try_to_do(&mut self, op: &S::Op, cell: UCellRef<'u, S>) -> Attempt<S::Response> {
        match self.try_to_do_raw(Some(op), cell.ptr) {
            Attempt::Done(r) => {
                Attempt::Done(r.expect("response delivered to a non-sentinel cell"))
            }
            Attempt::Failed => Attempt::Failed,
        }
    }

    fn try_to_do_raw(
        &mut self,
        op: Option<&S::Op>,
        cell: *mut UCell<S>,
    ) -> Attempt<Option<S::Response>> {
        let o = self.object;
        // SAFETY (whole function): records and cells live as long as `o`.
        let current = o.record.load(SeqCst);
        self.step(Step::UReadRecord);
        let record = unsafe { &*current };
        unsafe { (*record.addr).slot.store(current, SeqCst) };
        self.step(Step::UDeliverPrevious);
        self.trace(|| Trace::CellWrite {
            cell: addr(record.addr),
            source: addr(current),
        });

        let helped = unsafe { (*cell).slot.load(SeqCst) };
        self.step(Step::UReadOwnCell);
        if !helped.is_null() {
            let helped = unsafe { (*cell).slot.load(SeqCst) };
            self.step(Step::URereadOwnCell);
            return Attempt::Done(unsafe { (*helped).response.clone() });
        }
        // Only the initial announcement has no operation, and its cell is
        // never empty.
        let Some(op) = op else {
            return Attempt::Failed;
        };

        let (state, response) = o.spec.apply(op, &record.state);
        let next = StateRecord {
            state,
            response: Some(response.clone()),
            addr: cell,
        };
        let (owned, new) = Owned::new(next);
        let ok = o
            .record
            .compare_exchange(current, new, SeqCst, SeqCst)
            .is_ok();
        self.step(Step::URecordCas);
        self.trace(|| Trace::RecordCas {
            cell: addr(cell),
            ok,
        });
        if ok {
            self.yard.records.push(owned);
            Attempt::Done(Some(response))
        } else {
            Attempt::Failed
        }
    }
}

/// Fetch-and-add counter.
#[derive(Debug, Clone, Copy, Default)]
pub struct Counter;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterOp {
    /// Returns the value before the addition.
    Add(i64),
    Get,
}

impl SeqSpec for Counter {
    type State = i64;
    type Op = CounterOp;
    type Response = i64;

    fn apply(&self, op: &CounterOp, state: &i64) -> (i64, i64) {
        match *op {
            CounterOp::Add(d) => (state + d, *state),
            CounterOp::Get => (*state, *state),
        }
    }
}

/// A read/write register over the values `0..domain`.
#[derive(Debug, Clone, Copy)]
pub struct BoundedRegister {
    domain: u32,
}

impl BoundedRegister {
    pub fn new(domain: u32) -> Self {
        assert!(domain > 0, "register domain must be non-empty");
        BoundedRegister { domain }
    }

    pub fn domain(&self) -> u32 {
        self.domain
    }

    pub fn write_op(&self, value: u32) -> Option<RegisterOp> {
        (value < self.domain).then_some(RegisterOp::Write(value))
    }
}

/// Register operations. Build writes with [`BoundedRegister::write_op`] so
/// they stay inside the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegisterOp {
    Write(u32),
    Read,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegisterResponse {
    Ack,
    Value(u32),
}

impl SeqSpec for BoundedRegister {
    type State = u32;
    type Op = RegisterOp;
    type Response = RegisterResponse;

    fn apply(&self, op: &RegisterOp, state: &u32) -> (u32, RegisterResponse) {
        match *op {
            RegisterOp::Write(v) => {
                debug_assert!(v < self.domain);
                (v % self.domain, RegisterResponse::Ack)
            }
            RegisterOp::Read => (*state, RegisterResponse::Value(*state)),
        }
    }
}

/// FIFO queue of integers, copy-on-write.
#[derive(Debug, Clone, Copy, Default)]
pub struct IntQueue;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntQueueOp {
    Enqueue(i64),
    Dequeue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntQueueResponse {
    Done,
    Value(i64),
    Empty,
}

impl SeqSpec for IntQueue {
    type State = VecDeque<i64>;
    type Op = IntQueueOp;
    type Response = IntQueueResponse;

    fn apply(&self, op: &IntQueueOp, state: &VecDeque<i64>) -> (VecDeque<i64>, IntQueueResponse) {
        let mut next = state.clone();
        let response = match *op {
            IntQueueOp::Enqueue(v) => {
                next.push_back(v);
                IntQueueResponse::Done
            }
            IntQueueOp::Dequeue => match next.pop_front() {
                Some(v) => IntQueueResponse::Value(v),
                None => IntQueueResponse::Empty,
            },
        };
        (next, response)
    }
}
