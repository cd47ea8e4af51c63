//! The differentiated 2-nonblocking (DNB-2) queue.
//!
//! The queue is a singly linked list of [`QueueNode`]s appended to with CAS,
//! plus two independent help mechanisms:
//!
//! * enqueuers share one announcement register holding a node somebody wants
//!   appended. Every enqueue first makes a single attempt to append the
//!   announced node (the altruistic phase), then loops trying to append its
//!   own node, overwriting the announcement with its own node after every
//!   failed attempt (the selfish phase);
//! * dequeuers share one announcement register holding a [`ResultCell`]
//!   somebody wants a value delivered into. The head of the queue is an
//!   immutable [`HeadDescriptor`] `(ptr, value, addr)` replaced wholesale with
//!   CAS; whoever replaces a descriptor first copies that descriptor's value
//!   into its `addr` cell, which is how a helped dequeuer learns its result.
//!
//! Enqueuers never touch the head and dequeuers never append, so the two
//! groups do not interfere with each other. An operation can only be stuck
//! forever if at least two other processes complete infinitely many
//! operations of the same type; with at most two processes per type every
//! operation terminates.
//!
//! Nodes, cells and descriptors are never reclaimed while the queue is alive.
//! Each handle keeps the allocations it made and hands them to the queue when
//! dropped; everything is freed when the queue itself is dropped.

use std::collections::HashSet;
use std::fmt;
use std::marker::PhantomData;
use std::ptr;
use std::sync::atomic::{AtomicBool, AtomicPtr, Ordering::SeqCst};
use std::sync::Mutex;

use crate::hook::{addr, NoHook, OpKind, Step, StepHook, Trace};
use crate::queue::{keep, Algorithm, ConcurrentQueue, Owned, QueueHandle};

/// A list cell. `next` and `flag` are each written at most once after the
/// node is published (`NULL -> node` and `0 -> 1`).
pub struct QueueNode<T> {
    value: Option<T>,
    next: AtomicPtr<QueueNode<T>>,
    flag: AtomicBool,
}

/// The slot through which a helper delivers a dequeued value.
///
/// The slot stores a pointer to the head descriptor whose value is being
/// delivered: null means "not helped yet", and a descriptor whose value is
/// `None` means the queue was empty.
pub struct ResultCell<T> {
    slot: AtomicPtr<HeadDescriptor<T>>,
}

/// Immutable `(ptr, value, addr)` triple held by the shared head.
pub struct HeadDescriptor<T> {
    ptr: *mut QueueNode<T>,
    value: Option<T>,
    addr: *mut ResultCell<T>,
}

// SAFETY: the raw pointers refer to queue-owned allocations that outlive every
// descriptor; the descriptor itself is immutable.
unsafe impl<T: Send + Sync> Send for HeadDescriptor<T> {}
unsafe impl<T: Send + Sync> Sync for HeadDescriptor<T> {}

/// Outcome of a single attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attempt<T> {
    Done(T),
    Failed,
}

impl<T> Attempt<T> {
    pub fn is_failed(&self) -> bool {
        matches!(self, Attempt::Failed)
    }
}

/// Deliberate bugs used to check that the test suites catch them.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutation {
    #[default]
    None,
    /// Ignore the "already threaded" flag in try-to-enqueue, so stale
    /// announced nodes get appended a second time.
    SkipThreadedCheck,
}

struct Graveyard<T> {
    nodes: Vec<Owned<QueueNode<T>>>,
    cells: Vec<Owned<ResultCell<T>>>,
    descriptors: Vec<Owned<HeadDescriptor<T>>>,
}

impl<T> Graveyard<T> {
    fn new() -> Self {
        Graveyard {
            nodes: Vec::new(),
            cells: Vec::new(),
            descriptors: Vec::new(),
        }
    }

    fn absorb(&mut self, other: &mut Graveyard<T>) {
        self.nodes.append(&mut other.nodes);
        self.cells.append(&mut other.cells);
        self.descriptors.append(&mut other.descriptors);
    }
}

pub struct DnbQueue<T> {
    tail: AtomicPtr<QueueNode<T>>,
    head: AtomicPtr<HeadDescriptor<T>>,
    ann_enq: AtomicPtr<QueueNode<T>>,
    ann_deq: AtomicPtr<ResultCell<T>>,
    init_node: *mut QueueNode<T>,
    init_cell: *mut ResultCell<T>,
    graveyard: Mutex<Graveyard<T>>,
    mutation: Mutation,
}

// SAFETY: all shared state is accessed through atomics; the raw pointers are
// to allocations owned by the graveyard.
unsafe impl<T: Send + Sync> Send for DnbQueue<T> {}
unsafe impl<T: Send + Sync> Sync for DnbQueue<T> {}

impl<T> fmt::Debug for DnbQueue<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DnbQueue")
            .field("tail", &self.tail.load(SeqCst))
            .field("head", &self.head.load(SeqCst))
            .finish_non_exhaustive()
    }
}

impl<T: Clone + Send + Sync> Default for DnbQueue<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Clone + Send + Sync> DnbQueue<T> {
    pub fn new() -> Self {
        Self::with_mutation(Mutation::None)
    }

    #[doc(hidden)]
    pub fn with_mutation(mutation: Mutation) -> Self {
        let mut yard = Graveyard::new();
        let init_node = keep(
            &mut yard.nodes,
            QueueNode {
                value: None,
                next: AtomicPtr::new(ptr::null_mut()),
                flag: AtomicBool::new(true),
            },
        );
        let init_cell = keep(
            &mut yard.cells,
            ResultCell {
                slot: AtomicPtr::new(ptr::null_mut()),
            },
        );
        // The initial descriptor stands for a fictitious dequeue that
        // happened before the queue existed; its cell is already satisfied.
        let init_desc = keep(
            &mut yard.descriptors,
            HeadDescriptor {
                ptr: init_node,
                value: None,
                addr: init_cell,
            },
        );
        // SAFETY: freshly allocated, not yet shared.
        unsafe { (*init_cell).slot.store(init_desc, SeqCst) };
        DnbQueue {
            tail: AtomicPtr::new(init_node),
            head: AtomicPtr::new(init_desc),
            ann_enq: AtomicPtr::new(init_node),
            ann_deq: AtomicPtr::new(init_cell),
            init_node,
            init_cell,
            graveyard: Mutex::new(yard),
            mutation,
        }
    }

    /// A process handle without instrumentation.
    pub fn handle(&self) -> DnbHandle<'_, T> {
        self.handle_with(NoHook)
    }

    pub fn handle_with<H: StepHook>(&self, hook: H) -> DnbHandle<'_, T, H> {
        DnbHandle {
            queue: self,
            hook,
            yard: Graveyard::new(),
        }
    }

    /// Enqueue through a throwaway handle.
    pub fn enqueue(&self, value: T) {
        self.handle().enqueue(value)
    }

    /// Dequeue through a throwaway handle. `None` means the queue was empty.
    pub fn dequeue(&self) -> Option<T> {
        self.handle().dequeue()
    }

    /// Whether the head descriptor and the tail point at the same node.
    pub fn is_empty_state(&self) -> bool {
        let head = self.head.load(SeqCst);
        // SAFETY: descriptors live as long as the queue.
        let ptr = unsafe { (*head).ptr };
        ptr == self.tail.load(SeqCst)
    }

    pub fn init_node(&self) -> NodeRef<'_, T> {
        NodeRef::new(self.init_node)
    }

    pub fn init_cell(&self) -> CellRef<'_, T> {
        CellRef::new(self.init_cell)
    }

    /// Current content of the enqueue announcement register.
    pub fn announced_node(&self) -> NodeRef<'_, T> {
        NodeRef::new(self.ann_enq.load(SeqCst))
    }

    /// Current content of the dequeue announcement register.
    pub fn announced_cell(&self) -> CellRef<'_, T> {
        CellRef::new(self.ann_deq.load(SeqCst))
    }

    pub fn tail(&self) -> NodeRef<'_, T> {
        NodeRef::new(self.tail.load(SeqCst))
    }

    /// A snapshot of the current head descriptor.
    pub fn head(&self) -> HeadRef<'_, T> {
        HeadRef {
            ptr: self.head.load(SeqCst),
            _queue: PhantomData,
        }
    }

    /// Values in the queue state: the nodes after the head descriptor's node
    /// up to and including the tail.
    pub fn contents(&mut self) -> Vec<T> {
        let head = self.head();
        let tail = self.tail.load(SeqCst);
        let mut out = Vec::new();
        let mut node = head.node();
        while node.ptr != tail {
            match node.successor() {
                Some(next) => {
                    if let Some(v) = next.value() {
                        out.push(v.clone());
                    }
                    node = next;
                }
                None => break,
            }
        }
        out
    }

    /// Walk the list and check the structural invariants. The result is only
    /// meaningful while no operation is taking steps: at a quiescent point, or
    /// with every process paused by the controlled scheduler. Nodes still held
    /// by live handles are not covered by the flagged-node check.
    pub fn probe_invariants(&self) -> Result<ProbeReport, InvariantViolation>
    where
        T: PartialEq + fmt::Debug,
    {
        let tail = self.tail.load(SeqCst);
        let head = self.head.load(SeqCst);
        // SAFETY: every pointer reached below is a queue-owned allocation.
        let desc = unsafe { &*head };

        let mut order: Vec<*mut QueueNode<T>> = Vec::new();
        let mut seen = HashSet::new();
        let mut node = self.init_node;
        while !node.is_null() {
            if !seen.insert(node as usize) {
                return Err(InvariantViolation::new(
                    Invariant::Acyclic,
                    format!("node {node:p} reached twice after {} nodes", order.len()),
                ));
            }
            order.push(node);
            node = unsafe { (*node).next.load(SeqCst) };
        }

        let position = |p: *mut QueueNode<T>| order.iter().position(|n| *n == p);
        let tail_at = position(tail).ok_or_else(|| {
            InvariantViolation::new(
                Invariant::TailInList,
                format!("tail {tail:p} not reachable"),
            )
        })?;
        let head_at = position(desc.ptr).ok_or_else(|| {
            InvariantViolation::new(
                Invariant::HeadInList,
                format!("head ptr {:p} not reachable", desc.ptr),
            )
        })?;
        if head_at > tail_at {
            return Err(InvariantViolation::new(
                Invariant::TailAfterHead,
                format!("head at position {head_at}, tail at {tail_at}"),
            ));
        }
        for (i, n) in order.iter().enumerate().take(tail_at + 1) {
            if !unsafe { (**n).flag.load(SeqCst) } {
                return Err(InvariantViolation::new(
                    Invariant::FlagSetUpToTail,
                    format!("node {n:p} at position {i} (tail at {tail_at}) has flag 0"),
                ));
            }
        }
        let lagging = order.len() - 1 - tail_at;
        if lagging > 1 {
            return Err(InvariantViolation::new(
                Invariant::TailLag,
                format!("{lagging} nodes after the tail"),
            ));
        }
        if let Some(v) = &desc.value {
            let node_value = unsafe { &(*desc.ptr).value };
            if node_value.as_ref() != Some(v) {
                return Err(InvariantViolation::new(
                    Invariant::HeadValue,
                    format!("descriptor value {v:?}, node value {node_value:?}"),
                ));
            }
        }
        // A flagged node must be in the list.
        let yard = self.graveyard.lock().unwrap_or_else(|e| e.into_inner());
        let announced = self.ann_enq.load(SeqCst);
        let candidates = yard
            .nodes
            .iter()
            .map(|o| o.0.as_ptr())
            .chain(std::iter::once(announced));
        for n in candidates {
            if unsafe { (*n).flag.load(SeqCst) } && !seen.contains(&(n as usize)) {
                return Err(InvariantViolation::new(
                    Invariant::FlaggedInList,
                    format!("node {n:p} has flag 1 but is not in the list"),
                ));
            }
        }
        Ok(ProbeReport {
            list_len: order.len(),
            queue_len: tail_at - head_at,
            lagging_tail: lagging == 1,
        })
    }
}

impl<T> Drop for DnbQueue<T> {
    fn drop(&mut self) {
        // The graveyard owns every allocation and frees it.
    }
}

/// Result of a successful invariant probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeReport {
    pub list_len: usize,
    pub queue_len: usize,
    pub lagging_tail: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Invariant {
    Acyclic,
    TailInList,
    HeadInList,
    TailAfterHead,
    FlagSetUpToTail,
    TailLag,
    HeadValue,
    FlaggedInList,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invariant {invariant:?} violated: {context}")]
pub struct InvariantViolation {
    pub invariant: Invariant,
    pub context: String,
}

impl InvariantViolation {
    fn new(invariant: Invariant, context: String) -> Self {
        InvariantViolation { invariant, context }
    }
}

/// A reference to a node of a live queue.
pub struct NodeRef<'q, T> {
    ptr: *mut QueueNode<T>,
    _queue: PhantomData<&'q DnbQueue<T>>,
}

impl<T> Clone for NodeRef<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<T> Copy for NodeRef<'_, T> {}

impl<T> PartialEq for NodeRef<'_, T> {
    fn eq(&self, other: &Self) -> bool {
        self.ptr == other.ptr
    }
}
impl<T> Eq for NodeRef<'_, T> {}

impl<T> fmt::Debug for NodeRef<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NodeRef({:p})", self.ptr)
    }
}

impl<'q, T> NodeRef<'q, T> {
    fn new(ptr: *mut QueueNode<T>) -> Self {
        NodeRef {
            ptr,
            _queue: PhantomData,
        }
    }

    fn node(&self) -> &'q QueueNode<T> {
        // SAFETY: nodes are not reclaimed before the queue is dropped.
        unsafe { &*self.ptr }
    }

    /// `None` for the initial sentinel node.
    pub fn value(&self) -> Option<&'q T> {
        self.node().value.as_ref()
    }

    pub fn is_threaded(&self) -> bool {
        self.node().flag.load(SeqCst)
    }

    pub fn successor(&self) -> Option<NodeRef<'q, T>> {
        let next = self.node().next.load(SeqCst);
        (!next.is_null()).then(|| NodeRef::new(next))
    }

    pub fn addr(&self) -> usize {
        addr(self.ptr)
    }
}

/// A reference to a result cell of a live queue.
pub struct CellRef<'q, T> {
    ptr: *mut ResultCell<T>,
    _queue: PhantomData<&'q DnbQueue<T>>,
}

impl<T> Clone for CellRef<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<T> Copy for CellRef<'_, T> {}

impl<T> PartialEq for CellRef<'_, T> {
    fn eq(&self, other: &Self) -> bool {
        self.ptr == other.ptr
    }
}
impl<T> Eq for CellRef<'_, T> {}

impl<T> fmt::Debug for CellRef<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CellRef({:p})", self.ptr)
    }
}

impl<'q, T> CellRef<'q, T> {
    fn new(ptr: *mut ResultCell<T>) -> Self {
        CellRef {
            ptr,
            _queue: PhantomData,
        }
    }

    /// `None` if nothing was delivered yet, `Some(None)` if the delivered
    /// result is "queue empty".
    pub fn delivered(&self) -> Option<Option<&'q T>> {
        // SAFETY: cells and descriptors live as long as the queue.
        let d = unsafe { (*self.ptr).slot.load(SeqCst) };
        (!d.is_null()).then(|| unsafe { (*d).value.as_ref() })
    }

    pub fn addr(&self) -> usize {
        addr(self.ptr)
    }
}

/// A snapshot of a published head descriptor.
pub struct HeadRef<'q, T> {
    ptr: *mut HeadDescriptor<T>,
    _queue: PhantomData<&'q DnbQueue<T>>,
}

impl<'q, T> HeadRef<'q, T> {
    fn desc(&self) -> &'q HeadDescriptor<T> {
        // SAFETY: descriptors are not reclaimed before the queue is dropped.
        unsafe { &*self.ptr }
    }

    pub fn node(&self) -> NodeRef<'q, T> {
        NodeRef::new(self.desc().ptr)
    }

    /// Value of the last dequeue; `None` when it found the queue empty.
    pub fn value(&self) -> Option<&'q T> {
        self.desc().value.as_ref()
    }

    pub fn cell(&self) -> CellRef<'q, T> {
        CellRef::new(self.desc().addr)
    }
}

/// One process's handle on a [`DnbQueue`].
pub struct DnbHandle<'q, T, H: StepHook = NoHook> {
    queue: &'q DnbQueue<T>,
    hook: H,
    yard: Graveyard<T>,
}

impl<T, H: StepHook> Drop for DnbHandle<'_, T, H> {
    fn drop(&mut self) {
        let mut yard = self
            .queue
            .graveyard
            .lock()
            .unwrap_or_else(|e| e.into_inner());
        yard.absorb(&mut self.yard);
    }
}

impl<'q, T: Clone + Send + Sync, H: StepHook> DnbHandle<'q, T, H> {
    pub fn hook(&self) -> &H {
        &self.hook
    }

    pub fn hook_mut(&mut self) -> &mut H {
        &mut self.hook
    }

    pub fn queue(&self) -> &'q DnbQueue<T> {
        self.queue
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

    pub fn enqueue(&mut self, value: T) {
        self.trace(|| Trace::OpBegin(OpKind::Enqueue));
        let q = self.queue;
        let announced = q.ann_enq.load(SeqCst);
        self.step(Step::ReadEnqAnnouncement);
        self.try_to_enqueue_raw(announced);

        let node = self.new_node(value).ptr;
        while self.try_to_enqueue_raw(node).is_failed() {
            q.ann_enq.store(node, SeqCst);
            self.step(Step::AnnounceNode);
        }
        self.trace(|| Trace::OpEnd(OpKind::Enqueue));
    }

    pub fn dequeue(&mut self) -> Option<T> {
        self.trace(|| Trace::OpBegin(OpKind::Dequeue));
        let q = self.queue;
        let announced = q.ann_deq.load(SeqCst);
        self.step(Step::ReadDeqAnnouncement);
        // SAFETY: cells live as long as the queue; a stale announcement is
        // still a valid cell.
        let pending = unsafe { (*announced).slot.load(SeqCst) }.is_null();
        self.step(Step::ReadAnnouncedCell);
        if pending {
            self.try_to_dequeue_raw(announced);
        }

        let cell = self.new_cell().ptr;
        let result = loop {
            match self.try_to_dequeue_raw(cell) {
                Attempt::Done(v) => break v,
                Attempt::Failed => {
                    q.ann_deq.store(cell, SeqCst);
                    self.step(Step::AnnounceCell);
                }
            }
        };
        self.trace(|| Trace::OpEnd(OpKind::Dequeue));
        result
    }

    /// Allocate and initialise a node carrying `value`, not yet linked.
    pub fn new_node(&mut self, value: T) -> NodeRef<'q, T> {
        let node = keep(
            &mut self.yard.nodes,
            QueueNode {
                value: Some(value),
                next: AtomicPtr::new(ptr::null_mut()),
                flag: AtomicBool::new(false),
            },
        );
        self.step(Step::NodeValueWrite);
        // SAFETY: node was just allocated and is kept by this handle.
        unsafe {
            (*node).next.store(ptr::null_mut(), SeqCst);
            self.step(Step::NodeNextInit);
            (*node).flag.store(false, SeqCst);
            self.step(Step::NodeFlagInit);
        }
        NodeRef::new(node)
    }

    /// Allocate an empty (not helped) result cell.
    pub fn new_cell(&mut self) -> CellRef<'q, T> {
        let cell = keep(
            &mut self.yard.cells,
            ResultCell {
                slot: AtomicPtr::new(ptr::null_mut()),
            },
        );
        // SAFETY: just allocated.
        unsafe { (*cell).slot.store(ptr::null_mut(), SeqCst) };
        self.step(Step::CellInit);
        CellRef::new(cell)
    }

    /// One attempt to append `node`. `Done` once the node is threaded into
    /// the list; `Failed` if a different node won the race.
    pub fn try_to_enqueue(&mut self, node: NodeRef<'q, T>) -> Attempt<()> {
        self.try_to_enqueue_raw(node.ptr)
    }

    /// One attempt to dequeue on behalf of whoever owns `cell`.
    pub fn try_to_dequeue(&mut self, cell: CellRef<'q, T>) -> Attempt<Option<T>> {
        self.try_to_dequeue_raw(cell.ptr)
    }

    fn cas_tail(&mut self, from: *mut QueueNode<T>, to: *mut QueueNode<T>, step: Step) {
        let ok = self
            .queue
            .tail
            .compare_exchange(from, to, SeqCst, SeqCst)
            .is_ok();
        self.step(step);
        // SAFETY: `to` is a queue-owned node.
        self.trace(|| Trace::TailCas {
            to: addr(to),
            ok,
            flag: ok && unsafe { (*to).flag.load(SeqCst) },
        });
    }

    fn set_flag(&mut self, node: *mut QueueNode<T>, step: Step) {
        // SAFETY: `node` is a queue-owned node.
        unsafe { (*node).flag.store(true, SeqCst) };
        self.step(step);
        self.trace(|| Trace::FlagWrite {
            node: addr(node),
            value: true,
        });
    }

    fn try_to_enqueue_raw(&mut self, node: *mut QueueNode<T>) -> Attempt<()> {
        let q = self.queue;
        // SAFETY (whole function): every node pointer stored in the queue is
        // a queue-owned allocation that is never freed while `q` lives.
        let mut tail = q.tail.load(SeqCst);
        self.step(Step::ReadTail);
        let mut next = unsafe { (*tail).next.load(SeqCst) };
        self.step(Step::ReadTailNext);
        self.trace(|| Trace::NextRead {
            node: addr(tail),
            next: addr(next),
        });
        let threaded = unsafe { (*node).flag.load(SeqCst) };
        self.step(Step::ReadNodeFlag);
        self.trace(|| Trace::FlagRead {
            node: addr(node),
            value: threaded,
        });

        if threaded && q.mutation != Mutation::SkipThreadedCheck {
            tail = q.tail.load(SeqCst);
            self.step(Step::RereadTail);
            next = unsafe { (*tail).next.load(SeqCst) };
            self.step(Step::RereadTailNext);
            self.trace(|| Trace::NextRead {
                node: addr(tail),
                next: addr(next),
            });
            if !next.is_null() {
                self.set_flag(next, Step::ThreadedSuccessorFlag);
                self.cas_tail(tail, next, Step::ThreadedTailCas);
            }
            return Attempt::Done(());
        }

        if !next.is_null() {
            self.set_flag(next, Step::LaggingSuccessorFlag);
            self.cas_tail(tail, next, Step::LaggingTailCas);
        } else {
            let linked = unsafe {
                (*tail)
                    .next
                    .compare_exchange(ptr::null_mut(), node, SeqCst, SeqCst)
                    .is_ok()
            };
            self.step(Step::LinkCas);
            self.trace(|| Trace::NextCas {
                pred: addr(tail),
                node: addr(node),
                ok: linked,
            });
            if linked {
                self.set_flag(node, Step::LinkedFlag);
                self.cas_tail(tail, node, Step::LinkedTailCas);
                return Attempt::Done(());
            }
        }
        Attempt::Failed
    }

    fn try_to_dequeue_raw(&mut self, cell: *mut ResultCell<T>) -> Attempt<Option<T>> {
        let q = self.queue;
        // SAFETY (whole function): descriptors, cells and nodes reachable from
        // the queue are never freed while `q` lives.
        let head = q.head.load(SeqCst);
        self.step(Step::ReadHead);
        let tail = q.tail.load(SeqCst);
        self.step(Step::ReadTailForDequeue);
        let desc = unsafe { &*head };

        // Deliver the previous dequeue's value before the descriptor goes away.
        unsafe { (*desc.addr).slot.store(head, SeqCst) };
        self.step(Step::DeliverPrevious);
        self.trace(|| Trace::CellWrite {
            cell: addr(desc.addr),
            source: addr(head),
        });

        let helped = unsafe { (*cell).slot.load(SeqCst) };
        self.step(Step::ReadOwnCell);
        if !helped.is_null() {
            let helped = unsafe { (*cell).slot.load(SeqCst) };
            self.step(Step::RereadOwnCell);
            return Attempt::Done(unsafe { (*helped).value.clone() });
        }

        if desc.ptr == tail {
            let replacement = HeadDescriptor {
                ptr: desc.ptr,
                value: None,
                addr: cell,
            };
            if self.install_head(head, replacement, Step::HeadCasEmpty) {
                return Attempt::Done(None);
            }
        } else {
            let next = unsafe { (*desc.ptr).next.load(SeqCst) };
            self.step(Step::ReadHeadNext);
            self.trace(|| Trace::NextRead {
                node: addr(desc.ptr),
                next: addr(next),
            });
            assert!(
                !next.is_null(),
                "head node precedes the tail but has no successor"
            );
            let value = unsafe { (*next).value.clone() };
            self.step(Step::ReadNextValue);
            let replacement = HeadDescriptor {
                ptr: next,
                value: value.clone(),
                addr: cell,
            };
            if self.install_head(head, replacement, Step::HeadCasTake) {
                return Attempt::Done(value);
            }
        }
        Attempt::Failed
    }

    fn install_head(
        &mut self,
        expected: *mut HeadDescriptor<T>,
        replacement: HeadDescriptor<T>,
        step: Step,
    ) -> bool {
        let cell = replacement.addr;
        let (owned, new) = Owned::new(replacement);
        let ok = self
            .queue
            .head
            .compare_exchange(expected, new, SeqCst, SeqCst)
            .is_ok();
        self.step(step);
        self.trace(|| Trace::HeadCas {
            cell: addr(cell),
            ok,
        });
        if ok {
            self.yard.descriptors.push(owned);
        }
        // A descriptor that lost the CAS was never visible; `owned` drops it.
        ok
    }
}

impl<T: Clone + Send + Sync, H: StepHook> QueueHandle<T> for DnbHandle<'_, T, H> {
    fn enqueue(&mut self, value: T) {
        DnbHandle::enqueue(self, value)
    }

    fn dequeue(&mut self) -> Option<T> {
        DnbHandle::dequeue(self)
    }
}

impl<T: Clone + Send + Sync> ConcurrentQueue<T> for DnbQueue<T> {
    type Handle<'q, H: StepHook + 'q>
        = DnbHandle<'q, T, H>
    where
        T: 'q;

    fn attach<'q, H: StepHook + 'q>(&'q self, hook: H) -> Self::Handle<'q, H> {
        self.handle_with(hook)
    }

    fn algorithm(&self) -> Algorithm {
        Algorithm::Dnb2
    }
}
