//! Concurrent histories and their plain-text format.
//!
//! One event per line, whitespace separated:
//!
//! ```text
//! seq kind process op arg ret
//! 0 invoke 1 enqueue 5 -
//! 1 respond 1 enqueue - done
//! 2 invoke 0 dequeue - -
//! 3 respond 0 dequeue - 5
//! ```
//!
//! `kind` is `invoke` or `respond`; `op` is one of `enqueue`, `dequeue`,
//! `add`, `get`, `read`, `write`; `arg` is an integer or `-`; `ret` is an
//! integer, `done`, `bot` (empty queue) or `-`. Blank lines and lines
//! starting with `#` are ignored.

use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Invoke,
    Respond,
}

/// Operation type tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpName {
    Enqueue,
    Dequeue,
    Add,
    Get,
    Read,
    Write,
}

/// A response value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ret {
    Done,
    /// The empty-queue result.
    Bottom,
    Int(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEvent {
    pub seq: u64,
    pub kind: EventKind,
    pub process: usize,
    pub op: OpName,
    pub arg: Option<i64>,
    pub ret: Option<Ret>,
}

/// A completed or pending operation extracted from a history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Operation {
    pub process: usize,
    pub op: OpName,
    pub arg: Option<i64>,
    /// `None` while pending.
    pub ret: Option<Ret>,
    pub invoked: u64,
    pub responded: Option<u64>,
}

impl Operation {
    pub fn is_pending(&self) -> bool {
        self.responded.is_none()
    }

    /// Real-time precedence: `self` responded before `other` was invoked.
    pub fn precedes(&self, other: &Operation) -> bool {
        matches!(self.responded, Some(r) if r < other.invoked)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HistoryError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("event seq {seq}: sequence numbers must increase")]
    OutOfOrder { seq: u64 },
    #[error("event seq {seq}: process {process} invoked while an operation is pending")]
    NestedInvoke { seq: u64, process: usize },
    #[error("event seq {seq}: process {process} responded without a pending operation")]
    UnmatchedResponse { seq: u64, process: usize },
    #[error("event seq {seq}: response op {got:?} does not match pending {expected:?}")]
    MismatchedResponse {
        seq: u64,
        expected: OpName,
        got: OpName,
    },
    #[error("event seq {seq}: response carries no return value")]
    MissingReturn { seq: u64 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    events: Vec<HistoryEvent>,
}

impl History {
    pub fn new(events: Vec<HistoryEvent>) -> Self {
        History { events }
    }

    pub fn events(&self) -> &[HistoryEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Well-formedness: increasing sequence numbers, and per process an
    /// alternation of invocations and matching responses (a trailing pending
    /// invocation is allowed).
    pub fn validate(&self) -> Result<(), HistoryError> {
        self.operations().map(|_| ())
    }

    /// Pair invocations with responses, in invocation order.
    pub fn operations(&self) -> Result<Vec<Operation>, HistoryError> {
        let mut ops: Vec<Operation> = Vec::new();
        let mut pending: Vec<Option<usize>> = Vec::new();
        let mut last_seq = None;
        for e in &self.events {
            if matches!(last_seq, Some(s) if e.seq <= s) {
                return Err(HistoryError::OutOfOrder { seq: e.seq });
            }
            last_seq = Some(e.seq);
            if pending.len() <= e.process {
                pending.resize(e.process + 1, None);
            }
            match e.kind {
                EventKind::Invoke => {
                    if pending[e.process].is_some() {
                        return Err(HistoryError::NestedInvoke {
                            seq: e.seq,
                            process: e.process,
                        });
                    }
                    pending[e.process] = Some(ops.len());
                    ops.push(Operation {
                        process: e.process,
                        op: e.op,
                        arg: e.arg,
                        ret: None,
                        invoked: e.seq,
                        responded: None,
                    });
                }
                EventKind::Respond => {
                    let Some(i) = pending[e.process].take() else {
                        return Err(HistoryError::UnmatchedResponse {
                            seq: e.seq,
                            process: e.process,
                        });
                    };
                    if ops[i].op != e.op {
                        return Err(HistoryError::MismatchedResponse {
                            seq: e.seq,
                            expected: ops[i].op,
                            got: e.op,
                        });
                    }
                    let ret = e.ret.ok_or(HistoryError::MissingReturn { seq: e.seq })?;
                    ops[i].ret = Some(ret);
                    ops[i].responded = Some(e.seq);
                }
            }
        }
        Ok(ops)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, HistoryError> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let event = line
                .parse::<HistoryEvent>()
                .map_err(|message| HistoryError::Parse {
                    line: i + 1,
                    message,
                })?;
            events.push(event);
        }
        Ok(History { events })
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Invoke => "invoke",
            EventKind::Respond => "respond",
        })
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "invoke" => Ok(EventKind::Invoke),
            "respond" => Ok(EventKind::Respond),
            _ => Err(format!("unknown event kind `{s}`")),
        }
    }
}

impl fmt::Display for OpName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OpName::Enqueue => "enqueue",
            OpName::Dequeue => "dequeue",
            OpName::Add => "add",
            OpName::Get => "get",
            OpName::Read => "read",
            OpName::Write => "write",
        })
    }
}

impl FromStr for OpName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "enqueue" => OpName::Enqueue,
            "dequeue" => OpName::Dequeue,
            "add" => OpName::Add,
            "get" => OpName::Get,
            "read" => OpName::Read,
            "write" => OpName::Write,
            _ => return Err(format!("unknown operation `{s}`")),
        })
    }
}

impl fmt::Display for Ret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ret::Done => f.write_str("done"),
            Ret::Bottom => f.write_str("bot"),
            Ret::Int(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Ret {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "done" => Ok(Ret::Done),
            "bot" => Ok(Ret::Bottom),
            _ => s
                .parse::<i64>()
                .map(Ret::Int)
                .map_err(|_| format!("bad return value `{s}`")),
        }
    }
}

fn dash<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref()
        .map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn undash<T: FromStr>(s: &str) -> Result<Option<T>, String>
where
    T::Err: fmt::Display,
{
    if s == "-" {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|e: T::Err| e.to_string())
    }
}

impl fmt::Display for HistoryEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {}",
            self.seq,
            self.kind,
            self.process,
            self.op,
            dash(&self.arg),
            dash(&self.ret)
        )
    }
}

impl FromStr for HistoryEvent {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [seq, kind, process, op, arg, ret] = fields[..] else {
            return Err(format!("expected 6 fields, found {}", fields.len()));
        };
        Ok(HistoryEvent {
            seq: seq
                .parse()
                .map_err(|_| format!("bad sequence number `{seq}`"))?,
            kind: kind.parse()?,
            process: process
                .parse()
                .map_err(|_| format!("bad process id `{process}`"))?,
            op: op.parse()?,
            arg: undash::<i64>(arg).map_err(|e| format!("bad argument: {e}"))?,
            ret: undash::<Ret>(ret)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("history sink full ({capacity} events)")]
pub struct SinkFull {
    pub capacity: usize,
}

/// Thread-safe event sink. Sequence numbers come from a single counter
/// advanced under the same lock that appends, so the event order is a total
/// order consistent with real time.
#[derive(Debug)]
pub struct Recorder {
    events: Mutex<Vec<HistoryEvent>>,
    capacity: usize,
}

impl Default for Recorder {
    fn default() -> Self {
        Self::with_capacity(1 << 20)
    }
}

impl Recorder {
    pub fn with_capacity(capacity: usize) -> Self {
        Recorder {
            events: Mutex::new(Vec::new()),
            capacity,
        }
    }

    pub fn record(
        &self,
        kind: EventKind,
        process: usize,
        op: OpName,
        arg: Option<i64>,
        ret: Option<Ret>,
    ) -> Result<u64, SinkFull> {
        let mut events = self.events.lock().unwrap_or_else(|e| e.into_inner());
        if events.len() >= self.capacity {
            return Err(SinkFull {
                capacity: self.capacity,
            });
        }
        let seq = events.len() as u64;
        events.push(HistoryEvent {
            seq,
            kind,
            process,
            op,
            arg,
            ret,
        });
        Ok(seq)
    }

    pub fn invoke(&self, process: usize, op: OpName, arg: Option<i64>) -> Result<u64, SinkFull> {
        self.record(EventKind::Invoke, process, op, arg, None)
    }

    pub fn respond(&self, process: usize, op: OpName, ret: Ret) -> Result<u64, SinkFull> {
        self.record(EventKind::Respond, process, op, None, Some(ret))
    }

    pub fn snapshot(&self) -> History {
        History::new(
            self.events
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recorder_orders_events() {
        let rec = Recorder::default();
        rec.invoke(0, OpName::Enqueue, Some(5)).unwrap();
        rec.respond(0, OpName::Enqueue, Ret::Done).unwrap();
        let h = rec.snapshot();
        assert_eq!(h.len(), 2);
        assert_eq!(h.events()[0].seq, 0);
        assert_eq!(h.events()[1].seq, 1);
        let ops = h.operations().unwrap();
        assert_eq!(ops.len(), 1);
        assert_eq!(ops[0].ret, Some(Ret::Done));
    }

    #[test]
    fn recorder_reports_overflow() {
        let rec = Recorder::with_capacity(1);
        rec.invoke(0, OpName::Dequeue, None).unwrap();
        assert_eq!(
            rec.respond(0, OpName::Dequeue, Ret::Bottom),
            Err(SinkFull { capacity: 1 })
        );
    }

    #[test]
    fn pending_operation_at_end() {
        let rec = Recorder::default();
        rec.invoke(0, OpName::Enqueue, Some(1)).unwrap();
        rec.respond(0, OpName::Enqueue, Ret::Done).unwrap();
        rec.invoke(1, OpName::Dequeue, None).unwrap();
        let ops = rec.snapshot().operations().unwrap();
        assert!(ops[1].is_pending());
        assert!(ops[0].precedes(&ops[1]));
    }

    #[test]
    fn text_round_trip() {
        let text = "# a comment\n0 invoke 1 enqueue 5 -\n1 respond 1 enqueue - done\n\n2 invoke 0 dequeue - -\n3 respond 0 dequeue - bot\n";
        let h = History::parse(text).unwrap();
        assert_eq!(h.len(), 4);
        assert_eq!(h.events()[3].ret, Some(Ret::Bottom));
        assert_eq!(History::parse(&h.to_text()).unwrap(), h);
    }

    #[test]
    fn malformed_histories() {
        assert!(matches!(
            History::parse("0 invoke 1 enqueue"),
            Err(HistoryError::Parse { line: 1, .. })
        ));
        let nested = History::parse("0 invoke 0 dequeue - -\n1 invoke 0 dequeue - -").unwrap();
        assert!(matches!(
            nested.validate(),
            Err(HistoryError::NestedInvoke { .. })
        ));
        let orphan = History::parse("0 respond 0 dequeue - 3").unwrap();
        assert!(matches!(
            orphan.validate(),
            Err(HistoryError::UnmatchedResponse { .. })
        ));
        let backwards = History::parse("3 invoke 0 dequeue - -\n1 respond 0 dequeue - 3").unwrap();
        assert!(matches!(
            backwards.validate(),
            Err(HistoryError::OutOfOrder { .. })
        ));
    }
}
