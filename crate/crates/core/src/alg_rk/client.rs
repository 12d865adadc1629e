//! Client algorithms run by the simulation: sequential programs issuing
//! write-snapshot and agreement operations on `u64` values.

use crate::procset::ProcessId;
use serde::{Deserialize, Serialize};
use std::fmt::Debug;
use std::hash::Hash;

/// The operation a client is currently blocked on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ClientOp {
    /// Write the value into the own memory slot, then take a snapshot.
    Write(u64),
    /// Propose to agreement object `object`.
    Agree { object: u32, proposal: u64 },
    /// The client has terminated with this output.
    Done(u64),
}

/// A deterministic client. Each operation is issued by [`Client::next`] and
/// completed by exactly one of the two result callbacks.
pub trait Client: Clone + Debug + PartialEq + Eq + Hash + Serialize {
    type State: Clone + Debug + PartialEq + Eq + Hash + Serialize;

    fn start(&self, pid: ProcessId, input: u64) -> Self::State;
    fn next(&self, s: &Self::State) -> ClientOp;
    /// Result of the pending write-snapshot, one entry per process.
    fn snapshot_done(&self, s: &mut Self::State, snapshot: &[Option<u64>]);
    fn agreement_done(&self, s: &mut Self::State, value: u64);
}

/// Proposes its input to agreement object 0 and outputs the result.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct KSetClient;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum KSetState {
    Proposing(u64),
    Decided(u64),
}

impl Client for KSetClient {
    type State = KSetState;

    fn start(&self, _pid: ProcessId, input: u64) -> KSetState {
        KSetState::Proposing(input)
    }

    fn next(&self, s: &KSetState) -> ClientOp {
        match *s {
            KSetState::Proposing(v) => ClientOp::Agree {
                object: 0,
                proposal: v,
            },
            KSetState::Decided(v) => ClientOp::Done(v),
        }
    }

    fn snapshot_done(&self, _s: &mut KSetState, _snapshot: &[Option<u64>]) {}

    fn agreement_done(&self, s: &mut KSetState, value: u64) {
        *s = KSetState::Decided(value);
    }
}

/// Writes its input, takes one snapshot and outputs what it finds in its
/// own slot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct EchoWriter;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum EchoState {
    Writing { slot: usize, value: u64 },
    Read(Option<u64>),
}

impl Client for EchoWriter {
    type State = EchoState;

    fn start(&self, pid: ProcessId, input: u64) -> EchoState {
        EchoState::Writing {
            slot: pid.index(),
            value: input,
        }
    }

    fn next(&self, s: &EchoState) -> ClientOp {
        match *s {
            EchoState::Writing { value, .. } => ClientOp::Write(value),
            // A missing own write surfaces as an output the echo check rejects.
            EchoState::Read(v) => ClientOp::Done(v.unwrap_or(u64::MAX)),
        }
    }

    fn snapshot_done(&self, s: &mut EchoState, snapshot: &[Option<u64>]) {
        if let EchoState::Writing { slot, .. } = *s {
            *s = EchoState::Read(snapshot[slot]);
        }
    }

    fn agreement_done(&self, _s: &mut EchoState, _value: u64) {}
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "op")]
pub enum ScriptOp {
    /// Write the current value; the snapshot is ignored.
    Write,
    /// Write the current value, then continue with the smallest value seen.
    WriteMin,
    /// Propose the current value and continue with the result.
    Agree { object: u32 },
}

/// A client read from JSON, e.g. `{"ops": [{"op": "write-min"}, {"op": "agree", "object": 0}]}`.
/// Every process runs the same script starting from its input and outputs
/// its final value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScriptClient {
    pub ops: Vec<ScriptOp>,
    /// Upper bound on distinct outputs to check, if any.
    #[serde(default)]
    pub max_distinct: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ScriptState {
    pub pc: usize,
    pub value: u64,
}

impl Client for ScriptClient {
    type State = ScriptState;

    fn start(&self, _pid: ProcessId, input: u64) -> ScriptState {
        ScriptState {
            pc: 0,
            value: input,
        }
    }

    fn next(&self, s: &ScriptState) -> ClientOp {
        match self.ops.get(s.pc) {
            None => ClientOp::Done(s.value),
            Some(ScriptOp::Write | ScriptOp::WriteMin) => ClientOp::Write(s.value),
            Some(ScriptOp::Agree { object }) => ClientOp::Agree {
                object: *object,
                proposal: s.value,
            },
        }
    }

    fn snapshot_done(&self, s: &mut ScriptState, snapshot: &[Option<u64>]) {
        if self.ops.get(s.pc) == Some(&ScriptOp::WriteMin) {
            s.value = snapshot.iter().flatten().copied().min().unwrap_or(s.value);
        }
        s.pc += 1;
    }

    fn agreement_done(&self, s: &mut ScriptState, value: u64) {
        s.value = value;
        s.pc += 1;
    }
}
