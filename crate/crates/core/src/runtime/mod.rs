//! A deterministic model of asynchronous shared memory.
//!
//! A [`System`] is a closed automaton for `n` processes together with their
//! shared objects. One schedule event is one shared-memory operation of one
//! process, and all nondeterminism (which process moves, how concurrent
//! immediate-snapshot invocations are grouped, what an oracle object answers)
//! is carried by the event's [`Action`]. Schedules can then be enumerated,
//! sampled from a seed, or replayed from a trace.

mod explore;
mod objects;
mod systems;
mod trace;

pub use explore::{
    enumerate_schedules, explore_states, explore_traces, fair_run, legal_events, seeded_run,
    seeded_schedule, Bound, ExploreStats, Violation,
};
pub use objects::{is_properties_hold, ISObject, SnapshotMemory};
pub use systems::{Echo, FreeSteps, FullInfoIis, OneShotIs};
pub use trace::{replay, run_schedule, state_digest, ReplayError, Trace, TraceRecord};

use crate::procset::{ProcSet, ProcessId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Debug;
use std::hash::Hash;
use thiserror::Error;

/// Where a process stands in its task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    /// Has not taken its first event.
    Idle,
    /// Invoked and not yet returned; counts toward the concurrency bound.
    Running,
    Done,
}

/// The nondeterministic content of one schedule event.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "arg")]
pub enum Action {
    /// The process performs its next operation.
    Step,
    /// Pending immediate-snapshot invocations of these processes return
    /// together as one block. Issued by the smallest member.
    Block(ProcSet),
    /// An oracle object resolves with the given choice.
    Choose(u32),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub pid: ProcessId,
    pub action: Action,
}

impl Event {
    pub fn step(pid: usize) -> Self {
        Self {
            pid: ProcessId::of(pid),
            action: Action::Step,
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum RuntimeError {
    #[error("{pid} cannot perform {action:?} in its current state")]
    NotEnabled { pid: ProcessId, action: Action },
    #[error("{0} invoked a one-shot object twice")]
    DoubleInvocation(ProcessId),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("event would exceed the concurrency bound {0}")]
    ConcurrencyBound(usize),
}

/// A closed, deterministic model of processes and shared objects.
///
/// States must serialize canonically (ordered maps only) since digests and
/// fingerprints are taken from them.
pub trait System: Clone + Eq + Hash + Serialize {
    type Output: Clone + Debug + PartialEq + Serialize;

    fn n(&self) -> usize;

    fn status(&self, pid: ProcessId) -> Status;

    /// Actions `pid` may take now; empty once it is done or while it waits.
    fn enabled(&self, pid: ProcessId) -> Vec<Action>;

    /// Performs the event and returns a description of its effect.
    fn apply(&mut self, pid: ProcessId, action: &Action)
        -> Result<serde_json::Value, RuntimeError>;

    fn output(&self, pid: ProcessId) -> Option<Self::Output>;

    /// A representative of this state's symmetry class, if the system has
    /// symmetries worth folding. Exploration merges states whose
    /// representatives agree, so `check` and the properties being explored
    /// must be invariant under the symmetry.
    fn canonical(&self) -> Option<Self> {
        None
    }

    /// Global invariants, evaluated after every event during exploration.
    fn check(&self) -> Result<(), String> {
        Ok(())
    }

    fn outputs(&self) -> BTreeMap<ProcessId, Self::Output> {
        ProcessId::all(self.n())
            .filter_map(|p| self.output(p).map(|o| (p, o)))
            .collect()
    }

    fn active(&self) -> ProcSet {
        ProcessId::all(self.n())
            .filter(|&p| self.status(p) == Status::Running)
            .collect()
    }

    fn is_finished(&self) -> bool {
        ProcessId::all(self.n()).all(|p| self.status(p) == Status::Done)
    }
}
