use super::{Action, ISObject, RuntimeError, SnapshotMemory, Status, System};
use crate::complex::Vertex;
use crate::procset::{ProcSet, ProcessId};
use serde::Serialize;
use serde_json::json;

/// Processes with no shared state, each running a task of `ops` steps.
/// Used to enumerate bare schedules.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct FreeSteps {
    ops: usize,
    taken: Vec<usize>,
}

impl FreeSteps {
    pub fn new(n: usize, ops: usize) -> Self {
        Self {
            ops,
            taken: vec![0; n],
        }
    }
}

impl System for FreeSteps {
    type Output = usize;

    fn n(&self) -> usize {
        self.taken.len()
    }

    fn status(&self, pid: ProcessId) -> Status {
        match self.taken[pid.index()] {
            0 => Status::Idle,
            t if t >= self.ops => Status::Done,
            _ => Status::Running,
        }
    }

    fn enabled(&self, pid: ProcessId) -> Vec<Action> {
        if self.taken[pid.index()] < self.ops {
            vec![Action::Step]
        } else {
            Vec::new()
        }
    }

    fn apply(
        &mut self,
        pid: ProcessId,
        action: &Action,
    ) -> Result<serde_json::Value, RuntimeError> {
        if *action != Action::Step || self.taken[pid.index()] >= self.ops {
            return Err(RuntimeError::NotEnabled {
                pid,
                action: action.clone(),
            });
        }
        self.taken[pid.index()] += 1;
        Ok(json!({"step": self.taken[pid.index()]}))
    }

    fn output(&self, pid: ProcessId) -> Option<usize> {
        (self.taken[pid.index()] >= self.ops).then_some(self.ops)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
enum Phase {
    Idle,
    Pending,
    Done,
}

/// Each participant invokes one immediate snapshot with its own id and
/// returns the view. Schedules end in exactly the ordered partitions of the
/// participants.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct OneShotIs {
    n: usize,
    participants: ProcSet,
    object: ISObject<usize>,
    phase: Vec<Phase>,
    views: Vec<Option<ProcSet>>,
}

impl OneShotIs {
    pub fn new(n: usize, participants: ProcSet) -> Self {
        Self {
            n,
            participants,
            object: ISObject::new(),
            phase: vec![Phase::Idle; n],
            views: vec![None; n],
        }
    }

    pub fn object(&self) -> &ISObject<usize> {
        &self.object
    }
}

fn blocks_led_by(pid: ProcessId, pending: ProcSet) -> Vec<Action> {
    if !pending.contains(pid) {
        return Vec::new();
    }
    pending
        .subsets()
        .filter(|b| ProcSet::min(*b) == Some(pid))
        .map(Action::Block)
        .collect()
}

fn not_enabled(pid: ProcessId, action: &Action) -> RuntimeError {
    RuntimeError::NotEnabled {
        pid,
        action: action.clone(),
    }
}

impl System for OneShotIs {
    type Output = ProcSet;

    fn n(&self) -> usize {
        self.n
    }

    fn status(&self, pid: ProcessId) -> Status {
        match self.phase[pid.index()] {
            Phase::Idle => Status::Idle,
            Phase::Pending => Status::Running,
            Phase::Done => Status::Done,
        }
    }

    fn enabled(&self, pid: ProcessId) -> Vec<Action> {
        match self.phase[pid.index()] {
            Phase::Idle if self.participants.contains(pid) => vec![Action::Step],
            Phase::Pending => blocks_led_by(pid, self.object.pending()),
            _ => Vec::new(),
        }
    }

    fn apply(
        &mut self,
        pid: ProcessId,
        action: &Action,
    ) -> Result<serde_json::Value, RuntimeError> {
        if !self.enabled(pid).contains(action) {
            return Err(not_enabled(pid, action));
        }
        match action {
            Action::Step => {
                self.object.invoke(pid, pid.get())?;
                self.phase[pid.index()] = Phase::Pending;
                Ok(json!({"op": "invoke"}))
            }
            Action::Block(b) => {
                let out = self.object.resolve(*b)?;
                let view: ProcSet = out.keys().copied().collect();
                for p in b.iter() {
                    self.phase[p.index()] = Phase::Done;
                    self.views[p.index()] = Some(view);
                }
                Ok(json!({"op": "resolve", "block": b, "view": view}))
            }
            Action::Choose(_) => Err(not_enabled(pid, action)),
        }
    }

    fn output(&self, pid: ProcessId) -> Option<ProcSet> {
        self.views[pid.index()]
    }
}

/// Full-information iterated immediate snapshot: in each round a process
/// submits its current label to a fresh IS object and its new label lists
/// what it got back. After the last round it outputs its vertex of `Chr^m s`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct FullInfoIis {
    n: usize,
    rounds: usize,
    participants: ProcSet,
    objects: Vec<ISObject<(String, ProcSet)>>,
    round: Vec<usize>,
    phase: Vec<Phase>,
    label: Vec<String>,
    seen: Vec<ProcSet>,
}

impl FullInfoIis {
    pub fn new(n: usize, rounds: usize, participants: ProcSet) -> Self {
        Self {
            n,
            rounds,
            participants,
            objects: vec![ISObject::new(); rounds],
            round: vec![0; n],
            phase: vec![Phase::Idle; n],
            label: vec![String::new(); n],
            seen: ProcessId::all(n).map(ProcSet::singleton).collect(),
        }
    }
}

impl System for FullInfoIis {
    type Output = Vertex;

    fn n(&self) -> usize {
        self.n
    }

    fn status(&self, pid: ProcessId) -> Status {
        match self.phase[pid.index()] {
            Phase::Idle => Status::Idle,
            Phase::Pending => Status::Running,
            Phase::Done => Status::Done,
        }
    }

    fn enabled(&self, pid: ProcessId) -> Vec<Action> {
        let i = pid.index();
        match self.phase[i] {
            Phase::Idle if self.participants.contains(pid) => vec![Action::Step],
            Phase::Pending => blocks_led_by(pid, self.objects[self.round[i]].pending()),
            _ => Vec::new(),
        }
    }

    fn apply(
        &mut self,
        pid: ProcessId,
        action: &Action,
    ) -> Result<serde_json::Value, RuntimeError> {
        if !self.enabled(pid).contains(action) {
            return Err(not_enabled(pid, action));
        }
        match action {
            Action::Step => {
                let i = pid.index();
                self.objects[0].invoke(pid, (self.label[i].clone(), self.seen[i]))?;
                self.phase[i] = Phase::Pending;
                Ok(json!({"op": "invoke", "round": 1}))
            }
            Action::Block(b) => {
                let r = self.round[pid.index()];
                let out = self.objects[r].resolve(*b)?;
                let parts: Vec<String> = out
                    .iter()
                    .map(|(j, (l, _))| format!("{}{}", j.get(), l))
                    .collect();
                let label = format!("{{{}}}", parts.join(","));
                let seen = out.values().fold(ProcSet::EMPTY, |a, (_, s)| a.union(*s));
                for p in b.iter() {
                    let i = p.index();
                    self.label[i] = label.clone();
                    self.seen[i] = seen;
                    self.round[i] += 1;
                    if self.round[i] == self.rounds {
                        self.phase[i] = Phase::Done;
                    } else {
                        let r = self.round[i];
                        self.objects[r].invoke(p, (label.clone(), seen))?;
                    }
                }
                Ok(json!({"op": "resolve", "round": r + 1, "block": b}))
            }
            Action::Choose(_) => Err(not_enabled(pid, action)),
        }
    }

    fn output(&self, pid: ProcessId) -> Option<Vertex> {
        let i = pid.index();
        (self.phase[i] == Phase::Done)
            .then(|| Vertex::new(pid, self.label[i].as_str(), self.seen[i]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
enum EchoPc {
    Write,
    Scan,
    Done,
}

/// Write the input, scan, decide the input.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Echo {
    inputs: Vec<Option<u64>>,
    memory: SnapshotMemory<u64>,
    pc: Vec<EchoPc>,
}

impl Echo {
    pub fn new(inputs: Vec<Option<u64>>) -> Self {
        let n = inputs.len();
        Self {
            inputs,
            memory: SnapshotMemory::new(n),
            pc: vec![EchoPc::Write; n],
        }
    }
}

impl System for Echo {
    type Output = u64;

    fn n(&self) -> usize {
        self.inputs.len()
    }

    fn status(&self, pid: ProcessId) -> Status {
        match self.pc[pid.index()] {
            EchoPc::Write => Status::Idle,
            EchoPc::Scan => Status::Running,
            EchoPc::Done => Status::Done,
        }
    }

    fn enabled(&self, pid: ProcessId) -> Vec<Action> {
        if self.inputs[pid.index()].is_some() && self.pc[pid.index()] != EchoPc::Done {
            vec![Action::Step]
        } else {
            Vec::new()
        }
    }

    fn apply(
        &mut self,
        pid: ProcessId,
        action: &Action,
    ) -> Result<serde_json::Value, RuntimeError> {
        if !self.enabled(pid).contains(action) {
            return Err(not_enabled(pid, action));
        }
        let i = pid.index();
        let v = self.inputs[i].expect("enabled implies participating");
        match self.pc[i] {
            EchoPc::Write => {
                self.memory.update(pid, v);
                self.pc[i] = EchoPc::Scan;
                Ok(json!({"op": "update", "value": v}))
            }
            _ => {
                let snap = self.memory.scan();
                self.pc[i] = EchoPc::Done;
                Ok(json!({"op": "scan", "result": snap}))
            }
        }
    }

    fn output(&self, pid: ProcessId) -> Option<u64> {
        (self.pc[pid.index()] == EchoPc::Done).then(|| self.inputs[pid.index()].unwrap())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{explore_states, explore_traces, Bound};
    use crate::subdivision::{enumerate_is_runs, run_facet, RunSequence};
    use crate::Simplex;
    use std::collections::BTreeSet;

    #[test]
    fn one_shot_profiles_are_ordered_partitions() {
        let p = ProcSet::full(3);
        let mut parts = BTreeSet::new();
        let stats = explore_states(&OneShotIs::new(3, p), Bound::wait_free(8), |_, s| {
            parts.insert(s.object().partition().ok_or("unfinished")?);
            Ok(())
        })
        .unwrap();
        assert_eq!(stats.truncated, 0);
        let expected: BTreeSet<_> = enumerate_is_runs(p).into_iter().collect();
        assert_eq!(parts, expected);
    }

    #[test]
    fn full_information_outputs_are_facets() {
        let sys = FullInfoIis::new(2, 2, ProcSet::full(2));
        explore_traces(&sys, Bound::wait_free(20), |_, s| {
            let facet = Simplex::new(s.outputs().into_values().collect()).unwrap();
            let runs: Vec<RunSequence> = crate::subdivision::enumerate_runs(ProcSet::full(2), 2);
            if runs.iter().any(|r| run_facet(r) == facet) {
                Ok(())
            } else {
                Err(format!("{facet:?} is not a facet"))
            }
        })
        .unwrap();
    }

    #[test]
    fn echo_decides_inputs() {
        let sys = Echo::new(vec![Some(4), Some(5), None]);
        explore_traces(&sys, Bound::wait_free(10), |_, s| {
            let out = s.outputs();
            (out.len() == 2 && out[&ProcessId::of(1)] == 4 && out[&ProcessId::of(2)] == 5)
                .then_some(())
                .ok_or_else(|| format!("{out:?}"))
        })
        .unwrap();
    }
}
