use crate::procset::ProcessId;
use crate::runtime::{Action, RuntimeError, SnapshotMemory, Status, System};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::fmt::Debug;
use std::hash::Hash;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaFlag {
    Commit,
    Adopt,
}

/// Atomic commit-adopt: each proposal takes effect at one schedule event.
/// Equivalent to running the read-write protocol with proposals executed
/// one after the other: everyone returns the first value, and commits iff
/// every proposal so far equals it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CommitAdoptObject<V> {
    proposals: Vec<(ProcessId, V)>,
}

impl<V> Default for CommitAdoptObject<V> {
    fn default() -> Self {
        Self {
            proposals: Vec::new(),
        }
    }
}

impl<V: Clone + PartialEq> CommitAdoptObject<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn propose(&mut self, i: ProcessId, v: V) -> Result<(CaFlag, V), RuntimeError> {
        if self.proposals.iter().any(|(p, _)| *p == i) {
            return Err(RuntimeError::DoubleInvocation(i));
        }
        self.proposals.push((i, v));
        let first = self.proposals[0].1.clone();
        let flag = if self.proposals.iter().all(|(_, w)| *w == first) {
            CaFlag::Commit
        } else {
            CaFlag::Adopt
        };
        Ok((flag, first))
    }

    pub fn proposals(&self) -> &[(ProcessId, V)] {
        &self.proposals
    }

    pub fn relabel(&mut self, f: impl Fn(ProcessId) -> ProcessId) {
        for (p, _) in &mut self.proposals {
            *p = f(*p);
        }
    }
}

/// Checks the commit-adopt contract over the returned pairs of one object.
/// `complete` says whether every proposer has returned, which is needed for
/// the unanimity clause.
pub fn check_commit_adopt<V: PartialEq + Debug>(
    proposals: &[V],
    results: &[(CaFlag, V)],
    complete: bool,
) -> Result<(), String> {
    for (_, v) in results {
        if !proposals.contains(v) {
            return Err(format!("returned {v:?} was never proposed"));
        }
    }
    if let Some((_, c)) = results.iter().find(|(f, _)| *f == CaFlag::Commit) {
        if let Some((_, v)) = results.iter().find(|(_, v)| v != c) {
            return Err(format!("{c:?} committed but {v:?} returned"));
        }
    }
    if complete
        && proposals.windows(2).all(|w| w[0] == w[1])
        && results.iter().any(|(f, _)| *f == CaFlag::Adopt)
    {
        return Err("unanimous proposals but an adopt flag".into());
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
enum CaPc {
    WriteA,
    ScanA,
    WriteB,
    ScanB,
    Done,
}

/// Commit-adopt from two snapshot arrays. A process announces its value in
/// `A`, marks it clean in `B` if `A` held nothing else, and commits if every
/// entry of `B` it sees is clean; otherwise it adopts a clean value if it
/// sees one, or keeps its own.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct CommitAdoptRw<V> {
    proposals: Vec<Option<V>>,
    a: SnapshotMemory<V>,
    b: SnapshotMemory<(V, bool)>,
    pc: Vec<CaPc>,
    clean: Vec<bool>,
    result: Vec<Option<(CaFlag, V)>>,
}

impl<V: Clone + PartialEq + Eq + Hash + Serialize + Debug> CommitAdoptRw<V> {
    pub fn new(proposals: Vec<Option<V>>) -> Self {
        let n = proposals.len();
        Self {
            a: SnapshotMemory::new(n),
            b: SnapshotMemory::new(n),
            pc: vec![CaPc::WriteA; n],
            clean: vec![false; n],
            result: vec![None; n],
            proposals,
        }
    }

    /// Contract check on what has been returned so far.
    pub fn contract(&self) -> Result<(), String> {
        let props: Vec<V> = self.proposals.iter().flatten().cloned().collect();
        let results: Vec<(CaFlag, V)> = self.result.iter().flatten().cloned().collect();
        let complete = self
            .proposals
            .iter()
            .zip(&self.result)
            .all(|(p, r)| p.is_none() || r.is_some());
        check_commit_adopt(&props, &results, complete)
    }
}

impl<V: Clone + PartialEq + Eq + Hash + Serialize + Debug> System for CommitAdoptRw<V> {
    type Output = (CaFlag, V);

    fn n(&self) -> usize {
        self.proposals.len()
    }

    fn status(&self, pid: ProcessId) -> Status {
        match self.pc[pid.index()] {
            CaPc::WriteA => Status::Idle,
            CaPc::Done => Status::Done,
            _ => Status::Running,
        }
    }

    fn enabled(&self, pid: ProcessId) -> Vec<Action> {
        let i = pid.index();
        if self.proposals[i].is_some() && self.pc[i] != CaPc::Done {
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
            return Err(RuntimeError::NotEnabled {
                pid,
                action: action.clone(),
            });
        }
        let i = pid.index();
        let v = self.proposals[i].clone().expect("enabled");
        Ok(match self.pc[i] {
            CaPc::WriteA => {
                self.a.update(pid, v);
                self.pc[i] = CaPc::ScanA;
                json!({"op": "writeA"})
            }
            CaPc::ScanA => {
                self.clean[i] = self.a.scan().iter().flatten().all(|w| *w == v);
                self.pc[i] = CaPc::WriteB;
                json!({"op": "scanA", "clean": self.clean[i]})
            }
            CaPc::WriteB => {
                self.b.update(pid, (v, self.clean[i]));
                self.pc[i] = CaPc::ScanB;
                json!({"op": "writeB"})
            }
            CaPc::ScanB => {
                let seen: Vec<(V, bool)> = self.b.scan().into_iter().flatten().collect();
                let r = if seen.iter().all(|(_, c)| *c) {
                    (CaFlag::Commit, v)
                } else if let Some((u, _)) = seen.iter().find(|(_, c)| *c) {
                    (CaFlag::Adopt, u.clone())
                } else {
                    (CaFlag::Adopt, v)
                };
                self.result[i] = Some(r);
                self.pc[i] = CaPc::Done;
                json!({"op": "scanB"})
            }
            CaPc::Done => unreachable!(),
        })
    }

    fn output(&self, pid: ProcessId) -> Option<(CaFlag, V)> {
        self.result[pid.index()].clone()
    }

    fn check(&self) -> Result<(), String> {
        self.contract()
    }
}
