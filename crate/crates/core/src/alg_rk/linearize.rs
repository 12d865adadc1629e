//! Linearization of the simulated write-snapshot operations: round by
//! round, the writes first observed in the round's snapshot, then the
//! snapshots returned in that round.

use super::alg2::Slot;
use crate::subdivision::RunSequence;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Everything a round produced that the checkers need.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub run: RunSequence,
    /// Processes (1-based) that passed the counter test, with their
    /// estimated snapshot.
    pub validated: Vec<(usize, Vec<Slot>)>,
    /// Processes whose write-snapshot operation returned this round.
    pub returned: Vec<usize>,
    /// Writes issued at the end of the round: process, counter, value.
    pub issued: Vec<(usize, u32, Option<u64>)>,
    /// Completed agreement operations: process, object, value.
    pub agreed: Vec<(usize, u32, u64)>,
    /// Started agreement operations: process, object, proposal.
    pub proposed: Vec<(usize, u32, u64)>,
    pub terminated: Vec<(usize, u64)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alg2Trace {
    pub n: usize,
    pub k: usize,
    pub inputs: Vec<Option<u64>>,
    /// Writes with counter 1, issued before the first round.
    pub initial: Vec<(usize, Option<u64>)>,
    pub rounds: Vec<RoundRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case", tag = "op")]
pub enum LinOp {
    Write {
        process: usize,
        counter: u32,
        value: Option<u64>,
        round: usize,
    },
    Snapshot {
        process: usize,
        round: usize,
        result: Vec<Slot>,
    },
}

/// Incremental checker; keeps the linearized memory and the writes that
/// may still be linearized.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct SnapshotLinearizer {
    mem: Vec<Slot>,
    /// Issued writes not yet overtaken: (process, counter) -> (value, round).
    issued: BTreeMap<(usize, u32), (Option<u64>, usize)>,
    /// Latest write issued by each process.
    latest: Vec<u32>,
    last_read: Vec<Option<usize>>,
    #[serde(skip)]
    keep_history: bool,
    history: Vec<LinOp>,
}

impl SnapshotLinearizer {
    pub fn new(n: usize, initial: &[(usize, Option<u64>)], keep_history: bool) -> Self {
        let mut s = Self {
            mem: vec![(0, None); n],
            issued: BTreeMap::new(),
            latest: vec![0; n],
            last_read: vec![None; n],
            keep_history,
            history: Vec::new(),
        };
        for &(p, v) in initial {
            s.issue(p, 1, v, 0);
        }
        s
    }

    fn issue(&mut self, p: usize, c: u32, v: Option<u64>, round: usize) {
        self.issued.insert((p - 1, c), (v, round));
        self.latest[p - 1] = self.latest[p - 1].max(c);
    }

    pub fn history(&self) -> &[LinOp] {
        &self.history
    }

    pub fn feed(&mut self, rec: &RoundRecord) -> Result<(), String> {
        let r = rec.round;
        if let Some((p0, snap)) = rec.validated.first() {
            if let Some((p1, other)) = rec.validated.iter().find(|(_, s)| s != snap) {
                return Err(format!(
                    "round {r}: processes {p0} and {p1} validated different snapshots {snap:?} and {other:?}"
                ));
            }
            for (m, &(c, v)) in snap.iter().enumerate() {
                let (mc, _) = self.mem[m];
                if c < mc {
                    return Err(format!(
                        "round {r}: snapshot holds counter {c} of process {}, already saw {mc}",
                        m + 1
                    ));
                }
                for cc in mc + 1..=c {
                    let Some(&(wv, wr)) = self.issued.get(&(m, cc)) else {
                        return Err(format!(
                            "round {r}: write {cc} of process {} was never issued",
                            m + 1
                        ));
                    };
                    if wr >= r || self.last_read[m].is_some_and(|lr| wr < lr) {
                        return Err(format!(
                            "round {r}: write {cc} of process {} issued in round {wr} out of local order",
                            m + 1
                        ));
                    }
                    if cc == c && wv != v {
                        return Err(format!(
                            "round {r}: process {} counter {c} holds {v:?}, wrote {wv:?}",
                            m + 1
                        ));
                    }
                    if self.keep_history {
                        self.history.push(LinOp::Write {
                            process: m + 1,
                            counter: cc,
                            value: wv,
                            round: r,
                        });
                    }
                }
                self.mem[m] = (c, v);
            }
            for &p in &rec.returned {
                let own = self.mem[p - 1].0;
                if own != self.latest[p - 1] {
                    return Err(format!(
                        "round {r}: process {p} reads counter {own} of its own slot, wrote {}",
                        self.latest[p - 1]
                    ));
                }
                if !rec.validated.iter().any(|(q, _)| *q == p) {
                    return Err(format!(
                        "round {r}: process {p} returned without validating"
                    ));
                }
                self.last_read[p - 1] = Some(r);
                if self.keep_history {
                    self.history.push(LinOp::Snapshot {
                        process: p,
                        round: r,
                        result: snap.clone(),
                    });
                }
            }
            let mem = self.mem.clone();
            self.issued.retain(|(m, c), _| *c > mem[*m].0);
        } else if !rec.returned.is_empty() {
            return Err(format!("round {r}: a snapshot returned without validation"));
        }
        for &(p, c, v) in &rec.issued {
            if let Some(&(old, _)) = self.issued.get(&(p - 1, c)) {
                if old != v {
                    return Err(format!("round {r}: process {p} issued counter {c} twice"));
                }
            }
            self.issue(p, c, v, r);
        }
        Ok(())
    }
}

/// Replays a sequential single-writer snapshot history: every snapshot must
/// return the latest linearized write of each process.
pub fn check_sequential(n: usize, history: &[LinOp]) -> Result<(), String> {
    let mut mem: Vec<Slot> = vec![(0, None); n];
    for (i, op) in history.iter().enumerate() {
        match op {
            LinOp::Write {
                process,
                counter,
                value,
                ..
            } => {
                if *counter <= mem[process - 1].0 {
                    return Err(format!(
                        "op {i}: write {counter} of process {process} is not newer"
                    ));
                }
                mem[process - 1] = (*counter, *value);
            }
            LinOp::Snapshot {
                process, result, ..
            } => {
                if *result != mem {
                    return Err(format!(
                        "op {i}: snapshot of process {process} is not the memory state"
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Builds the round-indexed linearization of a trace and checks it.
pub fn alg2_snapshot_linearization(trace: &Alg2Trace) -> Result<Vec<LinOp>, String> {
    let mut lin = SnapshotLinearizer::new(trace.n, &trace.initial, true);
    for rec in &trace.rounds {
        lin.feed(rec)?;
    }
    check_sequential(trace.n, lin.history())?;
    Ok(lin.history)
}
