//! One process of the `k`-set-consensus simulation in `R_k*`: the update
//! and validate stages run after every `R_k` iteration.

use super::client::{Client, ClientOp};
use crate::procset::{ProcSet, ProcessId};
use crate::subdivision::{RunSequence, RunViews};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Undecided,
    Decided,
}

/// A memory slot estimate: write counter and value (`None` is the initial
/// or a dummy first value).
pub type Slot = (u32, Option<u64>);

/// What a process feeds into an `R_k` iteration.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RkInput {
    pub state: Phase,
    pub write_count: Vec<u32>,
    pub write_val: Vec<Option<u64>>,
    pub cons_history: BTreeMap<u32, u64>,
}

/// The `IS²` output of one process in one `R_k` iteration: for every `j`
/// it saw in the second round, `j`'s first-round view, with the inputs of
/// the processes in it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RkOutput {
    pub entries: Vec<(ProcessId, Vec<(ProcessId, RkInput)>)>,
}

impl RkOutput {
    /// Output of `p` in the two-round run `run`, given everyone's input.
    pub fn of(run: &RunSequence, inputs: &BTreeMap<ProcessId, RkInput>, p: ProcessId) -> Self {
        Self::from_views(&RunViews::new(run), inputs, p)
    }

    pub fn from_views(
        views: &RunViews,
        inputs: &BTreeMap<ProcessId, RkInput>,
        p: ProcessId,
    ) -> Self {
        let entries = views
            .snapshot(1, p)
            .iter()
            .map(|j| {
                let view = views
                    .snapshot(0, j)
                    .iter()
                    .map(|q| (q, inputs[&q].clone()))
                    .collect();
                (j, view)
            })
            .collect();
        Self { entries }
    }

    /// The processes in the output.
    pub fn members(&self) -> ProcSet {
        self.entries.iter().map(|(j, _)| *j).collect()
    }
}

/// Local state of one simulating process.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Alg2State<S> {
    pub id: ProcessId,
    pub r: usize,
    pub state: Phase,
    pub write_count: Vec<u32>,
    pub write_val: Vec<Option<u64>>,
    pub cons_id: Option<u32>,
    pub cons_prop: Option<u64>,
    pub cons_history: BTreeMap<u32, u64>,
    pub leaders: bool,
    pub client: S,
    /// A real (non-dummy) write-snapshot is in progress.
    pub write_pending: bool,
    pub output: Option<u64>,
}

/// A slot estimate replaced during the update stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Adoption {
    pub slot: usize,
    pub old: Slot,
    pub new: Slot,
}

/// What the validate stage did.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Validation {
    /// The write counters summed to the round number; carries the estimated
    /// snapshot.
    pub snapshot: Option<Vec<Slot>>,
    /// A write-snapshot operation completed with that snapshot.
    pub returned: bool,
    /// Agreement operation completed: object and value.
    pub agreed: Option<(u32, u64)>,
    /// Agreement operation started: object and proposal.
    pub proposed: Option<(u32, u64)>,
    /// The write issued by the counter increment.
    pub issued: Option<Slot>,
    /// A real write-snapshot operation started.
    pub wrote: bool,
    pub terminated: Option<u64>,
}

impl<S: Clone> Alg2State<S> {
    pub fn new<C: Client<State = S>>(client: &C, n: usize, id: ProcessId, input: u64) -> Self {
        let cs = client.start(id, input);
        let mut write_val = vec![None; n];
        let mut write_count = vec![0; n];
        let mut write_pending = false;
        if let ClientOp::Write(v) = client.next(&cs) {
            write_val[id.index()] = Some(v);
            write_pending = true;
        }
        write_count[id.index()] = 1;
        Self {
            id,
            r: 0,
            state: Phase::Undecided,
            write_count,
            write_val,
            cons_id: None,
            cons_prop: None,
            cons_history: BTreeMap::new(),
            leaders: true,
            client: cs,
            write_pending,
            output: None,
        }
    }

    pub fn input(&self) -> RkInput {
        RkInput {
            state: self.state,
            write_count: self.write_count.clone(),
            write_val: self.write_val.clone(),
            cons_history: self.cons_history.clone(),
        }
    }

    pub fn slots(&self) -> Vec<Slot> {
        self.write_count
            .iter()
            .copied()
            .zip(self.write_val.iter().copied())
            .collect()
    }

    /// Starts a round: the caller then feeds the `R_k` output of this round.
    pub fn begin_round(&mut self) {
        self.r += 1;
        self.leaders = true;
    }
}

/// Adopts newer slot values from every input seen, and the agreement
/// estimates of every seen process whose first-round view holds at most
/// `k` undecided inputs.
pub fn alg2_update_stage<S>(st: &mut Alg2State<S>, out: &RkOutput, k: usize) -> Vec<Adoption> {
    let mut adopted = Vec::new();
    for (j, view_j) in &out.entries {
        let input_j = &view_j
            .iter()
            .find(|(q, _)| q == j)
            .expect("self-inclusion")
            .1;
        for m in 0..st.write_count.len() {
            if input_j.write_count[m] > st.write_count[m] {
                let old = (st.write_count[m], st.write_val[m]);
                st.write_count[m] = input_j.write_count[m];
                st.write_val[m] = input_j.write_val[m];
                adopted.push(Adoption {
                    slot: m,
                    old,
                    new: (st.write_count[m], st.write_val[m]),
                });
            }
        }
        let undecided = view_j
            .iter()
            .filter(|(_, x)| x.state == Phase::Undecided)
            .count();
        if undecided <= k {
            if let Some(id) = st.cons_id {
                if !input_j.cons_history.contains_key(&id) {
                    st.leaders = false;
                }
            }
            for (a, v) in &input_j.cons_history {
                st.cons_history.insert(*a, *v);
            }
        }
    }
    adopted
}

/// Completes pending operations when the write counters sum to the round
/// number, then starts the next ones.
pub fn alg2_validate_stage<C: Client>(
    st: &mut Alg2State<C::State>,
    client: &C,
) -> Result<Validation, String> {
    let mut v = Validation::default();
    let sum: u64 = st.write_count.iter().map(|&c| c as u64).sum();
    if sum != st.r as u64 {
        return Ok(v);
    }
    v.snapshot = Some(st.slots());
    if st.write_pending {
        client.snapshot_done(&mut st.client, &st.write_val);
        st.write_pending = false;
        v.returned = true;
    }
    if st.leaders {
        if let Some(id) = st.cons_id {
            let val = *st
                .cons_history
                .get(&id)
                .ok_or_else(|| format!("process {} has no estimate for object {id}", st.id))?;
            st.cons_prop = Some(val);
            client.agreement_done(&mut st.client, val);
            st.cons_id = None;
            v.agreed = Some((id, val));
        }
    }
    if let ClientOp::Done(out) = client.next(&st.client) {
        st.state = Phase::Decided;
        st.output = Some(out);
        v.terminated = Some(out);
        return Ok(v);
    }
    let me = st.id.index();
    st.write_count[me] += 1;
    let op = client.next(&st.client);
    if let ClientOp::Agree { object, proposal } = op {
        if st.cons_id.is_none() {
            st.cons_id = Some(object);
            st.cons_prop = Some(proposal);
            st.cons_history.entry(object).or_insert(proposal);
            v.proposed = Some((object, proposal));
        }
    }
    if let ClientOp::Write(x) = op {
        if !st.write_pending {
            st.write_val[me] = Some(x);
            st.write_pending = true;
            v.wrote = true;
        }
    }
    v.issued = Some((st.write_count[me], st.write_val[me]));
    Ok(v)
}
