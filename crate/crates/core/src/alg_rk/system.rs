//! All processes of the simulation, advanced one `R_k` facet at a time,
//! with the safety claims checked after every round.

use super::alg2::{alg2_update_stage, alg2_validate_stage, Alg2State, Phase, RkInput, RkOutput};
use super::client::Client;
use super::linearize::{Alg2Trace, RoundRecord, SnapshotLinearizer};
use crate::affine::in_rk;
use crate::procset::{ProcSet, ProcessId};
use crate::subdivision::{RunSequence, RunViews};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Which processes take part in each iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Participation {
    /// Decided processes keep showing up with their frozen input.
    #[default]
    All,
    /// Only undecided processes take part.
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
struct Ghost {
    lin: SnapshotLinearizer,
    /// Values held for (process, counter), above every process's counter.
    values: BTreeMap<(usize, u32), Option<u64>>,
    proposals: BTreeMap<u32, BTreeSet<u64>>,
    decisions: BTreeMap<u32, BTreeSet<u64>>,
    /// Rounds since an undecided process last completed an operation.
    idle: usize,
    max_idle: usize,
    /// Round since which a process owes a completion for being designated.
    owed: Vec<Option<usize>>,
    max_wait: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Alg2System<C: Client> {
    n: usize,
    k: usize,
    client: C,
    inputs: Vec<Option<u64>>,
    procs: Vec<Option<Alg2State<C::State>>>,
    round: usize,
    participation: Participation,
    ghost: Ghost,
}

impl<C: Client> Alg2System<C> {
    /// `inputs[i]` is `None` for a process that never participates.
    pub fn new(client: C, k: usize, inputs: Vec<Option<u64>>) -> Self {
        let n = inputs.len();
        let procs: Vec<_> = inputs
            .iter()
            .enumerate()
            .map(|(i, x)| x.map(|v| Alg2State::new(&client, n, ProcessId::of(i + 1), v)))
            .collect();
        let initial = Self::initial_writes(&procs);
        let mut values = BTreeMap::new();
        for &(p, v) in &initial {
            values.insert((p - 1, 1), v);
        }
        Self {
            n,
            k,
            client,
            inputs,
            procs,
            round: 0,
            participation: Participation::All,
            ghost: Ghost {
                lin: SnapshotLinearizer::new(n, &initial, false),
                values,
                proposals: BTreeMap::new(),
                decisions: BTreeMap::new(),
                idle: 0,
                max_idle: 0,
                owed: vec![None; n],
                max_wait: 0,
            },
        }
    }

    fn initial_writes(procs: &[Option<Alg2State<C::State>>]) -> Vec<(usize, Option<u64>)> {
        procs
            .iter()
            .flatten()
            .map(|s| (s.id.get(), s.write_val[s.id.index()]))
            .collect()
    }

    pub fn with_participation(mut self, p: Participation) -> Self {
        self.participation = p;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn inputs(&self) -> &[Option<u64>] {
        &self.inputs
    }

    pub fn process(&self, p: ProcessId) -> Option<&Alg2State<C::State>> {
        self.procs.get(p.index()).and_then(Option::as_ref)
    }

    pub fn undecided(&self) -> ProcSet {
        self.procs
            .iter()
            .flatten()
            .filter(|s| s.state == Phase::Undecided)
            .map(|s| s.id)
            .collect()
    }

    /// Processes expected in the next iteration; empty once nobody is left.
    pub fn participants(&self) -> ProcSet {
        let undecided = self.undecided();
        if undecided.is_empty() {
            return ProcSet::EMPTY;
        }
        match self.participation {
            Participation::All => self.procs.iter().flatten().map(|s| s.id).collect(),
            Participation::Undecided => undecided,
        }
    }

    pub fn outputs(&self) -> BTreeMap<usize, u64> {
        self.procs
            .iter()
            .flatten()
            .filter_map(|s| s.output.map(|o| (s.id.get(), o)))
            .collect()
    }

    /// Distinct values decided per agreement object.
    pub fn decisions(&self) -> &BTreeMap<u32, BTreeSet<u64>> {
        &self.ghost.decisions
    }

    /// Longest stretch of rounds so far in which no undecided process
    /// completed an operation.
    pub fn max_idle(&self) -> usize {
        self.ghost.max_idle
    }

    /// Longest wait so far of a designated process for its next completed
    /// operation, in rounds, counting the designating round.
    pub fn max_wait(&self) -> usize {
        let open = self
            .ghost
            .owed
            .iter()
            .flatten()
            .map(|&t| self.round + 1 - t);
        open.chain([self.ghost.max_wait]).max().unwrap_or(0)
    }

    pub fn empty_trace(&self) -> Alg2Trace {
        Alg2Trace {
            n: self.n,
            k: self.k,
            inputs: self.inputs.clone(),
            initial: Self::initial_writes(&self.procs),
            rounds: Vec::new(),
        }
    }

    /// Runs one iteration on the two-round run `run`, which must be a facet
    /// of `R_k` over [`Self::participants`]. Safety claims are checked
    /// before returning.
    pub fn step(&mut self, run: &RunSequence) -> Result<RoundRecord, String> {
        let expected = self.participants();
        if run.len() != 2 || run.participants() != expected || !in_rk(run, self.k) {
            return Err(format!(
                "round {}: {} is not an R_{} facet over {expected}",
                self.round + 1,
                serde_json::to_string(run).unwrap_or_default(),
                self.k
            ));
        }
        self.round += 1;
        let r = self.round;
        let inputs: BTreeMap<ProcessId, RkInput> = expected
            .iter()
            .map(|p| {
                (
                    p,
                    self.procs[p.index()].as_ref().expect("participant").input(),
                )
            })
            .collect();
        let views = RunViews::new(run);
        let mut rec = RoundRecord {
            round: r,
            run: run.clone(),
            validated: Vec::new(),
            returned: Vec::new(),
            issued: Vec::new(),
            agreed: Vec::new(),
            proposed: Vec::new(),
            terminated: Vec::new(),
        };
        let mut completed = false;
        let undecided = self.undecided();
        if let Some(d) = designated(&views, undecided) {
            self.ghost.owed[d.index()].get_or_insert(r);
        }
        for p in expected.iter() {
            let st = self.procs[p.index()].as_mut().expect("participant");
            if st.state == Phase::Decided {
                continue;
            }
            let before = st.write_count.clone();
            st.begin_round();
            let out = RkOutput::from_views(&views, &inputs, p);
            for a in alg2_update_stage(st, &out, self.k) {
                if a.new.0 <= a.old.0 {
                    return Err(format!(
                        "round {r}: process {p} replaced slot {} by an older value",
                        a.slot + 1
                    ));
                }
            }
            let leaders = st.leaders;
            let pending = st.cons_id;
            let v = alg2_validate_stage(st, &self.client)?;
            if v.snapshot.is_some() && leaders && pending.is_some() && v.agreed.is_none() {
                return Err(format!(
                    "round {r}: leader-approved agreement of process {p} did not complete"
                ));
            }
            if let Some(m) = (0..self.n).find(|&m| st.write_count[m] < before[m]) {
                return Err(format!(
                    "round {r}: counter of slot {} decreased at process {p}",
                    m + 1
                ));
            }
            if st.state == Phase::Undecided {
                let sum: u64 = st.write_count.iter().map(|&c| c as u64).sum();
                if sum < r as u64 + 1 {
                    return Err(format!(
                        "round {r}: process {p} has counter sum {sum} after the round"
                    ));
                }
            }
            if let Some(s) = v.snapshot {
                rec.validated.push((p.get(), s));
            }
            if v.returned {
                rec.returned.push(p.get());
            }
            if let Some((c, x)) = v.issued {
                rec.issued.push((p.get(), c, x));
            }
            if let Some((o, x)) = v.agreed {
                rec.agreed.push((p.get(), o, x));
            }
            if let Some((o, x)) = v.proposed {
                rec.proposed.push((p.get(), o, x));
            }
            if let Some(x) = v.terminated {
                rec.terminated.push((p.get(), x));
            }
            if v.returned
                || v.agreed.is_some()
                || v.terminated.is_some()
                || v.proposed.is_some()
                || v.wrote
            {
                completed = true;
                if let Some(t) = self.ghost.owed[p.index()].take() {
                    self.ghost.max_wait = self.ghost.max_wait.max(r + 1 - t);
                }
            }
        }
        self.ghost.idle = if completed { 0 } else { self.ghost.idle + 1 };
        self.ghost.max_idle = self.ghost.max_idle.max(self.ghost.idle);
        self.check_round(&rec)?;
        Ok(rec)
    }

    fn check_round(&mut self, rec: &RoundRecord) -> Result<(), String> {
        let r = rec.round;
        for &(p, c, x) in &rec.issued {
            if self.ghost.values.insert((p - 1, c), x).is_some() {
                return Err(format!("round {r}: process {p} reused write counter {c}"));
            }
        }
        for s in self.procs.iter().flatten() {
            for (m, slot) in s.slots().into_iter().enumerate() {
                if slot.0 == 0 {
                    continue;
                }
                match self.ghost.values.get(&(m, slot.0)) {
                    Some(v) if *v == slot.1 => {}
                    Some(v) => {
                        return Err(format!(
                        "round {r}: process {} holds {:?} for process {} counter {}, written {v:?}",
                        s.id,
                        slot.1,
                        m + 1,
                        slot.0
                    ))
                    }
                    None => {
                        return Err(format!(
                            "round {r}: process {} holds an unwritten counter {} of process {}",
                            s.id,
                            slot.0,
                            m + 1
                        ))
                    }
                }
            }
        }
        let floor: Vec<u32> = (0..self.n)
            .map(|m| {
                self.procs
                    .iter()
                    .flatten()
                    .map(|s| s.write_count[m])
                    .min()
                    .unwrap_or(0)
            })
            .collect();
        self.ghost.values.retain(|(m, c), _| *c >= floor[*m]);

        for &(_, o, x) in &rec.proposed {
            self.ghost.proposals.entry(o).or_default().insert(x);
        }
        for &(p, o, x) in &rec.agreed {
            if !self.ghost.proposals.get(&o).is_some_and(|s| s.contains(&x)) {
                return Err(format!(
                    "round {r}: process {p} decided {x} on object {o}, never proposed"
                ));
            }
            let d = self.ghost.decisions.entry(o).or_default();
            d.insert(x);
            if d.len() > self.k {
                return Err(format!(
                    "round {r}: {} distinct decisions on object {o}: {d:?}",
                    d.len()
                ));
            }
        }
        self.ghost
            .lin
            .feed(rec)
            .map_err(|m| format!("linearization: {m}"))
    }
}

/// The undecided process with the smallest second-round view, lowest id
/// first among equals.
pub fn designated(views: &RunViews, undecided: ProcSet) -> Option<ProcessId> {
    undecided
        .iter()
        .min_by_key(|&p| (views.snapshot(1, p).len(), p))
}
