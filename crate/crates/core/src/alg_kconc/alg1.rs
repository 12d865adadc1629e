//! Simulation of a `k`-process snapshot memory by `n` simulators with
//! `k`-simultaneous consensus and commit-adopt objects.

use crate::procset::ProcessId;
use crate::protocols::{CaFlag, CommitAdoptObject, KSimConsObject};
use crate::runtime::{Action, Event, RuntimeError, Status, System};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::btree_map::Entry;
use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::fmt::Debug;
use std::hash::{Hash, Hasher};

pub trait Data: Clone + Eq + Hash + Serialize + Debug {}
impl<T: Clone + Eq + Hash + Serialize + Debug> Data for T {}

/// A simulated snapshot: the current write of every slot, plus the inputs
/// the simulators published before starting.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SimView<V, I> {
    pub slots: Vec<Option<V>>,
    pub inputs: Vec<Option<I>>,
}

/// What the simulated processes compute.
pub trait SimProgram: Clone + Eq + Hash + Serialize + Debug {
    type Value: Data;
    type Input: Data;
    type Output: Data;

    /// The value slot `slot` writes with counter `counter`, given the
    /// snapshot it obtained after its previous write (`None` before the
    /// first write).
    fn write_val(
        &self,
        slot: usize,
        counter: i64,
        view: Option<&SimView<Self::Value, Self::Input>>,
    ) -> Self::Value;

    /// Whether simulators look for their own output after each round.
    fn has_outputs(&self) -> bool {
        false
    }

    /// Whether `write_val` and `output` treat simulators alike, so runs that
    /// differ by a renaming of simulators can be merged when exploring.
    fn symmetric(&self) -> bool {
        false
    }

    /// The output of simulator `pid`, if the view determines one.
    fn output(
        &self,
        _pid: ProcessId,
        _view: &SimView<Self::Value, Self::Input>,
    ) -> Option<Self::Output> {
        None
    }
}

/// Writes a hash of `(slot, counter, view)`, so distinct snapshots give
/// distinct values and any disagreement shows up as a conflicting write.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct HashProgram;

impl SimProgram for HashProgram {
    type Value = u64;
    type Input = u64;
    type Output = u64;

    fn symmetric(&self) -> bool {
        true
    }

    fn write_val(&self, slot: usize, counter: i64, view: Option<&SimView<u64, u64>>) -> u64 {
        let mut h = DefaultHasher::new();
        (slot, counter, view).hash(&mut h);
        h.finish() % 1_000_000
    }
}

/// A cell of the real memory: `(write counter, value)`, initially `(-1, ⊥)`.
pub type MemCell<V> = (i64, Option<V>);

/// For each slot, the value with the largest counter across simulators.
/// Equal counters with different values break write uniqueness and are
/// reported.
pub fn cur_writes<V: Clone + PartialEq + Debug>(
    mem: &[Vec<MemCell<V>>],
    k: usize,
) -> Result<Vec<Option<V>>, String> {
    let mut out = Vec::with_capacity(k);
    for m in 0..k {
        let mut cur: (i64, Option<V>) = (-1, None);
        for row in mem {
            let (c, v) = &row[m];
            if *c > cur.0 {
                cur = (*c, v.clone());
            } else if *c == cur.0 && *c >= 0 && *v != cur.1 {
                return Err(format!(
                    "slot {} counter {c} has two values {:?} and {v:?}",
                    m + 1,
                    cur.1
                ));
            }
        }
        out.push(cur.1);
    }
    Ok(out)
}

/// Simulated operations in the order their real counterparts happened.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Alg1Op<V> {
    /// A validated update of `MEM[sim][slot]`.
    Update {
        sim: usize,
        slot: usize,
        counter: i64,
        value: V,
    },
    /// A validated snapshot and the simulated view computed from it.
    Snapshot {
        sim: usize,
        slot: usize,
        view: Vec<Option<V>>,
    },
}

/// A sequential simulated operation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum SeqOp<V> {
    Write { slot: usize, counter: i64, value: V },
    Snapshot { slot: usize, view: Vec<Option<V>> },
}

/// Builds the sequential history online: a simulated write takes effect at
/// the first validated update carrying its counter, a simulated snapshot at
/// its validated scan.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Linearizer<V> {
    memory: Vec<(i64, Option<V>)>,
}

impl<V: Clone + PartialEq + Debug> Linearizer<V> {
    pub fn new(k: usize) -> Self {
        Self {
            memory: vec![(-1, None); k],
        }
    }

    /// Returns the sequential operation this real one contributes, if any.
    pub fn apply(&mut self, op: &Alg1Op<V>) -> Result<Option<SeqOp<V>>, String> {
        match op {
            Alg1Op::Update {
                slot,
                counter,
                value,
                ..
            } => {
                let (last, cur) = &self.memory[slot - 1];
                if *counter <= *last {
                    if *counter == *last && cur.as_ref() != Some(value) {
                        return Err(format!(
                            "slot {slot} counter {counter} rewritten with {value:?}"
                        ));
                    }
                    return Ok(None);
                }
                if *counter != last + 1 {
                    return Err(format!(
                        "slot {slot} write {counter} linearized right after write {last}"
                    ));
                }
                self.memory[slot - 1] = (*counter, Some(value.clone()));
                Ok(Some(SeqOp::Write {
                    slot: *slot,
                    counter: *counter,
                    value: value.clone(),
                }))
            }
            Alg1Op::Snapshot { slot, view, .. } => {
                let expected: Vec<Option<V>> = self.memory.iter().map(|(_, v)| v.clone()).collect();
                if *view != expected {
                    return Err(format!(
                        "snapshot {view:?} for slot {slot} differs from the sequential memory {expected:?}"
                    ));
                }
                Ok(Some(SeqOp::Snapshot {
                    slot: *slot,
                    view: view.clone(),
                }))
            }
        }
    }
}

/// Offline form of the linearization check over a recorded operation list.
/// Returns the sequential history or the first illegal operation.
pub fn linearize_alg1<V: Clone + PartialEq + Debug>(
    k: usize,
    ops: &[Alg1Op<V>],
) -> Result<Vec<SeqOp<V>>, (usize, String)> {
    let mut lin = Linearizer::new(k);
    let mut out = Vec::new();
    for (i, op) in ops.iter().enumerate() {
        if let Some(s) = lin.apply(op).map_err(|e| (i, e))? {
            out.push(s);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
enum Pc {
    Input,
    Ksc,
    FirstCa,
    OtherCa(usize),
    Update(usize),
    Scan(usize),
    OutputScan,
    Done,
}

type Proposal<V, I> = (i64, Option<SimView<V, I>>);
type ProgramProposal<P> = Proposal<<P as SimProgram>::Value, <P as SimProgram>::Input>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
struct Simulator<P: SimProgram> {
    pc: Pc,
    r: usize,
    wc: Vec<i64>,
    view: Vec<Option<SimView<P::Value, P::Input>>>,
    flags: Vec<Option<CaFlag>>,
    index: usize,
    value: Option<Proposal<P::Value, P::Input>>,
    output: Option<P::Output>,
}

/// Claims checked online and facts recorded for reports.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
struct Ghost<V> {
    /// Validated writes at or above the floor of their slot.
    #[serde(with = "crate::serde_pairs")]
    validated: BTreeMap<(usize, i64), V>,
    /// Per slot, every counter below this was validated and is no longer
    /// reachable by any simulator, so its entry was dropped.
    floor: Vec<i64>,
    lin: Linearizer<V>,
    /// Rounds still in progress: whether the first return from a first
    /// commit-adopt committed, and on which slot.
    first_ca: BTreeMap<usize, (bool, usize)>,
    /// Rounds whose first commit-adopt return committed.
    committed_rounds: usize,
    violation: Option<String>,
}

/// What a commit flag licenses when the committed value carries a write
/// counter below the simulator's own and so is not taken.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommitRule {
    /// Write only what was committed: a stale commit counts as an adopt.
    #[default]
    AdoptedOnly,
    /// Write the simulator's own `(WC, View)` on any commit flag. Two
    /// simulators holding the same counter with different views can then
    /// both write it after committing an older value.
    Literal,
}

/// The simulators of one run, their shared objects, and the ghost state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Alg1System<P: SimProgram> {
    k: usize,
    commit_rule: CommitRule,
    max_rounds: usize,
    program: P,
    inputs: Vec<Option<P::Input>>,
    participants: Vec<bool>,
    sims: Vec<Simulator<P>>,
    // Objects of rounds some simulator may still access, keyed by round.
    ksc: BTreeMap<usize, KSimConsObject<ProgramProposal<P>>>,
    ca: BTreeMap<usize, Vec<CommitAdoptObject<ProgramProposal<P>>>>,
    mem: Vec<Vec<MemCell<P::Value>>>,
    published: Vec<Option<P::Input>>,
    ghost: Ghost<P::Value>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Alg1Output<O> {
    pub wc: Vec<i64>,
    pub output: Option<O>,
}

impl<P: SimProgram> Alg1System<P> {
    /// `participants[i]` says whether simulator `i+1` takes steps; `inputs`
    /// are published before the first round when present.
    pub fn new(
        program: P,
        k: usize,
        max_rounds: usize,
        participants: Vec<bool>,
        inputs: Vec<Option<P::Input>>,
    ) -> Self {
        let n = participants.len();
        assert_eq!(inputs.len(), n);
        let sims = inputs
            .iter()
            .map(|inp| Simulator {
                pc: if inp.is_some() { Pc::Input } else { Pc::Ksc },
                r: 0,
                wc: vec![0; k],
                view: vec![None; k],
                flags: vec![None; k],
                index: 0,
                value: None,
                output: None,
            })
            .collect();
        Self {
            k,
            max_rounds,
            program,
            participants,
            sims,
            ksc: BTreeMap::new(),
            ca: BTreeMap::new(),
            mem: vec![vec![(-1, None); k]; n],
            published: vec![None; n],
            inputs,
            commit_rule: CommitRule::AdoptedOnly,
            ghost: Ghost {
                validated: BTreeMap::new(),
                floor: vec![0; k],
                lin: Linearizer::new(k),
                first_ca: BTreeMap::new(),
                committed_rounds: 0,
                violation: None,
            },
        }
    }

    /// Every simulator takes part; no inputs.
    pub fn standalone(program: P, n: usize, k: usize, max_rounds: usize) -> Self {
        Self::new(program, k, max_rounds, vec![true; n], vec![None; n])
    }

    pub fn with_commit_rule(mut self, rule: CommitRule) -> Self {
        self.commit_rule = rule;
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn participating(&self) -> usize {
        self.participants.iter().filter(|p| **p).count()
    }

    pub fn write_counters(&self, pid: ProcessId) -> &[i64] {
        &self.sims[pid.index()].wc
    }

    /// Rounds in which the first return from a first commit-adopt
    /// committed.
    pub fn committed_rounds(&self) -> usize {
        self.ghost.committed_rounds
    }

    /// Rounds started by at least one simulator.
    pub fn rounds_started(&self) -> usize {
        self.sims.iter().map(|s| s.r).max().unwrap_or(0)
    }

    /// Number of distinct validated counters per slot.
    pub fn validated_writes(&self) -> Vec<usize> {
        (1..=self.k)
            .map(|m| {
                let above = self.ghost.validated.keys().filter(|(s, _)| *s == m).count();
                self.ghost.floor[m - 1] as usize + above
            })
            .collect()
    }

    /// The latest simulated memory contents, as seen by a scan of `MEM`.
    pub fn current_view(&self) -> Result<SimView<P::Value, P::Input>, String> {
        Ok(SimView {
            slots: cur_writes(&self.mem, self.k)?,
            inputs: self.published.clone(),
        })
    }

    fn ensure_round(&mut self, r: usize) {
        let k = self.k;
        self.ksc.entry(r).or_insert_with(|| KSimConsObject::new(k));
        self.ca
            .entry(r)
            .or_insert_with(|| vec![CommitAdoptObject::new(); k]);
    }

    // Drops round objects no simulator can reach again and validated
    // counters below every live write counter. Keeps the state space finite
    // in the round count rather than growing with history.
    fn collect(&mut self) {
        let live: Vec<&Simulator<P>> = self
            .sims
            .iter()
            .zip(&self.participants)
            .filter(|(s, p)| **p && s.pc != Pc::Done)
            .map(|(s, _)| s)
            .collect();
        let settled = live
            .iter()
            .map(|s| match s.pc {
                Pc::FirstCa | Pc::OtherCa(_) => s.r - 1,
                _ => s.r,
            })
            .min()
            .unwrap_or(usize::MAX);
        self.ksc.retain(|r, _| *r > settled);
        self.ca.retain(|r, _| *r > settled);
        self.ghost.first_ca.retain(|r, _| *r > settled);
        for m in 0..self.k {
            let Some(low) = live.iter().map(|s| s.wc[m]).min() else {
                continue;
            };
            while self.ghost.floor[m] < low {
                let c = self.ghost.floor[m];
                if self.ghost.validated.remove(&(m + 1, c)).is_none() {
                    break;
                }
                self.ghost.floor[m] = c + 1;
            }
        }
    }

    fn violate(&mut self, msg: String) {
        if self.ghost.violation.is_none() {
            self.ghost.violation = Some(msg);
        }
    }

    // Adoption guard shared by both commit-adopt steps.
    fn adopt(&mut self, i: usize, m: usize, flag: CaFlag, val: Proposal<P::Value, P::Input>) {
        let s = &mut self.sims[i];
        let taken = val.0 >= s.wc[m];
        s.flags[m] = match (self.commit_rule, flag, taken) {
            (CommitRule::AdoptedOnly, CaFlag::Commit, false) => Some(CaFlag::Adopt),
            _ => Some(flag),
        };
        if taken {
            s.wc[m] = val.0;
            s.view[m] = val.1;
        }
    }

    fn next_other(&self, i: usize, from: usize) -> Option<usize> {
        let idx = self.sims[i].index - 1;
        (from..self.k).find(|&m| m != idx)
    }

    fn next_commit(&self, i: usize, from: usize) -> Option<usize> {
        (from..self.k).find(|&m| self.sims[i].flags[m] == Some(CaFlag::Commit))
    }

    fn end_round(&mut self, i: usize) {
        let s = &mut self.sims[i];
        s.flags = vec![None; self.k];
        s.index = 0;
        s.value = None;
        s.pc = if self.program.has_outputs() {
            Pc::OutputScan
        } else if s.r >= self.max_rounds {
            Pc::Done
        } else {
            Pc::Ksc
        };
    }

    fn after_ca(&mut self, i: usize, from: usize) {
        self.sims[i].pc = match self.next_other(i, from) {
            Some(m) => Pc::OtherCa(m),
            None => match self.next_commit(i, 0) {
                Some(m) => Pc::Update(m),
                None => {
                    self.end_round(i);
                    return;
                }
            },
        };
    }

    fn step(&mut self, pid: ProcessId, action: &Action) -> Result<serde_json::Value, RuntimeError> {
        let i = pid.index();
        let pc = self.sims[i].pc;
        match (pc, action) {
            (Pc::Input, Action::Step) => {
                self.published[i] = self.inputs[i].clone();
                self.sims[i].pc = Pc::Ksc;
                Ok(json!({"op": "publish_input"}))
            }
            (Pc::Ksc, Action::Choose(c)) => {
                let r = self.sims[i].r + 1;
                self.sims[i].r = r;
                self.ensure_round(r);
                let s = &self.sims[i];
                let vector: Vec<Proposal<P::Value, P::Input>> =
                    (0..self.k).map(|m| (s.wc[m], s.view[m].clone())).collect();
                let (index, value) =
                    self.ksc
                        .get_mut(&r)
                        .expect("created")
                        .propose(pid, vector, *c as usize)?;
                let s = &mut self.sims[i];
                s.index = index;
                s.value = Some(value);
                s.pc = Pc::FirstCa;
                Ok(json!({"op": "ksc", "round": r, "index": index}))
            }
            (Pc::FirstCa, Action::Step) => {
                let r = self.sims[i].r;
                let m = self.sims[i].index - 1;
                let value = self.sims[i].value.take().expect("set by ksc");
                let (flag, val) = self.ca.get_mut(&r).expect("created")[m].propose(pid, value)?;
                if let Entry::Vacant(e) = self.ghost.first_ca.entry(r) {
                    e.insert((flag == CaFlag::Commit, m + 1));
                    if flag == CaFlag::Commit {
                        self.ghost.committed_rounds += 1;
                    } else {
                        self.violate(format!(
                            "round {r}: first return from a first commit-adopt did not commit"
                        ));
                    }
                }
                self.adopt(i, m, flag, val);
                self.after_ca(i, 0);
                Ok(json!({"op": "ca", "round": r, "slot": m + 1, "flag": flag}))
            }
            (Pc::OtherCa(m), Action::Step) => {
                let r = self.sims[i].r;
                let s = &self.sims[i];
                let proposal = (s.wc[m], s.view[m].clone());
                let (flag, val) =
                    self.ca.get_mut(&r).expect("created")[m].propose(pid, proposal)?;
                self.adopt(i, m, flag, val);
                self.after_ca(i, m + 1);
                Ok(json!({"op": "ca", "round": r, "slot": m + 1, "flag": flag}))
            }
            (Pc::Update(m), Action::Step) => {
                let s = &self.sims[i];
                let counter = s.wc[m];
                let value = self.program.write_val(m + 1, counter, s.view[m].as_ref());
                self.mem[i][m] = (counter, Some(value.clone()));
                if counter < self.ghost.floor[m] {
                    self.violate(format!(
                        "slot {} counter {counter} written after every simulator passed it",
                        m + 1
                    ));
                }
                match self.ghost.validated.get(&(m + 1, counter)) {
                    Some(v) if *v != value => {
                        let msg = format!(
                            "slot {} counter {counter}: validated writes {v:?} and {value:?}",
                            m + 1
                        );
                        self.violate(msg);
                    }
                    Some(_) => {}
                    None => {
                        self.ghost.validated.insert((m + 1, counter), value.clone());
                    }
                }
                let op = Alg1Op::Update {
                    sim: pid.get(),
                    slot: m + 1,
                    counter,
                    value,
                };
                if let Err(e) = self.ghost.lin.apply(&op) {
                    self.violate(format!("linearization: {e}"));
                }
                self.sims[i].wc[m] += 1;
                self.sims[i].pc = Pc::Scan(m);
                Ok(serde_json::to_value(&op).expect("ops serialize"))
            }
            (Pc::Scan(m), Action::Step) => {
                let view = match self.current_view() {
                    Ok(v) => v,
                    Err(e) => {
                        self.violate(e);
                        return Ok(json!({"op": "snapshot", "error": true}));
                    }
                };
                let op = Alg1Op::Snapshot {
                    sim: pid.get(),
                    slot: m + 1,
                    view: view.slots.clone(),
                };
                if let Err(e) = self.ghost.lin.apply(&op) {
                    self.violate(format!("linearization: {e}"));
                }
                self.sims[i].view[m] = Some(view);
                match self.next_commit(i, m + 1) {
                    Some(next) => self.sims[i].pc = Pc::Update(next),
                    None => self.end_round(i),
                }
                Ok(serde_json::to_value(&op).expect("ops serialize"))
            }
            (Pc::OutputScan, Action::Step) => {
                let view = self.current_view().map_err(RuntimeError::Invariant)?;
                let out = self.program.output(pid, &view);
                let s = &mut self.sims[i];
                s.pc = if out.is_some() || s.r >= self.max_rounds {
                    Pc::Done
                } else {
                    Pc::Ksc
                };
                s.output = out;
                Ok(json!({"op": "output_scan", "decided": s.output.is_some()}))
            }
            _ => Err(RuntimeError::NotEnabled {
                pid,
                action: action.clone(),
            }),
        }
    }
}

impl<P: SimProgram> System for Alg1System<P> {
    type Output = Alg1Output<P::Output>;

    fn n(&self) -> usize {
        self.sims.len()
    }

    fn status(&self, pid: ProcessId) -> Status {
        let i = pid.index();
        let s = &self.sims[i];
        match s.pc {
            Pc::Done => Status::Done,
            Pc::Input => Status::Idle,
            Pc::Ksc if s.r == 0 && self.inputs[i].is_none() => Status::Idle,
            _ => Status::Running,
        }
    }

    fn enabled(&self, pid: ProcessId) -> Vec<Action> {
        let i = pid.index();
        if !self.participants[i] {
            return Vec::new();
        }
        let s = &self.sims[i];
        match s.pc {
            Pc::Done => Vec::new(),
            Pc::Ksc => {
                let vector: Vec<Proposal<P::Value, P::Input>> =
                    (0..self.k).map(|m| (s.wc[m], s.view[m].clone())).collect();
                let choices = match self.ksc.get(&(s.r + 1)) {
                    Some(o) => o.choices(&vector),
                    None => 1,
                };
                (0..choices as u32).map(Action::Choose).collect()
            }
            _ => vec![Action::Step],
        }
    }

    fn apply(
        &mut self,
        pid: ProcessId,
        action: &Action,
    ) -> Result<serde_json::Value, RuntimeError> {
        let before = self.sims[pid.index()].wc.clone();
        let effect = self.step(pid, action)?;
        self.collect();
        let after = &self.sims[pid.index()].wc;
        if let Some(m) = (0..self.k).find(|&m| after[m] < before[m]) {
            let msg = format!(
                "{pid} slot {} write counter decreased {} -> {}",
                m + 1,
                before[m],
                after[m]
            );
            self.violate(msg);
        }
        Ok(effect)
    }

    fn output(&self, pid: ProcessId) -> Option<Alg1Output<P::Output>> {
        let s = &self.sims[pid.index()];
        (s.pc == Pc::Done).then(|| Alg1Output {
            wc: s.wc.clone(),
            output: s.output.clone(),
        })
    }

    // Sorts simulators by their local state and memory row. Views carry the
    // published inputs by position, so this only applies without inputs.
    fn canonical(&self) -> Option<Self> {
        if !self.program.symmetric() || self.inputs.iter().any(Option::is_some) {
            return None;
        }
        let key = |i: usize| {
            let mut h = DefaultHasher::new();
            (&self.participants[i], &self.sims[i], &self.mem[i]).hash(&mut h);
            h.finish()
        };
        let n = self.sims.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (key(i), i));
        let mut rank = vec![0; n];
        for (j, &i) in order.iter().enumerate() {
            rank[i] = j;
        }
        let rename = |p: ProcessId| ProcessId::of(rank[p.index()] + 1);
        let mut c = self.clone();
        c.participants = order.iter().map(|&i| self.participants[i]).collect();
        c.sims = order.iter().map(|&i| self.sims[i].clone()).collect();
        c.mem = order.iter().map(|&i| self.mem[i].clone()).collect();
        c.published = order.iter().map(|&i| self.published[i].clone()).collect();
        c.ksc.values_mut().for_each(|o| o.relabel(rename));
        c.ca.values_mut().flatten().for_each(|o| o.relabel(rename));
        Some(c)
    }

    fn check(&self) -> Result<(), String> {
        if let Some(v) = &self.ghost.violation {
            return Err(v.clone());
        }
        // Every counter below a simulator's current one was validated.
        for (i, s) in self.sims.iter().enumerate() {
            for m in 0..self.k {
                let floor = self.ghost.floor[m];
                if let Some(c) =
                    (floor..s.wc[m]).find(|c| !self.ghost.validated.contains_key(&(m + 1, *c)))
                {
                    return Err(format!(
                        "p{} holds counter {} for slot {} but counter {c} was never validated",
                        i + 1,
                        s.wc[m],
                        m + 1
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Replays `path` and returns the largest number of simulation rounds
/// started, counted over all simulators, between consecutive newly
/// validated writes, including the stretch after the last one.
pub fn alg1_progress_gap<P: SimProgram>(
    init: &Alg1System<P>,
    path: &[Event],
) -> Result<usize, RuntimeError> {
    let mut s = init.clone();
    let (mut rounds, mut last, mut total, mut gap) = (0usize, 0usize, 0usize, 0usize);
    for e in path {
        if matches!(e.action, Action::Choose(_)) {
            rounds += 1;
        }
        s.apply(e.pid, &e.action)?;
        let t: usize = s.validated_writes().iter().sum();
        if t > total {
            total = t;
            gap = gap.max(rounds - last);
            last = rounds;
        }
    }
    Ok(gap.max(rounds - last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{explore_states, fair_run, Bound};

    #[test]
    fn cur_writes_basic() {
        let init: Vec<Vec<MemCell<u32>>> = vec![vec![(-1, None); 2]; 2];
        assert_eq!(cur_writes(&init, 2).unwrap(), vec![None, None]);
        let mut m = init.clone();
        m[1][0] = (0, Some(5));
        assert_eq!(cur_writes(&m, 2).unwrap(), vec![Some(5), None]);
        m[0][0] = (2, Some(7));
        m[1][0] = (1, Some(8));
        assert_eq!(cur_writes(&m, 2).unwrap(), vec![Some(7), None]);
        m[1][0] = (2, Some(9));
        assert!(cur_writes(&m, 2).is_err());
    }

    #[test]
    fn solo_simulator_commits_its_index() {
        let sys = Alg1System::standalone(HashProgram, 1, 2, 1);
        let (end, _) = fair_run(&sys, Bound::wait_free(50)).unwrap();
        assert_eq!(end.write_counters(ProcessId::of(1)), &[1, 1]);
        assert!(end.is_finished());
    }

    #[test]
    fn two_simulators_exhaustive_one_round() {
        let sys = Alg1System::standalone(HashProgram, 2, 2, 1);
        let stats = explore_states(&sys, Bound::wait_free(40), |_, s| {
            (s.committed_rounds() == s.rounds_started())
                .then_some(())
                .ok_or_else(|| "a round without a commit".into())
        })
        .unwrap();
        assert_eq!(stats.truncated, 0);
    }

    #[test]
    fn swapped_counters_are_caught() {
        let ops = vec![
            Alg1Op::Update {
                sim: 1,
                slot: 1,
                counter: 0,
                value: 10u64,
            },
            Alg1Op::Snapshot {
                sim: 1,
                slot: 1,
                view: vec![Some(10), None],
            },
            Alg1Op::Update {
                sim: 1,
                slot: 1,
                counter: 1,
                value: 11,
            },
        ];
        assert_eq!(linearize_alg1(2, &ops).unwrap().len(), 3);
        let mut bad = ops.clone();
        if let Alg1Op::Update { counter, .. } = &mut bad[0] {
            *counter = 1;
        }
        if let Alg1Op::Update { counter, .. } = &mut bad[2] {
            *counter = 0;
        }
        assert!(linearize_alg1(2, &bad).is_err());
    }
}
