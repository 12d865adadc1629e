//! Depth-first extended BG simulation. `k` BG simulators share a snapshot
//! memory of `k` slots; each write publishes the simulator's whole cell, and
//! each simulated step of a client is agreed on through an extended
//! agreement instance.
//!
//! Extended agreement is a loop of commit-adopt rounds kept in the cells.
//! A round writes `A`, scans, writes `B` flagged clean when every `A` of
//! the round matched, and scans again: all-clean commits, otherwise the next
//! round proposes a clean value if one was seen. Aborting an instance bumps
//! its generation. A commit whose `B` scan already shows a newer generation
//! is void, and the first proposal of a generation carries the clean value
//! of the latest round that has one, so a value decided before the abort is
//! the only one that can be decided after it.

use super::alg1::{Data, SimView};
use crate::procset::ProcessId;
use crate::runtime::{Action, RuntimeError, Status, System};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::BTreeMap;
use std::fmt::Debug;
use std::hash::Hash;

/// (generation, commit-adopt round) of an extended agreement instance.
type Stamp = (u32, usize);

/// Result of a client snapshot.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClientStep<S, O> {
    Continue(S),
    Decide(O),
}

/// A task protocol written as alternating writes and snapshots over a
/// single-writer memory with one cell per client.
pub trait ClientProtocol: Clone + Eq + Hash + Serialize + Debug {
    type Input: Data;
    type Val: Data;
    type State: Data;
    type Output: Data;

    fn init(&self, pid: ProcessId, input: &Self::Input) -> Self::State;

    /// The value written at the start of the next step.
    fn write(&self, pid: ProcessId, state: &Self::State) -> Self::Val;

    /// Consumes the snapshot that ends the step.
    fn on_snapshot(
        &self,
        pid: ProcessId,
        state: &Self::State,
        snap: &[Option<Self::Val>],
    ) -> ClientStep<Self::State, Self::Output>;
}

/// Writes the input, then decides any decision it sees or else its own
/// input, publishes that choice and decides it. Consensus when runs are
/// sequential; at most `k` values under `k`-concurrency, since a process
/// keeps its own input only if every earlier chooser is still running.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AdoptFirstDecision;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AfdState {
    Fresh(u64),
    Chose(u64, u64),
}

impl ClientProtocol for AdoptFirstDecision {
    type Input = u64;
    type Val = (u64, Option<u64>);
    type State = AfdState;
    type Output = u64;

    fn init(&self, _pid: ProcessId, input: &u64) -> AfdState {
        AfdState::Fresh(*input)
    }

    fn write(&self, _pid: ProcessId, state: &AfdState) -> (u64, Option<u64>) {
        match *state {
            AfdState::Fresh(x) => (x, None),
            AfdState::Chose(x, d) => (x, Some(d)),
        }
    }

    fn on_snapshot(
        &self,
        _pid: ProcessId,
        state: &AfdState,
        snap: &[Option<(u64, Option<u64>)>],
    ) -> ClientStep<AfdState, u64> {
        match *state {
            AfdState::Fresh(x) => {
                let seen = snap.iter().flatten().find_map(|(_, d)| *d);
                ClientStep::Continue(AfdState::Chose(x, seen.unwrap_or(x)))
            }
            AfdState::Chose(_, d) => ClientStep::Decide(d),
        }
    }
}

/// Writes its input and decides it after one snapshot.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EchoClient;

impl ClientProtocol for EchoClient {
    type Input = u64;
    type Val = u64;
    type State = u64;
    type Output = u64;

    fn init(&self, _pid: ProcessId, input: &u64) -> u64 {
        *input
    }

    fn write(&self, _pid: ProcessId, state: &u64) -> u64 {
        *state
    }

    fn on_snapshot(
        &self,
        _pid: ProcessId,
        state: &u64,
        _snap: &[Option<u64>],
    ) -> ClientStep<u64, u64> {
        ClientStep::Decide(*state)
    }
}

/// A client memory snapshot, indexed by client.
pub type Snap<W> = Vec<Option<W>>;

/// An agreement instance: (client index, step).
pub type Instance = (usize, u32);

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CaRound<W> {
    pub a: Snap<W>,
    pub b: Option<(Snap<W>, bool)>,
}

/// One simulator's rounds in one instance, per generation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EaLocal<W> {
    pub gen: u32,
    pub rounds: BTreeMap<u32, Vec<CaRound<W>>>,
}

impl<W> Default for EaLocal<W> {
    fn default() -> Self {
        Self {
            gen: 0,
            rounds: BTreeMap::new(),
        }
    }
}

/// Everything a BG simulator publishes with one write.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BgCell<W> {
    /// Latest client write known to this simulator: client -> (step, value).
    pub writes: BTreeMap<usize, (u32, W)>,
    #[serde(with = "crate::serde_pairs")]
    pub decided: BTreeMap<Instance, Snap<W>>,
    #[serde(with = "crate::serde_pairs")]
    pub ea: BTreeMap<Instance, EaLocal<W>>,
    #[serde(with = "crate::serde_pairs")]
    pub aborts: BTreeMap<Instance, u32>,
    pub current: Option<Instance>,
}

impl<W> Default for BgCell<W> {
    fn default() -> Self {
        Self {
            writes: BTreeMap::new(),
            decided: BTreeMap::new(),
            ea: BTreeMap::new(),
            aborts: BTreeMap::new(),
            current: None,
        }
    }
}

impl<W: Data> BgCell<W> {
    /// The instance this simulator is in the middle of a round of, judged
    /// against the generation `gen` currently in force for it.
    pub fn holding(&self, gen: impl Fn(Instance) -> u32) -> Option<Instance> {
        let x = self.current?;
        let local = self.ea.get(&x)?;
        if local.gen != gen(x) {
            return None;
        }
        let last = local.rounds.get(&local.gen)?.last()?;
        last.b.is_none().then_some(x)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ClientProgress<S, O> {
    /// No published input.
    Absent,
    Running {
        state: S,
        steps: u32,
    },
    Done {
        output: O,
        steps: u32,
    },
}

impl<S, O> ClientProgress<S, O> {
    pub fn steps(&self) -> u32 {
        match self {
            Self::Absent => 0,
            Self::Running { steps, .. } | Self::Done { steps, .. } => *steps,
        }
    }
}

/// What a simulator can infer from one snapshot of the BG memory.
pub struct BgKnowledge<'a, C: ClientProtocol> {
    pub cells: Vec<Option<&'a BgCell<C::Val>>>,
    pub decided: BTreeMap<Instance, Snap<C::Val>>,
    /// Client memory: the latest published write of each client.
    pub memory: Vec<Option<(u32, C::Val)>>,
    pub clients: Vec<ClientProgress<C::State, C::Output>>,
    /// Instances decided with two different snapshots.
    pub conflicts: Vec<Instance>,
}

impl<'a, C: ClientProtocol> BgKnowledge<'a, C> {
    pub fn new(client: &C, view: &'a SimView<BgCell<C::Val>, C::Input>) -> Self {
        let cells: Vec<Option<&BgCell<C::Val>>> = view.slots.iter().map(Option::as_ref).collect();
        let n = view.inputs.len();
        let mut decided: BTreeMap<Instance, Snap<C::Val>> = BTreeMap::new();
        let mut conflicts = Vec::new();
        let mut memory: Vec<Option<(u32, C::Val)>> = vec![None; n];
        for c in cells.iter().flatten() {
            for (x, v) in &c.decided {
                match decided.get(x) {
                    Some(w) if w != v => conflicts.push(*x),
                    Some(_) => {}
                    None => {
                        decided.insert(*x, v.clone());
                    }
                }
            }
            for (j, (s, w)) in &c.writes {
                if memory[*j].as_ref().is_none_or(|(t, _)| t < s) {
                    memory[*j] = Some((*s, w.clone()));
                }
            }
        }
        let clients = (0..n)
            .map(|j| {
                let Some(input) = &view.inputs[j] else {
                    return ClientProgress::Absent;
                };
                let pid = ProcessId::of(j + 1);
                let mut state = client.init(pid, input);
                let mut steps = 0;
                while let Some(snap) = decided.get(&(j, steps)) {
                    steps += 1;
                    match client.on_snapshot(pid, &state, snap) {
                        ClientStep::Continue(s) => state = s,
                        ClientStep::Decide(output) => {
                            return ClientProgress::Done { output, steps }
                        }
                    }
                }
                ClientProgress::Running { state, steps }
            })
            .collect();
        Self {
            cells,
            decided,
            memory,
            clients,
            conflicts,
        }
    }

    pub fn gen(&self, x: Instance) -> u32 {
        self.cells
            .iter()
            .flatten()
            .filter_map(|c| c.aborts.get(&x).copied())
            .max()
            .unwrap_or(0)
    }

    /// Simulators (0-based) in the middle of a round of `x`.
    pub fn holders(&self, x: Instance) -> Vec<usize> {
        let g = self.gen(x);
        (0..self.cells.len())
            .filter(|&t| self.cells[t].and_then(|c| c.holding(|_| g)) == Some(x))
            .collect()
    }

    fn round(&self, x: Instance, gen: u32, rho: usize) -> impl Iterator<Item = &CaRound<C::Val>> {
        self.cells
            .iter()
            .flatten()
            .filter_map(move |c| c.ea.get(&x)?.rounds.get(&gen)?.get(rho))
    }

    /// The clean value of the latest (generation, round) that has one.
    pub fn carry(&self, x: Instance) -> Option<Snap<C::Val>> {
        let mut best: Option<(Stamp, &Snap<C::Val>)> = None;
        for c in self.cells.iter().flatten() {
            let Some(local) = c.ea.get(&x) else { continue };
            for (g, rounds) in &local.rounds {
                for (rho, r) in rounds.iter().enumerate() {
                    if let Some((v, true)) = &r.b {
                        if best.is_none_or(|(k, _)| k < (*g, rho)) {
                            best = Some(((*g, rho), v));
                        }
                    }
                }
            }
        }
        best.map(|(_, v)| v.clone())
    }

    pub fn snapshot(&self) -> Snap<C::Val> {
        self.memory
            .iter()
            .map(|m| m.as_ref().map(|(_, w)| w.clone()))
            .collect()
    }

    /// Clients with a published input and no output.
    pub fn active(&self) -> Vec<usize> {
        (0..self.clients.len())
            .filter(|&j| matches!(self.clients[j], ClientProgress::Running { .. }))
            .collect()
    }

    /// Active clients whose first write is out: the simulated concurrency.
    pub fn started(&self) -> Vec<usize> {
        self.active()
            .into_iter()
            .filter(|&j| self.memory[j].is_some())
            .collect()
    }

    pub fn outputs(&self) -> BTreeMap<usize, C::Output> {
        self.clients
            .iter()
            .enumerate()
            .filter_map(|(j, c)| match c {
                ClientProgress::Done { output, .. } => Some((j, output.clone())),
                _ => None,
            })
            .collect()
    }
}

/// One write of BG simulator `id` (1-based), computed from its previous
/// cell and the snapshot taken after it.
#[allow(clippy::map_entry)]
pub fn bg_step<C: ClientProtocol>(
    client: &C,
    id: usize,
    view: Option<&SimView<BgCell<C::Val>, C::Input>>,
) -> BgCell<C::Val> {
    let Some(view) = view else {
        return BgCell::default();
    };
    let mut cell = view.slots[id - 1].clone().unwrap_or_default();
    let g = BgKnowledge::new(client, view);
    for (x, v) in &g.decided {
        cell.decided.entry(*x).or_insert_with(|| v.clone());
    }
    for (j, m) in g.memory.iter().enumerate() {
        if let Some((s, w)) = m {
            if cell.writes.get(&j).is_none_or(|(t, _)| t < s) {
                cell.writes.insert(j, (*s, w.clone()));
            }
        }
    }
    for c in g.cells.iter().flatten() {
        for (x, a) in &c.aborts {
            let e = cell.aborts.entry(*x).or_insert(0);
            *e = (*e).max(*a);
        }
    }

    // Settle the current instance: decided elsewhere, voided by an abort,
    // or committed by the round whose B scan this is.
    if let Some(x) = cell.current {
        let gen = g.gen(x);
        let local = cell.ea.entry(x).or_default();
        let lgen = local.gen;
        let rounds = local.rounds.get(&lgen).cloned().unwrap_or_default();
        if cell.decided.contains_key(&x) {
            cell.current = None;
        } else if lgen == gen && !rounds.is_empty() {
            let rho = rounds.len() - 1;
            match &rounds[rho] {
                CaRound { a, b: None } => {
                    let clean = g.round(x, gen, rho).all(|r| r.a == *a);
                    let entry = cell
                        .ea
                        .get_mut(&x)
                        .and_then(|l| l.rounds.get_mut(&gen))
                        .expect("present");
                    entry[rho].b = Some((a.clone(), clean));
                    return cell;
                }
                CaRound {
                    b: Some((v, _)), ..
                } => {
                    if g.round(x, gen, rho).all(|r| matches!(r.b, Some((_, true)))) {
                        cell.decided.insert(x, v.clone());
                        cell.current = None;
                    }
                }
            }
        }
    }

    let active = g.active();
    if active.len() < id {
        return cell;
    }
    let mut order = active.clone();
    order.sort_by_key(|&j| {
        (
            std::cmp::Reverse((g.clients[j].steps(), g.memory[j].is_some())),
            j,
        )
    });
    let instance = |j: usize| (j, g.clients[j].steps());
    let blocked = |j: usize| g.holders(instance(j)).iter().any(|&t| t != id - 1);
    let Some(j) = order.iter().copied().find(|&j| !blocked(j)) else {
        // Blocked everywhere: abort what simulators that should have
        // stopped are holding.
        for &j in &order {
            let x = instance(j);
            if g.holders(x).iter().any(|&t| t + 1 > active.len()) {
                let e = cell.aborts.entry(x).or_insert(0);
                *e = (*e).max(g.gen(x) + 1);
            }
        }
        return cell;
    };
    let x = instance(j);
    let ClientProgress::Running { state, steps } = &g.clients[j] else {
        unreachable!("active clients are running")
    };
    if g.memory[j].as_ref().is_none_or(|(s, _)| s < steps) {
        let w = client.write(ProcessId::of(j + 1), state);
        cell.writes.insert(j, (*steps, w));
        cell.current = Some(x);
        return cell;
    }
    let gen = g.gen(x);
    let local = cell.ea.entry(x).or_default();
    local.gen = local.gen.max(gen);
    let rounds = local.rounds.entry(gen).or_default();
    let v = match rounds.last() {
        None if gen == 0 => g.snapshot(),
        None => g.carry(x).unwrap_or_else(|| g.snapshot()),
        Some(CaRound { a, b }) => {
            let rho = rounds.len() - 1;
            match b {
                // Only reachable when the round was abandoned mid-way,
                // which `current` rules out; propose again.
                None => a.clone(),
                Some((own, _)) => g
                    .round(x, gen, rho)
                    .find_map(|r| match &r.b {
                        Some((u, true)) => Some(u.clone()),
                        _ => None,
                    })
                    .unwrap_or_else(|| own.clone()),
            }
        }
    };
    rounds.push(CaRound { a: v, b: None });
    cell.current = Some(x);
    cell
}

type BgView<C> = SimView<BgCell<<C as ClientProtocol>::Val>, <C as ClientProtocol>::Input>;

/// BG simulators running directly on an atomic snapshot memory, each
/// simulated operation one event: an update, then a scan. All client inputs
/// are published from the start.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct BgDirect<C: ClientProtocol> {
    client: C,
    max_writes: u32,
    inputs: Vec<Option<C::Input>>,
    mem: Vec<Option<BgCell<C::Val>>>,
    views: Vec<Option<BgView<C>>>,
    writes: Vec<u32>,
    scanned: Vec<bool>,
    max_started: usize,
    violation: Option<String>,
}

impl<C: ClientProtocol> BgDirect<C> {
    pub fn new(client: C, k: usize, inputs: Vec<Option<C::Input>>, max_writes: u32) -> Self {
        Self {
            client,
            max_writes,
            inputs,
            mem: vec![None; k],
            views: vec![None; k],
            writes: vec![0; k],
            scanned: vec![true; k],
            max_started: 0,
            violation: None,
        }
    }

    pub fn view(&self) -> SimView<BgCell<C::Val>, C::Input> {
        SimView {
            slots: self.mem.clone(),
            inputs: self.inputs.clone(),
        }
    }

    /// Client outputs visible in memory.
    pub fn client_outputs(&self) -> BTreeMap<usize, C::Output> {
        let view = self.view();
        BgKnowledge::new(&self.client, &view).outputs()
    }

    pub fn max_started(&self) -> usize {
        self.max_started
    }

    pub fn simulator_writes(&self) -> &[u32] {
        &self.writes
    }
}

impl<C: ClientProtocol> System for BgDirect<C> {
    type Output = u32;

    fn n(&self) -> usize {
        self.mem.len()
    }

    fn status(&self, pid: ProcessId) -> Status {
        let i = pid.index();
        if self.writes[i] >= self.max_writes && self.scanned[i] {
            Status::Done
        } else if self.writes[i] == 0 {
            Status::Idle
        } else {
            Status::Running
        }
    }

    fn enabled(&self, pid: ProcessId) -> Vec<Action> {
        if self.status(pid) == Status::Done {
            Vec::new()
        } else {
            vec![Action::Step]
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
        let effect = if self.scanned[i] {
            let cell = bg_step(&self.client, i + 1, self.views[i].as_ref());
            self.mem[i] = Some(cell);
            self.writes[i] += 1;
            self.scanned[i] = false;
            json!({"op": "update"})
        } else {
            self.views[i] = Some(self.view());
            self.scanned[i] = true;
            json!({"op": "snapshot"})
        };
        let view = self.view();
        let g = BgKnowledge::new(&self.client, &view);
        self.max_started = self.max_started.max(g.started().len());
        if let Some(x) = g.conflicts.first() {
            let msg = format!("instance {x:?} decided twice");
            self.violation.get_or_insert(msg);
        }
        Ok(effect)
    }

    fn output(&self, pid: ProcessId) -> Option<u32> {
        (self.status(pid) == Status::Done).then_some(self.writes[pid.index()])
    }

    fn check(&self) -> Result<(), String> {
        match &self.violation {
            Some(v) => Err(v.clone()),
            None => Ok(()),
        }
    }
}
