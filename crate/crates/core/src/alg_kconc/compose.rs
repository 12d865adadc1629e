//! Algorithm 1 simulating `k` BG simulators, which in turn run a client
//! protocol for the real processes: a solver for `k`-concurrent protocols
//! that uses only `k`-simultaneous consensus and commit-adopt.

use super::alg1::{Alg1System, SimProgram, SimView};
use super::bg::{bg_step, BgCell, BgKnowledge, ClientProtocol};
use crate::procset::ProcessId;
use crate::runtime::{
    fair_run, seeded_run, Action, Bound, RuntimeError, Status, System, Violation,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// The BG simulator code as the program of the simulated slots. Slot `m`
/// runs BG simulator `m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct BgProgram<C> {
    pub client: C,
}

impl<C: ClientProtocol> SimProgram for BgProgram<C> {
    type Value = BgCell<C::Val>;
    type Input = C::Input;
    type Output = C::Output;

    fn write_val(
        &self,
        slot: usize,
        _counter: i64,
        view: Option<&SimView<Self::Value, Self::Input>>,
    ) -> Self::Value {
        bg_step(&self.client, slot, view)
    }

    fn has_outputs(&self) -> bool {
        true
    }

    fn output(
        &self,
        pid: ProcessId,
        view: &SimView<Self::Value, Self::Input>,
    ) -> Option<C::Output> {
        BgKnowledge::new(&self.client, view)
            .outputs()
            .remove(&pid.index())
    }
}

/// The full stack for `n` real processes. A process with no input never
/// takes a step.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct KConcSystem<C: ClientProtocol> {
    inner: Alg1System<BgProgram<C>>,
    client: C,
    k: usize,
}

impl<C: ClientProtocol> KConcSystem<C> {
    pub fn new(client: C, k: usize, inputs: Vec<Option<C::Input>>, max_rounds: usize) -> Self {
        let participants = inputs.iter().map(Option::is_some).collect();
        let program = BgProgram {
            client: client.clone(),
        };
        Self {
            inner: Alg1System::new(program, k, max_rounds, participants, inputs),
            client,
            k,
        }
    }

    pub fn alg1(&self) -> &Alg1System<BgProgram<C>> {
        &self.inner
    }

    /// Clients started and not yet decided in the current simulated memory.
    pub fn simulated_concurrency(&self) -> Result<usize, String> {
        let view = self.inner.current_view()?;
        Ok(BgKnowledge::new(&self.client, &view).started().len())
    }
}

impl<C: ClientProtocol> System for KConcSystem<C> {
    type Output = C::Output;

    fn n(&self) -> usize {
        self.inner.n()
    }

    fn status(&self, pid: ProcessId) -> Status {
        self.inner.status(pid)
    }

    fn enabled(&self, pid: ProcessId) -> Vec<Action> {
        self.inner.enabled(pid)
    }

    fn apply(
        &mut self,
        pid: ProcessId,
        action: &Action,
    ) -> Result<serde_json::Value, RuntimeError> {
        self.inner.apply(pid, action)
    }

    fn output(&self, pid: ProcessId) -> Option<C::Output> {
        self.inner.output(pid).and_then(|o| o.output)
    }

    fn check(&self) -> Result<(), String> {
        self.inner.check()?;
        let view = self.inner.current_view()?;
        let g = BgKnowledge::new(&self.client, &view);
        if let Some(x) = g.conflicts.first() {
            return Err(format!("client {} step {} agreed twice", x.0 + 1, x.1));
        }
        let started = g.started().len();
        if started > self.k {
            return Err(format!(
                "{started} simulated clients running at once, bound {}",
                self.k
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "seed")]
pub enum Schedule {
    /// Round-robin over enabled processes.
    Fair,
    Seeded(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport<O> {
    /// Outputs of real processes, by 1-based id.
    pub outputs: BTreeMap<usize, O>,
    pub events: usize,
    /// Every process with an input produced an output.
    pub complete: bool,
}

/// Runs the stack under one schedule and checks the outputs with
/// `verdict(inputs, outputs)`. Invariant failures and task violations come
/// back as a [`Violation`] with the schedule prefix.
pub fn solve_k_concurrently<C, F>(
    client: C,
    k: usize,
    inputs: Vec<Option<C::Input>>,
    schedule: Schedule,
    bound: Bound,
    verdict: F,
) -> Result<SolveReport<C::Output>, Violation>
where
    C: ClientProtocol,
    F: Fn(&[Option<C::Input>], &BTreeMap<usize, C::Output>) -> Result<(), String>,
{
    let sys = KConcSystem::new(client, k, inputs.clone(), bound.depth);
    let (end, path) = match schedule {
        Schedule::Fair => fair_run(&sys, bound)?,
        Schedule::Seeded(seed) => seeded_run(&sys, bound, seed)?,
    };
    let outputs: BTreeMap<usize, C::Output> = end
        .outputs()
        .into_iter()
        .map(|(p, o)| (p.get(), o))
        .collect();
    verdict(&inputs, &outputs).map_err(|message| Violation {
        path: path.clone(),
        message,
    })?;
    let complete = inputs
        .iter()
        .enumerate()
        .all(|(i, x)| x.is_none() || outputs.contains_key(&(i + 1)));
    Ok(SolveReport {
        outputs,
        events: path.len(),
        complete,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alg_kconc::{AdoptFirstDecision, EchoClient};
    use crate::runtime::explore_states;

    fn at_most(k: usize) -> impl Fn(&[Option<u64>], &BTreeMap<usize, u64>) -> Result<(), String> {
        move |inputs, outs| {
            let mut d: Vec<u64> = outs.values().copied().collect();
            d.sort();
            d.dedup();
            if d.iter().any(|v| !inputs.contains(&Some(*v))) {
                return Err(format!("decided a value nobody proposed: {outs:?}"));
            }
            (d.len() <= k)
                .then_some(())
                .ok_or_else(|| format!("{} values decided", d.len()))
        }
    }

    #[test]
    fn echo_without_restriction() {
        let r = solve_k_concurrently(
            EchoClient,
            3,
            vec![Some(7), Some(8), Some(9)],
            Schedule::Seeded(11),
            Bound::wait_free(5000),
            |ins: &[Option<u64>], outs: &BTreeMap<usize, u64>| {
                outs.iter()
                    .all(|(p, o)| ins[p - 1] == Some(*o))
                    .then_some(())
                    .ok_or_else(|| "echo changed a value".into())
            },
        )
        .unwrap();
        assert!(r.complete);
        assert_eq!(r.outputs, BTreeMap::from([(1, 7), (2, 8), (3, 9)]));
    }

    #[test]
    fn consensus_with_one_simulator_exhaustive() {
        let sys = KConcSystem::new(AdoptFirstDecision, 1, vec![Some(1), Some(2)], 400);
        let check = at_most(1);
        let stats = explore_states(&sys, Bound::wait_free(200), |_, s| {
            let outs: BTreeMap<usize, u64> =
                s.outputs().into_iter().map(|(p, o)| (p.get(), o)).collect();
            if outs.len() != 2 {
                return Err("a process did not decide".into());
            }
            check(&[Some(1), Some(2)], &outs)
        })
        .unwrap();
        assert_eq!(stats.truncated, 0);
    }

    #[test]
    fn two_set_agreement_seeded() {
        for seed in 0..20 {
            let r = solve_k_concurrently(
                AdoptFirstDecision,
                2,
                vec![Some(1), Some(2), Some(3)],
                Schedule::Seeded(seed),
                Bound::wait_free(20_000),
                at_most(2),
            )
            .unwrap();
            assert!(r.complete, "seed {seed}");
        }
    }
}
