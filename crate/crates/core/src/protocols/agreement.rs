use crate::procset::ProcessId;
use crate::runtime::{Action, RuntimeError, Status, System};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::BTreeMap;
use std::fmt::Debug;
use std::hash::Hash;

/// `k`-simultaneous consensus, linearized at the scheduler event of each
/// call. A call may win any index up to the number of distinct vectors
/// proposed so far (capped at `k`); the index is picked by `Choose`. The
/// first winner of an index fixes its value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KSimConsObject<V> {
    k: usize,
    vectors: Vec<Vec<V>>,
    decided: BTreeMap<usize, V>,
    callers: Vec<ProcessId>,
}

impl<V: Clone + PartialEq> KSimConsObject<V> {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            vectors: Vec::new(),
            decided: BTreeMap::new(),
            callers: Vec::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of index choices a call proposing `vector` would have.
    pub fn choices(&self, vector: &[V]) -> usize {
        let distinct = self.vectors.len() + usize::from(!self.vectors.iter().any(|w| w == vector));
        distinct.min(self.k)
    }

    /// Returns `(index, value)` with a 1-based index.
    pub fn propose(
        &mut self,
        i: ProcessId,
        vector: Vec<V>,
        choice: usize,
    ) -> Result<(usize, V), RuntimeError> {
        if vector.len() != self.k {
            return Err(RuntimeError::Invariant(format!(
                "proposal has {} entries, expected {}",
                vector.len(),
                self.k
            )));
        }
        if self.callers.contains(&i) {
            return Err(RuntimeError::DoubleInvocation(i));
        }
        if choice >= self.choices(&vector) {
            return Err(RuntimeError::Invariant(format!(
                "index choice {choice} out of range"
            )));
        }
        let index = choice + 1;
        let value = self
            .decided
            .entry(index)
            .or_insert_with(|| vector[choice].clone())
            .clone();
        if !self.vectors.contains(&vector) {
            self.vectors.push(vector);
        }
        self.callers.push(i);
        Ok((index, value))
    }

    pub fn distinct_vectors(&self) -> usize {
        self.vectors.len()
    }

    /// Renames callers; their order carries no meaning and is normalized.
    pub fn relabel(&mut self, f: impl Fn(ProcessId) -> ProcessId) {
        for c in &mut self.callers {
            *c = f(*c);
        }
        self.callers.sort();
    }
}

/// How a [`KSetConsObject`] resolves its nondeterminism.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy", content = "seed")]
pub enum KSetPolicy {
    /// The values of the first `k` proposals are the decisions; a caller gets
    /// its own value if it is one of them, else the first.
    FirstKProposals,
    /// Everyone gets the first proposal.
    MinimizeDistinct,
    /// A caller keeps its own value while fewer than `k` distinct values
    /// have been returned.
    MaximizeDistinct,
    /// Own value or a uniformly drawn earlier decision, from a seeded stream.
    Seeded(u64),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KSetConsObject<V> {
    k: usize,
    policy: KSetPolicy,
    proposals: Vec<V>,
    decisions: Vec<V>,
    calls: u64,
}

impl<V: Clone + PartialEq> KSetConsObject<V> {
    pub fn new(k: usize, policy: KSetPolicy) -> Self {
        Self {
            k,
            policy,
            proposals: Vec::new(),
            decisions: Vec::new(),
            calls: 0,
        }
    }

    pub fn propose(&mut self, v: V) -> V {
        self.proposals.push(v.clone());
        self.calls += 1;
        let out = match self.policy {
            KSetPolicy::FirstKProposals => {
                let firsts = &self.proposals[..self.proposals.len().min(self.k)];
                if firsts.contains(&v) {
                    v
                } else {
                    self.proposals[0].clone()
                }
            }
            KSetPolicy::MinimizeDistinct => self.proposals[0].clone(),
            KSetPolicy::MaximizeDistinct => {
                if self.decisions.contains(&v) || self.decisions.len() < self.k {
                    v
                } else {
                    self.decisions[0].clone()
                }
            }
            KSetPolicy::Seeded(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    seed ^ self.calls.wrapping_mul(0x9e37_79b9_7f4a_7c15),
                );
                let own_allowed = self.decisions.contains(&v) || self.decisions.len() < self.k;
                let options = self.decisions.len() + usize::from(own_allowed);
                let pick = rng.gen_range(0..options);
                if pick < self.decisions.len() {
                    self.decisions[pick].clone()
                } else {
                    v
                }
            }
        };
        if !self.decisions.contains(&out) {
            self.decisions.push(out.clone());
        }
        out
    }

    pub fn decisions(&self) -> &[V] {
        &self.decisions
    }
}

/// Each participant proposes its vector to one KSC object; all index
/// choices are explored through `Choose` events.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct KscSystem {
    vectors: Vec<Option<Vec<u64>>>,
    object: KSimConsObject<u64>,
    results: Vec<Option<(usize, u64)>>,
}

impl KscSystem {
    pub fn new(k: usize, vectors: Vec<Option<Vec<u64>>>) -> Self {
        let n = vectors.len();
        Self {
            vectors,
            object: KSimConsObject::new(k),
            results: vec![None; n],
        }
    }

    /// Same-index agreement, proposal validity and the distinct-vector
    /// index bound.
    pub fn contract(&self) -> Result<(), String> {
        let mut by_index: BTreeMap<usize, u64> = BTreeMap::new();
        let distinct = self.object.distinct_vectors();
        for (i, r) in self.results.iter().enumerate() {
            let Some((idx, v)) = *r else { continue };
            if idx > distinct {
                return Err(format!(
                    "p{} won index {idx} with {distinct} distinct vectors",
                    i + 1
                ));
            }
            if !self.vectors.iter().flatten().any(|w| w[idx - 1] == v) {
                return Err(format!("value {v} never proposed at index {idx}"));
            }
            if let Some(u) = by_index.insert(idx, v) {
                if u != v {
                    return Err(format!("index {idx} returned both {u} and {v}"));
                }
            }
        }
        Ok(())
    }
}

impl System for KscSystem {
    type Output = (usize, u64);

    fn n(&self) -> usize {
        self.vectors.len()
    }

    fn status(&self, pid: ProcessId) -> Status {
        if self.results[pid.index()].is_some() {
            Status::Done
        } else {
            Status::Idle
        }
    }

    fn enabled(&self, pid: ProcessId) -> Vec<Action> {
        let i = pid.index();
        match (&self.vectors[i], &self.results[i]) {
            (Some(v), None) => (0..self.object.choices(v) as u32)
                .map(Action::Choose)
                .collect(),
            _ => Vec::new(),
        }
    }

    fn apply(
        &mut self,
        pid: ProcessId,
        action: &Action,
    ) -> Result<serde_json::Value, RuntimeError> {
        let (Action::Choose(c), Some(v), None) = (
            action,
            &self.vectors[pid.index()],
            &self.results[pid.index()],
        ) else {
            return Err(RuntimeError::NotEnabled {
                pid,
                action: action.clone(),
            });
        };
        let r = self.object.propose(pid, v.clone(), *c as usize)?;
        self.results[pid.index()] = Some(r);
        Ok(json!({"op": "ksc", "index": r.0, "value": r.1}))
    }

    fn output(&self, pid: ProcessId) -> Option<(usize, u64)> {
        self.results[pid.index()]
    }

    fn check(&self) -> Result<(), String> {
        self.contract()
    }
}

/// Distinct values in a decision list.
pub fn distinct_count<V: PartialEq>(values: &[V]) -> usize {
    let mut seen: Vec<&V> = Vec::new();
    for v in values {
        if !seen.contains(&v) {
            seen.push(v);
        }
    }
    seen.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{explore_traces, Bound};

    #[test]
    fn identical_vectors_win_index_one() {
        let mut o = KSimConsObject::new(2);
        for i in 1..=3 {
            assert_eq!(o.choices(&[4, 5]), 1);
            assert_eq!(o.propose(ProcessId::of(i), vec![4, 5], 0).unwrap(), (1, 4));
        }
    }

    #[test]
    fn solo_proposer() {
        let mut o = KSimConsObject::new(3);
        assert_eq!(
            o.propose(ProcessId::of(2), vec![9, 8, 7], 0).unwrap(),
            (1, 9)
        );
    }

    #[test]
    fn ksc_exhaustive_n3_k2() {
        let sys = KscSystem::new(
            2,
            vec![Some(vec![1, 2]), Some(vec![3, 4]), Some(vec![1, 2])],
        );
        let stats = explore_traces(&sys, Bound::wait_free(3), |_, s| {
            // Extracting k-set consensus: decide the value at the won index.
            let decisions: Vec<u64> = s.outputs().values().map(|(_, v)| *v).collect();
            (distinct_count(&decisions) <= 2)
                .then_some(())
                .ok_or("too many values".to_string())
        })
        .unwrap();
        assert!(stats.terminals > 6);
    }

    #[test]
    fn kset_policies() {
        let mut max = KSetConsObject::new(2, KSetPolicy::MaximizeDistinct);
        let outs: Vec<u32> = [1, 2, 3].into_iter().map(|v| max.propose(v)).collect();
        assert_eq!(distinct_count(&outs), 2);
        let mut min = KSetConsObject::new(2, KSetPolicy::MinimizeDistinct);
        let outs: Vec<u32> = [1, 2, 3].into_iter().map(|v| min.propose(v)).collect();
        assert_eq!(outs, vec![1, 1, 1]);
        let mut first = KSetConsObject::new(3, KSetPolicy::FirstKProposals);
        let outs: Vec<u32> = [1, 2, 3].into_iter().map(|v| first.propose(v)).collect();
        assert_eq!(outs, vec![1, 2, 3]);
        let mut cons = KSetConsObject::new(1, KSetPolicy::FirstKProposals);
        let outs: Vec<u32> = [5, 2, 3].into_iter().map(|v| cons.propose(v)).collect();
        assert_eq!(outs, vec![5, 5, 5]);
    }

    #[test]
    fn seeded_policy_is_reproducible_and_bounded() {
        for seed in 0..50 {
            let run = |seed| {
                let mut o = KSetConsObject::new(2, KSetPolicy::Seeded(seed));
                [1u32, 2, 3, 4]
                    .into_iter()
                    .map(|v| o.propose(v))
                    .collect::<Vec<_>>()
            };
            let a = run(seed);
            assert_eq!(a, run(seed));
            assert!(distinct_count(&a) <= 2);
            assert!(a.iter().all(|v| (1..=4).contains(v)));
        }
    }
}
