//! Immediate-snapshot runs and iterated standard chromatic subdivisions.
//!
//! A one-round immediate-snapshot run over participants `P` is an ordered
//! set partition of `P`: each process sees the union of the blocks up to and
//! including its own. An `m`-round run is a sequence of `m` such partitions
//! and is a facet of `Chr^m` of the face spanned by `P`.
//!
//! Vertex labels are full-information views. The round-0 label of every
//! process is empty; the round-`r` label of `i` lists, in color order, each
//! process `j` it saw in round `r` followed by `j`'s round-`r-1` label:
//! `{1,2}`, `{1{1},2{1,2}}`, and so on. The same encoding is produced by
//! [`chr`] from a complex's existing labels, so `chr(chr(s))` and
//! `chr_iter(n, 2)` share vertices literally.

pub mod geometry;
pub mod svg;

use crate::complex::{ChromaticComplex, ComplexError, Simplex, Vertex};
use crate::procset::{ProcSet, ProcessId, MAX_PROCESSES};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

pub const DEFAULT_FACET_BUDGET: usize = 1_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SubdivisionError {
    #[error("process {0} does not participate in the run")]
    NotParticipating(ProcessId),
    #[error("{facets} facets exceed the budget of {budget}")]
    BudgetExceeded { facets: u128, budget: usize },
    #[error("invalid run: {0}")]
    InvalidRun(String),
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

/// Blocks of concurrently returning immediate-snapshot invocations.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderedPartition {
    blocks: Vec<ProcSet>,
}

impl OrderedPartition {
    pub fn new(blocks: Vec<ProcSet>) -> Result<Self, SubdivisionError> {
        let mut seen = ProcSet::EMPTY;
        for b in &blocks {
            if b.is_empty() {
                return Err(SubdivisionError::InvalidRun("empty block".into()));
            }
            if !b.intersection(seen).is_empty() {
                return Err(SubdivisionError::InvalidRun(format!(
                    "block {b} overlaps earlier blocks"
                )));
            }
            seen = seen.union(*b);
        }
        if blocks.is_empty() {
            return Err(SubdivisionError::InvalidRun("no blocks".into()));
        }
        Ok(Self { blocks })
    }

    pub fn from_ids(blocks: &[&[usize]]) -> Result<Self, SubdivisionError> {
        Self::new(
            blocks
                .iter()
                .map(|b| ProcSet::from_ids(b.iter().copied()))
                .collect(),
        )
    }

    pub fn blocks(&self) -> &[ProcSet] {
        &self.blocks
    }

    pub fn participants(&self) -> ProcSet {
        self.blocks.iter().fold(ProcSet::EMPTY, |a, b| a.union(*b))
    }

    /// The immediate-snapshot output of `p`: everything up to its block.
    pub fn snapshot(&self, p: ProcessId) -> Option<ProcSet> {
        let mut acc = ProcSet::EMPTY;
        for b in &self.blocks {
            acc = acc.union(*b);
            if b.contains(p) {
                return Some(acc);
            }
        }
        None
    }

    pub fn is_sequential(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 1)
    }

    /// Restriction to a subset of participants (empty blocks dropped).
    pub fn restrict(&self, to: ProcSet) -> Option<Self> {
        let blocks: Vec<ProcSet> = self
            .blocks
            .iter()
            .map(|b| b.intersection(to))
            .filter(|b| !b.is_empty())
            .collect();
        (!blocks.is_empty()).then_some(Self { blocks })
    }
}

/// All ordered set partitions of `participants`, sorted.
pub fn enumerate_is_runs(participants: ProcSet) -> Vec<OrderedPartition> {
    fn go(rest: ProcSet, prefix: &mut Vec<ProcSet>, out: &mut Vec<OrderedPartition>) {
        if rest.is_empty() {
            out.push(OrderedPartition {
                blocks: prefix.clone(),
            });
            return;
        }
        for block in rest.subsets() {
            prefix.push(block);
            go(rest.difference(block), prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if !participants.is_empty() {
        go(participants, &mut Vec::new(), &mut out);
    }
    out.sort();
    out
}

/// Number of ordered set partitions (Fubini numbers) of an `n`-set.
pub fn ordered_partition_count(n: usize) -> u128 {
    // a(n) = sum_{k=1..n} C(n,k) a(n-k), a(0) = 1
    let mut a = vec![1u128; n + 1];
    for m in 1..=n {
        let mut binom = 1u128;
        let mut total = 0u128;
        for k in 1..=m {
            binom = binom * (m - k + 1) as u128 / k as u128;
            total += binom * a[m - k];
        }
        a[m] = total;
    }
    a[n]
}

/// An `m`-round immediate-snapshot run, i.e. a facet of `Chr^m t`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunSequence {
    participants: ProcSet,
    rounds: Vec<OrderedPartition>,
}

impl RunSequence {
    pub fn new(rounds: Vec<OrderedPartition>) -> Result<Self, SubdivisionError> {
        let first = rounds
            .first()
            .ok_or_else(|| SubdivisionError::InvalidRun("zero rounds".into()))?;
        let participants = first.participants();
        if rounds.iter().any(|r| r.participants() != participants) {
            return Err(SubdivisionError::InvalidRun(
                "rounds disagree on participants".into(),
            ));
        }
        Ok(Self {
            participants,
            rounds,
        })
    }

    pub fn participants(&self) -> ProcSet {
        self.participants
    }

    pub fn rounds(&self) -> &[OrderedPartition] {
        &self.rounds
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    /// Rounds `start..start+len` as a run of their own.
    pub fn slice(&self, start: usize, len: usize) -> RunSequence {
        RunSequence {
            participants: self.participants,
            rounds: self.rounds[start..start + len].to_vec(),
        }
    }

    pub fn concat(&self, other: &RunSequence) -> Result<RunSequence, SubdivisionError> {
        let mut rounds = self.rounds.clone();
        rounds.extend(other.rounds.iter().cloned());
        RunSequence::new(rounds)
    }

    /// Applies a color permutation (`perm[i-1]` is the image of `i`).
    pub fn permute(&self, perm: &[ProcessId]) -> RunSequence {
        let map = |s: ProcSet| s.iter().map(|p| perm[p.index()]).collect::<ProcSet>();
        RunSequence {
            participants: map(self.participants),
            rounds: self
                .rounds
                .iter()
                .map(|r| OrderedPartition {
                    blocks: r.blocks.iter().map(|b| map(*b)).collect(),
                })
                .collect(),
        }
    }

    /// Restriction to `sub`, valid when every process of `sub` only ever
    /// (transitively) saw processes of `sub`.
    pub fn restrict(&self, sub: ProcSet) -> Option<RunSequence> {
        if sub.is_empty() || !sub.is_subset(self.participants) {
            return None;
        }
        let views = RunViews::new(self);
        if sub.iter().any(|p| !views.carrier(p).is_subset(sub)) {
            return None;
        }
        let rounds = self
            .rounds
            .iter()
            .map(|r| r.restrict(sub))
            .collect::<Option<Vec<_>>>()?;
        Some(RunSequence {
            participants: sub,
            rounds,
        })
    }

    /// Fully sequential run with the same order in every round.
    pub fn total_order(order: &[usize], rounds: usize) -> Self {
        let p = OrderedPartition::new(
            order
                .iter()
                .map(|&i| ProcSet::singleton(ProcessId::of(i)))
                .collect(),
        )
        .expect("distinct ids");
        RunSequence::new(vec![p; rounds]).expect("nonempty")
    }
}

/// Per-round direct snapshots, transitive views and labels of a run.
#[derive(Clone, Debug)]
pub struct RunViews {
    snapshots: Vec<[ProcSet; MAX_PROCESSES]>,
    transitive: Vec<[ProcSet; MAX_PROCESSES]>,
    labels: Vec<Arc<str>>,
    participants: ProcSet,
}

impl RunViews {
    pub fn new(run: &RunSequence) -> Self {
        Self::with_base(run, &|_| Arc::from(""), &ProcSet::singleton)
    }

    /// Views on top of given round-0 labels and carriers.
    pub fn with_base(
        run: &RunSequence,
        base_label: &dyn Fn(ProcessId) -> Arc<str>,
        base_carrier: &dyn Fn(ProcessId) -> ProcSet,
    ) -> Self {
        let parts = run.participants;
        let mut snapshots = Vec::with_capacity(run.len());
        let mut transitive = Vec::with_capacity(run.len());
        let mut prev_t = [ProcSet::EMPTY; MAX_PROCESSES];
        let mut prev_l: Vec<Arc<str>> = vec![Arc::from(""); MAX_PROCESSES];
        for p in parts.iter() {
            prev_t[p.index()] = base_carrier(p);
            prev_l[p.index()] = base_label(p);
        }
        for round in &run.rounds {
            let mut snap = [ProcSet::EMPTY; MAX_PROCESSES];
            let mut trans = [ProcSet::EMPTY; MAX_PROCESSES];
            let mut labels: Vec<Arc<str>> = vec![Arc::from(""); MAX_PROCESSES];
            for p in parts.iter() {
                let s = round.snapshot(p).expect("participant");
                snap[p.index()] = s;
                trans[p.index()] = s
                    .iter()
                    .fold(ProcSet::EMPTY, |acc, q| acc.union(prev_t[q.index()]));
                let mut label = String::from("{");
                for (k, q) in s.iter().enumerate() {
                    if k > 0 {
                        label.push(',');
                    }
                    label.push_str(&q.get().to_string());
                    label.push_str(&prev_l[q.index()]);
                }
                label.push('}');
                labels[p.index()] = Arc::from(label);
            }
            snapshots.push(snap);
            transitive.push(trans);
            prev_t = trans;
            prev_l = labels;
        }
        Self {
            snapshots,
            transitive,
            labels: prev_l,
            participants: parts,
        }
    }

    /// Direct snapshot of `p` in round `r` (0-based).
    pub fn snapshot(&self, r: usize, p: ProcessId) -> ProcSet {
        self.snapshots[r][p.index()]
    }

    /// Processes `p` has transitively seen after round `r` (0-based).
    pub fn seen(&self, r: usize, p: ProcessId) -> ProcSet {
        self.transitive[r][p.index()]
    }

    pub fn carrier(&self, p: ProcessId) -> ProcSet {
        self.transitive.last().expect("nonempty run")[p.index()]
    }

    pub fn label(&self, p: ProcessId) -> Arc<str> {
        self.labels[p.index()].clone()
    }

    pub fn vertex(&self, p: ProcessId) -> Vertex {
        Vertex::new(p, self.label(p), self.carrier(p))
    }

    pub fn facet(&self) -> Simplex {
        Simplex::new(self.participants.iter().map(|p| self.vertex(p)).collect())
            .expect("one vertex per color")
    }
}

/// Transitive views of one process, one set per round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ViewSequence {
    pub owner: ProcessId,
    pub views: Vec<ProcSet>,
}

pub fn views_of(run: &RunSequence, p: ProcessId) -> Result<ViewSequence, SubdivisionError> {
    if !run.participants.contains(p) {
        return Err(SubdivisionError::NotParticipating(p));
    }
    let v = RunViews::new(run);
    Ok(ViewSequence {
        owner: p,
        views: (0..run.len()).map(|r| v.seen(r, p)).collect(),
    })
}

/// Colors of the smallest face of `s` containing `p`'s vertex.
pub fn carrier(run: &RunSequence, p: ProcessId) -> Result<ProcSet, SubdivisionError> {
    if !run.participants.contains(p) {
        return Err(SubdivisionError::NotParticipating(p));
    }
    Ok(RunViews::new(run).carrier(p))
}

pub fn run_facet(run: &RunSequence) -> Simplex {
    RunViews::new(run).facet()
}

/// All `m`-round runs over `participants`, lexicographically ordered.
pub fn enumerate_runs(participants: ProcSet, m: usize) -> Vec<RunSequence> {
    let one = enumerate_is_runs(participants);
    let mut out: Vec<Vec<OrderedPartition>> = vec![Vec::new()];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                one.iter().map(move |p| {
                    let mut v = prefix.clone();
                    v.push(p.clone());
                    v
                })
            })
            .collect();
    }
    out.into_iter()
        .map(|rounds| RunSequence::new(rounds).expect("consistent participants"))
        .collect()
}

pub fn check_budget(facets: u128, budget: usize) -> Result<(), SubdivisionError> {
    if facets > budget as u128 {
        Err(SubdivisionError::BudgetExceeded { facets, budget })
    } else {
        Ok(())
    }
}

/// `Chr^m s` for the standard simplex on `n` colors.
pub fn chr_iter(n: usize, m: usize, budget: usize) -> Result<ChromaticComplex, SubdivisionError> {
    if n == 0 || m == 0 {
        return Err(SubdivisionError::InvalidRun(
            "n and m must be positive".into(),
        ));
    }
    check_budget(ordered_partition_count(n).saturating_pow(m as u32), budget)?;
    let facets = enumerate_runs(ProcSet::full(n), m)
        .iter()
        .map(run_facet)
        .collect();
    Ok(ChromaticComplex::from_facets(n, facets)?)
}

/// One chromatic subdivision of every facet of `c`.
pub fn chr(c: &ChromaticComplex) -> Result<ChromaticComplex, SubdivisionError> {
    let mut facets = Vec::new();
    for f in c.facets() {
        let colors = f.colors();
        for p in enumerate_is_runs(colors) {
            let run = RunSequence::new(vec![p]).expect("one round");
            let views = RunViews::with_base(
                &run,
                &|q| f.vertex_of(q).expect("color in facet").label.clone(),
                &|q| f.vertex_of(q).expect("color in facet").carrier,
            );
            facets.push(views.facet());
        }
    }
    Ok(ChromaticComplex::from_facets(c.n(), facets)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[usize]) -> ProcSet {
        ProcSet::from_ids(ids.iter().copied())
    }

    #[test]
    fn partition_counts() {
        assert_eq!(enumerate_is_runs(set(&[1])).len(), 1);
        assert_eq!(enumerate_is_runs(set(&[1, 2])).len(), 3);
        assert_eq!(enumerate_is_runs(set(&[1, 2, 3])).len(), 13);
        assert_eq!(enumerate_is_runs(set(&[1, 2, 3, 4])).len(), 75);
        assert_eq!(
            (1..=4).map(ordered_partition_count).collect::<Vec<_>>(),
            vec![1, 3, 13, 75]
        );
    }

    #[test]
    fn enumeration_is_sorted_and_distinct() {
        let runs = enumerate_is_runs(set(&[1, 2, 3]));
        assert!(runs.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(
            runs[0],
            OrderedPartition::from_ids(&[&[1], &[2], &[3]]).unwrap()
        );
    }

    #[test]
    fn invalid_partitions() {
        assert!(OrderedPartition::from_ids(&[&[1], &[1, 2]]).is_err());
        assert!(OrderedPartition::new(vec![ProcSet::EMPTY]).is_err());
        let a = OrderedPartition::from_ids(&[&[1, 2]]).unwrap();
        let b = OrderedPartition::from_ids(&[&[1]]).unwrap();
        assert!(RunSequence::new(vec![a, b]).is_err());
        assert!(RunSequence::new(vec![]).is_err());
    }

    #[test]
    fn sequential_views_and_carriers() {
        let run = RunSequence::total_order(&[1, 2, 3], 1);
        let seen: Vec<ProcSet> = (1..=3)
            .map(|i| views_of(&run, ProcessId::of(i)).unwrap().views[0])
            .collect();
        assert_eq!(seen, vec![set(&[1]), set(&[1, 2]), set(&[1, 2, 3])]);
        assert_eq!(carrier(&run, ProcessId::of(1)).unwrap(), set(&[1]));
        assert_eq!(carrier(&run, ProcessId::of(3)).unwrap(), set(&[1, 2, 3]));
    }

    #[test]
    fn single_block_everyone_sees_everyone() {
        let run =
            RunSequence::new(vec![OrderedPartition::from_ids(&[&[1, 2, 3]]).unwrap()]).unwrap();
        for i in 1..=3 {
            assert_eq!(carrier(&run, ProcessId::of(i)).unwrap(), set(&[1, 2, 3]));
        }
    }

    #[test]
    fn non_participant_is_an_error() {
        let run = RunSequence::total_order(&[1, 2], 1);
        assert_eq!(
            carrier(&run, ProcessId::of(3)),
            Err(SubdivisionError::NotParticipating(ProcessId::of(3)))
        );
    }

    #[test]
    fn labels_are_full_information() {
        let run = RunSequence::new(vec![
            OrderedPartition::from_ids(&[&[1], &[2, 3]]).unwrap(),
            OrderedPartition::from_ids(&[&[3], &[1, 2]]).unwrap(),
        ])
        .unwrap();
        let v = RunViews::new(&run);
        assert_eq!(&*v.label(ProcessId::of(3)), "{3{1,2,3}}");
        assert_eq!(&*v.label(ProcessId::of(1)), "{1{1},2{1,2,3},3{1,2,3}}");
    }

    #[test]
    fn budget_is_enforced() {
        assert!(matches!(
            chr_iter(4, 4, 1000),
            Err(SubdivisionError::BudgetExceeded { .. })
        ));
    }
}
