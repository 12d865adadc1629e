//! Contention sets, the affine task `R_k`, leaders, and other affine patterns.
//!
//! Two processes of a run contend when their carriers coincide. The
//! contention sets of a run are the subsets of the classes of equal carrier,
//! so the class partition is stored and the power sets are expanded only on
//! request. `R_k` keeps the two-round runs whose classes have at most `k`
//! members.

use crate::complex::{component_count, ChromaticComplex, ComplexError, Simplex};
use crate::procset::{ProcSet, ProcessId};
use crate::subdivision::{
    check_budget, enumerate_runs, ordered_partition_count, run_facet, RunSequence, RunViews,
    SubdivisionError,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AffineError {
    #[error("expected a {expected}-round run, got {got} rounds")]
    WrongRoundCount { expected: usize, got: usize },
    #[error("undecided set {undecided} is not a subset of the participants {participants}")]
    UndecidedNotParticipating {
        undecided: ProcSet,
        participants: ProcSet,
    },
    #[error("run {run:?} with undecided {undecided} has {count} leaders, more than k = {k}")]
    TooManyLeaders {
        run: RunSequence,
        undecided: ProcSet,
        count: usize,
        k: usize,
    },
    #[error(
        "run {run:?} with undecided {undecided} has no leader visible to every undecided process"
    )]
    NoVisibleLeader {
        run: RunSequence,
        undecided: ProcSet,
    },
    #[error(transparent)]
    Subdivision(#[from] SubdivisionError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ContentionSet {
    pub members: ProcSet,
    pub shared_carrier: ProcSet,
}

/// The classes of participants sharing a carrier, ordered by carrier.
pub fn contention_classes(run: &RunSequence) -> Vec<ContentionSet> {
    classes_from(&RunViews::new(run), run.participants())
}

fn classes_from(views: &RunViews, participants: ProcSet) -> Vec<ContentionSet> {
    let mut by_carrier: BTreeMap<ProcSet, ProcSet> = BTreeMap::new();
    for p in participants.iter() {
        by_carrier.entry(views.carrier(p)).or_default().insert(p);
    }
    by_carrier
        .into_iter()
        .map(|(shared_carrier, members)| ContentionSet {
            members,
            shared_carrier,
        })
        .collect()
}

/// Every nonempty contention set of the run.
pub fn contention_sets(run: &RunSequence) -> Vec<ContentionSet> {
    contention_classes(run)
        .into_iter()
        .flat_map(|c| {
            c.members.subsets().map(move |members| ContentionSet {
                members,
                shared_carrier: c.shared_carrier,
            })
        })
        .collect()
}

pub fn max_contention(run: &RunSequence) -> usize {
    contention_classes(run)
        .iter()
        .map(|c| c.members.len())
        .max()
        .unwrap_or(0)
}

/// Membership of a two-round run in `R_k`.
pub fn in_rk(run: &RunSequence, k: usize) -> bool {
    run.len() == 2 && max_contention(run) <= k
}

/// Which predicate an [`AffinePattern`] applies to each slice of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "k")]
pub enum PatternKind {
    /// Every run (the whole subdivision).
    Full,
    /// Contention sets of size at most `k` over two rounds.
    Rk(usize),
    /// Fully sequential one-round runs.
    Ordered,
    /// One-round runs with contention sets of size at most `k`.
    KTestAndSet(usize),
}

/// A color-invariant set of `rounds`-round runs closed under faces.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AffinePattern {
    pub name: String,
    pub rounds: usize,
    pub kind: PatternKind,
}

impl AffinePattern {
    pub fn full(rounds: usize) -> Self {
        Self {
            name: format!("chr{rounds}"),
            rounds,
            kind: PatternKind::Full,
        }
    }

    pub fn rk(k: usize) -> Self {
        Self {
            name: format!("R{k}"),
            rounds: 2,
            kind: PatternKind::Rk(k),
        }
    }

    pub fn ordered() -> Self {
        Self {
            name: "ordered".into(),
            rounds: 1,
            kind: PatternKind::Ordered,
        }
    }

    pub fn k_test_and_set(k: usize) -> Self {
        Self {
            name: format!("{k}-TS"),
            rounds: 1,
            kind: PatternKind::KTestAndSet(k),
        }
    }

    /// Whether a run of exactly `self.rounds` rounds is in the pattern.
    pub fn accepts(&self, run: &RunSequence) -> bool {
        if run.len() != self.rounds {
            return false;
        }
        match self.kind {
            PatternKind::Full => true,
            PatternKind::Rk(k) | PatternKind::KTestAndSet(k) => max_contention(run) <= k,
            PatternKind::Ordered => run.rounds().iter().all(|r| r.is_sequential()),
        }
    }

    /// Whether every `self.rounds`-round slice of `run` is accepted.
    pub fn accepts_iterated(&self, run: &RunSequence) -> bool {
        run.len().is_multiple_of(self.rounds)
            && (0..run.len() / self.rounds)
                .all(|t| self.accepts(&run.slice(t * self.rounds, self.rounds)))
    }
}

impl fmt::Display for AffinePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

pub fn ordered_pattern() -> AffinePattern {
    AffinePattern::ordered()
}

pub fn ktas_pattern(k: usize) -> AffinePattern {
    AffinePattern::k_test_and_set(k)
}

/// Accepted runs of `iterations` pattern invocations over exactly `participants`.
pub fn pattern_runs_over(
    participants: ProcSet,
    pattern: &AffinePattern,
    iterations: usize,
) -> Vec<RunSequence> {
    let slices: Vec<RunSequence> = enumerate_runs(participants, pattern.rounds)
        .into_iter()
        .filter(|r| pattern.accepts(r))
        .collect();
    let mut out = slices.clone();
    for _ in 1..iterations {
        out = out
            .iter()
            .flat_map(|prefix| {
                slices
                    .iter()
                    .map(move |s| prefix.concat(s).expect("same participants"))
            })
            .collect();
    }
    out
}

/// Accepted runs over every nonempty face of the `n`-simplex.
pub fn pattern_runs(
    n: usize,
    pattern: &AffinePattern,
    iterations: usize,
    budget: usize,
) -> Result<Vec<RunSequence>, AffineError> {
    let mut total: u128 = 0;
    let mut per_face = Vec::new();
    for face in ProcSet::full(n).subsets() {
        let slices = pattern_runs_over(face, pattern, 1).len() as u128;
        total = total.saturating_add(slices.saturating_pow(iterations as u32));
        per_face.push(face);
    }
    check_budget(total, budget)?;
    Ok(per_face
        .into_iter()
        .flat_map(|face| pattern_runs_over(face, pattern, iterations))
        .collect())
}

/// `L^t` as a complex: one facet per accepted run over the full simplex,
/// plus accepted runs over proper faces that are not already faces.
pub fn iterate_pattern(
    n: usize,
    pattern: &AffinePattern,
    iterations: usize,
    budget: usize,
) -> Result<ChromaticComplex, AffineError> {
    if iterations == 0 {
        return Err(SubdivisionError::InvalidRun("zero iterations".into()).into());
    }
    let facets: Vec<Simplex> = pattern_runs(n, pattern, iterations, budget)?
        .iter()
        .map(run_facet)
        .collect();
    Ok(ChromaticComplex::from_facets(n, facets)?)
}

/// The subcomplex `R_k` of `Chr^2 s`.
pub fn build_rk(n: usize, k: usize, budget: usize) -> Result<ChromaticComplex, AffineError> {
    iterate_pattern(n, &AffinePattern::rk(k), 1, budget)
}

/// Checks that restricting any accepted run to a sub-face it lives on gives
/// an accepted run with the same vertices. Returns the first offending pair.
pub fn face_closure_violation(
    n: usize,
    pattern: &AffinePattern,
    budget: usize,
) -> Result<Option<(RunSequence, ProcSet)>, AffineError> {
    for run in pattern_runs(n, pattern, 1, budget)? {
        let facet = run_facet(&run);
        for sub in run.participants().subsets() {
            if sub == run.participants() {
                continue;
            }
            if let Some(r) = run.restrict(sub) {
                if !pattern.accepts(&r) || run_facet(&r) != facet.restrict(sub) {
                    return Ok(Some((run, sub)));
                }
            }
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LeaderSet {
    pub leaders: ProcSet,
    /// A leader in every undecided process's round-2 view; `None` only when
    /// nobody is undecided.
    pub visible_leader: Option<ProcessId>,
}

fn expect_two_rounds(run: &RunSequence) -> Result<(), AffineError> {
    if run.len() != 2 {
        return Err(AffineError::WrongRoundCount {
            expected: 2,
            got: run.len(),
        });
    }
    Ok(())
}

/// Undecided processes whose round-1 view holds at most `k` undecided ones,
/// and one of them that every undecided process sees in round 2.
pub fn leaders(run: &RunSequence, undecided: ProcSet, k: usize) -> Result<LeaderSet, AffineError> {
    expect_two_rounds(run)?;
    if !undecided.is_subset(run.participants()) {
        return Err(AffineError::UndecidedNotParticipating {
            undecided,
            participants: run.participants(),
        });
    }
    let views = RunViews::new(run);
    let leaders: ProcSet = undecided
        .iter()
        .filter(|&j| views.snapshot(0, j).intersection(undecided).len() <= k)
        .collect();
    if leaders.len() > k {
        return Err(AffineError::TooManyLeaders {
            run: run.clone(),
            undecided,
            count: leaders.len(),
            k,
        });
    }
    let Some((smallest, _)) = smallest_view(&views, undecided) else {
        return Ok(LeaderSet {
            leaders,
            visible_leader: None,
        });
    };
    match leaders.intersection(smallest).min() {
        Some(l) => Ok(LeaderSet {
            leaders,
            visible_leader: Some(l),
        }),
        None => Err(AffineError::NoVisibleLeader {
            run: run.clone(),
            undecided,
        }),
    }
}

fn smallest_view(views: &RunViews, undecided: ProcSet) -> Option<(ProcSet, ProcSet)> {
    let smallest = undecided
        .iter()
        .map(|i| views.snapshot(1, i))
        .min_by_key(|s| s.len())?;
    let holders = undecided
        .iter()
        .filter(|&i| views.snapshot(1, i) == smallest)
        .collect();
    Some((smallest, holders))
}

/// The smallest round-2 snapshot among undecided processes and who holds it.
pub fn smallest_is2_view(
    run: &RunSequence,
    undecided: ProcSet,
) -> Result<Option<(ProcSet, ProcSet)>, AffineError> {
    expect_two_rounds(run)?;
    Ok(smallest_view(&RunViews::new(run), undecided))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IterationConnectivity {
    pub iterations: usize,
    pub facets: usize,
    pub components: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ObstructionReport {
    pub pattern: String,
    pub n: usize,
    pub per_iteration: Vec<IterationConnectivity>,
    pub all_connected: bool,
    pub conclusion: String,
}

/// Connectivity of `L^t` for `t = 1..=t_max`. A connected protocol complex
/// has no color-preserving decision map onto the disconnected consensus
/// output complex once solo runs must decide their own input.
pub fn consensus_obstruction_report(
    n: usize,
    pattern: &AffinePattern,
    t_max: usize,
    budget: usize,
) -> Result<ObstructionReport, AffineError> {
    let mut per_iteration = Vec::new();
    for t in 1..=t_max {
        let c = iterate_pattern(n, pattern, t, budget)?;
        per_iteration.push(IterationConnectivity {
            iterations: t,
            facets: c.facets().len(),
            components: component_count(&c),
        });
    }
    let all_connected = per_iteration.iter().all(|c| c.components == 1);
    let conclusion = if all_connected && n >= 2 {
        format!("consensus unsolvable through {t_max} iterations of {pattern}")
    } else {
        format!("no connectivity obstruction through {t_max} iterations of {pattern}")
    };
    Ok(ObstructionReport {
        pattern: pattern.name.clone(),
        n,
        per_iteration,
        all_connected,
        conclusion,
    })
}

/// One facet of `Chr² s` with its contention structure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FacetRecord {
    pub facet_id: usize,
    pub run: RunSequence,
    pub contention_classes: Vec<ContentionSet>,
    /// Membership in `R_k` for every `k` in `1..=n`, keyed by `k`.
    pub in_rk: BTreeMap<usize, bool>,
    /// Leaders for the given `k` with every process undecided; absent when
    /// the facet is not in `R_k`.
    pub leaders: Option<LeaderSet>,
    /// The smallest round-2 view and the processes holding it.
    pub smallest_view: Option<(ProcSet, ProcSet)>,
}

/// Records for every facet of `Chr² s` in enumeration order.
pub fn facet_records(n: usize, k: usize, budget: usize) -> Result<Vec<FacetRecord>, AffineError> {
    let all = ProcSet::full(n);
    check_budget(ordered_partition_count(n).saturating_pow(2), budget)?;
    enumerate_runs(all, 2)
        .into_iter()
        .enumerate()
        .map(|(facet_id, run)| {
            let views = RunViews::new(&run);
            let membership = (1..=n).map(|j| (j, in_rk(&run, j))).collect();
            let leaders = if in_rk(&run, k) {
                Some(leaders(&run, all, k)?)
            } else {
                None
            };
            Ok(FacetRecord {
                facet_id,
                contention_classes: classes_from(&views, all),
                in_rk: membership,
                leaders,
                smallest_view: smallest_view(&views, all),
                run,
            })
        })
        .collect()
}
