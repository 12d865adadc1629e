use proptest::prelude::*;
use rk_affine::affine::{ordered_pattern, pattern_runs_over, AffinePattern};
use rk_affine::subdivision::DEFAULT_FACET_BUDGET;
use rk_affine::tasks::*;
use rk_affine::{OrderedPartition, ProcSet, ProcessId, RunSequence};
use std::collections::{BTreeMap, BTreeSet};

const B: usize = 10_000_000;

fn brute_kset(k: usize, inputs: &[Option<u64>], outputs: &[Option<u64>]) -> (bool, bool) {
    let proposed: BTreeSet<u64> = inputs.iter().flatten().copied().collect();
    let decided: BTreeSet<u64> = outputs.iter().flatten().copied().collect();
    let ok = decided.is_subset(&proposed) && decided.len() <= k;
    let complete = inputs
        .iter()
        .zip(outputs)
        .all(|(i, o)| i.is_none() || o.is_some());
    (ok, complete)
}

fn arb_vectors(n: usize) -> impl Strategy<Value = (Vec<Option<u64>>, Vec<Option<u64>>)> {
    proptest::collection::vec(
        (proptest::option::of(0u64..3), proptest::option::of(0u64..4)),
        n,
    )
    .prop_filter("someone participates", |v| {
        v.iter().any(|(i, _)| i.is_some())
    })
    .prop_map(|v| {
        let ins: Vec<_> = v.iter().map(|(i, _)| *i).collect();
        let outs = v.iter().map(|(i, o)| i.and(*o)).collect();
        (ins, outs)
    })
}

proptest! {
    #[test]
    fn kset_checker_matches_brute_force(k in 1usize..4, (ins, outs) in arb_vectors(3)) {
        let task = if k == 1 { ValueTask::consensus(3, &[0, 1, 2]) } else { ValueTask::k_set_agreement(3, k, &[0, 1, 2]) };
        let v = task.check_outputs(&ins, &outs).unwrap();
        let (ok, complete) = brute_kset(k, &ins, &outs);
        prop_assert_eq!(v.accepted(), ok);
        if ok {
            prop_assert_eq!(v, if complete { Verdict::Solved } else { Verdict::ConsistentSoFar });
        }
    }

    #[test]
    fn echo_checker_matches_brute_force((ins, outs) in arb_vectors(3)) {
        let v = ValueTask::echo(3, &[0, 1, 2]).check_outputs(&ins, &outs).unwrap();
        let ok = ins.iter().zip(&outs).all(|(i, o)| o.is_none() || o == i);
        prop_assert_eq!(v.accepted(), ok);
    }
}

#[test]
fn checker_rejects_malformed_vectors() {
    let t = ValueTask::consensus(2, &[0, 1]);
    assert!(t.check_outputs(&[Some(0)], &[Some(0)]).is_err());
    assert!(t.check_outputs(&[None, None], &[None, None]).is_err());
    assert!(t
        .check_outputs(&[None, Some(1)], &[Some(1), Some(1)])
        .is_err());
}

#[test]
fn input_vectors_cover_every_participating_assignment() {
    // (values + 1)^n minus the all-absent vector.
    assert_eq!(all_input_vectors(3, &[0, 1]).len(), 26);
    assert_eq!(all_input_vectors(2, &[4, 5, 6]).len(), 15);
    let set: BTreeSet<_> = all_input_vectors(3, &[0, 1]).into_iter().collect();
    assert_eq!(set.len(), 26);
}

fn consensus_table_json() -> String {
    let mut rows = Vec::new();
    for a in [None, Some(0u64), Some(1)] {
        for b in [None, Some(0u64), Some(1)] {
            if a.is_none() && b.is_none() {
                continue;
            }
            let outs: Vec<Vec<Option<u64>>> = [0u64, 1]
                .iter()
                .filter(|v| a == Some(**v) || b == Some(**v))
                .map(|v| vec![a.map(|_| *v), b.map(|_| *v)])
                .collect();
            rows.push(serde_json::json!({"input": [a, b], "outputs": outs}));
        }
    }
    serde_json::json!({"n": 2, "outputsDomain": [0, 1], "deltaKind": "table", "table": rows})
        .to_string()
}

#[test]
fn table_task_agrees_with_the_builtin() {
    let table = ValueTask::from_json(&consensus_table_json()).unwrap();
    let builtin = ValueTask::consensus(2, &[0, 1]);
    let outs: Vec<Option<u64>> = vec![None, Some(0), Some(1)];
    for ins in &builtin.inputs {
        for a in &outs {
            for b in &outs {
                let o = vec![ins[0].and(*a), ins[1].and(*b)];
                assert_eq!(
                    table.check_outputs(ins, &o).unwrap().accepted(),
                    builtin.check_outputs(ins, &o).unwrap().accepted(),
                    "{ins:?} -> {o:?}"
                );
            }
        }
    }
    assert_eq!(
        solvability_search(&table, &AffinePattern::rk(1), 1, B).unwrap(),
        solvability_search(&builtin, &AffinePattern::rk(1), 1, B).unwrap()
    );
    assert!(
        ValueTask::from_json(r#"{"n": 2, "outputsDomain": [0], "deltaKind": "table"}"#).is_err()
    );
}

/// Full-information label of `p` after the run, built from scratch.
fn label(run: &RunSequence, input: &[Option<u64>], p: ProcessId) -> String {
    let mut labels: BTreeMap<ProcessId, String> = run
        .participants()
        .iter()
        .map(|q| (q, format!("={}", input[q.index()].unwrap())))
        .collect();
    for round in run.rounds() {
        let mut next = BTreeMap::new();
        for q in run.participants().iter() {
            let mut seen = ProcSet::EMPTY;
            for b in round.blocks() {
                seen = seen.union(*b);
                if b.contains(q) {
                    break;
                }
            }
            let parts: Vec<String> = seen
                .iter()
                .map(|j| format!("{}{}", j.get(), labels[&j]))
                .collect();
            next.insert(q, format!("{{{}}}", parts.join(",")));
        }
        labels = next;
    }
    format!("{}{}", p.get(), labels[&p])
}

/// Applies a found map to every run of every input and checks consensus directly.
fn recheck_consensus(
    task: &ValueTask,
    pattern: &AffinePattern,
    m: usize,
    map: &BTreeMap<String, u64>,
) {
    for input in &task.inputs {
        let t: ProcSet = (0..task.n)
            .filter(|&i| input[i].is_some())
            .map(|i| ProcessId::of(i + 1))
            .collect();
        for run in pattern_runs_over(t, pattern, m) {
            let decided: BTreeSet<u64> = t.iter().map(|p| map[&label(&run, input, p)]).collect();
            assert_eq!(decided.len(), 1, "{input:?} {run:?}");
            assert!(input.contains(&decided.first().copied()));
        }
    }
}

#[test]
fn consensus_is_solvable_on_r1_at_two_processes() {
    let task = ValueTask::consensus(2, &[0, 1]);
    match solvability_search(&task, &AffinePattern::rk(1), 2, B).unwrap() {
        SearchOutcome::Found { iterations, map } => {
            assert_eq!(iterations, 1);
            recheck_consensus(&task, &AffinePattern::rk(1), 1, &map);
        }
        other => panic!("{other:?}"),
    }
    let twice = search_at(&task, &AffinePattern::rk(1), 2, B)
        .unwrap()
        .expect("more rounds cannot hurt");
    recheck_consensus(&task, &AffinePattern::rk(1), 2, &twice);
}

#[test]
fn consensus_is_not_solvable_on_ordered_runs_of_three() {
    let task = ValueTask::consensus(3, &[0, 1]);
    assert_eq!(
        solvability_search(&task, &ordered_pattern(), 2, B).unwrap(),
        SearchOutcome::NoSolution { up_to: 2 }
    );
}

#[test]
fn wait_free_consensus_has_no_map_at_two_processes() {
    let task = ValueTask::consensus(2, &[0, 1]);
    assert_eq!(
        solvability_search(&task, &AffinePattern::full(1), 3, B).unwrap(),
        SearchOutcome::NoSolution { up_to: 3 }
    );
    assert_eq!(
        solvability_search(&task, &AffinePattern::rk(2), 1, B).unwrap(),
        SearchOutcome::NoSolution { up_to: 1 }
    );
}

#[test]
fn echo_is_solved_in_one_iteration_everywhere() {
    for pattern in [
        ordered_pattern(),
        AffinePattern::rk(2),
        AffinePattern::full(1),
    ] {
        let task = ValueTask::echo(3, &[0, 1]);
        let SearchOutcome::Found { iterations, map } =
            solvability_search(&task, &pattern, 1, B).unwrap()
        else {
            panic!("{pattern}");
        };
        assert_eq!(iterations, 1);
        for (key, v) in map {
            let color = key.chars().next().unwrap();
            let first = key[1..].find(&format!("{color}=")).map(|i| &key[i + 3..]);
            assert!(first.is_some(), "{key}");
            let mine: u64 = first
                .unwrap()
                .chars()
                .take_while(char::is_ascii_digit)
                .collect::<String>()
                .parse()
                .unwrap();
            assert_eq!(v, mine, "{key}");
        }
    }
}

#[test]
fn search_respects_the_budget() {
    let task = ValueTask::consensus(3, &[0, 1]);
    assert!(search_at(&task, &AffinePattern::full(1), 2, 1000).is_err());
    assert!(search_at(&task, &ordered_pattern(), 1, DEFAULT_FACET_BUDGET).is_ok());
}

#[test]
fn simplex_agreement_accepts_pattern_profiles_only() {
    let r1 = SimplexAgreementTask::new(3, AffinePattern::rk(1), DEFAULT_FACET_BUDGET).unwrap();
    let r2 = SimplexAgreementTask::new(3, AffinePattern::rk(2), DEFAULT_FACET_BUDGET).unwrap();
    let all = vec![Some(()); 3];
    for run in pattern_runs_over(ProcSet::full(3), &AffinePattern::rk(2), 1) {
        let profile = r2.profile(&run);
        assert_eq!(r2.check_outputs(&all, &profile).unwrap(), Verdict::Solved);
        let in_r1 = r1.check_outputs(&all, &profile).unwrap().accepted();
        assert_eq!(in_r1, rk_affine::affine::in_rk(&run, 1));
        let partial = vec![profile[0].clone(), None, profile[2].clone()];
        assert_eq!(
            r2.check_outputs(&all, &partial).unwrap(),
            Verdict::ConsistentSoFar
        );
    }
    let interior = RunSequence::new(vec![
        OrderedPartition::from_ids(&[&[1, 2, 3]]).unwrap(),
        OrderedPartition::from_ids(&[&[1, 2, 3]]).unwrap(),
    ])
    .unwrap();
    assert!(!r2
        .check_outputs(&all, &r2.profile(&interior))
        .unwrap()
        .accepted());
    let mut swapped = r1.profile(&RunSequence::total_order(&[1, 2, 3], 2));
    swapped.swap(0, 1);
    assert!(!r1.check_outputs(&all, &swapped).unwrap().accepted());
}
