use rk_affine::alg_kconc::*;
use rk_affine::runtime::{
    explore_states, fair_run, run_schedule, seeded_run, Bound, Event, System,
};
use rk_affine::ProcessId;
use serde_json::{json, Value};
use std::collections::BTreeMap;

const DEPTH: usize = 100_000;

fn sys(n: usize, k: usize, rounds: usize) -> Alg1System<HashProgram> {
    Alg1System::standalone(HashProgram, n, k, rounds)
}

fn every_round_commits(s: &Alg1System<HashProgram>) -> Result<(), String> {
    if s.committed_rounds() < s.rounds_started() {
        return Err(format!(
            "{} of {} rounds committed",
            s.committed_rounds(),
            s.rounds_started()
        ));
    }
    Ok(())
}

#[test]
fn claims_hold_exhaustively_on_small_systems() {
    for (n, k, rounds) in [(2, 1, 3), (2, 2, 3), (3, 1, 3), (3, 2, 1)] {
        let stats = explore_states(&sys(n, k, rounds), Bound::wait_free(DEPTH), |_, s| {
            if !s.is_finished() {
                return Err("a simulator is stuck".into());
            }
            every_round_commits(s)
        })
        .unwrap_or_else(|v| panic!("n={n} k={k}: {} after {} events", v.message, v.path.len()));
        assert_eq!(stats.truncated, 0);
        assert!(stats.terminals > 0);
    }
}

/// The register semantics the simulated memory must present, rebuilt from
/// the operations a trace records: writes to a slot arrive with counters
/// 0, 1, 2, ..., a repeated counter repeats its value, and each snapshot
/// returns the latest value of every slot.
fn check_register_history(k: usize, ops: &[Value]) -> Result<usize, String> {
    let mut last: Vec<Option<(i64, Value)>> = vec![None; k];
    let mut applied = 0;
    for op in ops {
        match op["op"].as_str() {
            Some("update") => {
                let slot = op["slot"].as_u64().unwrap() as usize - 1;
                let c = op["counter"].as_i64().unwrap();
                let v = op["value"].clone();
                match &last[slot] {
                    Some((lc, _)) if c < *lc => {}
                    Some((lc, lv)) if c == *lc => {
                        if *lv != v {
                            return Err(format!("slot {} counter {c} has two values", slot + 1));
                        }
                    }
                    prev => {
                        let expected = prev.as_ref().map_or(0, |(lc, _)| lc + 1);
                        if c != expected {
                            return Err(format!("slot {} jumped to counter {c}", slot + 1));
                        }
                        last[slot] = Some((c, v));
                        applied += 1;
                    }
                }
            }
            Some("snapshot") => {
                let memory: Vec<Value> = last
                    .iter()
                    .map(|e| e.as_ref().map_or(Value::Null, |(_, v)| v.clone()))
                    .collect();
                if op["view"].as_array() != Some(&memory) {
                    return Err(format!("snapshot {} but memory {memory:?}", op["view"]));
                }
                applied += 1;
            }
            _ => {}
        }
    }
    Ok(applied)
}

fn recorded_ops(s: &Alg1System<HashProgram>, path: &[Event]) -> Vec<Value> {
    let (_, trace) = run_schedule(s, json!({}), path).unwrap();
    trace
        .records
        .iter()
        .skip(1)
        .map(|r| r.args["effect"].clone())
        .collect()
}

#[test]
fn seeded_histories_are_register_histories() {
    for (n, k) in [(2, 2), (3, 1), (3, 2)] {
        let s = sys(n, k, 3);
        for seed in 0..60 {
            let (end, path) = seeded_run(&s, Bound::wait_free(DEPTH), seed).unwrap();
            every_round_commits(&end).unwrap();
            let ops = recorded_ops(&s, &path);
            let applied = check_register_history(k, &ops)
                .unwrap_or_else(|e| panic!("n={n} k={k} seed={seed}: {e}"));
            assert!(applied > 0);
            let typed: Vec<Alg1Op<u64>> = ops
                .iter()
                .filter(|o| matches!(o["op"].as_str(), Some("update" | "snapshot")))
                .map(|o| serde_json::from_value(o.clone()).unwrap())
                .collect();
            assert_eq!(linearize_alg1(k, &typed).unwrap().len(), applied);
        }
    }
}

#[test]
fn write_counters_never_decrease_and_end_at_the_validated_count() {
    let s = sys(3, 2, 3);
    for seed in 0..30 {
        let (_, path) = seeded_run(&s, Bound::wait_free(DEPTH), seed).unwrap();
        let mut cur = s.clone();
        let mut prev: BTreeMap<usize, Vec<i64>> = BTreeMap::new();
        for e in &path {
            cur.apply(e.pid, &e.action).unwrap();
            for p in 1..=3 {
                let wc = cur.write_counters(ProcessId::of(p)).to_vec();
                let before = prev.insert(p, wc.clone()).unwrap_or(vec![0; 2]);
                assert!(before.iter().zip(&wc).all(|(a, b)| a <= b));
            }
        }
        let top: Vec<usize> = (0..2)
            .map(|m| {
                (1..=3)
                    .map(|p| cur.write_counters(ProcessId::of(p))[m])
                    .max()
                    .unwrap() as usize
            })
            .collect();
        assert_eq!(cur.validated_writes(), top);
    }
}

#[test]
fn linearizer_rejects_a_skipped_counter_and_a_stale_snapshot() {
    let skip = vec![
        Alg1Op::Update {
            sim: 1,
            slot: 1,
            counter: 0,
            value: 1u64,
        },
        Alg1Op::Update {
            sim: 2,
            slot: 1,
            counter: 2,
            value: 3,
        },
    ];
    assert!(linearize_alg1(1, &skip).is_err());
    let stale = vec![
        Alg1Op::Update {
            sim: 1,
            slot: 1,
            counter: 0,
            value: 1u64,
        },
        Alg1Op::Update {
            sim: 1,
            slot: 1,
            counter: 1,
            value: 2,
        },
        Alg1Op::Snapshot {
            sim: 2,
            slot: 1,
            view: vec![Some(1)],
        },
    ];
    assert_eq!(linearize_alg1(1, &stale).unwrap_err().0, 2);
    let rewrite = vec![
        Alg1Op::Update {
            sim: 1,
            slot: 1,
            counter: 0,
            value: 1u64,
        },
        Alg1Op::Update {
            sim: 2,
            slot: 1,
            counter: 0,
            value: 7,
        },
    ];
    assert!(linearize_alg1(1, &rewrite).is_err());
    assert!(check_register_history(
        1,
        &[json!({"op": "update", "slot": 1, "counter": 1, "value": 4})]
    )
    .is_err());
}

#[test]
fn literal_commit_rule_writes_two_values_for_one_counter() {
    let literal = sys(3, 2, 3).with_commit_rule(CommitRule::Literal);
    let v = seeded_run(&literal, Bound::wait_free(DEPTH), 157).unwrap_err();
    assert!(v.message.contains("slot 1 counter 2"), "{}", v.message);
    assert_eq!(v.path.len(), 54);

    // The offline oracle sees the same conflict in the recorded operations.
    let ops = recorded_ops(&literal, &v.path);
    assert!(check_register_history(2, &ops).is_err());

    // The default rule survives the schedule prefix, and the full seeded run.
    let adopted = sys(3, 2, 3);
    let mut s = adopted.clone();
    for e in &v.path {
        if s.apply(e.pid, &e.action).is_err() {
            break;
        }
        s.check().unwrap();
    }
    seeded_run(&adopted, Bound::wait_free(DEPTH), 157).unwrap();
}

#[test]
fn progress_gap_stays_within_twice_the_simulators() {
    for (n, k) in [(2, 1), (2, 2), (3, 1), (3, 2)] {
        let s = sys(n, k, 3);
        let mut paths = vec![fair_run(&s, Bound::wait_free(DEPTH)).unwrap().1];
        paths
            .extend((1..=100).map(|seed| seeded_run(&s, Bound::wait_free(DEPTH), seed).unwrap().1));
        let worst = paths
            .iter()
            .map(|p| alg1_progress_gap(&s, p).unwrap())
            .max()
            .unwrap();
        assert!(worst <= 2 * n, "n={n} k={k}: gap {worst}");
        assert!(worst >= 1);
    }
}

fn at_most(k: usize) -> impl Fn(&[Option<u64>], &BTreeMap<usize, u64>) -> Result<(), String> {
    move |inputs, outs| {
        let distinct: std::collections::BTreeSet<u64> = outs.values().copied().collect();
        if distinct.iter().any(|v| !inputs.contains(&Some(*v))) {
            return Err(format!("invalid decision in {outs:?}"));
        }
        if distinct.len() > k {
            return Err(format!("{} distinct decisions", distinct.len()));
        }
        Ok(())
    }
}

#[test]
fn k_concurrent_protocols_run_on_the_simulation() {
    for k in 1..=2 {
        for seed in 0..15 {
            let r = solve_k_concurrently(
                AdoptFirstDecision,
                k,
                vec![Some(10), Some(20), Some(30)],
                Schedule::Seeded(seed),
                Bound::wait_free(50_000),
                at_most(k),
            )
            .unwrap_or_else(|v| panic!("k={k} seed={seed}: {}", v.message));
            assert!(r.complete, "k={k} seed={seed}");
        }
    }
    let r = solve_k_concurrently(
        EchoClient,
        2,
        vec![Some(4), None, Some(6)],
        Schedule::Fair,
        Bound::wait_free(50_000),
        |_, _| Ok(()),
    )
    .unwrap();
    assert_eq!(r.outputs, BTreeMap::from([(1, 4), (3, 6)]));
}

#[test]
fn simulated_concurrency_stays_within_the_slot_count() {
    let s = KConcSystem::new(AdoptFirstDecision, 2, vec![Some(1), Some(2), Some(3)], 40);
    for seed in 0..10 {
        let (_, path) = seeded_run(&s, Bound::wait_free(50_000), seed).unwrap();
        let mut cur = s.clone();
        for e in &path {
            cur.apply(e.pid, &e.action).unwrap();
            assert!(cur.simulated_concurrency().unwrap() <= 2);
        }
    }
}
