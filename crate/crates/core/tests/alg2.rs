use rk_affine::alg_rk::*;
use rk_affine::subdivision::RunViews;
use rk_affine::{OrderedPartition, ProcSet, ProcessId, RunSequence};
use std::collections::{BTreeMap, BTreeSet};

fn inputs(n: usize) -> Vec<Option<u64>> {
    (1..=n as u64).map(Some).collect()
}

/// Validity and the distinct-value bound on final outputs.
fn agreement_oracle(
    inputs: &[Option<u64>],
    outs: &BTreeMap<usize, u64>,
    k: usize,
) -> Result<(), String> {
    let proposed: BTreeSet<u64> = inputs.iter().flatten().copied().collect();
    let decided: BTreeSet<u64> = outs.values().copied().collect();
    if !decided.is_subset(&proposed) {
        return Err(format!("decided {decided:?} from {proposed:?}"));
    }
    if decided.len() > k {
        return Err(format!("{} distinct decisions: {decided:?}", decided.len()));
    }
    Ok(())
}

#[test]
fn k_set_agreement_holds_on_every_stream_at_three_processes() {
    for k in 1..=2 {
        let ins = inputs(3);
        let sys = Alg2System::new(KSetClient, k, ins.clone());
        let stats = explore_streams(&sys, 6, |s| {
            agreement_oracle(&ins, &s.outputs(), k)?;
            s.decisions()
                .values()
                .all(|d| d.len() <= k)
                .then_some(())
                .ok_or("ghost decisions".to_string())
        })
        .unwrap_or_else(|v| panic!("k={k}: {} after {} rounds", v.message, v.stream.len()));
        assert!(stats.finished > 0);
        assert!(stats.max_wait <= 2 * 3, "k={k}: wait {}", stats.max_wait);
    }
}

#[test]
fn consensus_at_two_processes_is_exhaustively_safe() {
    let ins = vec![Some(7), Some(9)];
    let sys = Alg2System::new(KSetClient, 1, ins.clone());
    let stats = explore_streams(&sys, 8, |s| agreement_oracle(&ins, &s.outputs(), 1)).unwrap();
    assert_eq!(
        stats.truncated, 0,
        "every R_1 stream at n=2 decides within 8 rounds"
    );
}

#[test]
fn undecided_only_participation_is_safe() {
    let ins = inputs(3);
    let sys =
        Alg2System::new(KSetClient, 2, ins.clone()).with_participation(Participation::Undecided);
    explore_streams(&sys, 6, |s| agreement_oracle(&ins, &s.outputs(), 2)).unwrap();
}

#[test]
fn echo_writer_reads_its_own_write() {
    let ins = vec![Some(5), None, Some(8)];
    let sys = Alg2System::new(EchoWriter, 2, ins.clone());
    explore_streams(&sys, 6, |s| {
        for (p, o) in s.outputs() {
            if Some(o) != ins[p - 1] {
                return Err(format!("process {p} read {o}"));
            }
        }
        Ok(())
    })
    .unwrap();
}

/// Single-writer atomic snapshot conditions on the returned snapshots of a
/// trace: each entry is a write issued in an earlier round, returned
/// snapshots only grow over time, and a process sees its own latest write.
fn snapshot_oracle(trace: &Alg2Trace) -> Result<usize, String> {
    let mut issued: BTreeMap<(usize, u32), (Option<u64>, usize)> = trace
        .initial
        .iter()
        .map(|&(p, v)| ((p, 1), (v, 0)))
        .collect();
    let mut own: BTreeMap<usize, u32> = trace.initial.iter().map(|&(p, _)| (p, 1)).collect();
    let mut last: Option<Vec<u32>> = None;
    let mut returned = 0;
    for rec in &trace.rounds {
        for &p in &rec.returned {
            let (_, snap) = rec
                .validated
                .iter()
                .find(|(q, _)| *q == p)
                .ok_or(format!("round {}: {p} returned unvalidated", rec.round))?;
            for (m, &(c, v)) in snap.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                match issued.get(&(m + 1, c)) {
                    Some(&(w, r)) if w == v && r < rec.round => {}
                    _ => {
                        return Err(format!(
                            "round {}: entry {m} = ({c}, {v:?}) was never written before",
                            rec.round
                        ))
                    }
                }
            }
            let counters: Vec<u32> = snap.iter().map(|s| s.0).collect();
            if let Some(prev) = &last {
                if prev.iter().zip(&counters).any(|(a, b)| b < a) {
                    return Err(format!("round {}: snapshot went back in time", rec.round));
                }
            }
            if counters[p - 1] != own[&p] {
                return Err(format!("round {}: {p} misses its own write", rec.round));
            }
            last = Some(counters);
            returned += 1;
        }
        for &(p, c, v) in &rec.issued {
            issued.insert((p, c), (v, rec.round));
            own.insert(p, c);
        }
    }
    Ok(returned)
}

fn script() -> ScriptClient {
    ScriptClient {
        ops: vec![
            ScriptOp::WriteMin,
            ScriptOp::Write,
            ScriptOp::WriteMin,
            ScriptOp::Agree { object: 0 },
        ],
        max_distinct: Some(2),
    }
}

#[test]
fn seeded_script_runs_give_atomic_snapshots() {
    let mut returned = 0;
    for seed in 0..200 {
        let sys = Alg2System::new(script(), 2, inputs(3));
        let r = simulate_in_rkstar(&sys, &StreamSource::Seeded(seed), 40)
            .unwrap_or_else(|v| panic!("seed {seed}: {}", v.message));
        assert!(r.complete, "seed {seed}");
        agreement_oracle(&inputs(3), &r.outputs, 2).unwrap();
        returned += snapshot_oracle(&r.trace).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        let history = alg2_snapshot_linearization(&r.trace).unwrap();
        check_sequential(3, &history).unwrap();
    }
    assert!(returned > 200 * 3);
}

#[test]
fn a_forged_snapshot_is_rejected() {
    let sys = Alg2System::new(script(), 2, inputs(3));
    let r = simulate_in_rkstar(&sys, &StreamSource::Seeded(3), 40).unwrap();
    let (i, j) = r
        .trace
        .rounds
        .iter()
        .enumerate()
        .find_map(|(i, rec)| (!rec.returned.is_empty()).then_some((i, rec.returned[0])))
        .unwrap();
    let mut forged = r.trace.clone();
    for (_, snap) in forged.rounds[i].validated.iter_mut() {
        snap[j - 1].1 = Some(999);
    }
    assert!(alg2_snapshot_linearization(&forged).is_err());
    assert!(snapshot_oracle(&forged).is_err());

    let mut split = r.trace.clone();
    let rec = &mut split.rounds[i];
    if rec.validated.len() > 1 {
        rec.validated[1].1[j - 1].0 += 1;
        assert!(alg2_snapshot_linearization(&split).is_err());
    }
}

#[test]
fn replaying_a_stream_reproduces_the_trace() {
    let sys = Alg2System::new(KSetClient, 2, inputs(3));
    let a = simulate_in_rkstar(&sys, &StreamSource::Seeded(42), 30).unwrap();
    let stream: Vec<RunSequence> = a.trace.rounds.iter().map(|r| r.run.clone()).collect();
    let b = simulate_in_rkstar(&sys, &StreamSource::Replay(stream), 30).unwrap();
    assert_eq!(a, b);
}

#[test]
fn streams_outside_rk_are_refused() {
    let mut sys = Alg2System::new(KSetClient, 1, inputs(3));
    let concurrent = RunSequence::new(vec![
        OrderedPartition::from_ids(&[&[1, 2, 3]]).unwrap(),
        OrderedPartition::from_ids(&[&[1, 2, 3]]).unwrap(),
    ])
    .unwrap();
    assert!(sys.step(&concurrent).is_err());
    let partial = RunSequence::total_order(&[1, 2], 2);
    assert!(sys.step(&partial).is_err());
    assert!(sys.step(&RunSequence::total_order(&[2, 1, 3], 2)).is_ok());
}

#[test]
fn designated_process_has_the_smallest_second_view() {
    let run = RunSequence::new(vec![
        OrderedPartition::from_ids(&[&[1, 2, 3]]).unwrap(),
        OrderedPartition::from_ids(&[&[2, 3], &[1]]).unwrap(),
    ])
    .unwrap();
    let v = RunViews::new(&run);
    assert_eq!(designated(&v, ProcSet::full(3)), Some(ProcessId::of(2)));
    assert_eq!(
        designated(&v, ProcSet::from_ids([1, 3])),
        Some(ProcessId::of(3))
    );
    assert_eq!(designated(&v, ProcSet::EMPTY), None);
}

#[test]
fn seeded_streams_terminate() {
    for k in 1..=3 {
        for seed in 0..100 {
            let sys = Alg2System::new(KSetClient, k, inputs(3));
            let r = simulate_in_rkstar(&sys, &StreamSource::Seeded(seed), 60).unwrap();
            assert!(r.complete, "k={k} seed={seed}");
            agreement_oracle(&inputs(3), &r.outputs, k).unwrap();
        }
    }
}

/// Where the missing visible leader at four processes shows up in the
/// algorithm: a stream of R_2 facets on which three values are decided.
#[test]
fn four_processes_two_slots_pinned_disagreement() {
    let sys = Alg2System::new(KSetClient, 2, inputs(4));
    let v = simulate_in_rkstar(&sys, &StreamSource::Seeded(581), 30).unwrap_err();
    assert!(v.message.contains("3 distinct decisions"), "{}", v.message);
    assert_eq!(v.stream.len(), 7);
    let replayed =
        simulate_in_rkstar(&sys, &StreamSource::Replay(v.stream.clone()), 30).unwrap_err();
    assert_eq!(replayed, v);
}
