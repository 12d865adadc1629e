use super::run;
use serde_json::Value;
use std::collections::BTreeSet;
use std::path::Path;

/// Runs `rk` with every relative path flag resolved inside `dir`.
fn rk(dir: &Path, args: &[&str]) -> u8 {
    let mut argv = vec!["rk".to_string()];
    let mut prev = "";
    for a in args {
        let path_flag = matches!(
            prev,
            "--output" | "--counterexample" | "--trace-out" | "replay"
        );
        argv.push(if path_flag {
            dir.join(a).display().to_string()
        } else {
            a.to_string()
        });
        prev = a;
    }
    run(argv)
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&read(dir, name)).unwrap()
}

#[test]
fn chr_emits_the_second_subdivision() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        rk(
            d,
            &["chr", "--n", "3", "--m", "2", "--out", "json", "--output", "c.json"]
        ),
        0
    );
    let v = json(d, "c.json");
    assert_eq!(v["facets"].as_array().unwrap().len(), 169);
    let colors: BTreeSet<u64> = v["vertices"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x["color"].as_u64().unwrap())
        .collect();
    assert_eq!(colors, [1, 2, 3].into());
}

#[test]
fn rk_svg_fills_the_total_orders() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        rk(
            d,
            &["rk", "--n", "3", "--k", "1", "--out", "svg", "--output", "r1.svg"]
        ),
        0
    );
    let svg = read(d, "r1.svg");
    let polygons: Vec<&str> = svg.lines().filter(|l| l.contains("<polygon")).collect();
    assert_eq!(polygons.len(), 169);
    let background = polygons
        .iter()
        .filter(|l| l.contains("fill=\"#f4f4f4\""))
        .count();
    assert_eq!(polygons.len() - background, 6);
}

#[test]
fn alg2_exhaustive_agreement_holds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "alg2",
        "--n",
        "3",
        "--k",
        "2",
        "--client",
        "kset",
        "--stream",
        "exhaustive",
        "--rounds",
        "6",
        "--check",
        "agreement",
        "--output",
        "a.json",
    ];
    assert_eq!(rk(d, &args), 0);
    assert_eq!(json(d, "a.json")["verdicts"]["agreement"]["holds"], true);
}

#[test]
fn a_violation_exits_one_and_its_counterexample_replays() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "alg1",
        "--n",
        "3",
        "--k",
        "2",
        "--schedule",
        "seed:157",
        "--commit-rule",
        "literal",
        "--check",
        "claims",
        "--output",
        "r.json",
        "--counterexample",
        "ce.jsonl",
    ];
    assert_eq!(rk(d, &args), 1);
    let message = json(d, "r.json")["verdicts"]["claims"]["message"]
        .as_str()
        .unwrap()
        .to_string();
    assert!(message.contains("slot 1 counter 2"), "{message}");
    assert_eq!(rk(d, &["replay", "ce.jsonl", "--output", "replay.json"]), 1);
    assert_eq!(json(d, "replay.json")["reproduced"], true);

    let args = [
        "leaders",
        "--n",
        "4",
        "--k",
        "2",
        "--output",
        "l.json",
        "--counterexample",
        "ce.json",
    ];
    assert_eq!(rk(d, &args), 1);
    assert_eq!(json(d, "l.json")["holds"], false);
    assert_eq!(rk(d, &["replay", "ce.json", "--output", "replay.json"]), 1);
    assert_eq!(json(d, "replay.json")["reproduced"], true);
}

#[test]
fn a_clean_trace_replays_and_a_tampered_one_does_not() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "alg1",
        "--n",
        "2",
        "--k",
        "1",
        "--schedule",
        "seed:3",
        "--depth",
        "2",
        "--trace-out",
        "t.jsonl",
        "--output",
        "r.json",
    ];
    assert_eq!(rk(d, &args), 0);
    assert_eq!(rk(d, &["replay", "t.jsonl", "--output", "replay.json"]), 0);
    assert_eq!(json(d, "replay.json")["reproduced"], false);

    let mut lines: Vec<String> = read(d, "t.jsonl").lines().map(String::from).collect();
    let mut rec: Value = serde_json::from_str(&lines[3]).unwrap();
    rec["stateDigest"] = Value::from("0000000000000000");
    lines[3] = rec.to_string();
    std::fs::write(d.join("bad.jsonl"), lines.join("\n") + "\n").unwrap();
    assert_ne!(
        rk(d, &["replay", "bad.jsonl", "--output", "replay.json"]),
        0
    );
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for args in [
        &["bogus"][..],
        &["chr", "--n", "0", "--m", "1"],
        &["rk", "--n", "3", "--k", "5"],
        &["alg2", "--n", "3", "--k", "2", "--stream", "nonsense"],
        &[
            "solve",
            "--task",
            "file:/nonexistent/task.json",
            "--pattern",
            "ordered",
        ],
        &["replay", "missing.jsonl"],
    ] {
        assert_eq!(rk(d, args), 2, "{args:?}");
    }
}

#[test]
fn solve_and_connectivity_report_the_small_cases() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "solve",
        "--task",
        "consensus",
        "--n",
        "2",
        "--pattern",
        "rk:1",
        "--max-rounds",
        "1",
        "--output",
        "f.json",
    ];
    assert_eq!(rk(d, &args), 0);
    assert_eq!(json(d, "f.json")["outcome"]["iterations"], 1);
    let args = [
        "solve",
        "--task",
        "consensus",
        "--n",
        "3",
        "--pattern",
        "ordered",
        "--output",
        "n.json",
    ];
    assert_eq!(rk(d, &args), 0);
    assert_eq!(json(d, "n.json")["outcome"]["result"], "no-solution");
    assert_eq!(
        rk(
            d,
            &[
                "connectivity",
                "--n",
                "3",
                "--t-max",
                "2",
                "--output",
                "c.json"
            ]
        ),
        0
    );
    assert_eq!(json(d, "c.json")["allConnected"], true);
}

#[test]
fn outputs_are_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cmds: [&[&str]; 4] = [
        &["chr", "--n", "3", "--m", "2", "--out", "svg"],
        &["contention", "--n", "3", "--k", "2"],
        &["alg1", "--n", "3", "--k", "2", "--schedule", "seed:9"],
        &[
            "alg2", "--n", "3", "--k", "2", "--stream", "seed:4", "--rounds", "20",
        ],
    ];
    for args in cmds {
        for out in ["a.out", "b.out"] {
            let mut full = args.to_vec();
            full.extend(["--output", out]);
            assert_eq!(rk(d, &full), 0, "{args:?}");
        }
        assert_eq!(read(d, "a.out"), read(d, "b.out"), "{args:?}");
    }
}
