//! Algorithm 1 (k-set consensus to k-process memory) under exhaustive or
//! seeded schedules.

use crate::common::{emit, tagged, to_json, usage, write_file, CmdResult, Outcome, UsageError};
use clap::ValueEnum;
use rk_affine::alg_kconc::{alg1_progress_gap, Alg1System, CommitRule, HashProgram};
use rk_affine::runtime::{
    explore_states, fair_run, legal_events, replay, run_schedule, seeded_run, Bound, Event,
    ReplayError, System, Trace,
};
use serde_json::{json, Map, Value};
use std::path::PathBuf;
use std::str::FromStr;

/// Events per schedule; far above what the round bound allows.
const EVENT_BOUND: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Schedule {
    Exhaustive,
    Seed(u64),
}

impl FromStr for Schedule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "exhaustive" {
            return Ok(Self::Exhaustive);
        }
        match tagged(s, "seed").map(str::parse) {
            Some(Ok(seed)) => Ok(Self::Seed(seed)),
            _ => Err(format!("expected exhaustive or seed:<u64>, got {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Alg1Check {
    Claims,
    Linearize,
    Progress,
}

impl Alg1Check {
    fn name(self) -> &'static str {
        match self {
            Self::Claims => "claims",
            Self::Linearize => "linearize",
            Self::Progress => "progress",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    AdoptedOnly,
    Literal,
}

impl From<RuleArg> for CommitRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::AdoptedOnly => CommitRule::AdoptedOnly,
            RuleArg::Literal => CommitRule::Literal,
        }
    }
}

pub struct Alg1Args {
    pub n: usize,
    pub k: usize,
    pub schedule: Schedule,
    pub depth: usize,
    pub checks: Vec<Alg1Check>,
    pub rule: RuleArg,
    pub samples: u64,
    pub trace_out: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub counterexample: PathBuf,
}

fn system_from(config: &Value) -> Result<Alg1System<HashProgram>, UsageError> {
    let get = |key: &str| {
        config[key]
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| UsageError(format!("trace config lacks {key}")))
    };
    let rule: CommitRule = serde_json::from_value(config["commitRule"].clone()).map_err(usage)?;
    Ok(
        Alg1System::standalone(HashProgram, get("n")?, get("k")?, get("rounds")?)
            .with_commit_rule(rule),
    )
}

/// Every round some simulator started had a committing first return.
fn terminal(s: &Alg1System<HashProgram>) -> Result<(), String> {
    if s.committed_rounds() < s.rounds_started() {
        return Err(format!(
            "only {} of {} rounds had a commit",
            s.committed_rounds(),
            s.rounds_started()
        ));
    }
    Ok(())
}

fn is_terminal(s: &Alg1System<HashProgram>) -> bool {
    legal_events(s, &Bound::wait_free(1)).is_empty()
}

fn property_of(message: &str) -> Alg1Check {
    if message.starts_with("linearization:") {
        Alg1Check::Linearize
    } else if message.starts_with("progress:") {
        Alg1Check::Progress
    } else {
        Alg1Check::Claims
    }
}

fn progress_bound(n: usize) -> usize {
    2 * n
}

fn gap_violation(n: usize, gap: usize) -> Option<String> {
    (gap > progress_bound(n)).then(|| {
        format!(
            "progress: {gap} agreement invocations between validated writes, bound {}",
            progress_bound(n)
        )
    })
}

pub fn run(a: Alg1Args) -> CmdResult {
    if a.n == 0 || a.k == 0 || a.depth == 0 {
        return Err(usage("n, k and depth must be positive"));
    }
    let mut checks = a.checks.clone();
    checks.sort();
    checks.dedup();
    let config = json!({
        "system": "alg1",
        "n": a.n,
        "k": a.k,
        "rounds": a.depth,
        "commitRule": CommitRule::from(a.rule),
    });
    let sys = system_from(&config)?;
    let bound = Bound::wait_free(EVENT_BOUND);
    let mut verdicts = Map::new();
    let mut stats = Value::Null;
    let mut failure: Option<(String, Vec<Event>)> = None;

    let safety = checks.iter().any(|c| *c != Alg1Check::Progress);
    match (&a.schedule, safety) {
        (Schedule::Exhaustive, true) => match explore_states(&sys, bound, |_, s| terminal(s)) {
            Ok(st) => stats = json!(st),
            Err(v) => failure = Some((v.message, v.path)),
        },
        (Schedule::Seed(seed), _) => match seeded_run(&sys, bound, *seed) {
            Ok((end, path)) => {
                let terminal_ok = if is_terminal(&end) {
                    terminal(&end)
                } else {
                    Ok(())
                };
                if let Err(m) = terminal_ok {
                    failure = Some((m, path.clone()));
                }
                stats = json!({ "events": path.len(), "finished": end.is_finished() });
                if let Some(p) = &a.trace_out {
                    let (_, trace) =
                        run_schedule(&sys, config.clone(), &path).map_err(|(e, _)| usage(e))?;
                    write_file(p, &trace.to_jsonl())?;
                }
            }
            Err(v) => failure = Some((v.message, v.path)),
        },
        _ => {}
    }

    let mut progress = Value::Null;
    if checks.contains(&Alg1Check::Progress) && failure.is_none() {
        let schedules: Vec<Vec<Event>> = match &a.schedule {
            Schedule::Seed(seed) => vec![
                seeded_run(&sys, bound, *seed)
                    .map_err(|v| usage(v.message))?
                    .1,
            ],
            Schedule::Exhaustive => {
                let mut all = vec![fair_run(&sys, bound).map_err(|v| usage(v.message))?.1];
                for seed in 1..=a.samples {
                    all.push(
                        seeded_run(&sys, bound, seed)
                            .map_err(|v| usage(v.message))?
                            .1,
                    );
                }
                all
            }
        };
        let mut worst = 0;
        for path in &schedules {
            let gap = alg1_progress_gap(&sys, path).map_err(usage)?;
            worst = worst.max(gap);
            if let Some(m) = gap_violation(a.n, gap) {
                failure = Some((m, path.clone()));
                break;
            }
        }
        progress =
            json!({ "maxGap": worst, "bound": progress_bound(a.n), "schedules": schedules.len() });
    }

    let failed = failure.as_ref().map(|(m, _)| property_of(m));
    for c in &checks {
        let mut v = Map::new();
        match failed {
            Some(f) if f == *c => {
                v.insert("holds".into(), json!(false));
                v.insert("message".into(), json!(failure.as_ref().unwrap().0));
            }
            Some(_) => {
                v.insert("holds".into(), Value::Null);
                v.insert(
                    "message".into(),
                    json!("not established: the run stopped at another violation"),
                );
            }
            None => {
                v.insert("holds".into(), json!(true));
            }
        }
        if *c == Alg1Check::Progress && !progress.is_null() {
            v.insert("measure".into(), progress.clone());
        }
        verdicts.insert(c.name().into(), Value::Object(v));
    }

    let mut report = json!({
        "command": "alg1",
        "n": a.n,
        "k": a.k,
        "depth": a.depth,
        "commitRule": CommitRule::from(a.rule),
        "schedule": match a.schedule {
            Schedule::Exhaustive => json!("exhaustive"),
            Schedule::Seed(s) => json!({ "seed": s }),
        },
        "stats": stats,
        "verdicts": verdicts,
    });
    let outcome = match failure {
        Some((message, path)) => {
            let mut cfg = config.clone();
            cfg["violation"] = json!(message);
            let (_, trace) = run_schedule(&sys, cfg, &path).map_err(|(e, _)| usage(e))?;
            write_file(&a.counterexample, &trace.to_jsonl())?;
            report["counterexample"] = json!(a.counterexample.display().to_string());
            Outcome::Violated
        }
        None => Outcome::Holds,
    };
    emit(&to_json(&report), a.output.as_ref())?;
    Ok(outcome)
}

/// Replays an Algorithm 1 trace, checking digests, and returns the
/// violation observed at its end, if any.
pub fn replay_trace(trace: &Trace) -> Result<Option<String>, UsageError> {
    let config = trace.config().map_err(usage)?;
    let sys = system_from(config)?;
    let end = match replay(&sys, trace) {
        Ok(s) => s,
        Err(e @ (ReplayError::DigestMismatch { .. } | ReplayError::Runtime { .. })) => {
            return Ok(Some(e.to_string()))
        }
        Err(e) => return Err(usage(e)),
    };
    if let Err(m) = end.check() {
        return Ok(Some(m));
    }
    if is_terminal(&end) {
        if let Err(m) = terminal(&end) {
            return Ok(Some(m));
        }
    }
    let n = config["n"].as_u64().unwrap_or(0) as usize;
    let gap = alg1_progress_gap(&sys, &trace.events().map_err(usage)?).map_err(usage)?;
    Ok(gap_violation(n, gap))
}
