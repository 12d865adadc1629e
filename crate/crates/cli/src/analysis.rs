//! Solvability search and connectivity reports.

use crate::common::{
    budget, emit, read_file, tagged, to_json, usage, CmdResult, Outcome, UsageError,
};
use rk_affine::affine::{consensus_obstruction_report, AffinePattern};
use rk_affine::tasks::{solvability_search, Builtin, ValueTask};
use serde_json::json;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TaskSpec {
    Builtin(Builtin),
    File(PathBuf),
}

impl FromStr for TaskSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "consensus" => return Ok(Self::Builtin(Builtin::Consensus)),
            "echo" => return Ok(Self::Builtin(Builtin::Echo)),
            _ => {}
        }
        if let Some(p) = tagged(s, "file") {
            return Ok(Self::File(p.into()));
        }
        match tagged(s, "kset").map(str::parse) {
            Some(Ok(k)) if k > 0 => Ok(Self::Builtin(Builtin::KSet(k))),
            _ => Err(format!(
                "expected consensus, echo, kset:<k> or file:<path>, got {s:?}"
            )),
        }
    }
}

/// `ordered`, `rk:<k>`, `ktas:<k>` or `chr:<rounds>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternSpec(pub AffinePattern);

impl FromStr for PatternSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "ordered" {
            return Ok(Self(AffinePattern::ordered()));
        }
        let num = |tag: &str| {
            tagged(s, tag)
                .and_then(|v| v.parse::<usize>().ok())
                .filter(|&v| v > 0)
        };
        if let Some(k) = num("rk") {
            return Ok(Self(AffinePattern::rk(k)));
        }
        if let Some(k) = num("ktas") {
            return Ok(Self(AffinePattern::k_test_and_set(k)));
        }
        if let Some(r) = num("chr") {
            return Ok(Self(AffinePattern::full(r)));
        }
        Err(format!(
            "expected ordered, rk:<k>, ktas:<k> or chr:<rounds>, got {s:?}"
        ))
    }
}

pub fn solve(
    task: &TaskSpec,
    n: Option<usize>,
    values: &[u64],
    pattern: &PatternSpec,
    max_rounds: usize,
    output: Option<&PathBuf>,
) -> CmdResult {
    let t = match task {
        TaskSpec::Builtin(b) => {
            let n = n.ok_or_else(|| usage("--n is required for a builtin task"))?;
            if n == 0 || values.is_empty() {
                return Err(usage("need n >= 1 and at least one value"));
            }
            ValueTask::builtin(n, values, b.clone())
        }
        TaskSpec::File(p) => {
            let t = ValueTask::from_json(&read_file(p)?).map_err(usage)?;
            if n.is_some_and(|n| n != t.n) {
                return Err(UsageError(format!(
                    "--n differs from the task file's n = {}",
                    t.n
                )));
            }
            t
        }
    };
    if max_rounds == 0 {
        return Err(usage("--max-rounds must be positive"));
    }
    let outcome = solvability_search(&t, &pattern.0, max_rounds, budget()?).map_err(usage)?;
    let report = json!({
        "command": "solve",
        "n": t.n,
        "task": t.delta,
        "outputsDomain": t.outputs_domain,
        "pattern": pattern.0.name,
        "maxRounds": max_rounds,
        "outcome": outcome,
    });
    emit(&to_json(&report), output)?;
    Ok(Outcome::Holds)
}

pub fn connectivity(
    n: usize,
    pattern: &PatternSpec,
    t_max: usize,
    output: Option<&PathBuf>,
) -> CmdResult {
    if n == 0 || t_max == 0 {
        return Err(usage("n and --t-max must be positive"));
    }
    let report = consensus_obstruction_report(n, &pattern.0, t_max, budget()?).map_err(usage)?;
    emit(&to_json(&report), output)?;
    Ok(Outcome::Holds)
}
