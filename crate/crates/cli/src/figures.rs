//! Subdivisions, `R_k`, contention and leaders: JSON and SVG exports.

use crate::common::{budget, emit, to_json, usage, write_file, CmdResult, Outcome, UsageError};
use clap::ValueEnum;
use rk_affine::affine::{build_rk, facet_records, in_rk, leaders, pattern_runs, AffinePattern};
use rk_affine::subdivision::svg::{render, SvgStyle};
use rk_affine::subdivision::{chr_iter, RunViews};
use rk_affine::{ChromaticComplex, ProcSet, Simplex, Vertex};
use serde_json::json;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Svg,
}

fn check_nk(n: usize, k: usize) -> Result<(), UsageError> {
    if n == 0 || k == 0 || k > n {
        return Err(UsageError(format!(
            "need 1 <= k <= n, got n = {n}, k = {k}"
        )));
    }
    Ok(())
}

fn planar(n: usize, format: Format) -> Result<(), UsageError> {
    if format == Format::Svg && n != 3 {
        return Err(UsageError(format!("SVG output needs n = 3, got n = {n}")));
    }
    Ok(())
}

fn svg(
    c: &ChromaticComplex,
    hl: &dyn Fn(&Simplex) -> bool,
    em: &dyn Fn(&Vertex) -> bool,
) -> Result<String, UsageError> {
    render(c, &SvgStyle::default(), hl, em).map_err(usage)
}

pub fn chr(n: usize, m: usize, format: Format, output: Option<&PathBuf>) -> CmdResult {
    planar(n, format)?;
    let c = chr_iter(n, m, budget()?).map_err(usage)?;
    let text = match format {
        Format::Json => to_json(&c.to_json()),
        Format::Svg => svg(&c, &|_| false, &|_| false)?,
    };
    emit(&text, output)?;
    Ok(Outcome::Holds)
}

pub fn rk(n: usize, k: usize, format: Format, output: Option<&PathBuf>) -> CmdResult {
    check_nk(n, k)?;
    planar(n, format)?;
    let b = budget()?;
    let r = build_rk(n, k, b).map_err(usage)?;
    let text = match format {
        Format::Json => to_json(&r.to_json()),
        Format::Svg => {
            let ambient = chr_iter(n, 2, b).map_err(usage)?;
            svg(&ambient, &|s| r.contains(s), &|_| false)?
        }
    };
    emit(&text, output)?;
    Ok(Outcome::Holds)
}

pub fn contention(n: usize, k: usize, output: Option<&PathBuf>) -> CmdResult {
    check_nk(n, k)?;
    let records = facet_records(n, k, budget()?).map_err(usage)?;
    emit(
        &to_json(&json!({ "n": n, "k": k, "facets": records })),
        output,
    )?;
    Ok(Outcome::Holds)
}

/// Checks every `R_k` run over every face against every undecided subset;
/// the first failure is written to `counterexample`.
pub fn leaders_cmd(
    n: usize,
    k: usize,
    format: Format,
    output: Option<&PathBuf>,
    counterexample: &Path,
) -> CmdResult {
    check_nk(n, k)?;
    planar(n, format)?;
    let b = budget()?;
    let full = ProcSet::full(n);
    let runs = pattern_runs(n, &AffinePattern::rk(k), 1, b).map_err(usage)?;
    let mut checked = 0usize;
    let mut max_leaders = 0usize;
    let mut records = Vec::new();
    let mut emphasized = BTreeSet::new();
    for run in &runs {
        for undecided in run.participants().subsets() {
            match leaders(run, undecided, k) {
                Ok(l) => {
                    checked += 1;
                    max_leaders = max_leaders.max(l.leaders.len());
                    if undecided == full {
                        if let Some(v) = l.visible_leader {
                            emphasized.insert(RunViews::new(run).vertex(v));
                        }
                        records.push(json!({
                            "run": run,
                            "leaders": l.leaders,
                            "visibleLeader": l.visible_leader,
                        }));
                    }
                }
                Err(e) => {
                    let message = e.to_string();
                    let cx = json!({
                        "command": "leaders",
                        "n": n,
                        "k": k,
                        "run": run,
                        "undecided": undecided,
                        "message": message,
                    });
                    write_file(counterexample, &to_json(&cx))?;
                    let report = json!({
                        "command": "leaders",
                        "n": n,
                        "k": k,
                        "holds": false,
                        "message": message,
                        "counterexample": counterexample.display().to_string(),
                    });
                    emit(&to_json(&report), output)?;
                    return Ok(Outcome::Violated);
                }
            }
        }
    }
    let text = match format {
        Format::Json => to_json(&json!({
            "command": "leaders",
            "n": n,
            "k": k,
            "holds": true,
            "runs": runs.len(),
            "checked": checked,
            "maxLeaders": max_leaders,
            "facets": records,
        })),
        Format::Svg => {
            let ambient = chr_iter(n, 2, b).map_err(usage)?;
            let r = build_rk(n, k, b).map_err(usage)?;
            svg(&ambient, &|s| r.contains(s), &|v| emphasized.contains(v))?
        }
    };
    emit(&text, output)?;
    Ok(Outcome::Holds)
}

/// Recomputes a leaders counterexample.
pub fn replay_leaders(doc: &serde_json::Value) -> Result<Option<String>, UsageError> {
    let k = doc["k"]
        .as_u64()
        .ok_or_else(|| usage("counterexample without k"))? as usize;
    let run = serde_json::from_value(doc["run"].clone()).map_err(usage)?;
    let undecided = serde_json::from_value(doc["undecided"].clone()).map_err(usage)?;
    if !in_rk(&run, k) {
        return Ok(Some(format!("run is not in R_{k}")));
    }
    Ok(leaders(&run, undecided, k).err().map(|e| e.to_string()))
}
