//! Re-execution of trace and counterexample files.

use crate::common::{emit, read_file, to_json, usage, CmdResult, Outcome};
use rk_affine::runtime::Trace;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

/// Accepts an Algorithm 1 JSONL trace (digests are verified), or a JSON
/// counterexample written by `alg2` or `leaders`. A violation observed on
/// replay exits with the violation code.
pub fn run(file: &Path, output: Option<&PathBuf>) -> CmdResult {
    let text = read_file(file)?;
    let (kind, recorded, observed, records) = match serde_json::from_str::<Value>(&text) {
        Ok(doc) if doc.get("command").is_some() => {
            let recorded = doc["message"].as_str().map(str::to_string);
            let observed = match doc["command"].as_str() {
                Some("alg2") => crate::alg2::replay_counterexample(&doc)?,
                Some("leaders") => crate::figures::replay_leaders(&doc)?,
                other => return Err(usage(format!("unknown counterexample kind {other:?}"))),
            };
            (
                doc["command"].as_str().unwrap_or_default().to_string(),
                recorded,
                observed,
                Value::Null,
            )
        }
        _ => {
            let trace = Trace::from_jsonl(&text).map_err(usage)?;
            let config = trace.config().map_err(usage)?.clone();
            if config["system"] != "alg1" {
                return Err(usage(format!(
                    "trace of unknown system {}",
                    config["system"]
                )));
            }
            let recorded = config["violation"].as_str().map(str::to_string);
            let observed = crate::alg1::replay_trace(&trace)?;
            (
                "alg1".to_string(),
                recorded,
                observed,
                json!(trace.records.len()),
            )
        }
    };
    let report = json!({
        "command": "replay",
        "file": file.display().to_string(),
        "kind": kind,
        "records": records,
        "recorded": recorded,
        "observed": observed,
        "reproduced": recorded.is_some() && recorded == observed,
    });
    emit(&to_json(&report), output)?;
    Ok(if observed.is_some() {
        Outcome::Violated
    } else {
        Outcome::Holds
    })
}
