use rk_affine::subdivision::DEFAULT_FACET_BUDGET;
use serde::Serialize;
use std::fmt::Display;
use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

pub const BUDGET_VAR: &str = "RK_FACET_BUDGET";

/// Anything that stops a command before it can report a verdict.
#[derive(Debug)]
pub struct UsageError(pub String);

pub type CmdResult = Result<Outcome, UsageError>;

pub fn usage(e: impl Display) -> UsageError {
    UsageError(e.to_string())
}

/// Whether every checked property held.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Holds,
    Violated,
}

pub fn budget() -> Result<usize, UsageError> {
    match std::env::var(BUDGET_VAR) {
        Ok(v) => v.trim().parse().map_err(|_| {
            UsageError(format!(
                "{BUDGET_VAR} must be a positive integer, got {v:?}"
            ))
        }),
        Err(_) => Ok(DEFAULT_FACET_BUDGET),
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

/// Writes to `path`, or to stdout without one.
pub fn emit(text: &str, path: Option<&PathBuf>) -> Result<(), UsageError> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != ErrorKind::BrokenPipe => {
                    Err(UsageError(format!("cannot write output: {e}")))
                }
                _ => Ok(()),
            }
        }
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), UsageError> {
    fs::write(path, text).map_err(|e| UsageError(format!("cannot write {}: {e}", path.display())))
}

pub fn read_file(path: &Path) -> Result<String, UsageError> {
    fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))
}

/// `prefix:rest` splitting for flag values such as `seed:7`.
pub fn tagged<'a>(s: &'a str, tag: &str) -> Option<&'a str> {
    s.strip_prefix(tag).and_then(|r| r.strip_prefix(':'))
}
