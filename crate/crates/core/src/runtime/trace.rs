use super::{Action, Event, RuntimeError, Status, System};
use crate::procset::{ProcSet, ProcessId};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// One line of a trace file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceRecord {
    pub seq: u64,
    pub pid: Option<usize>,
    pub kind: String,
    pub args: Value,
    pub state_digest: String,
}

/// The first record (`kind = "init"`) carries the configuration needed to
/// rebuild the initial state; each later record is one event.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("trace line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("trace has no init record")]
    MissingInit,
    #[error("record {seq}: malformed event")]
    MalformedEvent { seq: u64 },
    #[error("record {seq}: digest {found} differs from recorded {expected}")]
    DigestMismatch {
        seq: u64,
        expected: String,
        found: String,
    },
    #[error("record {seq}: {source}")]
    Runtime { seq: u64, source: RuntimeError },
}

/// First 8 bytes of the SHA-256 of the state's JSON serialization, in hex.
pub fn state_digest<S: Serialize>(s: &S) -> String {
    let bytes = serde_json::to_vec(s).expect("states serialize");
    let h = Sha256::digest(&bytes);
    h[..8].iter().map(|b| format!("{b:02x}")).collect()
}

impl Trace {
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("records serialize"));
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<Self, ReplayError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            records.push(
                serde_json::from_str(line).map_err(|source| ReplayError::Parse {
                    line: i + 1,
                    source,
                })?,
            );
        }
        Ok(Self { records })
    }

    pub fn config(&self) -> Result<&Value, ReplayError> {
        match self.records.first() {
            Some(r) if r.kind == "init" => Ok(&r.args),
            _ => Err(ReplayError::MissingInit),
        }
    }

    pub fn events(&self) -> Result<Vec<Event>, ReplayError> {
        self.records
            .iter()
            .skip(1)
            .map(|r| {
                let pid = r.pid.and_then(ProcessId::new);
                let action: Option<Action> = serde_json::from_value(r.args["action"].clone()).ok();
                match (pid, action) {
                    (Some(pid), Some(action)) => Ok(Event { pid, action }),
                    _ => Err(ReplayError::MalformedEvent { seq: r.seq }),
                }
            })
            .collect()
    }
}

fn kind_of(a: &Action) -> &'static str {
    match a {
        Action::Step => "step",
        Action::Block(_) => "block",
        Action::Choose(_) => "choose",
    }
}

fn status_set<S: System>(s: &S, st: Status) -> ProcSet {
    ProcessId::all(s.n())
        .filter(|&p| s.status(p) == st)
        .collect()
}

/// Applies `events` in order, recording a trace. On error the trace up to
/// the failing event is returned alongside it.
pub fn run_schedule<S: System>(
    init: &S,
    config: Value,
    events: &[Event],
) -> Result<(S, Trace), (RuntimeError, Trace)> {
    let mut s = init.clone();
    let mut trace = Trace {
        records: vec![TraceRecord {
            seq: 0,
            pid: None,
            kind: "init".into(),
            args: config,
            state_digest: state_digest(&s),
        }],
    };
    for (i, e) in events.iter().enumerate() {
        let idle = status_set(&s, Status::Idle);
        let done = status_set(&s, Status::Done);
        let effect = match s.apply(e.pid, &e.action) {
            Ok(v) => v,
            Err(err) => return Err((err, trace)),
        };
        let invoked = idle.difference(status_set(&s, Status::Idle));
        let returned = status_set(&s, Status::Done).difference(done);
        trace.records.push(TraceRecord {
            seq: i as u64 + 1,
            pid: Some(e.pid.get()),
            kind: kind_of(&e.action).into(),
            args: json!({
                "action": e.action,
                "effect": effect,
                "invoked": invoked,
                "returned": returned,
            }),
            state_digest: state_digest(&s),
        });
    }
    Ok((s, trace))
}

/// Re-executes a trace from `init` and checks every digest.
pub fn replay<S: System>(init: &S, trace: &Trace) -> Result<S, ReplayError> {
    let first = trace.records.first().ok_or(ReplayError::MissingInit)?;
    let found = state_digest(init);
    if found != first.state_digest {
        return Err(ReplayError::DigestMismatch {
            seq: 0,
            expected: first.state_digest.clone(),
            found,
        });
    }
    let mut s = init.clone();
    for (r, e) in trace.records.iter().skip(1).zip(trace.events()?) {
        s.apply(e.pid, &e.action)
            .map_err(|source| ReplayError::Runtime { seq: r.seq, source })?;
        let found = state_digest(&s);
        if found != r.state_digest {
            return Err(ReplayError::DigestMismatch {
                seq: r.seq,
                expected: r.state_digest.clone(),
                found,
            });
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{seeded_schedule, Bound, Echo, OneShotIs};

    #[test]
    fn round_trip_and_replay() {
        let sys = OneShotIs::new(3, ProcSet::full(3));
        let events = seeded_schedule(&sys, Bound::wait_free(10), 7).unwrap();
        let (end, trace) = run_schedule(&sys, json!({"system": "is"}), &events).unwrap();
        let text = trace.to_jsonl();
        let back = Trace::from_jsonl(&text).unwrap();
        assert_eq!(back, trace);
        assert_eq!(back.events().unwrap(), events);
        assert_eq!(replay(&sys, &back).unwrap(), end);
        let (_, again) = run_schedule(&sys, json!({"system": "is"}), &events).unwrap();
        assert_eq!(again.to_jsonl(), text);
    }

    #[test]
    fn tampered_digest_is_caught() {
        let sys = Echo::new(vec![Some(1), Some(2)]);
        let events = vec![Event::step(1), Event::step(2), Event::step(1)];
        let (_, mut trace) = run_schedule(&sys, Value::Null, &events).unwrap();
        trace.records[2].state_digest = "0000000000000000".into();
        assert!(matches!(
            replay(&sys, &trace),
            Err(ReplayError::DigestMismatch { seq: 2, .. })
        ));
    }

    #[test]
    fn invoked_and_returned_are_recorded() {
        let sys = OneShotIs::new(2, ProcSet::full(2));
        let events = vec![
            Event::step(1),
            Event::step(2),
            Event {
                pid: ProcessId::of(1),
                action: Action::Block(ProcSet::full(2)),
            },
        ];
        let (_, trace) = run_schedule(&sys, Value::Null, &events).unwrap();
        assert_eq!(trace.records[1].args["invoked"], json!([1]));
        assert_eq!(trace.records[3].args["returned"], json!([1, 2]));
    }
}
