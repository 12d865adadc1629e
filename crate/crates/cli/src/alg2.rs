//! Algorithm 2 (read-write memory and k-set agreement inside `R_k*`)
//! along exhaustive, seeded or replayed facet streams.

use crate::common::{
    emit, read_file, tagged, to_json, usage, write_file, CmdResult, Outcome, UsageError,
};
use clap::ValueEnum;
use rk_affine::alg_rk::{
    explore_streams, simulate_in_rkstar, Alg2System, Client, EchoWriter, KSetClient, Participation,
    ScriptClient, StreamSource,
};
use rk_affine::subdivision::{check_budget, ordered_partition_count};
use rk_affine::tasks::{Task, ValueTask, Verdict};
use rk_affine::RunSequence;
use serde_json::{json, Map, Value};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClientSpec {
    KSet,
    Consensus,
    Echo,
    File(PathBuf),
}

impl FromStr for ClientSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "kset" => Ok(Self::KSet),
            "consensus" => Ok(Self::Consensus),
            "echo" => Ok(Self::Echo),
            _ => tagged(s, "file")
                .map(|p| Self::File(p.into()))
                .ok_or_else(|| format!("expected kset, consensus, echo or file:<path>, got {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StreamSpec {
    Exhaustive,
    Seed(u64),
    Replay(PathBuf),
}

impl FromStr for StreamSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "exhaustive" {
            return Ok(Self::Exhaustive);
        }
        if let Some(p) = tagged(s, "replay") {
            return Ok(Self::Replay(p.into()));
        }
        match tagged(s, "seed").map(str::parse) {
            Some(Ok(seed)) => Ok(Self::Seed(seed)),
            _ => Err(format!(
                "expected exhaustive, seed:<u64> or replay:<path>, got {s:?}"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Alg2Check {
    Claims,
    Agreement,
    Linearize,
    Progress,
}

impl Alg2Check {
    fn name(self) -> &'static str {
        match self {
            Self::Claims => "claims",
            Self::Agreement => "agreement",
            Self::Linearize => "linearize",
            Self::Progress => "progress",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Self::Claims,
            Self::Agreement,
            Self::Linearize,
            Self::Progress,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ParticipationArg {
    All,
    Undecided,
}

impl From<ParticipationArg> for Participation {
    fn from(p: ParticipationArg) -> Self {
        match p {
            ParticipationArg::All => Participation::All,
            ParticipationArg::Undecided => Participation::Undecided,
        }
    }
}

pub struct Alg2Args {
    pub n: usize,
    pub k: usize,
    pub client: ClientSpec,
    pub stream: StreamSpec,
    pub rounds: usize,
    pub checks: Vec<Alg2Check>,
    pub inputs: Option<Vec<u64>>,
    pub participation: ParticipationArg,
    pub trace_out: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub counterexample: PathBuf,
}

/// Everything needed to rebuild the initial system; stored in
/// counterexample files.
#[derive(Clone, Debug)]
struct Setup {
    n: usize,
    k: usize,
    client: String,
    script: Option<ScriptClient>,
    inputs: Vec<u64>,
    participation: Participation,
    rounds: usize,
    checks: Vec<Alg2Check>,
}

impl Setup {
    fn to_json(&self) -> Value {
        json!({
            "system": "alg2",
            "n": self.n,
            "k": self.k,
            "client": self.client,
            "script": self.script,
            "inputs": self.inputs,
            "participation": self.participation,
            "rounds": self.rounds,
            "checks": self.checks.iter().map(|c| c.name()).collect::<Vec<_>>(),
        })
    }

    fn from_json(v: &Value) -> Result<Self, UsageError> {
        let num = |key: &str| {
            v[key]
                .as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| UsageError(format!("config lacks {key}")))
        };
        let checks = v["checks"]
            .as_array()
            .map(|a| {
                a.iter()
                    .filter_map(|c| c.as_str().and_then(Alg2Check::parse))
                    .collect()
            })
            .unwrap_or_default();
        Ok(Self {
            n: num("n")?,
            k: num("k")?,
            client: v["client"].as_str().unwrap_or_default().to_string(),
            script: serde_json::from_value(v["script"].clone()).map_err(usage)?,
            inputs: serde_json::from_value(v["inputs"].clone()).map_err(usage)?,
            participation: serde_json::from_value(v["participation"].clone()).map_err(usage)?,
            rounds: num("rounds")?,
            checks,
        })
    }
}

/// The task property checked on final outputs.
fn agreement(setup: &Setup, inputs: &[Option<u64>], outputs: &[Option<u64>]) -> Result<(), String> {
    let task = match setup.client.as_str() {
        "kset" => ValueTask::k_set_agreement(setup.n, setup.k, &[]),
        "consensus" => ValueTask::consensus(setup.n, &[]),
        "echo" => ValueTask::echo(setup.n, &[]),
        _ => {
            let proposed: BTreeSet<u64> = inputs.iter().flatten().copied().collect();
            let decided: BTreeSet<u64> = outputs.iter().flatten().copied().collect();
            if let Some(v) = decided.iter().find(|v| !proposed.contains(v)) {
                return Err(format!("agreement: {v} was output but is nobody's input"));
            }
            let limit = setup.script.as_ref().and_then(|s| s.max_distinct);
            return match limit {
                Some(m) if decided.len() > m => Err(format!(
                    "agreement: {} distinct outputs, at most {m} allowed",
                    decided.len()
                )),
                _ => Ok(()),
            };
        }
    };
    match task.check_outputs(inputs, outputs) {
        Ok(Verdict::Rejected(why)) => Err(format!("agreement: {why}")),
        Ok(_) => Ok(()),
        Err(e) => Err(format!("agreement: {e}")),
    }
}

fn progress_bound(n: usize) -> usize {
    2 * n
}

/// Checks made whenever a stream ends.
fn at_end<C: Client>(setup: &Setup, s: &Alg2System<C>) -> Result<(), String> {
    if setup.checks.contains(&Alg2Check::Agreement) {
        let inputs = s.inputs().to_vec();
        let outs = s.outputs();
        let outputs: Vec<Option<u64>> = (1..=setup.n).map(|i| outs.get(&i).copied()).collect();
        agreement(setup, &inputs, &outputs)?;
    }
    if setup.checks.contains(&Alg2Check::Progress) && s.max_wait() > progress_bound(setup.n) {
        return Err(format!(
            "progress: a designated process waited {} rounds, bound {}",
            s.max_wait(),
            progress_bound(setup.n)
        ));
    }
    Ok(())
}

fn property_of(message: &str) -> Alg2Check {
    for c in [Alg2Check::Agreement, Alg2Check::Progress] {
        if message.starts_with(&format!("{}:", c.name())) {
            return c;
        }
    }
    if message.starts_with("linearization:") {
        Alg2Check::Linearize
    } else {
        Alg2Check::Claims
    }
}

fn read_stream(path: &Path) -> Result<Vec<RunSequence>, UsageError> {
    let doc: Value = serde_json::from_str(&read_file(path)?).map_err(usage)?;
    let runs = if doc.is_array() {
        doc
    } else {
        doc["stream"].clone()
    };
    serde_json::from_value(runs)
        .map_err(|e| UsageError(format!("{}: not a facet stream: {e}", path.display())))
}

struct Run {
    failure: Option<(String, Vec<RunSequence>)>,
    stats: Value,
}

enum Source {
    Exhaustive,
    Run(StreamSource),
}

fn drive<C: Client>(
    client: C,
    setup: &Setup,
    source: &Source,
    trace_out: Option<&PathBuf>,
) -> Result<Run, UsageError> {
    let sys = Alg2System::new(
        client,
        setup.k,
        setup.inputs.iter().copied().map(Some).collect(),
    )
    .with_participation(setup.participation);
    let source = match source {
        Source::Exhaustive => {
            return Ok(
                match explore_streams(&sys, setup.rounds, |s| at_end(setup, s)) {
                    Ok(st) => Run {
                        failure: None,
                        stats: json!(st),
                    },
                    Err(v) => Run {
                        failure: Some((v.message, v.stream)),
                        stats: Value::Null,
                    },
                },
            );
        }
        Source::Run(s) => s,
    };
    let report = match simulate_in_rkstar(&sys, source, setup.rounds) {
        Ok(r) => r,
        Err(v) => {
            return Ok(Run {
                failure: Some((v.message, v.stream)),
                stats: Value::Null,
            })
        }
    };
    if let Some(p) = trace_out {
        write_file(p, &to_json(&report.trace))?;
    }
    let stream: Vec<RunSequence> = report.trace.rounds.iter().map(|r| r.run.clone()).collect();
    let mut end = sys.clone();
    for run in &stream {
        end.step(run).map_err(usage)?;
    }
    Ok(Run {
        failure: at_end(setup, &end).err().map(|m| (m, stream.clone())),
        stats: json!({
            "rounds": stream.len(),
            "outputs": report.outputs,
            "complete": report.complete,
            "maxWait": end.max_wait(),
        }),
    })
}

fn dispatch(
    setup: &Setup,
    stream: &Source,
    trace_out: Option<&PathBuf>,
) -> Result<Run, UsageError> {
    match setup.client.as_str() {
        "kset" | "consensus" => drive(KSetClient, setup, stream, trace_out),
        "echo" => drive(EchoWriter, setup, stream, trace_out),
        _ => {
            let script = setup
                .script
                .clone()
                .ok_or_else(|| usage("script client without a script"))?;
            drive(script, setup, stream, trace_out)
        }
    }
}

pub fn run(a: Alg2Args) -> CmdResult {
    if a.n == 0 || a.k == 0 || a.k > a.n {
        return Err(UsageError(format!(
            "need 1 <= k <= n, got n = {}, k = {}",
            a.n, a.k
        )));
    }
    check_budget(
        ordered_partition_count(a.n).saturating_pow(2),
        crate::common::budget()?,
    )
    .map_err(usage)?;
    let inputs = a
        .inputs
        .clone()
        .unwrap_or_else(|| (1..=a.n as u64).collect());
    if inputs.len() != a.n {
        return Err(UsageError(format!(
            "{} inputs given for {} processes",
            inputs.len(),
            a.n
        )));
    }
    let (client, script) = match &a.client {
        ClientSpec::KSet => ("kset".to_string(), None),
        ClientSpec::Consensus => ("consensus".to_string(), None),
        ClientSpec::Echo => ("echo".to_string(), None),
        ClientSpec::File(p) => {
            let s: ScriptClient = serde_json::from_str(&read_file(p)?)
                .map_err(|e| UsageError(format!("{}: not a client script: {e}", p.display())))?;
            (format!("file:{}", p.display()), Some(s))
        }
    };
    let mut checks = a.checks.clone();
    checks.sort();
    checks.dedup();
    let setup = Setup {
        n: a.n,
        k: a.k,
        client,
        script,
        inputs,
        participation: a.participation.into(),
        rounds: a.rounds,
        checks: checks.clone(),
    };
    let source = match &a.stream {
        StreamSpec::Exhaustive => Source::Exhaustive,
        StreamSpec::Seed(seed) => Source::Run(StreamSource::Seeded(*seed)),
        StreamSpec::Replay(path) => Source::Run(StreamSource::Replay(read_stream(path)?)),
    };
    let result = dispatch(&setup, &source, a.trace_out.as_ref())?;

    let failed = result.failure.as_ref().map(|(m, _)| property_of(m));
    let mut verdicts = Map::new();
    for c in &checks {
        let v = match failed {
            Some(f) if f == *c => {
                json!({ "holds": false, "message": result.failure.as_ref().unwrap().0 })
            }
            Some(_) => {
                json!({ "holds": null, "message": "not established: the run stopped at another violation" })
            }
            None => json!({ "holds": true }),
        };
        verdicts.insert(c.name().into(), v);
    }
    let mut report = setup.to_json();
    report["command"] = json!("alg2");
    report["stream"] = match &a.stream {
        StreamSpec::Exhaustive => json!("exhaustive"),
        StreamSpec::Seed(s) => json!({ "seed": s }),
        StreamSpec::Replay(p) => json!({ "replay": p.display().to_string() }),
    };
    report["stats"] = result.stats;
    report["verdicts"] = Value::Object(verdicts);
    if let Some(c) = checks.iter().find(|c| **c == Alg2Check::Progress) {
        report["verdicts"][c.name()]["bound"] = json!(progress_bound(a.n));
    }
    let outcome = match result.failure {
        Some((message, stream)) => {
            let mut cx = setup.to_json();
            cx["command"] = json!("alg2");
            cx["message"] = json!(message);
            cx["stream"] = json!(stream);
            write_file(&a.counterexample, &to_json(&cx))?;
            report["counterexample"] = json!(a.counterexample.display().to_string());
            Outcome::Violated
        }
        None => Outcome::Holds,
    };
    emit(&to_json(&report), a.output.as_ref())?;
    Ok(outcome)
}

/// Re-runs the stream of an Algorithm 2 counterexample and returns the
/// violation it reaches, if any.
pub fn replay_counterexample(doc: &Value) -> Result<Option<String>, UsageError> {
    let setup = Setup::from_json(doc)?;
    let stream: Vec<RunSequence> = serde_json::from_value(doc["stream"].clone()).map_err(usage)?;
    let setup = Setup {
        rounds: stream.len(),
        ..setup
    };
    let run = dispatch(&setup, &Source::Run(StreamSource::Replay(stream)), None)?;
    Ok(run.failure.map(|(m, _)| m))
}
