//! Streams of `R_k` facets driving the simulation: exhaustive, seeded, or
//! replayed from a file.

use super::client::Client;
use super::linearize::{alg2_snapshot_linearization, Alg2Trace};
use super::system::Alg2System;
use crate::affine::{pattern_runs_over, AffinePattern};
use crate::procset::ProcSet;
use crate::subdivision::RunSequence;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::hash::{Hash, Hasher};

/// `R_k` facets over each participating set, computed on demand.
#[derive(Debug, Default)]
pub struct FacetCache {
    k: usize,
    by_set: HashMap<ProcSet, Vec<RunSequence>>,
}

impl FacetCache {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            by_set: HashMap::new(),
        }
    }

    pub fn facets(&mut self, over: ProcSet) -> &[RunSequence] {
        let k = self.k;
        self.by_set
            .entry(over)
            .or_insert_with(|| pattern_runs_over(over, &AffinePattern::rk(k), 1))
    }
}

/// A safety or task failure, with the stream that leads to it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StreamViolation {
    pub stream: Vec<RunSequence>,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StreamStats {
    /// Distinct states reached.
    pub states: usize,
    /// States where every process has decided.
    pub finished: usize,
    /// States cut off at the round bound with someone undecided.
    pub truncated: usize,
    pub max_idle: usize,
    pub max_wait: usize,
}

fn fingerprint<T: Hash>(t: &T) -> (u64, u64) {
    let mut a = DefaultHasher::new();
    t.hash(&mut a);
    let mut b = DefaultHasher::new();
    0x5bd1_e995u32.hash(&mut b);
    t.hash(&mut b);
    (a.finish(), b.finish())
}

/// Explores every stream of at most `rounds` facets. `visit` sees every
/// state where the stream ends: all decided or the bound reached.
pub fn explore_streams<C, F>(
    init: &Alg2System<C>,
    rounds: usize,
    mut visit: F,
) -> Result<StreamStats, StreamViolation>
where
    C: Client,
    F: FnMut(&Alg2System<C>) -> Result<(), String>,
{
    let mut cache = FacetCache::new(init.k());
    let mut seen = HashSet::new();
    let mut stats = StreamStats::default();
    let mut path = Vec::new();
    rec(
        init, rounds, &mut cache, &mut seen, &mut stats, &mut path, &mut visit,
    )?;
    Ok(stats)
}

fn rec<C, F>(
    s: &Alg2System<C>,
    rounds: usize,
    cache: &mut FacetCache,
    seen: &mut HashSet<(u64, u64)>,
    stats: &mut StreamStats,
    path: &mut Vec<RunSequence>,
    visit: &mut F,
) -> Result<(), StreamViolation>
where
    C: Client,
    F: FnMut(&Alg2System<C>) -> Result<(), String>,
{
    if !seen.insert(fingerprint(s)) {
        return Ok(());
    }
    stats.states += 1;
    stats.max_idle = stats.max_idle.max(s.max_idle());
    stats.max_wait = stats.max_wait.max(s.max_wait());
    let parts = s.participants();
    if parts.is_empty() || s.round() >= rounds {
        if parts.is_empty() {
            stats.finished += 1;
        } else {
            stats.truncated += 1;
        }
        return visit(s).map_err(|message| StreamViolation {
            stream: path.clone(),
            message,
        });
    }
    let facets = cache.facets(parts).to_vec();
    for run in facets {
        let mut next = s.clone();
        path.push(run.clone());
        if let Err(message) = next.step(&run) {
            return Err(StreamViolation {
                stream: path.clone(),
                message,
            });
        }
        rec(&next, rounds, cache, seen, stats, path, visit)?;
        path.pop();
    }
    Ok(())
}

/// Where the facets of a single run come from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamSource {
    Seeded(u64),
    /// Facets in order; the run stops early if they run out.
    Replay(Vec<RunSequence>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SimulationReport {
    /// Outputs by 1-based process id.
    pub outputs: BTreeMap<usize, u64>,
    /// Every participating process produced an output.
    pub complete: bool,
    pub trace: Alg2Trace,
}

/// Runs the simulation along one stream for at most `rounds` rounds,
/// checking the safety claims after every round and the snapshot
/// linearization at the end.
pub fn simulate_in_rkstar<C: Client>(
    init: &Alg2System<C>,
    source: &StreamSource,
    rounds: usize,
) -> Result<SimulationReport, StreamViolation> {
    let mut s = init.clone();
    let mut trace = s.empty_trace();
    let mut cache = FacetCache::new(s.k());
    let mut rng = match source {
        StreamSource::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(*seed)),
        StreamSource::Replay(_) => None,
    };
    let fail = |trace: &Alg2Trace, message: String| StreamViolation {
        stream: trace.rounds.iter().map(|r| r.run.clone()).collect(),
        message,
    };
    while s.round() < rounds && !s.participants().is_empty() {
        let run = match (source, rng.as_mut()) {
            (StreamSource::Replay(runs), _) => match runs.get(s.round()) {
                Some(r) => r.clone(),
                None => break,
            },
            (_, Some(rng)) => {
                let facets = cache.facets(s.participants());
                facets[rng.gen_range(0..facets.len())].clone()
            }
            _ => unreachable!("seeded source has a generator"),
        };
        match s.step(&run) {
            Ok(rec) => trace.rounds.push(rec),
            Err(message) => {
                let mut v = fail(&trace, message);
                v.stream.push(run);
                return Err(v);
            }
        }
    }
    alg2_snapshot_linearization(&trace).map_err(|m| fail(&trace, format!("linearization: {m}")))?;
    let outputs = s.outputs();
    let complete = s
        .inputs()
        .iter()
        .enumerate()
        .all(|(i, x)| x.is_none() || outputs.contains_key(&(i + 1)));
    Ok(SimulationReport {
        outputs,
        complete,
        trace,
    })
}
