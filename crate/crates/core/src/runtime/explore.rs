use super::{Event, FreeSteps, System};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

/// Limits on exploration: an optional concurrency bound `k` and a maximum
/// number of events per schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Bound {
    pub concurrency: Option<usize>,
    pub depth: usize,
}

impl Bound {
    pub fn new(concurrency: Option<usize>, depth: usize) -> Self {
        Self { concurrency, depth }
    }

    pub fn wait_free(depth: usize) -> Self {
        Self::new(None, depth)
    }
}

/// A failed check together with the schedule leading to it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: Vec<Event>,
    pub message: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ExploreStats {
    pub nodes: u64,
    pub terminals: u64,
    /// Terminal states that still had enabled events when the depth ran out.
    pub truncated: u64,
}

/// Every event allowed in `s` under `bound`, with the resulting state.
/// An event is illegal if it would leave more than `k` processes running.
pub fn legal_events<S: System>(s: &S, bound: &Bound) -> Vec<(Event, S)> {
    let mut out = Vec::new();
    for pid in crate::ProcessId::all(s.n()) {
        for action in s.enabled(pid) {
            let mut next = s.clone();
            if next.apply(pid, &action).is_err() {
                continue;
            }
            if let Some(k) = bound.concurrency {
                if next.active().len() > k {
                    continue;
                }
            }
            out.push((Event { pid, action }, next));
        }
    }
    out
}

fn fingerprint<T: Hash>(t: &T) -> u128 {
    let mut a = DefaultHasher::new();
    0u8.hash(&mut a);
    t.hash(&mut a);
    let mut b = DefaultHasher::new();
    1u8.hash(&mut b);
    t.hash(&mut b);
    ((a.finish() as u128) << 64) | b.finish() as u128
}

fn checked<S: System>(s: &S, path: &[Event]) -> Result<(), Violation> {
    s.check().map_err(|message| Violation {
        path: path.to_vec(),
        message,
    })
}

/// Depth-first over every schedule, without merging equal states. `visit`
/// runs on each maximal schedule.
pub fn explore_traces<S, F>(init: &S, bound: Bound, mut visit: F) -> Result<ExploreStats, Violation>
where
    S: System,
    F: FnMut(&[Event], &S) -> Result<(), String>,
{
    let mut stats = ExploreStats::default();
    let mut path = Vec::new();
    checked(init, &path)?;
    traces_rec(init, &bound, &mut path, &mut visit, &mut stats)?;
    Ok(stats)
}

fn traces_rec<S, F>(
    s: &S,
    bound: &Bound,
    path: &mut Vec<Event>,
    visit: &mut F,
    stats: &mut ExploreStats,
) -> Result<(), Violation>
where
    S: System,
    F: FnMut(&[Event], &S) -> Result<(), String>,
{
    stats.nodes += 1;
    let succ = if path.len() < bound.depth {
        legal_events(s, bound)
    } else {
        Vec::new()
    };
    if succ.is_empty() {
        stats.terminals += 1;
        if path.len() >= bound.depth && !legal_events(s, bound).is_empty() {
            stats.truncated += 1;
        }
        return visit(path, s).map_err(|message| Violation {
            path: path.clone(),
            message,
        });
    }
    for (e, next) in succ {
        path.push(e);
        checked(&next, path)?;
        traces_rec(&next, bound, path, visit, stats)?;
        path.pop();
    }
    Ok(())
}

/// Depth-first over reachable states, visiting each state once (or again
/// only when reached with more remaining depth). `visit` runs on terminal
/// states; the reported path is one schedule reaching the state.
pub fn explore_states<S, F>(init: &S, bound: Bound, mut visit: F) -> Result<ExploreStats, Violation>
where
    S: System,
    F: FnMut(&[Event], &S) -> Result<(), String>,
{
    let mut stats = ExploreStats::default();
    let mut seen: HashMap<u128, usize> = HashMap::new();
    let mut path = Vec::new();
    checked(init, &path)?;
    states_rec(init, &bound, &mut path, &mut visit, &mut stats, &mut seen)?;
    Ok(stats)
}

fn states_rec<S, F>(
    s: &S,
    bound: &Bound,
    path: &mut Vec<Event>,
    visit: &mut F,
    stats: &mut ExploreStats,
    seen: &mut HashMap<u128, usize>,
) -> Result<(), Violation>
where
    S: System,
    F: FnMut(&[Event], &S) -> Result<(), String>,
{
    let remaining = bound.depth - path.len();
    let fp = match s.canonical() {
        Some(c) => fingerprint(&c),
        None => fingerprint(s),
    };
    match seen.get(&fp) {
        Some(&r) if r >= remaining => return Ok(()),
        _ => {
            seen.insert(fp, remaining);
        }
    }
    stats.nodes += 1;
    let all = legal_events(s, bound);
    if remaining == 0 || all.is_empty() {
        stats.terminals += 1;
        if !all.is_empty() {
            stats.truncated += 1;
        }
        return visit(path, s).map_err(|message| Violation {
            path: path.clone(),
            message,
        });
    }
    for (e, next) in all {
        path.push(e);
        checked(&next, path)?;
        states_rec(&next, bound, path, visit, stats, seen)?;
        path.pop();
    }
    Ok(())
}

/// One schedule drawn uniformly step by step from a seeded generator.
pub fn seeded_run<S: System>(
    init: &S,
    bound: Bound,
    seed: u64,
) -> Result<(S, Vec<Event>), Violation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = init.clone();
    let mut path = Vec::new();
    checked(&s, &path)?;
    while path.len() < bound.depth {
        let Some((e, next)) = legal_events(&s, &bound).choose(&mut rng).cloned() else {
            break;
        };
        path.push(e);
        checked(&next, &path)?;
        s = next;
    }
    Ok((s, path))
}

pub fn seeded_schedule<S: System>(
    init: &S,
    bound: Bound,
    seed: u64,
) -> Result<Vec<Event>, Violation> {
    seeded_run(init, bound, seed).map(|(_, p)| p)
}

/// Round-robin: processes take turns in id order, each taking its first
/// legal event; processes without one are skipped.
pub fn fair_run<S: System>(init: &S, bound: Bound) -> Result<(S, Vec<Event>), Violation> {
    let n = init.n();
    let mut s = init.clone();
    let mut path = Vec::new();
    let mut cursor = 0;
    checked(&s, &path)?;
    while path.len() < bound.depth {
        let legal = legal_events(&s, &bound);
        let pick = (0..n)
            .map(|d| (cursor + d) % n)
            .find_map(|i| legal.iter().find(|(e, _)| e.pid.index() == i));
        let Some((e, next)) = pick.cloned() else {
            break;
        };
        cursor = (e.pid.index() + 1) % n;
        path.push(e);
        checked(&next, &path)?;
        s = next;
    }
    Ok((s, path))
}

/// All maximal schedules of `n` processes each running a task of `ops`
/// events, truncated at `depth` events, under the concurrency bound.
pub fn enumerate_schedules(
    n: usize,
    k: Option<usize>,
    depth: usize,
    ops: usize,
) -> Vec<Vec<Event>> {
    let mut out = Vec::new();
    explore_traces(&FreeSteps::new(n, ops), Bound::new(k, depth), |p, _| {
        out.push(p.to_vec());
        Ok(())
    })
    .expect("free steps have no invariants");
    out
}
