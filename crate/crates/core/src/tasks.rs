//! Tasks `(I, O, Δ)`, output checkers, and a bounded search for decision
//! maps on iterations of an affine pattern.

use crate::affine::{face_closure_violation, pattern_runs_over, AffineError, AffinePattern};
use crate::complex::{Simplex, Vertex};
use crate::procset::{ProcSet, ProcessId};
use crate::subdivision::{check_budget, enumerate_runs, RunSequence, RunViews, SubdivisionError};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaskError {
    #[error("malformed vectors: {0}")]
    Malformed(String),
    #[error("pattern {0} is not closed under faces")]
    NotFaceClosed(String),
    #[error(transparent)]
    Affine(#[from] AffineError),
    #[error(transparent)]
    Subdivision(#[from] SubdivisionError),
}

/// Outcome of checking a possibly partial output vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "verdict", content = "reason")]
pub enum Verdict {
    /// Every participant decided and the outputs are allowed.
    Solved,
    /// Some participants are undecided, and the decided outputs extend to
    /// an allowed vector.
    ConsistentSoFar,
    Rejected(String),
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        !matches!(self, Verdict::Rejected(_))
    }
}

pub trait Task {
    type Input;
    type Output;

    fn n(&self) -> usize;

    /// `None` entries are non-participants in `inputs` and undecided
    /// processes in `outputs`.
    fn check_outputs(
        &self,
        inputs: &[Option<Self::Input>],
        outputs: &[Option<Self::Output>],
    ) -> Result<Verdict, TaskError>;
}

fn shape<I, O>(n: usize, inputs: &[Option<I>], outputs: &[Option<O>]) -> Result<bool, TaskError> {
    if inputs.len() != n || outputs.len() != n {
        return Err(TaskError::Malformed(format!(
            "expected {n} entries, got {} inputs and {} outputs",
            inputs.len(),
            outputs.len()
        )));
    }
    if inputs.iter().all(Option::is_none) {
        return Err(TaskError::Malformed("nobody participates".into()));
    }
    if let Some(i) = (0..n).find(|&i| inputs[i].is_none() && outputs[i].is_some()) {
        return Err(TaskError::Malformed(format!(
            "process {} decided without participating",
            i + 1
        )));
    }
    Ok((0..n).all(|i| inputs[i].is_none() || outputs[i].is_some()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "k")]
pub enum Builtin {
    Consensus,
    KSet(usize),
    Echo,
}

/// One row of a table task: an input vector and its allowed complete
/// output vectors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub input: Vec<Option<u64>>,
    pub outputs: Vec<Vec<Option<u64>>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Delta {
    Builtin(Builtin),
    Table(Vec<TableRow>),
}

/// A task over integer values.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueTask {
    pub n: usize,
    pub inputs: Vec<Vec<Option<u64>>>,
    pub outputs_domain: Vec<u64>,
    pub delta: Delta,
}

/// Every vector over `values` and `⊥` with at least one participant.
pub fn all_input_vectors(n: usize, values: &[u64]) -> Vec<Vec<Option<u64>>> {
    let mut out: Vec<Vec<Option<u64>>> = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                std::iter::once(None)
                    .chain(values.iter().copied().map(Some))
                    .map(move |x| {
                        let mut w = v.clone();
                        w.push(x);
                        w
                    })
            })
            .collect();
    }
    out.retain(|v| v.iter().any(Option::is_some));
    out
}

impl ValueTask {
    pub fn builtin(n: usize, values: &[u64], b: Builtin) -> Self {
        Self {
            n,
            inputs: all_input_vectors(n, values),
            outputs_domain: values.to_vec(),
            delta: Delta::Builtin(b),
        }
    }

    pub fn consensus(n: usize, values: &[u64]) -> Self {
        Self::builtin(n, values, Builtin::Consensus)
    }

    pub fn k_set_agreement(n: usize, k: usize, values: &[u64]) -> Self {
        Self::builtin(n, values, Builtin::KSet(k))
    }

    pub fn echo(n: usize, values: &[u64]) -> Self {
        Self::builtin(n, values, Builtin::Echo)
    }

    /// Reads the JSON task description
    /// `{n, inputs, outputsDomain, deltaKind: builtin|table, builtin?, table?}`.
    pub fn from_json(text: &str) -> Result<Self, TaskError> {
        #[derive(Deserialize)]
        #[serde(rename_all = "camelCase")]
        struct File {
            n: usize,
            inputs: Option<Vec<Vec<Option<u64>>>>,
            outputs_domain: Vec<u64>,
            delta_kind: String,
            builtin: Option<Builtin>,
            table: Option<Vec<TableRow>>,
        }
        let f: File =
            serde_json::from_str(text).map_err(|e| TaskError::Malformed(e.to_string()))?;
        let delta = match (f.delta_kind.as_str(), f.builtin, f.table) {
            ("builtin", Some(b), _) => Delta::Builtin(b),
            ("table", _, Some(t)) => Delta::Table(t),
            (k, _, _) => {
                return Err(TaskError::Malformed(format!(
                    "deltaKind {k} without its description"
                )))
            }
        };
        let inputs = match (f.inputs, &delta) {
            (Some(i), _) => i,
            (None, Delta::Table(rows)) => rows.iter().map(|r| r.input.clone()).collect(),
            (None, Delta::Builtin(_)) => all_input_vectors(f.n, &f.outputs_domain),
        };
        if let Some(v) = inputs.iter().find(|v| v.len() != f.n) {
            return Err(TaskError::Malformed(format!(
                "input vector {v:?} has the wrong length"
            )));
        }
        Ok(Self {
            n: f.n,
            inputs,
            outputs_domain: f.outputs_domain,
            delta,
        })
    }
}

impl Task for ValueTask {
    type Input = u64;
    type Output = u64;

    fn n(&self) -> usize {
        self.n
    }

    fn check_outputs(
        &self,
        inputs: &[Option<u64>],
        outputs: &[Option<u64>],
    ) -> Result<Verdict, TaskError> {
        let complete = shape(self.n, inputs, outputs)?;
        let ok = if complete {
            Verdict::Solved
        } else {
            Verdict::ConsistentSoFar
        };
        let proposed: BTreeSet<u64> = inputs.iter().flatten().copied().collect();
        let decided: BTreeSet<u64> = outputs.iter().flatten().copied().collect();
        let reject = |s: String| Ok(Verdict::Rejected(s));
        match &self.delta {
            Delta::Builtin(Builtin::Consensus | Builtin::KSet(_)) => {
                let k = match self.delta {
                    Delta::Builtin(Builtin::KSet(k)) => k,
                    _ => 1,
                };
                if let Some(v) = decided.iter().find(|v| !proposed.contains(v)) {
                    return reject(format!("{v} was decided but never proposed"));
                }
                if decided.len() > k {
                    return reject(format!(
                        "{} distinct values decided, at most {k} allowed",
                        decided.len()
                    ));
                }
                Ok(ok)
            }
            Delta::Builtin(Builtin::Echo) => {
                match (0..self.n).find(|&i| outputs[i].is_some() && outputs[i] != inputs[i]) {
                    Some(i) => reject(format!("process {} output differs from its input", i + 1)),
                    None => Ok(ok),
                }
            }
            Delta::Table(rows) => {
                let row = rows.iter().find(|r| r.input == inputs).ok_or_else(|| {
                    TaskError::Malformed(format!("input vector {inputs:?} is not in the table"))
                })?;
                let fits = row
                    .outputs
                    .iter()
                    .any(|o| (0..self.n).all(|i| outputs[i].is_none() || outputs[i] == o[i]));
                if fits {
                    Ok(ok)
                } else {
                    reject("no allowed output vector extends the decisions".into())
                }
            }
        }
    }
}

/// Simplex agreement on a two-round pattern `L`: each participant outputs
/// a vertex of its color, and the outputs must lie in one simplex of `L`
/// restricted to the participating face.
#[derive(Clone, Debug)]
pub struct SimplexAgreementTask {
    n: usize,
    pattern: AffinePattern,
    facets: HashMap<ProcSet, Vec<Simplex>>,
}

impl SimplexAgreementTask {
    pub fn new(n: usize, pattern: AffinePattern, budget: usize) -> Result<Self, TaskError> {
        if face_closure_violation(n, &pattern, budget)?.is_some() {
            return Err(TaskError::NotFaceClosed(pattern.name.clone()));
        }
        let facets = ProcSet::full(n)
            .subsets()
            .filter(|t| !t.is_empty())
            .map(|t| {
                let fs = pattern_runs_over(t, &pattern, 1)
                    .iter()
                    .map(|r| RunViews::new(r).facet())
                    .collect();
                (t, fs)
            })
            .collect();
        Ok(Self { n, pattern, facets })
    }

    pub fn pattern(&self) -> &AffinePattern {
        &self.pattern
    }

    /// The vertex profile of a run, as an output vector.
    pub fn profile(&self, run: &RunSequence) -> Vec<Option<Vertex>> {
        let views = RunViews::new(run);
        (1..=self.n)
            .map(|i| {
                let p = ProcessId::of(i);
                run.participants().contains(p).then(|| views.vertex(p))
            })
            .collect()
    }
}

impl Task for SimplexAgreementTask {
    type Input = ();
    type Output = Vertex;

    fn n(&self) -> usize {
        self.n
    }

    fn check_outputs(
        &self,
        inputs: &[Option<()>],
        outputs: &[Option<Vertex>],
    ) -> Result<Verdict, TaskError> {
        let complete = shape(self.n, inputs, outputs)?;
        let t: ProcSet = (0..self.n)
            .filter(|&i| inputs[i].is_some())
            .map(|i| ProcessId::of(i + 1))
            .collect();
        if let Some(i) =
            (0..self.n).find(|&i| outputs[i].as_ref().is_some_and(|v| v.color.index() != i))
        {
            return Ok(Verdict::Rejected(format!(
                "process {} output a vertex of another color",
                i + 1
            )));
        }
        let decided: Vec<&Vertex> = outputs.iter().flatten().collect();
        let inside = self.facets[&t]
            .iter()
            .any(|f| decided.iter().all(|v| f.vertex_of(v.color) == Some(*v)));
        Ok(match (inside, complete) {
            (false, _) => Verdict::Rejected(format!(
                "outputs are not a simplex of {} over {t}",
                self.pattern
            )),
            (true, true) => Verdict::Solved,
            (true, false) => Verdict::ConsistentSoFar,
        })
    }
}

/// Result of [`solvability_search`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(
    rename_all = "kebab-case",
    rename_all_fields = "camelCase",
    tag = "result"
)]
pub enum SearchOutcome {
    /// A decision map on `iterations` iterations of the pattern, keyed by
    /// color and full-information label.
    Found {
        iterations: usize,
        map: BTreeMap<String, u64>,
    },
    NoSolution {
        up_to: usize,
    },
}

struct Csp {
    /// Facets as vertex indices, with their input vector.
    facets: Vec<(Vec<usize>, Vec<Option<u64>>)>,
    by_vertex: Vec<Vec<usize>>,
    colors: Vec<usize>,
    names: Vec<String>,
}

fn build_csp(
    task: &ValueTask,
    pattern: &AffinePattern,
    m: usize,
    budget: usize,
) -> Result<Csp, TaskError> {
    let mut per_face = HashMap::new();
    let mut total: u128 = 0;
    for input in &task.inputs {
        let t: ProcSet = (0..task.n)
            .filter(|&i| input[i].is_some())
            .map(|i| ProcessId::of(i + 1))
            .collect();
        let slices = *per_face.entry(t).or_insert_with(|| {
            enumerate_runs(t, pattern.rounds)
                .iter()
                .filter(|r| pattern.accepts(r))
                .count() as u128
        });
        total = total.saturating_add(slices.saturating_pow(m as u32));
    }
    check_budget(total, budget)?;
    let mut index: HashMap<(usize, Arc<str>), usize> = HashMap::new();
    let mut csp = Csp {
        facets: Vec::new(),
        by_vertex: Vec::new(),
        colors: Vec::new(),
        names: Vec::new(),
    };
    let mut runs_cache: HashMap<ProcSet, Vec<RunSequence>> = HashMap::new();
    for input in &task.inputs {
        let t: ProcSet = (0..task.n)
            .filter(|&i| input[i].is_some())
            .map(|i| ProcessId::of(i + 1))
            .collect();
        let runs = runs_cache
            .entry(t)
            .or_insert_with(|| pattern_runs_over(t, pattern, m));
        for run in runs.iter() {
            let base = |p: ProcessId| -> Arc<str> {
                Arc::from(format!("={}", input[p.index()].expect("participant")))
            };
            let views = RunViews::with_base(run, &base, &ProcSet::singleton);
            let mut vs = Vec::new();
            for p in t.iter() {
                let key = (p.index(), views.label(p));
                let next = index.len();
                let id = *index.entry(key.clone()).or_insert_with(|| {
                    csp.by_vertex.push(Vec::new());
                    csp.colors.push(p.index());
                    csp.names.push(format!("{}{}", p.get(), key.1));
                    next
                });
                vs.push(id);
            }
            for &v in &vs {
                csp.by_vertex[v].push(csp.facets.len());
            }
            csp.facets.push((vs, input.clone()));
        }
    }
    Ok(csp)
}

impl Csp {
    fn facet_ok(&self, task: &ValueTask, f: usize, assign: &[Option<u64>]) -> bool {
        let (vs, input) = &self.facets[f];
        let mut out = vec![None; task.n];
        for &v in vs {
            out[self.colors[v]] = assign[v];
        }
        task.check_outputs(input, &out)
            .map(|v| v.accepted())
            .unwrap_or(false)
    }

    /// Assigns `v := x` and propagates forced values; returns the changed
    /// vertices, or `None` on a wipe-out (with the changes undone).
    fn assign(
        &self,
        task: &ValueTask,
        v: usize,
        x: u64,
        assign: &mut Vec<Option<u64>>,
        domains: &mut Vec<Vec<u64>>,
    ) -> Option<Vec<(usize, Vec<u64>)>> {
        let mut trail: Vec<(usize, Vec<u64>)> = Vec::new();
        let mut queue = vec![(v, x)];
        let undo = |trail: &[(usize, Vec<u64>)],
                    assign: &mut Vec<Option<u64>>,
                    domains: &mut Vec<Vec<u64>>| {
            for (u, d) in trail.iter().rev() {
                assign[*u] = None;
                domains[*u] = d.clone();
            }
        };
        while let Some((v, x)) = queue.pop() {
            if assign[v].is_some() {
                if assign[v] != Some(x) {
                    undo(&trail, assign, domains);
                    return None;
                }
                continue;
            }
            trail.push((v, domains[v].clone()));
            assign[v] = Some(x);
            domains[v] = vec![x];
            for &f in &self.by_vertex[v] {
                if !self.facet_ok(task, f, assign) {
                    undo(&trail, assign, domains);
                    return None;
                }
                for &u in &self.facets[f].0 {
                    if assign[u].is_some() {
                        continue;
                    }
                    let keep: Vec<u64> = domains[u]
                        .iter()
                        .copied()
                        .filter(|&y| {
                            assign[u] = Some(y);
                            let ok = self.facet_ok(task, f, assign);
                            assign[u] = None;
                            ok
                        })
                        .collect();
                    if keep.len() != domains[u].len() {
                        if !trail.iter().any(|(w, _)| *w == u) {
                            trail.push((u, domains[u].clone()));
                        }
                        if keep.is_empty() {
                            undo(&trail, assign, domains);
                            return None;
                        }
                        if keep.len() == 1 {
                            queue.push((u, keep[0]));
                        }
                        domains[u] = keep;
                    }
                }
            }
        }
        Some(trail)
    }

    fn solve(
        &self,
        task: &ValueTask,
        assign: &mut Vec<Option<u64>>,
        domains: &mut Vec<Vec<u64>>,
    ) -> bool {
        let Some(v) = (0..assign.len())
            .filter(|&v| assign[v].is_none())
            .min_by_key(|&v| (domains[v].len(), v))
        else {
            return true;
        };
        for x in domains[v].clone() {
            if let Some(trail) = self.assign(task, v, x, assign, domains) {
                if self.solve(task, assign, domains) {
                    return true;
                }
                for (u, d) in trail.iter().rev() {
                    assign[*u] = None;
                    domains[*u] = d.clone();
                }
            }
        }
        false
    }
}

/// Looks for a decision map on exactly `iterations` iterations of
/// `pattern`: one output per full-information vertex, accepted on every
/// run over every input vector of the task.
pub fn search_at(
    task: &ValueTask,
    pattern: &AffinePattern,
    iterations: usize,
    budget: usize,
) -> Result<Option<BTreeMap<String, u64>>, TaskError> {
    let csp = build_csp(task, pattern, iterations, budget)?;
    let nv = csp.names.len();
    let mut assign = vec![None; nv];
    let mut domains = vec![task.outputs_domain.clone(); nv];
    // Single-vertex restrictions first: a value no facet tolerates is dropped.
    for v in 0..nv {
        let keep: Vec<u64> = domains[v]
            .iter()
            .copied()
            .filter(|&y| {
                assign[v] = Some(y);
                let ok = csp.by_vertex[v]
                    .iter()
                    .all(|&f| csp.facet_ok(task, f, &assign));
                assign[v] = None;
                ok
            })
            .collect();
        if keep.is_empty() {
            return Ok(None);
        }
        domains[v] = keep;
    }
    if !csp.solve(task, &mut assign, &mut domains) {
        return Ok(None);
    }
    Ok(Some(
        csp.names
            .into_iter()
            .zip(assign)
            .map(|(k, v)| (k, v.expect("complete assignment")))
            .collect(),
    ))
}

/// Tries `1..=max_iterations` iterations of `pattern` in turn.
pub fn solvability_search(
    task: &ValueTask,
    pattern: &AffinePattern,
    max_iterations: usize,
    budget: usize,
) -> Result<SearchOutcome, TaskError> {
    for m in 1..=max_iterations {
        if let Some(map) = search_at(task, pattern, m, budget)? {
            return Ok(SearchOutcome::Found { iterations: m, map });
        }
    }
    Ok(SearchOutcome::NoSolution {
        up_to: max_iterations,
    })
}
