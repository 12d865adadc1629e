//! Pure chromatic simplicial complexes stored facet-first.
//!
//! A vertex is a `(color, label)` pair; equal pairs are the same vertex no
//! matter which facet mentions them, so facets built independently glue
//! along shared views. The face closure is materialized on first use.

use crate::procset::{ProcSet, ProcessId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, OnceLock};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ComplexError {
    #[error("simplex repeats color {0}")]
    RepeatedColor(ProcessId),
    #[error("empty facet list")]
    NoFacets,
    #[error("skeleton dimension {k} outside 0..={dimension}")]
    SkeletonOutOfRange { k: usize, dimension: usize },
}

/// A colored vertex. `carrier` is a function of the label (the set of
/// processes the view mentions) and is kept alongside it so callers need
/// not re-parse labels; identity is `(color, label)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Vertex {
    pub color: ProcessId,
    pub label: Arc<str>,
    pub carrier: ProcSet,
}

impl Vertex {
    pub fn new(color: ProcessId, label: impl Into<Arc<str>>, carrier: ProcSet) -> Self {
        Self {
            color,
            label: label.into(),
            carrier,
        }
    }

    /// Corner `i` of the standard simplex.
    pub fn corner(color: ProcessId) -> Self {
        Self::new(color, "", ProcSet::singleton(color))
    }
}

impl PartialEq for Vertex {
    fn eq(&self, other: &Self) -> bool {
        self.color == other.color && self.label == other.label
    }
}

impl Eq for Vertex {}

impl Hash for Vertex {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.color.hash(state);
        self.label.hash(state);
    }
}

impl Ord for Vertex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.color, &self.label).cmp(&(other.color, &other.label))
    }
}

impl PartialOrd for Vertex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.color.get(), self.label)
    }
}

/// A chromatic simplex, vertices sorted by color.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Simplex(Vec<Vertex>);

impl Simplex {
    pub fn new(mut vertices: Vec<Vertex>) -> Result<Self, ComplexError> {
        vertices.sort();
        vertices.dedup();
        for w in vertices.windows(2) {
            if w[0].color == w[1].color {
                return Err(ComplexError::RepeatedColor(w[0].color));
            }
        }
        Ok(Self(vertices))
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn colors(&self) -> ProcSet {
        self.0.iter().map(|v| v.color).collect()
    }

    pub fn vertex_of(&self, color: ProcessId) -> Option<&Vertex> {
        self.0.iter().find(|v| v.color == color)
    }

    /// Every nonempty face, including the simplex itself.
    pub fn faces(&self) -> impl Iterator<Item = Simplex> + '_ {
        let len = self.0.len();
        (1u32..(1 << len)).map(move |mask| {
            Simplex(
                (0..len)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| self.0[i].clone())
                    .collect(),
            )
        })
    }

    pub fn is_face_of(&self, other: &Simplex) -> bool {
        self.0.iter().all(|v| other.0.contains(v))
    }

    /// Restriction to the given colors.
    pub fn restrict(&self, colors: ProcSet) -> Simplex {
        Simplex(
            self.0
                .iter()
                .filter(|v| colors.contains(v.color))
                .cloned()
                .collect(),
        )
    }
}

/// Pure chromatic complex over the standard simplex on `n` colors.
#[derive(Debug)]
pub struct ChromaticComplex {
    n: usize,
    dimension: usize,
    facets: Vec<Simplex>,
    closure: OnceLock<BTreeSet<Simplex>>,
}

impl Clone for ChromaticComplex {
    fn clone(&self) -> Self {
        Self {
            n: self.n,
            dimension: self.dimension,
            facets: self.facets.clone(),
            closure: OnceLock::new(),
        }
    }
}

impl PartialEq for ChromaticComplex {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.simplices() == other.simplices()
    }
}

impl ChromaticComplex {
    /// Builds a complex from facets, dropping duplicates and facets that
    /// are faces of other facets.
    pub fn from_facets(n: usize, facets: Vec<Simplex>) -> Result<Self, ComplexError> {
        if facets.is_empty() {
            return Err(ComplexError::NoFacets);
        }
        let unique: BTreeSet<Simplex> = facets.into_iter().collect();
        let mut by_size: Vec<Simplex> = unique.into_iter().collect();
        by_size.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.cmp(b)));
        let mut kept: Vec<Simplex> = Vec::new();
        let mut covered: BTreeSet<Simplex> = BTreeSet::new();
        for f in by_size {
            if covered.contains(&f) {
                continue;
            }
            covered.extend(f.faces());
            kept.push(f);
        }
        kept.sort();
        let dimension = kept.iter().map(Simplex::dimension).max().unwrap_or(0);
        let complex = Self {
            n,
            dimension,
            facets: kept,
            closure: OnceLock::new(),
        };
        let _ = complex.closure.set(covered);
        Ok(complex)
    }

    /// The standard simplex on colors `1..=n`.
    pub fn standard_simplex(n: usize) -> Self {
        let facet = Simplex(ProcessId::all(n).map(Vertex::corner).collect());
        Self::from_facets(n, vec![facet]).expect("standard simplex is nonempty")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Maximal simplices, sorted.
    pub fn facets(&self) -> &[Simplex] {
        &self.facets
    }

    /// Facets of full dimension.
    pub fn top_facets(&self) -> impl Iterator<Item = &Simplex> {
        self.facets
            .iter()
            .filter(move |f| f.dimension() == self.dimension)
    }

    pub fn simplices(&self) -> &BTreeSet<Simplex> {
        self.closure
            .get_or_init(|| self.facets.iter().flat_map(|f| f.faces()).collect())
    }

    pub fn contains(&self, s: &Simplex) -> bool {
        self.simplices().contains(s)
    }

    pub fn vertices(&self) -> BTreeSet<Vertex> {
        self.facets
            .iter()
            .flat_map(|f| f.vertices().iter().cloned())
            .collect()
    }

    pub fn is_pure(&self) -> bool {
        self.facets.iter().all(|f| f.dimension() == self.dimension)
    }

    /// JSON export with vertex ids assigned in label-sorted order.
    pub fn to_json(&self) -> ComplexJson {
        let mut vertices: Vec<Vertex> = self.vertices().into_iter().collect();
        vertices.sort_by(|a, b| (&a.label, a.color).cmp(&(&b.label, b.color)));
        let ids: BTreeMap<&Vertex, usize> =
            vertices.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let facets = self
            .facets
            .iter()
            .map(|f| f.vertices().iter().map(|v| ids[v]).collect())
            .collect();
        ComplexJson {
            n: self.n,
            dimension: self.dimension,
            vertices: vertices
                .iter()
                .enumerate()
                .map(|(id, v)| VertexJson {
                    id,
                    color: v.color.get(),
                    label: v.label.to_string(),
                })
                .collect(),
            facets,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct VertexJson {
    pub id: usize,
    pub color: usize,
    pub label: String,
}

#[derive(Debug, Serialize)]
pub struct ComplexJson {
    pub n: usize,
    pub dimension: usize,
    pub vertices: Vec<VertexJson>,
    pub facets: Vec<Vec<usize>>,
}

/// Face closure of a facet list.
pub fn closure(n: usize, facets: Vec<Simplex>) -> Result<ChromaticComplex, ComplexError> {
    ChromaticComplex::from_facets(n, facets)
}

/// Whether the 1-skeleton is connected.
pub fn is_connected(c: &ChromaticComplex) -> bool {
    component_count(c) <= 1
}

/// Number of connected components of the 1-skeleton.
pub fn component_count(c: &ChromaticComplex) -> usize {
    let vertices: Vec<Vertex> = c.vertices().into_iter().collect();
    let index: BTreeMap<&Vertex, usize> =
        vertices.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut parent: Vec<usize> = (0..vertices.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = vertices.len();
    for f in c.facets() {
        let vs = f.vertices();
        for w in vs.windows(2) {
            let a = find(&mut parent, index[&w[0]]);
            let b = find(&mut parent, index[&w[1]]);
            if a != b {
                parent[a] = b;
                components -= 1;
            }
        }
    }
    components
}

/// The subcomplex of simplices of dimension at most `k`.
pub fn skeleton(c: &ChromaticComplex, k: usize) -> Result<ChromaticComplex, ComplexError> {
    if k > c.dimension() {
        return Err(ComplexError::SkeletonOutOfRange {
            k,
            dimension: c.dimension(),
        });
    }
    let facets: Vec<Simplex> = c
        .simplices()
        .iter()
        .filter(|s| s.dimension() <= k)
        .cloned()
        .collect();
    ChromaticComplex::from_facets(c.n(), facets)
}

/// Facets of `c` with at least one vertex whose carrier is a proper face of
/// the ambient simplex.
pub fn boundary_touching_facets(c: &ChromaticComplex, ambient: &ChromaticComplex) -> Vec<Simplex> {
    let full: ProcSet = ambient.vertices().iter().map(|v| v.color).collect();
    c.facets()
        .iter()
        .filter(|f| f.vertices().iter().any(|v| v.carrier != full))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: usize, label: &str) -> Vertex {
        Vertex::new(
            ProcessId::of(c),
            label,
            ProcSet::singleton(ProcessId::of(c)),
        )
    }

    #[test]
    fn closure_of_triangle_has_seven_simplices() {
        let f = Simplex::new(vec![v(1, "a"), v(2, "b"), v(3, "c")]).unwrap();
        let c = closure(3, vec![f]).unwrap();
        assert_eq!(c.simplices().len(), 7);
    }

    #[test]
    fn closure_of_vertex() {
        let c = closure(1, vec![Simplex::new(vec![v(1, "a")]).unwrap()]).unwrap();
        assert_eq!(c.simplices().len(), 1);
        assert!(is_connected(&c));
    }

    #[test]
    fn repeated_color_is_rejected() {
        assert_eq!(
            Simplex::new(vec![v(1, "a"), v(1, "b")]),
            Err(ComplexError::RepeatedColor(ProcessId::of(1)))
        );
    }

    #[test]
    fn empty_facet_list_is_rejected() {
        assert_eq!(closure(3, vec![]).unwrap_err(), ComplexError::NoFacets);
    }

    #[test]
    fn disjoint_vertices_are_disconnected() {
        let c = closure(
            2,
            vec![
                Simplex::new(vec![v(1, "a")]).unwrap(),
                Simplex::new(vec![v(2, "b")]).unwrap(),
            ],
        )
        .unwrap();
        assert!(!is_connected(&c));
        assert_eq!(component_count(&c), 2);
    }

    #[test]
    fn standard_simplex_skeletons() {
        let s = ChromaticComplex::standard_simplex(3);
        assert!(is_connected(&s));
        assert_eq!(skeleton(&s, 0).unwrap().facets().len(), 3);
        assert_eq!(skeleton(&s, 2).unwrap(), s);
        assert!(skeleton(&s, 3).is_err());
    }

    #[test]
    fn faces_of_facets_are_dropped() {
        let big = Simplex::new(vec![v(1, "a"), v(2, "b")]).unwrap();
        let small = Simplex::new(vec![v(1, "a")]).unwrap();
        let c = closure(2, vec![small, big.clone()]).unwrap();
        assert_eq!(c.facets(), &[big]);
        assert!(c.is_pure());
    }

    #[test]
    fn closure_is_idempotent() {
        let f = Simplex::new(vec![v(1, "a"), v(2, "b"), v(3, "c")]).unwrap();
        let g = Simplex::new(vec![v(1, "a"), v(2, "x")]).unwrap();
        let c = closure(3, vec![f, g]).unwrap();
        let again = closure(3, c.facets().to_vec()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.simplices(), again.simplices());
    }
}
