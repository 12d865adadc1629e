//! Combinatorial objects of the iterated immediate-snapshot model (chromatic
//! subdivisions, contention sets, the affine task `R_k`) together with
//! executable, exhaustively checked models of the two simulations relating
//! `R_k*`, `k`-set consensus and `k`-concurrency.

pub mod affine;
pub mod alg_kconc;
pub mod alg_rk;
pub mod complex;
pub mod procset;
pub mod protocols;
pub mod runtime;
pub mod serde_pairs;
pub mod subdivision;
pub mod tasks;

pub use complex::{ChromaticComplex, Simplex, Vertex};
pub use procset::{ProcSet, ProcessId};
pub use subdivision::{OrderedPartition, RunSequence};
