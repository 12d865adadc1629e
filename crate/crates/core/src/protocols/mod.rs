//! Shared objects used by the simulations: commit-adopt (atomic and from
//! read-write snapshots), `k`-simultaneous consensus and `k`-set consensus.

mod agreement;
mod commit_adopt;

pub use agreement::{distinct_count, KSetConsObject, KSetPolicy, KSimConsObject, KscSystem};
pub use commit_adopt::{check_commit_adopt, CaFlag, CommitAdoptObject, CommitAdoptRw};
