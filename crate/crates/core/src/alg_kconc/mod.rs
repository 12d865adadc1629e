//! Simulating a `k`-concurrent system with `k`-set consensus: a `k`-process
//! memory simulation driven by `k`-simultaneous consensus and commit-adopt,
//! running a depth-first extended BG simulation of a task protocol.

mod alg1;
mod bg;
mod compose;

pub use alg1::{
    alg1_progress_gap, cur_writes, linearize_alg1, Alg1Op, Alg1Output, Alg1System, CommitRule,
    Data, HashProgram, Linearizer, MemCell, SeqOp, SimProgram, SimView,
};
pub use bg::{
    bg_step, AdoptFirstDecision, AfdState, BgCell, BgDirect, BgKnowledge, CaRound, ClientProgress,
    ClientProtocol, ClientStep, EaLocal, EchoClient, Instance, Snap,
};
pub use compose::{solve_k_concurrently, BgProgram, KConcSystem, Schedule, SolveReport};
