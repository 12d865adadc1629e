//! Simulation of read-write memory and `k`-set agreement objects in
//! iterations of `R_k`.

pub mod alg2;
pub mod client;
pub mod linearize;
pub mod streams;
pub mod system;

pub use alg2::{
    alg2_update_stage, alg2_validate_stage, Adoption, Alg2State, Phase, RkInput, RkOutput, Slot,
    Validation,
};
pub use client::{
    Client, ClientOp, EchoState, EchoWriter, KSetClient, KSetState, ScriptClient, ScriptOp,
    ScriptState,
};
pub use linearize::{
    alg2_snapshot_linearization, check_sequential, Alg2Trace, LinOp, RoundRecord,
    SnapshotLinearizer,
};
pub use streams::{
    explore_streams, simulate_in_rkstar, FacetCache, SimulationReport, StreamSource, StreamStats,
    StreamViolation,
};
pub use system::{designated, Alg2System, Participation};
