//! Output-feedback filters built from Riccati solutions, and the heuristic
//! response policies they are compared against.

mod gains;
mod hinf;
mod policy;

pub use gains::{read_gains, write_gains};
pub use hinf::{
    synthesize_decentralized, synthesize_hinf, synthesize_hinf_at, synthesize_lqg,
    worst_case_disturbance, HinfController,
};
pub use policy::{
    policy_output, ControllerPolicy, ResponseKind, DEFAULT_FIXED_RATE, DEFAULT_TRIGGER_LEVEL,
};

/// Default multiple of `gamma*` at which filters are synthesized.
pub const DEFAULT_GAMMA_MARGIN: f64 = 1.05;
