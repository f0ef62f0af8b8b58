//! Joint power allocation, sub-channel assignment and transmit-antenna
//! selection for the uplink of a multi-cell OFDMA network, balancing energy
//! efficiency against spectral efficiency.
//!
//! The weighted rate/power objective is maximized by successive convex
//! approximation: the mixed-integer coupling is relaxed through big-M
//! constraints and a quadratic indicator penalty, the remaining nonconvexity
//! is split into a difference of concave functions, and each iteration
//! maximizes a first-order tangent surrogate. Small instances can be checked
//! against an independent brute-force oracle, and a channel simulator
//! reproduces the Monte-Carlo experiments.

pub mod model;
pub mod oracle;
pub mod sim;
pub mod solver;
pub mod transform;

pub use model::{
    check_feasibility, compute_metrics, compute_rate, Allocation, Dims, Metrics, ProblemInstance,
    Scenario,
};
pub use solver::{init_feasible, mm_solve, round_and_polish, SolveReport, SolverConfig};
pub use transform::{
    big_m_constraints, build_surrogate, eval_dc_parts, penalized_objective, weighted_objective,
    WeightedObjectiveConfig,
};
