//! Problem setups, solve pipelines and the configuration-driven run harness.

pub mod problems;
pub mod solve;

pub use problems::{build_problem, ExactSolution, Problem, ProblemKind};
pub use solve::{
    asp_spectrum, error_norms, max_divergence, max_nt_jump, prepare, require_converged, solve_elliptic, solve_stokes,
    ErrorNorms, PostChecks, Solution, SolveOptions, Timings,
};
