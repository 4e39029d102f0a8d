//! Fixtures shared by the benchmarks in `benches/`.

use mcs_core::condensation::CondensedSystem;
use mcs_core::driver::{build_problem, prepare, Problem, ProblemKind};
use mcs_core::preconditioners::Target;

pub const NU: f64 = 1e-3;

/// Channel problem at degree k and refinement level, condensed for the given target.
pub fn channel(k: usize, level: usize, target: Target) -> (Problem, CondensedSystem) {
    let pr = build_problem(ProblemKind::Channel, k, level, NU).expect("valid benchmark setup");
    let cs = prepare(&pr.sys, NU, None, target).expect("condensation succeeds");
    (pr, cs)
}
