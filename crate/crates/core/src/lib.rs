//! Hybridized mass-conserving mixed-stress (MCS) discretization of the 2D
//! Stokes equations with static condensation and auxiliary-space
//! preconditioned Krylov solvers.

// NaN-rejecting checks use negated comparisons on purpose; dense kernels index by loop counter.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod assembly;
pub mod condensation;
pub mod driver;
pub mod error;
pub mod experiment;
pub mod fespace;
pub mod krylov;
pub mod linalg;
pub mod mesh;
pub mod polynomial;
pub mod preconditioners;
pub mod quadrature;
pub mod sparse;
pub mod verification;

pub use error::{Error, Result};
