//! Numerical laboratory for the two-dimensional Dirichlet problem
//!
//! ```text
//!     -Δu + e^u - 1 = 0   in Ω,        u = μ   on ∂Ω,
//! ```
//!
//! where the boundary datum μ is a (possibly singular) nonnegative measure,
//! together with the Orlicz-space machinery that governs when the problem is
//! solvable: the complementary pair P(t) = e^|t| - 1 - |t| and
//! P*(t) = (1+|t|)ln(1+|t|) - |t|, Luxemburg and L log L norms, Poisson and
//! Green potentials of measures, a monotone truncation solver for general
//! measure data, and primal/dual capacities built from those norms.
//!
//! Everything is desk-scale: the two model domains are the unit square and the
//! unit disk, discretized with five-point stencils fine enough to observe the
//! theory's qualitative behavior (existence thresholds for Dirac data,
//! removability signatures, capacity monotonicity) without cluster hardware.
//!
//! The scalar Orlicz kernel in [`orlicz::nfunction`] is generic over the float
//! type; the PDE layers are pinned to [`Real`] because their tolerances
//! (1e-10 .. 1e-12) and the exp-range guard are double-precision quantities.

pub mod capacity;
pub mod config;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod laplace;
pub mod measures;
pub mod optim;
pub mod orlicz;
pub mod potentials;
pub mod report;
pub mod solver;

pub use error::{Error, Result};

/// Scalar type used by the grid, solver, and capacity layers.
pub type Real = f64;

/// Arguments to `exp` beyond this are treated as saturated rather than being
/// allowed to overflow to infinity. Callers that can saturate report it as a
/// blow-up diagnostic instead of failing.
pub const EXP_GUARD: Real = 700.0;
