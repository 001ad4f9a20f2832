//! Maximal topological solutions of the generalized Chern–Simons equation
//!
//! ```text
//! Δf = λ e^f (e^{af} - 1) + 4π Σ_j n_j δ_{p_j}
//! ```
//!
//! on the lattice graph Z^n, computed by monotone iteration on Manhattan
//! balls and exhaustion over increasing radii, together with numerical
//! certificates for monotonicity, energy decrease, maximality and
//! exponential decay.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`, which is what the tolerances
//! in this crate are tuned for.

// `!(x > 0)` style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod exhaustion;
pub mod field;
pub mod lattice;
pub mod linear;
pub mod scalar;
pub mod scheme;

pub use field::{Exponent, Field, Region};
pub use lattice::{LatticeDomain, LatticePoint, Params, Vortex, VortexConfig};
pub use scalar::Real;

pub type Field64 = field::Field<f64>;
pub type Field32 = field::Field<f32>;
pub type Params64 = lattice::Params<f64>;
pub type Params32 = lattice::Params<f32>;
pub type BoundedSolution64 = scheme::BoundedSolution<f64>;
pub type SolveOptions64 = scheme::SolveOptions<f64>;
pub type LinearSolveOptions64 = linear::LinearSolveOptions<f64>;

