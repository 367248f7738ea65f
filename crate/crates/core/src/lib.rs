//! Numerics for free Meixner laws.
//!
//! A free Meixner law is the probability measure whose Jacobi coefficient
//! sequences are constant from the second level on; it is described by a
//! quadruple `(a1, a2, b1, b2)`. This crate computes its moments by three
//! mutually independent routes and cross-checks them:
//!
//! * [`nc`] — the depth-weighted sum over non-crossing partitions of `[m]`
//!   into singletons and pairs,
//! * [`fock`] — vacuum expectations of creation/annihilation operators on a
//!   truncated two-vacuum Fock space (exact at finite truncation),
//! * [`rmt`] — Monte Carlo partial traces of block Gaussian Hermitian
//!   matrices whose moments converge to the same law.
//!
//! [`jacobi`] holds the parameter types, the continued-fraction Cauchy
//! transform and a tridiagonal-matrix moment oracle; [`density`] evaluates
//! the closed-form absolutely continuous density of standardized laws;
//! [`cfree`] verifies conditional freeness of the multi-matrix ensemble.

pub mod cfree;
pub mod density;
mod error;
pub mod fock;
pub mod jacobi;
pub mod nc;
pub mod rmt;

pub use error::{Error, Result};
pub use jacobi::{JacobiParams, MeixnerParams, MomentMethod, MomentTable};
