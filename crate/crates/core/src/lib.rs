//! Verification toolkit for the discrete Hardy–Littlewood maximal operator over
//! ℓ¹ balls in ℤᵈ at dyadic radii `t ≤ √d`.
//!
//! The crate is organised bottom-up:
//!
//! - [`combinatorics`]: exact lattice point counts for ℓ¹ spheres and balls and
//!   the point enumerators every oracle is built on.
//! - [`krawtchouk`]: exact and floating Krawtchouk polynomials and checks of
//!   their classical properties, including the uniform exponential bound.
//! - [`multipliers`]: the Fourier symbols `m_t`, `s_t`, `λ¹_t`, `λ²_t` on the
//!   torus, each with a brute-force oracle and a fast evaluator.
//! - [`verifier`]: sampled checks of the pointwise multiplier inequalities with
//!   worst-case slack reports.
//! - [`operator`]: spatial averaging and maximal operators on finitely
//!   supported and periodic functions, with norm-ratio probes.
//! - [`cli`]: the `l1ml` command-line front end.

pub mod cli;
pub mod combinatorics;
pub mod csv;
pub mod error;
pub mod krawtchouk;
pub mod multipliers;
pub mod numeric;
pub mod operator;
pub mod verifier;

pub use error::{Error, Result};
