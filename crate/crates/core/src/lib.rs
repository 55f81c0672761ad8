//! Normal-form engine for the 1-D nonlinear wave equation on truncated
//! mode/degree sets.
//!
//! The crate is organised bottom-up:
//!
//! * [`multiindex`]: sparse exponent maps and the decreasing rearrangements
//!   that drive every weight and divisor bound.
//! * [`hampoly`]: sparse Hamiltonian polynomials in the plain
//!   (`I(0)^a z^k z̄^k'`) and adapted (`I(0)^a J^b z^l z̄^l'`) bases, with the
//!   two weighted norms.
//! * [`poisson`]: Poisson bracket and Lie-series composition.
//! * [`resonance`]: frequency model, small divisors, nonresonance checks and
//!   Monte Carlo measure estimates.
//! * [`homological`]: averaging and small-divisor solution of the
//!   homological equation.
//! * [`kamdriver`]: the Newton-type iteration with frequency freezing.
//! * [`nlw`]: the truncated wave-equation Hamiltonian and torus verification.
//! * [`scenario`]: configuration and reproducible report emission used by the
//!   command-line driver.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod error;
pub mod hampoly;
pub mod homological;
pub mod kamdriver;
pub mod multiindex;
pub mod nlw;
pub mod par;
pub mod poisson;
pub mod resonance;
pub mod scenario;

pub use error::{Error, Result};
pub use hampoly::{Basis, ClassNorms, HamiltonianPoly, Monomial, Truncation};
pub use multiindex::{MultiIndex, Rearrangement, SignedIndex};
pub use num_complex::Complex64;
pub use resonance::FrequencyModel;
