//! Robustness of linear predictor feedback to input-delay perturbations.
//!
//! The crate covers four layers:
//!
//! * [`linalg`]: dense real matrices, the matrix exponential, eigenvalues,
//!   spectral norms and Lyapunov-based decay envelopes `|exp(Mt)| <= Θe^{-λt}`.
//! * [`margin`]: small-gain inequalities giving the largest certified
//!   perturbation magnitude ε for arbitrary measurable delay perturbations,
//!   together with a certified decay rate σ and contraction gain δ.
//! * [`ddesim`]: fixed-step simulation of the closed loop
//!   `ẋ(t) = Ax(t) + Bu(t - r - εd(t))` under predictor feedback, the
//!   differentiated controller, the comparison system and trajectory diagnostics.
//! * [`constant_delay`]: quasipolynomial analysis for a constant delay
//!   mismatch, stability crossing curves and the `(τ_min, τ_max)` window sweep.

// `!(x > 0.0)` rejects NaN on purpose; index loops mirror the matrix algebra.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::excessive_precision
)]

pub mod constant_delay;
pub mod ddesim;
pub mod error;
pub mod linalg;
pub mod margin;

pub use error::{Error, Result};
pub use linalg::{DecayEnvelope, Matrix};
pub use margin::{ComparisonSystem, MarginReport, PlantModel};
