//! Simulation laboratory for M-ary messaging over an AWGN channel with a
//! noisy AWGN feedback link under a peak energy constraint.
//!
//! The crate has two halves:
//!
//! * analytic: closed-form error exponents for the nonfeedback simplex
//!   baseline, the two-stage scheme with signal protection regions, and the
//!   linear (iterative-refinement) scheme, plus the crossover search between
//!   the two feedback schemes ([`exponents`]);
//! * empirical: trial-exact encoders/decoders for all three schemes
//!   ([`baseline`], [`two_stage`], [`linear`]) driven by a deterministic
//!   Monte Carlo harness ([`montecarlo`]) with per-trial counter-based noise
//!   streams, so results are identical for any worker count.
//!
//! The [`acceptance`] module bundles the end-to-end verification checks that
//! back `fbexp verify` and the integration test suite.

// validators use `!(x > 0.0)` on purpose: unlike `x <= 0.0` it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// reference constants keep their full source digits even where f64 rounds them
#![allow(clippy::excessive_precision)]

pub mod acceptance;
pub mod baseline;
pub mod channel;
pub mod exponents;
pub mod geometry;
pub mod linear;
pub mod montecarlo;
pub mod numerics;
pub mod two_stage;

mod error;
pub use error::{Error, Result};

/// Formats a float with 17 significant digits so CSV output round-trips
/// bit-exactly through `f64::from_str`.
pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}
