//! Numerical laboratory for the MUCOGARCH(1,1) volatility process.
//!
//! The crate simulates the matrix volatility process exactly under
//! compound Poisson driving noise, evaluates the known sufficient
//! conditions for stationarity, finite moments and geometric ergodicity,
//! and verifies the drift machinery behind them empirically:
//!
//! * [`matcore`] — vec/Kronecker calculus, matrix exponential, PSD square
//!   roots, numerical-range extremes and the eigenbasis-twisted norms.
//! * [`levy`] — compound Poisson jump trains and integrals against the
//!   jump intensity measure.
//! * [`process`] — exact event-driven simulation and the integral
//!   representation used as its correctness oracle.
//! * [`conditions`] — numeric verdicts for each stationarity /
//!   ergodicity condition.
//! * [`generator`] — the extended generator, drift-inequality fitting and
//!   the exponential-in-time moment bound.
//! * [`ergolab`] — convergence, irreducibility and aperiodicity
//!   experiments at desk scale.

pub mod conditions;
pub mod ergolab;
pub mod error;
pub mod generator;
pub mod levy;
pub mod matcore;
pub mod process;
pub mod seeding;

pub use error::{CoreError, Result};
