//! Common-factor cleaning for co-located sensor signals.
//!
//! Signals recorded side by side often move together because of a shared
//! disturbance (temperature, electronics, stirring) that has nothing to do
//! with the quantity each sensor measures. This crate models that shared
//! part as a small number of latent factors,
//!
//! ```text
//! E[t, i] = mu[i] + sum_k B[i, k] * F[t, k] + noise[t, i]
//! ```
//!
//! estimates `B` and `F` by alternating weighted regressions, and removes
//! `B F'` from the data while keeping every signal's base level `mu`.
//!
//! Also included are the two single-signal cleaners usually used on this
//! kind of data (Fourier low-pass and a local-level Kalman smoother), a
//! seeded Monte-Carlo harness that compares all of them on synthetic
//! contaminated data, and CSV/report plumbing used by the `cofactor` CLI.

pub mod baselines;
pub mod error;
pub mod factor_init;
pub mod io;
pub mod model;
pub mod numerics;
mod par;
pub mod simulation;
pub mod solver;

pub use error::{Error, Result};
pub use model::{
    column_stats, residual_sse, CleanedSeries, ColumnStats, FactorModel, FactorScores, FitResult,
    SignalMatrix, SseBreakdown,
};
pub use numerics::TrimConstant;
pub use solver::{clean, fit, select_num_factors, KSelectionReport, SolverOptions};
