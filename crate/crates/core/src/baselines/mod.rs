//! Single-signal cleaners used as comparison points: Fourier low-pass
//! filtering and a local-level Kalman smoother.

mod fourier;
mod kalman;

pub use fourier::{check_uniform_spacing, fourier_lowpass, fourier_lowpass_matrix, UNIFORM_SPACING_RTOL};
pub use kalman::{
    estimate_local_level, kalman_smooth_local_level, KalmanFit, KalmanLocalLevelParams, KalmanMode, RATIO_GRID_MAX,
    RATIO_GRID_MIN, RATIO_GRID_POINTS,
};

use crate::error::{Error, Result};
use crate::model::ColumnStats;

/// Plain mean, sd and standard error of one series.
pub fn summarize_series(series: &[f64]) -> Result<ColumnStats> {
    if series.len() < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 points, got {}", series.len())));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("series contains non-finite values".into()));
    }
    Ok(ColumnStats::of(series))
}
