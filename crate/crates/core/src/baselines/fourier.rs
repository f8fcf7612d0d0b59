use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::model::SignalMatrix;

/// Relative tolerance on sampling gaps for the spacing check.
pub const UNIFORM_SPACING_RTOL: f64 = 1e-6;

pub fn check_uniform_spacing(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Ok(());
    }
    let span = times[times.len() - 1] - times[0];
    let gap = span / (times.len() - 1) as f64;
    for (i, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - gap).abs() > UNIFORM_SPACING_RTOL * gap.abs() {
            return Err(Error::InvalidInput(format!(
                "Fourier filtering needs uniform sampling; gap at row {} is {} vs mean {}",
                i + 1,
                w[1] - w[0],
                gap
            )));
        }
    }
    Ok(())
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Plans {
    let mut planner = FftPlanner::new();
    Plans { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
}

fn lowpass_with(plans: &Plans, series: &[f64], cutoff_fraction: f64) -> Vec<f64> {
    let n = series.len();
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&v| Complex::new(v, 0.0)).collect();
    plans.forward.process(&mut buf);
    // bin j carries frequency min(j, n - j); Nyquist sits at n / 2
    let limit = cutoff_fraction * n as f64 / 2.0;
    for (j, z) in buf.iter_mut().enumerate() {
        let freq = j.min(n - j) as f64;
        if freq > limit {
            *z = Complex::new(0.0, 0.0);
        }
    }
    plans.inverse.process(&mut buf);
    buf.iter().map(|z| z.re / n as f64).collect()
}

fn validate(n: usize, cutoff_fraction: f64) -> Result<()> {
    if n < 4 {
        return Err(Error::InvalidInput(format!("Fourier filtering needs at least 4 points, got {n}")));
    }
    if !(cutoff_fraction > 0.0 && cutoff_fraction <= 1.0) {
        return Err(Error::InvalidInput(format!("cutoff fraction must lie in (0, 1], got {cutoff_fraction}")));
    }
    Ok(())
}

/// Zero every frequency bin above `cutoff_fraction` times Nyquist.
///
/// Bins are removed in conjugate pairs, so the output is real; the DC bin
/// is always kept, so the mean is preserved.
pub fn fourier_lowpass(series: &[f64], cutoff_fraction: f64) -> Result<Vec<f64>> {
    validate(series.len(), cutoff_fraction)?;
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("series contains non-finite values".into()));
    }
    Ok(lowpass_with(&plans(series.len()), series, cutoff_fraction))
}

/// Column-wise low-pass after checking that the timestamps are uniform.
pub fn fourier_lowpass_matrix(m: &SignalMatrix, cutoff_fraction: f64) -> Result<DMatrix<f64>> {
    check_uniform_spacing(m.times())?;
    validate(m.n_rows(), cutoff_fraction)?;
    let p = plans(m.n_rows());
    let mut out = m.values().clone();
    for (i, mut col) in out.column_iter_mut().enumerate() {
        let filtered = lowpass_with(&p, &m.column(i), cutoff_fraction);
        col.iter_mut().zip(filtered).for_each(|(dst, v)| *dst = v);
    }
    Ok(out)
}
