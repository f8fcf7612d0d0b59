//! Local-level (random walk plus noise) Kalman smoother:
//!
//! ```text
//! y_t  = level_t + eps_t,          eps_t ~ N(0, r)
//! level_t = level_{t-1} + eta_t,   eta_t ~ N(0, q)
//! ```
//!
//! The initial level is diffuse, which after the first observation gives the
//! filtered state `(y_1, r)`. The likelihood therefore starts at `t = 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signal-to-noise ratio `q / r` is searched over this log-spaced grid
/// before golden-section refinement.
pub const RATIO_GRID_MIN: f64 = 1e-8;
pub const RATIO_GRID_MAX: f64 = 1e2;
pub const RATIO_GRID_POINTS: usize = 61;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanLocalLevelParams {
    /// r
    pub observation_variance: f64,
    /// q
    pub level_variance: f64,
    /// true when fitted by maximum likelihood (or its fallback)
    pub estimated: bool,
}

impl KalmanLocalLevelParams {
    pub fn new(observation_variance: f64, level_variance: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(observation_variance) || !ok(level_variance) {
            return Err(Error::InvalidInput("Kalman variances must be finite and non-negative".into()));
        }
        if observation_variance == 0.0 && level_variance == 0.0 {
            return Err(Error::InvalidInput("Kalman variances cannot both be zero".into()));
        }
        Ok(KalmanLocalLevelParams { observation_variance, level_variance, estimated: false })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum KalmanMode {
    Fixed { q: f64, r: f64 },
    Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanFit {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// `(1/n) sum_t V_t`; its square root is the reported standard error.
    pub mean_variance: f64,
    pub params: KalmanLocalLevelParams,
    pub log_likelihood: f64,
}

impl KalmanFit {
    pub fn smoothed_mean(&self) -> f64 {
        self.means.iter().sum::<f64>() / self.means.len() as f64
    }

    pub fn standard_error(&self) -> f64 {
        self.mean_variance.sqrt()
    }
}

struct Filtered {
    level: Vec<f64>,
    var: Vec<f64>,
    pred_var: Vec<f64>,
    log_likelihood: f64,
}

fn filter(y: &[f64], q: f64, r: f64) -> Filtered {
    let n = y.len();
    let mut level = vec![0.0; n];
    let mut var = vec![0.0; n];
    let mut pred_var = vec![0.0; n];
    level[0] = y[0];
    var[0] = r;
    pred_var[0] = f64::INFINITY;
    let mut ll = 0.0;
    for t in 1..n {
        let p = var[t - 1] + q;
        let f = p + r;
        let v = y[t] - level[t - 1];
        ll -= 0.5 * ((2.0 * std::f64::consts::PI * f).ln() + v * v / f);
        let gain = p / f;
        level[t] = level[t - 1] + gain * v;
        var[t] = p * r / f;
        pred_var[t] = p;
    }
    Filtered { level, var, pred_var, log_likelihood: ll }
}

fn smooth(f: &Filtered) -> (Vec<f64>, Vec<f64>) {
    let n = f.level.len();
    let mut mean = f.level.clone();
    let mut var = f.var.clone();
    for t in (0..n - 1).rev() {
        let p_next = f.pred_var[t + 1];
        let gain = if p_next > 0.0 { f.var[t] / p_next } else { 0.0 };
        mean[t] = f.level[t] + gain * (mean[t + 1] - f.level[t]);
        var[t] = (f.var[t] + gain * gain * (var[t + 1] - p_next)).max(0.0);
    }
    (mean, var)
}

/// Concentrated log-likelihood at ratio `q / r`, with `r` profiled out.
fn profile(y: &[f64], ratio: f64) -> (f64, f64) {
    let n = y.len();
    let mut level = y[0];
    let mut var = 1.0;
    let mut weighted_ss = 0.0;
    let mut log_det = 0.0;
    for &obs in &y[1..] {
        let p = var + ratio;
        let f = p + 1.0;
        let v = obs - level;
        weighted_ss += v * v / f;
        log_det += f.ln();
        level += p / f * v;
        var = p / f;
    }
    let m = (n - 1) as f64;
    let r = weighted_ss / m;
    let ll = -0.5 * (m * ((2.0 * std::f64::consts::PI).ln() + 1.0 + r.ln()) + log_det);
    (ll, r)
}

fn golden_max(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (hi - lo).abs() < 1e-10 {
            break;
        }
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

fn method_of_moments(y: &[f64]) -> Result<KalmanLocalLevelParams> {
    // diff_t = eta_t + eps_t - eps_{t-1}: var = q + 2r, lag-1 autocov = -r
    let d: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let m = d.iter().sum::<f64>() / d.len() as f64;
    let g0 = d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / d.len() as f64;
    let g1 = d.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / d.len() as f64;
    let r = (-g1).max(0.0);
    let q = (g0 - 2.0 * r).max(0.0);
    let mut p = KalmanLocalLevelParams::new(r, q)?;
    p.estimated = true;
    Ok(p)
}

/// Maximum-likelihood `(q, r)`: 61-point log grid on `q / r`, golden-section
/// refinement around the best grid point, method of moments as fallback.
pub fn estimate_local_level(y: &[f64]) -> Result<KalmanLocalLevelParams> {
    if y.len() < 3 {
        return Err(Error::InvalidInput("Kalman estimation needs at least 3 points".into()));
    }
    let ll_at = |log_ratio: f64| {
        let (ll, r) = profile(y, log_ratio.exp());
        if ll.is_finite() && r > 0.0 {
            ll
        } else {
            f64::NEG_INFINITY
        }
    };
    let (lmin, lmax) = (RATIO_GRID_MIN.ln(), RATIO_GRID_MAX.ln());
    let step = (lmax - lmin) / (RATIO_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..RATIO_GRID_POINTS).map(|i| lmin + step * i as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&g| ll_at(g)).collect();
    let best = (0..grid.len()).max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    if !values[best].is_finite() {
        return method_of_moments(y);
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let refined = golden_max(lo, hi, ll_at);
    let log_ratio = if ll_at(refined) >= values[best] { refined } else { grid[best] };
    let ratio = log_ratio.exp();
    let (_, r) = profile(y, ratio);
    if !(r > 0.0 && r.is_finite()) {
        return method_of_moments(y);
    }
    Ok(KalmanLocalLevelParams { observation_variance: r, level_variance: ratio * r, estimated: true })
}

/// Forward filter plus backward (Rauch-Tung-Striebel) smoother.
pub fn kalman_smooth_local_level(series: &[f64], mode: KalmanMode) -> Result<KalmanFit> {
    if series.len() < 2 {
        return Err(Error::InvalidInput("Kalman smoothing needs at least 2 points".into()));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("series contains non-finite values".into()));
    }
    let params = match mode {
        KalmanMode::Fixed { q, r } => KalmanLocalLevelParams::new(r, q)?,
        KalmanMode::Estimate => estimate_local_level(series)?,
    };
    let filtered = filter(series, params.level_variance, params.observation_variance);
    let (means, variances) = smooth(&filtered);
    let mean_variance = variances.iter().sum::<f64>() / variances.len() as f64;
    Ok(KalmanFit { means, variances, mean_variance, params, log_likelihood: filtered.log_likelihood })
}
