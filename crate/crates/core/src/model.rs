//! Data types shared by the solver, baselines and I/O, plus the
//! sum-of-squares bookkeeping of the factor model.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics;

/// `n` timestamped readings of `I` co-located signals.
///
/// Guaranteed: `n >= 2`, `I >= 1`, strictly increasing finite times, finite
/// values, and positive sample variance in every column.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    times: Vec<f64>,
    values: DMatrix<f64>,
    names: Vec<String>,
}

impl SignalMatrix {
    pub fn new(times: Vec<f64>, values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        let (n, signals) = values.shape();
        if n < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 rows, got {n}")));
        }
        if signals == 0 {
            return Err(Error::InvalidInput("need at least one signal".into()));
        }
        if times.len() != n {
            return Err(Error::DimensionMismatch { context: "signal times", expected: n, actual: times.len() });
        }
        if names.len() != signals {
            return Err(Error::DimensionMismatch { context: "signal names", expected: signals, actual: names.len() });
        }
        if let Some(t) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite timestamp at row {t}")));
        }
        if let Some(t) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "timestamps must be strictly increasing (rows {} and {})",
                t,
                t + 1
            )));
        }
        for (i, col) in values.column_iter().enumerate() {
            if let Some(t) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Cell { row: t, column: names[i].clone(), message: "non-finite value".into() });
            }
            let col: Vec<f64> = col.iter().copied().collect();
            if !(numerics::sample_sd(&col) > 0.0) {
                return Err(Error::InvalidInput(format!("signal '{}' has zero variance", names[i])));
            }
        }
        Ok(SignalMatrix { times, values, names })
    }

    /// Build with generated names `s1..sI` and times `0..n`.
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        let times = (0..values.nrows()).map(|t| t as f64).collect();
        let names = (1..=values.ncols()).map(|i| format!("s{i}")).collect();
        SignalMatrix::new(times, values, names)
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_signals(&self) -> usize {
        self.values.ncols()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.values.column(i).iter().copied().collect()
    }

    /// Sample covariance (`n - 1` denominator).
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.n_rows();
        let means = self.values.row_mean();
        let mut centered = self.values.clone();
        for mut row in centered.row_iter_mut() {
            row -= &means;
        }
        centered.tr_mul(&centered) / (n - 1) as f64
    }

    /// Rows `rows` (indices into this matrix), kept in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<SignalMatrix> {
        let times = rows.iter().map(|&r| self.times[r]).collect();
        let values = self.values.select_rows(rows);
        SignalMatrix::new(times, values, self.names.clone())
    }
}

/// Loadings `B` (I x K), base means, diagonal noise variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    pub loadings: DMatrix<f64>,
    pub base_means: DVector<f64>,
    pub noise_variances: DVector<f64>,
    pub k: usize,
}

impl FactorModel {
    pub fn new(loadings: DMatrix<f64>, base_means: DVector<f64>, noise_variances: DVector<f64>) -> Result<Self> {
        let (signals, k) = loadings.shape();
        if base_means.len() != signals {
            return Err(Error::DimensionMismatch { context: "base means", expected: signals, actual: base_means.len() });
        }
        if noise_variances.len() != signals {
            return Err(Error::DimensionMismatch {
                context: "noise variances",
                expected: signals,
                actual: noise_variances.len(),
            });
        }
        if k >= signals && k > 0 {
            return Err(Error::InvalidInput(format!("factor count {k} must be below the signal count {signals}")));
        }
        if noise_variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput("noise variances must be positive".into()));
        }
        if loadings.iter().chain(base_means.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("model parameters must be finite".into()));
        }
        Ok(FactorModel { loadings, base_means, noise_variances, k })
    }

    pub fn n_signals(&self) -> usize {
        self.base_means.len()
    }
}

/// Per-time factor values, `n x K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorScores {
    pub scores: DMatrix<f64>,
}

impl FactorScores {
    pub fn new(scores: DMatrix<f64>) -> Self {
        FactorScores { scores }
    }

    pub fn empty(n: usize) -> Self {
        FactorScores { scores: DMatrix::zeros(n, 0) }
    }

    pub fn k(&self) -> usize {
        self.scores.ncols()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.scores.column(k).iter().copied().collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FactorModel,
    pub scores: FactorScores,
    /// Weighted SSE `sum_i S_i / sigma_i^2` after each cycle, with the
    /// weights that were used for that cycle's factor estimate.
    pub objective_trace: Vec<f64>,
    /// Same weights, evaluated right after the factor-score step of each
    /// cycle. Entry-wise `objective_trace <= cycle_start_objective`.
    pub cycle_start_objective: Vec<f64>,
    /// Trimmed-mean shifts `m_k` applied in the final cycle.
    pub factor_shifts: Vec<f64>,
    pub per_signal_sse: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn k(&self) -> usize {
        self.model.k
    }

    /// Regression-based standard error of each signal's mean,
    /// `sqrt(S_i / (n - K - 1)) / sqrt(n)`.
    pub fn residual_standard_errors(&self) -> Vec<f64> {
        let n = self.scores.scores.nrows() as f64;
        let dof = n - self.k() as f64 - 1.0;
        self.per_signal_sse.iter().map(|s| (s / dof).sqrt() / n.sqrt()).collect()
    }
}

/// Observed data minus the fitted factor contribution.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanedSeries {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    pub values: DMatrix<f64>,
    pub per_signal_mean: Vec<f64>,
    pub per_signal_se: Vec<f64>,
}

impl CleanedSeries {
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.values.column(i).iter().copied().collect()
    }

    pub fn stats(&self) -> Vec<ColumnStats> {
        self.values
            .column_iter()
            .map(|c| ColumnStats::of(&c.iter().copied().collect::<Vec<_>>()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub sd: f64,
    pub sd_of_mean: f64,
}

impl ColumnStats {
    /// Mean, `n - 1` sd and `sd / sqrt(n)`. Callers guarantee `n >= 2`.
    pub(crate) fn of(x: &[f64]) -> ColumnStats {
        let sd = numerics::sample_sd(x);
        ColumnStats { mean: numerics::mean(x), sd, sd_of_mean: sd / (x.len() as f64).sqrt() }
    }
}

pub fn column_stats(m: &SignalMatrix) -> Vec<ColumnStats> {
    (0..m.n_signals()).map(|i| ColumnStats::of(&m.column(i))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SseBreakdown {
    pub total: f64,
    pub per_time: Vec<f64>,
    pub per_signal: Vec<f64>,
    /// `sum_i S_i / sigma_i^2` with the model's noise variances.
    pub weighted_total: f64,
}

/// Residual `E - mu - B F'`.
pub fn residuals(m: &SignalMatrix, model: &FactorModel, scores: &FactorScores) -> Result<DMatrix<f64>> {
    let (n, signals) = m.values().shape();
    if model.n_signals() != signals {
        return Err(Error::DimensionMismatch { context: "model signals", expected: signals, actual: model.n_signals() });
    }
    if scores.scores.nrows() != n {
        return Err(Error::DimensionMismatch { context: "score rows", expected: n, actual: scores.scores.nrows() });
    }
    if scores.k() != model.k || model.loadings.ncols() != model.k {
        return Err(Error::DimensionMismatch { context: "factor count", expected: model.k, actual: scores.k() });
    }
    let mut r = m.values().clone();
    if model.k > 0 {
        r -= &scores.scores * model.loadings.transpose();
    }
    for mut row in r.row_iter_mut() {
        row -= model.base_means.transpose();
    }
    Ok(r)
}

/// Residual sums of squares grouped by time and by signal.
pub fn residual_sse(m: &SignalMatrix, model: &FactorModel, scores: &FactorScores) -> Result<SseBreakdown> {
    let r = residuals(m, model, scores)?;
    let sq = r.map(|v| v * v);
    let per_time: Vec<f64> = sq.row_iter().map(|row| row.iter().sum()).collect();
    let per_signal: Vec<f64> = sq.column_iter().map(|col| col.iter().sum()).collect();
    let total = per_signal.iter().sum();
    let weighted_total = per_signal.iter().zip(model.noise_variances.iter()).map(|(s, v)| s / v).sum();
    Ok(SseBreakdown { total, per_time, per_signal, weighted_total })
}
