//! Alternating estimation of factor scores and per-signal regressions,
//! removal of the fitted factor contribution, and factor-count selection.
//!
//! One cycle of [`fit`]:
//!
//! 1. scores from a weighted regression of each row `E_t - mu` on the loading
//!    columns, weights `1 / sigma_i^2` ([`estimate_factors`]);
//! 2. every score column shifted so its trimmed mean is zero
//!    ([`center_factors`]);
//! 3. each signal regressed on an intercept plus the scores, giving new
//!    `mu`, `B` and `sigma^2` ([`update_params`]).
//!
//! With the weights of a cycle held fixed, steps 1-3 cannot increase
//! `sum_i S_i / sigma_i^2`: step 1 minimises it row by row, and the intercept
//! in step 3 absorbs the shift of step 2. Across cycles the weights change,
//! so the recorded trace is only monotone within a cycle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor_init::init_factor_model;
use crate::model::{residual_sse, CleanedSeries, ColumnStats, FactorModel, FactorScores, FitResult, SignalMatrix};
use crate::numerics::{self, LeastSquares, TrimConstant, MAX_CONDITION};

/// A factor column whose sample sd falls below this is treated as collapsed.
pub const COLLAPSE_SD: f64 = 1e-14;

/// During factor-count selection, a signal whose standard error is already
/// below this fraction of its zero-factor value has been absorbed by a
/// factor. Neither the absorbing step nor later rounding-level changes count
/// as an improvement.
pub const ABSORBED_RELATIVE_SE: f64 = 1e-6;

pub const DEFAULT_MIN_SIGNALS: usize = 2;
pub const DEFAULT_DECREASE_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Stop once `|J_t - J_{t-1}| <= relative_tolerance * |J_t|`.
    pub relative_tolerance: f64,
    pub trim: TrimConstant,
    /// Absolute lower bound on every re-estimated noise variance.
    pub variance_floor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 500,
            relative_tolerance: 1e-8,
            trim: TrimConstant::DEFAULT,
            variance_floor: 1e-12,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be positive".into()));
        }
        if !(self.relative_tolerance > 0.0 && self.relative_tolerance.is_finite()) {
            return Err(Error::InvalidInput("relative_tolerance must be positive".into()));
        }
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return Err(Error::InvalidInput("variance_floor must be positive".into()));
        }
        Ok(())
    }
}

/// Generalised least-squares scores
/// `F' = (B' S^-1 B)^-1 B' S^-1 (E - U)'`, with `S = diag(sigma^2)`.
pub fn estimate_factors(m: &SignalMatrix, model: &FactorModel) -> Result<FactorScores> {
    let (n, signals) = m.values().shape();
    if model.n_signals() != signals {
        return Err(Error::DimensionMismatch { context: "model signals", expected: signals, actual: model.n_signals() });
    }
    let k = model.k;
    if k == 0 {
        return Ok(FactorScores::empty(n));
    }
    let weights = model.noise_variances.map(|v| 1.0 / v);
    let weighted_b = DMatrix::from_fn(signals, k, |i, j| weights[i] * model.loadings[(i, j)]);
    let gram = model.loadings.tr_mul(&weighted_b);

    // Condition of the Jacobi-scaled Gram matrix; invariant to loading scale.
    let diag = gram.diagonal();
    if diag.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Singular { context: "factor scores", condition: f64::INFINITY });
    }
    let inv_sqrt = diag.map(|d| 1.0 / d.sqrt());
    let scaled = DMatrix::from_fn(k, k, |a, b| gram[(a, b)] * inv_sqrt[a] * inv_sqrt[b]);
    let eig = scaled.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular { context: "factor scores", condition });
    }
    let chol = gram.cholesky().ok_or(Error::Singular { context: "factor scores", condition })?;
    // projection: K x I
    let projection = chol.solve(&weighted_b.transpose());

    let mut centered = m.values().clone();
    for mut row in centered.row_iter_mut() {
        row -= model.base_means.transpose();
    }
    Ok(FactorScores::new(centered * projection.transpose()))
}

/// Shift every score column so its trimmed mean is zero. Returns the shifts.
pub fn center_factors(scores: &FactorScores, c: TrimConstant) -> Result<(FactorScores, Vec<f64>)> {
    let mut out = scores.scores.clone();
    let mut shifts = Vec::with_capacity(scores.k());
    for (k, mut col) in out.column_iter_mut().enumerate() {
        let shift = numerics::trimmed_mean(&scores.column(k), c)?;
        col.add_scalar_mut(-shift);
        shifts.push(shift);
    }
    Ok((FactorScores::new(out), shifts))
}

/// Per-signal ordinary regression on `[1 | F]`; `sigma_i^2 = S_i / (n - K - 1)`
/// floored at `variance_floor`.
pub fn update_params(m: &SignalMatrix, scores: &FactorScores, variance_floor: f64) -> Result<FactorModel> {
    let (n, signals) = m.values().shape();
    if scores.scores.nrows() != n {
        return Err(Error::DimensionMismatch { context: "score rows", expected: n, actual: scores.scores.nrows() });
    }
    let k = scores.k();
    if n <= k + 1 {
        return Err(Error::InvalidInput(format!("{n} rows cannot support {k} factors plus an intercept")));
    }
    let mut design = DMatrix::from_element(n, k + 1, 1.0);
    design.view_mut((0, 1), (n, k)).copy_from(&scores.scores);
    let ls = LeastSquares::new(&design, None).map_err(|e| match e {
        Error::Singular { condition, .. } => Error::Singular { context: "parameter update", condition },
        other => other,
    })?;

    let mut means = DVector::zeros(signals);
    let mut loadings = DMatrix::zeros(signals, k);
    let mut variances = DVector::zeros(signals);
    for i in 0..signals {
        let y = m.values().column(i).clone_owned();
        let coef = ls.solve(&y)?;
        means[i] = coef[0];
        for j in 0..k {
            loadings[(i, j)] = coef[j + 1];
        }
        let sse = (&y - &design * &coef).norm_squared();
        variances[i] = (sse / (n - k - 1) as f64).max(variance_floor);
    }
    FactorModel::new(loadings, means, variances)
}

fn zero_factor_fit(m: &SignalMatrix, opts: &SolverOptions) -> Result<FitResult> {
    let n = m.n_rows();
    let signals = m.n_signals();
    let means = m.values().row_mean().transpose();
    let sse: Vec<f64> = (0..signals)
        .map(|i| m.values().column(i).iter().map(|v| (v - means[i]).powi(2)).sum())
        .collect();
    let variances = DVector::from_iterator(signals, sse.iter().map(|s| (s / (n - 1) as f64).max(opts.variance_floor)));
    Ok(FitResult {
        model: FactorModel::new(DMatrix::zeros(signals, 0), means, variances)?,
        scores: FactorScores::empty(n),
        objective_trace: Vec::new(),
        cycle_start_objective: Vec::new(),
        factor_shifts: Vec::new(),
        per_signal_sse: sse,
        converged: true,
        iterations: 0,
    })
}

fn weighted(sse: &[f64], variances: &DVector<f64>) -> f64 {
    sse.iter().zip(variances.iter()).map(|(s, v)| s / v).sum()
}

/// Fit a `k`-factor model by alternating score and parameter updates.
pub fn fit(m: &SignalMatrix, k: usize, opts: &SolverOptions) -> Result<FitResult> {
    opts.validate()?;
    let signals = m.n_signals();
    if k > 0 && k >= signals {
        return Err(Error::InvalidInput(format!("factor count {k} must be below the signal count {signals}")));
    }
    if k == 0 {
        return zero_factor_fit(m, opts);
    }

    let mut model = init_factor_model(m, k)?;
    let mut scores = FactorScores::empty(m.n_rows());
    let mut shifts = Vec::new();
    let mut trace = Vec::new();
    let mut starts = Vec::new();
    let mut per_signal_sse = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let frozen = model.noise_variances.clone();

        let raw = estimate_factors(m, &model)?;
        for j in 0..k {
            let sd = numerics::sample_sd(&raw.column(j));
            if !(sd >= COLLAPSE_SD) {
                return Err(Error::FactorCollapsed { factor: j + 1, sd });
            }
        }
        let start = residual_sse(m, &model, &raw)?.weighted_total;

        let (centered, m_k) = center_factors(&raw, opts.trim)?;
        let next = update_params(m, &centered, opts.variance_floor)?;
        let sse = residual_sse(m, &next, &centered)?.per_signal;
        let objective = weighted(&sse, &frozen);
        debug_assert!(
            objective <= start * (1.0 + 1e-9) + 1e-12,
            "frozen-weight objective increased within a cycle: {start} -> {objective}"
        );

        let previous = trace.last().copied();
        trace.push(objective);
        starts.push(start);
        model = next;
        scores = centered;
        shifts = m_k;
        per_signal_sse = sse;

        if let Some(prev) = previous {
            if (prev - objective).abs() <= opts.relative_tolerance * objective.abs() {
                converged = true;
                break;
            }
        }
    }

    Ok(FitResult {
        model,
        scores,
        objective_trace: trace,
        cycle_start_objective: starts,
        factor_shifts: shifts,
        per_signal_sse,
        converged,
        iterations,
    })
}

/// `E* = E - F B'`. Base means are kept.
pub fn clean(m: &SignalMatrix, fit: &FitResult) -> Result<CleanedSeries> {
    let (n, signals) = m.values().shape();
    if fit.scores.scores.nrows() != n {
        return Err(Error::DimensionMismatch { context: "clean rows", expected: n, actual: fit.scores.scores.nrows() });
    }
    if fit.model.n_signals() != signals {
        return Err(Error::DimensionMismatch {
            context: "clean signals",
            expected: signals,
            actual: fit.model.n_signals(),
        });
    }
    if fit.model.loadings.ncols() != fit.scores.k() {
        return Err(Error::DimensionMismatch {
            context: "clean factors",
            expected: fit.model.loadings.ncols(),
            actual: fit.scores.k(),
        });
    }
    let values = if fit.scores.k() == 0 {
        m.values().clone()
    } else {
        m.values() - &fit.scores.scores * fit.model.loadings.transpose()
    };
    let stats: Vec<ColumnStats> = values
        .column_iter()
        .map(|c| ColumnStats::of(&c.iter().copied().collect::<Vec<_>>()))
        .collect();
    Ok(CleanedSeries {
        times: m.times().to_vec(),
        names: m.names().to_vec(),
        values,
        per_signal_mean: stats.iter().map(|s| s.mean).collect(),
        per_signal_se: stats.iter().map(|s| s.sd_of_mean).collect(),
    })
}

pub fn default_k_max(signals: usize) -> usize {
    signals.saturating_sub(1).min(5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectionRow {
    pub k: usize,
    /// Regression-based `sigma_i / sqrt(n)` per signal; `None` if the fit failed.
    pub standard_errors: Option<Vec<f64>>,
    /// `sd / sqrt(n)` of each cleaned column, for comparison.
    pub cleaned_standard_errors: Option<Vec<f64>>,
    /// Signals whose standard error dropped by more than the threshold
    /// relative to the previous successful row.
    pub improved: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectionReport {
    pub signal_names: Vec<String>,
    pub rows: Vec<KSelectionRow>,
    pub chosen_k: usize,
    pub k_max: usize,
    pub decrease_threshold: f64,
    pub min_signals: usize,
}

impl KSelectionReport {
    pub fn standard_errors(&self, k: usize) -> Option<&[f64]> {
        self.rows.get(k).and_then(|r| r.standard_errors.as_deref())
    }
}

/// Fit `K = 0..=k_max` and keep adding factors while each addition lowers
/// the standard error of at least `min_signals` signals by more than
/// `decrease_threshold` (relative).
pub fn select_num_factors(
    m: &SignalMatrix,
    k_max: usize,
    min_signals: usize,
    decrease_threshold: f64,
    opts: &SolverOptions,
) -> Result<KSelectionReport> {
    let signals = m.n_signals();
    if k_max > 0 && k_max >= signals {
        return Err(Error::InvalidInput(format!("k_max {k_max} must be below the signal count {signals}")));
    }
    if min_signals == 0 {
        return Err(Error::InvalidInput("min_signals must be at least 1".into()));
    }
    if !(decrease_threshold >= 0.0 && decrease_threshold < 1.0) {
        return Err(Error::InvalidInput("decrease_threshold must lie in [0, 1)".into()));
    }
    opts.validate()?;

    let fits: Vec<(usize, Result<(Vec<f64>, Vec<f64>)>)> = crate::par::map_range(0..k_max + 1, true, |k| {
        let res = fit(m, k, opts).and_then(|f| {
            let cleaned = clean(m, &f)?;
            Ok((f.residual_standard_errors(), cleaned.per_signal_se))
        });
        (k, res)
    });

    let mut rows: Vec<KSelectionRow> = fits
        .into_iter()
        .map(|(k, res)| match res {
            Ok((se, cleaned)) => KSelectionRow {
                k,
                standard_errors: Some(se),
                cleaned_standard_errors: Some(cleaned),
                improved: None,
                error: None,
            },
            Err(e) => KSelectionRow {
                k,
                standard_errors: None,
                cleaned_standard_errors: None,
                improved: None,
                error: Some(e.to_string()),
            },
        })
        .collect();

    // K = 0 never fails on a valid matrix.
    let baseline = rows[0].standard_errors.clone().ok_or_else(|| {
        Error::InvalidInput(format!("zero-factor fit failed: {}", rows[0].error.clone().unwrap_or_default()))
    })?;

    let mut chosen = 0;
    let mut still_adding = true;
    let mut previous = baseline.clone();
    for row in rows.iter_mut().skip(1) {
        let Some(current) = row.standard_errors.as_ref() else {
            continue;
        };
        let improved = previous
            .iter()
            .zip(current)
            .zip(&baseline)
            .filter(|((prev, cur), base)| {
                let floor = ABSORBED_RELATIVE_SE * **base;
                **prev > floor && **cur > floor && (**prev - **cur) > decrease_threshold * **prev
            })
            .count();
        row.improved = Some(improved);
        if still_adding {
            if improved >= min_signals {
                chosen = row.k;
            } else {
                still_adding = false;
            }
        }
        previous = current.clone();
    }

    Ok(KSelectionReport {
        signal_names: m.names().to_vec(),
        rows,
        chosen_k: chosen,
        k_max,
        decrease_threshold,
        min_signals,
    })
}
