use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::model::{column_stats, CleanedSeries, ColumnStats, FactorModel, FitResult, SignalMatrix};
use crate::solver::{KSelectionReport, SolverOptions};

use super::Interval;

/// Bumped whenever a field is renamed, removed or changes meaning.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Level and standard error of one signal before and after cleaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanSummary {
    pub name: String,
    pub before: ColumnStats,
    pub after: ColumnStats,
}

/// Everything needed to audit a `clean` run. The cleaned values equal the
/// input minus `factors * model.loadings'`, so the per-signal numbers here
/// can be recomputed from `cleaned.csv` and `factors.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub input_sha256: String,
    pub time_column: String,
    pub signals: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<Interval>,
    pub rows: usize,
    pub options: SolverOptions,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_selection: Option<KSelectionReport>,
    pub model: FactorModel,
    pub factor_shifts: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub per_signal: Vec<CleanSummary>,
}

impl RunReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        input_bytes: &[u8],
        time_column: &str,
        interval: Option<Interval>,
        input: &SignalMatrix,
        options: SolverOptions,
        k_selection: Option<KSelectionReport>,
        fit: &FitResult,
        cleaned: &CleanedSeries,
    ) -> Self {
        let per_signal = input
            .names()
            .iter()
            .zip(column_stats(input))
            .zip(cleaned.stats())
            .map(|((name, before), after)| CleanSummary { name: name.clone(), before, after })
            .collect();
        RunReport {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            input_sha256: sha256_hex(input_bytes),
            time_column: time_column.to_string(),
            signals: input.names().to_vec(),
            interval,
            rows: input.n_rows(),
            options,
            k: fit.k(),
            k_selection,
            model: fit.model.clone(),
            factor_shifts: fit.factor_shifts.clone(),
            objective_trace: fit.objective_trace.clone(),
            converged: fit.converged,
            iterations: fit.iterations,
            per_signal,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::fixtures;
    use crate::solver::{clean, fit};

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn json_round_trip() {
        let m = fixtures::one_factor(4).unwrap();
        let opts = SolverOptions::default();
        let f = fit(&m, 1, &opts).unwrap();
        let c = clean(&m, &f).unwrap();
        let r = RunReport::new(b"abc", "time", Some(Interval::new(0.0, 99.0).unwrap()), &m, opts, None, &f, &c);
        let back = RunReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.schema_version, REPORT_SCHEMA_VERSION);
    }
}
