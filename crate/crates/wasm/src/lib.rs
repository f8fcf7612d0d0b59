//! Browser bindings for the demo page in `www/`. Every export returns a
//! JSON string; errors surface as JavaScript exceptions.

use cofactor::simulation::{
    fixtures, generate_scenario, run_replications, Histogram, Method, ScenarioConfig, Statistic,
};
use cofactor::solver::{
    clean, default_k_max, fit, select_num_factors, SolverOptions, DEFAULT_MIN_SIGNALS,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct ScenarioView {
    times: Vec<f64>,
    names: Vec<String>,
    true_means: Vec<f64>,
    factor: Vec<f64>,
    contaminated: Vec<Vec<f64>>,
    cleaned: Vec<Vec<f64>>,
    raw_means: Vec<f64>,
    cleaned_means: Vec<f64>,
    cleaned_se: Vec<f64>,
}

/// One draw of the three-series contamination scenario, before and after
/// one-factor cleaning.
pub fn scenario_json(seed: u64, spike_magnitude: f64, factor_sd: f64) -> Result<String, String> {
    let cfg = ScenarioConfig { spike_magnitude, factor_sd, ..ScenarioConfig::default() };
    cfg.validate().map_err(|e| e.to_string())?;
    let draw = generate_scenario(seed, &cfg).map_err(|e| e.to_string())?;
    let m = &draw.observed;
    let f = fit(m, 1, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let c = clean(m, &f).map_err(|e| e.to_string())?;
    let columns = |n: usize, get: &dyn Fn(usize) -> Vec<f64>| (0..n).map(get).collect::<Vec<_>>();
    let view = ScenarioView {
        times: m.times().to_vec(),
        names: m.names().to_vec(),
        true_means: cfg.true_means.clone(),
        factor: draw.factor,
        contaminated: columns(m.n_signals(), &|i| m.column(i)),
        cleaned: columns(m.n_signals(), &|i| c.column(i)),
        raw_means: cofactor::column_stats(m).iter().map(|s| s.mean).collect(),
        cleaned_means: c.per_signal_mean.clone(),
        cleaned_se: c.per_signal_se.clone(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

/// Standard-error table for K = 0..k_max on the seven-sensor fixture.
pub fn k_selection_json(seed: u64, decrease_threshold: f64) -> Result<String, String> {
    let m = fixtures::two_factor_array(seed).map_err(|e| e.to_string())?.observed;
    let report = select_num_factors(
        &m,
        default_k_max(m.n_signals()),
        DEFAULT_MIN_SIGNALS,
        decrease_threshold,
        &SolverOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct StudyView {
    replications: usize,
    failures: usize,
    true_means: Vec<f64>,
    /// `[method][series]` average estimated mean.
    average_means: Vec<(Method, Vec<f64>)>,
    histograms: Vec<Histogram>,
}

/// A small replication study; the page draws its sd-of-mean histograms.
pub fn study_json(replications: usize, seed: u64) -> Result<String, String> {
    if replications > 2000 {
        return Err("at most 2000 replications in the browser".into());
    }
    let cfg = ScenarioConfig { replications, base_seed: seed, ..ScenarioConfig::default() };
    let s = run_replications(&cfg, false).map_err(|e| e.to_string())?;
    let view = StudyView {
        replications: s.replications(),
        failures: s.failures.len(),
        true_means: cfg.true_means.clone(),
        average_means: s
            .methods
            .iter()
            .map(|m| (m.method, m.series.iter().map(|x| x.average_mean()).collect()))
            .collect(),
        histograms: s.histograms.into_iter().filter(|h| h.statistic == Statistic::SdOfMean).collect(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn scenario(seed: u32, spike_magnitude: f64, factor_sd: f64) -> Result<String, JsError> {
    scenario_json(seed.into(), spike_magnitude, factor_sd).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn select_k(seed: u32, decrease_threshold: f64) -> Result<String, JsError> {
    k_selection_json(seed.into(), decrease_threshold).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn study(replications: u32, seed: u32) -> Result<String, JsError> {
    study_json(replications as usize, seed.into()).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn scenario_payload_shape() {
        let v: Value = serde_json::from_str(&scenario_json(3, 5.0, 1.0).unwrap()).unwrap();
        assert_eq!(v["times"].as_array().unwrap().len(), 100);
        assert_eq!(v["cleaned"].as_array().unwrap().len(), 3);
        assert_eq!(v["factor"].as_array().unwrap().len(), 100);
        assert!(scenario_json(3, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn k_selection_payload_picks_two() {
        let v: Value = serde_json::from_str(&k_selection_json(fixtures::ARRAY_SEED, cofactor::solver::DEFAULT_DECREASE_THRESHOLD).unwrap()).unwrap();
        assert_eq!(v["chosen_k"], 2);
        assert_eq!(v["rows"].as_array().unwrap().len(), 6);
    }

    #[test]
    fn study_payload_counts() {
        let v: Value = serde_json::from_str(&study_json(20, 1).unwrap()).unwrap();
        assert_eq!(v["replications"], 20);
        for h in v["histograms"].as_array().unwrap() {
            let total: u64 = h["counts"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).sum();
            assert_eq!(total, 20);
        }
        assert!(study_json(5000, 1).is_err());
    }
}
