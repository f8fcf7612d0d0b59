//! Synthetic contamination study: independent noisy constants, one shared
//! disturbance added with signal-specific strength, then every cleaner is
//! scored on how well it recovers the constants and their standard errors.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::baselines::{fourier_lowpass, kalman_smooth_local_level, KalmanMode};
use crate::error::{Error, Result};
use crate::model::{column_stats, SignalMatrix};
use crate::numerics::{self, TrimConstant};
use crate::solver::{clean, fit, SolverOptions};

pub const HISTOGRAM_BINS: usize = 30;

/// Replications may fail (for example a collapsed factor); above this
/// fraction the study is aborted.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorKind {
    /// Gaussian random walk rescaled to `factor_sd`, plus positive spikes.
    WalkSpikes,
    /// IID normal with sd `factor_sd`, plus positive spikes.
    WhiteSpikes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub kind: FactorKind,
    pub sd: f64,
    pub spike_count: usize,
    pub spike_magnitude: f64,
}

impl Default for FactorSpec {
    fn default() -> Self {
        FactorSpec { kind: FactorKind::WalkSpikes, sd: 1.0, spike_count: 2, spike_magnitude: 5.0 }
    }
}

impl FactorSpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.sd >= 0.0 && self.sd.is_finite()) {
            return Err(Error::InvalidInput(format!("factor sd must be non-negative, got {}", self.sd)));
        }
        if !self.spike_magnitude.is_finite() {
            return Err(Error::InvalidInput("spike magnitude must be finite".into()));
        }
        if self.spike_count > n {
            return Err(Error::InvalidInput(format!("{} spikes do not fit in {n} points", self.spike_count)));
        }
        Ok(())
    }
}

/// Scenario parameters. Field names double as the keys of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    pub true_means: Vec<f64>,
    pub noise_sd: f64,
    pub factor_loadings: Vec<f64>,
    pub factor_kind: FactorKind,
    pub factor_sd: f64,
    pub spike_count: usize,
    pub spike_magnitude: f64,
    pub replications: usize,
    pub base_seed: u64,
    /// Fourier baseline cutoff as a fraction of Nyquist.
    pub cutoff_fraction: f64,
    /// Fixed Kalman variances; when both are absent they are estimated per series.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kalman_q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kalman_r: Option<f64>,
    /// Factor count used by the common-factor cleaner.
    pub k: usize,
    pub max_iterations: usize,
    pub relative_tolerance: f64,
    pub trim_constant: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let spec = FactorSpec::default();
        let solver = SolverOptions::default();
        ScenarioConfig {
            n: 100,
            true_means: vec![1.0, 5.0, 10.0],
            noise_sd: 1.0,
            factor_loadings: vec![1.0, 1.5, 2.0],
            factor_kind: spec.kind,
            factor_sd: spec.sd,
            spike_count: spec.spike_count,
            spike_magnitude: spec.spike_magnitude,
            replications: 1000,
            base_seed: 1,
            cutoff_fraction: 0.05,
            kalman_q: None,
            kalman_r: None,
            k: 1,
            max_iterations: solver.max_iterations,
            relative_tolerance: solver.relative_tolerance,
            trim_constant: solver.trim.get(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config is always representable")
    }

    pub fn factor_spec(&self) -> FactorSpec {
        FactorSpec {
            kind: self.factor_kind,
            sd: self.factor_sd,
            spike_count: self.spike_count,
            spike_magnitude: self.spike_magnitude,
        }
    }

    pub fn solver_options(&self) -> Result<SolverOptions> {
        let opts = SolverOptions {
            max_iterations: self.max_iterations,
            relative_tolerance: self.relative_tolerance,
            trim: TrimConstant::new(self.trim_constant)?,
            ..SolverOptions::default()
        };
        opts.validate()?;
        Ok(opts)
    }

    pub fn kalman_mode(&self) -> Result<KalmanMode> {
        match (self.kalman_q, self.kalman_r) {
            (None, None) => Ok(KalmanMode::Estimate),
            (Some(q), Some(r)) => Ok(KalmanMode::Fixed { q, r }),
            _ => Err(Error::Config("kalman_q and kalman_r must be given together".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.true_means.is_empty() {
            return Err(Error::Config("true_means is empty".into()));
        }
        if self.true_means.len() != self.factor_loadings.len() {
            return Err(Error::Config(format!(
                "true_means has {} entries but factor_loadings has {}",
                self.true_means.len(),
                self.factor_loadings.len()
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.n < 4 {
            return Err(Error::Config("n must be at least 4".into()));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config("noise_sd must be non-negative".into()));
        }
        if !(self.cutoff_fraction > 0.0 && self.cutoff_fraction <= 1.0) {
            return Err(Error::Config("cutoff_fraction must lie in (0, 1]".into()));
        }
        if self.k >= self.true_means.len() && self.k > 0 {
            return Err(Error::Config("k must be below the number of series".into()));
        }
        self.factor_spec().validate(self.n)?;
        self.solver_options()?;
        self.kalman_mode()?;
        Ok(())
    }
}

fn uniform_times(n: usize) -> Vec<f64> {
    (0..n).map(|t| t as f64).collect()
}

fn draw_uncontaminated(rng: &mut ChaCha8Rng, cfg: &ScenarioConfig) -> Result<SignalMatrix> {
    let signals = cfg.true_means.len();
    let mut values = DMatrix::zeros(cfg.n, signals);
    for i in 0..signals {
        for t in 0..cfg.n {
            let z: f64 = StandardNormal.sample(rng);
            values[(t, i)] = cfg.true_means[i] + cfg.noise_sd * z;
        }
    }
    let names = (1..=signals).map(|i| format!("series{i}")).collect();
    SignalMatrix::new(uniform_times(cfg.n), values, names)
}

fn draw_factor(rng: &mut ChaCha8Rng, n: usize, spec: &FactorSpec) -> Result<Vec<f64>> {
    spec.validate(n)?;
    let mut f: Vec<f64> = match spec.kind {
        FactorKind::WalkSpikes => {
            let mut level = 0.0;
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    level += z;
                    level
                })
                .collect()
        }
        FactorKind::WhiteSpikes => (0..n).map(|_| StandardNormal.sample(rng)).collect(),
    };
    let m = numerics::mean(&f);
    let sd = numerics::sample_sd(&f);
    let scale = if sd > 0.0 { spec.sd / sd } else { 0.0 };
    f.iter_mut().for_each(|v| *v = (*v - m) * scale);

    if spec.spike_count > 0 {
        let positions = rand::seq::index::sample(rng, n, spec.spike_count);
        for p in positions.iter() {
            f[p] += spec.spike_magnitude;
        }
    }
    let shift = numerics::trimmed_mean(&f, TrimConstant::DEFAULT)?;
    f.iter_mut().for_each(|v| *v -= shift);
    Ok(f)
}

/// Column `i` is `true_means[i]` plus IID `N(0, noise_sd^2)` noise.
pub fn generate_uncontaminated(rng_seed: u64, cfg: &ScenarioConfig) -> Result<SignalMatrix> {
    cfg.validate()?;
    draw_uncontaminated(&mut ChaCha8Rng::seed_from_u64(rng_seed), cfg)
}

/// A disturbance series whose trimmed mean is zero.
pub fn generate_common_factor(rng_seed: u64, n: usize, spec: &FactorSpec) -> Result<Vec<f64>> {
    draw_factor(&mut ChaCha8Rng::seed_from_u64(rng_seed), n, spec)
}

/// Adds `loadings[i] * factor` to column `i`.
pub fn contaminate(m: &SignalMatrix, factor: &[f64], loadings: &[f64]) -> Result<SignalMatrix> {
    if factor.len() != m.n_rows() {
        return Err(Error::DimensionMismatch { context: "factor length", expected: m.n_rows(), actual: factor.len() });
    }
    if loadings.len() != m.n_signals() {
        return Err(Error::DimensionMismatch {
            context: "loading count",
            expected: m.n_signals(),
            actual: loadings.len(),
        });
    }
    let mut values = m.values().clone();
    for (i, mut col) in values.column_iter_mut().enumerate() {
        for (v, f) in col.iter_mut().zip(factor) {
            *v += loadings[i] * f;
        }
    }
    SignalMatrix::new(m.times().to_vec(), values, m.names().to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Uncontaminated,
    Contaminated,
    Fourier,
    Kalman,
    CommonFactor,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::Uncontaminated, Method::Contaminated, Method::Fourier, Method::Kalman, Method::CommonFactor];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Uncontaminated => "uncontaminated",
            Method::Contaminated => "contaminated",
            Method::Fourier => "fourier",
            Method::Kalman => "kalman",
            Method::CommonFactor => "common_factor",
        }
    }

    /// Fourier filtering yields a level but no error estimate.
    pub fn has_standard_error(self) -> bool {
        self != Method::Fourier
    }
}

/// Per-series estimates from every method for one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    /// `[method][series] -> (mean, sd_of_mean)`; sd is NaN where not available.
    pub estimates: Vec<Vec<(f64, f64)>>,
}

/// One synthetic dataset together with the parts it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDraw {
    pub truth: SignalMatrix,
    pub factor: Vec<f64>,
    pub observed: SignalMatrix,
}

/// The data of the replication that uses `seed`.
pub fn generate_scenario(seed: u64, cfg: &ScenarioConfig) -> Result<ScenarioDraw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = draw_uncontaminated(&mut rng, cfg)?;
    let factor = draw_factor(&mut rng, cfg.n, &cfg.factor_spec())?;
    let observed = contaminate(&truth, &factor, &cfg.factor_loadings)?;
    Ok(ScenarioDraw { truth, factor, observed })
}

/// Runs one replication: generate, contaminate, clean with all methods.
pub fn run_replication(cfg: &ScenarioConfig, index: usize) -> Result<ReplicationOutcome> {
    let ScenarioDraw { truth, observed, .. } = generate_scenario(cfg.base_seed.wrapping_add(index as u64), cfg)?;
    let signals = observed.n_signals();

    let stats = |m: &SignalMatrix| column_stats(m).into_iter().map(|s| (s.mean, s.sd_of_mean)).collect::<Vec<_>>();

    let mut fourier = Vec::with_capacity(signals);
    let mut kalman = Vec::with_capacity(signals);
    let mode = cfg.kalman_mode()?;
    for i in 0..signals {
        let col = observed.column(i);
        let filtered = fourier_lowpass(&col, cfg.cutoff_fraction)?;
        fourier.push((numerics::mean(&filtered), f64::NAN));
        let k = kalman_smooth_local_level(&col, mode)?;
        kalman.push((k.smoothed_mean(), k.standard_error()));
    }

    let fitted = fit(&observed, cfg.k, &cfg.solver_options()?)?;
    let cleaned = clean(&observed, &fitted)?;
    let common: Vec<(f64, f64)> =
        cleaned.per_signal_mean.iter().copied().zip(cleaned.per_signal_se.iter().copied()).collect();

    Ok(ReplicationOutcome { estimates: vec![stats(&truth), stats(&observed), fourier, kalman, common] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub true_mean: f64,
    pub means: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd_of_means: Option<Vec<f64>>,
}

impl SeriesSummary {
    pub fn average_mean(&self) -> f64 {
        numerics::mean(&self.means)
    }

    pub fn median_sd_of_mean(&self) -> Option<f64> {
        self.sd_of_means.as_deref().map(median)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub series: Vec<SeriesSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    SdOfMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub method: Method,
    pub series: usize,
    pub statistic: Statistic,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub index: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub config: ScenarioConfig,
    /// Indices of the replications that succeeded, ascending.
    pub replication_indices: Vec<usize>,
    pub failures: Vec<ReplicationFailure>,
    pub methods: Vec<MethodSummary>,
    pub histograms: Vec<Histogram>,
}

impl ReplicationSummary {
    pub fn method(&self, method: Method) -> &MethodSummary {
        self.methods.iter().find(|m| m.method == method).expect("every method is summarised")
    }

    pub fn replications(&self) -> usize {
        self.replication_indices.len()
    }
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Equal-width bins over `[min, max]` of all the given samples.
fn shared_edges(samples: &[&[f64]]) -> Vec<f64> {
    let (lo, hi) = samples
        .iter()
        .flat_map(|s| s.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    (0..=HISTOGRAM_BINS).map(|b| if b == HISTOGRAM_BINS { hi } else { lo + width * b as f64 }).collect()
}

fn bin_counts(x: &[f64], edges: &[f64]) -> Vec<usize> {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let mut counts = vec![0; bins];
    for v in x {
        let b = (((v - lo) / (hi - lo)) * bins as f64).floor() as isize;
        counts[b.clamp(0, bins as isize - 1) as usize] += 1;
    }
    counts
}

fn histograms(methods: &[MethodSummary], signals: usize) -> Vec<Histogram> {
    let mut out = Vec::new();
    for series in 0..signals {
        for statistic in [Statistic::Mean, Statistic::SdOfMean] {
            fn pick(m: &MethodSummary, series: usize, statistic: Statistic) -> Option<&[f64]> {
                let s = &m.series[series];
                match statistic {
                    Statistic::Mean => Some(&s.means),
                    Statistic::SdOfMean => s.sd_of_means.as_deref(),
                }
            }
            let samples: Vec<&[f64]> = methods.iter().filter_map(|m| pick(m, series, statistic)).collect();
            let edges = shared_edges(&samples);
            for m in methods {
                if let Some(x) = pick(m, series, statistic) {
                    out.push(Histogram {
                        method: m.method,
                        series,
                        statistic,
                        edges: edges.clone(),
                        counts: bin_counts(x, &edges),
                    });
                }
            }
        }
    }
    out
}

/// Runs every replication (in parallel when `parallel` is set and the
/// crate's `parallel` feature is on) and
/// assembles the per-method distributions. The result depends only on `cfg`.
pub fn run_replications(cfg: &ScenarioConfig, parallel: bool) -> Result<ReplicationSummary> {
    cfg.validate()?;
    let run = |r: usize| (r, run_replication(cfg, r));
    let mut results = crate::par::map_range(0..cfg.replications, parallel, run);
    results.sort_by_key(|(r, _)| *r);

    let mut failures = Vec::new();
    let mut outcomes = Vec::new();
    for (r, res) in results {
        match res {
            Ok(o) => outcomes.push((r, o)),
            Err(e) => failures.push(ReplicationFailure {
                index: r,
                seed: cfg.base_seed.wrapping_add(r as u64),
                error: e.to_string(),
            }),
        }
    }
    if failures.len() as f64 > MAX_FAILURE_FRACTION * cfg.replications as f64 {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total: cfg.replications,
            first: failures[0].error.clone(),
        });
    }

    let signals = cfg.true_means.len();
    let methods: Vec<MethodSummary> = Method::ALL
        .iter()
        .enumerate()
        .map(|(mi, &method)| MethodSummary {
            method,
            series: (0..signals)
                .map(|i| SeriesSummary {
                    true_mean: cfg.true_means[i],
                    means: outcomes.iter().map(|(_, o)| o.estimates[mi][i].0).collect(),
                    sd_of_means: method
                        .has_standard_error()
                        .then(|| outcomes.iter().map(|(_, o)| o.estimates[mi][i].1).collect()),
                })
                .collect(),
        })
        .collect();
    let histograms = histograms(&methods, signals);
    Ok(ReplicationSummary {
        config: cfg.clone(),
        replication_indices: outcomes.iter().map(|(r, _)| *r).collect(),
        failures,
        methods,
        histograms,
    })
}

pub fn run_replication_study(cfg: &ScenarioConfig) -> Result<ReplicationSummary> {
    run_replications(cfg, true)
}

/// Seeded datasets with known structure, used for factor-count checks and demos.
pub mod fixtures {
    use super::*;

    /// Signals with no shared structure at all.
    pub fn white_noise(seed: u64, n: usize, signals: usize) -> Result<SignalMatrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = DMatrix::from_fn(n, signals, |_, i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            i as f64 + z
        });
        SignalMatrix::from_values(values)
    }

    /// One realisation of the default three-series contamination scenario.
    pub fn one_factor(seed: u64) -> Result<SignalMatrix> {
        Ok(generate_scenario(seed, &ScenarioConfig::default())?.observed)
    }

    pub const ARRAY_NAMES: [&str; 7] = ["Na", "K", "Ca", "Mg", "Cl", "ClO4", "NH4"];
    /// Base potentials (mV).
    pub const ARRAY_BASE: [f64; 7] = [120.0, 85.0, -45.0, 30.0, 210.0, 150.0, -95.0];
    pub const ARRAY_NOISE_SD: [f64; 7] = [0.3, 0.3, 0.3, 0.05, 0.05, 0.3, 0.3];
    pub const ARRAY_LOADINGS: [[f64; 2]; 7] =
        [[1.0, 0.4], [1.2, 0.3], [0.8, 0.4], [1.5, 0.2], [0.0, 1.3], [0.5, 0.9], [0.3, 1.1]];
    pub const ARRAY_ROWS: usize = 200;
    /// Seed of the shipped sensor-array fixture.
    pub const ARRAY_SEED: u64 = 2008;

    /// Seven-sensor array driven by two independent walk-with-spikes
    /// disturbances, each loading on at least three sensors. Two sensors are
    /// quieter than the rest. Sampled every 2 s.
    #[derive(Debug, Clone)]
    pub struct SensorArray {
        pub observed: SignalMatrix,
        pub truth: SignalMatrix,
        pub factors: DMatrix<f64>,
        pub loadings: DMatrix<f64>,
    }

    pub fn two_factor_array(seed: u64) -> Result<SensorArray> {
        let n = ARRAY_ROWS;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth_values = DMatrix::from_fn(n, 7, |_, i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            ARRAY_BASE[i] + ARRAY_NOISE_SD[i] * z
        });
        let spec = FactorSpec::default();
        let f1 = draw_factor(&mut rng, n, &spec)?;
        let f2 = draw_factor(&mut rng, n, &spec)?;
        let factors = DMatrix::from_fn(n, 2, |t, k| if k == 0 { f1[t] } else { f2[t] });
        let loadings = DMatrix::from_fn(7, 2, |i, k| ARRAY_LOADINGS[i][k]);
        let observed_values = &truth_values + &factors * loadings.transpose();
        let times: Vec<f64> = (0..n).map(|t| 1_000_000.0 + 2.0 * t as f64).collect();
        let names: Vec<String> = ARRAY_NAMES.iter().map(|s| s.to_string()).collect();
        Ok(SensorArray {
            observed: SignalMatrix::new(times.clone(), observed_values, names.clone())?,
            truth: SignalMatrix::new(times, truth_values, names)?,
            factors,
            loadings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_is_rejected() {
        let cfg = ScenarioConfig { noise_sd: 0.0, ..ScenarioConfig::default() };
        assert!(generate_uncontaminated(3, &cfg).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = ScenarioConfig::default();
        assert_eq!(generate_uncontaminated(42, &cfg).unwrap(), generate_uncontaminated(42, &cfg).unwrap());
        let spec = FactorSpec::default();
        assert_eq!(generate_common_factor(42, 100, &spec).unwrap(), generate_common_factor(42, 100, &spec).unwrap());
    }

    #[test]
    fn uncontaminated_means_near_truth() {
        let cfg = ScenarioConfig::default();
        let ok = (0..1000u64)
            .filter(|&s| {
                let m = generate_uncontaminated(s, &cfg).unwrap();
                column_stats(&m).iter().zip(&cfg.true_means).all(|(st, mu)| (st.mean - mu).abs() <= 0.4)
            })
            .count();
        assert!(ok >= 990, "{ok}");
    }

    #[test]
    fn null_factor_is_zero() {
        let spec = FactorSpec { sd: 0.0, spike_count: 0, ..FactorSpec::default() };
        assert!(generate_common_factor(5, 50, &spec).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn default_factor_properties() {
        for seed in 0..50 {
            let f = generate_common_factor(seed, 100, &FactorSpec::default()).unwrap();
            let tm = numerics::trimmed_mean(&f, TrimConstant::DEFAULT).unwrap();
            assert!(tm.abs() <= 1e-10, "{tm}");
            // walk component alone has sd exactly 1 before spikes are added
            let spec = FactorSpec { spike_count: 0, ..FactorSpec::default() };
            let w = generate_common_factor(seed, 100, &spec).unwrap();
            let sd = numerics::sample_sd(&w);
            assert!((0.9..=1.1).contains(&sd), "{sd}");
        }
        assert!(generate_common_factor(1, 3, &FactorSpec::default()).is_ok());
        assert!(generate_common_factor(1, 1, &FactorSpec::default()).is_err());
    }

    #[test]
    fn contaminate_cases() {
        let cfg = ScenarioConfig::default();
        let m = generate_uncontaminated(9, &cfg).unwrap();
        assert_eq!(contaminate(&m, &vec![0.0; 100], &cfg.factor_loadings).unwrap(), m);
        let shifted = contaminate(&m, &vec![1.0; 100], &cfg.factor_loadings).unwrap();
        let d = shifted.values() - m.values();
        for (i, l) in cfg.factor_loadings.iter().enumerate() {
            assert!(d.column(i).iter().all(|v| (v - l).abs() < 1e-12));
        }
        assert!(contaminate(&m, &[1.0; 3], &cfg.factor_loadings).is_err());
        assert!(contaminate(&m, &vec![1.0; 100], &[1.0]).is_err());
    }

    #[test]
    fn config_rejects_unknown_and_inconsistent_keys() {
        assert!(ScenarioConfig::from_toml_str("n = 50\nreplicatons = 3\n").is_err());
        assert!(ScenarioConfig::from_toml_str("true_means = [1.0, 2.0]\n").is_err());
        assert!(ScenarioConfig::from_toml_str("kalman_q = 0.1\n").is_err());
        let cfg = ScenarioConfig::from_toml_str("replications = 7\nfactor_kind = \"white-spikes\"\n").unwrap();
        assert_eq!(cfg.replications, 7);
        assert_eq!(cfg.factor_kind, FactorKind::WhiteSpikes);
        assert_eq!(ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn histogram_counts_cover_all_samples() {
        let cfg = ScenarioConfig { replications: 20, ..ScenarioConfig::default() };
        let s = run_replications(&cfg, false).unwrap();
        for h in &s.histograms {
            assert_eq!(h.counts.iter().sum::<usize>(), s.replications());
            assert_eq!(h.edges.len(), HISTOGRAM_BINS + 1);
        }
        assert!(s.histograms.iter().all(|h| !(h.method == Method::Fourier && h.statistic == Statistic::SdOfMean)));
    }
}
