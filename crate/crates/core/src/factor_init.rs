//! Starting values for the alternating solver: principal-factor extraction
//! on the raw sample covariance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{FactorModel, SignalMatrix};

/// Initial noise variances never drop below this fraction of the signal's variance.
pub const INIT_VARIANCE_FLOOR: f64 = 1e-3;

/// Loadings from the `k` leading eigenpairs of the sample covariance
/// (`sqrt(lambda_j) * v_j`), base means from the column means and noise
/// variances from the covariance diagonal left unexplained.
pub fn init_factor_model(m: &SignalMatrix, k: usize) -> Result<FactorModel> {
    let signals = m.n_signals();
    if k == 0 || k >= signals {
        return Err(Error::InvalidInput(format!(
            "factor count {k} out of range 1..={} for {signals} signals",
            signals.saturating_sub(1)
        )));
    }
    let cov = m.covariance();
    let eig = cov.clone().try_symmetric_eigen(1e-14, 10_000).ok_or(Error::Eigen)?;

    let mut order: Vec<usize> = (0..signals).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut loadings = DMatrix::zeros(signals, k);
    for (j, &idx) in order.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(idx).clone_owned();
        // largest-magnitude entry positive
        let lead = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
        if lead < 0.0 {
            v.neg_mut();
        }
        let scale = eig.eigenvalues[idx].max(0.0).sqrt();
        loadings.set_column(j, &(v * scale));
    }

    let explained: Vec<f64> = loadings.row_iter().map(|r| r.norm_squared()).collect();
    let noise = DVector::from_iterator(
        signals,
        (0..signals).map(|i| (cov[(i, i)] - explained[i]).max(INIT_VARIANCE_FLOOR * cov[(i, i)])),
    );
    let means = m.values().row_mean().transpose();
    FactorModel::new(loadings, means, noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    #[test]
    fn recovers_loading_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 400;
        let f = normals(&mut rng, n);
        let noise = normals(&mut rng, 2 * n);
        let values = DMatrix::from_fn(n, 2, |t, i| {
            let beta = [1.0, 2.0][i];
            [3.0, -1.0][i] + beta * f[t] + 1e-3 * noise[i * n + t]
        });
        let m = SignalMatrix::from_values(values).unwrap();
        let model = init_factor_model(&m, 1).unwrap();
        let ratio = model.loadings[(1, 0)] / model.loadings[(0, 0)];
        assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
        assert!(model.loadings[(1, 0)] > 0.0);
        assert!((model.base_means[0] - m.column(0).iter().sum::<f64>() / n as f64).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_k() {
        let m = SignalMatrix::from_values(DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 1.0, 0.0, 5.0])).unwrap();
        assert!(init_factor_model(&m, 2).is_err());
        assert!(init_factor_model(&m, 0).is_err());
    }

    /// Power iteration with deflation, used as an independent eigen oracle.
    fn leading_eigenvalue(a: &DMatrix<f64>) -> f64 {
        let mut v = DVector::from_element(a.nrows(), 1.0);
        let mut lambda = 0.0;
        for _ in 0..5000 {
            let w = a * &v;
            lambda = w.norm();
            v = w / lambda;
        }
        lambda
    }

    #[test]
    fn white_noise_first_loading_matches_leading_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 500;
        let z = normals(&mut rng, 4 * n);
        let m = SignalMatrix::from_values(DMatrix::from_column_slice(n, 4, &z)).unwrap();
        let model = init_factor_model(&m, 1).unwrap();
        let oracle = leading_eigenvalue(&m.covariance());
        let norm2 = model.loadings.column(0).norm_squared();
        assert!((norm2 - oracle).abs() < 1e-8 * oracle);
        // near the common unit variance
        assert!(norm2 > 0.9 && norm2 < 1.5, "{norm2}");
    }

    #[test]
    fn diagonal_reproduced_before_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200;
        let f = normals(&mut rng, n);
        let z = normals(&mut rng, 4 * n);
        let values = DMatrix::from_fn(n, 4, |t, i| (i as f64 + 1.0) * f[t] + z[i * n + t]);
        let m = SignalMatrix::from_values(values).unwrap();
        let model = init_factor_model(&m, 1).unwrap();
        let cov = m.covariance();
        for i in 0..4 {
            let implied = model.loadings.row(i).norm_squared() + model.noise_variances[i];
            let floored = model.noise_variances[i] == INIT_VARIANCE_FLOOR * cov[(i, i)];
            assert!(floored || (implied - cov[(i, i)]).abs() < 1e-10 * cov[(i, i)]);
            assert!(model.noise_variances[i] > 0.0);
        }
        // deterministic
        assert_eq!(init_factor_model(&m, 1).unwrap(), model);
    }
}
