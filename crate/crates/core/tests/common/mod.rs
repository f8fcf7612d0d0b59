#![allow(dead_code)]

use cofactor::model::{FactorModel, SignalMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Smoothed means and variances of a local-level model computed from the
/// full joint posterior of the levels. With a flat prior on the first
/// level the posterior precision is `I/r + D'D/q`, `D` the first-difference
/// matrix, and the posterior mean solves `P mu = y / r`.
pub fn dense_local_level_posterior(y: &[f64], q: f64, r: f64) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    let mut p = DMatrix::<f64>::identity(n, n) / r;
    for t in 0..n - 1 {
        p[(t, t)] += 1.0 / q;
        p[(t + 1, t + 1)] += 1.0 / q;
        p[(t, t + 1)] -= 1.0 / q;
        p[(t + 1, t)] -= 1.0 / q;
    }
    let chol = p.cholesky().expect("posterior precision is positive definite");
    let cov = chol.inverse();
    let mean = &cov * DVector::from_column_slice(y) / r;
    (mean.iter().copied().collect(), cov.diagonal().iter().copied().collect())
}

/// Solves `(X' W X) b = X' W y` by Gauss-Jordan elimination with partial
/// pivoting on the explicitly formed normal equations.
pub fn normal_equations(x: &DMatrix<f64>, y: &[f64], w: &[f64]) -> Vec<f64> {
    let (n, p) = x.shape();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (j, row) in a.iter_mut().enumerate() {
        for l in 0..p {
            row[l] = (0..n).map(|t| w[t] * x[(t, j)] * x[(t, l)]).sum();
        }
        row[p] = (0..n).map(|t| w[t] * x[(t, j)] * y[t]).sum();
    }
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..p {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=p {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..p).map(|j| a[j][p] / a[j][j]).collect()
}

/// Random `K`-factor data with a known generating model.
pub struct Instance {
    pub m: SignalMatrix,
    pub k: usize,
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signals = rng.random_range(3..=7);
    let k = rng.random_range(1..=(signals - 1).min(3));
    let n = rng.random_range(30..=120);
    let loadings = DMatrix::from_fn(signals, k, |_, _| normal(&mut rng));
    let factors = DMatrix::from_fn(n, k, |_, _| normal(&mut rng));
    let noise: Vec<f64> = (0..signals).map(|_| rng.random_range(0.2..1.0)).collect();
    let means: Vec<f64> = (0..signals).map(|_| 10.0 * normal(&mut rng)).collect();
    let values = DMatrix::from_fn(n, signals, |t, i| {
        let common: f64 = (0..k).map(|j| loadings[(i, j)] * factors[(t, j)]).sum();
        means[i] + common + noise[i] * normal(&mut rng)
    });
    Instance { m: SignalMatrix::from_values(values).unwrap(), k }
}

/// A well-conditioned random invertible `k x k` matrix.
pub fn random_invertible(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    loop {
        let a = DMatrix::from_fn(k, k, |_, _| normal(rng));
        let sv = a.singular_values();
        if sv.min() > 0.2 * sv.max() {
            return a;
        }
    }
}

/// `model` with loadings `B A`, which describes the same common part as
/// scores `F A^-T`.
pub fn rotated_model(model: &FactorModel, a: &DMatrix<f64>) -> FactorModel {
    FactorModel::new(&model.loadings * a, model.base_means.clone(), model.noise_variances.clone()).unwrap()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn rmse(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    ((a - b).iter().map(|v| v * v).sum::<f64>() / a.len() as f64).sqrt()
}
