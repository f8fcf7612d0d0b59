//! Small numerical kernels: trimmed mean, weighted least squares and
//! first-order error propagation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Designs whose weighted condition number exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Width of the trimmed-mean band in standard deviations.
///
/// The default 2.326 is the 99th percentile of the standard normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TrimConstant(f64);

impl TrimConstant {
    pub const DEFAULT: TrimConstant = TrimConstant(2.326);

    pub fn new(c: f64) -> Result<Self> {
        if c.is_finite() && c > 0.0 {
            Ok(TrimConstant(c))
        } else {
            Err(Error::InvalidInput(format!("trim constant must be positive, got {c}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for TrimConstant {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<f64> for TrimConstant {
    type Error = Error;
    fn try_from(c: f64) -> Result<Self> {
        TrimConstant::new(c)
    }
}

impl From<TrimConstant> for f64 {
    fn from(c: TrimConstant) -> f64 {
        c.0
    }
}

/// Arithmetic mean.
pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation with the `n - 1` denominator (0 for `n < 2`).
pub fn sample_sd(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (x.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimmedMean {
    pub value: f64,
    /// Number of points inside the band.
    pub kept: usize,
    /// Set when no point fell inside the band and the plain mean was used.
    pub band_empty: bool,
}

/// Mean of the points within `c` sample standard deviations of the plain mean.
///
/// One pass: the band is computed once from the full sample.
pub fn trimmed_mean(x: &[f64], c: TrimConstant) -> Result<f64> {
    trimmed_mean_detailed(x, c).map(|t| t.value)
}

pub fn trimmed_mean_detailed(x: &[f64], c: TrimConstant) -> Result<TrimmedMean> {
    if x.is_empty() {
        return Err(Error::InvalidInput("trimmed mean of an empty vector".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("trimmed mean of non-finite data".into()));
    }
    let m = mean(x);
    let sd = sample_sd(x);
    if sd == 0.0 {
        return Ok(TrimmedMean { value: m, kept: x.len(), band_empty: false });
    }
    let half_width = c.get() * sd;
    let (sum, kept) = x
        .iter()
        .filter(|v| (*v - m).abs() <= half_width)
        .fold((0.0, 0usize), |(s, k), v| (s + v, k + 1));
    if kept == 0 {
        return Ok(TrimmedMean { value: m, kept: 0, band_empty: true });
    }
    Ok(TrimmedMean { value: sum / kept as f64, kept, band_empty: false })
}

/// Least-squares solver for a fixed design, reusable across many responses.
///
/// Rows are scaled by `sqrt(w)` and the scaled design is QR-factored, so the
/// weighted normal equations are never formed explicitly.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    sqrt_w: DVector<f64>,
    condition: f64,
}

impl LeastSquares {
    pub fn new(design: &DMatrix<f64>, weights: Option<&DVector<f64>>) -> Result<Self> {
        let (n, p) = design.shape();
        if p == 0 {
            return Err(Error::InvalidInput("design has no columns".into()));
        }
        if n < p {
            return Err(Error::Singular { context: "least squares", condition: f64::INFINITY });
        }
        let sqrt_w = match weights {
            Some(w) => {
                if w.len() != n {
                    return Err(Error::DimensionMismatch {
                        context: "least squares weights",
                        expected: n,
                        actual: w.len(),
                    });
                }
                if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::InvalidInput("weights must be positive and finite".into()));
                }
                w.map(f64::sqrt)
            }
            None => DVector::from_element(n, 1.0),
        };
        if design.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("design contains non-finite entries".into()));
        }
        let mut scaled = design.clone();
        for (mut row, s) in scaled.row_iter_mut().zip(sqrt_w.iter()) {
            row *= *s;
        }
        let sv = scaled.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::Singular { context: "least squares", condition });
        }
        let qr = scaled.qr();
        Ok(LeastSquares { q: qr.q(), r: qr.r(), sqrt_w, condition })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, response: &DVector<f64>) -> Result<DVector<f64>> {
        if response.len() != self.sqrt_w.len() {
            return Err(Error::DimensionMismatch {
                context: "least squares response",
                expected: self.sqrt_w.len(),
                actual: response.len(),
            });
        }
        let rhs = self.q.tr_mul(&response.component_mul(&self.sqrt_w));
        self.r
            .solve_upper_triangular(&rhs)
            .ok_or(Error::Singular { context: "least squares", condition: self.condition })
    }
}

/// `argmin_b sum_t w_t (y_t - x_t' b)^2`.
pub fn weighted_least_squares(
    design: &DMatrix<f64>,
    response: &DVector<f64>,
    weights: &DVector<f64>,
) -> Result<DVector<f64>> {
    LeastSquares::new(design, Some(weights))?.solve(response)
}

/// First-order propagation: `sqrt(sum_j (df/dx_j * sigma_j)^2)`.
pub fn propagate_error(gradient: &[f64], sigmas: &[f64]) -> Result<f64> {
    if gradient.len() != sigmas.len() {
        return Err(Error::DimensionMismatch {
            context: "propagate_error",
            expected: gradient.len(),
            actual: sigmas.len(),
        });
    }
    if sigmas.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidInput("sigmas must be non-negative".into()));
    }
    let sum: f64 = gradient.iter().zip(sigmas).map(|(g, s)| (g * s) * (g * s)).sum();
    Ok(sum.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(v: f64) -> TrimConstant {
        TrimConstant::new(v).unwrap()
    }

    #[test]
    fn trimmed_mean_hand_cases() {
        assert_eq!(trimmed_mean(&[5.0, 5.0, 5.0], TrimConstant::DEFAULT).unwrap(), 5.0);
        assert_eq!(trimmed_mean(&[-1.0, 1.0], TrimConstant::DEFAULT).unwrap(), 0.0);
        // mean 20, sd sqrt(2000) ~ 44.72: the zeros stay, the spike goes
        let t = trimmed_mean_detailed(&[0.0, 0.0, 0.0, 0.0, 100.0], c(1.0)).unwrap();
        assert_eq!(t.value, 0.0);
        assert_eq!(t.kept, 4);
    }

    #[test]
    fn trimmed_mean_empty_band_falls_back() {
        // mean 0, sd sqrt(2); a band of 0.5 * sqrt(2) holds neither point
        let t = trimmed_mean_detailed(&[-1.0, 1.0], c(0.5)).unwrap();
        assert!(t.band_empty);
        assert_eq!(t.value, 0.0);
        assert!(trimmed_mean(&[], TrimConstant::DEFAULT).is_err());
        assert!(TrimConstant::new(0.0).is_err());
    }

    #[test]
    fn wls_hand_cases() {
        let ones = DMatrix::from_element(2, 1, 1.0);
        let b = weighted_least_squares(&ones, &DVector::from_vec(vec![1.0, 3.0]), &DVector::from_element(2, 1.0))
            .unwrap();
        assert!((b[0] - 2.0).abs() < 1e-14);
        let b = weighted_least_squares(&ones, &DVector::from_vec(vec![0.0, 3.0]), &DVector::from_vec(vec![2.0, 1.0]))
            .unwrap();
        assert!((b[0] - 1.0).abs() < 1e-14);
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let b = weighted_least_squares(&x, &DVector::from_vec(vec![1.0, 2.0]), &DVector::from_vec(vec![0.3, 7.0]))
            .unwrap();
        assert!((b[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn wls_rejects_rank_deficiency() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let err = weighted_least_squares(&x, &DVector::from_element(3, 1.0), &DVector::from_element(3, 1.0))
            .unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
        let err = weighted_least_squares(
            &DMatrix::from_element(2, 1, 1.0),
            &DVector::from_element(2, 1.0),
            &DVector::from_vec(vec![1.0, 0.0]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn propagate_error_cases() {
        assert_eq!(propagate_error(&[1.0, 1.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(propagate_error(&[2.0, 0.0], &[3.0, 4.0]).unwrap(), 6.0);
        assert_eq!(propagate_error(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert!(propagate_error(&[1.0], &[1.0, 2.0]).is_err());
        assert!(propagate_error(&[1.0], &[-1.0]).is_err());
    }

    fn normal_equations_oracle(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
        // Plain Gauss-Jordan on X'X b = X'y.
        let p = x.ncols();
        let xtx = x.transpose() * x;
        let xty = x.transpose() * y;
        let mut a = vec![vec![0.0; p + 1]; p];
        for i in 0..p {
            for j in 0..p {
                a[i][j] = xtx[(i, j)];
            }
            a[i][p] = xty[i];
        }
        for col in 0..p {
            let piv = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            for row in 0..p {
                if row != col {
                    let f = a[row][col] / a[col][col];
                    for k in col..=p {
                        a[row][k] -= f * a[col][k];
                    }
                }
            }
        }
        DVector::from_iterator(p, (0..p).map(|i| a[i][p] / a[i][i]))
    }

    proptest! {
        #[test]
        fn trimmed_mean_large_c_is_plain_mean(x in prop::collection::vec(-1e3f64..1e3, 1..50)) {
            let t = trimmed_mean(&x, c(1e6)).unwrap();
            prop_assert!((t - mean(&x)).abs() <= 1e-12 * (1.0 + mean(&x).abs()));
        }

        #[test]
        fn trimmed_mean_translation_equivariant(
            x in prop::collection::vec(-100f64..100.0, 2..40),
            a in -1e3f64..1e3,
        ) {
            let shifted: Vec<f64> = x.iter().map(|v| v + a).collect();
            let lhs = trimmed_mean(&shifted, TrimConstant::DEFAULT).unwrap();
            let rhs = trimmed_mean(&x, TrimConstant::DEFAULT).unwrap() + a;
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + a.abs()));
        }

        #[test]
        fn equal_weight_wls_matches_normal_equations(
            entries in prop::collection::vec(-10f64..10.0, 30),
            ys in prop::collection::vec(-10f64..10.0, 10),
            w in 0.1f64..10.0,
        ) {
            let x = DMatrix::from_column_slice(10, 3, &entries);
            prop_assume!(x.singular_values().min() > 1e-3);
            let y = DVector::from_vec(ys);
            let got = weighted_least_squares(&x, &y, &DVector::from_element(10, w)).unwrap();
            let want = normal_equations_oracle(&x, &y);
            for (g, e) in got.iter().zip(want.iter()) {
                prop_assert!((g - e).abs() <= 1e-8 * e.abs().max(1.0));
            }
        }

        #[test]
        fn propagate_error_homogeneous(
            g in prop::collection::vec(-5f64..5.0, 4),
            s in prop::collection::vec(0f64..5.0, 4),
            a in -10f64..10.0,
        ) {
            let base = propagate_error(&g, &s).unwrap();
            let scaled: Vec<f64> = s.iter().map(|v| v * a.abs()).collect();
            let got = propagate_error(&g, &scaled).unwrap();
            prop_assert!((got - a.abs() * base).abs() <= 1e-12 * (1.0 + got));
        }
    }
}
