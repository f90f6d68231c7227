//! Least-squares building blocks shared by the estimator and the ranker.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Relative size below which a QR pivot counts as zero.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub beta: DVector<f64>,
    pub stderr: DVector<f64>,
    /// Classical covariance of `beta`: sigma^2 (X'X)^-1.
    pub covariance: DMatrix<f64>,
    pub residual_sum_squares: f64,
    pub sigma2: f64,
}

fn ensure_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} contains non-finite values")))
    }
}

/// Ordinary least squares without an intercept, via Householder QR.
///
/// Rank deficiency is an error; there is no pseudo-inverse fallback.
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::SchemaMismatch { expected: n, got: y.len() });
    }
    if p == 0 || n <= p {
        return Err(Error::InvalidInput(format!(
            "ols needs more rows than columns (n = {n}, p = {p})"
        )));
    }
    ensure_finite("design matrix", x.as_slice())?;
    ensure_finite("response", y.as_slice())?;

    let qr = x.clone().qr();
    let r = qr.r();
    let rank = (0..p)
        .filter(|&j| {
            let scale = x.column(j).norm();
            scale > 0.0 && r[(j, j)].abs() > RANK_TOLERANCE * scale
        })
        .count();
    if rank < p {
        return Err(Error::RankDeficient { rank, cols: p });
    }

    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient { rank, cols: p })?;
    let residual = y - x * &beta;
    let rss = residual.norm_squared();
    let sigma2 = rss / (n - p) as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::RankDeficient { rank, cols: p })?;
    let covariance = (&r_inv * r_inv.transpose()) * sigma2;
    let stderr = DVector::from_iterator(p, (0..p).map(|j| covariance[(j, j)].max(0.0).sqrt()));
    Ok(OlsFit {
        beta,
        stderr,
        covariance,
        residual_sum_squares: rss,
        sigma2,
    })
}

/// Per-column centering and scaling.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub mean: DVector<f64>,
    /// Population standard deviation; 0 marks a constant column.
    pub scale: DVector<f64>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let (n, p) = x.shape();
        let nf = n.max(1) as f64;
        let mut mean = DVector::zeros(p);
        let mut scale = DVector::zeros(p);
        for j in 0..p {
            let col = x.column(j);
            let m = col.sum() / nf;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / nf;
            mean[j] = m;
            scale[j] = var.sqrt();
        }
        Standardizer { mean, scale }
    }

    pub fn constant_columns(&self) -> usize {
        self.scale.iter().filter(|&&s| s <= 0.0).count()
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x.clone();
        for j in 0..z.ncols() {
            let (m, s) = (self.mean[j], self.scale[j]);
            for v in z.column_mut(j).iter_mut() {
                *v = if s > 0.0 { (*v - m) / s } else { 0.0 };
            }
        }
        z
    }
}

/// Ridge regression with an unpenalized intercept on standardized features.
#[derive(Debug, Clone)]
pub struct RidgeFit {
    pub intercept: f64,
    /// Coefficients on the original feature scale.
    pub coef: DVector<f64>,
    pub constant_columns: usize,
}

impl RidgeFit {
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, penalty: f64) -> Result<Self> {
        let (n, p) = x.shape();
        if y.len() != n {
            return Err(Error::SchemaMismatch { expected: n, got: y.len() });
        }
        if n == 0 {
            return Err(Error::InvalidInput("ridge fit on empty data".into()));
        }
        ensure_finite("features", x.as_slice())?;
        ensure_finite("outcome", y.as_slice())?;
        let standardizer = Standardizer::fit(x);
        let z = standardizer.transform(x);
        let y_mean = y.sum() / n as f64;
        let yc = y.map(|v| v - y_mean);
        let mut gram = z.transpose() * &z;
        for j in 0..p {
            // Constant columns are all-zero after standardization; a unit
            // diagonal keeps the system solvable and their weight at 0.
            gram[(j, j)] += if standardizer.scale[j] > 0.0 { penalty } else { 1.0 };
        }
        let rhs = z.transpose() * yc;
        let w = gram
            .cholesky()
            .ok_or_else(|| Error::InvalidInput("ridge normal equations not positive definite".into()))?
            .solve(&rhs);
        let coef = DVector::from_iterator(
            p,
            (0..p).map(|j| {
                let s = standardizer.scale[j];
                if s > 0.0 {
                    w[j] / s
                } else {
                    0.0
                }
            }),
        );
        let intercept = y_mean - coef.dot(&standardizer.mean);
        Ok(RidgeFit {
            intercept,
            coef,
            constant_columns: standardizer.constant_columns(),
        })
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        (x * &self.coef).add_scalar(self.intercept)
    }
}

/// Copies the given rows of `x` into a new matrix.
pub fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

pub fn select_entries(y: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_iterator(rows.len(), rows.iter().map(|&i| y[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_line_has_zero_stderr() {
        let x = DMatrix::from_column_slice(5, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = x.column(0) * 2.0;
        let fit = ols_fit(&x, &y).unwrap();
        assert!((fit.beta[0] - 2.0).abs() < 1e-14);
        assert!(fit.stderr[0] < 1e-12);
    }

    #[test]
    fn orthonormal_columns_project() {
        let s = 0.5;
        let x = DMatrix::from_row_slice(4, 2, &[s, s, s, -s, s, s, s, -s]);
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let fit = ols_fit(&x, &y).unwrap();
        for j in 0..2 {
            assert!((fit.beta[j] - x.column(j).dot(&y)).abs() < 1e-14);
        }
    }

    #[test]
    fn rank_deficiency_is_an_error() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(ols_fit(&x, &y), Err(Error::RankDeficient { rank: 1, cols: 2 })));
        assert!(ols_fit(&DMatrix::zeros(2, 2), &DVector::zeros(2)).is_err());
    }

    #[test]
    fn ridge_recovers_linear_outcome() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(200, 3, |_, _| rng.random::<f64>());
        let y = x.column(0) * 3.0 - x.column(2) * 1.5;
        let y = y.add_scalar(0.7);
        let fit = RidgeFit::fit(&x, &y, 1e-12).unwrap();
        assert!((fit.predict(&x) - &y).amax() < 1e-8);
    }

    #[test]
    fn ridge_ignores_constant_columns() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0, 4.0, 5.0]);
        let y = DVector::from_vec(vec![2.0, 4.0, 6.0, 8.0]);
        let fit = RidgeFit::fit(&x, &y, 1e-9).unwrap();
        assert_eq!(fit.constant_columns, 1);
        assert_eq!(fit.coef[1], 0.0);
        assert!((fit.coef[0] - 2.0).abs() < 1e-6);
    }
}
