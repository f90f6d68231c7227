//! Gaussian posteriors over model weights.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A Gaussian over a weight vector.
///
/// The full form is kept in information form (precision and
/// precision-weighted mean) so conjugate updates are plain additions and
/// commute. The diagonal form keeps mean and per-coordinate variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "PosteriorJson", try_from = "PosteriorJson")]
pub enum GaussianPosterior {
    Full { precision: DMatrix<f64>, shift: DVector<f64> },
    Diagonal { mean: DVector<f64>, variance: DVector<f64> },
}

impl GaussianPosterior {
    /// `N(0, prior_variance * I)` in full form.
    pub fn full_prior(dim: usize, prior_variance: f64) -> Self {
        GaussianPosterior::Full {
            precision: DMatrix::identity(dim, dim) / prior_variance,
            shift: DVector::zeros(dim),
        }
    }

    /// `N(0, prior_variance * I)` in diagonal form.
    pub fn diagonal_prior(dim: usize, prior_variance: f64) -> Self {
        GaussianPosterior::Diagonal {
            mean: DVector::zeros(dim),
            variance: DVector::from_element(dim, prior_variance),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            GaussianPosterior::Full { shift, .. } => shift.len(),
            GaussianPosterior::Diagonal { mean, .. } => mean.len(),
        }
    }

    pub fn mean(&self) -> Result<DVector<f64>> {
        match self {
            GaussianPosterior::Full { precision, shift } => Ok(precision_cholesky(precision)?.solve(shift)),
            GaussianPosterior::Diagonal { mean, .. } => Ok(mean.clone()),
        }
    }

    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        match self {
            GaussianPosterior::Full { precision, .. } => Ok(precision_cholesky(precision)?.inverse()),
            GaussianPosterior::Diagonal { variance, .. } => Ok(DMatrix::from_diagonal(variance)),
        }
    }

    /// Smallest eigenvalue of the covariance (diagonal: smallest variance).
    pub fn min_covariance_eigenvalue(&self) -> Result<f64> {
        match self {
            GaussianPosterior::Full { .. } => {
                let eig = self.covariance()?.symmetric_eigen();
                Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
            }
            GaussianPosterior::Diagonal { variance, .. } => Ok(variance.min()),
        }
    }

    /// Immutable sampling view.
    pub fn sampler(&self) -> Result<PosteriorSampler> {
        match self {
            GaussianPosterior::Full { precision, shift } => {
                let chol = precision_cholesky(precision)?;
                let mean = chol.solve(shift);
                Ok(PosteriorSampler {
                    mean,
                    spread: Spread::PrecisionFactor(chol.l()),
                })
            }
            GaussianPosterior::Diagonal { mean, variance } => Ok(PosteriorSampler {
                mean: mean.clone(),
                spread: Spread::StdDev(variance.map(f64::sqrt)),
            }),
        }
    }
}

fn precision_cholesky(precision: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    precision
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Invariant("posterior precision is not positive definite".into()))
}

#[derive(Debug, Clone)]
enum Spread {
    /// Lower Cholesky factor `L` of the precision; a draw is `mean + L^-T z`.
    PrecisionFactor(DMatrix<f64>),
    StdDev(DVector<f64>),
}

/// Posterior with its factorization cached for repeated draws.
#[derive(Debug, Clone)]
pub struct PosteriorSampler {
    pub mean: DVector<f64>,
    spread: Spread,
}

impl PosteriorSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        match &self.spread {
            Spread::PrecisionFactor(l) => {
                let offset = l
                    .tr_solve_lower_triangular(&z)
                    .expect("cholesky factor has a positive diagonal");
                &self.mean + offset
            }
            Spread::StdDev(sd) => &self.mean + sd.component_mul(&z),
        }
    }
}

/// Serialized form: mean and covariance for readers, plus the exact
/// information-form state for full posteriors.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PosteriorJson {
    form: String,
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    precision: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shift: Option<Vec<f64>>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> std::result::Result<DMatrix<f64>, String> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err("matrix must be square".into());
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl From<GaussianPosterior> for PosteriorJson {
    fn from(p: GaussianPosterior) -> Self {
        let mean = p.mean().map(|m| m.iter().copied().collect()).unwrap_or_default();
        let covariance = p.covariance().map(|c| rows(&c)).unwrap_or_default();
        match p {
            GaussianPosterior::Full { precision, shift } => PosteriorJson {
                form: "full".into(),
                mean,
                covariance,
                precision: Some(rows(&precision)),
                shift: Some(shift.iter().copied().collect()),
            },
            GaussianPosterior::Diagonal { .. } => PosteriorJson {
                form: "diagonal".into(),
                mean,
                covariance,
                precision: None,
                shift: None,
            },
        }
    }
}

impl TryFrom<PosteriorJson> for GaussianPosterior {
    type Error = String;

    fn try_from(j: PosteriorJson) -> std::result::Result<Self, String> {
        match j.form.as_str() {
            "full" => {
                let precision = from_rows(j.precision.as_deref().ok_or("full posterior needs precision")?)?;
                let shift = DVector::from_vec(j.shift.ok_or("full posterior needs shift")?);
                if shift.len() != precision.nrows() {
                    return Err("shift and precision disagree in dimension".into());
                }
                Ok(GaussianPosterior::Full { precision, shift })
            }
            "diagonal" => {
                let cov = from_rows(&j.covariance)?;
                if cov.nrows() != j.mean.len() {
                    return Err("mean and covariance disagree in dimension".into());
                }
                let variance = cov.diagonal();
                if variance.iter().any(|v| !(*v > 0.0)) {
                    return Err("diagonal variances must be positive".into());
                }
                Ok(GaussianPosterior::Diagonal {
                    mean: DVector::from_vec(j.mean),
                    variance,
                })
            }
            other => Err(format!("unknown posterior form `{other}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_moments() {
        let p = GaussianPosterior::full_prior(3, 2.0);
        assert_eq!(p.mean().unwrap(), DVector::zeros(3));
        assert!((p.covariance().unwrap() - DMatrix::identity(3, 3) * 2.0).amax() < 1e-15);
        let d = GaussianPosterior::diagonal_prior(2, 1.0);
        assert_eq!(d.min_covariance_eigenvalue().unwrap(), 1.0);
    }

    #[test]
    fn json_round_trip_keeps_state() {
        let p = GaussianPosterior::Full {
            precision: DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            shift: DVector::from_vec(vec![1.0, -1.0]),
        };
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"covariance\""));
        assert_eq!(serde_json::from_str::<GaussianPosterior>(&text).unwrap(), p);
        let d = GaussianPosterior::Diagonal {
            mean: DVector::from_vec(vec![0.25]),
            variance: DVector::from_vec(vec![0.5]),
        };
        let text = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<GaussianPosterior>(&text).unwrap(), d);
    }
}
