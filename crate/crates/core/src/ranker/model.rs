//! Per-objective Bayesian models: conjugate linear regression for
//! continuous objectives and probit regression with assumed-density
//! filtering for binary ones.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::posterior::{GaussianPosterior, PosteriorSampler};
use crate::{Error, Result};

/// Prior variance per coordinate for every objective model.
pub const PRIOR_VARIANCE: f64 = 1.0;
/// Lower bound on the linear models' observation noise variance.
pub const NOISE_VARIANCE_FLOOR: f64 = 1e-6;

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// `pdf(z) / cdf(z)`, stable far into the lower tail.
fn inverse_mills(z: f64) -> f64 {
    if z < -35.0 {
        let z2 = z * z;
        -z - 1.0 / z + 2.0 / (z * z2)
    } else {
        normal_pdf(z) / normal_cdf(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Linear,
    Probit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveModel {
    pub kind: ModelKind,
    pub posterior: GaussianPosterior,
    /// Observation noise variance; used by linear models only.
    pub noise_variance: f64,
    pub feature_schema: Vec<String>,
}

fn check_features(schema: &[String], x: &[f64]) -> Result<()> {
    if x.len() != schema.len() {
        return Err(Error::SchemaMismatch { expected: schema.len(), got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("feature vector contains non-finite values".into()));
    }
    Ok(())
}

impl ObjectiveModel {
    pub fn linear(feature_schema: Vec<String>, noise_variance: f64) -> Self {
        ObjectiveModel {
            kind: ModelKind::Linear,
            posterior: GaussianPosterior::full_prior(feature_schema.len(), PRIOR_VARIANCE),
            noise_variance: noise_variance.max(NOISE_VARIANCE_FLOOR),
            feature_schema,
        }
    }

    pub fn probit(feature_schema: Vec<String>) -> Self {
        ObjectiveModel {
            kind: ModelKind::Probit,
            posterior: GaussianPosterior::diagonal_prior(feature_schema.len(), PRIOR_VARIANCE),
            noise_variance: 1.0,
            feature_schema,
        }
    }

    pub fn dim(&self) -> usize {
        self.feature_schema.len()
    }

    pub fn set_noise_variance(&mut self, variance: f64) {
        self.noise_variance = if variance.is_finite() {
            variance.max(NOISE_VARIANCE_FLOOR)
        } else {
            NOISE_VARIANCE_FLOOR
        };
    }

    /// Conjugate update with known noise variance:
    /// precision += x x^T / sigma^2, shift += x y / sigma^2.
    pub fn blr_update(&mut self, x: &[f64], y: f64) -> Result<()> {
        if self.kind != ModelKind::Linear {
            return Err(Error::InvalidInput("blr_update needs a linear model".into()));
        }
        check_features(&self.feature_schema, x)?;
        if !y.is_finite() {
            return Err(Error::InvalidInput("target is not finite".into()));
        }
        let GaussianPosterior::Full { precision, shift } = &mut self.posterior else {
            return Err(Error::Invariant("linear model must carry a full posterior".into()));
        };
        let inv = 1.0 / self.noise_variance;
        let p = x.len();
        for i in 0..p {
            if x[i] == 0.0 {
                continue;
            }
            let xi = x[i] * inv;
            for j in 0..p {
                precision[(i, j)] += xi * x[j];
            }
            shift[i] += xi * y;
        }
        Ok(())
    }

    /// One assumed-density-filtering step for the probit likelihood
    /// `P(label = 1 | w) = Phi(w . x)` on a factorized Gaussian.
    pub fn probit_update(&mut self, x: &[f64], label: bool) -> Result<()> {
        if self.kind != ModelKind::Probit {
            return Err(Error::InvalidInput("probit_update needs a probit model".into()));
        }
        check_features(&self.feature_schema, x)?;
        let GaussianPosterior::Diagonal { mean, variance } = &mut self.posterior else {
            return Err(Error::Invariant("probit model must carry a diagonal posterior".into()));
        };
        let t = if label { 1.0 } else { -1.0 };
        let total_var = 1.0 + x.iter().zip(variance.iter()).map(|(xi, v)| xi * xi * v).sum::<f64>();
        let s = total_var.sqrt();
        let margin: f64 = x.iter().zip(mean.iter()).map(|(xi, m)| xi * m).sum();
        let z = t * margin / s;
        let v = inverse_mills(z);
        let w = (v * (v + z)).clamp(0.0, 1.0);
        for j in 0..x.len() {
            if x[j] == 0.0 {
                continue;
            }
            let var = variance[j];
            mean[j] += t * var * x[j] / s * v;
            variance[j] = var * (1.0 - var * x[j] * x[j] / total_var * w);
        }
        Ok(())
    }

    /// Linear models take the target as is; probit models read `target > 0.5`
    /// as the positive label.
    pub fn update(&mut self, x: &[f64], target: f64) -> Result<()> {
        match self.kind {
            ModelKind::Linear => self.blr_update(x, target),
            ModelKind::Probit => {
                if !target.is_finite() {
                    return Err(Error::InvalidInput("label is not finite".into()));
                }
                self.probit_update(x, target > 0.5)
            }
        }
    }

    pub fn snapshot(&self) -> Result<ModelSnapshot> {
        Ok(ModelSnapshot {
            kind: self.kind,
            sampler: self.posterior.sampler()?,
            dim: self.dim(),
        })
    }

    pub fn mean_prediction(&self, x: &[f64]) -> Result<f64> {
        self.snapshot()?.mean_prediction(x)
    }
}

/// Immutable, factorized view of a model for repeated inference.
#[derive(Debug, Clone)]
pub struct ModelSnapshot {
    pub kind: ModelKind,
    sampler: PosteriorSampler,
    dim: usize,
}

impl ModelSnapshot {
    fn link(&self, margin: f64) -> f64 {
        match self.kind {
            ModelKind::Linear => margin,
            ModelKind::Probit => normal_cdf(margin),
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::SchemaMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.sampler.mean
    }

    /// Prediction at the posterior mean weights.
    pub fn mean_prediction(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.link(self.sampler.mean.iter().zip(x).map(|(w, v)| w * v).sum()))
    }

    /// Draws weights from the posterior and predicts with them.
    pub fn sample_prediction<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<f64> {
        self.check(x)?;
        let w = self.sampler.sample(rng);
        Ok(self.link(w.iter().zip(x).map(|(w, v)| w * v).sum()))
    }
}

pub fn thompson_sample_predict<R: Rng + ?Sized>(model: &ObjectiveModel, x: &[f64], rng: &mut R) -> Result<f64> {
    model.snapshot()?.sample_prediction(x, rng)
}
