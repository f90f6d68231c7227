//! Downstream-value estimation of page-quality surrogates.
//!
//! Three stages: (0) absorb query-group and ZIP fixed effects by iterative
//! de-averaging, then hold out a test fold; (1) residualize the target, the
//! surrogates and the short-term metrics on customer history with
//! cross-fitting; (2) regress the residualized target on the residualized
//! surrogates and short-term metrics with OLS or cross-validated LASSO.

pub mod crossfit;
pub mod deaverage;
pub mod lasso;
pub mod panel;
pub mod split;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use crossfit::{crossfit_residualize, Crossfit, CrossfitDiagnostics, Residualizer};
pub use deaverage::{deaverage, deaverage_columns, DeaverageDiagnostics, GroupIndex};
pub use lasso::{lambda_max, lasso_cv, lasso_fit, LassoCv, LassoFit};
pub use panel::{PanelColumn, PanelDataset, PanelRecord, PanelSchema};
pub use split::split_train_test;

use crate::domain::HorizonConfig;
use crate::linalg::{ols_fit, select_rows};
use crate::metrics::RegionWeights;
use crate::{Error, Result};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage2 {
    Ols,
    Lasso,
}

impl std::str::FromStr for Stage2 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ols" => Ok(Stage2::Ols),
            "lasso" => Ok(Stage2::Lasso),
            other => Err(Error::InvalidInput(format!("unknown stage-2 estimator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DmlConfig {
    pub deaverage_iterations: usize,
    pub train_fraction: f64,
    pub crossfit_folds: usize,
    pub stage2: Stage2,
    pub lasso_grid_points: usize,
    pub lasso_cv_folds: usize,
    pub seed: u64,
}

impl Default for DmlConfig {
    fn default() -> Self {
        DmlConfig {
            deaverage_iterations: 20,
            train_fraction: 0.90,
            crossfit_folds: 2,
            stage2: Stage2::Ols,
            lasso_grid_points: 20,
            lasso_cv_folds: 3,
            seed: 0,
        }
    }
}

impl DmlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidInput("train_fraction must lie in (0,1)".into()));
        }
        if self.crossfit_folds < 2 || self.lasso_cv_folds < 2 {
            return Err(Error::InvalidInput("fold counts must be at least 2".into()));
        }
        if self.deaverage_iterations < 1 || self.lasso_grid_points < 1 {
            return Err(Error::InvalidInput(
                "deaverage_iterations and lasso_grid_points must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmlDiagnostics {
    pub rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub deaverage: DeaverageDiagnostics,
    pub crossfit: CrossfitDiagnostics,
    /// RMSE of the fitted specification on the held-out fold.
    pub test_rmse: f64,
    /// RMSE of a zero prediction on the held-out fold, for scale.
    pub test_rmse_null: f64,
    pub lasso_cv_mse: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmlEstimate {
    /// Effects of the surrogate quality metrics.
    pub beta: Vec<f64>,
    /// Effects of the short-term metrics.
    pub theta: Vec<f64>,
    /// Effects of the history controls given surrogates and short-term metrics.
    pub gamma: Vec<f64>,
    /// Classical OLS standard errors of `beta` on the residualized design.
    pub stderr_beta: Vec<f64>,
    pub lambda_selected: Option<f64>,
    pub diagnostics: DmlDiagnostics,
}

/// A fitted downstream-value model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvwpxModel {
    pub schema_version: u32,
    pub config: DmlConfig,
    pub schema: PanelSchema,
    pub horizon: HorizonConfig,
    pub estimate: DmlEstimate,
}

impl DvwpxModel {
    pub fn surrogate_names(&self) -> &[String] {
        &self.schema.surrogates
    }

    /// Downstream value of a surrogate vector: the sum of `beta_s * x_s`.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        let beta = &self.estimate.beta;
        if x.len() != beta.len() {
            return Err(Error::SchemaMismatch { expected: beta.len(), got: x.len() });
        }
        Ok(beta.iter().zip(x).map(|(b, v)| b * v).sum())
    }

    pub fn beta_of(&self, name: &str) -> Result<f64> {
        self.schema
            .surrogates
            .iter()
            .position(|n| n == name)
            .map(|i| self.estimate.beta[i])
            .ok_or_else(|| Error::InvalidInput(format!("no surrogate named `{name}`")))
    }

    /// Region weights from the three region surrogates' effects: negative
    /// effects clamp to zero, the rest normalize to sum to one.
    pub fn derive_region_weights(&self, names: [&str; 3]) -> Result<RegionWeights> {
        let betas = [self.beta_of(names[0])?, self.beta_of(names[1])?, self.beta_of(names[2])?];
        region_weights_from_effects(betas)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: DvwpxModel = serde_json::from_str(text)?;
        if model.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model schema version {}",
                model.schema_version
            )));
        }
        if model.estimate.beta.len() != model.schema.surrogates.len() {
            return Err(Error::SchemaMismatch {
                expected: model.schema.surrogates.len(),
                got: model.estimate.beta.len(),
            });
        }
        Ok(model)
    }
}

pub fn dvwpx_score(model: &DvwpxModel, x: &[f64]) -> Result<f64> {
    model.score(x)
}

pub fn region_weights_from_effects(betas: [f64; 3]) -> Result<RegionWeights> {
    let clamped = betas.map(|b| if b.is_finite() { b.max(0.0) } else { f64::NAN });
    if clamped.iter().any(|b| b.is_nan()) {
        return Err(Error::Domain("region effects must be finite".into()));
    }
    let sum: f64 = clamped.iter().sum();
    if sum <= 0.0 {
        return Err(Error::Domain("no positive region effect".into()));
    }
    RegionWeights::new(clamped[0] / sum, clamped[1] / sum, clamped[2] / sum)
}

pub fn minimum_rows(schema: &PanelSchema) -> usize {
    500.max(10 * schema.width())
}

/// Runs the full three-stage pipeline.
pub fn estimate_dvwpx(data: &PanelDataset, config: &DmlConfig, horizon: HorizonConfig) -> Result<DvwpxModel> {
    config.validate()?;
    data.validate()?;
    let schema = &data.schema;
    if schema.surrogates.is_empty() {
        return Err(Error::InvalidInput("panel has no surrogate (x_) columns".into()));
    }
    let needed = minimum_rows(schema);
    if data.len() < needed {
        return Err(Error::InvalidInput(format!(
            "panel has {} rows; estimation needs at least {needed}",
            data.len()
        )));
    }

    // Stage 0: fixed effects out, then the held-out fold.
    let all_columns = PanelColumn::all(schema);
    let (demeaned, deaverage_diag) =
        deaverage(data, &all_columns, config.deaverage_iterations).map_err(Error::in_stage("deaverage"))?;
    let (train_rows, test_rows) =
        split_train_test(demeaned.len(), config.train_fraction, config.seed).map_err(Error::in_stage("split"))?;

    let outcome_columns: Vec<PanelColumn> = std::iter::once(PanelColumn::Target)
        .chain(demeaned.surrogate_columns())
        .chain(demeaned.short_term_columns())
        .collect();
    let outcomes = demeaned.matrix(&outcome_columns);
    let history = demeaned.matrix(&demeaned.history_columns());
    let (s, j) = (schema.surrogates.len(), schema.short_term.len());

    // Stage 1: out-of-fold residuals on the training rows.
    let train_outcomes = select_rows(&outcomes, &train_rows);
    let train_history = select_rows(&history, &train_rows);
    let stage1_features = with_intercept_if_empty(&train_history);
    let cf = crossfit_residualize(&train_outcomes, &stage1_features, config.crossfit_folds, config.seed)
        .map_err(Error::in_stage("crossfit"))?;
    let target_res = cf.residuals.column(0).into_owned();
    let design = cf.residuals.columns(1, s + j).into_owned();

    // Stage 2.
    let ols = ols_fit(&design, &target_res).map_err(Error::in_stage("stage2"))?;
    let (coef, lambda_selected, lasso_cv_mse) = match config.stage2 {
        Stage2::Ols => (ols.beta.clone(), None, None),
        Stage2::Lasso => {
            let cv = lasso_cv(&design, &target_res, config.lasso_grid_points, config.lasso_cv_folds, config.seed)
                .map_err(Error::in_stage("stage2"))?;
            (DVector::from_vec(cv.beta.clone()), Some(cv.lambda_star), Some(cv.cv_mse))
        }
    };
    let beta: Vec<f64> = coef.rows(0, s).iter().copied().collect();
    let theta: Vec<f64> = coef.rows(s, j).iter().copied().collect();
    let stderr_beta: Vec<f64> = ols.stderr.rows(0, s).iter().copied().collect();

    // History effects given the structural part, on de-averaged training rows.
    let structural = select_rows(&outcomes.columns(1, s + j).into_owned(), &train_rows) * &coef;
    let remainder = train_outcomes.column(0) - structural;
    let gamma = if schema.history.is_empty() {
        Vec::new()
    } else {
        ols_fit(&train_history, &remainder)
            .map_err(Error::in_stage("history"))?
            .beta
            .iter()
            .copied()
            .collect()
    };

    // Held-out evaluation with residualizers fit on every training row.
    let residualizer = Residualizer::fit(&train_outcomes, &stage1_features).map_err(Error::in_stage("evaluate"))?;
    let test_history = with_intercept_if_empty(&select_rows(&history, &test_rows));
    let test_res = residualizer.residualize(&select_rows(&outcomes, &test_rows), &test_history);
    let predicted = test_res.columns(1, s + j) * &coef;
    let actual = test_res.column(0);
    let m = test_rows.len() as f64;
    let test_rmse = ((actual - predicted).norm_squared() / m).sqrt();
    let test_rmse_null = (actual.norm_squared() / m).sqrt();

    Ok(DvwpxModel {
        schema_version: MODEL_SCHEMA_VERSION,
        config: config.clone(),
        schema: schema.clone(),
        horizon,
        estimate: DmlEstimate {
            beta,
            theta,
            gamma,
            stderr_beta,
            lambda_selected,
            diagnostics: DmlDiagnostics {
                rows: data.len(),
                train_rows: train_rows.len(),
                test_rows: test_rows.len(),
                deaverage: deaverage_diag,
                crossfit: cf.diagnostics,
                test_rmse,
                test_rmse_null,
                lasso_cv_mse,
            },
        },
    })
}

/// A panel without history columns is residualized on a constant.
fn with_intercept_if_empty(features: &DMatrix<f64>) -> DMatrix<f64> {
    if features.ncols() > 0 {
        features.clone()
    } else {
        DMatrix::zeros(features.nrows(), 1)
    }
}

/// Pooled OLS of the raw target on an intercept and the raw surrogates,
/// ignoring fixed effects and history. Returns the surrogate coefficients.
pub fn naive_ols(data: &PanelDataset) -> Result<Vec<f64>> {
    let s = data.schema.surrogates.len();
    let n = data.len();
    let mut x = DMatrix::from_element(n, s + 1, 1.0);
    for (i, r) in data.records.iter().enumerate() {
        for (k, v) in r.surrogates.iter().enumerate() {
            x[(i, k + 1)] = *v;
        }
    }
    let fit = ols_fit(&x, &data.column(PanelColumn::Target))?;
    Ok(fit.beta.iter().skip(1).copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(beta: Vec<f64>) -> DvwpxModel {
        let names = ["top", "mid", "bot"];
        DvwpxModel {
            schema_version: MODEL_SCHEMA_VERSION,
            config: DmlConfig::default(),
            schema: PanelSchema {
                surrogates: names[..beta.len()].iter().map(|s| s.to_string()).collect(),
                ..Default::default()
            },
            horizon: HorizonConfig::default(),
            estimate: DmlEstimate {
                stderr_beta: vec![0.0; beta.len()],
                beta,
                theta: vec![],
                gamma: vec![],
                lambda_selected: None,
                diagnostics: DmlDiagnostics {
                    rows: 0,
                    train_rows: 0,
                    test_rows: 0,
                    deaverage: DeaverageDiagnostics { iterations_run: vec![], residual_group_mean_max: vec![] },
                    crossfit: CrossfitDiagnostics { fold_rmse: vec![], constant_feature_columns: 0 },
                    test_rmse: 0.0,
                    test_rmse_null: 0.0,
                    lasso_cv_mse: None,
                },
            },
        }
    }

    #[test]
    fn score_cases() {
        let m = model(vec![1.0, 0.6, -0.2]);
        assert_eq!(m.score(&[0.0; 3]).unwrap(), 0.0);
        assert_eq!(m.score(&[0.0, 1.0, 0.0]).unwrap(), 0.6);
        assert!(m.score(&[1.0]).is_err());
        let x = [0.3, -1.7, 2.2];
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert!((m.score(&x2).unwrap() - 2.0 * m.score(&x).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn region_weight_cases() {
        let w = model(vec![0.63, 0.37, 0.0]).derive_region_weights(["top", "mid", "bot"]).unwrap();
        assert!((w.top - 0.63).abs() < 1e-12 && (w.middle - 0.37).abs() < 1e-12 && w.bottom == 0.0);
        let w = model(vec![1.0, 1.0, 1.0]).derive_region_weights(["top", "mid", "bot"]).unwrap();
        assert!(w.as_array().iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let w = model(vec![2.0, 1.0, -0.5]).derive_region_weights(["top", "mid", "bot"]).unwrap();
        assert!((w.top - 2.0 / 3.0).abs() < 1e-15 && (w.middle - 1.0 / 3.0).abs() < 1e-15 && w.bottom == 0.0);
        let err = model(vec![-1.0, 0.0, -2.0]).derive_region_weights(["top", "mid", "bot"]).unwrap_err();
        assert!(err.to_string().contains("no positive region effect"));
        assert!(model(vec![1.0, 1.0, 1.0]).derive_region_weights(["top", "mid", "nope"]).is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let m = model(vec![1.0, 0.5, 0.25]);
        assert_eq!(DvwpxModel::from_json(&m.to_json().unwrap()).unwrap(), m);
    }

    #[test]
    fn stage2_parses() {
        assert_eq!("LASSO".parse::<Stage2>().unwrap(), Stage2::Lasso);
        assert!("ridge".parse::<Stage2>().is_err());
    }
}
