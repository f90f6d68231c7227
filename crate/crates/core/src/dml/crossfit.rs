//! Out-of-fold residualization of outcomes on control features.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::split::assign_folds;
use crate::linalg::{select_entries, select_rows, RidgeFit};
use crate::{Error, Result};

/// Ridge penalty per training row on standardized features.
pub const RIDGE_PENALTY_PER_ROW: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossfitDiagnostics {
    /// `fold_rmse[o][k]`: out-of-fold RMSE of outcome `o` on fold `k`.
    pub fold_rmse: Vec<Vec<f64>>,
    /// Constant feature columns seen by any fold model.
    pub constant_feature_columns: usize,
}

#[derive(Debug, Clone)]
pub struct Crossfit {
    /// `n x outcomes` matrix of out-of-fold residuals.
    pub residuals: DMatrix<f64>,
    /// Fold holding each row; the model that produced a row's residual was
    /// trained on every other fold.
    pub fold_of: Vec<usize>,
    /// Number of training rows behind each fold's models.
    pub fold_train_rows: Vec<usize>,
    pub diagnostics: CrossfitDiagnostics,
}

/// Residualizes every outcome column on `features` with k-fold cross-fitting.
pub fn crossfit_residualize(
    outcomes: &DMatrix<f64>,
    features: &DMatrix<f64>,
    folds: usize,
    seed: u64,
) -> Result<Crossfit> {
    let n = outcomes.nrows();
    if features.nrows() != n {
        return Err(Error::SchemaMismatch { expected: n, got: features.nrows() });
    }
    let fold_of = assign_folds(n, folds, seed)?;
    let mut residuals = DMatrix::zeros(n, outcomes.ncols());
    let mut fold_rmse = vec![vec![0.0; folds]; outcomes.ncols()];
    let mut fold_train_rows = Vec::with_capacity(folds);
    let mut constant = 0;
    for k in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != k).collect();
        let held: Vec<usize> = (0..n).filter(|&i| fold_of[i] == k).collect();
        fold_train_rows.push(train.len());
        let x_train = select_rows(features, &train);
        let x_held = select_rows(features, &held);
        let penalty = RIDGE_PENALTY_PER_ROW * train.len() as f64;
        for o in 0..outcomes.ncols() {
            let y = outcomes.column(o).into_owned();
            let fit = RidgeFit::fit(&x_train, &select_entries(&y, &train), penalty)?;
            constant = constant.max(fit.constant_columns);
            let predicted = fit.predict(&x_held);
            let mut sse = 0.0;
            for (row, &i) in held.iter().enumerate() {
                let r = y[i] - predicted[row];
                residuals[(i, o)] = r;
                sse += r * r;
            }
            fold_rmse[o][k] = (sse / held.len() as f64).sqrt();
        }
    }
    Ok(Crossfit {
        residuals,
        fold_of,
        fold_train_rows,
        diagnostics: CrossfitDiagnostics {
            fold_rmse,
            constant_feature_columns: constant,
        },
    })
}

/// One ridge residualizer per outcome column, fit on a full training set and
/// applied to held-out rows.
#[derive(Debug, Clone)]
pub struct Residualizer {
    models: Vec<RidgeFit>,
}

impl Residualizer {
    pub fn fit(outcomes: &DMatrix<f64>, features: &DMatrix<f64>) -> Result<Self> {
        let penalty = RIDGE_PENALTY_PER_ROW * outcomes.nrows() as f64;
        let models = (0..outcomes.ncols())
            .map(|o| RidgeFit::fit(features, &outcomes.column(o).into_owned(), penalty))
            .collect::<Result<_>>()?;
        Ok(Residualizer { models })
    }

    pub fn residualize(&self, outcomes: &DMatrix<f64>, features: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = outcomes.clone();
        for (o, model) in self.models.iter().enumerate() {
            let predicted: DVector<f64> = model.predict(features);
            for i in 0..out.nrows() {
                out[(i, o)] -= predicted[i];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn perfectly_predictable_outcome_leaves_no_residual() {
        let h = gaussian(400, 3, 1);
        let y = (h.column(0) * 2.0 - h.column(1) + h.column(2) * 0.25).add_scalar(3.0);
        let out = crossfit_residualize(&DMatrix::from_columns(&[y]), &h, 2, 7).unwrap();
        assert!(out.residuals.amax() < 1e-8, "{}", out.residuals.amax());
    }

    #[test]
    fn irrelevant_features_keep_outcome_variance() {
        let n = 10_000;
        let h = gaussian(n, 3, 2);
        let y = gaussian(n, 1, 3).add_scalar(5.0);
        let out = crossfit_residualize(&y, &h, 2, 1).unwrap();
        let r = out.residuals.column(0);
        let mean = r.mean();
        let var_r = r.map(|v| (v - mean).powi(2)).sum() / n as f64;
        let y_mean = y.mean();
        let var_y = y.map(|v| (v - y_mean).powi(2)).sum() / n as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var_r / var_y - 1.0).abs() < 0.05);
    }

    #[test]
    fn fixed_seed_is_bitwise_reproducible() {
        let h = gaussian(300, 2, 4);
        let y = gaussian(300, 2, 5);
        let a = crossfit_residualize(&y, &h, 2, 99).unwrap();
        let b = crossfit_residualize(&y, &h, 2, 99).unwrap();
        assert_eq!(a.residuals, b.residuals);
        assert_eq!(a.fold_of, b.fold_of);
    }

    #[test]
    fn each_residual_comes_from_a_model_blind_to_its_row() {
        let n = 301;
        let h = gaussian(n, 2, 6);
        let y = gaussian(n, 1, 8);
        let out = crossfit_residualize(&y, &h, 3, 2).unwrap();
        for k in 0..3 {
            let held = out.fold_of.iter().filter(|&&f| f == k).count();
            assert_eq!(out.fold_train_rows[k] + held, n);
        }
        // Refit the fold models from scratch on the complement and compare.
        for k in 0..3 {
            let train: Vec<usize> = (0..n).filter(|&i| out.fold_of[i] != k).collect();
            let fit = RidgeFit::fit(
                &select_rows(&h, &train),
                &select_entries(&y.column(0).into_owned(), &train),
                RIDGE_PENALTY_PER_ROW * train.len() as f64,
            )
            .unwrap();
            for i in (0..n).filter(|&i| out.fold_of[i] == k) {
                let pred = fit.intercept + h.row(i).transpose().dot(&fit.coef);
                assert!((y[(i, 0)] - pred - out.residuals[(i, 0)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_features_do_not_break_the_fit() {
        let mut h = gaussian(100, 2, 3);
        h.column_mut(1).fill(4.0);
        let y = gaussian(100, 1, 4);
        let out = crossfit_residualize(&y, &h, 2, 0).unwrap();
        assert_eq!(out.diagnostics.constant_feature_columns, 1);
        assert!(out.residuals.iter().all(|v| v.is_finite()));
    }
}
