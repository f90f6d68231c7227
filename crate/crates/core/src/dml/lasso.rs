//! L1-penalized least squares by cyclic coordinate descent.
//!
//! Objective on internally scaled columns `z_j = x_j / s_j`, with
//! `s_j = sqrt(mean(x_j^2))`:
//!
//! ```text
//! (1/2n) ||y - Z b||^2 + lambda ||b||_1,     beta_j = b_j / s_j
//! ```
//!
//! Columns are scaled but not centered: there is no intercept, so
//! `lambda = 0` reproduces [`crate::linalg::ols_fit`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::split::assign_folds;
use crate::linalg::{select_entries, select_rows};
use crate::{Error, Result};

pub const MAX_SWEEPS: usize = 10_000;
pub const COEF_TOLERANCE: f64 = 1e-8;
/// The grid spans `[GRID_FLOOR * lambda_max, lambda_max]` on a log scale.
pub const GRID_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct LassoFit {
    pub beta: DVector<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Root-mean-square of each column; 0 marks an all-zero column.
pub fn column_scales(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows().max(1) as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| (c.norm_squared() / n).sqrt()))
}

fn scaled(x: &DMatrix<f64>, scales: &DVector<f64>) -> DMatrix<f64> {
    let mut z = x.clone();
    for (j, mut col) in z.column_iter_mut().enumerate() {
        let s = scales[j];
        if s > 0.0 {
            col /= s;
        } else {
            col.fill(0.0);
        }
    }
    z
}

fn check_inputs(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::SchemaMismatch { expected: x.nrows(), got: y.len() });
    }
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::InvalidInput("lasso needs a non-empty design".into()));
    }
    if !x.iter().chain(y.iter()).all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("lasso inputs contain non-finite values".into()));
    }
    Ok(())
}

/// Smallest penalty at which every coefficient is exactly zero.
pub fn lambda_max(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    check_inputs(x, y)?;
    let z = scaled(x, &column_scales(x));
    Ok(scaled_lambda_max(&z, y))
}

// Same arithmetic as the first coordinate-descent sweep from zero, so a
// penalty equal to this value annihilates every coefficient bitwise.
fn scaled_lambda_max(z: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let n = z.nrows() as f64;
    z.column_iter().map(|c| (0.0 + c.dot(y) / n).abs()).fold(0.0, f64::max)
}

fn soft_threshold(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// Solves the KKT system on the active set exactly. Accepted only when the
/// solution keeps the active signs and the inactive subgradient bounds hold.
fn polish(z: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, b: &DVector<f64>) -> Option<DVector<f64>> {
    let active: Vec<usize> = (0..b.len()).filter(|&j| b[j] != 0.0).collect();
    if active.is_empty() {
        return None;
    }
    let n = z.nrows() as f64;
    let za = DMatrix::from_columns(&active.iter().map(|&j| z.column(j)).collect::<Vec<_>>());
    let gram = za.transpose() * &za / n;
    let signs = DVector::from_iterator(active.len(), active.iter().map(|&j| b[j].signum()));
    let rhs = za.transpose() * y / n - signs.clone() * lambda;
    let sol = gram.cholesky()?.solve(&rhs);
    if sol.iter().zip(signs.iter()).any(|(v, s)| v * s <= 0.0) {
        return None;
    }
    let residual = y - &za * &sol;
    let slack = lambda * (1.0 + 1e-12) + 1e-14;
    for j in (0..b.len()).filter(|j| !active.contains(j)) {
        if (z.column(j).dot(&residual) / n).abs() > slack {
            return None;
        }
    }
    let mut full = DVector::zeros(b.len());
    for (k, &j) in active.iter().enumerate() {
        full[j] = sol[k];
    }
    Some(full)
}

pub fn lasso_fit(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<LassoFit> {
    check_inputs(x, y)?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let n = x.nrows() as f64;
    let scales = column_scales(x);
    let z = scaled(x, &scales);
    let mut b = DVector::zeros(x.ncols());
    let mut residual = y.clone();
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_delta: f64 = 0.0;
        for j in 0..b.len() {
            if scales[j] <= 0.0 {
                continue;
            }
            let col = z.column(j);
            let updated: f64 = soft_threshold(b[j] + col.dot(&residual) / n, lambda);
            let delta: f64 = updated - b[j];
            if delta != 0.0 {
                residual.axpy(-delta, &col, 1.0);
                b[j] = updated;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < COEF_TOLERANCE {
            converged = true;
            break;
        }
    }
    if let Some(exact) = polish(&z, y, lambda, &b) {
        b = exact;
    }
    let beta = DVector::from_iterator(
        b.len(),
        (0..b.len()).map(|j| if scales[j] > 0.0 { b[j] / scales[j] } else { 0.0 }),
    );
    Ok(LassoFit { beta, sweeps, converged })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoCv {
    pub lambda_star: f64,
    pub beta: Vec<f64>,
    /// Candidate penalties, largest first.
    pub grid: Vec<f64>,
    /// Mean out-of-fold squared error per grid point.
    pub cv_mse: Vec<f64>,
}

/// Log-spaced penalty grid from `lambda_max` down to `GRID_FLOOR * lambda_max`.
pub fn lambda_grid(lambda_max: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lambda_max];
    }
    (0..points)
        .map(|i| lambda_max * GRID_FLOOR.powf(i as f64 / (points - 1) as f64))
        .collect()
}

/// Picks the penalty with the lowest k-fold error, preferring the larger
/// penalty on ties, then refits on all rows.
pub fn lasso_cv(x: &DMatrix<f64>, y: &DVector<f64>, grid_points: usize, folds: usize, seed: u64) -> Result<LassoCv> {
    check_inputs(x, y)?;
    if grid_points == 0 {
        return Err(Error::InvalidInput("lasso grid needs at least one point".into()));
    }
    let n = y.len();
    let mean = y.mean();
    if y.iter().all(|v| *v == mean) {
        return Err(Error::InvalidInput("response has zero variance".into()));
    }
    let top = lambda_max(x, y)?;
    if top <= 0.0 {
        return Err(Error::InvalidInput("response is orthogonal to every column".into()));
    }
    let grid = lambda_grid(top, grid_points);
    let fold_of = assign_folds(n, folds, seed)?;
    let mut sse = vec![0.0; grid.len()];
    for k in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != k).collect();
        let held: Vec<usize> = (0..n).filter(|&i| fold_of[i] == k).collect();
        let (x_train, y_train) = (select_rows(x, &train), select_entries(y, &train));
        let (x_held, y_held) = (select_rows(x, &held), select_entries(y, &held));
        for (g, &lambda) in grid.iter().enumerate() {
            let fit = lasso_fit(&x_train, &y_train, lambda)?;
            sse[g] += (&y_held - &x_held * &fit.beta).norm_squared();
        }
    }
    let cv_mse: Vec<f64> = sse.iter().map(|s| s / n as f64).collect();
    let mut best = 0;
    for g in 1..grid.len() {
        if cv_mse[g] < cv_mse[best] {
            best = g;
        }
    }
    let lambda_star = grid[best];
    let beta = lasso_fit(x, y, lambda_star)?.beta.iter().copied().collect();
    Ok(LassoCv { lambda_star, beta, grid, cv_mse })
}
