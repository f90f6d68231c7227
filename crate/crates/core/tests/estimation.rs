//! Estimators checked against independent oracles: normal equations,
//! dummy-variable regression, a KKT verifier and Monte-Carlo truths.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wholepage::dml::{
    deaverage, estimate_dvwpx, lambda_max, lasso_fit, DmlConfig, PanelColumn, PanelDataset, PanelRecord,
    PanelSchema, Stage2,
};
use wholepage::domain::HorizonConfig;
use wholepage::linalg::ols_fit;

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_design(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, j| gauss(rng) * (1.0 + 0.5 * j as f64) + 0.3 * j as f64)
}

/// `(X'X)^-1 X'y` through an LU solve, sharing nothing with the QR path.
fn normal_equations(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    (x.transpose() * x).lu().solve(&(x.transpose() * y)).unwrap()
}

/// Least squares via SVD, tolerant of the collinear dummy blocks.
fn svd_least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    x.clone().svd(true, true).solve(y, 1e-10).unwrap()
}

#[test]
fn ols_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random_design(50, 3, &mut rng);
    let y = DVector::from_fn(50, |i, _| x[(i, 0)] - 2.0 * x[(i, 2)] + gauss(&mut rng));
    let fit = ols_fit(&x, &y).unwrap();
    assert!((fit.beta - normal_equations(&x, &y)).amax() < 1e-10);
}

/// Subgradient optimality of the scaled objective, recomputed from scratch.
fn kkt_violation(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, lambda: f64) -> f64 {
    let n = x.nrows() as f64;
    let residual = y - x * beta;
    let mut worst: f64 = 0.0;
    for j in 0..x.ncols() {
        let scale = (x.column(j).norm_squared() / n).sqrt();
        let gradient = x.column(j).dot(&residual) / (n * scale);
        let b = beta[j] * scale;
        let violation = if b != 0.0 {
            (gradient - lambda * b.signum()).abs()
        } else {
            (gradient.abs() - lambda).max(0.0)
        };
        worst = worst.max(violation);
    }
    worst
}

#[test]
fn lasso_satisfies_kkt_at_fixed_penalty() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let x = random_design(30, 4, &mut rng);
    let y = DVector::from_fn(30, |i, _| 0.8 * x[(i, 0)] - 0.2 * x[(i, 3)] + gauss(&mut rng));
    let fit = lasso_fit(&x, &y, 0.1).unwrap();
    assert!(kkt_violation(&x, &y, &fit.beta, 0.1) < 1e-6);
}

#[test]
fn lasso_satisfies_kkt_on_random_instances() {
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let (n, p) = (rng.random_range(20..80), rng.random_range(1..8));
        let x = random_design(n, p, &mut rng);
        let y = DVector::from_fn(n, |i, _| (0..p).map(|j| x[(i, j)] / (1.0 + j as f64)).sum::<f64>() + gauss(&mut rng));
        let lambda = lambda_max(&x, &y).unwrap() * rng.random_range(0.0..1.2);
        let fit = lasso_fit(&x, &y, lambda).unwrap();
        let v = kkt_violation(&x, &y, &fit.beta, lambda);
        assert!(v < 1e-6, "seed {seed}: KKT residual {v}");
    }
}

#[test]
fn lasso_without_penalty_is_ols_on_random_instances() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let x = random_design(40, 5, &mut rng);
        let y = DVector::from_fn(40, |i, _| x[(i, 1)] + gauss(&mut rng));
        let lasso = lasso_fit(&x, &y, 0.0).unwrap();
        assert!((lasso.beta - normal_equations(&x, &y)).amax() < 1e-8);
    }
}

#[test]
fn lasso_above_lambda_max_is_all_zero() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let x = random_design(40, 5, &mut rng);
        let y = DVector::from_fn(40, |i, _| x[(i, 0)] + gauss(&mut rng));
        let top = lambda_max(&x, &y).unwrap();
        for factor in [1.0, 1.5, 10.0] {
            assert!(lasso_fit(&x, &y, top * factor).unwrap().beta.iter().all(|&b| b == 0.0));
        }
    }
}

struct FeInstance {
    data: PanelDataset,
    q: Vec<usize>,
    z: Vec<usize>,
}

/// Unbalanced crossed design whose regressors load on the group effects.
fn fixed_effects_instance(n: usize, nq: usize, nz: usize, seed: u64) -> FeInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha: Vec<f64> = (0..nq).map(|_| 2.0 * gauss(&mut rng)).collect();
    let zeta: Vec<f64> = (0..nz).map(|_| gauss(&mut rng)).collect();
    let q: Vec<usize> = (0..n).map(|i| if i < nq { i } else { rng.random_range(0..nq) }).collect();
    let z: Vec<usize> = (0..n).map(|i| if i < nz { i } else { rng.random_range(0..nz) }).collect();
    let records = (0..n)
        .map(|i| {
            let (a, b) = (alpha[q[i]], zeta[z[i]]);
            let x: Vec<f64> = (0..3).map(|k| 0.5 * a - 0.3 * b * k as f64 + gauss(&mut rng)).collect();
            let drev = 1.0 * x[0] + 0.6 * x[1] + a + b + 0.5 * gauss(&mut rng);
            PanelRecord {
                event_id: i as u64,
                customer_id: i as u64,
                query_group: format!("q{}", q[i]),
                zip: format!("z{}", z[i]),
                drev,
                surrogates: x,
                short_term: vec![],
                history: vec![],
            }
        })
        .collect();
    let schema = PanelSchema { surrogates: vec!["a".into(), "b".into(), "c".into()], ..Default::default() };
    FeInstance { data: PanelDataset::new(schema, records).unwrap(), q, z }
}

#[test]
fn deaveraging_matches_dummy_variable_regression() {
    for seed in 0..5 {
        let inst = fixed_effects_instance(200, 20, 15, seed);
        let columns = PanelColumn::all(&inst.data.schema);
        let (demeaned, diag) = deaverage(&inst.data, &columns, 20).unwrap();
        assert!(diag.max_residual_group_mean() < 1e-6, "residual mean {}", diag.max_residual_group_mean());
        let within = ols_fit(&demeaned.matrix(&demeaned.surrogate_columns()), &demeaned.column(PanelColumn::Target))
            .unwrap()
            .beta;

        let n = inst.data.len();
        let (nq, nz) = (20, 15);
        let dummies = DMatrix::from_fn(n, 3 + nq + nz, |i, j| match j {
            0..=2 => inst.data.records[i].surrogates[j],
            j if j < 3 + nq => f64::from(inst.q[i] == j - 3),
            j => f64::from(inst.z[i] == j - 3 - nq),
        });
        let oracle = svd_least_squares(&dummies, &inst.data.column(PanelColumn::Target));
        for k in 0..3 {
            assert!((within[k] - oracle[k]).abs() < 1e-4, "seed {seed} coef {k}: {} vs {}", within[k], oracle[k]);
        }
    }
}

/// Independent surrogates, short-term metrics and history; no fixed
/// effects, no confounding.
fn clean_panel(n: usize, beta: [f64; 3], seed: u64) -> PanelDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|i| {
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            let m: Vec<f64> = (0..2).map(|_| gauss(&mut rng)).collect();
            let h: Vec<f64> = (0..2).map(|_| gauss(&mut rng)).collect();
            let drev = 5.0
                + beta.iter().zip(&x).map(|(b, v)| b * v).sum::<f64>()
                + 0.5 * m[0]
                + 0.2 * m[1]
                + 0.3 * h[0]
                + gauss(&mut rng);
            PanelRecord {
                event_id: i as u64,
                customer_id: i as u64,
                query_group: format!("q{}", i % 7),
                zip: format!("z{}", i % 5),
                drev,
                surrogates: x,
                short_term: m,
                history: h,
            }
        })
        .collect();
    let schema = PanelSchema {
        surrogates: vec!["top".into(), "mid".into(), "bot".into()],
        short_term: vec!["rev".into(), "clicks".into()],
        history: vec!["h0".into(), "h1".into()],
    };
    PanelDataset::new(schema, records).unwrap()
}

#[test]
fn unconfounded_panel_agrees_with_plain_ols() {
    let data = clean_panel(20_000, [1.0, 0.6, 0.0], 5);
    let model = estimate_dvwpx(&data, &DmlConfig::default(), HorizonConfig::default()).unwrap();
    let n = data.len();
    let mut x = DMatrix::from_element(n, 4, 1.0);
    for (i, r) in data.records.iter().enumerate() {
        for k in 0..3 {
            x[(i, k + 1)] = r.surrogates[k];
        }
    }
    let plain = ols_fit(&x, &data.column(PanelColumn::Target)).unwrap();
    for k in 0..3 {
        let gap = (model.estimate.beta[k] - plain.beta[k + 1]).abs();
        assert!(gap < 2.0 * plain.stderr[k + 1], "beta {k}: gap {gap} vs se {}", plain.stderr[k + 1]);
    }
}

#[test]
fn null_surrogate_is_rarely_significant() {
    let mut covered = 0;
    for seed in 0..20 {
        let data = clean_panel(3_000, [1.0, 0.6, 0.0], 100 + seed);
        let config = DmlConfig { seed, ..DmlConfig::default() };
        let est = estimate_dvwpx(&data, &config, HorizonConfig::default()).unwrap().estimate;
        if est.beta[2].abs() < 2.0 * est.stderr_beta[2] {
            covered += 1;
        }
    }
    assert!(covered >= 18, "{covered}/20");
}

#[test]
fn lasso_stage_two_stays_close_to_ols() {
    let data = clean_panel(10_000, [1.0, 0.6, 0.0], 9);
    let ols = estimate_dvwpx(&data, &DmlConfig::default(), HorizonConfig::default()).unwrap();
    let lasso_config = DmlConfig { stage2: Stage2::Lasso, ..DmlConfig::default() };
    let lasso = estimate_dvwpx(&data, &lasso_config, HorizonConfig::default()).unwrap();
    assert!(lasso.estimate.lambda_selected.is_some());
    for k in 0..2 {
        let (a, b) = (ols.estimate.beta[k], lasso.estimate.beta[k]);
        assert!((a - b).abs() < 0.05 * a.abs(), "beta {k}: ols {a} lasso {b}");
    }
}

#[test]
fn too_few_rows_is_rejected() {
    let data = clean_panel(100, [1.0, 0.6, 0.0], 1);
    assert!(estimate_dvwpx(&data, &DmlConfig::default(), HorizonConfig::default()).is_err());
}
