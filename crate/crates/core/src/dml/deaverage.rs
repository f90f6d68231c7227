//! Two-way fixed-effect removal by alternating group demeaning.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::panel::{PanelColumn, PanelDataset};
use crate::{Error, Result};

/// Stop early once every group mean is below this. Far below any tolerance
/// the estimator cares about, so early stopping never changes results.
pub const EARLY_STOP_TOLERANCE: f64 = 1e-12;

/// Dense group indices for the query-group and ZIP keys.
#[derive(Debug, Clone)]
pub struct GroupIndex {
    pub query: Vec<usize>,
    pub zip: Vec<usize>,
    pub n_query: usize,
    pub n_zip: usize,
}

fn index_keys<'a>(keys: impl Iterator<Item = &'a str>) -> Result<(Vec<usize>, usize)> {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut out = Vec::new();
    for key in keys {
        if key.is_empty() {
            return Err(Error::InvalidInput(format!("row {} has an empty group key", out.len())));
        }
        let next = ids.len();
        out.push(*ids.entry(key).or_insert(next));
    }
    Ok((out, ids.len()))
}

impl GroupIndex {
    pub fn from_dataset(data: &PanelDataset) -> Result<Self> {
        let (query, n_query) = index_keys(data.records.iter().map(|r| r.query_group.as_str()))?;
        let (zip, n_zip) = index_keys(data.records.iter().map(|r| r.zip.as_str()))?;
        Ok(GroupIndex { query, zip, n_query, n_zip })
    }

    pub fn from_indices(query: Vec<usize>, zip: Vec<usize>) -> Result<Self> {
        if query.len() != zip.len() {
            return Err(Error::SchemaMismatch { expected: query.len(), got: zip.len() });
        }
        let n_query = query.iter().max().map_or(0, |m| m + 1);
        let n_zip = zip.iter().max().map_or(0, |m| m + 1);
        Ok(GroupIndex { query, zip, n_query, n_zip })
    }

    pub fn len(&self) -> usize {
        self.query.len()
    }

    pub fn is_empty(&self) -> bool {
        self.query.is_empty()
    }
}

fn group_means(values: &[f64], groups: &[usize], n_groups: usize) -> Vec<f64> {
    let mut sum = vec![0.0; n_groups];
    let mut count = vec![0usize; n_groups];
    for (&v, &g) in values.iter().zip(groups) {
        sum[g] += v;
        count[g] += 1;
    }
    sum.iter()
        .zip(&count)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect()
}

fn subtract_group_means(values: &mut [f64], groups: &[usize], n_groups: usize) -> f64 {
    let means = group_means(values, groups, n_groups);
    for (v, &g) in values.iter_mut().zip(groups) {
        *v -= means[g];
    }
    means.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn max_abs_group_mean(values: &[f64], groups: &[usize], n_groups: usize) -> f64 {
    group_means(values, groups, n_groups)
        .iter()
        .fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeaverageDiagnostics {
    /// Iterations actually run per column (at most the requested count).
    pub iterations_run: Vec<usize>,
    /// Largest absolute query-group or ZIP mean left in each column.
    pub residual_group_mean_max: Vec<f64>,
}

impl DeaverageDiagnostics {
    pub fn max_residual_group_mean(&self) -> f64 {
        self.residual_group_mean_max.iter().fold(0.0, |m, x| m.max(*x))
    }
}

/// Alternately subtracts query-group then ZIP means from each column in place.
pub fn deaverage_columns(
    columns: &mut [Vec<f64>],
    groups: &GroupIndex,
    iterations: usize,
) -> Result<DeaverageDiagnostics> {
    if iterations == 0 {
        return Err(Error::InvalidInput("deaverage needs at least one iteration".into()));
    }
    if groups.is_empty() {
        return Err(Error::InvalidInput("cannot deaverage an empty dataset".into()));
    }
    let mut iterations_run = Vec::with_capacity(columns.len());
    let mut residual = Vec::with_capacity(columns.len());
    for column in columns.iter_mut() {
        if column.len() != groups.len() {
            return Err(Error::SchemaMismatch { expected: groups.len(), got: column.len() });
        }
        let mut run = 0;
        for _ in 0..iterations {
            run += 1;
            let moved_q = subtract_group_means(column, &groups.query, groups.n_query);
            let moved_z = subtract_group_means(column, &groups.zip, groups.n_zip);
            if moved_q.max(moved_z) < EARLY_STOP_TOLERANCE {
                break;
            }
        }
        iterations_run.push(run);
        residual.push(
            max_abs_group_mean(column, &groups.query, groups.n_query)
                .max(max_abs_group_mean(column, &groups.zip, groups.n_zip)),
        );
    }
    Ok(DeaverageDiagnostics {
        iterations_run,
        residual_group_mean_max: residual,
    })
}

/// Returns a copy of `data` with the selected columns de-averaged over the
/// (query group, ZIP) keys.
pub fn deaverage(
    data: &PanelDataset,
    columns: &[PanelColumn],
    iterations: usize,
) -> Result<(PanelDataset, DeaverageDiagnostics)> {
    if data.is_empty() {
        return Err(Error::InvalidInput("cannot deaverage an empty dataset".into()));
    }
    let groups = GroupIndex::from_dataset(data)?;
    let mut values: Vec<Vec<f64>> = columns
        .iter()
        .map(|&c| data.records.iter().map(|r| r.get(c)).collect())
        .collect();
    let diagnostics = deaverage_columns(&mut values, &groups, iterations)?;
    let mut out = data.clone();
    for (column, vals) in columns.iter().zip(&values) {
        for (record, &v) in out.records.iter_mut().zip(vals) {
            *record.get_mut(*column) = v;
        }
    }
    Ok((out, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn crossed(n: usize, nq: usize, nz: usize, seed: u64) -> (GroupIndex, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q: Vec<usize> = (0..n).map(|i| i % nq).collect();
        let z: Vec<usize> = (0..n).map(|_| rng.random_range(0..nz)).collect();
        let v = (0..n).map(|i| q[i] as f64 * 0.7 - z[i] as f64 + rng.random::<f64>()).collect();
        (GroupIndex::from_indices(q, z).unwrap(), v)
    }

    #[test]
    fn single_query_group_is_plain_demeaning() {
        let groups = GroupIndex::from_indices(vec![0; 4], vec![0; 4]).unwrap();
        let mut cols = vec![vec![1.0, 2.0, 3.0, 6.0]];
        let d = deaverage_columns(&mut cols, &groups, 1).unwrap();
        assert_eq!(cols[0], vec![-2.0, -1.0, 0.0, 3.0]);
        assert!(d.max_residual_group_mean() < 1e-15);
    }

    #[test]
    fn within_group_constants_vanish() {
        let groups = GroupIndex::from_indices(vec![0, 0, 1, 1, 2], vec![0, 1, 0, 1, 1]).unwrap();
        let mut cols = vec![vec![4.0, 4.0, -1.0, -1.0, 9.0]];
        deaverage_columns(&mut cols, &groups, 20).unwrap();
        assert!(cols[0].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn twenty_iterations_clear_group_means() {
        let (groups, v) = crossed(2_000, 20, 15, 5);
        let mut cols = vec![v];
        let d = deaverage_columns(&mut cols, &groups, 20).unwrap();
        assert!(d.max_residual_group_mean() < 1e-6, "{d:?}");
    }

    #[test]
    fn idempotent() {
        let (groups, v) = crossed(1_000, 12, 9, 11);
        let mut once = vec![v];
        deaverage_columns(&mut once, &groups, 20).unwrap();
        let mut twice = once.clone();
        deaverage_columns(&mut twice, &groups, 20).unwrap();
        let change = once[0].iter().zip(&twice[0]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(change <= 1e-10, "change {change}");
    }

    #[test]
    fn empty_and_zero_iterations_rejected() {
        let groups = GroupIndex::from_indices(vec![], vec![]).unwrap();
        assert!(deaverage_columns(&mut [], &groups, 20).is_err());
        let groups = GroupIndex::from_indices(vec![0], vec![0]).unwrap();
        assert!(deaverage_columns(&mut [vec![1.0]], &groups, 0).is_err());
    }
}
