use serde::{Deserialize, Serialize};

use super::scoring::{auc, rmse};
use crate::domain::Device;
use crate::ranker::{ImpressionRecord, RankerBundle};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEval {
    pub device: Device,
    pub rows: usize,
    pub revenue_rmse: f64,
    /// `None` when the segment has a single label class.
    pub non_abandonment_auc: Option<f64>,
    /// `None` for bundles without a satisfaction model.
    pub satisfaction_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineEval {
    pub segments: Vec<SegmentEval>,
    pub warnings: Vec<String>,
}

/// Scores posterior-mean predictions on a held-out log, per device.
pub fn offline_eval(bundle: &RankerBundle, test_log: &[ImpressionRecord]) -> Result<OfflineEval> {
    if test_log.is_empty() {
        return Err(Error::InvalidInput("offline evaluation needs a non-empty test log".into()));
    }
    let snapshot = bundle.snapshot()?;
    let mut segments = Vec::new();
    let mut warnings = Vec::new();
    for device in [Device::Desktop, Device::Mobile] {
        let rows: Vec<&ImpressionRecord> = test_log.iter().filter(|r| r.context.device == device).collect();
        if rows.is_empty() {
            warnings.push(format!("no {device:?} rows in the test log; segment omitted"));
            continue;
        }
        let (mut rev_pred, mut rev_true) = (Vec::new(), Vec::new());
        let (mut na_score, mut na_label) = (Vec::new(), Vec::new());
        let (mut sat_pred, mut sat_true) = (Vec::new(), Vec::new());
        for r in &rows {
            let x = bundle.features.build(&r.context, r.template_id, &r.signals)?;
            let mean = snapshot.mean(&x)?;
            rev_pred.push(mean.revenue);
            rev_true.push(r.targets.revenue);
            na_score.push(mean.non_abandonment.unwrap_or(0.5));
            na_label.push(r.targets.non_abandonment);
            if let (Some(p), Some(t)) = (mean.satisfaction, bundle.satisfaction_target(&r.signals)) {
                sat_pred.push(p);
                sat_true.push(t);
            }
        }
        let non_abandonment_auc = auc(&na_score, &na_label).ok();
        if non_abandonment_auc.is_none() {
            warnings.push(format!("{device:?}: single-class non-abandonment labels; AUC omitted"));
        }
        segments.push(SegmentEval {
            device,
            rows: rows.len(),
            revenue_rmse: rmse(&rev_pred, &rev_true)?,
            non_abandonment_auc,
            satisfaction_rmse: if sat_true.is_empty() { None } else { Some(rmse(&sat_pred, &sat_true)?) },
        });
    }
    Ok(OfflineEval { segments, warnings })
}
