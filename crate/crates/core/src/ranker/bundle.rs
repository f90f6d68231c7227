//! The per-arm ranker bundle: models, reward weights, template selection and
//! nightly retraining.

use std::sync::{Arc, RwLock};

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::{ContentSignals, FeatureSpec};
use super::model::{ModelKind, ModelSnapshot, ObjectiveModel};
use super::reward::{scalarize, ObjectiveSample, RewardWeights};
use crate::domain::{ContextFeatures, Device, PageLayout, PageRegion, TemplateId};
use crate::metrics::RegionWeights;
use crate::{Error, Result};

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerBundle {
    pub schema_version: u32,
    pub features: FeatureSpec,
    pub revenue: ObjectiveModel,
    pub non_abandonment: ObjectiveModel,
    /// Absent exactly when the arm has no satisfaction signal.
    pub satisfaction: Option<ObjectiveModel>,
    pub reward_weights: RewardWeights,
    /// Turns logged region brand-match rates into satisfaction targets.
    pub region_weights: Option<RegionWeights>,
}

impl RankerBundle {
    /// Fresh bundle at the prior. The satisfaction model exists only when
    /// `region_weights` is given.
    pub fn new(
        features: FeatureSpec,
        reward_weights: RewardWeights,
        region_weights: Option<RegionWeights>,
        noise_variance: f64,
    ) -> Result<Self> {
        let names = features.names();
        let bundle = RankerBundle {
            schema_version: BUNDLE_SCHEMA_VERSION,
            revenue: ObjectiveModel::linear(names.clone(), noise_variance),
            non_abandonment: ObjectiveModel::probit(names.clone()),
            satisfaction: region_weights.map(|_| ObjectiveModel::linear(names, noise_variance)),
            features,
            reward_weights,
            region_weights,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != BUNDLE_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "bundle schema version {} is not supported (expected {BUNDLE_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.reward_weights.validate()?;
        if let Some(w) = &self.region_weights {
            w.validate()?;
        }
        if self.satisfaction.is_some() != self.region_weights.is_some() {
            return Err(Error::Invariant(
                "satisfaction model and region weights must be present together".into(),
            ));
        }
        let names = self.features.names();
        let models = [
            (&self.revenue, ModelKind::Linear, "revenue"),
            (&self.non_abandonment, ModelKind::Probit, "non_abandonment"),
        ];
        for (model, kind, label) in models.into_iter().chain(
            self.satisfaction.as_ref().map(|m| (m, ModelKind::Linear, "satisfaction")),
        ) {
            if model.kind != kind {
                return Err(Error::Invariant(format!("{label} model has kind {:?}", model.kind)));
            }
            if model.feature_schema != names || model.posterior.dim() != names.len() {
                return Err(Error::Invariant(format!("{label} model does not match the feature schema")));
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Result<BundleSnapshot> {
        Ok(BundleSnapshot {
            features: self.features.clone(),
            revenue: self.revenue.snapshot()?,
            non_abandonment: self.non_abandonment.snapshot()?,
            satisfaction: self.satisfaction.as_ref().map(ObjectiveModel::snapshot).transpose()?,
            reward_weights: self.reward_weights,
        })
    }

    /// Satisfaction target for a logged impression, if this arm has one.
    pub fn satisfaction_target(&self, signals: &ContentSignals) -> Option<f64> {
        self.region_weights
            .map(|w| PageRegion::ALL.iter().map(|&r| w.get(r) * signals.region_rate(r)).sum())
    }

    /// Resets the linear models' noise variances from a day's targets.
    pub fn refresh_noise(&mut self, log: &[ImpressionRecord]) {
        if log.is_empty() {
            return;
        }
        let revenue: Vec<f64> = log.iter().map(|r| r.targets.revenue).collect();
        self.revenue.set_noise_variance(variance(&revenue));
        if self.satisfaction.is_some() {
            let sat: Vec<f64> = log.iter().filter_map(|r| self.satisfaction_target(&r.signals)).collect();
            let v = variance(&sat);
            if let Some(m) = self.satisfaction.as_mut() {
                m.set_noise_variance(v);
            }
        }
    }

    /// Streams records through every model in order. Non-abandonment learns
    /// from desktop traffic only, since it is not optimized on mobile.
    pub fn apply_updates<'a, I>(&mut self, records: I) -> Result<usize>
    where
        I: IntoIterator<Item = &'a ImpressionRecord>,
    {
        let mut applied = 0;
        for record in records {
            let x = self.features.build(&record.context, record.template_id, &record.signals)?;
            let target = self.satisfaction_target(&record.signals);
            self.revenue.blr_update(&x, record.targets.revenue)?;
            if record.context.device == Device::Desktop {
                self.non_abandonment.probit_update(&x, record.targets.non_abandonment)?;
            }
            if let (Some(model), Some(y)) = (self.satisfaction.as_mut(), target) {
                model.blr_update(&x, y)?;
            }
            applied += 1;
        }
        Ok(applied)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bundle: RankerBundle = serde_json::from_str(text)?;
        bundle.validate()?;
        Ok(bundle)
    }
}

fn variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Immutable inference view of a bundle with cached factorizations.
#[derive(Debug, Clone)]
pub struct BundleSnapshot {
    pub features: FeatureSpec,
    pub revenue: ModelSnapshot,
    pub non_abandonment: ModelSnapshot,
    pub satisfaction: Option<ModelSnapshot>,
    pub reward_weights: RewardWeights,
}

impl BundleSnapshot {
    /// Thompson draws for every objective this request optimizes.
    pub fn sample<R: Rng + ?Sized>(&self, context: &ContextFeatures, x: &[f64], rng: &mut R) -> Result<ObjectiveSample> {
        let revenue = self.revenue.sample_prediction(x, rng)?;
        let non_abandonment = match context.device {
            Device::Desktop => Some(self.non_abandonment.sample_prediction(x, rng)?),
            Device::Mobile => None,
        };
        let satisfaction = self.satisfaction.as_ref().map(|m| m.sample_prediction(x, rng)).transpose()?;
        Ok(ObjectiveSample { revenue, non_abandonment, satisfaction })
    }

    /// Posterior-mean predictions for all objectives.
    pub fn mean(&self, x: &[f64]) -> Result<ObjectiveSample> {
        Ok(ObjectiveSample {
            revenue: self.revenue.mean_prediction(x)?,
            non_abandonment: Some(self.non_abandonment.mean_prediction(x)?),
            satisfaction: self.satisfaction.as_ref().map(|m| m.mean_prediction(x)).transpose()?,
        })
    }
}

/// Holder for the live snapshot: readers clone an `Arc` and never observe a
/// half-swapped bundle.
#[derive(Debug)]
pub struct SnapshotCell(RwLock<Arc<BundleSnapshot>>);

impl SnapshotCell {
    pub fn new(snapshot: BundleSnapshot) -> Self {
        SnapshotCell(RwLock::new(Arc::new(snapshot)))
    }

    pub fn load(&self) -> Arc<BundleSnapshot> {
        Arc::clone(&self.0.read().unwrap_or_else(|e| e.into_inner()))
    }

    pub fn store(&self, snapshot: BundleSnapshot) {
        *self.0.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(snapshot);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub template_id: TemplateId,
    pub sample: ObjectiveSample,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Index into the candidate list.
    pub chosen: usize,
    pub trace: Vec<CandidateScore>,
}

/// Scores every candidate with fresh posterior draws and returns the best.
/// Exact ties go to the lowest template id.
pub fn select_template<R: Rng + ?Sized>(
    context: &ContextFeatures,
    candidates: &[PageLayout],
    snapshot: &BundleSnapshot,
    rng: &mut R,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no candidate layouts to choose from".into()));
    }
    let mut trace = Vec::with_capacity(candidates.len());
    let mut chosen = 0;
    for (i, layout) in candidates.iter().enumerate() {
        let x = snapshot.features.build_for_layout(context, layout)?;
        let sample = snapshot.sample(context, &x, rng)?;
        let score = scalarize(&sample, &snapshot.reward_weights)?;
        if i > 0 {
            let best: &CandidateScore = &trace[chosen];
            if score > best.score || (score == best.score && layout.template_id < best.template_id) {
                chosen = i;
            }
        }
        trace.push(CandidateScore { template_id: layout.template_id, sample, score });
    }
    Ok(Selection { chosen, trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoggedTargets {
    pub revenue: f64,
    pub non_abandonment: bool,
}

/// One displayed page, as the nightly training job sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpressionRecord {
    /// Day the impression was served.
    pub ts: u32,
    pub event_id: u64,
    pub context: ContextFeatures,
    pub template_id: TemplateId,
    pub signals: ContentSignals,
    pub targets: LoggedTargets,
    /// First day on which the targets may be used for training.
    pub available_day: u32,
}

impl ImpressionRecord {
    pub fn to_jsonl(records: &[ImpressionRecord]) -> Result<String> {
        let mut out = String::new();
        for r in records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Vec<ImpressionRecord>> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| Ok(serde_json::from_str(l)?))
            .collect()
    }
}

/// Samples `ceil(fraction * n)` rows without replacement and streams them,
/// in log order, through the models. Posteriors carry over from earlier
/// days. Returns the sampled row indices; on error the bundle is untouched.
pub fn incremental_retrain<R: Rng + ?Sized>(
    bundle: &mut RankerBundle,
    log: &[ImpressionRecord],
    fraction: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidInput(format!("sample fraction {fraction} must be in (0, 1]")));
    }
    if log.is_empty() {
        return Ok(Vec::new());
    }
    let n = log.len();
    let k = ((fraction * n as f64).ceil() as usize).min(n);
    let mut rows = sample_indices(rng, n, k).into_vec();
    rows.sort_unstable();
    let mut next = bundle.clone();
    next.apply_updates(rows.iter().map(|&i| &log[i]))?;
    *bundle = next;
    Ok(rows)
}
