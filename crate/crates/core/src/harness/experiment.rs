use serde::{Deserialize, Serialize};

use super::ab::{ab_compare, metric_means, LiftRow, SessionMetrics};
use crate::dml::{estimate_dvwpx, DmlConfig};
use crate::domain::{HorizonConfig, PageRegion};
use crate::metrics::{pr_wp_bmr, RegionWeights};
use crate::ranker::{
    incremental_retrain, select_template, ContentSignals, FeatureSpec, ImpressionRecord, LoggedTargets, ObjectiveScale,
    RankerBundle, RewardWeights,
};
use crate::rng::{stream, Purpose};
use crate::sim::{candidate_layouts, draw_request, emit_panel, generate_world, run_event, simulate_randomized, SimEvent, World, WorldConfig, SURROGATE_NAMES};
use crate::{Error, Result};

/// Where an arm's satisfaction objective comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SatisfactionMode {
    /// No satisfaction objective; the model is never built.
    None,
    /// Region-weighted brand match under click-through-rate weights.
    CtrWeights,
    /// Region-weighted brand match under weights derived from estimated
    /// downstream value.
    DvwpxWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub revenue: f64,
    pub non_abandonment: f64,
    pub satisfaction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    pub name: String,
    pub satisfaction_mode: SatisfactionMode,
    pub weights: ObjectiveWeights,
    /// Gives the models brand-alignment features of each candidate page in
    /// addition to context, customer and template indicators.
    pub content_features: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub world: WorldConfig,
    pub arms: Vec<ArmConfig>,
    pub days: u32,
    pub sessions_per_day: usize,
    /// Leading days served by uniform random template choice. They supply
    /// the objective normalization statistics and the first training data.
    pub warmup_days: u32,
    /// Overrides `world.seed`; drives every random stream of the run.
    pub seed: u64,
    pub bootstrap_n: usize,
    pub retrain_fraction: f64,
    /// Size of the randomized panel the downstream-value weights are fit on.
    pub weights_panel_events: usize,
    pub dml: DmlConfig,
    /// Re-estimates click-through-rate region weights from the randomized
    /// panel instead of using the published ones.
    pub reestimate_ctr_weights: bool,
    pub horizon: HorizonConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let arm = |name: &str, mode, satisfaction, content_features| ArmConfig {
            name: name.into(),
            satisfaction_mode: mode,
            weights: ObjectiveWeights { revenue: 0.5, non_abandonment: 0.2, satisfaction },
            content_features,
        };
        ExperimentConfig {
            world: WorldConfig::default(),
            arms: vec![
                arm("control", SatisfactionMode::None, 0.0, false),
                arm("t1", SatisfactionMode::CtrWeights, 0.3, true),
                arm("t2", SatisfactionMode::DvwpxWeights, 0.3, true),
            ],
            days: 8,
            sessions_per_day: 3_000,
            warmup_days: 1,
            seed: 0,
            bootstrap_n: 1_000,
            retrain_fraction: 0.5,
            weights_panel_events: 50_000,
            dml: DmlConfig::default(),
            reestimate_ctr_weights: false,
            horizon: HorizonConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.arms.is_empty() {
            return Err(Error::InvalidInput("an experiment needs at least one arm".into()));
        }
        for (i, arm) in self.arms.iter().enumerate() {
            if self.arms[..i].iter().any(|a| a.name == arm.name) {
                return Err(Error::InvalidInput(format!("duplicate arm name `{}`", arm.name)));
            }
            if arm.satisfaction_mode == SatisfactionMode::None && arm.weights.satisfaction != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "arm `{}` has no satisfaction objective but a non-zero satisfaction weight",
                    arm.name
                )));
            }
        }
        if !(self.warmup_days >= 1 && self.days >= self.warmup_days) {
            return Err(Error::InvalidInput("need days >= warmup_days >= 1".into()));
        }
        if self.sessions_per_day == 0 || self.bootstrap_n == 0 {
            return Err(Error::InvalidInput("sessions_per_day and bootstrap_n must be at least 1".into()));
        }
        if !(self.retrain_fraction > 0.0 && self.retrain_fraction <= 1.0) {
            return Err(Error::InvalidInput("retrain_fraction must lie in (0, 1]".into()));
        }
        self.horizon.validate()?;
        self.dml.validate()?;
        let mut world = self.world.clone();
        world.seed = self.seed;
        world.validate()
    }

    /// Keeps only the named arms, in the configured order.
    pub fn select_arms(&mut self, names: &[String]) -> Result<()> {
        if let Some(missing) = names.iter().find(|n| !self.arms.iter().any(|a| &a.name == *n)) {
            return Err(Error::InvalidInput(format!("no arm named `{missing}`")));
        }
        self.arms.retain(|a| names.contains(&a.name));
        Ok(())
    }
}

/// Event ids of the randomized weights panel live far above experiment traffic.
const PANEL_EVENT_BASE: u64 = 1 << 48;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvwpxSummary {
    pub beta: Vec<f64>,
    pub stderr_beta: Vec<f64>,
    pub weights: RegionWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub name: String,
    pub satisfaction_mode: SatisfactionMode,
    pub region_weights: Option<RegionWeights>,
    pub sessions: usize,
    pub revenue: f64,
    pub long_term_revenue: f64,
    pub search_ctr: f64,
    pub pr_wp_bmr: f64,
    /// Share of post-warm-up sessions served each template, by template id.
    pub template_share: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmLifts {
    pub arm: String,
    pub baseline: String,
    pub rows: Vec<LiftRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRow {
    pub arm: String,
    pub day: u32,
    pub warmup: bool,
    pub sessions: usize,
    pub revenue: f64,
    pub long_term_revenue: f64,
    pub search_ctr: f64,
    pub pr_wp_bmr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub days: u32,
    pub warmup_days: u32,
    pub sessions_per_day: usize,
    pub templates: Vec<String>,
    pub dvwpx: DvwpxSummary,
    /// Weights of the reported page-quality metric.
    pub report_weights: RegionWeights,
    pub arms: Vec<ArmSummary>,
    pub lifts: Vec<ArmLifts>,
    pub daily: Vec<DailyRow>,
}

/// Click-through rate per slot in each region, normalized to sum to one.
pub fn ctr_region_weights(events: &[SimEvent]) -> Result<RegionWeights> {
    let (mut clicks, mut slots) = ([0.0; 3], [0.0; 3]);
    for e in events {
        let Some(session) = &e.session else { continue };
        for (slot, &clicked) in e.layout.slots.iter().zip(&session.clicks) {
            let r = slot.region()?.index();
            slots[r] += 1.0;
            clicks[r] += f64::from(u8::from(clicked));
        }
    }
    let rates: Vec<f64> = (0..3).map(|r| if slots[r] > 0.0 { clicks[r] / slots[r] } else { 0.0 }).collect();
    let total: f64 = rates.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput("no clicks to estimate region weights from".into()));
    }
    RegionWeights::new(rates[0] / total, rates[1] / total, rates[2] / total)
}

/// Fails if any record's targets were not yet available on `day`.
pub fn audit_availability(log: &[ImpressionRecord], day: u32) -> Result<()> {
    match log.iter().find(|r| r.available_day > day) {
        Some(r) => Err(Error::Invariant(format!(
            "training on day {day} would read event {} whose outcomes arrive on day {}",
            r.event_id, r.available_day
        ))),
        None => Ok(()),
    }
}

struct Served {
    metrics: SessionMetrics,
    record: ImpressionRecord,
}

fn serve(world: &World, event: SimEvent, report_weights: &RegionWeights) -> Result<Served> {
    let session = event.session.as_ref().ok_or_else(|| Error::Invariant("event without session outcome".into()))?;
    let long_term = event.long_term.ok_or_else(|| Error::Invariant("event without long-term outcome".into()))?;
    let request = &event.request;
    let metrics = SessionMetrics {
        event_id: request.event_id,
        day: request.day,
        device: request.device,
        template_id: event.layout.template_id,
        revenue: session.short_term_revenue,
        long_term_revenue: long_term.long_term_revenue,
        clicked: session.non_abandonment,
        pr_wp_bmr: pr_wp_bmr(&event.layout, report_weights)?,
    };
    // Session outcomes are complete by the end of the serving day; the
    // long-term target is never logged for training.
    let record = ImpressionRecord {
        ts: request.day,
        event_id: request.event_id,
        context: request.context(world),
        template_id: event.layout.template_id,
        signals: ContentSignals::of(&event.layout)?,
        targets: LoggedTargets { revenue: session.short_term_revenue, non_abandonment: session.non_abandonment },
        available_day: request.day,
    };
    Ok(Served { metrics, record })
}

fn day_ids(config: &ExperimentConfig, day: u32) -> std::ops::Range<u64> {
    let n = config.sessions_per_day as u64;
    u64::from(day) * n..(u64::from(day) + 1) * n
}

fn scale(weight: f64, values: &[f64]) -> Result<ObjectiveScale> {
    let mut s = ObjectiveScale::from_history(weight, values)?;
    if !(s.std > 0.0) {
        s.std = 1.0;
    }
    Ok(s)
}

struct ArmRun {
    sessions: Vec<SessionMetrics>,
    bundle: RankerBundle,
}

fn run_arm(
    config: &ExperimentConfig,
    world: &World,
    arm_index: usize,
    arm: &ArmConfig,
    region_weights: Option<RegionWeights>,
    warmup: &[Vec<Served>],
    report_weights: &RegionWeights,
) -> Result<ArmRun> {
    let features = FeatureSpec {
        templates: world.templates.iter().map(|t| t.id).collect(),
        content_aware: arm.content_features,
    };
    let warm: Vec<&ImpressionRecord> = warmup.iter().flatten().map(|s| &s.record).collect();
    let revenue: Vec<f64> = warm.iter().map(|r| r.targets.revenue).collect();
    let non_abandonment: Vec<f64> = warm.iter().map(|r| f64::from(u8::from(r.targets.non_abandonment))).collect();
    let satisfaction = match region_weights {
        Some(w) => {
            let values: Vec<f64> = warm
                .iter()
                .map(|r| PageRegion::ALL.iter().map(|&g| w.get(g) * r.signals.region_rate(g)).sum())
                .collect();
            scale(arm.weights.satisfaction, &values)?
        }
        None => ObjectiveScale::new(0.0, 0.0, 1.0),
    };
    let reward = RewardWeights {
        revenue: scale(arm.weights.revenue, &revenue)?,
        non_abandonment: scale(arm.weights.non_abandonment, &non_abandonment)?,
        satisfaction,
    };
    let mut bundle = RankerBundle::new(features, reward, region_weights, 1.0)?;
    if arm.satisfaction_mode == SatisfactionMode::None && bundle.satisfaction.is_some() {
        return Err(Error::Invariant(format!("arm `{}` built a satisfaction model", arm.name)));
    }

    let arm_tag = arm_index as u32;
    let nightly = |bundle: &mut RankerBundle, log: &[ImpressionRecord], day: u32| -> Result<()> {
        audit_availability(log, day)?;
        bundle.refresh_noise(log);
        incremental_retrain(bundle, log, config.retrain_fraction, &mut stream(config.seed, Purpose::Retrain(arm_tag), u64::from(day)))?;
        Ok(())
    };
    for (day, served) in warmup.iter().enumerate() {
        let log: Vec<ImpressionRecord> = served.iter().map(|s| s.record.clone()).collect();
        nightly(&mut bundle, &log, day as u32)?;
    }

    let mut sessions = Vec::with_capacity(config.sessions_per_day * (config.days - config.warmup_days) as usize);
    for day in config.warmup_days..config.days {
        let snapshot = bundle.snapshot()?;
        let mut log = Vec::with_capacity(config.sessions_per_day);
        for id in day_ids(config, day) {
            let request = draw_request(world, id, day);
            let mut candidates = candidate_layouts(world, &request);
            let context = request.context(world);
            let mut rng = stream(config.seed, Purpose::Thompson(arm_tag), id);
            let selection = select_template(&context, &candidates, &snapshot, &mut rng)?;
            let layout = candidates.swap_remove(selection.chosen);
            let served = serve(world, run_event(world, &request, layout)?, report_weights)?;
            sessions.push(served.metrics);
            log.push(served.record);
        }
        nightly(&mut bundle, &log, day)?;
    }
    Ok(ArmRun { sessions, bundle })
}

fn daily_rows(arm: &str, sessions: &[SessionMetrics], warmup: bool) -> Vec<DailyRow> {
    let mut rows: Vec<DailyRow> = Vec::new();
    let mut start = 0;
    while start < sessions.len() {
        let day = sessions[start].day;
        let end = start + sessions[start..].iter().take_while(|s| s.day == day).count();
        let m = metric_means(&sessions[start..end]);
        rows.push(DailyRow {
            arm: arm.to_string(),
            day,
            warmup,
            sessions: end - start,
            revenue: m[0],
            long_term_revenue: m[1],
            search_ctr: m[2],
            pr_wp_bmr: m[3],
        });
        start = end;
    }
    rows
}

/// Runs every arm on common traffic and compares each to the first arm.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with_bundles(config).map(|(report, _)| report)
}

/// Like [`run_experiment`], also returning each arm's final ranker bundle
/// keyed by arm name.
pub fn run_experiment_with_bundles(config: &ExperimentConfig) -> Result<(ExperimentReport, Vec<(String, RankerBundle)>)> {
    config.validate()?;
    let mut world_config = config.world.clone();
    world_config.seed = config.seed;
    let world = generate_world(&world_config)?;

    // Region weights: downstream-value weights from a randomized panel.
    let panel_events = simulate_randomized(&world, PANEL_EVENT_BASE, config.weights_panel_events, 0)?;
    let panel = emit_panel(&world, &panel_events)?;
    let mut dml = config.dml.clone();
    dml.seed = config.seed;
    let model = estimate_dvwpx(&panel, &dml, config.horizon).map_err(Error::in_stage("region-weights"))?;
    let dv_weights = model
        .derive_region_weights(SURROGATE_NAMES)
        .map_err(Error::in_stage("region-weights"))?;
    let ctr_weights = if config.reestimate_ctr_weights {
        ctr_region_weights(&panel_events)?
    } else {
        RegionWeights::CTR
    };
    drop(panel_events);

    // Warm-up traffic is served at random and shared by every arm.
    let mut warmup = Vec::with_capacity(config.warmup_days as usize);
    for day in 0..config.warmup_days {
        let ids = day_ids(config, day);
        let events = simulate_randomized(&world, ids.start, config.sessions_per_day, day)?;
        warmup.push(events.into_iter().map(|e| serve(&world, e, &dv_weights)).collect::<Result<Vec<_>>>()?);
    }

    let arm_weights: Vec<Option<RegionWeights>> = config
        .arms
        .iter()
        .map(|a| match a.satisfaction_mode {
            SatisfactionMode::None => None,
            SatisfactionMode::CtrWeights => Some(ctr_weights),
            SatisfactionMode::DvwpxWeights => Some(dv_weights),
        })
        .collect();

    let runs: Vec<Result<ArmRun>> = std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .arms
            .iter()
            .enumerate()
            .map(|(i, arm)| {
                let (world, warmup, weights) = (&world, &warmup, arm_weights[i]);
                scope.spawn(move || run_arm(config, world, i, arm, weights, warmup, &dv_weights))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Invariant("arm worker panicked".into()))))
            .collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let n_templates = world.templates.len();
    let mut arms = Vec::with_capacity(runs.len());
    let mut daily = Vec::new();
    let warm_sessions: Vec<SessionMetrics> = warmup.iter().flatten().map(|s| s.metrics.clone()).collect();
    for ((arm, run), weights) in config.arms.iter().zip(&runs).zip(&arm_weights) {
        let m = metric_means(&run.sessions);
        let mut share = vec![0.0; n_templates];
        for s in &run.sessions {
            share[s.template_id.0 as usize] += 1.0;
        }
        let total = run.sessions.len().max(1) as f64;
        arms.push(ArmSummary {
            name: arm.name.clone(),
            satisfaction_mode: arm.satisfaction_mode,
            region_weights: *weights,
            sessions: run.sessions.len(),
            revenue: m[0],
            long_term_revenue: m[1],
            search_ctr: m[2],
            pr_wp_bmr: m[3],
            template_share: share.into_iter().map(|c| c / total).collect(),
        });
        daily.extend(daily_rows(&arm.name, &warm_sessions, true));
        daily.extend(daily_rows(&arm.name, &run.sessions, false));
    }

    let mut lifts = Vec::new();
    if !runs.is_empty() && !runs[0].sessions.is_empty() {
        for (arm, run) in config.arms.iter().zip(&runs).skip(1) {
            lifts.push(ArmLifts {
                arm: arm.name.clone(),
                baseline: config.arms[0].name.clone(),
                rows: ab_compare(&runs[0].sessions, &run.sessions, config.bootstrap_n, config.seed)?,
            });
        }
    }

    let report = ExperimentReport {
        seed: config.seed,
        days: config.days,
        warmup_days: config.warmup_days,
        sessions_per_day: config.sessions_per_day,
        templates: world.templates.iter().map(|t| t.name.clone()).collect(),
        dvwpx: DvwpxSummary {
            beta: model.estimate.beta.clone(),
            stderr_beta: model.estimate.stderr_beta.clone(),
            weights: dv_weights,
        },
        report_weights: dv_weights,
        arms,
        lifts,
        daily,
    };
    let bundles = config.arms.iter().map(|a| a.name.clone()).zip(runs.into_iter().map(|r| r.bundle)).collect();
    Ok((report, bundles))
}

