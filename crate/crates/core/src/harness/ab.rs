use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Device, TemplateId};
use crate::rng::{stream, Purpose};
use crate::{Error, Result};

/// Reported outcomes of one served session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub event_id: u64,
    pub day: u32,
    pub device: Device,
    pub template_id: TemplateId,
    pub revenue: f64,
    pub long_term_revenue: f64,
    pub clicked: bool,
    pub pr_wp_bmr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Revenue,
    LongTermRevenue,
    SearchCtr,
    PrWpBmr,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Revenue, Metric::LongTermRevenue, Metric::SearchCtr, Metric::PrWpBmr];

    pub fn value(self, s: &SessionMetrics) -> f64 {
        match self {
            Metric::Revenue => s.revenue,
            Metric::LongTermRevenue => s.long_term_revenue,
            Metric::SearchCtr => f64::from(u8::from(s.clicked)),
            Metric::PrWpBmr => s.pr_wp_bmr,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Revenue => "revenue",
            Metric::LongTermRevenue => "long_term_revenue",
            Metric::SearchCtr => "search_ctr",
            Metric::PrWpBmr => "pr_wp_bmr",
        }
    }
}

pub fn metric_means(log: &[SessionMetrics]) -> [f64; 4] {
    let mut sums = [0.0; 4];
    for s in log {
        for (k, m) in Metric::ALL.iter().enumerate() {
            sums[k] += m.value(s);
        }
    }
    sums.map(|v| v / log.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftEstimate {
    /// `(treatment - control) / control`.
    pub lift: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftRow {
    pub metric: Metric,
    pub control_mean: f64,
    pub treatment_mean: f64,
    /// `None` when the control mean is zero.
    pub estimate: Option<LiftEstimate>,
    pub bootstrap_n: usize,
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Relative lifts of every metric with percentile-bootstrap 95% intervals.
/// Each resample draws both logs again with replacement at the session
/// level, from its own random stream.
pub fn ab_compare(
    control: &[SessionMetrics],
    treatment: &[SessionMetrics],
    bootstrap_n: usize,
    seed: u64,
) -> Result<Vec<LiftRow>> {
    if control.is_empty() || treatment.is_empty() {
        return Err(Error::InvalidInput("both logs need at least one session".into()));
    }
    if bootstrap_n == 0 {
        return Err(Error::InvalidInput("bootstrap_n must be at least 1".into()));
    }
    let c: Vec<[f64; 4]> = control.iter().map(|s| Metric::ALL.map(|m| m.value(s))).collect();
    let t: Vec<[f64; 4]> = treatment.iter().map(|s| Metric::ALL.map(|m| m.value(s))).collect();

    let resample = |b: usize| -> [f64; 4] {
        let mut rng = stream(seed, Purpose::Bootstrap, b as u64);
        let mut mean = |rows: &[[f64; 4]]| {
            let mut sums = [0.0; 4];
            for _ in 0..rows.len() {
                let r = &rows[rng.random_range(0..rows.len())];
                for k in 0..4 {
                    sums[k] += r[k];
                }
            }
            sums.map(|v| v / rows.len() as f64)
        };
        let (mc, mt) = (mean(&c), mean(&t));
        [0, 1, 2, 3].map(|k| (mt[k] - mc[k]) / mc[k])
    };

    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(bootstrap_n);
    let mut draws = vec![[0.0; 4]; bootstrap_n];
    std::thread::scope(|scope| {
        for (w, chunk) in draws.chunks_mut(bootstrap_n.div_ceil(workers)).enumerate() {
            let resample = &resample;
            let start = w * bootstrap_n.div_ceil(workers);
            scope.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    *slot = resample(start + i);
                }
            });
        }
    });

    let control_means = metric_means(control);
    let treatment_means = metric_means(treatment);
    Ok(Metric::ALL
        .iter()
        .enumerate()
        .map(|(k, &metric)| {
            let (cm, tm) = (control_means[k], treatment_means[k]);
            let estimate = (cm != 0.0).then(|| {
                let mut lifts: Vec<f64> = draws.iter().map(|d| d[k]).filter(|v| v.is_finite()).collect();
                lifts.sort_by(f64::total_cmp);
                let (ci_low, ci_high) = if lifts.is_empty() {
                    (f64::NAN, f64::NAN)
                } else {
                    (quantile(&lifts, 0.025), quantile(&lifts, 0.975))
                };
                LiftEstimate { lift: (tm - cm) / cm, ci_low, ci_high }
            });
            LiftRow { metric, control_mean: cm, treatment_mean: tm, estimate, bootstrap_n }
        })
        .collect())
}
