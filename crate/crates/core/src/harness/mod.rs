//! Offline evaluation, A/B comparison and the multi-arm experiment runner.

pub mod ab;
pub mod bandit;
pub mod experiment;
pub mod offline;
pub mod report;
pub mod scoring;

pub use ab::{ab_compare, LiftEstimate, LiftRow, Metric, SessionMetrics};
pub use bandit::{run_stationary_bandit, BanditRun, StationaryBandit};
pub use experiment::{
    audit_availability, ctr_region_weights, run_experiment, run_experiment_with_bundles, ArmConfig, ExperimentConfig, ExperimentReport,
    ObjectiveWeights, SatisfactionMode,
};
pub use offline::{offline_eval, OfflineEval, SegmentEval};
pub use report::{daily_csv, render_table, report_from_json, report_to_json};
pub use scoring::{auc, rmse};
