//! Multi-objective page template ranker: one Bayesian model per objective,
//! Thompson sampling at inference, scalarized reward and daily retraining.

pub mod bundle;
pub mod features;
pub mod model;
pub mod posterior;
pub mod reward;

pub use bundle::{
    incremental_retrain, select_template, BundleSnapshot, CandidateScore, ImpressionRecord, LoggedTargets, RankerBundle,
    Selection, SnapshotCell,
};
pub use features::{ContentSignals, FeatureSpec};
pub use model::{thompson_sample_predict, ModelKind, ModelSnapshot, ObjectiveModel};
pub use posterior::GaussianPosterior;
pub use reward::{scalarize, ObjectiveSample, ObjectiveScale, RewardWeights};
