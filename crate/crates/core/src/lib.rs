//! Whole-page experience optimization for search results pages.
//!
//! The crate is organised the way the pieces depend on each other:
//!
//! - [`domain`]: items, slots, templates, layouts and page regions.
//! - [`metrics`]: the pixel- and region-weighted whole-page brand match rate.
//! - [`dml`]: three-stage double machine learning that values page-quality
//!   surrogates in long-term revenue, plus the derived region weights.
//! - [`ranker`]: per-objective Bayesian models, Thompson sampling and the
//!   scalarized template selector with daily incremental retraining.
//! - [`sim`]: a synthetic marketplace with a planted welfare function.
//! - [`harness`]: offline evaluation, A/B comparison and the experiment runner.

pub mod dml;
pub mod domain;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod ranker;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
