//! Synthetic marketplace with a planted welfare function.
//!
//! Customers carry a history vector and a latent spend propensity that is
//! correlated with it. Queries carry a brand intent and a fixed effect that
//! also moves how many brand items rank organically; ZIPs carry a fixed
//! effect that also moves stock levels. These channels make raw
//! correlations between page quality and long-term revenue misleading, so
//! the causal estimator has something to remove.

pub mod config;
pub mod events;
pub mod session;
pub mod world;

pub use config::{TemplateDesign, WidgetBlock, WidgetTheme, WorldConfig};
pub use events::{emit_panel, panel_schema, run_event, simulate_randomized, SimEvent, SHORT_TERM_NAMES, SURROGATE_NAMES};
pub use session::{
    candidate_layouts, draw_request, examination_probability, realize_long_term, simulate_session, welfare,
    LongTermOutcome, Request, SessionOutcome,
};
pub use world::{generate_world, Customer, QueryGroup, World, Zip};
