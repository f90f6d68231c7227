use rand::Rng;
use serde::{Deserialize, Serialize};

use super::session::{
    candidate_layouts, draw_request, realize_long_term, simulate_session, LongTermOutcome, Request, SessionOutcome,
};
use super::world::World;
use crate::dml::{PanelDataset, PanelRecord, PanelSchema};
use crate::domain::PageLayout;
use crate::metrics::BrandMatchPage;
use crate::rng::{stream, Purpose};
use crate::{Error, Result};

pub const SURROGATE_NAMES: [&str; 3] = ["bmr_top", "bmr_middle", "bmr_bottom"];
pub const SHORT_TERM_NAMES: [&str; 2] = ["revenue_short", "engagement"];

/// One served page with whichever outcomes have been realized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub request: Request,
    pub layout: PageLayout,
    pub session: Option<SessionOutcome>,
    pub long_term: Option<LongTermOutcome>,
}

/// Serves `layout` for `request` and realizes both horizons. The click and
/// long-term streams are keyed by event id only.
pub fn run_event(world: &World, request: &Request, layout: PageLayout) -> Result<SimEvent> {
    let customer = request.customer(world);
    let query = request.query_group(world);
    let mut clicks = stream(world.config.seed, Purpose::Clicks, request.event_id);
    let session = simulate_session(world, customer, query, &layout, &mut clicks);
    let mut noise = stream(world.config.seed, Purpose::LongTerm, request.event_id);
    let long_term = realize_long_term(world, customer, query, &layout, &session, &mut noise)?;
    Ok(SimEvent {
        request: request.clone(),
        layout,
        session: Some(session),
        long_term: Some(long_term),
    })
}

/// Events `first_id..first_id + n` on `day`, each shown a template drawn
/// uniformly from its eligible candidates.
pub fn simulate_randomized(world: &World, first_id: u64, n: usize, day: u32) -> Result<Vec<SimEvent>> {
    (first_id..first_id + n as u64)
        .map(|id| {
            let request = draw_request(world, id, day);
            let mut candidates = candidate_layouts(world, &request);
            if candidates.is_empty() {
                return Err(Error::Invariant(format!("event {id}: no eligible template")));
            }
            let pick = stream(world.config.seed, Purpose::Assignment, id).random_range(0..candidates.len());
            run_event(world, &request, candidates.swap_remove(pick))
        })
        .collect()
}

pub fn panel_schema(world: &World) -> PanelSchema {
    PanelSchema {
        surrogates: SURROGATE_NAMES.iter().map(|s| s.to_string()).collect(),
        short_term: SHORT_TERM_NAMES.iter().map(|s| s.to_string()).collect(),
        history: (0..world.config.history_dim).map(|k| format!("history_{k}")).collect(),
    }
}

/// Panel rows sorted by event id: target = long-term revenue, surrogates =
/// region brand match rates, short-term = (revenue, clicks), controls =
/// customer history, keyed by query group and ZIP.
pub fn emit_panel(world: &World, events: &[SimEvent]) -> Result<PanelDataset> {
    let mut order: Vec<&SimEvent> = events.iter().collect();
    order.sort_by_key(|e| e.request.event_id);
    let records = order
        .into_iter()
        .map(|e| {
            let id = e.request.event_id;
            let session = e
                .session
                .as_ref()
                .ok_or_else(|| Error::InvalidInput(format!("event {id}: missing short-term outcome")))?;
            let long_term = e
                .long_term
                .ok_or_else(|| Error::InvalidInput(format!("event {id}: missing long-term outcome")))?;
            let customer = e.request.customer(world);
            Ok(PanelRecord {
                event_id: id,
                customer_id: u64::from(customer.id),
                query_group: format!("q{}", e.request.query),
                zip: format!("z{}", customer.zip),
                drev: long_term.long_term_revenue,
                surrogates: BrandMatchPage::from_layout(&e.layout)?.region_bmrs().to_vec(),
                short_term: vec![session.short_term_revenue, session.engagement_a],
                history: customer.history.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PanelDataset::new(panel_schema(world), records)
}
