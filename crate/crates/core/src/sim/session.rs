use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::WidgetTheme;
use super::world::{Customer, QueryGroup, World};
use crate::domain::{fill_template, ContentKind, ContextFeatures, Device, Item, PageLayout};
use crate::metrics::{brand_match, BrandMatchPage};
use crate::rng::{stream, Purpose};
use crate::{Error, Result};

/// Who searched for what, and when.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub event_id: u64,
    pub day: u32,
    pub customer: u32,
    pub query: u32,
    pub device: Device,
}

impl Request {
    pub fn context(&self, world: &World) -> ContextFeatures {
        let q = &world.queries[self.query as usize];
        ContextFeatures {
            device: self.device,
            query_specificity: q.specificity,
            category: q.category,
            membership: world.customers[self.customer as usize].membership,
        }
    }

    pub fn customer<'w>(&self, world: &'w World) -> &'w Customer {
        &world.customers[self.customer as usize]
    }

    pub fn query_group<'w>(&self, world: &'w World) -> &'w QueryGroup {
        &world.queries[self.query as usize]
    }
}

/// The request for `event_id`. Depends only on the world seed and the id,
/// so every arm of an experiment sees the same traffic.
pub fn draw_request(world: &World, event_id: u64, day: u32) -> Request {
    let mut rng = stream(world.config.seed, Purpose::Request, event_id);
    Request {
        event_id,
        day,
        customer: rng.random_range(0..world.customers.len() as u32),
        query: rng.random_range(0..world.queries.len() as u32),
        device: if rng.random_bool(world.config.desktop_share) {
            Device::Desktop
        } else {
            Device::Mobile
        },
    }
}

/// Every template that can be filled for this request, in template order.
///
/// Stock and the personalized organic ranking are drawn once per event, so
/// all candidates share them. A brand widget is ineligible when too few
/// items of the query's brand are in stock.
pub fn candidate_layouts(world: &World, request: &Request) -> Vec<PageLayout> {
    let c = &world.config;
    let q = request.query_group(world);
    let customer = request.customer(world);
    let zip = &world.zips[customer.zip as usize];
    let mut rng = stream(c.seed, Purpose::Candidates, request.event_id);

    let personal = c.personalization * customer.history.first().copied().unwrap_or(0.0);
    let mut ranked: Vec<(f64, &Item)> = Vec::with_capacity(q.pool.len());
    for &i in &q.pool {
        let in_stock = rng.random_bool(zip.availability);
        let noise: f64 = rng.sample::<f64, _>(StandardNormal) * c.ranking_noise;
        if in_stock {
            let item = &world.catalog[i];
            let bonus = if item.brand == q.brand { q.brand_depth + personal } else { 0.0 };
            ranked.push((item.base_appeal + bonus + noise, item));
        }
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.id.cmp(&b.1.id)));

    let mut by_appeal: Vec<&Item> = ranked.iter().map(|(_, item)| *item).collect();
    by_appeal.sort_by(|a, b| b.base_appeal.total_cmp(&a.base_appeal).then(a.id.cmp(&b.id)));

    world
        .templates
        .iter()
        .filter_map(|template| {
            let design = world.design(template.id)?;
            let mut widget: Vec<Item> = Vec::new();
            for block in &design.widgets {
                let fresh: Vec<Item> = by_appeal
                    .iter()
                    .filter(|item| block.theme == WidgetTheme::Trending || item.brand == q.brand)
                    .filter(|item| !widget.iter().any(|w| w.id == item.id))
                    .take(block.len as usize)
                    .map(|item| (*item).clone())
                    .collect();
                widget.extend(fresh);
            }
            let organic: Vec<Item> = ranked
                .iter()
                .map(|(_, item)| *item)
                .filter(|item| !widget.iter().any(|w| w.id == item.id))
                .cloned()
                .collect();
            fill_template(template, q.brand, &organic, &widget)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub clicks: Vec<bool>,
    /// Purchase amount per slot; zero where nothing was bought.
    pub purchases: Vec<f64>,
    pub non_abandonment: bool,
    pub short_term_revenue: f64,
    pub engagement_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongTermOutcome {
    pub long_term_revenue: f64,
}

/// Examination probability of a slot before the click decision.
pub fn examination_probability(world: &World, position: u32, kind: ContentKind) -> f64 {
    let c = &world.config;
    let base = c.position_bias_decay.powi(position as i32 - 1);
    match kind {
        ContentKind::Organic => base,
        ContentKind::Widget => (base * c.widget_attention_multiplier).min(1.0),
    }
}

/// Cascade-free click model: each slot is examined independently with a
/// position-decayed probability, clicked with probability `appeal`, boosted
/// for brand matches on specific queries, and converted at a rate that
/// grows with the customer's spend propensity.
///
/// Three uniforms are drawn per slot whatever happens, so two layouts shown
/// to the same event share their randomness slot by slot.
pub fn simulate_session<R: Rng + ?Sized>(
    world: &World,
    customer: &Customer,
    query: &QueryGroup,
    layout: &PageLayout,
    rng: &mut R,
) -> SessionOutcome {
    let c = &world.config;
    let purchase_p = (c.purchase_rate * (1.0 + c.propensity_purchase_slope * customer.propensity)).clamp(0.0, 1.0);
    let n = layout.slots.len();
    let mut clicks = Vec::with_capacity(n);
    let mut purchases = Vec::with_capacity(n);
    for slot in &layout.slots {
        let (u_exam, u_click, u_buy): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let boost = if brand_match(&slot.item, layout.query_brand) {
            1.0 + c.brand_click_boost * query.specificity
        } else {
            1.0
        };
        let p_click = (slot.item.base_appeal * boost).min(1.0);
        let clicked = u_exam < examination_probability(world, slot.position, slot.kind) && u_click < p_click;
        clicks.push(clicked);
        purchases.push(if clicked && u_buy < purchase_p { slot.item.price } else { 0.0 });
    }
    let engagement_a = clicks.iter().filter(|&&c| c).count() as f64;
    SessionOutcome {
        non_abandonment: engagement_a > 0.0,
        short_term_revenue: purchases.iter().sum(),
        engagement_a,
        clicks,
        purchases,
    }
}

/// The planted welfare function without its noise term.
pub fn welfare(world: &World, customer: &Customer, query: &QueryGroup, region_bmrs: [f64; 3], session: &SessionOutcome) -> f64 {
    let c = &world.config;
    let zeta = world.zips[customer.zip as usize].zeta;
    let quality: f64 = c.true_region_effects.iter().zip(region_bmrs).map(|(b, x)| b * x).sum();
    let history: f64 = c.history_effects.iter().zip(&customer.history).map(|(g, h)| g * h).sum();
    c.baseline_long_term
        + c.short_term_carry * session.short_term_revenue
        + c.engagement_carry * session.engagement_a
        + quality
        + history
        + c.propensity_carry * customer.propensity
        + query.alpha
        + zeta
}

pub fn realize_long_term<R: Rng + ?Sized>(
    world: &World,
    customer: &Customer,
    query: &QueryGroup,
    layout: &PageLayout,
    session: &SessionOutcome,
    rng: &mut R,
) -> Result<LongTermOutcome> {
    if session.clicks.len() != layout.slots.len() {
        return Err(Error::InvalidInput("session outcome does not belong to this layout".into()));
    }
    let bmrs = BrandMatchPage::from_layout(layout)?.region_bmrs();
    let eps: f64 = rng.sample::<f64, _>(StandardNormal) * world.config.noise_scale;
    let value = welfare(world, customer, query, bmrs, session) + eps;
    Ok(LongTermOutcome { long_term_revenue: value.max(0.0) })
}
