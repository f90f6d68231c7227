use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::{TemplateDesign, WidgetTheme, WorldConfig};
use crate::domain::{BrandId, CategoryId, ContentKind, Item, ItemFilter, ItemId, PageTemplate, SlotSpec, TemplateId};
use crate::rng::{stream, Purpose};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub id: u32,
    pub history: Vec<f64>,
    /// Latent spend propensity; partly explained by `history`.
    pub propensity: f64,
    pub zip: u32,
    pub membership: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryGroup {
    pub id: u32,
    pub brand: BrandId,
    pub category: CategoryId,
    pub specificity: f64,
    /// Query fixed effect on long-term revenue.
    pub alpha: f64,
    /// Organic ranking bonus of brand items for this query. Moves with `alpha`.
    pub brand_depth: f64,
    /// Catalog indices of the items this query can surface.
    pub pool: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zip {
    pub id: u32,
    /// ZIP fixed effect on long-term revenue.
    pub zeta: f64,
    /// Per-session probability that an item is in stock. Moves with `zeta`.
    pub availability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub config: WorldConfig,
    pub catalog: Vec<Item>,
    pub customers: Vec<Customer>,
    pub queries: Vec<QueryGroup>,
    pub zips: Vec<Zip>,
    pub templates: Vec<PageTemplate>,
}

impl World {
    pub fn design(&self, template: TemplateId) -> Option<&TemplateDesign> {
        self.config.template_catalog[..self.config.n_templates].get(template.0 as usize)
    }

    pub fn brand_items(&self, brand: BrandId) -> std::ops::Range<usize> {
        let per = self.config.items_per_brand;
        brand.0 as usize * per..(brand.0 as usize + 1) * per
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn template_of(config: &WorldConfig, id: usize, design: &TemplateDesign) -> PageTemplate {
    let slot_plan = (1..=config.page_slots)
        .map(|p| {
            if design.widgets.iter().any(|w| w.covers(p)) {
                SlotSpec { kind: ContentKind::Widget, pixel_area: config.widget_pixel_area }
            } else {
                SlotSpec { kind: ContentKind::Organic, pixel_area: config.organic_pixel_area }
            }
        })
        .collect();
    let brand_only = !design.widgets.is_empty() && design.widgets.iter().all(|w| w.theme == WidgetTheme::Brand);
    let item_filter = if brand_only { ItemFilter::QueryBrandOnly } else { ItemFilter::Any };
    PageTemplate {
        id: TemplateId(id as u32),
        name: design.name(),
        slot_plan,
        item_filter,
    }
}

/// Builds the population for `config`. Deterministic in `config.seed`.
pub fn generate_world(config: &WorldConfig) -> Result<World> {
    config.validate()?;
    let c = config;

    let mut rng = stream(c.seed, Purpose::World, 0);
    let price = LogNormal::new(20f64.ln(), 0.4).expect("valid lognormal");
    let mut catalog = Vec::with_capacity(c.n_brands * c.items_per_brand);
    for b in 0..c.n_brands {
        for _ in 0..c.items_per_brand {
            let id = ItemId(catalog.len() as u32);
            let appeal = rng.random_range(c.appeal_range[0]..c.appeal_range[1]);
            catalog.push(Item::new(id, BrandId(b as u32), appeal, price.sample(&mut rng))?);
        }
    }

    let mut rng = stream(c.seed, Purpose::World, 1);
    let (sigma_q, sigma_z) = (c.fixed_effect_scales[0], c.fixed_effect_scales[1]);
    let queries = (0..c.n_queries)
        .map(|q| {
            let brand = BrandId(rng.random_range(0..c.n_brands as u32));
            let a = normal(&mut rng);
            let depth = c.brand_depth + c.brand_depth_spread * (0.7 * a + 0.3 * normal(&mut rng));
            let own: Vec<usize> = (brand.0 as usize * c.items_per_brand..(brand.0 as usize + 1) * c.items_per_brand).collect();
            let others = catalog.len() - own.len();
            let extra = sample_indices(&mut rng, others, c.off_brand_pool.min(others))
                .into_iter()
                .map(|i| if i >= own[0] { i + own.len() } else { i });
            let mut pool: Vec<usize> = own.iter().copied().chain(extra).collect();
            pool.sort_unstable();
            QueryGroup {
                id: q as u32,
                brand,
                category: CategoryId(brand.0 % c.n_categories as u32),
                specificity: rng.random_range(0.0..1.0),
                alpha: sigma_q * a,
                brand_depth: depth,
                pool,
            }
        })
        .collect();

    let mut rng = stream(c.seed, Purpose::World, 2);
    let zips = (0..c.n_zips)
        .map(|z| {
            let b = normal(&mut rng);
            Zip {
                id: z as u32,
                zeta: sigma_z * b,
                availability: (c.availability + c.availability_zip_slope * b).clamp(0.05, 1.0),
            }
        })
        .collect();

    let mut rng = stream(c.seed, Purpose::World, 3);
    let customers = (0..c.n_customers)
        .map(|i| {
            let history: Vec<f64> = (0..c.history_dim).map(|_| normal(&mut rng)).collect();
            let explained: f64 = history.iter().zip(&c.propensity_loadings).map(|(h, l)| h * l).sum();
            let propensity = explained + c.propensity_noise * normal(&mut rng);
            let membership = history.get(c.history_dim.saturating_sub(1)).is_some_and(|&h| h > c.membership_threshold);
            Customer {
                id: i as u32,
                history,
                propensity,
                zip: rng.random_range(0..c.n_zips as u32),
                membership,
            }
        })
        .collect();

    let templates = c.template_catalog[..c.n_templates]
        .iter()
        .enumerate()
        .map(|(i, d)| template_of(c, i, d))
        .collect();

    Ok(World {
        config: c.clone(),
        catalog,
        customers,
        queries,
        zips,
        templates,
    })
}
