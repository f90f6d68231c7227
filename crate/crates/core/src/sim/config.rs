use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// What a template's widget block shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidgetTheme {
    /// Most appealing available items of any brand.
    Trending,
    /// Most appealing available items of the query's brand.
    Brand,
}

/// One entry of the template catalog: an organic page with zero or more
/// contiguous widget blocks (1-based `start`), kept in position order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateDesign {
    pub widgets: Vec<WidgetBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidgetBlock {
    pub theme: WidgetTheme,
    pub start: u32,
    pub len: u32,
}

impl WidgetBlock {
    pub fn end(&self) -> u32 {
        self.start + self.len - 1
    }

    pub fn covers(&self, position: u32) -> bool {
        (self.start..self.start + self.len).contains(&position)
    }
}

impl TemplateDesign {
    pub fn organic() -> Self {
        TemplateDesign { widgets: Vec::new() }
    }

    pub fn widget(theme: WidgetTheme, start: u32, len: u32) -> Self {
        TemplateDesign::organic().with(theme, start, len)
    }

    /// Adds another block, keeping blocks sorted by start.
    pub fn with(mut self, theme: WidgetTheme, start: u32, len: u32) -> Self {
        self.widgets.push(WidgetBlock { theme, start, len });
        self.widgets.sort_by_key(|w| w.start);
        self
    }

    pub fn name(&self) -> String {
        if self.widgets.is_empty() {
            return "organic".into();
        }
        self.widgets
            .iter()
            .map(|w| {
                let theme = match w.theme {
                    WidgetTheme::Trending => "trending",
                    WidgetTheme::Brand => "brand",
                };
                format!("{theme}{}@{}", w.len, w.start)
            })
            .collect::<Vec<_>>()
            .join("+")
    }
}

/// Every knob of the synthetic marketplace. The long-term revenue of an
/// event is
///
/// ```text
/// baseline + short_term_carry * rev_S + engagement_carry * A
///   + c_top * bmr_top + c_mid * bmr_mid + c_bot * bmr_bot
///   + history_effects . H + propensity_carry * u + alpha_q + zeta_z + eps
/// ```
///
/// floored at zero, where `u` is the customer's latent spend propensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub n_customers: usize,
    pub n_queries: usize,
    pub n_zips: usize,
    pub n_brands: usize,
    pub n_templates: usize,
    pub n_categories: usize,
    pub items_per_brand: usize,
    /// Item appeal (base click probability) is uniform on this range.
    pub appeal_range: [f64; 2],
    /// Off-brand items in each query's candidate pool.
    pub off_brand_pool: usize,
    pub history_dim: usize,
    pub page_slots: u32,

    pub true_region_effects: [f64; 3],
    pub short_term_carry: f64,
    pub engagement_carry: f64,
    pub baseline_long_term: f64,
    pub propensity_carry: f64,
    pub history_effects: Vec<f64>,
    /// Loadings of the spend propensity on the history vector.
    pub propensity_loadings: Vec<f64>,
    /// Standard deviation of the part of the propensity that history misses.
    pub propensity_noise: f64,
    /// `(sigma_q, sigma_z)`.
    pub fixed_effect_scales: [f64; 2],
    pub noise_scale: f64,

    pub position_bias_decay: f64,
    pub widget_attention_multiplier: f64,
    /// Click probability multiplier for brand matches is `1 + boost * specificity`.
    pub brand_click_boost: f64,
    pub purchase_rate: f64,
    pub propensity_purchase_slope: f64,

    /// Mean organic ranking bonus of the query's brand; varies by query
    /// together with the query fixed effect.
    pub brand_depth: f64,
    pub brand_depth_spread: f64,
    /// Organic brand bonus per unit of the first history coordinate.
    pub personalization: f64,
    pub ranking_noise: f64,
    pub availability: f64,
    /// Change in item availability per unit of the standardized ZIP effect.
    pub availability_zip_slope: f64,
    pub desktop_share: f64,
    pub membership_threshold: f64,

    pub organic_pixel_area: f64,
    pub widget_pixel_area: f64,
    /// The pool uses the first `n_templates` designs.
    pub template_catalog: Vec<TemplateDesign>,

    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        use WidgetTheme::{Brand, Trending};
        WorldConfig {
            n_customers: 5_000,
            n_queries: 300,
            n_zips: 40,
            n_brands: 20,
            n_templates: 6,
            n_categories: 5,
            items_per_brand: 24,
            appeal_range: [0.02, 0.15],
            off_brand_pool: 80,
            history_dim: 3,
            page_slots: 24,

            true_region_effects: [1.0, 0.6, 0.0],
            short_term_carry: 1.5,
            engagement_carry: 0.5,
            baseline_long_term: 20.0,
            propensity_carry: 2.0,
            history_effects: vec![0.5, -0.3, 0.2],
            propensity_loadings: vec![0.8, 0.4, 0.0],
            propensity_noise: 0.2,
            fixed_effect_scales: [2.0, 1.0],
            noise_scale: 0.4,

            position_bias_decay: 0.85,
            widget_attention_multiplier: 1.2,
            brand_click_boost: 1.5,
            purchase_rate: 0.3,
            propensity_purchase_slope: 0.25,

            brand_depth: 0.15,
            brand_depth_spread: 0.1,
            personalization: 0.2,
            ranking_noise: 0.2,
            availability: 0.85,
            availability_zip_slope: 0.05,
            desktop_share: 0.5,
            membership_threshold: 0.5,

            organic_pixel_area: 1.0,
            widget_pixel_area: 1.5,
            template_catalog: vec![
                TemplateDesign::organic(),
                TemplateDesign::widget(Brand, 1, 4).with(Brand, 9, 4),
                TemplateDesign::widget(Brand, 1, 4).with(Brand, 17, 8),
                TemplateDesign::widget(Trending, 1, 4).with(Brand, 9, 4),
                TemplateDesign::widget(Trending, 1, 4).with(Brand, 17, 8),
                TemplateDesign::widget(Trending, 1, 4),
                TemplateDesign::widget(Brand, 9, 4),
                TemplateDesign::widget(Brand, 1, 4),
            ],

            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_customers", self.n_customers),
            ("n_queries", self.n_queries),
            ("n_zips", self.n_zips),
            ("n_brands", self.n_brands),
            ("n_templates", self.n_templates),
            ("n_categories", self.n_categories),
            ("items_per_brand", self.items_per_brand),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Domain(format!("{name} must be at least 1")));
        }
        if self.n_templates > self.template_catalog.len() {
            return Err(Error::Domain(format!(
                "n_templates = {} but the catalog has {} designs",
                self.n_templates,
                self.template_catalog.len()
            )));
        }
        let [lo, hi] = self.appeal_range;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::Domain("appeal_range must satisfy 0 <= lo < hi <= 1".into()));
        }
        if self.page_slots == 0 {
            return Err(Error::Domain("page_slots must be at least 1".into()));
        }
        for design in &self.template_catalog[..self.n_templates] {
            let mut last_end = 0;
            for w in &design.widgets {
                if w.len == 0 || w.start <= last_end || w.end() > self.page_slots {
                    return Err(Error::Domain(format!(
                        "widget blocks of {} overlap or do not fit the page",
                        design.name()
                    )));
                }
                last_end = w.end();
            }
        }
        if self.history_effects.len() != self.history_dim || self.propensity_loadings.len() != self.history_dim {
            return Err(Error::Domain("history_effects and propensity_loadings need history_dim entries".into()));
        }
        let scales = [
            ("sigma_q", self.fixed_effect_scales[0]),
            ("sigma_z", self.fixed_effect_scales[1]),
            ("noise_scale", self.noise_scale),
            ("propensity_noise", self.propensity_noise),
            ("ranking_noise", self.ranking_noise),
            ("brand_depth_spread", self.brand_depth_spread),
            ("brand_click_boost", self.brand_click_boost),
        ];
        if let Some((name, v)) = scales.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain(format!("{name} must be finite and >= 0, got {v}")));
        }
        if !(self.position_bias_decay > 0.0 && self.position_bias_decay < 1.0) {
            return Err(Error::Domain("position_bias_decay must lie in (0,1)".into()));
        }
        if !(self.widget_attention_multiplier.is_finite() && self.widget_attention_multiplier > 0.0) {
            return Err(Error::Domain("widget_attention_multiplier must be > 0".into()));
        }
        for (name, p) in [
            ("purchase_rate", self.purchase_rate),
            ("availability", self.availability),
            ("desktop_share", self.desktop_share),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("{name} must lie in [0,1]")));
            }
        }
        if !(self.organic_pixel_area > 0.0 && self.widget_pixel_area > 0.0) {
            return Err(Error::Domain("pixel areas must be > 0".into()));
        }
        let reals = [
            self.short_term_carry,
            self.engagement_carry,
            self.baseline_long_term,
            self.propensity_carry,
            self.propensity_purchase_slope,
            self.brand_depth,
            self.personalization,
            self.availability_zip_slope,
            self.membership_threshold,
        ];
        if reals
            .iter()
            .chain(&self.true_region_effects)
            .chain(&self.history_effects)
            .chain(&self.propensity_loadings)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Domain("world coefficients must be finite".into()));
        }
        Ok(())
    }
}
