//! Context, customer and content features for the objective models.

use serde::{Deserialize, Serialize};

use crate::domain::{ContentKind, ContextFeatures, Device, PageLayout, PageRegion, TemplateId};
use crate::metrics::brand_match;
use crate::{Error, Result};

pub const CONTENT_SIGNAL_NAMES: [&str; 7] = [
    "brand_organic_top",
    "brand_organic_middle",
    "brand_organic_bottom",
    "brand_widget_top",
    "brand_widget_middle",
    "brand_widget_bottom",
    "widget_brand_alignment",
];

/// Brand-alignment aggregates of one candidate layout, split by content kind.
///
/// The first six entries are each kind's share of its region's pixel area
/// that matches the query brand; organic plus widget share gives the region
/// rate. The last is the matched share of all widget area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContentSignals(pub [f64; 7]);

impl ContentSignals {
    pub fn of(layout: &PageLayout) -> Result<Self> {
        let mut area = [0.0; 3];
        let mut matched = [[0.0; 3]; 2];
        let (mut widget_area, mut widget_matched) = (0.0, 0.0);
        for slot in &layout.slots {
            let r = slot.region()?.index();
            let hit = brand_match(&slot.item, layout.query_brand);
            area[r] += slot.pixel_area;
            let k = match slot.kind {
                ContentKind::Organic => 0,
                ContentKind::Widget => {
                    widget_area += slot.pixel_area;
                    if hit {
                        widget_matched += slot.pixel_area;
                    }
                    1
                }
            };
            if hit {
                matched[k][r] += slot.pixel_area;
            }
        }
        let mut out = [0.0; 7];
        for k in 0..2 {
            for r in 0..3 {
                out[3 * k + r] = if area[r] > 0.0 { matched[k][r] / area[r] } else { 0.0 };
            }
        }
        out[6] = if widget_area > 0.0 { widget_matched / widget_area } else { 0.0 };
        Ok(ContentSignals(out))
    }

    pub fn region_rate(&self, region: PageRegion) -> f64 {
        let r = region.index();
        self.0[r] + self.0[3 + r]
    }
}

/// Feature layout shared by every model in a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub templates: Vec<TemplateId>,
    /// Adds content-aware brand-alignment features on top of context,
    /// customer and template indicators.
    pub content_aware: bool,
}

impl FeatureSpec {
    pub fn names(&self) -> Vec<String> {
        let mut names = vec!["desktop".to_string(), "query_specificity".into(), "membership".into()];
        names.extend(self.templates.iter().map(|t| format!("template_{t}")));
        if self.content_aware {
            names.extend(CONTENT_SIGNAL_NAMES.iter().map(|s| s.to_string()));
            names.extend(PageRegion::ALL.iter().map(|r| format!("specificity_x_brand_{r}")));
        }
        names
    }

    pub fn dim(&self) -> usize {
        3 + self.templates.len() + if self.content_aware { CONTENT_SIGNAL_NAMES.len() + 3 } else { 0 }
    }

    pub fn build(&self, context: &ContextFeatures, template: TemplateId, signals: &ContentSignals) -> Result<Vec<f64>> {
        context.validate()?;
        let slot = self
            .templates
            .iter()
            .position(|&t| t == template)
            .ok_or_else(|| Error::InvalidInput(format!("template {template} is not in the feature schema")))?;
        let mut x = Vec::with_capacity(self.dim());
        x.push(if context.device == Device::Desktop { 1.0 } else { 0.0 });
        x.push(context.query_specificity);
        x.push(if context.membership { 1.0 } else { 0.0 });
        x.extend((0..self.templates.len()).map(|i| if i == slot { 1.0 } else { 0.0 }));
        if self.content_aware {
            x.extend_from_slice(&signals.0);
            x.extend(PageRegion::ALL.iter().map(|&r| context.query_specificity * signals.region_rate(r)));
        }
        Ok(x)
    }

    pub fn build_for_layout(&self, context: &ContextFeatures, layout: &PageLayout) -> Result<Vec<f64>> {
        self.build(context, layout.template_id, &ContentSignals::of(layout)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BrandId, CategoryId, Item, ItemId, Slot};
    use crate::metrics::BrandMatchPage;

    fn layout() -> PageLayout {
        let item = |id, brand| Item::new(ItemId(id), BrandId(brand), 0.5, 5.0).unwrap();
        let slots = (1..=20u32)
            .map(|p| Slot {
                position: p,
                kind: if (5..=8).contains(&p) { ContentKind::Widget } else { ContentKind::Organic },
                item: item(p, if p % 3 == 0 { 1 } else { 2 }),
                pixel_area: if (5..=8).contains(&p) { 1.5 } else { 1.0 },
            })
            .collect();
        PageLayout { template_id: TemplateId(2), query_brand: BrandId(1), slots }
    }

    #[test]
    fn kind_shares_sum_to_region_rates() {
        let l = layout();
        let signals = ContentSignals::of(&l).unwrap();
        let page = BrandMatchPage::from_layout(&l).unwrap();
        for r in PageRegion::ALL {
            assert!((signals.region_rate(r) - page.region_bmr(r)).abs() < 1e-15);
        }
        // widget positions 5..=8 hold one match (position 6).
        assert!((signals.0[6] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn schema_and_vector_agree() {
        let ctx = ContextFeatures {
            device: Device::Desktop,
            query_specificity: 0.5,
            category: CategoryId(0),
            membership: true,
        };
        for content_aware in [false, true] {
            let spec = FeatureSpec { templates: vec![TemplateId(0), TemplateId(2)], content_aware };
            let x = spec.build_for_layout(&ctx, &layout()).unwrap();
            assert_eq!(x.len(), spec.names().len());
            assert_eq!(x.len(), spec.dim());
            assert_eq!(&x[..5], &[1.0, 0.5, 1.0, 0.0, 1.0]);
        }
        let spec = FeatureSpec { templates: vec![TemplateId(0)], content_aware: true };
        assert!(spec.build_for_layout(&ctx, &layout()).is_err());
    }
}
