//! Pixel- and region-weighted whole-page brand match rate.
//!
//! Each item counts toward the brand match rate of its page region in
//! proportion to its rendered area; region rates are then combined with a
//! weight vector that sums to one. An empty region contributes a rate of 0.

use serde::{Deserialize, Serialize};

use crate::domain::{region_of_position, BrandId, Item, PageLayout, PageRegion};
use crate::{Error, Result};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionWeights {
    pub top: f64,
    pub middle: f64,
    pub bottom: f64,
}

impl RegionWeights {
    /// Weights proportional to click-through rate by page position.
    pub const CTR: RegionWeights = RegionWeights {
        top: 0.60,
        middle: 0.25,
        bottom: 0.15,
    };

    /// Weights from normalized downstream-value effects in a production setting.
    pub const DOWNSTREAM_PUBLISHED: RegionWeights = RegionWeights {
        top: 0.63,
        middle: 0.37,
        bottom: 0.0,
    };

    pub fn new(top: f64, middle: f64, bottom: f64) -> Result<Self> {
        let weights = RegionWeights { top, middle, bottom };
        weights.validate()?;
        Ok(weights)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = self.as_array();
        if parts.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Domain(format!(
                "region weights must be finite and non-negative, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::Domain(format!("region weights sum to {sum}, not 1")));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.top, self.middle, self.bottom]
    }

    pub fn get(&self, region: PageRegion) -> f64 {
        self.as_array()[region.index()]
    }
}

pub fn brand_match(item: &Item, query_brand: BrandId) -> bool {
    item.brand == query_brand
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrandMatchSlot {
    pub region: PageRegion,
    pub pixel_area: f64,
    pub matched: bool,
}

/// The brand-match view of a page: where each slot sits, how large it is and
/// whether it matches the query brand.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BrandMatchPage {
    pub slots: Vec<BrandMatchSlot>,
}

impl BrandMatchPage {
    pub fn from_layout(layout: &PageLayout) -> Result<Self> {
        let slots = layout
            .slots
            .iter()
            .map(|slot| {
                if !(slot.pixel_area.is_finite() && slot.pixel_area > 0.0) {
                    return Err(Error::Domain(format!(
                        "slot at position {} has non-positive area",
                        slot.position
                    )));
                }
                Ok(BrandMatchSlot {
                    region: region_of_position(slot.position)?,
                    pixel_area: slot.pixel_area,
                    matched: brand_match(&slot.item, layout.query_brand),
                })
            })
            .collect::<Result<_>>()?;
        Ok(BrandMatchPage { slots })
    }

    /// Area-weighted match rate of one region, 0 when the region is empty.
    pub fn region_bmr(&self, region: PageRegion) -> f64 {
        let (matched, total) = self
            .slots
            .iter()
            .filter(|s| s.region == region)
            .fold((0.0, 0.0), |(m, t), s| {
                (m + if s.matched { s.pixel_area } else { 0.0 }, t + s.pixel_area)
            });
        if total > 0.0 {
            matched / total
        } else {
            0.0
        }
    }

    pub fn region_bmrs(&self) -> [f64; 3] {
        PageRegion::ALL.map(|r| self.region_bmr(r))
    }

    pub fn pr_wp_bmr(&self, weights: &RegionWeights) -> Result<f64> {
        weights.validate()?;
        let rates = self.region_bmrs();
        let value = weights.top * rates[0] + weights.middle * rates[1] + weights.bottom * rates[2];
        Ok(value.clamp(0.0, 1.0))
    }
}

/// Whole-page brand match rate of `layout` under `weights`.
pub fn pr_wp_bmr(layout: &PageLayout, weights: &RegionWeights) -> Result<f64> {
    BrandMatchPage::from_layout(layout)?.pr_wp_bmr(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ItemId;
    use proptest::prelude::*;

    fn slot(region: PageRegion, pixel_area: f64, matched: bool) -> BrandMatchSlot {
        BrandMatchSlot { region, pixel_area, matched }
    }

    fn region_only(region: PageRegion, n: usize) -> BrandMatchPage {
        let mut slots: Vec<_> = PageRegion::ALL
            .iter()
            .flat_map(|&r| (0..n).map(move |_| slot(r, 1.0, false)))
            .collect();
        for s in slots.iter_mut().filter(|s| s.region == region) {
            s.matched = true;
        }
        BrandMatchPage { slots }
    }

    #[test]
    fn brand_match_is_id_equality() {
        let item = Item::new(ItemId(1), BrandId(4), 0.3, 2.0).unwrap();
        assert!(brand_match(&item, BrandId(4)));
        assert!(!brand_match(&item, BrandId(5)));
        assert_eq!(brand_match(&item, BrandId(4)), brand_match(&item, BrandId(4)));
    }

    #[test]
    fn region_rate_cases() {
        let full = BrandMatchPage {
            slots: vec![slot(PageRegion::Top, 2.0, true), slot(PageRegion::Top, 1.0, true)],
        };
        assert_eq!(full.region_bmr(PageRegion::Top), 1.0);
        assert_eq!(full.region_bmr(PageRegion::Bottom), 0.0);
        let mixed = BrandMatchPage {
            slots: vec![slot(PageRegion::Middle, 300.0, true), slot(PageRegion::Middle, 100.0, false)],
        };
        assert_eq!(mixed.region_bmr(PageRegion::Middle), 0.75);
    }

    #[test]
    fn published_weight_cases() {
        let all = BrandMatchPage {
            slots: PageRegion::ALL.iter().map(|&r| slot(r, 1.0, true)).collect(),
        };
        for w in [RegionWeights::CTR, RegionWeights::DOWNSTREAM_PUBLISHED] {
            assert!((all.pr_wp_bmr(&w).unwrap() - 1.0).abs() < 1e-15);
        }
        let top = region_only(PageRegion::Top, 8);
        assert_eq!(top.pr_wp_bmr(&RegionWeights::CTR).unwrap(), 0.60);
        let bottom = region_only(PageRegion::Bottom, 8);
        assert_eq!(bottom.pr_wp_bmr(&RegionWeights::DOWNSTREAM_PUBLISHED).unwrap(), 0.0);
    }

    #[test]
    fn invalid_weights_rejected() {
        assert!(RegionWeights::new(0.5, 0.5, 0.5).is_err());
        assert!(RegionWeights::new(1.2, -0.2, 0.0).is_err());
        let bad = RegionWeights { top: 0.9, middle: 0.0, bottom: 0.0 };
        assert!(region_only(PageRegion::Top, 1).pr_wp_bmr(&bad).is_err());
    }

    fn arb_page() -> impl Strategy<Value = BrandMatchPage> {
        prop::collection::vec((0usize..3, 0.01f64..100.0, any::<bool>()), 0..40).prop_map(|v| {
            BrandMatchPage {
                slots: v
                    .into_iter()
                    .map(|(r, a, m)| slot(PageRegion::ALL[r], a, m))
                    .collect(),
            }
        })
    }

    fn arb_weights() -> impl Strategy<Value = RegionWeights> {
        (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0)
            .prop_filter("non-zero", |(a, b, c)| a + b + c > 1e-6)
            .prop_map(|(a, b, c)| {
                let s = a + b + c;
                let (top, middle) = (a / s, b / s);
                RegionWeights { top, middle, bottom: (1.0 - top - middle).max(0.0) }
            })
    }

    proptest! {
        #[test]
        fn bounded(page in arb_page(), w in arb_weights()) {
            let v = page.pr_wp_bmr(&w).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn monotone_in_matches(page in arb_page(), w in arb_weights(), idx in any::<prop::sample::Index>()) {
            prop_assume!(!page.slots.is_empty());
            let i = idx.index(page.slots.len());
            let mut flipped = page.clone();
            flipped.slots[i].matched = true;
            prop_assert!(flipped.pr_wp_bmr(&w).unwrap() >= page.pr_wp_bmr(&w).unwrap() - 1e-15);
        }

        #[test]
        fn region_area_scale_invariant(page in arb_page(), w in arb_weights(), r in 0usize..3, c in 0.01f64..100.0) {
            let mut scaled = page.clone();
            for s in scaled.slots.iter_mut().filter(|s| s.region == PageRegion::ALL[r]) {
                s.pixel_area *= c;
            }
            prop_assert!((scaled.pr_wp_bmr(&w).unwrap() - page.pr_wp_bmr(&w).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn top_only_weights_give_top_rate(page in arb_page()) {
            let w = RegionWeights::new(1.0, 0.0, 0.0).unwrap();
            prop_assert_eq!(page.pr_wp_bmr(&w).unwrap(), page.region_bmr(PageRegion::Top));
        }
    }
}
