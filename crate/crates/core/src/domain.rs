//! Shared vocabulary: items, slots, page templates, concrete layouts, page
//! regions, horizons and objectives.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(ItemId);
id_type!(BrandId);
id_type!(
    /// Identifies a template within a pool; also the selector's tie-break key.
    TemplateId
);
id_type!(CategoryId);

/// A rankable product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: ItemId,
    pub brand: BrandId,
    /// Latent purchase propensity. Only the simulator reads it.
    pub base_appeal: f64,
    pub price: f64,
}

impl Item {
    pub fn new(id: ItemId, brand: BrandId, base_appeal: f64, price: f64) -> Result<Self> {
        let item = Item {
            id,
            brand,
            base_appeal,
            price,
        };
        item.validate()?;
        Ok(item)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.price.is_finite() && self.price > 0.0) {
            return Err(Error::Domain(format!("item {}: price must be > 0", self.id)));
        }
        if !(0.0..=1.0).contains(&self.base_appeal) {
            return Err(Error::Domain(format!(
                "item {}: base_appeal must lie in [0,1]",
                self.id
            )));
        }
        Ok(())
    }
}

/// Coarse vertical region of a results page.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PageRegion {
    Top,
    Middle,
    Bottom,
}

impl PageRegion {
    pub const ALL: [PageRegion; 3] = [PageRegion::Top, PageRegion::Middle, PageRegion::Bottom];

    /// Last whole-page position that still belongs to the top region.
    pub const TOP_LAST: u32 = 8;
    /// Last whole-page position that still belongs to the middle region.
    pub const MIDDLE_LAST: u32 = 16;

    pub fn index(self) -> usize {
        match self {
            PageRegion::Top => 0,
            PageRegion::Middle => 1,
            PageRegion::Bottom => 2,
        }
    }
}

impl fmt::Display for PageRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PageRegion::Top => "top",
            PageRegion::Middle => "middle",
            PageRegion::Bottom => "bottom",
        })
    }
}

/// Region of a 1-based whole-page position (organic and widget items alike).
pub fn region_of_position(position: u32) -> Result<PageRegion> {
    match position {
        0 => Err(Error::Domain("positions are 1-based".into())),
        1..=PageRegion::TOP_LAST => Ok(PageRegion::Top),
        p if p <= PageRegion::MIDDLE_LAST => Ok(PageRegion::Middle),
        _ => Ok(PageRegion::Bottom),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContentKind {
    Organic,
    Widget,
}

/// One rendered position on a page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub position: u32,
    pub kind: ContentKind,
    pub item: Item,
    /// Rendered area in abstract units.
    pub pixel_area: f64,
}

impl Slot {
    pub fn region(&self) -> Result<PageRegion> {
        region_of_position(self.position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub kind: ContentKind,
    pub pixel_area: f64,
}

/// Which items a template admits into its widget slots. Organic slots take
/// any item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ItemFilter {
    Any,
    /// Widget slots may only hold items of the query's brand.
    QueryBrandOnly,
}

impl ItemFilter {
    pub fn admits(self, kind: ContentKind, item: &Item, query_brand: BrandId) -> bool {
        match (self, kind) {
            (_, ContentKind::Organic) | (ItemFilter::Any, _) => true,
            (ItemFilter::QueryBrandOnly, ContentKind::Widget) => item.brand == query_brand,
        }
    }
}

/// An eligible way to arrange organic results and widgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageTemplate {
    pub id: TemplateId,
    pub name: String,
    pub slot_plan: Vec<SlotSpec>,
    pub item_filter: ItemFilter,
}

impl PageTemplate {
    pub fn validate(&self) -> Result<()> {
        if self.slot_plan.is_empty() {
            return Err(Error::Domain(format!("template {}: empty slot plan", self.id)));
        }
        if let Some(spec) = self
            .slot_plan
            .iter()
            .find(|s| !(s.pixel_area.is_finite() && s.pixel_area > 0.0))
        {
            return Err(Error::Domain(format!(
                "template {}: pixel area {} is not positive",
                self.id, spec.pixel_area
            )));
        }
        Ok(())
    }

    pub fn widget_slots(&self) -> usize {
        self.slot_plan
            .iter()
            .filter(|s| s.kind == ContentKind::Widget)
            .count()
    }
}

/// Checks that template ids are unique within a pool and each template is valid.
pub fn validate_pool(pool: &[PageTemplate]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for template in pool {
        template.validate()?;
        if !seen.insert(template.id) {
            return Err(Error::Domain(format!("duplicate template id {}", template.id)));
        }
    }
    Ok(())
}

/// A concrete results page for one query: the ranker's action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageLayout {
    pub template_id: TemplateId,
    pub query_brand: BrandId,
    pub slots: Vec<Slot>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayoutViolation {
    TemplateMismatch { layout: TemplateId, template: TemplateId },
    SlotCount { expected: usize, got: usize },
    NonContiguous { index: usize, position: u32 },
    KindMismatch { position: u32 },
    AreaMismatch { position: u32 },
    IneligibleItem { position: u32, item: ItemId },
}

impl fmt::Display for LayoutViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayoutViolation::TemplateMismatch { layout, template } => {
                write!(f, "template mismatch: layout {layout} vs template {template}")
            }
            LayoutViolation::SlotCount { expected, got } => {
                write!(f, "slot count: expected {expected}, got {got}")
            }
            LayoutViolation::NonContiguous { index, position } => {
                write!(f, "non-contiguous: slot {index} has position {position}")
            }
            LayoutViolation::KindMismatch { position } => {
                write!(f, "kind mismatch at position {position}")
            }
            LayoutViolation::AreaMismatch { position } => {
                write!(f, "pixel area mismatch at position {position}")
            }
            LayoutViolation::IneligibleItem { position, item } => {
                write!(f, "ineligible item {item} at position {position}")
            }
        }
    }
}

/// Collects every way `layout` fails to conform to `template`.
pub fn validate_layout(
    layout: &PageLayout,
    template: &PageTemplate,
) -> std::result::Result<(), Vec<LayoutViolation>> {
    let mut violations = Vec::new();
    if layout.template_id != template.id {
        violations.push(LayoutViolation::TemplateMismatch {
            layout: layout.template_id,
            template: template.id,
        });
    }
    if layout.slots.len() != template.slot_plan.len() {
        violations.push(LayoutViolation::SlotCount {
            expected: template.slot_plan.len(),
            got: layout.slots.len(),
        });
    }
    for (index, slot) in layout.slots.iter().enumerate() {
        if slot.position as usize != index + 1 {
            violations.push(LayoutViolation::NonContiguous {
                index,
                position: slot.position,
            });
        }
        if let Some(spec) = template.slot_plan.get(index) {
            if spec.kind != slot.kind {
                violations.push(LayoutViolation::KindMismatch {
                    position: slot.position,
                });
            }
            if spec.pixel_area != slot.pixel_area {
                violations.push(LayoutViolation::AreaMismatch {
                    position: slot.position,
                });
            }
        }
        if !template
            .item_filter
            .admits(slot.kind, &slot.item, layout.query_brand)
        {
            violations.push(LayoutViolation::IneligibleItem {
                position: slot.position,
                item: slot.item.id,
            });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Fills `template` with items in order: organic slots draw from `organic`,
/// widget slots from `widget`. Returns `None` if either list runs out.
pub fn fill_template(
    template: &PageTemplate,
    query_brand: BrandId,
    organic: &[Item],
    widget: &[Item],
) -> Option<PageLayout> {
    let mut organic = organic.iter();
    let mut widget = widget.iter();
    let mut slots = Vec::with_capacity(template.slot_plan.len());
    for (i, spec) in template.slot_plan.iter().enumerate() {
        let item = match spec.kind {
            ContentKind::Organic => organic.next()?,
            ContentKind::Widget => widget.next()?,
        };
        slots.push(Slot {
            position: i as u32 + 1,
            kind: spec.kind,
            item: item.clone(),
            pixel_area: spec.pixel_area,
        });
    }
    Some(PageLayout {
        template_id: template.id,
        query_brand,
        slots,
    })
}

/// Short and long outcome horizons, in whole days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HorizonConfig {
    pub delta_short_days: u32,
    pub delta_long_days: u32,
}

impl Default for HorizonConfig {
    fn default() -> Self {
        HorizonConfig {
            delta_short_days: 14,
            delta_long_days: 84,
        }
    }
}

impl HorizonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta_short_days == 0 || self.delta_short_days >= self.delta_long_days {
            return Err(Error::Domain(
                "horizons must satisfy 0 < delta_short < delta_long".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Objective {
    Revenue,
    NonAbandonment,
    Satisfaction,
}

impl Objective {
    pub const ALL: [Objective; 3] = [
        Objective::Revenue,
        Objective::NonAbandonment,
        Objective::Satisfaction,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Revenue => "revenue",
            Objective::NonAbandonment => "non_abandonment",
            Objective::Satisfaction => "satisfaction",
        })
    }
}

/// Realized (or sampled) values of the three ranking objectives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub revenue: f64,
    pub non_abandonment: bool,
    pub satisfaction: f64,
}

impl ObjectiveVector {
    pub fn validate(&self) -> Result<()> {
        if !(self.revenue.is_finite() && self.revenue >= 0.0) {
            return Err(Error::Domain("revenue must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.satisfaction) {
            return Err(Error::Domain("satisfaction must lie in [0,1]".into()));
        }
        Ok(())
    }

    pub fn get(&self, objective: Objective) -> f64 {
        match objective {
            Objective::Revenue => self.revenue,
            Objective::NonAbandonment => f64::from(u8::from(self.non_abandonment)),
            Objective::Satisfaction => self.satisfaction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Device {
    Mobile,
    Desktop,
}

/// Context and customer features of one search request. Content features
/// are derived per candidate layout by [`crate::ranker::features`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextFeatures {
    pub device: Device,
    pub query_specificity: f64,
    pub category: CategoryId,
    pub membership: bool,
}

impl ContextFeatures {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.query_specificity) {
            return Err(Error::Domain("query_specificity must lie in [0,1]".into()));
        }
        Ok(())
    }
}
