//! 2.5D semantic layouts: per-object captions, normalized boxes and depth
//! ranks, plus background/base captions; layout validation and rasterization
//! of placed object masks down to latent resolution.

mod dsl;
mod planner;

pub use dsl::{
    format_ast, format_entity, parse_prompt_dsl, EntityTerm, GrammarError, Noun, Relation,
    RelationTerm, SceneAst,
};
pub use planner::{plan_rule, PlanError};

use crate::util::Mask;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Side length of one latent patch in pixels (space-to-depth factor).
pub const LATENT_PATCH: usize = 2;

/// Minimum box side, in latent patches, below which planning fails.
pub const MIN_BOX_PATCHES: usize = 4;

/// Axis-aligned rectangle in normalized [0, 1] canvas coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: f32,
    pub y0: f32,
    pub x1: f32,
    pub y1: f32,
}

impl BoundingBox {
    pub fn new(x0: f32, y0: f32, x1: f32, y1: f32) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f32 {
        self.y1 - self.y0
    }

    pub fn center(&self) -> (f32, f32) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    pub fn area(&self) -> f32 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn intersection(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox::new(
            self.x0.max(other.x0),
            self.y0.max(other.y0),
            self.x1.min(other.x1),
            self.y1.min(other.y1),
        )
    }

    /// Clamps all coordinates into the unit square. Returns true if anything changed.
    pub fn clamp_unit(&mut self) -> bool {
        let before = *self;
        self.x0 = self.x0.clamp(0.0, 1.0);
        self.y0 = self.y0.clamp(0.0, 1.0);
        self.x1 = self.x1.clamp(0.0, 1.0);
        self.y1 = self.y1.clamp(0.0, 1.0);
        *self != before
    }

    /// Pixel rectangle (x0, y0, x1, y1), end-exclusive, on a square canvas.
    pub fn to_pixels(&self, canvas_size: usize) -> (usize, usize, usize, usize) {
        let n = canvas_size as f32;
        let px0 = (self.x0 * n).round() as usize;
        let py0 = (self.y0 * n).round() as usize;
        let px1 = ((self.x1 * n).round() as usize).min(canvas_size);
        let py1 = ((self.y1 * n).round() as usize).min(canvas_size);
        (px0, py0, px1.max(px0), py1.max(py0))
    }
}

/// One planned object: caption, box, and depth rank (1 = closest to camera).
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub id: usize,
    pub caption: String,
    pub bbox: BoundingBox,
    pub depth: u32,
}

/// The full 2.5D scene plan.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticLayout {
    pub objects: Vec<ObjectSpec>,
    pub background_caption: String,
    pub base_caption: String,
    pub canvas_size: usize,
}

#[derive(Serialize, Deserialize)]
struct ObjectDoc {
    caption: String,
    #[serde(rename = "box")]
    bbox: [f32; 4],
    depth: u32,
}

#[derive(Serialize, Deserialize)]
struct LayoutDoc {
    objects: Vec<ObjectDoc>,
    background: String,
    base: String,
    canvas: usize,
}

#[derive(Debug, Error)]
pub enum LayoutIoError {
    #[error("layout document malformed: {0}")]
    Malformed(#[from] serde_json::Error),
}

impl SemanticLayout {
    /// Serializes to the planner wire schema:
    /// `{objects: [{caption, box: [x0,y0,x1,y1], depth}], background, base, canvas}`.
    pub fn to_json(&self) -> String {
        let doc = LayoutDoc {
            objects: self
                .objects
                .iter()
                .map(|o| ObjectDoc {
                    caption: o.caption.clone(),
                    bbox: [o.bbox.x0, o.bbox.y0, o.bbox.x1, o.bbox.y1],
                    depth: o.depth,
                })
                .collect(),
            background: self.background_caption.clone(),
            base: self.base_caption.clone(),
            canvas: self.canvas_size,
        };
        serde_json::to_string_pretty(&doc).expect("layout serializes")
    }

    /// Parses the planner wire schema. Object ids are assigned 1..K in order.
    pub fn from_json(text: &str) -> Result<Self, LayoutIoError> {
        let doc: LayoutDoc = serde_json::from_str(text)?;
        Ok(Self {
            objects: doc
                .objects
                .into_iter()
                .enumerate()
                .map(|(i, o)| ObjectSpec {
                    id: i + 1,
                    caption: o.caption,
                    bbox: BoundingBox::new(o.bbox[0], o.bbox[1], o.bbox[2], o.bbox[3]),
                    depth: o.depth,
                })
                .collect(),
            background_caption: doc.background,
            base_caption: doc.base,
            canvas_size: doc.canvas,
        })
    }
}

/// One failed layout rule; `field` names what is wrong and `rule` how.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn violation(field: impl Into<String>, rule: impl Into<String>) -> Violation {
    Violation { field: field.into(), rule: rule.into() }
}

/// Checks every layout invariant. Returns an empty list iff the layout is
/// well formed; never panics or errors on bad input.
pub fn validate_layout(layout: &SemanticLayout) -> Vec<Violation> {
    let mut v = Vec::new();
    if layout.objects.is_empty() {
        v.push(violation("objects", "K >= 1"));
    }
    if layout.canvas_size == 0 || layout.canvas_size % LATENT_PATCH != 0 {
        v.push(violation(
            "canvas_size",
            format!("must be a positive multiple of {LATENT_PATCH}"),
        ));
    }
    if layout.base_caption.trim().is_empty() {
        v.push(violation("base_caption", "must be non-empty"));
    }
    let mut seen_ids = std::collections::HashSet::new();
    for obj in &layout.objects {
        let tag = format!("objects[{}]", obj.id);
        let b = obj.bbox;
        if !(0.0..=1.0).contains(&b.x0) || !(0.0..=1.0).contains(&b.x1) || b.x0 >= b.x1 {
            v.push(violation(format!("{tag}.box"), "0 <= x0 < x1 <= 1"));
        }
        if !(0.0..=1.0).contains(&b.y0) || !(0.0..=1.0).contains(&b.y1) || b.y0 >= b.y1 {
            v.push(violation(format!("{tag}.box"), "0 <= y0 < y1 <= 1"));
        }
        if obj.depth < 1 {
            v.push(violation(format!("{tag}.depth"), "depth >= 1"));
        }
        if !seen_ids.insert(obj.id) {
            v.push(violation(format!("{tag}.id"), "ids unique within layout"));
        }
    }
    v
}

/// Disjoint object/background masks at a single resolution.
///
/// `object_masks[i]` is the region owned by layout object `i` after depth
/// resolution; the union of all object masks equals `union_mask` and the
/// background is its exact complement.
#[derive(Debug, Clone)]
pub struct RegionMasks {
    pub object_masks: Vec<Mask>,
    pub background_mask: Mask,
    pub union_mask: Mask,
}

impl RegionMasks {
    pub fn resolution(&self) -> usize {
        self.union_mask.dim().0
    }

    /// Indices (0-based) of objects whose mask is empty at this resolution.
    pub fn empty_objects(&self) -> Vec<usize> {
        self.object_masks
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.iter().any(|&b| b))
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("mask shape {got:?} does not match canvas {canvas}")]
    Shape { got: (usize, usize), canvas: usize },
    #[error("resolution {resolution} does not divide canvas {canvas}")]
    Resolution { resolution: usize, canvas: usize },
    #[error("expected {expected} placed masks, got {got}")]
    Count { expected: usize, got: usize },
}

/// Downsamples placed pixel masks to `resolution` and resolves overlaps.
///
/// A target cell belongs to an object iff at least half of its covered pixels
/// are set; cells claimed by several objects go to the smallest depth, ties to
/// the lower id. Background is the complement of the union. Empty object
/// regions are permitted (the sampler skips them).
pub fn rasterize_masks(
    layout: &SemanticLayout,
    placed_object_masks: &[Mask],
    resolution: usize,
) -> Result<RegionMasks, MaskError> {
    let canvas = layout.canvas_size;
    if placed_object_masks.len() != layout.objects.len() {
        return Err(MaskError::Count { expected: layout.objects.len(), got: placed_object_masks.len() });
    }
    if resolution == 0 || canvas % resolution != 0 {
        return Err(MaskError::Resolution { resolution, canvas });
    }
    for m in placed_object_masks {
        if m.dim() != (canvas, canvas) {
            return Err(MaskError::Shape { got: m.dim(), canvas });
        }
    }
    let factor = canvas / resolution;
    let half = (factor * factor).div_ceil(2);

    // owner[cell] = index of owning object, resolved by (depth, id).
    let mut owner: Array2<Option<usize>> = Array2::from_elem((resolution, resolution), None);
    for (i, mask) in placed_object_masks.iter().enumerate() {
        for cy in 0..resolution {
            for cx in 0..resolution {
                let mut count = 0;
                for py in cy * factor..(cy + 1) * factor {
                    for px in cx * factor..(cx + 1) * factor {
                        if mask[[py, px]] {
                            count += 1;
                        }
                    }
                }
                if count >= half {
                    let claim = (layout.objects[i].depth, layout.objects[i].id);
                    let take = match owner[[cy, cx]] {
                        None => true,
                        Some(j) => claim < (layout.objects[j].depth, layout.objects[j].id),
                    };
                    if take {
                        owner[[cy, cx]] = Some(i);
                    }
                }
            }
        }
    }

    let object_masks: Vec<Mask> = (0..layout.objects.len())
        .map(|i| Array2::from_shape_fn((resolution, resolution), |p| owner[p] == Some(i)))
        .collect();
    let union_mask = Array2::from_shape_fn((resolution, resolution), |p| owner[p].is_some());
    let background_mask = union_mask.mapv(|b| !b);
    Ok(RegionMasks { object_masks, background_mask, union_mask })
}
