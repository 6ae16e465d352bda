//! Deterministic rule planner: SceneAst -> SemanticLayout.
//!
//! Placement works in two stages. First every entity group is assigned a
//! rectangular region of the unit square from the relation structure:
//! left/right relations split the x axis into ranked columns, above/below and
//! on-top split the y axis into ranked rows, and occlusion relations keep both
//! entities in one shared region. Second, each group's replicas are laid out
//! on a grid inside its region. Occlusion pairs get overlapping boxes and a
//! depth order; everything else stays at depth 1 unless an occlusion chain
//! pushes it back.

use super::dsl::{format_ast, format_entity, Relation, SceneAst};
use super::{BoundingBox, ObjectSpec, SemanticLayout, LATENT_PATCH, MIN_BOX_PATCHES};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(
        "cannot place {count} replicas of entity {entity} without boxes \
         degenerating below {min_side} of the canvas"
    )]
    Capacity { entity: usize, count: u32, min_side: f32 },
}

#[derive(Clone, Copy)]
struct Region {
    x0: f32,
    y0: f32,
    x1: f32,
    y1: f32,
}

impl Region {
    fn width(&self) -> f32 {
        self.x1 - self.x0
    }
    fn height(&self) -> f32 {
        self.y1 - self.y0
    }
}

/// Plans boxes, depths and captions for a parsed prompt. Pure: identical
/// inputs produce bit-identical layouts.
pub fn plan_rule(ast: &SceneAst, canvas_size: usize) -> Result<SemanticLayout, PlanError> {
    let n = ast.entities.len();
    let min_side = (MIN_BOX_PATCHES * LATENT_PATCH) as f32 / canvas_size as f32;

    // Axis ranks from the order relations.
    let x_rank = axis_ranks(ast, |r| match r {
        Relation::LeftOf => Some(true),
        Relation::RightOf => Some(false),
        _ => None,
    });
    let y_rank = axis_ranks(ast, |r| match r {
        Relation::Above | Relation::OnTopOf => Some(true),
        Relation::Below => Some(false),
        _ => None,
    });

    let cols = x_rank.iter().max().map_or(1, |m| m + 1);
    let rows = y_rank.iter().max().map_or(1, |m| m + 1);

    // Region per entity from its (column, row) cell. Entities sharing a cell
    // without an occlusion relation get the cell sub-partitioned; occlusion
    // pairs intentionally share.
    let mut regions: Vec<Region> = (0..n)
        .map(|i| Region {
            x0: x_rank[i] as f32 / cols as f32,
            x1: (x_rank[i] + 1) as f32 / cols as f32,
            y0: y_rank[i] as f32 / rows as f32,
            y1: (y_rank[i] + 1) as f32 / rows as f32,
        })
        .collect();
    split_shared_cells(ast, &x_rank, &y_rank, &mut regions);

    let depths = occlusion_depths(ast);

    let mut objects = Vec::new();
    for (i, entity) in ast.entities.iter().enumerate() {
        let region = regions[i];
        let caption = singular_caption(entity);
        let occlusion_role = occlusion_offset(ast, i);
        let boxes = if let Some(offset) = occlusion_role {
            if entity.count != 1 {
                // Occlusion phrasing with counts collapses to one replica per
                // side; the grammar allows it but the geometry does not.
                return Err(PlanError::Capacity { entity: i, count: entity.count, min_side });
            }
            vec![occluded_box(region, offset)]
        } else {
            grid_boxes(region, entity.count as usize)
        };
        for b in &boxes {
            if b.width() < min_side - 1e-6 || b.height() < min_side - 1e-6 {
                return Err(PlanError::Capacity { entity: i, count: entity.count, min_side });
            }
        }
        for b in boxes {
            objects.push(ObjectSpec {
                id: objects.len() + 1,
                caption: caption.clone(),
                bbox: b,
                depth: depths[i],
            });
        }
    }

    // "on top of" pairs get snapped so the upper box rests on the lower one.
    snap_on_top(ast, &mut objects);

    Ok(SemanticLayout {
        objects,
        background_caption: "a plain gray background".to_string(),
        base_caption: format_ast(&SceneAst {
            entities: ast.entities.clone(),
            relations: ast.relations.clone(),
            background_suffix: false,
        }),
        canvas_size,
    })
}

/// Longest-path layering along one axis. `forward(rel)` says whether the
/// subject comes before the object on that axis (Some(true)), after it
/// (Some(false)), or is unconstrained (None).
fn axis_ranks(ast: &SceneAst, forward: impl Fn(Relation) -> Option<bool>) -> Vec<usize> {
    let n = ast.entities.len();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for rel in &ast.relations {
        match forward(rel.relation) {
            Some(true) => edges.push((rel.subject, rel.object)),
            Some(false) => edges.push((rel.object, rel.subject)),
            None => {}
        }
    }
    let mut rank = vec![0usize; n];
    // Bellman-Ford style relaxation; prompts are tiny so O(n*e) is fine.
    for _ in 0..n {
        let mut changed = false;
        for &(a, b) in &edges {
            if rank[b] < rank[a] + 1 {
                rank[b] = rank[a] + 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    rank
}

/// Entities in the same (col, row) cell with no occlusion tie get the cell
/// split into vertical strips, in entity order.
fn split_shared_cells(ast: &SceneAst, x_rank: &[usize], y_rank: &[usize], regions: &mut [Region]) {
    let n = regions.len();
    let mut occluded_with: Vec<Vec<usize>> = vec![Vec::new(); n];
    for rel in &ast.relations {
        if rel.relation.is_occlusion() {
            occluded_with[rel.subject].push(rel.object);
            occluded_with[rel.object].push(rel.subject);
        }
    }
    let mut groups: std::collections::BTreeMap<(usize, usize), Vec<usize>> = Default::default();
    for i in 0..n {
        groups.entry((x_rank[i], y_rank[i])).or_default().push(i);
    }
    for members in groups.values() {
        if members.len() < 2 {
            continue;
        }
        // Members that are all mutually occlusion-linked share the region.
        let all_linked = members
            .iter()
            .all(|&i| members.iter().all(|&j| i == j || occluded_with[i].contains(&j)));
        if all_linked {
            continue;
        }
        let base = regions[members[0]];
        let strip = base.width() / members.len() as f32;
        for (k, &i) in members.iter().enumerate() {
            regions[i] = Region {
                x0: base.x0 + strip * k as f32,
                x1: base.x0 + strip * (k + 1) as f32,
                y0: base.y0,
                y1: base.y1,
            };
        }
    }
}

/// Depth rank per entity: 1 + longest chain of entities strictly in front.
fn occlusion_depths(ast: &SceneAst) -> Vec<u32> {
    let n = ast.entities.len();
    // front -> back edges
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for rel in &ast.relations {
        match rel.relation {
            Relation::InFrontOf => edges.push((rel.subject, rel.object)),
            Relation::Behind | Relation::HiddenBehind => edges.push((rel.object, rel.subject)),
            _ => {}
        }
    }
    let mut depth = vec![1u32; n];
    for _ in 0..n {
        let mut changed = false;
        for &(front, back) in &edges {
            if depth[back] < depth[front] + 1 {
                depth[back] = depth[front] + 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    depth
}

/// For an entity in an occlusion pair, the (dx, dy) direction the BACK entity
/// is shifted relative to the shared region center. Returns None when the
/// entity participates in no occlusion relation.
fn occlusion_offset(ast: &SceneAst, entity: usize) -> Option<(f32, f32)> {
    for rel in &ast.relations {
        if !rel.relation.is_occlusion() {
            continue;
        }
        let (front, back) = match rel.relation {
            Relation::InFrontOf => (rel.subject, rel.object),
            Relation::Behind | Relation::HiddenBehind => (rel.object, rel.subject),
            _ => unreachable!(),
        };
        // A hidden object's box is mostly covered by the front box; a merely
        // behind object peeks out further.
        let shift = if rel.relation == Relation::HiddenBehind { 0.15 } else { 0.45 };
        if entity == front {
            return Some((0.0, 0.0));
        }
        if entity == back {
            return Some((-shift, -shift));
        }
    }
    None
}

fn occluded_box(region: Region, offset: (f32, f32)) -> BoundingBox {
    let side = (0.55 * region.width().min(region.height())).min(0.5);
    let cx = (region.x0 + region.x1) / 2.0 + offset.0 * side;
    let cy = (region.y0 + region.y1) / 2.0 + offset.1 * side;
    BoundingBox::new(
        (cx - side / 2.0).max(0.0),
        (cy - side / 2.0).max(0.0),
        (cx + side / 2.0).min(1.0),
        (cy + side / 2.0).min(1.0),
    )
}

/// Equal square boxes on the grid (rows x cols) that maximizes cell size;
/// row-major fill, uniform margins inside each cell.
fn grid_boxes(region: Region, count: usize) -> Vec<BoundingBox> {
    assert!(count >= 1);
    let mut best: Option<(f32, usize, usize)> = None;
    for cols in 1..=count {
        let rows = count.div_ceil(cols);
        let cell = (region.width() / cols as f32).min(region.height() / rows as f32);
        if best.map_or(true, |(s, _, _)| cell > s) {
            best = Some((cell, rows, cols));
        }
    }
    let (_, rows, cols) = best.unwrap();
    let cell_w = region.width() / cols as f32;
    let cell_h = region.height() / rows as f32;
    let side = (0.9 * cell_w.min(cell_h)).min(0.5);

    let mut boxes = Vec::with_capacity(count);
    for k in 0..count {
        let row = k / cols;
        let col = k % cols;
        let cx = region.x0 + cell_w * (col as f32 + 0.5);
        let cy = region.y0 + cell_h * (row as f32 + 0.5);
        boxes.push(BoundingBox::new(
            cx - side / 2.0,
            cy - side / 2.0,
            cx + side / 2.0,
            cy + side / 2.0,
        ));
    }
    boxes
}

fn snap_on_top(ast: &SceneAst, objects: &mut [ObjectSpec]) {
    // Only handles the count-1 case on both sides, which is what the grammar
    // produces for stacking prompts.
    let mut object_start = vec![0usize; ast.entities.len()];
    let mut acc = 0;
    for (i, e) in ast.entities.iter().enumerate() {
        object_start[i] = acc;
        acc += e.count as usize;
    }
    for rel in &ast.relations {
        if rel.relation != Relation::OnTopOf {
            continue;
        }
        if ast.entities[rel.subject].count != 1 || ast.entities[rel.object].count != 1 {
            continue;
        }
        let (si, oi) = (object_start[rel.subject], object_start[rel.object]);
        let below = objects[oi].bbox;
        let above = &mut objects[si].bbox;
        let (bcx, _) = below.center();
        let w = above.width();
        let h = above.height();
        let x0 = (bcx - w / 2.0).clamp(0.0, 1.0 - w);
        let y1 = below.y0;
        let y0 = (y1 - h).max(0.0);
        *above = BoundingBox::new(x0, y0, x0 + w, y1.max(y0 + 0.01));
    }
}

fn singular_caption(entity: &super::dsl::EntityTerm) -> String {
    let one = super::dsl::EntityTerm {
        noun: entity.noun.clone(),
        attributes: entity.attributes.clone(),
        count: 1,
    };
    format_entity(&one)
}

#[cfg(test)]
mod tests {
    use super::super::dsl::parse_prompt_dsl;
    use super::super::validate_layout;
    use super::*;

    fn plan(text: &str) -> SemanticLayout {
        plan_rule(&parse_prompt_dsl(text).unwrap(), 32).unwrap()
    }

    #[test]
    fn left_of_splits_x_axis() {
        let l = plan("a red circle to the left of a blue square");
        assert_eq!(l.objects.len(), 2);
        let c = l.objects[0].bbox;
        let s = l.objects[1].bbox;
        assert!(c.x1 <= 0.5 + 1e-6, "circle box within left half");
        assert!(s.x0 >= 0.5 - 1e-6, "square box within right half");
        assert!(c.center().0 < s.center().0);
        assert!(validate_layout(&l).is_empty());
    }

    #[test]
    fn hidden_behind_overlaps_and_orders_depth() {
        let l = plan("a red circle hidden behind a blue square");
        // Subject (circle) is hidden: depth 2; the square in front: depth 1.
        assert_eq!(l.objects[0].depth, 2);
        assert_eq!(l.objects[1].depth, 1);
        let hidden = l.objects[0].bbox;
        let front = l.objects[1].bbox;
        let overlap = hidden.intersection(&front).area();
        assert!(
            overlap >= 0.5 * hidden.area(),
            "front box covers >= 50% of the hidden box, got {}",
            overlap / hidden.area()
        );
    }

    #[test]
    fn four_replicas_form_a_grid() {
        let l = plan("four red squares");
        assert_eq!(l.objects.len(), 4);
        // Brute-force pairwise disjointness and unit-square containment.
        for (i, a) in l.objects.iter().enumerate() {
            assert!(a.bbox.x0 >= 0.0 && a.bbox.x1 <= 1.0 && a.bbox.y0 >= 0.0 && a.bbox.y1 <= 1.0);
            for b in l.objects.iter().skip(i + 1) {
                assert!(a.bbox.intersection(&b.bbox).area() < 1e-9, "boxes must not overlap");
            }
        }
        // Equal sizes.
        let w0 = l.objects[0].bbox.width();
        for o in &l.objects {
            assert!((o.bbox.width() - w0).abs() < 1e-6);
            assert!((o.bbox.height() - w0).abs() < 1e-6);
        }
    }

    #[test]
    fn capacity_error_when_grid_degenerates() {
        // Six replicas inside one column of a 3-wide x-split cannot keep the
        // minimum side on a 32px canvas.
        let ast = parse_prompt_dsl(
            "six red circles to the left of a blue square to the left of a green triangle",
        )
        .unwrap();
        assert!(matches!(plan_rule(&ast, 32), Err(PlanError::Capacity { .. })));
        // The same prompt has room on a larger canvas.
        assert!(plan_rule(&ast, 128).is_ok());
    }

    #[test]
    fn on_top_of_stacks_touching_boxes() {
        let l = plan("a red circle on top of a blue square");
        let top = l.objects[0].bbox;
        let bottom = l.objects[1].bbox;
        assert!((top.y1 - bottom.y0).abs() < 1e-6, "stacked boxes touch");
        assert!((top.center().0 - bottom.center().0).abs() < 1e-6);
    }

    #[test]
    fn planner_is_pure() {
        let ast = parse_prompt_dsl("two blue squares above a red circle").unwrap();
        let a = plan_rule(&ast, 32).unwrap();
        let b = plan_rule(&ast, 32).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn planned_layouts_always_validate() {
        for text in [
            "a red circle",
            "six yellow circles",
            "a red circle to the right of a blue square",
            "two green triangles below a magenta square",
            "a cat in front of a dog",
            "a cyan square behind an orange circle",
            "a red circle above a blue square to the left of a green triangle",
        ] {
            let l = plan(text);
            assert!(validate_layout(&l).is_empty(), "{text}: {:?}", validate_layout(&l));
            assert_eq!(l.base_caption, text);
        }
    }
}
