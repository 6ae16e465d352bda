//! Synthetic compositional-shapes corpus.
//!
//! Scenes are sampled from the same grammar the prompt DSL parses: single
//! objects, counted replicas, and relation pairs. Geometry is
//! rejection-sampled until the relation constraint holds and every shape
//! stays sufficiently visible, so captions are correct by construction and
//! the renderer's depth order doubles as the occlusion ground truth.

use crate::layout::{
    format_ast, format_entity, BoundingBox, EntityTerm, Noun, ObjectSpec, Relation, RelationTerm,
    SceneAst, SemanticLayout,
};
use crate::palette::{ColorName, ShapeKind, BACKGROUND_GRAY};
use crate::util::{derive_seed_indexed, solid_image, set_pixel, Image, Mask};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

/// Controls the scene grammar and geometry ranges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub canvas_size: usize,
    /// Replica counts are drawn from 2..=max_count for count scenes.
    pub max_count: u32,
    /// Probability of a single-object scene; count scenes take
    /// `p_count`, relation scenes the remainder.
    pub p_single: f32,
    pub p_count: f32,
    /// Probability that the caption carries the plain-background suffix.
    pub p_background_suffix: f32,
    /// Shape half-extent range in pixels.
    pub min_half_extent: f32,
    pub max_half_extent: f32,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            canvas_size: 32,
            max_count: 6,
            p_single: 0.35,
            p_count: 0.30,
            p_background_suffix: 0.5,
            min_half_extent: 3.0,
            max_half_extent: 7.0,
        }
    }
}

/// One concrete shape instance in pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedShape {
    pub kind: ShapeKind,
    pub color: ColorName,
    /// Center in pixels.
    pub center: (f32, f32),
    /// Half the side/diameter in pixels.
    pub half_extent: f32,
    /// 1 = closest to camera; unique within a scene.
    pub depth: u32,
}

impl PlacedShape {
    pub fn bbox_px(&self) -> (f32, f32, f32, f32) {
        (
            self.center.0 - self.half_extent,
            self.center.1 - self.half_extent,
            self.center.0 + self.half_extent,
            self.center.1 + self.half_extent,
        )
    }

    fn contains(&self, x: f32, y: f32) -> bool {
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        let h = self.half_extent;
        match self.kind {
            ShapeKind::Circle => dx * dx + dy * dy <= h * h,
            ShapeKind::Square => dx.abs() <= h && dy.abs() <= h,
            ShapeKind::Triangle => {
                // Apex-up isoceles triangle inscribed in the bbox.
                let v = (dy + h) / (2.0 * h);
                (0.0..=1.0).contains(&v) && dx.abs() <= h * v
            }
        }
    }
}

/// A sampled scene plus the grammar term it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeScene {
    pub shapes: Vec<PlacedShape>,
    pub background_color: [f32; 3],
    pub canvas_size: usize,
    /// The grammar term this scene realizes; captioning formats it verbatim.
    pub ast: SceneAst,
    /// Entity index (into `ast.entities`) for each shape.
    pub shape_entity: Vec<usize>,
}

/// Image + caption + ground-truth layout.
#[derive(Debug, Clone)]
pub struct CorpusSample {
    pub image: Image,
    pub caption: String,
    pub layout: SemanticLayout,
    pub seed: u64,
}

const MIN_VISIBLE_PIXELS: usize = 8;
const PLACEMENT_ROUNDS: usize = 60;

/// Samples a scene deterministically from a seed. Rejection-samples geometry
/// until relation constraints hold and every shape keeps at least
/// `MIN_VISIBLE_PIXELS` visible; if a replica count cannot be placed the
/// count is relaxed downward and sampling restarts.
pub fn sample_scene(seed: u64, config: &CorpusConfig) -> ShapeScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw: f32 = rng.gen();
    if draw < config.p_single {
        sample_count_scene(&mut rng, config, 1)
    } else if draw < config.p_single + config.p_count {
        let n = rng.gen_range(2..=config.max_count.max(2));
        sample_count_scene(&mut rng, config, n)
    } else {
        sample_relation_scene(&mut rng, config)
    }
}

fn random_kind(rng: &mut ChaCha8Rng) -> ShapeKind {
    ShapeKind::ALL[rng.gen_range(0..ShapeKind::ALL.len())]
}

fn random_color(rng: &mut ChaCha8Rng) -> ColorName {
    ColorName::ALL[rng.gen_range(0..ColorName::ALL.len())]
}

fn random_half_extent(rng: &mut ChaCha8Rng, config: &CorpusConfig) -> f32 {
    rng.gen_range(config.min_half_extent..=config.max_half_extent).round()
}

fn random_center(rng: &mut ChaCha8Rng, h: f32, canvas: usize) -> (f32, f32) {
    let lo = h + 1.0;
    let hi = canvas as f32 - h - 1.0;
    (rng.gen_range(lo..=hi).round(), rng.gen_range(lo..=hi).round())
}

fn boxes_gap(a: &PlacedShape, b: &PlacedShape) -> f32 {
    let (ax0, ay0, ax1, ay1) = a.bbox_px();
    let (bx0, by0, bx1, by1) = b.bbox_px();
    let dx = (bx0 - ax1).max(ax0 - bx1).max(0.0);
    let dy = (by0 - ay1).max(ay0 - by1).max(0.0);
    dx.max(dy)
}

fn overlap_fraction_of(subject: &PlacedShape, other: &PlacedShape) -> f32 {
    let (ax0, ay0, ax1, ay1) = subject.bbox_px();
    let (bx0, by0, bx1, by1) = other.bbox_px();
    let w = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let h = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let area = (ax1 - ax0) * (ay1 - ay0);
    (w * h) / area
}

fn sample_count_scene(rng: &mut ChaCha8Rng, config: &CorpusConfig, count: u32) -> ShapeScene {
    let kind = random_kind(rng);
    let color = random_color(rng);
    let suffix = rng.gen::<f32>() < config.p_background_suffix;
    let mut n = count;
    loop {
        if let Some(shapes) = try_place_replicas(rng, config, kind, color, n) {
            let entity = EntityTerm {
                noun: Noun::Shape(kind),
                attributes: vec![color.word().to_string()],
                count: n,
            };
            let scene = ShapeScene {
                shape_entity: vec![0; shapes.len()],
                shapes,
                background_color: BACKGROUND_GRAY,
                canvas_size: config.canvas_size,
                ast: SceneAst {
                    entities: vec![entity],
                    relations: vec![],
                    background_suffix: suffix,
                },
            };
            return scene;
        }
        n = n.saturating_sub(1).max(1);
    }
}

fn try_place_replicas(
    rng: &mut ChaCha8Rng,
    config: &CorpusConfig,
    kind: ShapeKind,
    color: ColorName,
    n: u32,
) -> Option<Vec<PlacedShape>> {
    'round: for _ in 0..PLACEMENT_ROUNDS {
        let h = random_half_extent(rng, config);
        let mut shapes: Vec<PlacedShape> = Vec::new();
        for i in 0..n {
            let mut placed = false;
            for _ in 0..80 {
                let center = random_center(rng, h, config.canvas_size);
                let cand = PlacedShape { kind, color, center, half_extent: h, depth: i + 1 };
                if shapes.iter().all(|s| boxes_gap(s, &cand) >= 2.0) {
                    shapes.push(cand);
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'round;
            }
        }
        return Some(shapes);
    }
    None
}

fn sample_relation_scene(rng: &mut ChaCha8Rng, config: &CorpusConfig) -> ShapeScene {
    let relation = Relation::ALL[rng.gen_range(0..Relation::ALL.len())];
    let kind_a = random_kind(rng);
    let kind_b = random_kind(rng);
    let color_a = random_color(rng);
    // Relation pairs always differ in color so adjacency and occlusion keep
    // the two components separable.
    let color_b = loop {
        let c = random_color(rng);
        if c != color_a {
            break c;
        }
    };
    let suffix = rng.gen::<f32>() < config.p_background_suffix;

    loop {
        if let Some((subj, obj)) = try_place_relation(rng, config, relation, kind_a, kind_b, color_a, color_b) {
            let entities = vec![
                EntityTerm {
                    noun: Noun::Shape(kind_a),
                    attributes: vec![color_a.word().to_string()],
                    count: 1,
                },
                EntityTerm {
                    noun: Noun::Shape(kind_b),
                    attributes: vec![color_b.word().to_string()],
                    count: 1,
                },
            ];
            let scene = ShapeScene {
                shapes: vec![subj, obj],
                background_color: BACKGROUND_GRAY,
                canvas_size: config.canvas_size,
                ast: SceneAst {
                    entities,
                    relations: vec![RelationTerm { subject: 0, relation, object: 1 }],
                    background_suffix: suffix,
                },
                shape_entity: vec![0, 1],
            };
            if scene_visibility_ok(&scene) {
                return scene;
            }
        }
    }
}

fn try_place_relation(
    rng: &mut ChaCha8Rng,
    config: &CorpusConfig,
    relation: Relation,
    kind_a: ShapeKind,
    kind_b: ShapeKind,
    color_a: ColorName,
    color_b: ColorName,
) -> Option<(PlacedShape, PlacedShape)> {
    let canvas = config.canvas_size;
    for _ in 0..200 {
        let ha = random_half_extent(rng, config);
        let hb = random_half_extent(rng, config);
        let cb = random_center(rng, hb, canvas);
        let mut b = PlacedShape { kind: kind_b, color: color_b, center: cb, half_extent: hb, depth: 2 };
        let ca = random_center(rng, ha, canvas);
        let mut a = PlacedShape { kind: kind_a, color: color_a, center: ca, half_extent: ha, depth: 1 };

        let ok = match relation {
            Relation::LeftOf => a.center.0 + 2.0 < b.center.0 && boxes_gap(&a, &b) >= 2.0,
            Relation::RightOf => a.center.0 > b.center.0 + 2.0 && boxes_gap(&a, &b) >= 2.0,
            Relation::Above => a.center.1 + 2.0 < b.center.1 && boxes_gap(&a, &b) >= 2.0,
            Relation::Below => a.center.1 > b.center.1 + 2.0 && boxes_gap(&a, &b) >= 2.0,
            Relation::OnTopOf => {
                // Construct: subject rests on the object's top edge.
                let gap = rng.gen_range(1.0..=2.0f32).round();
                let jitter = rng.gen_range(-2.0..=2.0f32).round();
                let cx = (b.center.0 + jitter).clamp(ha + 1.0, canvas as f32 - ha - 1.0);
                let cy = b.center.1 - hb - gap - ha;
                a.center = (cx, cy);
                cy - ha >= 1.0
            }
            Relation::InFrontOf | Relation::Behind | Relation::HiddenBehind => {
                let (front_is_a, range) = match relation {
                    Relation::InFrontOf => (true, 0.10..0.45),
                    Relation::Behind => (false, 0.10..0.45),
                    Relation::HiddenBehind => (false, 0.50..0.70),
                    _ => unreachable!(),
                };
                if front_is_a {
                    a.depth = 1;
                    b.depth = 2;
                } else {
                    a.depth = 2;
                    b.depth = 1;
                }
                let back = if front_is_a { &b } else { &a };
                let front = if front_is_a { &a } else { &b };
                range.contains(&overlap_fraction_of(back, front))
            }
        };
        if ok {
            if !relation.is_occlusion() {
                // keep unique depths: subject 1, object 2
                a.depth = 1;
                b.depth = 2;
            }
            return Some((a, b));
        }
    }
    None
}

fn scene_visibility_ok(scene: &ShapeScene) -> bool {
    visible_masks(scene)
        .iter()
        .all(|m| m.iter().filter(|&&b| b).count() >= MIN_VISIBLE_PIXELS)
}

/// Rasterizes one shape alone on the canvas.
pub fn shape_mask(shape: &PlacedShape, canvas_size: usize) -> Mask {
    Array2::from_shape_fn((canvas_size, canvas_size), |(y, x)| {
        shape.contains(x as f32 + 0.5, y as f32 + 0.5)
    })
}

/// Post-occlusion visibility per shape: a pixel belongs to the shape with the
/// smallest depth containing it.
pub fn visible_masks(scene: &ShapeScene) -> Vec<Mask> {
    let n = scene.canvas_size;
    let full: Vec<Mask> = scene.shapes.iter().map(|s| shape_mask(s, n)).collect();
    let mut owner: Array2<Option<usize>> = Array2::from_elem((n, n), None);
    for y in 0..n {
        for x in 0..n {
            for (i, m) in full.iter().enumerate() {
                if m[[y, x]] {
                    let better = match owner[[y, x]] {
                        None => true,
                        Some(j) => scene.shapes[i].depth < scene.shapes[j].depth,
                    };
                    if better {
                        owner[[y, x]] = Some(i);
                    }
                }
            }
        }
    }
    (0..scene.shapes.len())
        .map(|i| Array2::from_shape_fn((n, n), |p| owner[p] == Some(i)))
        .collect()
}

/// Painter's algorithm: larger depth painted first, no anti-aliasing.
pub fn render_scene(scene: &ShapeScene) -> Image {
    let n = scene.canvas_size;
    let mut img = solid_image(n, n, scene.background_color);
    let mut order: Vec<usize> = (0..scene.shapes.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(scene.shapes[i].depth));
    for i in order {
        let shape = &scene.shapes[i];
        let rgb = shape.color.rgb();
        let mask = shape_mask(shape, n);
        for y in 0..n {
            for x in 0..n {
                if mask[[y, x]] {
                    set_pixel(&mut img, y, x, rgb);
                }
            }
        }
    }
    img
}

/// Canonical DSL caption for the scene; parses back to the scene's AST.
pub fn caption_scene(scene: &ShapeScene) -> String {
    format_ast(&scene.ast)
}

/// Ground-truth layout: one object per shape, boxes from actual extents.
pub fn scene_layout(scene: &ShapeScene) -> SemanticLayout {
    let n = scene.canvas_size as f32;
    let objects = scene
        .shapes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (x0, y0, x1, y1) = s.bbox_px();
            ObjectSpec {
                id: i + 1,
                caption: singular_caption(&scene.ast.entities[scene.shape_entity[i]]),
                bbox: BoundingBox::new(
                    (x0 / n).clamp(0.0, 1.0),
                    (y0 / n).clamp(0.0, 1.0),
                    (x1 / n).clamp(0.0, 1.0),
                    (y1 / n).clamp(0.0, 1.0),
                ),
                depth: s.depth,
            }
        })
        .collect();
    SemanticLayout {
        objects,
        background_caption: "a plain gray background".to_string(),
        base_caption: format_ast(&SceneAst {
            entities: scene.ast.entities.clone(),
            relations: scene.ast.relations.clone(),
            background_suffix: false,
        }),
        canvas_size: scene.canvas_size,
    }
}

fn singular_caption(entity: &EntityTerm) -> String {
    format_entity(&EntityTerm {
        noun: entity.noun.clone(),
        attributes: entity.attributes.clone(),
        count: 1,
    })
}

/// Generates one full corpus sample from a seed.
pub fn generate_sample(seed: u64, config: &CorpusConfig) -> CorpusSample {
    let scene = sample_scene(seed, config);
    CorpusSample {
        image: render_scene(&scene),
        caption: caption_scene(&scene),
        layout: scene_layout(&scene),
        seed,
    }
}

#[derive(Serialize, Deserialize)]
struct MetaLine {
    index: usize,
    seed: u64,
    caption: String,
    layout: serde_json::Value,
}

/// Writes `count` samples derived from `master_seed` into `dir`:
/// `img_XXXXX.png` plus one `meta.jsonl` with caption/layout/seed per line.
pub fn write_corpus(
    dir: &Path,
    config: &CorpusConfig,
    master_seed: u64,
    count: usize,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let meta_path = dir.join("meta.jsonl");
    let mut meta = std::io::BufWriter::new(std::fs::File::create(meta_path)?);
    for index in 0..count {
        let seed = derive_seed_indexed(master_seed, "corpus-sample", index as u64);
        let sample = generate_sample(seed, config);
        crate::util::save_png(&sample.image, &dir.join(format!("img_{index:05}.png")))?;
        let line = MetaLine {
            index,
            seed,
            caption: sample.caption,
            layout: serde_json::from_str(&sample.layout.to_json())?,
        };
        serde_json::to_writer(&mut meta, &line)?;
        meta.write_all(b"\n")?;
    }
    meta.flush()
}

/// Reads a corpus directory back into memory.
pub fn load_corpus(dir: &Path) -> std::io::Result<Vec<CorpusSample>> {
    let meta = std::fs::File::open(dir.join("meta.jsonl"))?;
    let mut out = Vec::new();
    for line in std::io::BufReader::new(meta).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let m: MetaLine = serde_json::from_str(&line)?;
        let image = crate::util::load_png(&dir.join(format!("img_{:05}.png", m.index)))?;
        let layout = SemanticLayout::from_json(&m.layout.to_string())
            .map_err(std::io::Error::other)?;
        out.push(CorpusSample { image, caption: m.caption, layout, seed: m.seed });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{parse_prompt_dsl, validate_layout};

    fn cfg() -> CorpusConfig {
        CorpusConfig::default()
    }

    #[test]
    fn single_shape_scene_from_max_count_one() {
        let config = CorpusConfig { p_single: 1.0, ..cfg() };
        let scene = sample_scene(0, &config);
        assert_eq!(scene.shapes.len(), 1);
        assert!(scene.ast.relations.is_empty());
    }

    #[test]
    fn left_of_scenes_satisfy_center_ordering() {
        let config = CorpusConfig { p_single: 0.0, p_count: 0.0, ..cfg() };
        let mut checked = 0;
        for seed in 0..300 {
            let scene = sample_scene(seed, &config);
            if scene.ast.relations[0].relation == Relation::LeftOf {
                assert!(scene.shapes[0].center.0 < scene.shapes[1].center.0);
                checked += 1;
            }
        }
        assert!(checked > 10, "expected a reasonable number of left-of scenes");
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_scene(42, &cfg());
        let b = sample_scene(42, &cfg());
        assert_eq!(a, b);
        let ia = render_scene(&a);
        let ib = render_scene(&b);
        assert_eq!(ia, ib);
    }

    #[test]
    fn painter_gives_overlap_to_smaller_depth() {
        let scene = ShapeScene {
            shapes: vec![
                PlacedShape {
                    kind: ShapeKind::Square,
                    color: ColorName::Red,
                    center: (14.0, 14.0),
                    half_extent: 6.0,
                    depth: 1,
                },
                PlacedShape {
                    kind: ShapeKind::Square,
                    color: ColorName::Blue,
                    center: (18.0, 18.0),
                    half_extent: 6.0,
                    depth: 2,
                },
            ],
            background_color: BACKGROUND_GRAY,
            canvas_size: 32,
            ast: SceneAst {
                entities: vec![
                    EntityTerm {
                        noun: Noun::Shape(ShapeKind::Square),
                        attributes: vec!["red".into()],
                        count: 1,
                    },
                    EntityTerm {
                        noun: Noun::Shape(ShapeKind::Square),
                        attributes: vec!["blue".into()],
                        count: 1,
                    },
                ],
                relations: vec![RelationTerm {
                    subject: 0,
                    relation: Relation::InFrontOf,
                    object: 1,
                }],
                background_suffix: false,
            },
            shape_entity: vec![0, 1],
        };
        let img = render_scene(&scene);
        // (14, 14) is inside both squares; red has depth 1 and wins.
        let px = crate::util::pixel(&img, 14, 14);
        assert_eq!(px, ColorName::Red.rgb());
    }

    #[test]
    fn empty_scene_renders_background() {
        let scene = ShapeScene {
            shapes: vec![],
            background_color: BACKGROUND_GRAY,
            canvas_size: 8,
            ast: SceneAst {
                entities: vec![EntityTerm {
                    noun: Noun::Shape(ShapeKind::Circle),
                    attributes: vec![],
                    count: 1,
                }],
                relations: vec![],
                background_suffix: false,
            },
            shape_entity: vec![],
        };
        let img = render_scene(&scene);
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(crate::util::pixel(&img, y, x), BACKGROUND_GRAY);
            }
        }
    }

    #[test]
    fn caption_round_trips_over_many_scenes() {
        for seed in 0..1000 {
            let scene = sample_scene(seed, &cfg());
            let caption = caption_scene(&scene);
            let ast = parse_prompt_dsl(&caption)
                .unwrap_or_else(|e| panic!("caption {caption:?} must parse: {e}"));
            assert_eq!(ast, scene.ast, "caption {caption:?}");
        }
    }

    #[test]
    fn ground_truth_layouts_validate() {
        for seed in 0..200 {
            let scene = sample_scene(seed, &cfg());
            let layout = scene_layout(&scene);
            assert!(validate_layout(&layout).is_empty());
        }
    }

    #[test]
    fn shape_kind_distribution_is_uniform() {
        let mut counts = std::collections::HashMap::new();
        let mut total = 0usize;
        for seed in 0..10_000 {
            let scene = sample_scene(seed, &cfg());
            for s in &scene.shapes {
                *counts.entry(s.kind).or_insert(0usize) += 1;
                total += 1;
            }
        }
        for kind in ShapeKind::ALL {
            let frac = counts[&kind] as f64 / total as f64;
            assert!(
                (frac - 1.0 / 3.0).abs() < 0.03,
                "kind {kind:?} fraction {frac} outside ±3%"
            );
        }
    }

    #[test]
    fn corpus_write_is_reproducible() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        write_corpus(dir_a.path(), &cfg(), 7, 12).unwrap();
        write_corpus(dir_b.path(), &cfg(), 7, 12).unwrap();
        for entry in std::fs::read_dir(dir_a.path()).unwrap() {
            let name = entry.unwrap().file_name();
            let a = std::fs::read(dir_a.path().join(&name)).unwrap();
            let b = std::fs::read(dir_b.path().join(&name)).unwrap();
            assert_eq!(a, b, "{name:?} differs between identical runs");
        }
        let loaded = load_corpus(dir_a.path()).unwrap();
        assert_eq!(loaded.len(), 12);
        for s in &loaded {
            assert!(parse_prompt_dsl(&s.caption).is_ok());
            assert!(validate_layout(&s.layout).is_empty());
        }
    }

    #[test]
    fn visible_masks_respect_depth() {
        let config = CorpusConfig { p_single: 0.0, p_count: 0.0, ..cfg() };
        for seed in 0..100 {
            let scene = sample_scene(seed, &config);
            let img = render_scene(&scene);
            let vis = visible_masks(&scene);
            for (i, mask) in vis.iter().enumerate() {
                let rgb = scene.shapes[i].color.rgb();
                for y in 0..scene.canvas_size {
                    for x in 0..scene.canvas_size {
                        if mask[[y, x]] {
                            assert_eq!(crate::util::pixel(&img, y, x), rgb);
                        }
                    }
                }
            }
        }
    }
}
