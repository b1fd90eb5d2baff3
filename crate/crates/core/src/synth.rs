//! Deterministic synthetic scenes and a toy proposal generator.
//!
//! Scenes are painted back to front: a noisy background (category 0), stuff
//! bands with seeded textures, then solid objects. Ground truth is read off
//! the painted layers, so labels and per-instance masks always agree with the
//! pixels.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pursuit::{mix_seed, GtSegment};
use crate::types::{BinaryMask, FeatureMap, LabelMap, PixelBox, SegmentProposal, BACKGROUND};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Rectangle,
    Ellipse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectShape {
    pub category: u16,
    pub shape: Shape,
    /// Bounding rectangle of the shape.
    #[serde(rename = "box")]
    pub bbox: PixelBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StuffBand {
    pub category: u16,
    pub region: PixelBox,
    /// Spatial frequency of the band's stripe texture, in cycles per pixel.
    pub texture: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub objects: Vec<ObjectShape>,
    #[serde(default)]
    pub stuff: Vec<StuffBand>,
    pub seed: u64,
}

/// Category layout of generated corpora: three object and two stuff classes.
pub const OBJECT_CATEGORIES: [u16; 3] = [1, 2, 3];
pub const STUFF_CATEGORIES: [u16; 2] = [4, 5];
pub const NUM_CATEGORIES: usize = 6;

fn base_color(category: u16) -> [f32; 3] {
    match category {
        BACKGROUND => [0.50, 0.46, 0.42],
        1 => [0.85, 0.22, 0.20],
        2 => [0.88, 0.80, 0.22],
        3 => [0.55, 0.25, 0.80],
        4 => [0.22, 0.58, 0.24],
        5 => [0.42, 0.62, 0.92],
        c => {
            // Arbitrary but fixed colors for extra categories.
            let h = mix_seed(c as u64);
            [
                (h & 0xff) as f32 / 255.0,
                ((h >> 8) & 0xff) as f32 / 255.0,
                ((h >> 16) & 0xff) as f32 / 255.0,
            ]
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub image: FeatureMap,
    pub gt: LabelMap,
    pub gt_segments: Vec<GtSegment>,
}

fn inside(shape: &ObjectShape, x: usize, y: usize) -> bool {
    let b = shape.bbox;
    if !b.contains(x, y) {
        return false;
    }
    match shape.shape {
        Shape::Rectangle => true,
        Shape::Ellipse => {
            let cx = (b.x0 + b.x1) as f64 / 2.0;
            let cy = (b.y0 + b.y1) as f64 / 2.0;
            let rx = b.width() as f64 / 2.0;
            let ry = b.height() as f64 / 2.0;
            let dx = (x as f64 - cx) / rx;
            let dy = (y as f64 - cy) / ry;
            dx * dx + dy * dy <= 1.0
        }
    }
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    let (w, h) = (spec.width, spec.height);
    if w == 0 || h == 0 {
        return Err(Error::InvalidInput("scene dimensions must be positive".into()));
    }
    for o in &spec.objects {
        if !o.bbox.fits(w, h) || o.category == BACKGROUND {
            return Err(Error::InvalidInput(format!("object {o:?} out of bounds or background")));
        }
    }
    for s in &spec.stuff {
        if !s.region.fits(w, h) || s.category == BACKGROUND {
            return Err(Error::InvalidInput(format!(
                "stuff band {s:?} out of bounds or background"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // Layer index per pixel: 0 background, 1.. stuff bands, then objects.
    let mut owner = vec![0usize; w * h];
    for (i, s) in spec.stuff.iter().enumerate() {
        for y in s.region.y0..=s.region.y1 {
            for x in s.region.x0..=s.region.x1 {
                owner[y * w + x] = 1 + i;
            }
        }
    }
    let n_stuff = spec.stuff.len();
    for (i, o) in spec.objects.iter().enumerate() {
        for y in o.bbox.y0..=o.bbox.y1 {
            for x in o.bbox.x0..=o.bbox.x1 {
                if inside(o, x, y) {
                    owner[y * w + x] = 1 + n_stuff + i;
                }
            }
        }
    }

    // Per-layer color jitter and texture phase.
    let layers = 1 + n_stuff + spec.objects.len();
    let mut tint = Vec::with_capacity(layers);
    let mut phase = Vec::with_capacity(layers);
    for _ in 0..layers {
        tint.push([
            rng.gen_range(-0.06f32..0.06),
            rng.gen_range(-0.06f32..0.06),
            rng.gen_range(-0.06f32..0.06),
        ]);
        phase.push(rng.gen_range(0.0f32..std::f32::consts::TAU));
    }

    let mut values = vec![0.0f32; 3 * w * h];
    let mut labels = vec![BACKGROUND; w * h];
    for y in 0..h {
        for x in 0..w {
            let layer = owner[y * w + x];
            let (category, texture, noise_amp) = if layer == 0 {
                (BACKGROUND, 0.0, 0.10)
            } else if layer <= n_stuff {
                let s = &spec.stuff[layer - 1];
                (s.category, s.texture, 0.05)
            } else {
                (spec.objects[layer - 1 - n_stuff].category, 0.0, 0.03)
            };
            labels[y * w + x] = category;
            let base = base_color(category);
            let stripe = if texture > 0.0 {
                0.18 * (std::f32::consts::TAU * texture * (x as f32 + 0.5 * y as f32) + phase[layer]).sin()
            } else {
                0.0
            };
            for c in 0..3 {
                let noise = rng.gen_range(-noise_amp..=noise_amp);
                let v = base[c] + tint[layer][c] + stripe + noise;
                values[(c * h + y) * w + x] = v.clamp(0.0, 1.0);
            }
        }
    }

    let mut gt_segments = Vec::new();
    for layer in 1..layers {
        let category = if layer <= n_stuff {
            spec.stuff[layer - 1].category
        } else {
            spec.objects[layer - 1 - n_stuff].category
        };
        let mask = BinaryMask::from_bits(w, h, owner.iter().map(|&o| o == layer).collect())?;
        if !mask.is_empty() {
            gt_segments.push(GtSegment { category, mask });
        }
    }

    Ok(Scene {
        image: FeatureMap::new(3, h, w, values)?,
        gt: LabelMap::new(w, h, labels)?,
        gt_segments,
    })
}

/// Draws a scene layout: an optional sky-like band on top, an optional
/// ground-like band at the bottom, and one to three objects.
pub fn random_scene_spec(width: usize, height: usize, seed: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed));
    let mut stuff = Vec::new();
    if rng.gen_bool(0.75) {
        let y1 = rng.gen_range(height / 6..height * 2 / 5);
        stuff.push(StuffBand {
            category: 5,
            region: PixelBox {
                x0: 0,
                y0: 0,
                x1: width - 1,
                y1,
            },
            texture: rng.gen_range(0.04..0.08),
        });
    }
    if rng.gen_bool(0.75) {
        let y0 = rng.gen_range(height * 3 / 5..height * 5 / 6);
        stuff.push(StuffBand {
            category: 4,
            region: PixelBox {
                x0: 0,
                y0,
                x1: width - 1,
                y1: height - 1,
            },
            texture: rng.gen_range(0.20..0.30),
        });
    }
    let n_obj = rng.gen_range(1..=3);
    let min_side = (width.min(height) / 6).max(4);
    let max_side = (width.min(height) * 2 / 5).max(min_side + 1);
    let objects = (0..n_obj)
        .map(|_| {
            let ow = rng.gen_range(min_side..=max_side);
            let oh = rng.gen_range(min_side..=max_side);
            let x0 = rng.gen_range(0..=width - ow);
            let y0 = rng.gen_range(0..=height - oh);
            ObjectShape {
                category: *OBJECT_CATEGORIES.choose(&mut rng).expect("non-empty"),
                shape: if rng.gen_bool(0.5) {
                    Shape::Rectangle
                } else {
                    Shape::Ellipse
                },
                bbox: PixelBox {
                    x0,
                    y0,
                    x1: x0 + ow - 1,
                    y1: y0 + oh - 1,
                },
            }
        })
        .collect();
    SceneSpec {
        width,
        height,
        objects,
        stuff,
        seed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalParams {
    /// Grid cell sides (pixels) of the superpixel granularities.
    pub cell_sizes: Vec<usize>,
    /// Largest shift applied to jittered ground-truth copies.
    pub jitter: usize,
    /// Morphological radius for eroded/dilated copies.
    pub morph_radius: usize,
}

impl Default for ProposalParams {
    fn default() -> Self {
        Self {
            cell_sizes: vec![16, 32],
            jitter: 4,
            morph_radius: 2,
        }
    }
}

fn shifted(m: &BinaryMask, dx: isize, dy: isize) -> BinaryMask {
    let (w, h) = (m.width() as isize, m.height() as isize);
    BinaryMask::from_fn(m.width(), m.height(), |x, y| {
        let (sx, sy) = (x as isize - dx, y as isize - dy);
        sx >= 0 && sy >= 0 && sx < w && sy < h && m.get(sx as usize, sy as usize)
    })
    .expect("same dims")
}

/// Square-window dilation (`grow`) or erosion of radius `r`.
fn morph(m: &BinaryMask, r: usize, grow: bool) -> BinaryMask {
    let (w, h) = (m.width(), m.height());
    BinaryMask::from_fn(w, h, |x, y| {
        let ys = y.saturating_sub(r)..=(y + r).min(h - 1);
        let mut hit = !grow;
        'scan: for yy in ys {
            for xx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                if m.get(xx, yy) == grow {
                    hit = grow;
                    break 'scan;
                }
            }
        }
        // Erosion also clears pixels whose window leaves the image.
        if !grow && (x < r || y < r || x + r >= w || y + r >= h) {
            return false;
        }
        hit
    })
    .expect("same dims")
}

fn ground_truth_variants(m: &BinaryMask, params: &ProposalParams, rng: &mut ChaCha8Rng) -> Vec<BinaryMask> {
    let b = m.bbox().expect("gt segments are non-empty");
    let mut out = vec![m.clone()];
    if params.jitter > 0 {
        for (ux, uy) in [(1isize, 0isize), (0, 1)] {
            let j = rng.gen_range(1..=params.jitter) as isize;
            let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
            out.push(shifted(m, ux * j * sign, uy * j * sign));
        }
    }
    if params.morph_radius > 0 {
        out.push(morph(m, params.morph_radius, false));
        out.push(morph(m, params.morph_radius, true));
    }
    // Same-box confusers: the filled box and the outline ring.
    out.push(BinaryMask::from_box(m.width(), m.height(), b).expect("box inside image"));
    let ring_r = (b.width().min(b.height()) / 4).max(1);
    let core = morph(m, ring_r, false);
    out.push(BinaryMask::from_fn(m.width(), m.height(), |x, y| m.get(x, y) && !core.get(x, y)).expect("dims"));
    // Fragments: left and top halves.
    let mx = (b.x0 + b.x1) / 2;
    let my = (b.y0 + b.y1) / 2;
    out.push(BinaryMask::from_fn(m.width(), m.height(), |x, y| m.get(x, y) && x <= mx).expect("dims"));
    out.push(BinaryMask::from_fn(m.width(), m.height(), |x, y| m.get(x, y) && y <= my).expect("dims"));
    out
}

/// Superpixel merges at several grid granularities plus perturbed copies of
/// the ground-truth segments. Ids are assigned after a seeded shuffle.
pub fn toy_proposals(
    width: usize,
    height: usize,
    params: &ProposalParams,
    gt_segments: &[GtSegment],
    seed: u64,
) -> Result<Vec<SegmentProposal>> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput("image dimensions must be positive".into()));
    }
    if params.cell_sizes.contains(&0) {
        return Err(Error::InvalidInput("cell sizes must be >= 1".into()));
    }
    for g in gt_segments {
        if g.mask.width() != width || g.mask.height() != height {
            return Err(Error::DimensionMismatch("gt segment dims differ from image".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Region id per pixel: index of the covering gt segment + 1, 0 for none.
    let mut region = vec![0usize; width * height];
    for (i, g) in gt_segments.iter().enumerate() {
        for (r, &b) in region.iter_mut().zip(g.mask.bits()) {
            if b {
                *r = i + 1;
            }
        }
    }
    let n_regions = gt_segments.len() + 1;

    let mut masks: Vec<BinaryMask> = Vec::new();
    for &cell in &params.cell_sizes {
        let gx = width.div_ceil(cell);
        let gy = height.div_ceil(cell);
        let cell_of = |x: usize, y: usize| (y / cell) * gx + x / cell;
        // Superpixels: (cell, region) groups.
        let sp_mask = |cells: &dyn Fn(usize) -> bool, reg: Option<usize>| {
            BinaryMask::from_fn(width, height, |x, y| {
                cells(cell_of(x, y)) && reg.is_none_or(|r| region[y * width + x] == r)
            })
            .expect("dims")
        };
        for c in 0..gx * gy {
            for r in 0..n_regions {
                masks.push(sp_mask(&|k| k == c, Some(r)));
            }
        }
        // 2x2 blocks: whole block and per-region merges.
        for by in 0..gy.saturating_sub(1).max(1) {
            for bx in 0..gx.saturating_sub(1).max(1) {
                let in_block = move |k: usize| {
                    let (kx, ky) = (k % gx, k / gx);
                    (bx..bx + 2).contains(&kx) && (by..by + 2).contains(&ky)
                };
                masks.push(sp_mask(&in_block, None));
                for r in 0..n_regions {
                    masks.push(sp_mask(&in_block, Some(r)));
                }
            }
        }
        // Per-region strips along each grid row.
        for row in 0..gy {
            for r in 0..n_regions {
                masks.push(sp_mask(&|k| k / gx == row, Some(r)));
            }
        }
    }
    for g in gt_segments {
        masks.extend(ground_truth_variants(&g.mask, params, &mut rng));
    }

    // Drop empties and duplicates, keeping first occurrences.
    let mut seen = std::collections::HashSet::new();
    masks.retain(|m| !m.is_empty() && seen.insert(m.bits().to_vec()));
    masks.shuffle(&mut rng);
    masks
        .into_iter()
        .enumerate()
        .map(|(i, m)| SegmentProposal::new(format!("p{i:04}"), m))
        .collect()
}

/// A generated scene with its proposals.
#[derive(Debug, Clone)]
pub struct SyntheticImage {
    pub scene: Scene,
    pub proposals: Vec<SegmentProposal>,
}

/// `count` random scenes with seeds `first_seed..first_seed + count`.
pub fn synthetic_corpus(
    count: usize,
    width: usize,
    height: usize,
    first_seed: u64,
    params: &ProposalParams,
) -> Result<Vec<SyntheticImage>> {
    use rayon::prelude::*;
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let seed = first_seed + i;
            let scene = generate_scene(&random_scene_spec(width, height, seed))?;
            let proposals = toy_proposals(width, height, params, &scene.gt_segments, seed)?;
            Ok(SyntheticImage { scene, proposals })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pursuit::max_iou;

    #[test]
    fn empty_spec_is_background() {
        let s = generate_scene(&SceneSpec {
            width: 8,
            height: 6,
            objects: vec![],
            stuff: vec![],
            seed: 1,
        })
        .unwrap();
        assert!(s.gt.labels().iter().all(|&l| l == BACKGROUND));
        assert!(s.gt_segments.is_empty());
    }

    #[test]
    fn single_rectangle_labels() {
        let b = PixelBox::new(2, 1, 5, 3).unwrap();
        let spec = SceneSpec {
            width: 10,
            height: 8,
            objects: vec![ObjectShape {
                category: 2,
                shape: Shape::Rectangle,
                bbox: b,
            }],
            stuff: vec![],
            seed: 3,
        };
        let s = generate_scene(&spec).unwrap();
        for y in 0..8 {
            for x in 0..10 {
                assert_eq!(s.gt.get(x, y), if b.contains(x, y) { 2 } else { 0 });
            }
        }
        assert_eq!(s.gt_segments.len(), 1);
        assert_eq!(s.gt_segments[0].mask, s.gt.mask_of(2));
    }

    #[test]
    fn out_of_bounds_rejected() {
        let spec = SceneSpec {
            width: 10,
            height: 8,
            objects: vec![ObjectShape {
                category: 1,
                shape: Shape::Ellipse,
                bbox: PixelBox::new(5, 5, 10, 7).unwrap(),
            }],
            stuff: vec![],
            seed: 0,
        };
        assert!(generate_scene(&spec).is_err());
    }

    #[test]
    fn scenes_are_deterministic_and_consistent() {
        for seed in 0..20 {
            let spec = random_scene_spec(96, 96, seed);
            let a = generate_scene(&spec).unwrap();
            let b = generate_scene(&spec).unwrap();
            assert_eq!(a.image, b.image);
            assert_eq!(a.gt, b.gt);
            for g in &a.gt_segments {
                for (i, &bit) in g.mask.bits().iter().enumerate() {
                    if bit {
                        assert_eq!(a.gt.labels()[i], g.category);
                    }
                }
            }
            assert!(a.image.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn exact_copies_present_and_deterministic() {
        let spec = random_scene_spec(96, 96, 11);
        let s = generate_scene(&spec).unwrap();
        let p = toy_proposals(96, 96, &ProposalParams::default(), &s.gt_segments, 5).unwrap();
        assert_eq!(
            p,
            toy_proposals(96, 96, &ProposalParams::default(), &s.gt_segments, 5).unwrap()
        );
        for g in &s.gt_segments {
            assert!(p.iter().any(|q| q.mask() == &g.mask));
        }
    }

    #[test]
    fn grid_cells_mostly_miss_large_objects() {
        let b = PixelBox::new(8, 8, 71, 71).unwrap();
        let spec = SceneSpec {
            width: 96,
            height: 96,
            objects: vec![ObjectShape {
                category: 1,
                shape: Shape::Rectangle,
                bbox: b,
            }],
            stuff: vec![],
            seed: 0,
        };
        let s = generate_scene(&spec).unwrap();
        let params = ProposalParams {
            cell_sizes: vec![16],
            jitter: 0,
            morph_radius: 0,
        };
        let props = toy_proposals(96, 96, &params, &s.gt_segments, 0).unwrap();
        let gt = &s.gt_segments[0].mask;
        // A 16x16 cell inside the 64x64 object has IoU 256/4096.
        let low = props
            .iter()
            .filter(|p| p.area() <= 256 && p.mask().iou(gt).unwrap() < 0.3)
            .count();
        assert!(low >= 36, "{low}");
    }

    #[test]
    fn every_category_gets_positive_and_negative() {
        for seed in 0..10 {
            let s = generate_scene(&random_scene_spec(96, 96, seed)).unwrap();
            let props = toy_proposals(96, 96, &ProposalParams::default(), &s.gt_segments, seed).unwrap();
            for g in &s.gt_segments {
                let same: Vec<&BinaryMask> = s
                    .gt_segments
                    .iter()
                    .filter(|h| h.category == g.category)
                    .map(|h| &h.mask)
                    .collect();
                let ious: Vec<f64> = props
                    .iter()
                    .map(|p| max_iou(p.mask(), same.iter().copied()).unwrap())
                    .collect();
                assert!(ious.iter().any(|&v| v >= 0.5), "seed {seed} cat {}", g.category);
                assert!(
                    ious.iter().any(|&v| (0.1..=0.3).contains(&v)),
                    "seed {seed} cat {}",
                    g.category
                );
            }
        }
    }
}
