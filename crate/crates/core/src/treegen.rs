//! Procedural tree occluders: whole artificial trees assembled from a bank
//! of segmented trunk and leaf sprites by attaching randomly drawn branches
//! to the trunk spine and scattering leaves along each branch.
//!
//! Generation is a pure function of (bank, params, seed). The draw order is
//! fixed and replayable: trunk choice, branch count, then per-branch
//! attach/angle/length, then per-leaf sprite/position/rotation/scale. See
//! [`plan_tree`].

use std::fs;
use std::path::Path;

use image::{Rgba, RgbaImage};
use serde::{Deserialize, Serialize};

use crate::coco::raster::polygon_to_mask;
use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::rng::SplitMix64;
use crate::sprite::{alpha_threshold_mask, blit_integer, blit_over_rgba, paint_mask, SpriteTransform};

const BRANCH_COLOR: [u8; 3] = [96, 64, 38];
/// Branch stroke width as a fraction of trunk height, tapering start -> tip.
const BRANCH_WIDTH_START: f64 = 0.06;
const BRANCH_WIDTH_END: f64 = 0.01;
const CANVAS_MARGIN: i64 = 2;

/// A segmented trunk: RGBA raster, base-anchor pixel, and the spine segment
/// branches attach to (bottom point first).
#[derive(Debug, Clone)]
pub struct TrunkSprite {
    pub image: RgbaImage,
    pub base: (u32, u32),
    pub spine: [(f64, f64); 2],
}

/// A segmented leaf with its stem-anchor pixel.
#[derive(Debug, Clone)]
pub struct LeafSprite {
    pub image: RgbaImage,
    pub stem: (u32, u32),
}

#[derive(Debug, Clone)]
pub struct AssetBank {
    pub trunks: Vec<TrunkSprite>,
    pub leaves: Vec<LeafSprite>,
}

impl AssetBank {
    pub fn validate(&self) -> Result<()> {
        if self.trunks.is_empty() || self.leaves.is_empty() {
            return Err(Error::EmptyAssetBank);
        }
        Ok(())
    }
}

/// Branch count distribution: Poisson(mean) clipped to min..=max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchCountSpec {
    pub mean: f64,
    pub min: u32,
    pub max: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeParams {
    pub branch_count: BranchCountSpec,
    /// Fraction of the trunk spine, measured from the top, eligible for
    /// branch attachment.
    pub branch_attach_span: f64,
    /// Branch angle off the trunk axis, degrees; sides alternate by index.
    pub branch_angle_deg: (f64, f64),
    /// Branch length as a fraction of trunk height.
    pub branch_length_frac: (f64, f64),
    pub leaves_per_branch: (u32, u32),
    pub leaf_scale: (f64, f64),
    /// The occluder mask is alpha > alpha_threshold.
    pub alpha_threshold: u8,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            branch_count: BranchCountSpec {
                mean: 8.0,
                min: 4,
                max: 16,
            },
            branch_attach_span: 0.7,
            branch_angle_deg: (20.0, 80.0),
            branch_length_frac: (0.2, 0.5),
            leaves_per_branch: (3, 12),
            leaf_scale: (0.5, 1.5),
            alpha_threshold: 128,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        let b = &self.branch_count;
        if !(b.mean.is_finite() && b.mean >= 0.0 && b.min <= b.max) {
            return Err(Error::BadParamRange("branch_count"));
        }
        if !(self.branch_attach_span > 0.0 && self.branch_attach_span <= 1.0) {
            return Err(Error::BadParamRange("branch_attach_span"));
        }
        for (name, (lo, hi)) in [
            ("branch_angle_deg", self.branch_angle_deg),
            ("branch_length_frac", self.branch_length_frac),
            ("leaf_scale", self.leaf_scale),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::BadParamRange(name));
            }
        }
        if self.branch_length_frac.0 < 0.0 || self.leaf_scale.0 <= 0.0 {
            return Err(Error::BadParamRange("non-positive range"));
        }
        if self.leaves_per_branch.0 > self.leaves_per_branch.1 {
            return Err(Error::BadParamRange("leaves_per_branch"));
        }
        Ok(())
    }
}

/// A generated occluder: RGBA raster, its thresholded-alpha mask, and the
/// base anchor (trunk foot) in raster coordinates.
#[derive(Debug, Clone)]
pub struct TreeInstance {
    pub raster: RgbaImage,
    pub occluder_mask: BinaryMask,
    pub base_anchor: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafPlan {
    pub sprite_index: usize,
    /// Position along the branch centerline in [0, 1).
    pub t: f64,
    pub rotation_deg: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPlan {
    /// Position along the eligible spine span in [0, 1).
    pub attach_t: f64,
    /// Unsigned angle off the trunk axis; the side alternates with the
    /// branch index (even indices lean one way, odd the other).
    pub angle_deg: f64,
    pub length_frac: f64,
    pub leaves: Vec<LeafPlan>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreePlan {
    pub trunk_index: usize,
    pub branches: Vec<BranchPlan>,
}

/// Draw a tree plan from the seed. Draw order (one SplitMix64 stream):
/// 1. trunk index: `range_usize(0, trunks-1)`
/// 2. branch count: `poisson(mean)` clipped to min..=max
/// 3. per branch, in index order: `attach_t = next_f64()`,
///    `angle = uniform(angle range)`, `length_frac = uniform(length range)`
/// 4. per branch, in index order: `n = range_u32(leaves range)`, then per
///    leaf: `sprite = range_usize`, `t = next_f64()`,
///    `rotation = uniform(0, 360)`, `scale = uniform(scale range)`
pub fn plan_tree(bank: &AssetBank, params: &TreeParams, seed: u64) -> TreePlan {
    let mut rng = SplitMix64::new(seed);
    let trunk_index = rng.range_usize(0, bank.trunks.len() - 1);
    let spec = &params.branch_count;
    let count = rng.poisson(spec.mean).clamp(spec.min as u64, spec.max as u64) as usize;

    let mut branches: Vec<BranchPlan> = (0..count)
        .map(|_| BranchPlan {
            attach_t: rng.next_f64(),
            angle_deg: rng.uniform(params.branch_angle_deg.0, params.branch_angle_deg.1),
            length_frac: rng.uniform(params.branch_length_frac.0, params.branch_length_frac.1),
            leaves: Vec::new(),
        })
        .collect();

    for branch in &mut branches {
        let n = rng.range_u32(params.leaves_per_branch.0, params.leaves_per_branch.1);
        branch.leaves = (0..n)
            .map(|_| LeafPlan {
                sprite_index: rng.range_usize(0, bank.leaves.len() - 1),
                t: rng.next_f64(),
                rotation_deg: rng.uniform(0.0, 360.0),
                scale: rng.uniform(params.leaf_scale.0, params.leaf_scale.1),
            })
            .collect();
    }

    TreePlan {
        trunk_index,
        branches,
    }
}

fn rotate_ccw_deg(v: (f64, f64), deg: f64) -> (f64, f64) {
    let r = deg.to_radians();
    let (s, c) = (r.sin(), r.cos());
    (c * v.0 - s * v.1, s * v.0 + c * v.1)
}

struct BranchGeometry {
    quad: Vec<f64>,
    start: (f64, f64),
    dir: (f64, f64),
    length: f64,
}

fn branch_geometry(trunk: &TrunkSprite, plan: &BranchPlan, index: usize, span: f64) -> BranchGeometry {
    let bottom = trunk.spine[0];
    let top = trunk.spine[1];
    let axis = (top.0 - bottom.0, top.1 - bottom.1);
    let trunk_height = (axis.0 * axis.0 + axis.1 * axis.1).sqrt().max(1.0);
    let axis = (axis.0 / trunk_height, axis.1 / trunk_height);

    // attachment point within the top `span` fraction of the spine
    let s = (1.0 - span) + plan.attach_t * span;
    let start = (bottom.0 + axis.0 * trunk_height * s, bottom.1 + axis.1 * trunk_height * s);

    let signed = if index % 2 == 0 {
        plan.angle_deg
    } else {
        -plan.angle_deg
    };
    let dir = rotate_ccw_deg(axis, signed);
    let length = plan.length_frac * trunk_height;
    let end = (start.0 + dir.0 * length, start.1 + dir.1 * length);

    let normal = (-dir.1, dir.0);
    let w0 = BRANCH_WIDTH_START * trunk_height / 2.0;
    let w1 = BRANCH_WIDTH_END * trunk_height / 2.0;
    let quad = vec![
        start.0 - normal.0 * w0,
        start.1 - normal.1 * w0,
        start.0 + normal.0 * w0,
        start.1 + normal.1 * w0,
        end.0 + normal.0 * w1,
        end.1 + normal.1 * w1,
        end.0 - normal.0 * w1,
        end.1 - normal.1 * w1,
    ];
    BranchGeometry {
        quad,
        start,
        dir,
        length,
    }
}

/// Render a plan to pixels: trunk blitted verbatim, branches as filled
/// tapered quads with binary alpha (no anti-aliasing), leaves as rotated and
/// scaled sprite blits. Canvas is the tight bounds of everything plus a
/// 2-pixel margin.
pub fn render_tree(bank: &AssetBank, params: &TreeParams, plan: &TreePlan) -> TreeInstance {
    let trunk = &bank.trunks[plan.trunk_index];
    let (tw, th) = trunk.image.dimensions();

    let geoms: Vec<BranchGeometry> = plan
        .branches
        .iter()
        .enumerate()
        .map(|(i, b)| branch_geometry(trunk, b, i, params.branch_attach_span))
        .collect();

    // leaf transforms in trunk space (targets filled in now, shifted later)
    let mut leaf_blits: Vec<(usize, SpriteTransform)> = Vec::new();
    for (geom, branch) in geoms.iter().zip(&plan.branches) {
        for leaf in &branch.leaves {
            let q = (
                geom.start.0 + geom.dir.0 * geom.length * leaf.t,
                geom.start.1 + geom.dir.1 * geom.length * leaf.t,
            );
            let sprite = &bank.leaves[leaf.sprite_index];
            leaf_blits.push((
                leaf.sprite_index,
                SpriteTransform {
                    pivot: (sprite.stem.0 as f64 + 0.5, sprite.stem.1 as f64 + 0.5),
                    target: q,
                    angle_deg: leaf.rotation_deg,
                    scale: leaf.scale,
                },
            ));
        }
    }

    // tight bounds over trunk raster, branch quads, and leaf corners
    let mut min_x = 0.0f64;
    let mut min_y = 0.0f64;
    let mut max_x = tw as f64;
    let mut max_y = th as f64;
    for geom in &geoms {
        for chunk in geom.quad.chunks(2) {
            min_x = min_x.min(chunk[0]);
            max_x = max_x.max(chunk[0]);
            min_y = min_y.min(chunk[1]);
            max_y = max_y.max(chunk[1]);
        }
    }
    for (idx, t) in &leaf_blits {
        let (lw, lh) = bank.leaves[*idx].image.dimensions();
        for corner in [
            (0.0, 0.0),
            (lw as f64, 0.0),
            (0.0, lh as f64),
            (lw as f64, lh as f64),
        ] {
            let (x, y) = t.forward(corner);
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
    }

    let x0 = min_x.floor() as i64 - CANVAS_MARGIN;
    let y0 = min_y.floor() as i64 - CANVAS_MARGIN;
    let x1 = max_x.ceil() as i64 + CANVAS_MARGIN;
    let y1 = max_y.ceil() as i64 + CANVAS_MARGIN;
    let cw = (x1 - x0) as u32;
    let ch = (y1 - y0) as u32;
    let shift = (-x0 as f64, -y0 as f64);

    let mut canvas = RgbaImage::new(cw, ch);
    blit_integer(&mut canvas, &trunk.image, -x0, -y0);

    if !geoms.is_empty() {
        let quads: Vec<Vec<f64>> = geoms
            .iter()
            .map(|g| {
                g.quad
                    .chunks(2)
                    .flat_map(|c| [c[0] + shift.0, c[1] + shift.1])
                    .collect()
            })
            .collect();
        // quads are convex and validated by construction
        let branch_mask = polygon_to_mask(&quads, cw, ch).expect("branch quads are valid polygons");
        paint_mask(&mut canvas, &branch_mask, BRANCH_COLOR);
    }

    for (idx, t) in &leaf_blits {
        let shifted = SpriteTransform {
            target: (t.target.0 + shift.0, t.target.1 + shift.1),
            ..*t
        };
        blit_over_rgba(&mut canvas, &bank.leaves[*idx].image, &shifted);
    }

    let occluder_mask = alpha_threshold_mask(&canvas, params.alpha_threshold);
    TreeInstance {
        raster: canvas,
        occluder_mask,
        base_anchor: (
            trunk.base.0 as f64 + 0.5 + shift.0,
            trunk.base.1 as f64 + 0.5 + shift.1,
        ),
    }
}

/// Deterministically synthesize a whole tree from the bank.
pub fn generate_tree(bank: &AssetBank, params: &TreeParams, seed: u64) -> TreeInstance {
    render_tree(bank, params, &plan_tree(bank, params, seed))
}

// ---------------------------------------------------------------------------
// Asset bank I/O
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    trunks: Vec<TrunkEntry>,
    leaves: Vec<LeafEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrunkEntry {
    file: String,
    base: [i64; 2],
    spine: [[f64; 2]; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct LeafEntry {
    file: String,
    stem: [i64; 2],
}

fn check_anchor(file: &str, x: i64, y: i64, w: u32, h: u32) -> Result<(u32, u32)> {
    if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
        return Err(Error::AnchorOutsideRaster {
            file: file.to_string(),
            x,
            y,
            w,
            h,
        });
    }
    Ok((x as u32, y as u32))
}

/// Load a bank from a directory holding `assets.json` plus the RGBA PNG
/// sprites it names.
pub fn load_asset_bank(dir: &Path) -> Result<AssetBank> {
    let manifest_path = dir.join("assets.json");
    if !manifest_path.exists() {
        return Err(Error::MissingManifest(dir.display().to_string()));
    }
    let bytes = fs::read(&manifest_path)
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    let manifest: Manifest = serde_json::from_slice(&bytes)?;

    let load_png = |file: &str| -> Result<RgbaImage> {
        let path = dir.join(file);
        let img = image::open(&path).map_err(|e| Error::image(path.display().to_string(), e))?;
        Ok(img.to_rgba8())
    };

    let mut trunks = Vec::with_capacity(manifest.trunks.len());
    for entry in &manifest.trunks {
        let img = load_png(&entry.file)?;
        let (w, h) = img.dimensions();
        let base = check_anchor(&entry.file, entry.base[0], entry.base[1], w, h)?;
        for p in entry.spine {
            if p[0] < 0.0 || p[1] < 0.0 || p[0] > w as f64 || p[1] > h as f64 {
                return Err(Error::AnchorOutsideRaster {
                    file: entry.file.clone(),
                    x: p[0].floor() as i64,
                    y: p[1].floor() as i64,
                    w,
                    h,
                });
            }
        }
        trunks.push(TrunkSprite {
            image: img,
            base,
            spine: [
                (entry.spine[0][0], entry.spine[0][1]),
                (entry.spine[1][0], entry.spine[1][1]),
            ],
        });
    }

    let mut leaves = Vec::with_capacity(manifest.leaves.len());
    for entry in &manifest.leaves {
        let img = load_png(&entry.file)?;
        let (w, h) = img.dimensions();
        let stem = check_anchor(&entry.file, entry.stem[0], entry.stem[1], w, h)?;
        leaves.push(LeafSprite { image: img, stem });
    }

    let bank = AssetBank { trunks, leaves };
    bank.validate()?;
    Ok(bank)
}

/// Write a bank to a directory (sprites as `trunk_NN.png` / `leaf_NN.png`
/// plus `assets.json`). Output bytes are deterministic for a given bank.
pub fn save_asset_bank(bank: &AssetBank, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut manifest = Manifest {
        trunks: Vec::new(),
        leaves: Vec::new(),
    };
    for (i, trunk) in bank.trunks.iter().enumerate() {
        let file = format!("trunk_{i:02}.png");
        let path = dir.join(&file);
        trunk
            .image
            .save(&path)
            .map_err(|e| Error::image(path.display().to_string(), e))?;
        manifest.trunks.push(TrunkEntry {
            file,
            base: [trunk.base.0 as i64, trunk.base.1 as i64],
            spine: [
                [trunk.spine[0].0, trunk.spine[0].1],
                [trunk.spine[1].0, trunk.spine[1].1],
            ],
        });
    }
    for (i, leaf) in bank.leaves.iter().enumerate() {
        let file = format!("leaf_{i:02}.png");
        let path = dir.join(&file);
        leaf.image
            .save(&path)
            .map_err(|e| Error::image(path.display().to_string(), e))?;
        manifest.leaves.push(LeafEntry {
            file,
            stem: [leaf.stem.0 as i64, leaf.stem.1 as i64],
        });
    }
    let path = dir.join("assets.json");
    let bytes = serde_json::to_vec_pretty(&manifest)?;
    fs::write(&path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

// ---------------------------------------------------------------------------
// Hermetic synthetic assets
// ---------------------------------------------------------------------------

const SYNTH_TRUNKS: usize = 6;
const SYNTH_LEAVES: usize = 6;

/// Generate a self-contained asset bank (tapered-rectangle trunks,
/// elliptical leaves) so the pipeline runs without any real sprite data.
/// Deterministic for a given seed; every sprite keeps a fully transparent
/// border.
pub fn synthesize_assets(seed: u64) -> AssetBank {
    let mut rng = SplitMix64::new(seed);
    let mut trunks = Vec::with_capacity(SYNTH_TRUNKS);
    for _ in 0..SYNTH_TRUNKS {
        trunks.push(synth_trunk(&mut rng));
    }
    let mut leaves = Vec::with_capacity(SYNTH_LEAVES);
    for _ in 0..SYNTH_LEAVES {
        leaves.push(synth_leaf(&mut rng));
    }
    AssetBank { trunks, leaves }
}

fn jitter(rng: &mut SplitMix64, base: u8, spread: i64) -> u8 {
    let d = rng.range_u64(0, (2 * spread) as u64) as i64 - spread;
    (base as i64 + d).clamp(0, 255) as u8
}

fn synth_trunk(rng: &mut SplitMix64) -> TrunkSprite {
    let trunk_h = rng.range_u32(170, 240);
    let base_w = rng.range_u32(16, 26);
    let top_w = rng.range_u32(5, 9);
    let cw = base_w + 2 * CANVAS_MARGIN as u32;
    let ch = trunk_h + 2 * CANVAS_MARGIN as u32;
    let cx = cw as f64 / 2.0;
    let mut img = RgbaImage::new(cw, ch);
    for r in 0..trunk_h {
        let frac = r as f64 / (trunk_h - 1) as f64;
        let width = top_w as f64 + (base_w as f64 - top_w as f64) * frac;
        let shade = [
            jitter(rng, 94, 12),
            jitter(rng, 66, 10),
            jitter(rng, 40, 8),
        ];
        let y = CANVAS_MARGIN as u32 + r;
        for x in 0..cw {
            let dx = (x as f64 + 0.5 - cx).abs();
            if dx <= width / 2.0 {
                img.put_pixel(x, y, Rgba([shade[0], shade[1], shade[2], 255]));
            }
        }
    }
    let base_y = CANVAS_MARGIN as u32 + trunk_h - 1;
    let base_x = cx.floor() as u32;
    TrunkSprite {
        image: img,
        base: (base_x, base_y),
        spine: [(cx, base_y as f64 + 0.5), (cx, CANVAS_MARGIN as f64 + 0.5)],
    }
}

fn synth_leaf(rng: &mut SplitMix64) -> LeafSprite {
    let rx = rng.range_u32(5, 11) as f64;
    let ry = rng.range_u32(3, 8) as f64;
    let cw = (2.0 * rx) as u32 + 2 * CANVAS_MARGIN as u32 + 1;
    let ch = (2.0 * ry) as u32 + 2 * CANVAS_MARGIN as u32 + 1;
    let cx = cw as f64 / 2.0;
    let cy = ch as f64 / 2.0;
    let color = [
        jitter(rng, 52, 24),
        jitter(rng, 128, 40),
        jitter(rng, 48, 24),
    ];
    let mut img = RgbaImage::new(cw, ch);
    for y in 0..ch {
        for x in 0..cw {
            let nx = (x as f64 + 0.5 - cx) / rx;
            let ny = (y as f64 + 0.5 - cy) / ry;
            if nx * nx + ny * ny <= 1.0 {
                img.put_pixel(x, y, Rgba([color[0], color[1], color[2], 255]));
            }
        }
    }
    // stem anchor: leftmost point of the ellipse
    let stem = ((cx - rx).floor().max(0.0) as u32, cy.floor() as u32);
    LeafSprite { image: img, stem }
}
