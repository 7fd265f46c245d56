//! Dataset augmentation: filter to images containing persons, composite
//! generated trees in front of them, rewrite every person mask by
//! multiplying it with the occluders' negative mask, recompute bboxes and
//! areas from the surviving pixels, and attach occlusion attributes.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coco::{
    mask_to_segmentation, segmentation_to_mask, serialize_dataset, Annotation, Dataset,
};
use crate::error::{Error, Result};
use crate::geom::BBox;
use crate::mask::{bbox_of_mask, mask_and_not, visible_fraction, BinaryMask};
use crate::occlusion::{classify_occlusion, LevelThresholds, OcclusionLevel};
use crate::rng::{derive_seed, SplitMix64};
use crate::sprite::{composite_over_rgb, SpriteTransform};
use crate::treegen::{generate_tree, AssetBank, TreeInstance, TreeParams};

/// Annotations with less than this fraction of their mask surviving are
/// flagged fully occluded (kept, never deleted).
pub const FULLY_OCCLUDED_VISIBLE_FRACTION: f64 = 0.01;

/// Where one tree lands: horizontal anchor of the tree base on the bottom
/// image edge, rotation about the base anchor, and uniform scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub x: f64,
    pub angle_deg: f64,
    pub scale: f64,
}

fn default_trees_per_image() -> (u32, u32) {
    (1, 4)
}
fn default_rotation_range() -> (f64, f64) {
    (-20.0, 20.0)
}
fn default_scale_factor_range() -> (f64, f64) {
    (0.9, 1.2)
}
fn default_person_category() -> String {
    "person".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    /// Number of trees per image, inclusive range.
    #[serde(default = "default_trees_per_image")]
    pub trees_per_image: (u32, u32),
    /// Tree rotation range in degrees; must be a symmetric interval.
    #[serde(default = "default_rotation_range")]
    pub rotation_range_deg: (f64, f64),
    /// Scaled tree height = image height x a factor drawn from this range.
    #[serde(default = "default_scale_factor_range")]
    pub scale_factor_range: (f64, f64),
    #[serde(default = "default_person_category")]
    pub person_category: String,
    /// Seeds are always explicit; there is no wall-clock default.
    pub master_seed: u64,
    #[serde(default)]
    pub thresholds: LevelThresholds,
    #[serde(default)]
    pub tree_params: TreeParams,
}

impl AugmentConfig {
    pub fn new(master_seed: u64) -> Self {
        AugmentConfig {
            trees_per_image: default_trees_per_image(),
            rotation_range_deg: default_rotation_range(),
            scale_factor_range: default_scale_factor_range(),
            person_category: default_person_category(),
            master_seed,
            thresholds: LevelThresholds::default(),
            tree_params: TreeParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees_per_image.0 > self.trees_per_image.1 {
            return Err(Error::BadParamRange("trees_per_image"));
        }
        let (lo, hi) = self.rotation_range_deg;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo == -hi) {
            return Err(Error::BadParamRange(
                "rotation_range_deg (must be a symmetric interval)",
            ));
        }
        let (slo, shi) = self.scale_factor_range;
        if !(slo.is_finite() && shi.is_finite() && 0.0 < slo && slo <= shi) {
            return Err(Error::BadParamRange("scale_factor_range"));
        }
        self.thresholds.validate()?;
        self.tree_params.validate()
    }
}

/// Per-level annotation counts, keyed L0..L3 in reports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCounts {
    #[serde(rename = "L0")]
    pub l0: u64,
    #[serde(rename = "L1")]
    pub l1: u64,
    #[serde(rename = "L2")]
    pub l2: u64,
    #[serde(rename = "L3")]
    pub l3: u64,
}

impl LevelCounts {
    pub fn add(&mut self, level: OcclusionLevel) {
        match level {
            OcclusionLevel::L0 => self.l0 += 1,
            OcclusionLevel::L1 => self.l1 += 1,
            OcclusionLevel::L2 => self.l2 += 1,
            OcclusionLevel::L3 => self.l3 += 1,
        }
    }

    pub fn get(&self, level: OcclusionLevel) -> u64 {
        match level {
            OcclusionLevel::L0 => self.l0,
            OcclusionLevel::L1 => self.l1,
            OcclusionLevel::L2 => self.l2,
            OcclusionLevel::L3 => self.l3,
        }
    }

    pub fn total(&self) -> u64 {
        self.l0 + self.l1 + self.l2 + self.l3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedImage {
    pub image_id: u64,
    pub file_name: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub images_processed: u64,
    pub images_skipped_no_person: u64,
    /// Person annotations passed through untouched because they carry no
    /// usable segmentation.
    pub annotations_without_segmentation: u64,
    pub level_counts: LevelCounts,
    pub fully_occluded: u64,
    /// Seed actually used for each processed image.
    pub per_image_seeds: BTreeMap<u64, u64>,
    pub skipped_images: Vec<SkippedImage>,
}

/// Keep exactly the images with at least one annotation of `category`, plus
/// all their annotations. Categories and extra keys pass through.
pub fn filter_person_images(d: &Dataset, category: &str) -> Result<Dataset> {
    let cat_id = category_id(d, category)?;
    let keep: std::collections::HashSet<u64> = d
        .annotations
        .iter()
        .filter(|a| a.category_id == cat_id)
        .map(|a| a.image_id)
        .collect();
    Ok(Dataset {
        images: d
            .images
            .iter()
            .filter(|img| keep.contains(&img.id))
            .cloned()
            .collect(),
        annotations: d
            .annotations
            .iter()
            .filter(|a| keep.contains(&a.image_id))
            .cloned()
            .collect(),
        categories: d.categories.clone(),
        extra: d.extra.clone(),
    })
}

pub fn category_id(d: &Dataset, name: &str) -> Result<u64> {
    d.categories
        .iter()
        .find(|c| c.name == name)
        .map(|c| c.id)
        .ok_or_else(|| Error::UnknownCategory(name.to_string()))
}

/// Draw a placement for one tree. Draw order: x uniform over [0, image_w),
/// angle uniform over the rotation range, then a height factor uniform over
/// the scale policy range; scale makes the tree raster `factor x image
/// height` tall.
pub fn place_tree(
    tree: &TreeInstance,
    image_w: u32,
    image_h: u32,
    cfg: &AugmentConfig,
    seed: u64,
) -> Placement {
    let mut rng = SplitMix64::new(seed);
    let x = rng.uniform(0.0, image_w as f64);
    let angle_deg = rng.uniform(cfg.rotation_range_deg.0, cfg.rotation_range_deg.1);
    let factor = rng.uniform(cfg.scale_factor_range.0, cfg.scale_factor_range.1);
    let scale = image_h as f64 * factor / tree.raster.height() as f64;
    Placement {
        x,
        angle_deg,
        scale,
    }
}

/// Composite one tree: rotated about its base anchor, scaled, base anchored
/// at (x, image height) on the bottom edge. Returns the occluder mask in
/// image coordinates; pixels outside it are untouched.
pub fn composite(image: &mut RgbImage, tree: &TreeInstance, p: &Placement) -> BinaryMask {
    let t = SpriteTransform {
        pivot: tree.base_anchor,
        target: (p.x, image.height() as f64),
        angle_deg: p.angle_deg,
        scale: p.scale,
    };
    composite_over_rgb(image, &tree.raster, &tree.occluder_mask, &t)
}

/// One person annotation after occlusion: mask AND NOT occluder, tight bbox
/// and popcount area recomputed, attributes attached. `None` segmentation
/// (or one that rasterizes empty) leaves the annotation untouched and is
/// reported via the `updated` flag.
pub struct AnnotationOutcome {
    pub annotation: Annotation,
    /// Set when occlusion attributes were computed and attached.
    pub updated: bool,
    pub level: Option<OcclusionLevel>,
    pub fully_occluded: bool,
}

pub fn apply_occlusion_to_annotation(
    ann: &Annotation,
    occluder: &BinaryMask,
    thresholds: &LevelThresholds,
) -> Result<AnnotationOutcome> {
    let untouched = |a: &Annotation| AnnotationOutcome {
        annotation: a.clone(),
        updated: false,
        level: None,
        fully_occluded: false,
    };
    let Some(seg) = &ann.segmentation else {
        return Ok(untouched(ann));
    };
    let source = match segmentation_to_mask(seg, occluder.width(), occluder.height()) {
        Ok(m) if !m.is_empty() => m,
        // unusable segmentation: empty raster or malformed polygon
        _ => return Ok(untouched(ann)),
    };
    let survived = mask_and_not(&source, occluder)?;
    let vf = visible_fraction(&source, &survived)?;
    let level = classify_occlusion(1.0 - vf, thresholds);
    let fully = vf < FULLY_OCCLUDED_VISIBLE_FRACTION;

    let mut updated = ann.clone();
    updated.bbox = bbox_of_mask(&survived).unwrap_or(BBox::new(0.0, 0.0, 0.0, 0.0));
    updated.area = survived.area() as f64;
    updated.segmentation = Some(mask_to_segmentation(&survived));
    let mut attrs = ann.attributes.clone().unwrap_or_default();
    attrs.occlusion_level = Some(level);
    attrs.visible_fraction = Some(vf);
    attrs.fully_occluded = Some(fully);
    updated.attributes = Some(attrs);

    Ok(AnnotationOutcome {
        annotation: updated,
        updated: true,
        level: Some(level),
        fully_occluded: fully,
    })
}

/// Everything produced for one image.
pub struct AugmentedImage {
    pub image: RgbImage,
    pub annotations: Vec<Annotation>,
    pub occluder: BinaryMask,
    /// Ids of person annotations passed through without occlusion
    /// attributes (no usable segmentation).
    pub missing_segmentation: Vec<u64>,
    pub level_counts: LevelCounts,
    pub fully_occluded: u64,
}

/// Augment one image. Draw order from the image seed: tree count, then per
/// tree a generation seed and a placement seed (two `next_u64` draws).
pub fn augment_image(
    image: &RgbImage,
    annotations: &[Annotation],
    person_category_id: u64,
    bank: &AssetBank,
    cfg: &AugmentConfig,
    image_seed: u64,
) -> Result<AugmentedImage> {
    let (w, h) = image.dimensions();
    let mut rng = SplitMix64::new(image_seed);
    let count = rng.range_u32(cfg.trees_per_image.0, cfg.trees_per_image.1);

    let mut working = image.clone();
    let mut combined = BinaryMask::new(w, h);
    for _ in 0..count {
        let tree_seed = rng.next_u64();
        let place_seed = rng.next_u64();
        let tree = generate_tree(bank, &cfg.tree_params, tree_seed);
        let placement = place_tree(&tree, w, h, cfg, place_seed);
        let mask = composite(&mut working, &tree, &placement);
        combined.or_assign(&mask)?;
    }

    let mut out_annotations = Vec::with_capacity(annotations.len());
    let mut missing = Vec::new();
    let mut level_counts = LevelCounts::default();
    let mut fully = 0;
    for ann in annotations {
        if ann.category_id != person_category_id {
            out_annotations.push(ann.clone());
            continue;
        }
        let outcome = apply_occlusion_to_annotation(ann, &combined, &cfg.thresholds)?;
        if outcome.updated {
            level_counts.add(outcome.level.expect("updated annotations carry a level"));
            if outcome.fully_occluded {
                fully += 1;
            }
        } else {
            missing.push(ann.id);
        }
        out_annotations.push(outcome.annotation);
    }

    Ok(AugmentedImage {
        image: working,
        annotations: out_annotations,
        occluder: combined,
        missing_segmentation: missing,
        level_counts,
        fully_occluded: fully,
    })
}

enum ImageOutcome {
    Processed {
        index: usize,
        seed: u64,
        annotations: Vec<Annotation>,
        missing: u64,
        level_counts: LevelCounts,
        fully: u64,
    },
    Skipped(SkippedImage),
}

/// Run the full augmentation over a dataset, writing `images/` (PNG),
/// `annotations.json` and `report.json` under `out_dir`.
///
/// Each image gets seed `derive_seed(master_seed, image_id)`, so outputs are
/// a function of (dataset, config) only, independent of worker count and
/// processing order. `workers` = 0 uses all cores.
pub fn augment_dataset(
    d: &Dataset,
    bank: &AssetBank,
    cfg: &AugmentConfig,
    images_root: &Path,
    out_dir: &Path,
    workers: usize,
) -> Result<AugmentReport> {
    cfg.validate()?;
    bank.validate()?;
    let person_id = category_id(d, &cfg.person_category)?;
    let filtered = filter_person_images(d, &cfg.person_category)?;
    let skipped_no_person = (d.images.len() - filtered.images.len()) as u64;

    let images_out = out_dir.join("images");
    fs::create_dir_all(&images_out).map_err(|e| Error::io(images_out.display().to_string(), e))?;

    let mut by_image: HashMap<u64, Vec<&Annotation>> = HashMap::new();
    for ann in &filtered.annotations {
        by_image.entry(ann.image_id).or_default().push(ann);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidInput(format!("failed to build worker pool: {e}")))?;

    let outcomes: Vec<Result<ImageOutcome>> = pool.install(|| {
        filtered
            .images
            .par_iter()
            .enumerate()
            .map(|(index, record)| {
                let path = images_root.join(&record.file_name);
                let loaded = match image::open(&path) {
                    Ok(img) => img.to_rgb8(),
                    Err(e) => {
                        return Ok(ImageOutcome::Skipped(SkippedImage {
                            image_id: record.id,
                            file_name: record.file_name.clone(),
                            reason: format!("unreadable image: {e}"),
                        }))
                    }
                };
                if loaded.dimensions() != (record.width, record.height) {
                    return Ok(ImageOutcome::Skipped(SkippedImage {
                        image_id: record.id,
                        file_name: record.file_name.clone(),
                        reason: format!(
                            "file is {}x{} but the record says {}x{}",
                            loaded.width(),
                            loaded.height(),
                            record.width,
                            record.height
                        ),
                    }));
                }
                let seed = derive_seed(cfg.master_seed, record.id);
                let anns: Vec<Annotation> = by_image
                    .get(&record.id)
                    .map(|v| v.iter().map(|a| (*a).clone()).collect())
                    .unwrap_or_default();
                let result = augment_image(&loaded, &anns, person_id, bank, cfg, seed)?;

                let out_path = images_out.join(&record.file_name);
                if let Some(parent) = out_path.parent() {
                    fs::create_dir_all(parent)
                        .map_err(|e| Error::io(parent.display().to_string(), e))?;
                }
                result
                    .image
                    .save_with_format(&out_path, image::ImageFormat::Png)
                    .map_err(|e| Error::image(out_path.display().to_string(), e))?;

                Ok(ImageOutcome::Processed {
                    index,
                    seed,
                    annotations: result.annotations,
                    missing: result.missing_segmentation.len() as u64,
                    level_counts: result.level_counts,
                    fully: result.fully_occluded,
                })
            })
            .collect()
    });

    let mut report = AugmentReport {
        images_skipped_no_person: skipped_no_person,
        ..AugmentReport::default()
    };
    let mut out_images = Vec::new();
    let mut out_annotations = Vec::new();
    for outcome in outcomes {
        match outcome? {
            ImageOutcome::Processed {
                index,
                seed,
                annotations,
                missing,
                level_counts,
                fully,
            } => {
                let record = &filtered.images[index];
                report.images_processed += 1;
                report.per_image_seeds.insert(record.id, seed);
                report.annotations_without_segmentation += missing;
                report.fully_occluded += fully;
                report.level_counts.l0 += level_counts.l0;
                report.level_counts.l1 += level_counts.l1;
                report.level_counts.l2 += level_counts.l2;
                report.level_counts.l3 += level_counts.l3;
                out_images.push(record.clone());
                out_annotations.extend(annotations);
            }
            ImageOutcome::Skipped(skip) => report.skipped_images.push(skip),
        }
    }

    let out_dataset = Dataset {
        images: out_images,
        annotations: out_annotations,
        categories: filtered.categories.clone(),
        extra: filtered.extra.clone(),
    };
    let json_path = out_dir.join("annotations.json");
    fs::write(&json_path, serialize_dataset(&out_dataset)?)
        .map_err(|e| Error::io(json_path.display().to_string(), e))?;
    let report_path = out_dir.join("report.json");
    fs::write(&report_path, serde_json::to_vec_pretty(&report)?)
        .map_err(|e| Error::io(report_path.display().to_string(), e))?;
    Ok(report)
}
