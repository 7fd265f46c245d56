//! Region-based detection evaluation.
//!
//! Instead of IoU matching (which breaks down under fragmented occlusion),
//! every ground-truth box gets the maximum image region that overlaps no
//! other ground-truth box; the region crop goes to the detector and counts
//! TP if anything is detected, FN otherwise. Background regions (zero
//! overlap with any ground truth) supply FP/TN. Sweeping the score
//! threshold yields per-occlusion-level precision/recall curves. The
//! classic IoU-threshold protocol is included for contrast.

pub mod files;

use std::collections::HashMap;
use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::augment::category_id;
use crate::coco::Dataset;
use crate::detector::{DetectRequest, DetectorHandle};
use crate::error::{Error, Result};
use crate::geom::{BBox, GridRect};
use crate::occlusion::{ConfusionCounts, OcclusionLevel, ALL_LEVELS};
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Positive,
    Background,
}

/// An evaluation crop: positive (derived from one ground-truth box) or
/// background. `overlap_flag` marks positive regions whose seed box was
/// itself overlapped by other ground truth, which the maximal-region
/// computation had to ignore.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub image_id: u64,
    pub rect: GridRect,
    pub kind: RegionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occlusion_level: Option<OcclusionLevel>,
    #[serde(default)]
    pub overlap_flag: bool,
}

impl Region {
    pub fn positive(
        image_id: u64,
        rect: GridRect,
        annotation_id: u64,
        level: OcclusionLevel,
        overlap_flag: bool,
    ) -> Self {
        Region {
            image_id,
            rect,
            kind: RegionKind::Positive,
            annotation_id: Some(annotation_id),
            occlusion_level: Some(level),
            overlap_flag,
        }
    }

    pub fn background(image_id: u64, rect: GridRect) -> Self {
        Region {
            image_id,
            rect,
            kind: RegionKind::Background,
            annotation_id: None,
            occlusion_level: None,
            overlap_flag: false,
        }
    }
}

// ---------------------------------------------------------------------------
// Maximal non-overlap region
// ---------------------------------------------------------------------------

fn rect_better(a: &GridRect, b: &GridRect) -> bool {
    // max area, then greater width, then smaller left, then smaller top
    (a.area(), a.w, std::cmp::Reverse(a.x), std::cmp::Reverse(a.y))
        > (b.area(), b.w, std::cmp::Reverse(b.x), std::cmp::Reverse(b.y))
}

/// The maximum-area axis-aligned rectangle that contains `seed`, stays
/// inside the image, and intersects none of the obstacles. Obstacles that
/// themselves overlap the seed are dropped from the constraint set and
/// reported through the returned flag.
///
/// Exact enumeration: candidate left edges are 0 plus obstacle right edges
/// at or left of the seed; candidate right edges are the image width plus
/// obstacle left edges at or right of the seed. For each feasible pair the
/// top/bottom limits follow from the obstacles horizontally overlapping the
/// span. O(n^3) worst case.
pub fn max_nonoverlap_region(
    seed: GridRect,
    obstacles: &[GridRect],
    image_w: u32,
    image_h: u32,
) -> Result<(GridRect, bool)> {
    if seed.right() > image_w || seed.bottom() > image_h {
        return Err(Error::SeedOutsideImage(
            seed.x, seed.y, seed.w, seed.h, image_w, image_h,
        ));
    }
    let mut flagged = false;
    let mut constraints: Vec<GridRect> = Vec::with_capacity(obstacles.len());
    for o in obstacles {
        if o.area() == 0 {
            continue;
        }
        if o.intersects(&seed) {
            flagged = true;
        } else {
            constraints.push(*o);
        }
    }

    let mut lefts = vec![0u32];
    let mut rights = vec![image_w];
    for o in &constraints {
        if o.right() <= seed.x {
            lefts.push(o.right());
        }
        if o.x >= seed.right() && o.x <= image_w {
            rights.push(o.x);
        }
    }
    lefts.sort_unstable();
    lefts.dedup();
    rights.sort_unstable();
    rights.dedup();

    let mut best: Option<GridRect> = None;
    for &left in &lefts {
        for &right in &rights {
            if right <= left {
                continue;
            }
            let mut top = 0u32;
            let mut bottom = image_h;
            let mut feasible = true;
            for o in &constraints {
                if o.x < right && o.right() > left {
                    if o.bottom() <= seed.y {
                        top = top.max(o.bottom());
                    } else if o.y >= seed.bottom() {
                        bottom = bottom.min(o.y);
                    } else {
                        // obstacle crosses the seed's row span: this
                        // horizontal span cannot avoid it
                        feasible = false;
                        break;
                    }
                }
            }
            if !feasible {
                continue;
            }
            let rect = GridRect::new(left, top, right - left, bottom - top);
            if best.map_or(true, |b| rect_better(&rect, &b)) {
                best = Some(rect);
            }
        }
    }
    Ok((
        best.expect("a feasible span always exists around the seed"),
        flagged,
    ))
}

// ---------------------------------------------------------------------------
// Background-region sampling
// ---------------------------------------------------------------------------

fn default_min_side() -> u32 {
    16
}
fn default_aspect_range() -> (f64, f64) {
    (0.5, 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConstraints {
    #[serde(default = "default_min_side")]
    pub min_side: u32,
    /// Height / width ratio range.
    #[serde(default = "default_aspect_range")]
    pub aspect_range: (f64, f64),
}

impl Default for SamplerConstraints {
    fn default() -> Self {
        SamplerConstraints {
            min_side: default_min_side(),
            aspect_range: default_aspect_range(),
        }
    }
}

impl SamplerConstraints {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.aspect_range;
        if self.min_side == 0 || !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi) {
            return Err(Error::BadParamRange("sampler constraints"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerOutcome {
    pub rects: Vec<GridRect>,
    pub attempts: u64,
    /// Set when the acceptance budget (n x 1000 attempts) ran out before
    /// `n` regions were found.
    pub exhausted: bool,
}

/// Rejection-sample up to `n` rectangles with zero intersection with every
/// ground-truth box: width log-uniform in [min_side, image_w], aspect
/// uniform, position uniform on the grid. Deterministic for a given seed.
pub fn sample_background_regions(
    gt_boxes: &[BBox],
    image_w: u32,
    image_h: u32,
    n: usize,
    constraints: &SamplerConstraints,
    seed: u64,
) -> SamplerOutcome {
    let mut rng = SplitMix64::new(seed);
    let mut rects = Vec::with_capacity(n);
    let mut attempts: u64 = 0;
    let budget = n as u64 * 1000;
    let min_side = constraints.min_side;
    if min_side > image_w || min_side > image_h {
        return SamplerOutcome {
            rects,
            attempts,
            exhausted: n > 0,
        };
    }
    let ln_lo = (min_side as f64).ln();
    let ln_hi = (image_w as f64).ln();
    while rects.len() < n && attempts < budget {
        attempts += 1;
        let w_f = rng.uniform(ln_lo, ln_hi).exp();
        let aspect = rng.uniform(constraints.aspect_range.0, constraints.aspect_range.1);
        let w = (w_f.round() as u32).clamp(min_side, image_w);
        let h = (w_f * aspect).round() as u32;
        if h < min_side || h > image_h {
            continue;
        }
        let x = rng.range_u32(0, image_w - w);
        let y = rng.range_u32(0, image_h - h);
        let rect = GridRect::new(x, y, w, h);
        let candidate = rect.to_bbox();
        if gt_boxes
            .iter()
            .all(|gt| candidate.intersection_area(gt) == 0.0)
        {
            rects.push(rect);
        }
    }
    let exhausted = rects.len() < n;
    SamplerOutcome {
        rects,
        attempts,
        exhausted,
    }
}

// ---------------------------------------------------------------------------
// Region extraction over a dataset
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionsReport {
    pub positives: u64,
    pub backgrounds: u64,
    pub flagged: u64,
    /// Person annotations skipped because their bbox has zero area (for
    /// example fully occluded ones).
    pub degenerate_skipped: u64,
    /// Images whose background sampler ran out of attempts.
    pub exhausted_images: Vec<u64>,
}

/// Build the full region set for a dataset: one positive region per person
/// annotation (its maximal non-overlap rectangle against the other person
/// boxes in the image) plus `n_background_per_image` sampled background
/// regions per image, seeded per image from the master seed.
pub fn build_regions(
    dataset: &Dataset,
    person_category: &str,
    n_background_per_image: usize,
    constraints: &SamplerConstraints,
    master_seed: u64,
) -> Result<(Vec<Region>, RegionsReport)> {
    constraints.validate()?;
    let person_id = category_id(dataset, person_category)?;
    let mut by_image: HashMap<u64, Vec<&crate::coco::Annotation>> = HashMap::new();
    for ann in &dataset.annotations {
        if ann.category_id == person_id {
            by_image.entry(ann.image_id).or_default().push(ann);
        }
    }

    let mut regions = Vec::new();
    let mut report = RegionsReport::default();
    for img in &dataset.images {
        let anns = by_image.get(&img.id).map_or(&[][..], |v| v.as_slice());
        let grid: Vec<GridRect> = anns
            .iter()
            .map(|a| GridRect::covering(&a.bbox, img.width, img.height))
            .collect();
        for (i, ann) in anns.iter().enumerate() {
            if grid[i].area() == 0 {
                report.degenerate_skipped += 1;
                continue;
            }
            let obstacles: Vec<GridRect> = grid
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, r)| *r)
                .collect();
            let (rect, flagged) =
                max_nonoverlap_region(grid[i], &obstacles, img.width, img.height)?;
            let level = ann
                .attributes
                .as_ref()
                .and_then(|a| a.occlusion_level)
                .unwrap_or(OcclusionLevel::L0);
            if flagged {
                report.flagged += 1;
            }
            report.positives += 1;
            regions.push(Region::positive(img.id, rect, ann.id, level, flagged));
        }
        if n_background_per_image > 0 {
            let gt: Vec<BBox> = anns.iter().map(|a| a.bbox).collect();
            let outcome = sample_background_regions(
                &gt,
                img.width,
                img.height,
                n_background_per_image,
                constraints,
                derive_seed(master_seed, img.id),
            );
            if outcome.exhausted {
                report.exhausted_images.push(img.id);
            }
            report.backgrounds += outcome.rects.len() as u64;
            regions.extend(outcome.rects.into_iter().map(|r| Region::background(img.id, r)));
        }
    }
    Ok((regions, report))
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// One point of a precision/recall curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PRPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Confusion counts per (occlusion level, threshold), plus the region
/// totals that make the partition invariants checkable: tp + fn at a level
/// always equals that level's positive-region count and fp + tn always
/// equals the background-region count.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub thresholds: Vec<f64>,
    counts: [Vec<ConfusionCounts>; 4],
    pub positives_per_level: [u64; 4],
    pub n_background: u64,
}

impl EvalResult {
    pub fn new(thresholds: Vec<f64>) -> Self {
        let counts = std::array::from_fn(|_| vec![ConfusionCounts::default(); thresholds.len()]);
        EvalResult {
            thresholds,
            counts,
            positives_per_level: [0; 4],
            n_background: 0,
        }
    }

    pub fn confusion(&self, level: OcclusionLevel, threshold_index: usize) -> ConfusionCounts {
        self.counts[level.index()][threshold_index]
    }

    /// Record a positive region of `level` whose crop produced a best
    /// person score of `score` (None when nothing was detected).
    pub fn record_positive(&mut self, level: OcclusionLevel, score: Option<f64>) {
        self.positives_per_level[level.index()] += 1;
        let row = &mut self.counts[level.index()];
        for (i, &tau) in self.thresholds.iter().enumerate() {
            if score.is_some_and(|s| s >= tau) {
                row[i].tp += 1;
            } else {
                row[i].fn_ += 1;
            }
        }
    }

    /// Record a background region; backgrounds enter every level's FP/TN
    /// denominator.
    pub fn record_background(&mut self, score: Option<f64>) {
        self.n_background += 1;
        for level in ALL_LEVELS {
            let row = &mut self.counts[level.index()];
            for (i, &tau) in self.thresholds.iter().enumerate() {
                if score.is_some_and(|s| s >= tau) {
                    row[i].fp += 1;
                } else {
                    row[i].tn += 1;
                }
            }
        }
    }
}

/// The default score-threshold sweep: 0.00, 0.01, ..., 1.00.
pub fn default_sweep() -> Vec<f64> {
    sweep_with_step(0.01)
}

pub fn sweep_with_step(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round().max(1.0) as usize;
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Crop every region from its image, submit it to the detector, and
/// accumulate confusion counts over the threshold sweep. A positive region
/// is TP at threshold t when any returned person detection scores >= t;
/// a background region is FP under the same condition.
pub fn evaluate(
    dataset: &Dataset,
    images_root: &Path,
    regions: &[Region],
    detector: &mut DetectorHandle,
    person_category: &str,
    thresholds: Vec<f64>,
) -> Result<EvalResult> {
    let records: HashMap<u64, &crate::coco::ImageRecord> =
        dataset.images.iter().map(|img| (img.id, img)).collect();
    let mut result = EvalResult::new(thresholds);
    let mut cache: Option<(u64, RgbImage)> = None;
    for (index, region) in regions.iter().enumerate() {
        let record = records
            .get(&region.image_id)
            .ok_or(Error::RegionMissingImage(region.image_id))?;
        if cache.as_ref().map(|(id, _)| *id) != Some(region.image_id) {
            let path = images_root.join(&record.file_name);
            let img = image::open(&path)
                .map_err(|e| Error::image(path.display().to_string(), e))?
                .to_rgb8();
            cache = Some((region.image_id, img));
        }
        let (_, image) = cache.as_ref().expect("cache was just filled");
        let rect = region.rect;
        if rect.area() == 0 || rect.right() > image.width() || rect.bottom() > image.height() {
            return Err(Error::InvalidInput(format!(
                "region {index} rect [{}, {}, {}, {}] does not fit image {} ({}x{})",
                rect.x,
                rect.y,
                rect.w,
                rect.h,
                region.image_id,
                image.width(),
                image.height()
            )));
        }
        let crop = image::imageops::crop_imm(image, rect.x, rect.y, rect.w, rect.h).to_image();
        let detections = detector.detect(&DetectRequest {
            id: index as u64,
            image_id: region.image_id,
            rect,
            crop: &crop,
        })?;
        let best = detections
            .iter()
            .filter(|d| d.category == person_category)
            .map(|d| d.score)
            .fold(None, |acc: Option<f64>, s| {
                Some(acc.map_or(s, |a| a.max(s)))
            });
        match region.kind {
            RegionKind::Positive => {
                let level = region.occlusion_level.unwrap_or(OcclusionLevel::L0);
                result.record_positive(level, best);
            }
            RegionKind::Background => result.record_background(best),
        }
    }
    Ok(result)
}

/// Precision/recall curve for one level, one point per threshold. Levels
/// without positive regions have no recall and are reported as an error so
/// callers can warn and omit them.
pub fn pr_curve(result: &EvalResult, level: OcclusionLevel) -> Result<Vec<PRPoint>> {
    if result.positives_per_level[level.index()] == 0 {
        return Err(Error::NoPositiveRegions(level.name()));
    }
    Ok(result
        .thresholds
        .iter()
        .enumerate()
        .map(|(i, &tau)| {
            let c = result.confusion(level, i);
            PRPoint {
                threshold: tau,
                precision: c.precision(),
                recall: c.recall().expect("level has positives"),
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Standard IoU-threshold protocol (baseline for contrast)
// ---------------------------------------------------------------------------

/// A detection for the standard protocol: box plus confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    pub bbox: BBox,
    pub score: f64,
}

/// Classic greedy matching: per image, detections in descending score order
/// each claim the unmatched ground truth with the highest IoU at or above
/// `iou_threshold`. Unmatched detections are FP, unmatched ground truths
/// FN. The PR curve sweeps the score threshold.
pub fn standard_pr(
    per_image: &[(Vec<ScoredBox>, Vec<BBox>)],
    iou_threshold: f64,
    thresholds: &[f64],
) -> Vec<PRPoint> {
    let mut matched_flags: Vec<(f64, bool)> = Vec::new();
    let mut total_gt: u64 = 0;
    for (detections, gts) in per_image {
        total_gt += gts.len() as u64;
        let mut order: Vec<usize> = (0..detections.len()).collect();
        order.sort_by(|&a, &b| {
            detections[b]
                .score
                .partial_cmp(&detections[a].score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut gt_taken = vec![false; gts.len()];
        for &di in &order {
            let det = &detections[di];
            let mut best: Option<(usize, f64)> = None;
            for (gi, gt) in gts.iter().enumerate() {
                if gt_taken[gi] {
                    continue;
                }
                let iou = crate::geom::box_iou(&det.bbox, gt);
                if iou >= iou_threshold && best.map_or(true, |(_, b)| iou > b) {
                    best = Some((gi, iou));
                }
            }
            if let Some((gi, _)) = best {
                gt_taken[gi] = true;
                matched_flags.push((det.score, true));
            } else {
                matched_flags.push((det.score, false));
            }
        }
    }

    thresholds
        .iter()
        .map(|&tau| {
            let mut tp = 0u64;
            let mut fp = 0u64;
            for &(score, matched) in &matched_flags {
                if score >= tau {
                    if matched {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            let fn_ = total_gt - tp;
            let precision = if tp + fp == 0 {
                1.0
            } else {
                tp as f64 / (tp + fp) as f64
            };
            let recall = if tp + fn_ == 0 {
                1.0
            } else {
                tp as f64 / (tp + fn_) as f64
            };
            PRPoint {
                threshold: tau,
                precision,
                recall,
            }
        })
        .collect()
}
