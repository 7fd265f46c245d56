//! COCO-format dataset parsing, validation and serialization, plus the
//! conversions between segmentation representations (polygons, uncompressed
//! RLE, compressed RLE strings) and raster masks.
//!
//! Unknown JSON keys are preserved verbatim on round trip: real COCO files
//! carry extra keys (info, licenses, vendor fields) that must survive.

pub mod raster;
pub mod rle;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geom::BBox;
use crate::mask::BinaryMask;
use crate::occlusion::OcclusionLevel;

pub use raster::polygon_to_mask;
pub use rle::{mask_to_rle, rle_decode_string, rle_encode_string, rle_to_mask, RleCounts};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    #[serde(default)]
    pub images: Vec<ImageRecord>,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    #[serde(default)]
    pub categories: Vec<Category>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub id: u64,
    pub name: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: BBox,
    #[serde(default)]
    pub area: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segmentation: Option<Segmentation>,
    #[serde(
        default,
        deserialize_with = "deserialize_flag",
        serialize_with = "serialize_flag"
    )]
    pub iscrowd: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<Attributes>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// Occlusion metadata attached by the augmentation pipeline. Extra keys from
/// other tools are carried through untouched.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Attributes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occlusion_level: Option<OcclusionLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visible_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fully_occluded: Option<bool>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// The three segmentation encodings COCO files use. The variant is preserved
/// on round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Segmentation {
    /// List of polygons, each a flat [x0, y0, x1, y1, ...] ring.
    Polygons(Vec<Vec<f64>>),
    /// Compressed RLE string, `{"size": [h, w], "counts": "..."}`.
    CompressedRle { size: [u32; 2], counts: String },
    /// Uncompressed RLE, `{"size": [h, w], "counts": [...]}`.
    Rle { size: [u32; 2], counts: Vec<u32> },
}

fn deserialize_flag<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Flag {
        Bool(bool),
        Int(u8),
    }
    Ok(match Flag::deserialize(d)? {
        Flag::Bool(b) => b,
        Flag::Int(i) => i != 0,
    })
}

fn serialize_flag<S: Serializer>(v: &bool, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u8(u8::from(*v))
}

/// Parse and validate a COCO JSON document.
pub fn parse_dataset(document: &[u8]) -> Result<Dataset> {
    let dataset: Dataset = serde_json::from_slice(document)?;
    validate_dataset(&dataset)?;
    Ok(dataset)
}

/// Serialize a dataset to pretty-printed JSON. Output is deterministic:
/// struct fields in declaration order, preserved unknown keys in sorted
/// order after them.
pub fn serialize_dataset(d: &Dataset) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec_pretty(d)?)
}

/// Check the dataset invariants: unique ids, resolvable references,
/// positive image dimensions, in-bounds bboxes, consistent RLE sizes.
pub fn validate_dataset(d: &Dataset) -> Result<()> {
    let mut images: HashMap<u64, &ImageRecord> = HashMap::with_capacity(d.images.len());
    for img in &d.images {
        if img.width == 0 || img.height == 0 {
            return Err(Error::BadImageDims(img.id));
        }
        if images.insert(img.id, img).is_some() {
            return Err(Error::DuplicateImageId(img.id));
        }
    }
    let mut categories: HashSet<u64> = HashSet::with_capacity(d.categories.len());
    for cat in &d.categories {
        if !categories.insert(cat.id) {
            return Err(Error::DuplicateCategoryId(cat.id));
        }
    }
    let mut ann_ids: HashSet<u64> = HashSet::with_capacity(d.annotations.len());
    for ann in &d.annotations {
        if !ann_ids.insert(ann.id) {
            return Err(Error::DuplicateAnnotationId(ann.id));
        }
        let img = images.get(&ann.image_id).ok_or(Error::MissingImageRef {
            annotation_id: ann.id,
            image_id: ann.image_id,
        })?;
        if !categories.contains(&ann.category_id) {
            return Err(Error::MissingCategoryRef {
                annotation_id: ann.id,
                category_id: ann.category_id,
            });
        }
        let b = &ann.bbox;
        if b.w < 0.0
            || b.h < 0.0
            || b.x < 0.0
            || b.y < 0.0
            || b.right() > img.width as f64
            || b.bottom() > img.height as f64
        {
            return Err(Error::BboxOutOfBounds {
                annotation_id: ann.id,
                x: b.x,
                y: b.y,
                w: b.w,
                h: b.h,
                iw: img.width,
                ih: img.height,
            });
        }
        match &ann.segmentation {
            Some(Segmentation::Rle { size, .. }) | Some(Segmentation::CompressedRle { size, .. })
                if size[0] != img.height || size[1] != img.width =>
            {
                return Err(Error::SegmentationSizeMismatch {
                    annotation_id: ann.id,
                    sh: size[0],
                    sw: size[1],
                    iw: img.width,
                    ih: img.height,
                });
            }
            _ => {}
        }
    }
    Ok(())
}

/// Rasterize any segmentation representation to a width x height mask.
pub fn segmentation_to_mask(seg: &Segmentation, width: u32, height: u32) -> Result<BinaryMask> {
    match seg {
        Segmentation::Polygons(polys) => polygon_to_mask(polys, width, height),
        Segmentation::Rle { size, counts } => {
            check_seg_size(*size, width, height)?;
            rle_to_mask(&RleCounts {
                height: size[0],
                width: size[1],
                counts: counts.clone(),
            })
        }
        Segmentation::CompressedRle { size, counts } => {
            check_seg_size(*size, width, height)?;
            let r = rle_decode_string(counts, size[0], size[1])?;
            rle_to_mask(&r)
        }
    }
}

/// Encode a mask as a compressed-RLE segmentation, the representation this
/// toolkit emits for rewritten masks.
pub fn mask_to_segmentation(m: &BinaryMask) -> Segmentation {
    let r = mask_to_rle(m);
    Segmentation::CompressedRle {
        size: [r.height, r.width],
        counts: rle_encode_string(&r),
    }
}

fn check_seg_size(size: [u32; 2], width: u32, height: u32) -> Result<()> {
    if size[0] != height || size[1] != width {
        return Err(Error::InvalidInput(format!(
            "segmentation size [{}, {}] does not match target {}x{}",
            size[0], size[1], width, height
        )));
    }
    Ok(())
}
