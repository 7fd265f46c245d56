//! Library for modeling fragmented occlusion in instance-segmentation data:
//! procedural tree occluders composited onto COCO images with exact mask
//! rewriting, and a region-based detector evaluation protocol with
//! per-occlusion-level precision/recall curves.

pub mod augment;
pub mod coco;
pub mod detector;
pub mod error;
pub mod evalprot;
pub mod geom;
pub mod mask;
pub mod occlusion;
pub mod rng;
pub mod sprite;
pub mod treegen;

pub use augment::{
    augment_dataset, augment_image, composite, filter_person_images, place_tree, AugmentConfig,
    AugmentReport, Placement,
};
pub use coco::{
    mask_to_rle, mask_to_segmentation, parse_dataset, polygon_to_mask, rle_decode_string,
    rle_encode_string, rle_to_mask, segmentation_to_mask, serialize_dataset, validate_dataset,
    Annotation, Attributes, Category, Dataset, ImageRecord, RleCounts, Segmentation,
};
pub use detector::{detect_mock, DetectRequest, Detection, DetectorHandle};
pub use error::{Error, Result};
pub use evalprot::{
    build_regions, default_sweep, evaluate, max_nonoverlap_region, pr_curve,
    sample_background_regions, standard_pr, EvalResult, PRPoint, Region, RegionKind, ScoredBox,
    SamplerConstraints,
};
pub use geom::{box_iou, BBox, GridRect};
pub use mask::{bbox_of_mask, mask_and_not, visible_fraction, BinaryMask};
pub use occlusion::{
    classify_occlusion, ConfusionCounts, LevelThresholds, OcclusionLevel, ALL_LEVELS,
};
pub use treegen::{
    generate_tree, load_asset_bank, save_asset_bank, synthesize_assets, AssetBank, TreeInstance,
    TreeParams,
};
