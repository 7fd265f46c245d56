use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed JSON document: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: String,
        source: image::ImageError,
    },

    #[error("duplicate image id {0}")]
    DuplicateImageId(u64),

    #[error("duplicate annotation id {0}")]
    DuplicateAnnotationId(u64),

    #[error("duplicate category id {0}")]
    DuplicateCategoryId(u64),

    #[error("annotation {annotation_id} references missing image id {image_id}")]
    MissingImageRef { annotation_id: u64, image_id: u64 },

    #[error("annotation {annotation_id} references missing category id {category_id}")]
    MissingCategoryRef {
        annotation_id: u64,
        category_id: u64,
    },

    #[error("image {0} has non-positive dimensions")]
    BadImageDims(u64),

    #[error("annotation {annotation_id} bbox [{x}, {y}, {w}, {h}] outside image bounds {iw}x{ih}")]
    BboxOutOfBounds {
        annotation_id: u64,
        x: f64,
        y: f64,
        w: f64,
        h: f64,
        iw: u32,
        ih: u32,
    },

    #[error("annotation {annotation_id} segmentation size [{sh}, {sw}] does not match image {iw}x{ih}")]
    SegmentationSizeMismatch {
        annotation_id: u64,
        sh: u32,
        sw: u32,
        iw: u32,
        ih: u32,
    },

    #[error("polygon needs at least 3 vertices, got {0}")]
    PolygonTooShort(usize),

    #[error("polygon has odd coordinate count {0}")]
    PolygonOddCoords(usize),

    #[error("polygon contains a non-finite coordinate")]
    PolygonNotFinite,

    #[error("RLE counts sum to {sum} but mask has {expected} pixels")]
    RleSumMismatch { sum: u64, expected: u64 },

    #[error("RLE string contains byte {byte:#04x} outside the valid range at offset {offset}")]
    RleBadChar { byte: u8, offset: usize },

    #[error("RLE string truncated mid-value")]
    RleTruncated,

    #[error("RLE string decoded a negative run length {0}")]
    RleNegativeCount(i64),

    #[error("mask dimensions {0}x{1} and {2}x{3} do not match")]
    MaskDimMismatch(u32, u32, u32, u32),

    #[error("visible fraction is undefined for an empty original mask")]
    EmptyOriginalMask,

    #[error("level thresholds must satisfy 0 < t1 < t2 < t3 < 1, got ({0}, {1}, {2})")]
    BadThresholds(f64, f64, f64),

    #[error("unknown category name {0:?}")]
    UnknownCategory(String),

    #[error("asset bank at {0} has no manifest (assets.json)")]
    MissingManifest(String),

    #[error("asset bank needs at least one trunk and one leaf sprite")]
    EmptyAssetBank,

    #[error("sprite {file}: anchor ({x}, {y}) outside raster {w}x{h}")]
    AnchorOutsideRaster {
        file: String,
        x: i64,
        y: i64,
        w: u32,
        h: u32,
    },

    #[error("invalid parameter range for {0}")]
    BadParamRange(&'static str),

    #[error("seed box ({0}, {1}, {2}, {3}) lies outside the {4}x{5} image")]
    SeedOutsideImage(u32, u32, u32, u32, u32, u32),

    #[error("region references missing image id {0}")]
    RegionMissingImage(u64),

    #[error("region {id}: detector failed: {message}")]
    DetectorFailure { id: u64, message: String },

    #[error("detector response id {got} does not match request id {expected}")]
    ProtocolIdMismatch { expected: u64, got: u64 },

    #[error("request {id}: detector protocol violation: {message}")]
    ProtocolViolation { id: u64, message: String },

    #[error("no precomputed detections for key {0:?}")]
    MissingPrecomputedKey(String),

    #[error("occlusion level {0} outside 0..=3")]
    BadOcclusionLevel(u8),

    #[error("no positive regions at occlusion level {0}")]
    NoPositiveRegions(&'static str),

    #[error("{0}")]
    InvalidInput(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn image(path: impl Into<String>, source: image::ImageError) -> Self {
        Error::Image {
            path: path.into(),
            source,
        }
    }
}
