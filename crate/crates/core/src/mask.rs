//! Binary raster masks and the mask algebra the augmentation pipeline is
//! built on: negative-mask multiplication (AND NOT), visible fraction,
//! union, and tight bounds.

use crate::error::{Error, Result};
use crate::geom::BBox;

/// A width x height bitmask, one boolean per pixel, stored row-major.
/// Row-major storage keeps the compositing loops cache-friendly; only the
/// RLE codec deals with COCO's column-major convention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut m = BinaryMask::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = value;
    }

    /// Number of set pixels.
    pub fn area(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// In-place union with another mask of the same dimensions.
    pub fn or_assign(&mut self, other: &BinaryMask) -> Result<()> {
        self.check_dims(other)?;
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
        Ok(())
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    fn check_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::MaskDimMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }
}

/// Per-pixel `base AND NOT occluder`: applying an occluder's negative mask
/// to an object mask. The result is always a subset of `base`.
pub fn mask_and_not(base: &BinaryMask, occluder: &BinaryMask) -> Result<BinaryMask> {
    base.check_dims(occluder)?;
    let mut out = base.clone();
    for (a, b) in out.bits.iter_mut().zip(&occluder.bits) {
        *a = *a && !*b;
    }
    Ok(out)
}

/// `area(occluded) / area(original)`. The occluded mask must be a subset of
/// the original; an empty original has no defined fraction.
pub fn visible_fraction(original: &BinaryMask, occluded: &BinaryMask) -> Result<f64> {
    original.check_dims(occluded)?;
    let base = original.area();
    if base == 0 {
        return Err(Error::EmptyOriginalMask);
    }
    debug_assert!(occluded.is_subset_of(original));
    Ok(occluded.area() as f64 / base as f64)
}

/// Tight axis-aligned bounds of the set pixels, or `None` for an empty mask.
pub fn bbox_of_mask(m: &BinaryMask) -> Option<BBox> {
    let mut min_x = u32::MAX;
    let mut min_y = u32::MAX;
    let mut max_x = 0u32;
    let mut max_y = 0u32;
    let mut any = false;
    for y in 0..m.height {
        let row = &m.bits[y as usize * m.width as usize..(y as usize + 1) * m.width as usize];
        for (x, &b) in row.iter().enumerate() {
            if b {
                let x = x as u32;
                any = true;
                min_x = min_x.min(x);
                max_x = max_x.max(x);
                min_y = min_y.min(y);
                max_y = max_y.max(y);
            }
        }
    }
    if !any {
        return None;
    }
    Some(BBox::new(
        min_x as f64,
        min_y as f64,
        (max_x - min_x + 1) as f64,
        (max_y - min_y + 1) as f64,
    ))
}
