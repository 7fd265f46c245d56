//! Box geometry: continuous boxes for annotations and IoU, integer grid
//! rectangles for evaluation regions.

use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Axis-aligned box in pixel units, top-left origin. Serialized in COCO order
/// `[x, y, w, h]`. Geometry is continuous (real-valued), matching standard
/// detection practice for IoU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = (self.right().min(other.right()) - self.x.max(other.x)).max(0.0);
        let ih = (self.bottom().min(other.bottom()) - self.y.max(other.y)).max(0.0);
        iw * ih
    }
}

/// Intersection over union of two boxes. Zero when the union is degenerate.
///
/// All extents are derived from the box edges (right - left), not from the
/// stored widths, so identical boxes score exactly 1 and the result never
/// exceeds 1 despite floating-point rounding.
pub fn box_iou(a: &BBox, b: &BBox) -> f64 {
    let area = |v: &BBox| (v.right() - v.x).max(0.0) * (v.bottom() - v.y).max(0.0);
    let inter = a.intersection_area(b);
    let union = area(a) + area(b) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

impl Serialize for BBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(4))?;
        seq.serialize_element(&self.x)?;
        seq.serialize_element(&self.y)?;
        seq.serialize_element(&self.w)?;
        seq.serialize_element(&self.h)?;
        seq.end()
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = BBox;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a [x, y, w, h] array")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<BBox, A::Error> {
                let x = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let y = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(1, &self))?;
                let w = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(2, &self))?;
                let h = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(3, &self))?;
                if seq.next_element::<f64>()?.is_some() {
                    return Err(de::Error::invalid_length(5, &self));
                }
                Ok(BBox { x, y, w, h })
            }
        }
        deserializer.deserialize_seq(V)
    }
}

/// Rectangle on the integer pixel grid, half-open: covers columns
/// `x..x+w` and rows `y..y+h`. Serialized as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl GridRect {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        GridRect { x, y, w, h }
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    /// True when the two rectangles share interior area (touching edges do
    /// not count).
    pub fn intersects(&self, other: &GridRect) -> bool {
        self.x < other.right()
            && other.x < self.right()
            && self.y < other.bottom()
            && other.y < self.bottom()
    }

    pub fn contains_rect(&self, other: &GridRect) -> bool {
        self.x <= other.x
            && self.y <= other.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    pub fn to_bbox(&self) -> BBox {
        BBox::new(self.x as f64, self.y as f64, self.w as f64, self.h as f64)
    }

    /// Smallest grid rectangle covering a continuous box, clipped to an
    /// `image_w` x `image_h` canvas.
    pub fn covering(b: &BBox, image_w: u32, image_h: u32) -> GridRect {
        let x0 = b.x.floor().clamp(0.0, image_w as f64) as u32;
        let y0 = b.y.floor().clamp(0.0, image_h as f64) as u32;
        let x1 = b.right().ceil().clamp(0.0, image_w as f64) as u32;
        let y1 = b.bottom().ceil().clamp(0.0, image_h as f64) as u32;
        GridRect::new(x0, y0, x1.saturating_sub(x0), y1.saturating_sub(y0))
    }
}

impl Serialize for GridRect {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(4))?;
        seq.serialize_element(&self.x)?;
        seq.serialize_element(&self.y)?;
        seq.serialize_element(&self.w)?;
        seq.serialize_element(&self.h)?;
        seq.end()
    }
}

impl<'de> Deserialize<'de> for GridRect {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = <[u32; 4]>::deserialize(deserializer)?;
        Ok(GridRect::new(v[0], v[1], v[2], v[3]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_identical_boxes() {
        let a = BBox::new(3.0, 4.0, 10.0, 20.0);
        assert_eq!(box_iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_disjoint_boxes() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        let b = BBox::new(20.0, 0.0, 10.0, 10.0);
        assert_eq!(box_iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_quarter_overlap() {
        // (0,0,10,10) vs (5,5,10,10): inter 25, union 175
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        let b = BBox::new(5.0, 5.0, 10.0, 10.0);
        let got = box_iou(&a, &b);
        assert!((got - 25.0 / 175.0).abs() < 1e-15);
    }

    #[test]
    fn iou_degenerate_boxes_is_zero() {
        let a = BBox::new(1.0, 1.0, 0.0, 0.0);
        assert_eq!(box_iou(&a, &a), 0.0);
    }

    #[test]
    fn grid_rect_touching_edges_do_not_intersect() {
        let a = GridRect::new(0, 0, 4, 4);
        let b = GridRect::new(4, 0, 4, 4);
        assert!(!a.intersects(&b));
        let c = GridRect::new(3, 0, 4, 4);
        assert!(a.intersects(&c));
    }

    #[test]
    fn bbox_serde_round_trip() {
        let b = BBox::new(1.5, 2.0, 3.25, 4.0);
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, "[1.5,2.0,3.25,4.0]");
        let back: BBox = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b);
    }
}
