//! Polygon rasterization onto the pixel grid.
//!
//! A pixel (row r, column c) is set iff its center (c + 0.5, r + 0.5) lies
//! inside the polygon under the even-odd rule; multiple polygons rasterize
//! as their union. The fill is computed per scanline from the exact same
//! crossing predicate a per-pixel ray cast would use, so it agrees
//! pixel-for-pixel with a brute-force point-in-polygon test.

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Validate one polygon ring given as flat [x0, y0, x1, y1, ...] coordinates.
fn check_polygon(coords: &[f64]) -> Result<()> {
    if coords.len() % 2 != 0 {
        return Err(Error::PolygonOddCoords(coords.len()));
    }
    if coords.len() < 6 {
        return Err(Error::PolygonTooShort(coords.len() / 2));
    }
    if coords.iter().any(|v| !v.is_finite()) {
        return Err(Error::PolygonNotFinite);
    }
    Ok(())
}

/// X coordinates where polygon edges cross the horizontal line `y`, using
/// the half-open convention (y1 <= y < y2 or y2 <= y < y1) so shared
/// vertices count once and horizontal edges not at all.
fn row_crossings(coords: &[f64], y: f64, out: &mut Vec<f64>) {
    out.clear();
    let n = coords.len() / 2;
    for i in 0..n {
        let x1 = coords[2 * i];
        let y1 = coords[2 * i + 1];
        let j = (i + 1) % n;
        let x2 = coords[2 * j];
        let y2 = coords[2 * j + 1];
        if (y1 <= y && y < y2) || (y2 <= y && y < y1) {
            out.push(x1 + (y - y1) * (x2 - x1) / (y2 - y1));
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
}

/// Rasterize the union of polygons onto a width x height grid.
pub fn polygon_to_mask(polygons: &[Vec<f64>], width: u32, height: u32) -> Result<BinaryMask> {
    for p in polygons {
        check_polygon(p)?;
    }
    let mut mask = BinaryMask::new(width, height);
    let mut xs: Vec<f64> = Vec::new();
    for poly in polygons {
        for r in 0..height {
            let yc = r as f64 + 0.5;
            row_crossings(poly, yc, &mut xs);
            if xs.is_empty() {
                continue;
            }
            // A center is inside iff an odd number of crossings lie strictly
            // to its right. Walk the row once, tracking how many crossings
            // are <= the center.
            let mut passed = 0usize;
            for c in 0..width {
                let xc = c as f64 + 0.5;
                while passed < xs.len() && !(xc < xs[passed]) {
                    passed += 1;
                }
                if (xs.len() - passed) % 2 == 1 {
                    mask.set(c, r, true);
                }
            }
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned_square() {
        // square (0,0)-(4,4) on an 8x8 canvas: exactly rows/cols 0..3
        let poly = vec![0.0, 0.0, 4.0, 0.0, 4.0, 4.0, 0.0, 4.0];
        let mask = polygon_to_mask(&[poly], 8, 8).unwrap();
        assert_eq!(mask.area(), 16);
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(mask.get(x, y), x < 4 && y < 4, "pixel ({x}, {y})");
            }
        }
    }

    #[test]
    fn two_vertex_polygon_is_an_error() {
        let poly = vec![0.0, 0.0, 4.0, 4.0];
        assert!(matches!(
            polygon_to_mask(&[poly], 8, 8),
            Err(Error::PolygonTooShort(2))
        ));
    }

    #[test]
    fn odd_coordinate_count_is_an_error() {
        let poly = vec![0.0, 0.0, 4.0, 4.0, 1.0, 2.0, 3.0];
        assert!(matches!(
            polygon_to_mask(&[poly], 8, 8),
            Err(Error::PolygonOddCoords(7))
        ));
    }

    #[test]
    fn non_finite_coordinate_is_an_error() {
        let poly = vec![0.0, 0.0, f64::NAN, 4.0, 1.0, 2.0];
        assert!(matches!(
            polygon_to_mask(&[poly], 8, 8),
            Err(Error::PolygonNotFinite)
        ));
    }

    #[test]
    fn disjoint_triangles_add_their_areas() {
        let t1 = vec![0.0, 0.0, 6.0, 0.0, 0.0, 6.0];
        let t2 = vec![10.0, 10.0, 15.0, 10.0, 10.0, 15.0];
        let a1 = polygon_to_mask(&[t1.clone()], 16, 16).unwrap().area();
        let a2 = polygon_to_mask(&[t2.clone()], 16, 16).unwrap().area();
        let both = polygon_to_mask(&[t1, t2], 16, 16).unwrap().area();
        assert_eq!(both, a1 + a2);
    }

    #[test]
    fn polygon_outside_canvas_is_empty() {
        let poly = vec![20.0, 20.0, 30.0, 20.0, 30.0, 30.0, 20.0, 30.0];
        let mask = polygon_to_mask(&[poly], 8, 8).unwrap();
        assert!(mask.is_empty());
    }
}
