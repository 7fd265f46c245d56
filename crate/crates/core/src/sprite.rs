//! RGBA sprite placement: similarity transforms (rotate + scale about a
//! pivot), bilinear color sampling, nearest-neighbor mask sampling, and
//! source-over compositing.
//!
//! Resampling rules: color is sampled bilinearly in premultiplied space so
//! transparent texels do not bleed; binary masks are sampled
//! nearest-neighbor so they stay binary. When compositing onto an RGB
//! image, color writes are stenciled by the transformed mask, which keeps
//! every pixel outside the returned occluder mask bit-identical.

use image::{RgbImage, Rgba, RgbaImage};

use crate::mask::BinaryMask;

/// Rotate by `angle_deg` (degrees, in the y-down image frame) and scale by
/// `scale` about `pivot` in sprite coordinates, then translate so the pivot
/// lands on `target` in destination coordinates.
#[derive(Debug, Clone, Copy)]
pub struct SpriteTransform {
    pub pivot: (f64, f64),
    pub target: (f64, f64),
    pub angle_deg: f64,
    pub scale: f64,
}

impl SpriteTransform {
    fn rotation(&self) -> (f64, f64) {
        let r = self.angle_deg.to_radians();
        (r.cos(), r.sin())
    }

    pub fn forward(&self, p: (f64, f64)) -> (f64, f64) {
        let (c, s) = self.rotation();
        let dx = p.0 - self.pivot.0;
        let dy = p.1 - self.pivot.1;
        (
            self.target.0 + self.scale * (c * dx - s * dy),
            self.target.1 + self.scale * (s * dx + c * dy),
        )
    }

    pub fn inverse(&self, q: (f64, f64)) -> (f64, f64) {
        let (c, s) = self.rotation();
        let dx = (q.0 - self.target.0) / self.scale;
        let dy = (q.1 - self.target.1) / self.scale;
        (
            self.pivot.0 + c * dx + s * dy,
            self.pivot.1 - s * dx + c * dy,
        )
    }

    /// Destination pixel range (x0, y0, x1, y1), half-open, covering the
    /// transformed sprite rectangle, expanded by one pixel for filter reach
    /// and clipped to the destination size. `None` when fully outside.
    pub fn dest_bounds(
        &self,
        src_w: u32,
        src_h: u32,
        dst_w: u32,
        dst_h: u32,
    ) -> Option<(u32, u32, u32, u32)> {
        let corners = [
            (0.0, 0.0),
            (src_w as f64, 0.0),
            (0.0, src_h as f64),
            (src_w as f64, src_h as f64),
        ];
        let mut min_x = f64::INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for corner in corners {
            let (x, y) = self.forward(corner);
            min_x = min_x.min(x);
            min_y = min_y.min(y);
            max_x = max_x.max(x);
            max_y = max_y.max(y);
        }
        let x0 = (min_x.floor() - 1.0).max(0.0) as i64;
        let y0 = (min_y.floor() - 1.0).max(0.0) as i64;
        let x1 = ((max_x.ceil() + 1.0) as i64).min(dst_w as i64);
        let y1 = ((max_y.ceil() + 1.0) as i64).min(dst_h as i64);
        if x0 >= x1 || y0 >= y1 {
            return None;
        }
        Some((x0 as u32, y0 as u32, x1 as u32, y1 as u32))
    }
}

/// Premultiplied bilinear tap at a continuous sprite point (pixel centers at
/// integer + 0.5). Out-of-bounds taps contribute nothing. Returns
/// (r*a, g*a, b*a, a) with channels in 0..=255 units.
fn sample_bilinear_premul(src: &RgbaImage, x: f64, y: f64) -> [f64; 4] {
    let u = x - 0.5;
    let v = y - 0.5;
    let i0 = u.floor();
    let j0 = v.floor();
    let fx = u - i0;
    let fy = v - j0;
    let mut acc = [0.0f64; 4];
    for (di, wx) in [(0i64, 1.0 - fx), (1, fx)] {
        for (dj, wy) in [(0i64, 1.0 - fy), (1, fy)] {
            let w = wx * wy;
            if w == 0.0 {
                continue;
            }
            let i = i0 as i64 + di;
            let j = j0 as i64 + dj;
            if i < 0 || j < 0 || i >= src.width() as i64 || j >= src.height() as i64 {
                continue;
            }
            let p = src.get_pixel(i as u32, j as u32);
            let a = p[3] as f64;
            acc[0] += w * p[0] as f64 * a;
            acc[1] += w * p[1] as f64 * a;
            acc[2] += w * p[2] as f64 * a;
            acc[3] += w * a;
        }
    }
    acc
}

/// Nearest-neighbor mask lookup at a continuous sprite point.
fn sample_mask_nearest(mask: &BinaryMask, x: f64, y: f64) -> bool {
    let i = x.floor();
    let j = y.floor();
    if i < 0.0 || j < 0.0 || i >= mask.width() as f64 || j >= mask.height() as f64 {
        return false;
    }
    mask.get(i as u32, j as u32)
}

/// Composite a transformed sprite over an RGB image, returning the occluder
/// mask in image coordinates (`sprite_mask` transformed nearest-neighbor and
/// clipped to the image). Only pixels inside the returned mask are written.
pub fn composite_over_rgb(
    dst: &mut RgbImage,
    sprite: &RgbaImage,
    sprite_mask: &BinaryMask,
    t: &SpriteTransform,
) -> BinaryMask {
    let mut out = BinaryMask::new(dst.width(), dst.height());
    let Some((x0, y0, x1, y1)) =
        t.dest_bounds(sprite.width(), sprite.height(), dst.width(), dst.height())
    else {
        return out;
    };
    for y in y0..y1 {
        for x in x0..x1 {
            let src_pt = t.inverse((x as f64 + 0.5, y as f64 + 0.5));
            if !sample_mask_nearest(sprite_mask, src_pt.0, src_pt.1) {
                continue;
            }
            out.set(x, y, true);
            let [pr, pg, pb, a] = sample_bilinear_premul(sprite, src_pt.0, src_pt.1);
            if a <= 0.0 {
                continue;
            }
            let alpha = (a / 255.0).min(1.0);
            let d = dst.get_pixel_mut(x, y);
            for (ch, premul) in [pr, pg, pb].iter().enumerate() {
                let src_c = premul / a; // un-premultiply back to 0..=255
                let blended = src_c * alpha + d[ch] as f64 * (1.0 - alpha);
                d[ch] = blended.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    out
}

/// Source-over blit of a transformed RGBA sprite onto an RGBA canvas
/// (bilinear color and alpha).
pub fn blit_over_rgba(dst: &mut RgbaImage, sprite: &RgbaImage, t: &SpriteTransform) {
    let Some((x0, y0, x1, y1)) =
        t.dest_bounds(sprite.width(), sprite.height(), dst.width(), dst.height())
    else {
        return;
    };
    for y in y0..y1 {
        for x in x0..x1 {
            let src_pt = t.inverse((x as f64 + 0.5, y as f64 + 0.5));
            let [pr, pg, pb, a] = sample_bilinear_premul(sprite, src_pt.0, src_pt.1);
            if a <= 0.0 {
                continue;
            }
            let sa = (a / 255.0).min(1.0);
            let d = dst.get_pixel_mut(x, y);
            let da = d[3] as f64 / 255.0;
            let out_a = sa + da * (1.0 - sa);
            if out_a <= 0.0 {
                continue;
            }
            let src = [pr / a, pg / a, pb / a];
            for ch in 0..3 {
                let blended = (src[ch] * sa + d[ch] as f64 * da * (1.0 - sa)) / out_a;
                d[ch] = blended.round().clamp(0.0, 255.0) as u8;
            }
            d[3] = (out_a * 255.0).round().clamp(0.0, 255.0) as u8;
        }
    }
}

/// Exact source-over blit at an integer offset, no resampling. Fully
/// transparent destination pixels receive the sprite pixel verbatim, so
/// blitting onto a fresh canvas preserves the sprite's alpha exactly.
pub fn blit_integer(dst: &mut RgbaImage, sprite: &RgbaImage, dx: i64, dy: i64) {
    for (sx, sy, &p) in sprite.enumerate_pixels() {
        let x = sx as i64 + dx;
        let y = sy as i64 + dy;
        if x < 0 || y < 0 || x >= dst.width() as i64 || y >= dst.height() as i64 {
            continue;
        }
        if p[3] == 0 {
            continue;
        }
        let d = dst.get_pixel_mut(x as u32, y as u32);
        if d[3] == 0 {
            *d = p;
            continue;
        }
        let sa = p[3] as f64 / 255.0;
        let da = d[3] as f64 / 255.0;
        let out_a = sa + da * (1.0 - sa);
        for ch in 0..3 {
            let blended = (p[ch] as f64 * sa + d[ch] as f64 * da * (1.0 - sa)) / out_a;
            d[ch] = blended.round().clamp(0.0, 255.0) as u8;
        }
        d[3] = (out_a * 255.0).round().clamp(0.0, 255.0) as u8;
    }
}

/// Mask of pixels whose alpha strictly exceeds `threshold`.
pub fn alpha_threshold_mask(raster: &RgbaImage, threshold: u8) -> BinaryMask {
    BinaryMask::from_fn(raster.width(), raster.height(), |x, y| {
        raster.get_pixel(x, y)[3] > threshold
    })
}

/// Fill `color` (alpha 255, no anti-aliasing) everywhere `mask` is set.
pub fn paint_mask(dst: &mut RgbaImage, mask: &BinaryMask, color: [u8; 3]) {
    for y in 0..dst.height().min(mask.height()) {
        for x in 0..dst.width().min(mask.width()) {
            if mask.get(x, y) {
                dst.put_pixel(x, y, Rgba([color[0], color[1], color[2], 255]));
            }
        }
    }
}
