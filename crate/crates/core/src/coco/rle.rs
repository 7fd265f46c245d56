//! COCO run-length mask codec.
//!
//! Counts traverse the mask in column-major pixel order and alternate
//! zero-runs and one-runs, starting with zeros (the first count may be 0).
//! The compressed string form packs each count into 5-bit chunks, low bits
//! first, one chunk per character at code `chunk + 48`, with bit 0x20 set on
//! every chunk except the last and sign extension driven by the 0x10 bit of
//! the final chunk. Counts at index 3 and above are delta-coded against the
//! count two places back, matching the reference cocoapi encoder.

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Run-length counts for a height x width mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RleCounts {
    pub height: u32,
    pub width: u32,
    pub counts: Vec<u32>,
}

impl RleCounts {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Number of foreground pixels (sum of odd-indexed runs).
    pub fn area(&self) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .filter(|(i, _)| i % 2 == 1)
            .map(|(_, &c)| c as u64)
            .sum()
    }

    fn check_total(&self) -> Result<()> {
        let expected = self.height as u64 * self.width as u64;
        let sum = self.total();
        if sum != expected {
            return Err(Error::RleSumMismatch { sum, expected });
        }
        Ok(())
    }
}

/// Encode a mask as column-major run lengths.
pub fn mask_to_rle(m: &BinaryMask) -> RleCounts {
    let (w, h) = (m.width(), m.height());
    let mut counts = Vec::new();
    if w as u64 * h as u64 == 0 {
        return RleCounts {
            height: h,
            width: w,
            counts,
        };
    }
    let mut current = false;
    let mut run: u32 = 0;
    for x in 0..w {
        for y in 0..h {
            let v = m.get(x, y);
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    RleCounts {
        height: h,
        width: w,
        counts,
    }
}

/// Expand run lengths back into a mask. Counts must sum to height * width.
pub fn rle_to_mask(r: &RleCounts) -> Result<BinaryMask> {
    r.check_total()?;
    let mut m = BinaryMask::new(r.width, r.height);
    let h = r.height as u64;
    let mut pos: u64 = 0;
    let mut value = false;
    for &c in &r.counts {
        if value {
            for p in pos..pos + c as u64 {
                // column-major flat index -> (x, y)
                m.set((p / h) as u32, (p % h) as u32, true);
            }
        }
        pos += c as u64;
        value = !value;
    }
    Ok(m)
}

/// Compress counts into the COCO string form.
pub fn rle_encode_string(r: &RleCounts) -> String {
    let mut s = String::with_capacity(r.counts.len() * 3);
    for (i, &count) in r.counts.iter().enumerate() {
        let mut x = count as i64;
        if i > 2 {
            x -= r.counts[i - 2] as i64;
        }
        loop {
            let chunk = (x & 0x1f) as u8;
            x >>= 5;
            let more = if chunk & 0x10 != 0 { x != -1 } else { x != 0 };
            let c = (chunk | if more { 0x20 } else { 0 }) + 48;
            s.push(c as char);
            if !more {
                break;
            }
        }
    }
    s
}

/// Decode the COCO string form back into counts for a height x width mask.
pub fn rle_decode_string(s: &str, height: u32, width: u32) -> Result<RleCounts> {
    let bytes = s.as_bytes();
    let mut counts: Vec<u32> = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let mut x: i64 = 0;
        let mut shift = 0u32;
        loop {
            if i >= bytes.len() {
                return Err(Error::RleTruncated);
            }
            let b = bytes[i];
            if !(48..=111).contains(&b) {
                return Err(Error::RleBadChar { byte: b, offset: i });
            }
            let c = (b - 48) as i64;
            i += 1;
            x |= (c & 0x1f) << shift;
            shift += 5;
            if c & 0x20 == 0 {
                break;
            }
        }
        // sign-extend from the 0x10 bit of the final chunk
        if x & (1i64 << (shift - 1)) != 0 {
            x |= !0i64 << shift;
        }
        if counts.len() > 2 {
            x += counts[counts.len() - 2] as i64;
        }
        if x < 0 {
            return Err(Error::RleNegativeCount(x));
        }
        counts.push(x as u32);
    }
    let r = RleCounts {
        height,
        width,
        counts,
    };
    r.check_total()?;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_mask(rng: &mut SplitMix64, max_side: u32) -> BinaryMask {
        let w = rng.range_u32(1, max_side);
        let h = rng.range_u32(1, max_side);
        let density = rng.next_f64();
        BinaryMask::from_fn(w, h, |_, _| rng.next_f64() < density)
    }

    #[test]
    fn all_zero_mask_is_single_run() {
        let m = BinaryMask::new(2, 3); // 3x2 in (h, w) terms
        let r = mask_to_rle(&m);
        assert_eq!(r.counts, vec![6]);
        assert_eq!(r.height, 3);
        assert_eq!(r.width, 2);
    }

    #[test]
    fn first_pixel_set_leads_with_zero_count() {
        // 3x2 mask (h=3, w=2) with only (row 0, col 0) set.
        let mut m = BinaryMask::new(2, 3);
        m.set(0, 0, true);
        let r = mask_to_rle(&m);
        assert_eq!(r.counts, vec![0, 1, 5]);
    }

    #[test]
    fn round_trip_identity() {
        let mut rng = SplitMix64::new(0xC0C0);
        for _ in 0..200 {
            let m = random_mask(&mut rng, 32);
            let r = mask_to_rle(&m);
            assert_eq!(r.total(), m.width() as u64 * m.height() as u64);
            assert_eq!(r.area(), m.area());
            let back = rle_to_mask(&r).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn rle_sum_mismatch_errors() {
        let r = RleCounts {
            height: 2,
            width: 2,
            counts: vec![3],
        };
        assert!(matches!(
            rle_to_mask(&r),
            Err(Error::RleSumMismatch { sum: 3, expected: 4 })
        ));
    }

    #[test]
    fn encode_single_count_six() {
        let r = RleCounts {
            height: 3,
            width: 2,
            counts: vec![6],
        };
        assert_eq!(rle_encode_string(&r), "6");
        let back = rle_decode_string("6", 3, 2).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn encode_empty_counts_is_empty_string() {
        let r = RleCounts {
            height: 0,
            width: 0,
            counts: vec![],
        };
        assert_eq!(rle_encode_string(&r), "");
        assert_eq!(rle_decode_string("", 0, 0).unwrap(), r);
    }

    #[test]
    fn string_round_trip_with_deltas() {
        // enough runs for the i > 2 delta path, including shrinking counts
        // whose deltas go negative
        let counts = vec![10, 20, 30, 5, 50, 60, 9825];
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        let r = RleCounts {
            height: 1,
            width: total as u32,
            counts,
        };
        let s = rle_encode_string(&r);
        let back = rle_decode_string(&s, 1, total as u32).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn decode_rejects_bad_bytes() {
        assert!(matches!(
            rle_decode_string("ab~", 1, 1),
            Err(Error::RleBadChar { .. })
        ));
    }

    #[test]
    fn decode_rejects_truncated_stream() {
        // 'e' is 0x65 -> chunk 0x35 has the continuation bit set
        assert!(matches!(
            rle_decode_string("e", 1, 1),
            Err(Error::RleTruncated)
        ));
    }
}
