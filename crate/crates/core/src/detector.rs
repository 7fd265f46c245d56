//! Pluggable detector boundary.
//!
//! Three modes behind one handle: a child process speaking a
//! newline-delimited JSON protocol (for wrapping real detectors), a
//! precomputed-results file, and a deterministic color-blob mock used as the
//! test oracle for the evaluation protocol.
//!
//! Wire protocol (one in-flight request per child): the parent writes one
//! request object per line, `{"id": N, "image": "<path to PNG crop>"}`; the
//! child answers one line, `{"id": N, "detections": [{"bbox": [x, y, w, h],
//! "score": s, "category": "person"}]}`. Crops are staged as PNG files in a
//! temp directory (honoring `FOLIAGE_TMPDIR`) rather than inlined, which
//! keeps wrapper scripts trivial.

use std::collections::HashMap;
use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{BBox, GridRect};

pub const TMPDIR_ENV: &str = "FOLIAGE_TMPDIR";

/// One detection in crop-local coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
    pub category: String,
}

/// A region crop on its way to the detector. `image_id` and `rect` identify
/// the region for precomputed lookups; `id` pairs requests with responses.
pub struct DetectRequest<'a> {
    pub id: u64,
    pub image_id: u64,
    pub rect: GridRect,
    pub crop: &'a RgbImage,
}

/// Lookup key for precomputed result files.
pub fn precomputed_key(image_id: u64, rect: &GridRect) -> String {
    format!("{image_id}:{}:{}:{}:{}", rect.x, rect.y, rect.w, rect.h)
}

pub enum DetectorHandle {
    Mock { color: [u8; 3], tolerance: u8 },
    Precomputed(HashMap<String, Vec<Detection>>),
    Subprocess(SubprocessDetector),
}

impl DetectorHandle {
    pub fn mock(color: [u8; 3], tolerance: u8) -> Self {
        DetectorHandle::Mock { color, tolerance }
    }

    pub fn precomputed(map: HashMap<String, Vec<Detection>>) -> Self {
        DetectorHandle::Precomputed(map)
    }

    pub fn precomputed_from_path(path: &Path) -> Result<Self> {
        let bytes =
            std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(DetectorHandle::Precomputed(serde_json::from_slice(&bytes)?))
    }

    pub fn subprocess(command: &str) -> Result<Self> {
        Ok(DetectorHandle::Subprocess(SubprocessDetector::spawn(
            command,
        )?))
    }

    pub fn detect(&mut self, req: &DetectRequest) -> Result<Vec<Detection>> {
        let detections = match self {
            DetectorHandle::Mock { color, tolerance } => {
                Ok(detect_mock(req.crop, *color, *tolerance))
            }
            DetectorHandle::Precomputed(map) => {
                let key = precomputed_key(req.image_id, &req.rect);
                map.get(&key)
                    .cloned()
                    .ok_or(Error::MissingPrecomputedKey(key))
            }
            DetectorHandle::Subprocess(child) => child.detect(req),
        }?;
        validate_detections(req, &detections)?;
        Ok(detections)
    }
}

fn validate_detections(req: &DetectRequest, detections: &[Detection]) -> Result<()> {
    for d in detections {
        if !(0.0..=1.0).contains(&d.score) {
            return Err(Error::ProtocolViolation {
                id: req.id,
                message: format!("score {} outside [0, 1]", d.score),
            });
        }
        let b = &d.bbox;
        if b.w < 0.0
            || b.h < 0.0
            || b.x < 0.0
            || b.y < 0.0
            || b.right() > req.rect.w as f64
            || b.bottom() > req.rect.h as f64
        {
            return Err(Error::ProtocolViolation {
                id: req.id,
                message: format!(
                    "bbox [{}, {}, {}, {}] outside the {}x{} crop",
                    b.x, b.y, b.w, b.h, req.rect.w, req.rect.h
                ),
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Mock detector
// ---------------------------------------------------------------------------

/// Deterministic color-blob detector: 4-connected components of pixels
/// within a per-channel tolerance of `color`, reported in scan order. Each
/// component yields category "person" with score = component area / bbox
/// area.
pub fn detect_mock(crop: &RgbImage, color: [u8; 3], tolerance: u8) -> Vec<Detection> {
    let (w, h) = crop.dimensions();
    let matches = |x: u32, y: u32| {
        let p = crop.get_pixel(x, y);
        (0..3).all(|c| (p[c] as i16 - color[c] as i16).unsigned_abs() <= tolerance as u16)
    };
    let mut visited = vec![false; (w * h) as usize];
    let mut detections = Vec::new();
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            let idx = (y * w + x) as usize;
            if visited[idx] || !matches(x, y) {
                continue;
            }
            visited[idx] = true;
            queue.push_back((x, y));
            let (mut min_x, mut min_y, mut max_x, mut max_y) = (x, y, x, y);
            let mut area = 0u64;
            while let Some((cx, cy)) = queue.pop_front() {
                area += 1;
                min_x = min_x.min(cx);
                max_x = max_x.max(cx);
                min_y = min_y.min(cy);
                max_y = max_y.max(cy);
                let mut push = |nx: u32, ny: u32| {
                    let nidx = (ny * w + nx) as usize;
                    if !visited[nidx] && matches(nx, ny) {
                        visited[nidx] = true;
                        queue.push_back((nx, ny));
                    }
                };
                if cx > 0 {
                    push(cx - 1, cy);
                }
                if cx + 1 < w {
                    push(cx + 1, cy);
                }
                if cy > 0 {
                    push(cx, cy - 1);
                }
                if cy + 1 < h {
                    push(cx, cy + 1);
                }
            }
            let bw = (max_x - min_x + 1) as f64;
            let bh = (max_y - min_y + 1) as f64;
            detections.push(Detection {
                bbox: BBox::new(min_x as f64, min_y as f64, bw, bh),
                score: area as f64 / (bw * bh),
                category: "person".to_string(),
            });
        }
    }
    detections
}

// ---------------------------------------------------------------------------
// Subprocess detector
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct WireRequest<'a> {
    id: u64,
    image: &'a str,
}

#[derive(Deserialize)]
struct WireResponse {
    id: u64,
    detections: Vec<Detection>,
}

/// Child-process detector. One request is in flight at a time; run several
/// handles for parallelism.
pub struct SubprocessDetector {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    crop_dir: tempfile::TempDir,
}

impl SubprocessDetector {
    /// Spawn `command` through `sh -c`, with piped stdin/stdout and
    /// inherited stderr.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::io(format!("spawn {command:?}"), e))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let crop_dir = crop_staging_dir()?;
        Ok(SubprocessDetector {
            child,
            stdin,
            stdout,
            crop_dir,
        })
    }

    fn detect(&mut self, req: &DetectRequest) -> Result<Vec<Detection>> {
        let crop_path = self.crop_dir.path().join(format!("req-{}.png", req.id));
        req.crop
            .save_with_format(&crop_path, image::ImageFormat::Png)
            .map_err(|e| Error::image(crop_path.display().to_string(), e))?;

        let line = serde_json::to_string(&WireRequest {
            id: req.id,
            image: crop_path.to_str().ok_or_else(|| Error::DetectorFailure {
                id: req.id,
                message: "crop path is not valid UTF-8".to_string(),
            })?,
        })?;
        let send = (|| -> std::io::Result<()> {
            self.stdin.write_all(line.as_bytes())?;
            self.stdin.write_all(b"\n")?;
            self.stdin.flush()
        })();
        send.map_err(|e| Error::DetectorFailure {
            id: req.id,
            message: format!("failed to write request: {e}"),
        })?;

        let mut response_line = String::new();
        let n = self
            .stdout
            .read_line(&mut response_line)
            .map_err(|e| Error::DetectorFailure {
                id: req.id,
                message: format!("failed to read response: {e}"),
            })?;
        let _ = std::fs::remove_file(&crop_path);
        if n == 0 {
            return Err(Error::DetectorFailure {
                id: req.id,
                message: "child closed its output (crashed?)".to_string(),
            });
        }
        let response: WireResponse =
            serde_json::from_str(response_line.trim_end()).map_err(|e| Error::ProtocolViolation {
                id: req.id,
                message: format!("unparseable response line: {e}"),
            })?;
        if response.id != req.id {
            return Err(Error::ProtocolIdMismatch {
                expected: req.id,
                got: response.id,
            });
        }
        Ok(response.detections)
    }
}

impl Drop for SubprocessDetector {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn crop_staging_dir() -> Result<tempfile::TempDir> {
    let base: PathBuf = match std::env::var_os(TMPDIR_ENV) {
        Some(dir) => PathBuf::from(dir),
        None => std::env::temp_dir(),
    };
    tempfile::Builder::new()
        .prefix("foliage-crops-")
        .tempdir_in(&base)
        .map_err(|e| Error::io(base.display().to_string(), e))
}

/// Reference implementation of the child side of the wire protocol, backed
/// by the mock detector. Reads request lines from `input`, answers on
/// `output`; returns on EOF.
pub fn serve_mock_ndjson(
    color: [u8; 3],
    tolerance: u8,
    input: impl BufRead,
    mut output: impl Write,
) -> Result<()> {
    #[derive(Deserialize)]
    struct Incoming {
        id: u64,
        image: String,
    }
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("stdin", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let req: Incoming = serde_json::from_str(&line)?;
        let crop = image::open(&req.image)
            .map_err(|e| Error::image(req.image.clone(), e))?
            .to_rgb8();
        let detections = detect_mock(&crop, color, tolerance);
        let response = serde_json::json!({ "id": req.id, "detections": detections });
        serde_json::to_writer(&mut output, &response)?;
        output.write_all(b"\n").map_err(|e| Error::io("stdout", e))?;
        output.flush().map_err(|e| Error::io("stdout", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    const RED: [u8; 3] = [255, 0, 0];

    fn black(w: u32, h: u32) -> RgbImage {
        RgbImage::from_pixel(w, h, Rgb([0, 0, 0]))
    }

    #[test]
    fn blank_crop_yields_nothing() {
        assert!(detect_mock(&black(16, 16), RED, 10).is_empty());
    }

    #[test]
    fn solid_block_scores_one() {
        let mut crop = black(32, 32);
        for y in 5..15 {
            for x in 5..15 {
                crop.put_pixel(x, y, Rgb(RED));
            }
        }
        let dets = detect_mock(&crop, RED, 10);
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].bbox, BBox::new(5.0, 5.0, 10.0, 10.0));
        assert_eq!(dets[0].score, 1.0);
        assert_eq!(dets[0].category, "person");
    }

    #[test]
    fn plus_shape_scores_five_ninths() {
        let mut crop = black(9, 9);
        for (x, y) in [(4, 3), (3, 4), (4, 4), (5, 4), (4, 5)] {
            crop.put_pixel(x, y, Rgb(RED));
        }
        let dets = detect_mock(&crop, RED, 0);
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].bbox, BBox::new(3.0, 3.0, 3.0, 3.0));
        assert!((dets[0].score - 5.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_pixels_are_separate_components() {
        let mut crop = black(8, 8);
        crop.put_pixel(2, 2, Rgb(RED));
        crop.put_pixel(3, 3, Rgb(RED));
        let dets = detect_mock(&crop, RED, 0);
        assert_eq!(dets.len(), 2);
    }

    #[test]
    fn mock_is_translation_equivariant() {
        let paint = |crop: &mut RgbImage, dx: u32, dy: u32| {
            for (x, y) in [(1, 1), (2, 1), (1, 2), (3, 3)] {
                crop.put_pixel(x + dx, y + dy, Rgb(RED));
            }
        };
        let mut a = black(32, 32);
        paint(&mut a, 0, 0);
        let mut b = black(32, 32);
        paint(&mut b, 7, 11);
        let da = detect_mock(&a, RED, 0);
        let db = detect_mock(&b, RED, 0);
        assert_eq!(da.len(), db.len());
        for (x, y) in da.iter().zip(&db) {
            assert_eq!(x.bbox.x + 7.0, y.bbox.x);
            assert_eq!(x.bbox.y + 11.0, y.bbox.y);
            assert_eq!(x.score, y.score);
        }
    }

    #[test]
    fn precomputed_lookup_hits_and_misses() {
        let rect = GridRect::new(4, 4, 8, 8);
        let mut map = HashMap::new();
        map.insert(precomputed_key(3, &rect), vec![]);
        let mut handle = DetectorHandle::precomputed(map);
        let crop = black(8, 8);
        let hit = handle.detect(&DetectRequest {
            id: 0,
            image_id: 3,
            rect,
            crop: &crop,
        });
        assert_eq!(hit.unwrap(), vec![]);
        let miss = handle.detect(&DetectRequest {
            id: 1,
            image_id: 4,
            rect,
            crop: &crop,
        });
        assert!(matches!(miss, Err(Error::MissingPrecomputedKey(_))));
    }

    #[test]
    fn out_of_range_score_is_a_protocol_violation() {
        let rect = GridRect::new(0, 0, 8, 8);
        let mut map = HashMap::new();
        map.insert(
            precomputed_key(1, &rect),
            vec![Detection {
                bbox: BBox::new(0.0, 0.0, 1.0, 1.0),
                score: 1.5,
                category: "person".into(),
            }],
        );
        let mut handle = DetectorHandle::precomputed(map);
        let crop = black(8, 8);
        let err = handle.detect(&DetectRequest {
            id: 9,
            image_id: 1,
            rect,
            crop: &crop,
        });
        assert!(matches!(err, Err(Error::ProtocolViolation { id: 9, .. })));
    }
}
