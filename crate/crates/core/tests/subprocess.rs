//! Subprocess detector wire-protocol tests against real child processes.

mod common;

use std::io::Write;

use image::{Rgb, RgbImage};

use foliage_core::detector::{DetectRequest, DetectorHandle};
use foliage_core::error::Error;
use foliage_core::geom::{BBox, GridRect};

fn crop() -> RgbImage {
    RgbImage::from_pixel(16, 16, Rgb([0, 0, 0]))
}

fn request(crop: &RgbImage, id: u64) -> DetectRequest<'_> {
    DetectRequest {
        id,
        image_id: 1,
        rect: GridRect::new(0, 0, crop.width(), crop.height()),
        crop,
    }
}

/// A stub child that parses each request and echoes canned detections back
/// under the request's id.
fn write_echo_stub(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("echo_stub.py");
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(
        br#"import json, sys
for line in sys.stdin:
    req = json.loads(line)
    resp = {
        "id": req["id"],
        "detections": [
            {"bbox": [1.0, 2.0, 3.0, 4.0], "score": 0.75, "category": "person"},
            {"bbox": [0.0, 0.0, 2.0, 2.0], "score": 0.25, "category": "tree"},
        ],
    }
    sys.stdout.write(json.dumps(resp) + "\n")
    sys.stdout.flush()
"#,
    )
    .unwrap();
    path
}

#[test]
fn stub_child_round_trips_canned_detections() {
    let dir = tempfile::tempdir().unwrap();
    let stub = write_echo_stub(dir.path());
    let mut handle = DetectorHandle::subprocess(&format!("python3 {}", stub.display())).unwrap();
    let crop = crop();
    for id in 0..3 {
        let detections = handle.detect(&request(&crop, id)).unwrap();
        assert_eq!(detections.len(), 2);
        assert_eq!(detections[0].bbox, BBox::new(1.0, 2.0, 3.0, 4.0));
        assert_eq!(detections[0].score, 0.75);
        assert_eq!(detections[0].category, "person");
        assert_eq!(detections[1].category, "tree");
    }
}

#[test]
fn mismatched_response_id_names_both_ids() {
    let dir = tempfile::tempdir().unwrap();
    let mut handle = DetectorHandle::subprocess(
        r#"while read line; do echo '{"id": 999, "detections": []}'; done"#,
    )
    .unwrap();
    let crop = crop();
    match handle.detect(&request(&crop, 7)) {
        Err(Error::ProtocolIdMismatch { expected, got }) => {
            assert_eq!((expected, got), (7, 999));
        }
        other => panic!("expected ProtocolIdMismatch, got {other:?}"),
    }
    let _ = dir;
}

#[test]
fn dead_child_surfaces_the_request_id() {
    let mut handle = DetectorHandle::subprocess("true").unwrap();
    let crop = crop();
    // "true" exits immediately; either the write or the read must fail
    match handle.detect(&request(&crop, 3)) {
        Err(Error::DetectorFailure { id, .. }) => assert_eq!(id, 3),
        other => panic!("expected DetectorFailure, got {other:?}"),
    }
}

#[test]
fn garbage_response_is_a_protocol_violation() {
    let mut handle =
        DetectorHandle::subprocess(r#"while read line; do echo 'not json'; done"#).unwrap();
    let crop = crop();
    assert!(matches!(
        handle.detect(&request(&crop, 0)),
        Err(Error::ProtocolViolation { id: 0, .. })
    ));
}

#[test]
fn crop_staging_honors_the_env_dir() {
    // subprocess mode writes crops under FOLIAGE_TMPDIR when set; verify the
    // stub really received a readable PNG by echoing its dimensions back
    let dir = tempfile::tempdir().unwrap();
    let stage = dir.path().join("stage");
    std::fs::create_dir_all(&stage).unwrap();
    std::env::set_var("FOLIAGE_TMPDIR", &stage);
    let script = dir.path().join("dims_stub.py");
    std::fs::write(
        &script,
        br#"import json, struct, sys
for line in sys.stdin:
    req = json.loads(line)
    with open(req["image"], "rb") as f:
        data = f.read()
    w, h = struct.unpack(">II", data[16:24])  # PNG IHDR
    resp = {"id": req["id"], "detections": [
        {"bbox": [0.0, 0.0, float(w), float(h)], "score": 1.0, "category": "person"}
    ]}
    sys.stdout.write(json.dumps(resp) + "\n")
    sys.stdout.flush()
"#,
    )
    .unwrap();
    let mut handle =
        DetectorHandle::subprocess(&format!("python3 {}", script.display())).unwrap();
    let crop = crop();
    let detections = handle.detect(&request(&crop, 11)).unwrap();
    std::env::remove_var("FOLIAGE_TMPDIR");
    assert_eq!(detections[0].bbox, BBox::new(0.0, 0.0, 16.0, 16.0));
}
