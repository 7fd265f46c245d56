//! Shared fixtures and independent oracles for the integration suites.
//!
//! The oracles here deliberately re-derive results by brute force (per-pixel
//! ray casting, exhaustive rectangle enumeration) so they share no code with
//! the implementation paths they check.

#![allow(dead_code)]

use std::path::Path;

use image::{Rgb, RgbImage};
use serde_json::Map;
use tempfile::TempDir;

use foliage_core::coco::{Annotation, Attributes, Category, Dataset, ImageRecord, Segmentation};
use foliage_core::evalprot::{max_nonoverlap_region, Region};
use foliage_core::geom::{BBox, GridRect};
use foliage_core::mask::BinaryMask;
use foliage_core::occlusion::OcclusionLevel;
use foliage_core::rng::SplitMix64;

pub const RED: [u8; 3] = [255, 0, 0];
pub const BLACK: [u8; 3] = [0, 0, 0];

// ---------------------------------------------------------------------------
// Brute-force even-odd rasterization oracle
// ---------------------------------------------------------------------------

/// Ray-cast point-in-polygon, even-odd rule, half-open vertex convention.
pub fn point_in_polygons(polys: &[Vec<f64>], px: f64, py: f64) -> bool {
    polys.iter().any(|poly| {
        let n = poly.len() / 2;
        let mut crossings = 0usize;
        for i in 0..n {
            let (x1, y1) = (poly[2 * i], poly[2 * i + 1]);
            let j = (i + 1) % n;
            let (x2, y2) = (poly[2 * j], poly[2 * j + 1]);
            if (y1 <= py && py < y2) || (y2 <= py && py < y1) {
                let x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1);
                if px < x_cross {
                    crossings += 1;
                }
            }
        }
        crossings % 2 == 1
    })
}

pub fn brute_force_polygon_mask(polys: &[Vec<f64>], w: u32, h: u32) -> BinaryMask {
    BinaryMask::from_fn(w, h, |x, y| {
        point_in_polygons(polys, x as f64 + 0.5, y as f64 + 0.5)
    })
}

pub fn random_polygon(rng: &mut SplitMix64, w: u32, h: u32) -> Vec<f64> {
    let vertices = rng.range_usize(3, 10);
    let mut coords = Vec::with_capacity(vertices * 2);
    for _ in 0..vertices {
        coords.push(rng.uniform(-3.0, w as f64 + 3.0));
        coords.push(rng.uniform(-3.0, h as f64 + 3.0));
    }
    coords
}

// ---------------------------------------------------------------------------
// Exhaustive maximal-region oracle
// ---------------------------------------------------------------------------

/// Same tie-break as the implementation contract: max area, then greater
/// width, then smaller left, then smaller top.
fn oracle_better(a: &GridRect, b: &GridRect) -> bool {
    (a.area(), a.w, std::cmp::Reverse(a.x), std::cmp::Reverse(a.y))
        > (b.area(), b.w, std::cmp::Reverse(b.x), std::cmp::Reverse(b.y))
}

/// Enumerate every integer rectangle containing the seed inside the image,
/// keep those disjoint from all obstacles (obstacles overlapping the seed
/// are excluded, mirroring the documented rule), and take the best under
/// the tie-break.
pub fn brute_force_max_region(
    seed: GridRect,
    obstacles: &[GridRect],
    image_w: u32,
    image_h: u32,
) -> GridRect {
    let constraints: Vec<&GridRect> = obstacles
        .iter()
        .filter(|o| o.area() > 0 && !o.intersects(&seed))
        .collect();
    let mut best: Option<GridRect> = None;
    for left in 0..=seed.x {
        for right in seed.right()..=image_w {
            if right <= left {
                continue;
            }
            for top in 0..=seed.y {
                for bottom in seed.bottom()..=image_h {
                    if bottom <= top {
                        continue;
                    }
                    let rect = GridRect::new(left, top, right - left, bottom - top);
                    if constraints.iter().all(|o| !rect.intersects(o))
                        && best.map_or(true, |b| oracle_better(&rect, &b))
                    {
                        best = Some(rect);
                    }
                }
            }
        }
    }
    best.expect("the seed itself is always feasible")
}

// ---------------------------------------------------------------------------
// Synthetic person fixtures
// ---------------------------------------------------------------------------

pub fn person_category() -> Vec<Category> {
    vec![
        Category {
            id: 1,
            name: "person".into(),
            extra: Map::new(),
        },
        Category {
            id: 2,
            name: "tree".into(),
            extra: Map::new(),
        },
    ]
}

/// Axis-aligned rectangle polygon.
pub fn rect_polygon(x: f64, y: f64, w: f64, h: f64) -> Vec<f64> {
    vec![x, y, x + w, y, x + w, y + h, x, y + h]
}

pub fn paint_rect(img: &mut RgbImage, x: u32, y: u32, w: u32, h: u32, color: [u8; 3]) {
    for yy in y..(y + h).min(img.height()) {
        for xx in x..(x + w).min(img.width()) {
            img.put_pixel(xx, yy, Rgb(color));
        }
    }
}

/// A black image with two red "persons" and matching polygon annotations:
/// person boxes (10, 20, 30, 50) and (70, 20, 30, 50) scaled to the canvas.
pub fn fixture_image(image_id: u64, w: u32, h: u32, ann_base: u64) -> (RgbImage, Vec<Annotation>) {
    let mut img = RgbImage::from_pixel(w, h, Rgb([0, 0, 0]));
    let boxes = [
        (w / 12, h / 5, w / 4, h / 2),
        (w / 2 + w / 12, h / 5, w / 4, h / 2),
    ];
    let mut annotations = Vec::new();
    for (i, &(x, y, bw, bh)) in boxes.iter().enumerate() {
        paint_rect(&mut img, x, y, bw, bh, RED);
        annotations.push(Annotation {
            id: ann_base + i as u64,
            image_id,
            category_id: 1,
            bbox: BBox::new(x as f64, y as f64, bw as f64, bh as f64),
            area: (bw * bh) as f64,
            segmentation: Some(Segmentation::Polygons(vec![rect_polygon(
                x as f64, y as f64, bw as f64, bh as f64,
            )])),
            iscrowd: false,
            attributes: None,
            extra: Map::new(),
        });
    }
    (img, annotations)
}

/// Write `n` fixture images plus their dataset to `dir` (PNGs at the root,
/// which doubles as images_root). Returns the dataset.
pub fn write_fixture_dataset(dir: &Path, n: usize, w: u32, h: u32) -> Dataset {
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    for i in 0..n {
        let id = i as u64 + 1;
        let (img, anns) = fixture_image(id, w, h, id * 100);
        let file_name = format!("{id:04}.png");
        img.save(dir.join(&file_name)).unwrap();
        images.push(ImageRecord {
            id,
            file_name,
            width: w,
            height: h,
            extra: Map::new(),
        });
        annotations.extend(anns);
    }
    Dataset {
        images,
        annotations,
        categories: person_category(),
        extra: Map::new(),
    }
}

// ---------------------------------------------------------------------------
// Random dataset generator for round-trip properties
// ---------------------------------------------------------------------------

pub fn random_dataset(seed: u64) -> Dataset {
    let mut rng = SplitMix64::new(seed);
    let n_images = rng.range_usize(0, 4);
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    let mut ann_id = 1u64;
    for i in 0..n_images {
        let id = i as u64 + 1;
        let w = rng.range_u32(8, 32);
        let h = rng.range_u32(8, 32);
        let mut extra = Map::new();
        if rng.next_f64() < 0.5 {
            extra.insert("license".into(), serde_json::json!(rng.range_u32(1, 9)));
        }
        images.push(ImageRecord {
            id,
            file_name: format!("img_{id}.png"),
            width: w,
            height: h,
            extra,
        });
        let n_anns = rng.range_usize(0, 3);
        for _ in 0..n_anns {
            let bw = rng.range_u32(1, w / 2);
            let bh = rng.range_u32(1, h / 2);
            let x = rng.range_u32(0, w - bw);
            let y = rng.range_u32(0, h - bh);
            let segmentation = match rng.range_u32(0, 3) {
                0 => None,
                1 => Some(Segmentation::Polygons(vec![rect_polygon(
                    x as f64, y as f64, bw as f64, bh as f64,
                )])),
                2 => {
                    let mask = BinaryMask::from_fn(w, h, |px, py| {
                        px >= x && px < x + bw && py >= y && py < y + bh
                    });
                    let rle = foliage_core::coco::mask_to_rle(&mask);
                    Some(Segmentation::Rle {
                        size: [rle.height, rle.width],
                        counts: rle.counts,
                    })
                }
                _ => {
                    let mask = BinaryMask::from_fn(w, h, |px, py| (px + py + x) % 3 == 0);
                    let rle = foliage_core::coco::mask_to_rle(&mask);
                    Some(Segmentation::CompressedRle {
                        size: [rle.height, rle.width],
                        counts: foliage_core::coco::rle_encode_string(&rle),
                    })
                }
            };
            let attributes = if rng.next_f64() < 0.4 {
                Some(foliage_core::coco::Attributes {
                    occlusion_level: Some(
                        foliage_core::OcclusionLevel::from_index(rng.range_u32(0, 3) as u8)
                            .unwrap(),
                    ),
                    visible_fraction: Some(rng.range_u32(0, 4) as f64 * 0.25),
                    fully_occluded: Some(rng.next_f64() < 0.1),
                    extra: Map::new(),
                })
            } else {
                None
            };
            annotations.push(Annotation {
                id: ann_id,
                image_id: id,
                category_id: 1 + rng.range_u64(0, 1),
                bbox: BBox::new(x as f64, y as f64, bw as f64, bh as f64),
                area: (bw * bh) as f64,
                segmentation,
                iscrowd: rng.next_f64() < 0.1,
                attributes,
                extra: Map::new(),
            });
            ann_id += 1;
        }
    }
    let mut extra = Map::new();
    if rng.next_f64() < 0.5 {
        extra.insert(
            "info".into(),
            serde_json::json!({"year": 2020, "note": "fixture"}),
        );
    }
    Dataset {
        images,
        annotations,
        categories: person_category(),
        extra,
    }
}

pub fn random_mask(rng: &mut SplitMix64, max_side: u32) -> BinaryMask {
    let w = rng.range_u32(1, max_side);
    let h = rng.range_u32(1, max_side);
    let density = rng.next_f64();
    BinaryMask::from_fn(w, h, |_, _| rng.next_f64() < density)
}

// ---------------------------------------------------------------------------
// Hand-derivable evaluation fixture
// ---------------------------------------------------------------------------

pub fn person(id: u64, image_id: u64, bbox: BBox, level: OcclusionLevel) -> Annotation {
    Annotation {
        id,
        image_id,
        category_id: 1,
        bbox,
        area: bbox.w * bbox.h,
        segmentation: Some(Segmentation::Polygons(vec![rect_polygon(
            bbox.x, bbox.y, bbox.w, bbox.h,
        )])),
        iscrowd: false,
        attributes: Some(Attributes {
            occlusion_level: Some(level),
            visible_fraction: None,
            fully_occluded: None,
            extra: Map::new(),
        }),
        extra: Map::new(),
    }
}

pub fn record(id: u64, w: u32, h: u32) -> ImageRecord {
    ImageRecord {
        id,
        file_name: format!("{id}.png"),
        width: w,
        height: h,
        extra: Map::new(),
    }
}

/// Build the fixture on disk; returns (dataset, regions, tempdir).
pub fn build_protocol_fixture() -> (Dataset, Vec<Region>, TempDir) {
    let dir = tempfile::tempdir().unwrap();

    // image 1
    let mut img1 = RgbImage::from_pixel(100, 100, Rgb(BLACK));
    paint_rect(&mut img1, 10, 10, 20, 40, RED); // A, visible
    img1.save(dir.path().join("1.png")).unwrap(); // B stays black
    let a = person(1, 1, BBox::new(10.0, 10.0, 20.0, 40.0), OcclusionLevel::L0);
    let b = person(2, 1, BBox::new(60.0, 10.0, 20.0, 40.0), OcclusionLevel::L3);

    // image 2
    let mut img2 = RgbImage::from_pixel(100, 100, Rgb(BLACK));
    paint_rect(&mut img2, 10, 10, 30, 60, RED); // C
    paint_rect(&mut img2, 10, 30, 30, 10, BLACK); // bar across C
    paint_rect(&mut img2, 60, 10, 8, 40, RED); // D vertical bar
    paint_rect(&mut img2, 60, 42, 20, 8, RED); // D foot (416 px total)
    img2.save(dir.path().join("2.png")).unwrap();
    let c = person(3, 2, BBox::new(10.0, 10.0, 30.0, 60.0), OcclusionLevel::L1);
    let d = person(4, 2, BBox::new(60.0, 10.0, 20.0, 40.0), OcclusionLevel::L2);

    // image 3: background bait only
    let mut img3 = RgbImage::from_pixel(100, 100, Rgb(BLACK));
    for (x, y) in [(66, 65), (65, 66), (66, 66), (67, 66), (66, 67)] {
        img3.put_pixel(x, y, Rgb(RED)); // plus shape, score 5/9
    }
    paint_rect(&mut img3, 14, 64, 4, 4, RED); // solid block, score 1.0
    img3.save(dir.path().join("3.png")).unwrap();

    let dataset = Dataset {
        images: vec![record(1, 100, 100), record(2, 100, 100), record(3, 100, 100)],
        annotations: vec![a, b, c, d],
        categories: person_category(),
        extra: Map::new(),
    };

    // positive regions through the real maximal-region computation
    let mut regions = Vec::new();
    let boxes = [
        (1u64, 1u64, GridRect::new(10, 10, 20, 40), GridRect::new(60, 10, 20, 40), OcclusionLevel::L0),
        (2, 1, GridRect::new(60, 10, 20, 40), GridRect::new(10, 10, 20, 40), OcclusionLevel::L3),
        (3, 2, GridRect::new(10, 10, 30, 60), GridRect::new(60, 10, 20, 40), OcclusionLevel::L1),
        (4, 2, GridRect::new(60, 10, 20, 40), GridRect::new(10, 10, 30, 60), OcclusionLevel::L2),
    ];
    for (ann_id, image_id, seed, obstacle, level) in boxes {
        let (rect, flagged) = max_nonoverlap_region(seed, &[obstacle], 100, 100).unwrap();
        assert!(!flagged);
        regions.push(Region::positive(image_id, rect, ann_id, level, false));
    }
    assert_eq!(regions[0].rect, GridRect::new(0, 0, 60, 100));
    assert_eq!(regions[1].rect, GridRect::new(30, 0, 70, 100));
    assert_eq!(regions[2].rect, GridRect::new(0, 0, 60, 100));
    assert_eq!(regions[3].rect, GridRect::new(40, 0, 60, 100));

    regions.push(Region::background(3, GridRect::new(10, 10, 30, 30))); // empty
    regions.push(Region::background(3, GridRect::new(50, 50, 40, 40))); // plus bait
    regions.push(Region::background(3, GridRect::new(10, 60, 20, 20))); // solid bait

    (dataset, regions, dir)
}

