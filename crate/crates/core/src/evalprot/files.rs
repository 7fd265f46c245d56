//! On-disk formats for the evaluation pipeline: the region list
//! (regions.json), the confusion/PR table (eval_result.csv, columns
//! level,threshold,tp,fp,fn,tn,precision,recall), and a self-contained SVG
//! with one precision/recall polyline per occlusion level.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::occlusion::{ConfusionCounts, OcclusionLevel, ALL_LEVELS};

use super::{EvalResult, Region, RegionKind};

pub fn write_regions_json(path: &Path, regions: &[Region]) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(regions)?;
    fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_regions_json(path: &Path) -> Result<Vec<Region>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let regions: Vec<Region> = serde_json::from_slice(&bytes)?;
    for (i, r) in regions.iter().enumerate() {
        if r.kind == RegionKind::Positive && r.annotation_id.is_none() {
            return Err(Error::InvalidInput(format!(
                "region {i}: positive region without annotation_id"
            )));
        }
    }
    Ok(regions)
}

/// Render the per-level confusion table. Levels without positive regions
/// are omitted (their recall is undefined); floats print in shortest
/// round-trip form so reloading is lossless.
pub fn eval_csv_string(result: &EvalResult) -> String {
    let mut out = String::from("level,threshold,tp,fp,fn,tn,precision,recall\n");
    for level in ALL_LEVELS {
        if result.positives_per_level[level.index()] == 0 {
            continue;
        }
        for (i, &tau) in result.thresholds.iter().enumerate() {
            let c = result.confusion(level, i);
            let recall = c.recall().expect("level has positives");
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                level,
                tau,
                c.tp,
                c.fp,
                c.fn_,
                c.tn,
                c.precision(),
                recall
            ));
        }
    }
    out
}

pub fn write_eval_csv(path: &Path, result: &EvalResult) -> Result<()> {
    fs::write(path, eval_csv_string(result)).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reload a CSV produced by [`eval_csv_string`]. Levels absent from the
/// file get the shared background FP/TN columns of the first present level,
/// which reproduces the original result exactly (backgrounds count for
/// every level).
pub fn parse_eval_csv(text: &str) -> Result<EvalResult> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != "level,threshold,tp,fp,fn,tn,precision,recall" {
        return Err(Error::InvalidInput(format!(
            "unexpected CSV header {header:?}"
        )));
    }
    let mut taus: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::new());
    let mut rows: [Vec<ConfusionCounts>; 4] = std::array::from_fn(|_| Vec::new());
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::InvalidInput(format!(
                "line {}: expected 8 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let level = OcclusionLevel::from_name(fields[0]).ok_or_else(|| {
            Error::InvalidInput(format!("line {}: unknown level {:?}", lineno + 2, fields[0]))
        })?;
        let parse_f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::InvalidInput(format!("line {}: bad float {s:?}", lineno + 2)))
        };
        let parse_u = |s: &str| -> Result<u64> {
            s.parse()
                .map_err(|_| Error::InvalidInput(format!("line {}: bad count {s:?}", lineno + 2)))
        };
        taus[level.index()].push(parse_f(fields[1])?);
        rows[level.index()].push(ConfusionCounts {
            tp: parse_u(fields[2])?,
            fp: parse_u(fields[3])?,
            fn_: parse_u(fields[4])?,
            tn: parse_u(fields[5])?,
        });
    }
    let first = rows
        .iter()
        .position(|r| !r.is_empty())
        .ok_or_else(|| Error::InvalidInput("CSV contains no data rows".to_string()))?;
    let thresholds = taus[first].clone();
    for level in ALL_LEVELS {
        let idx = level.index();
        if !rows[idx].is_empty() && taus[idx] != thresholds {
            return Err(Error::InvalidInput(format!(
                "level {level}: threshold sweep differs from level {}",
                ALL_LEVELS[first]
            )));
        }
    }
    let mut result = EvalResult::new(thresholds.clone());
    result.n_background = rows[first].first().map_or(0, |c| c.fp + c.tn);
    for level in ALL_LEVELS {
        let idx = level.index();
        if rows[idx].is_empty() {
            // level had no positive regions; it still shares the background
            // FP/TN columns with every other level
            result.counts[idx] = rows[first]
                .iter()
                .map(|c| ConfusionCounts {
                    tp: 0,
                    fn_: 0,
                    fp: c.fp,
                    tn: c.tn,
                })
                .collect();
        } else {
            result.positives_per_level[idx] = rows[idx][0].tp + rows[idx][0].fn_;
            result.counts[idx] = rows[idx].clone();
        }
    }
    Ok(result)
}

pub fn read_eval_csv(path: &Path) -> Result<EvalResult> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_eval_csv(&text)
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 60.0;
const LEVEL_COLORS: [&str; 4] = ["#1f77b4", "#2ca02c", "#ff7f0e", "#d62728"];

/// Self-contained SVG: recall on x, precision on y, one polyline per level
/// that has positive regions. Deterministic output for identical input.
pub fn curves_svg_string(result: &EvalResult) -> String {
    let pw = SVG_W - MARGIN_L - MARGIN_R;
    let ph = SVG_H - MARGIN_T - MARGIN_B;
    let px = |recall: f64| MARGIN_L + recall * pw;
    let py = |precision: f64| MARGIN_T + (1.0 - precision) * ph;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" \
         viewBox=\"0 0 {SVG_W} {SVG_H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // axes
    svg.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        MARGIN_L,
        MARGIN_T + ph,
        MARGIN_L + pw,
        MARGIN_T + ph
    ));
    svg.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        MARGIN_L,
        MARGIN_T,
        MARGIN_L,
        MARGIN_T + ph
    ));
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            px(v),
            MARGIN_T + ph,
            px(v),
            MARGIN_T + ph + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{v:.2}</text>\n",
            px(v),
            MARGIN_T + ph + 20.0
        ));
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            MARGIN_L - 5.0,
            py(v),
            MARGIN_L,
            py(v)
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{v:.2}</text>\n",
            MARGIN_L - 8.0,
            py(v) + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\">Recall</text>\n",
        MARGIN_L + pw / 2.0,
        SVG_H - 15.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {:.2})\">Precision</text>\n",
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0
    ));

    let mut legend_row = 0;
    for level in ALL_LEVELS {
        let Ok(curve) = super::pr_curve(result, level) else {
            continue;
        };
        let color = LEVEL_COLORS[level.index()];
        let points: Vec<String> = curve
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.recall), py(p.precision)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        let ly = MARGIN_T + 14.0 + legend_row as f64 * 18.0;
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            MARGIN_L + pw - 70.0,
            ly - 4.0,
            MARGIN_L + pw - 46.0,
            ly - 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\">{level}</text>\n",
            MARGIN_L + pw - 40.0,
            ly
        ));
        legend_row += 1;
    }

    svg.push_str("</svg>\n");
    svg
}

pub fn write_curves_svg(path: &Path, result: &EvalResult) -> Result<()> {
    fs::write(path, curves_svg_string(result))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::GridRect;

    fn sample_result() -> EvalResult {
        let mut result = EvalResult::new(vec![0.0, 0.5, 1.0]);
        result.record_positive(OcclusionLevel::L0, Some(1.0));
        result.record_positive(OcclusionLevel::L0, Some(0.4));
        result.record_positive(OcclusionLevel::L1, None);
        result.record_positive(OcclusionLevel::L2, Some(0.7));
        result.record_background(Some(0.6));
        result.record_background(None);
        result
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let result = sample_result();
        let text = eval_csv_string(&result);
        let back = parse_eval_csv(&text).unwrap();
        assert_eq!(back, result);
    }

    #[test]
    fn csv_omits_levels_without_positives() {
        let result = sample_result(); // L3 has no positives
        let text = eval_csv_string(&result);
        assert!(!text.contains("L3,"));
        assert!(text.contains("L0,"));
    }

    #[test]
    fn csv_rejects_foreign_headers() {
        assert!(parse_eval_csv("a,b,c\n").is_err());
    }

    #[test]
    fn svg_has_one_polyline_per_populated_level() {
        let result = sample_result();
        let svg = curves_svg_string(&result);
        assert_eq!(svg.matches("<polyline").count(), 3); // L0, L1, L2
        assert!(svg.contains("Recall"));
        assert!(svg.contains("Precision"));
        assert!(!svg.contains(">L3<"));
    }

    #[test]
    fn svg_is_deterministic() {
        let result = sample_result();
        assert_eq!(curves_svg_string(&result), curves_svg_string(&result));
    }

    #[test]
    fn regions_json_round_trip() {
        let regions = vec![
            Region::positive(3, GridRect::new(0, 0, 10, 10), 7, OcclusionLevel::L2, true),
            Region::background(3, GridRect::new(12, 0, 5, 5)),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("regions.json");
        write_regions_json(&path, &regions).unwrap();
        let back = read_regions_json(&path).unwrap();
        assert_eq!(back, regions);
    }

    #[test]
    fn positive_region_without_annotation_id_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("regions.json");
        std::fs::write(
            &path,
            br#"[{"image_id": 1, "rect": [0, 0, 4, 4], "kind": "positive"}]"#,
        )
        .unwrap();
        assert!(read_regions_json(&path).is_err());
    }
}
