//! Subcommand implementations. Each returns `Failure::Usage` for bad
//! arguments/configs/paths (exit 2) and `Failure::Runtime` for errors during
//! execution (exit 1).

use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use foliage_core::augment::augment_dataset;
use foliage_core::coco::parse_dataset;
use foliage_core::detector::{serve_mock_ndjson, DetectorHandle};
use foliage_core::evalprot::files::{
    read_eval_csv, read_regions_json, write_curves_svg, write_eval_csv, write_regions_json,
};
use foliage_core::evalprot::{build_regions, evaluate, sweep_with_step, SamplerConstraints};
use foliage_core::occlusion::ALL_LEVELS;
use foliage_core::treegen::{load_asset_bank, save_asset_bank, synthesize_assets, AssetBank};

use crate::config::{AssetSource, AugmentFileConfig};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<foliage_core::Error> for Failure {
    fn from(e: foliage_core::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn require_file(path: &Path, what: &str) -> Result<(), Failure> {
    if !path.is_file() {
        return Err(usage(format!("{what} {} does not exist", path.display())));
    }
    Ok(())
}

fn require_dir(path: &Path, what: &str) -> Result<(), Failure> {
    if !path.is_dir() {
        return Err(usage(format!(
            "{what} {} is not a directory",
            path.display()
        )));
    }
    Ok(())
}

pub fn parse_color(s: &str) -> Result<[u8; 3], Failure> {
    let bytes = s.strip_prefix('#').unwrap_or(s);
    if bytes.len() != 6 || !bytes.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(usage(format!("color {s:?} is not RRGGBB hex")));
    }
    let channel = |i: usize| u8::from_str_radix(&bytes[i..i + 2], 16).unwrap();
    Ok([channel(0), channel(2), channel(4)])
}

/// `mock:RRGGBB[:TOL]` | `precomputed:FILE` | `subprocess:COMMAND`
pub fn parse_detector_spec(spec: &str) -> Result<DetectorSpec, Failure> {
    let (mode, rest) = spec
        .split_once(':')
        .ok_or_else(|| usage(format!("detector spec {spec:?} has no mode prefix")))?;
    match mode {
        "mock" => {
            let (color, tolerance) = match rest.split_once(':') {
                Some((c, t)) => (
                    parse_color(c)?,
                    t.parse::<u8>()
                        .map_err(|_| usage(format!("mock tolerance {t:?} is not 0..=255")))?,
                ),
                None => (parse_color(rest)?, 0),
            };
            Ok(DetectorSpec::Mock { color, tolerance })
        }
        "precomputed" => Ok(DetectorSpec::Precomputed(PathBuf::from(rest))),
        "subprocess" => Ok(DetectorSpec::Subprocess(rest.to_string())),
        other => Err(usage(format!(
            "unknown detector mode {other:?} (expected mock, precomputed or subprocess)"
        ))),
    }
}

#[derive(Debug, Clone)]
pub enum DetectorSpec {
    Mock { color: [u8; 3], tolerance: u8 },
    Precomputed(PathBuf),
    Subprocess(String),
}

impl DetectorSpec {
    fn build(&self) -> Result<DetectorHandle, Failure> {
        match self {
            DetectorSpec::Mock { color, tolerance } => {
                Ok(DetectorHandle::mock(*color, *tolerance))
            }
            DetectorSpec::Precomputed(path) => {
                require_file(path, "precomputed results file")?;
                Ok(DetectorHandle::precomputed_from_path(path)?)
            }
            DetectorSpec::Subprocess(cmd) => Ok(DetectorHandle::subprocess(cmd)?),
        }
    }
}

pub fn cmd_synth_assets(seed: u64, out: &Path) -> CmdResult {
    match out.parent() {
        Some(parent) if !parent.as_os_str().is_empty() && !parent.is_dir() => {
            return Err(usage(format!(
                "parent directory {} does not exist",
                parent.display()
            )));
        }
        _ => {}
    }
    let bank = synthesize_assets(seed);
    save_asset_bank(&bank, out)?;
    println!(
        "wrote {} trunks and {} leaves to {}",
        bank.trunks.len(),
        bank.leaves.len(),
        out.display()
    );
    Ok(())
}

fn load_bank(source: &AssetSource) -> Result<AssetBank, Failure> {
    match source {
        AssetSource::Synthetic(seed) => Ok(synthesize_assets(*seed)),
        AssetSource::Dir(path) => {
            require_dir(path, "asset bank")?;
            Ok(load_asset_bank(path)?)
        }
    }
}

pub fn cmd_augment(config_path: &Path, workers: usize) -> CmdResult {
    require_file(config_path, "config file")?;
    let bytes = std::fs::read(config_path)
        .map_err(|e| usage(format!("cannot read {}: {e}", config_path.display())))?;
    let config: AugmentFileConfig = serde_json::from_slice(&bytes)
        .map_err(|e| usage(format!("invalid config {}: {e}", config_path.display())))?;
    require_file(&config.dataset, "dataset")?;
    require_dir(&config.images_root, "images root")?;
    let augment_config = config.augment_config();
    augment_config
        .validate()
        .map_err(|e| usage(format!("invalid config: {e}")))?;
    let bank = load_bank(&config.assets)?;

    let dataset_bytes = std::fs::read(&config.dataset)
        .map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", config.dataset.display())))?;
    let dataset = parse_dataset(&dataset_bytes)?;

    let report = augment_dataset(
        &dataset,
        &bank,
        &augment_config,
        &config.images_root,
        &config.output,
        workers,
    )
    .map_err(|e| match e {
        foliage_core::Error::UnknownCategory(_) => usage(e.to_string()),
        other => Failure::Runtime(other.to_string()),
    })?;

    println!(
        "processed {} images ({} skipped without {}, {} unreadable)",
        report.images_processed,
        report.images_skipped_no_person,
        augment_config.person_category,
        report.skipped_images.len()
    );
    println!(
        "occlusion levels: L0 {} / L1 {} / L2 {} / L3 {} ({} fully occluded, {} without segmentation)",
        report.level_counts.l0,
        report.level_counts.l1,
        report.level_counts.l2,
        report.level_counts.l3,
        report.fully_occluded,
        report.annotations_without_segmentation
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_regions(
    dataset_path: &Path,
    out_path: &Path,
    n_background: usize,
    seed: u64,
    min_side: u32,
    aspect_range: (f64, f64),
    person_category: &str,
) -> CmdResult {
    require_file(dataset_path, "dataset")?;
    let constraints = SamplerConstraints {
        min_side,
        aspect_range,
    };
    constraints
        .validate()
        .map_err(|e| usage(e.to_string()))?;
    let dataset = parse_dataset(
        &std::fs::read(dataset_path)
            .map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", dataset_path.display())))?,
    )?;
    let (regions, report) =
        build_regions(&dataset, person_category, n_background, &constraints, seed).map_err(
            |e| match e {
                foliage_core::Error::UnknownCategory(_) => usage(e.to_string()),
                other => Failure::Runtime(other.to_string()),
            },
        )?;
    write_regions_json(out_path, &regions)?;
    println!(
        "wrote {} regions ({} positive, {} background, {} flagged) to {}",
        regions.len(),
        report.positives,
        report.backgrounds,
        report.flagged,
        out_path.display()
    );
    if report.degenerate_skipped > 0 {
        eprintln!(
            "warning: skipped {} annotations with zero-area boxes",
            report.degenerate_skipped
        );
    }
    for image_id in &report.exhausted_images {
        eprintln!("warning: background sampler exhausted on image {image_id}");
    }
    Ok(())
}

pub fn cmd_eval(
    dataset_path: &Path,
    images_root: &Path,
    regions_path: &Path,
    detector_spec: &str,
    out_prefix: &str,
    person_category: &str,
    sweep_step: f64,
) -> CmdResult {
    require_file(dataset_path, "dataset")?;
    require_dir(images_root, "images root")?;
    require_file(regions_path, "regions file")?;
    let spec = parse_detector_spec(detector_spec)?;
    if !(sweep_step > 0.0 && sweep_step <= 1.0) {
        return Err(usage(format!("sweep step {sweep_step} outside (0, 1]")));
    }

    let dataset = parse_dataset(
        &std::fs::read(dataset_path)
            .map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", dataset_path.display())))?,
    )?;
    let regions = read_regions_json(regions_path)?;
    let flagged = regions.iter().filter(|r| r.overlap_flag).count();
    let mut detector = spec.build()?;
    let result = evaluate(
        &dataset,
        images_root,
        &regions,
        &mut detector,
        person_category,
        sweep_with_step(sweep_step),
    )?;

    let csv_path = PathBuf::from(format!("{out_prefix}eval_result.csv"));
    write_eval_csv(&csv_path, &result)?;
    println!("wrote {}", csv_path.display());
    if flagged > 0 {
        eprintln!("warning: {flagged} positive regions carried the overlap flag (included in counts)");
    }
    for level in ALL_LEVELS {
        let n = result.positives_per_level[level.index()];
        if n == 0 {
            eprintln!("warning: level {level}: no positive regions; its curve is omitted");
        } else {
            println!("level {level}: {n} positive regions");
        }
    }
    println!("background regions: {}", result.n_background);
    Ok(())
}

pub fn cmd_report(eval_csv: &Path, out_svg: &Path) -> CmdResult {
    require_file(eval_csv, "eval CSV")?;
    let result = read_eval_csv(eval_csv)?;
    for level in ALL_LEVELS {
        if result.positives_per_level[level.index()] == 0 {
            eprintln!("warning: level {level}: no positive regions; curve omitted");
        }
    }
    write_curves_svg(out_svg, &result)?;
    println!("wrote {}", out_svg.display());
    Ok(())
}

pub fn cmd_serve_mock(color: [u8; 3], tolerance: u8) -> CmdResult {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    serve_mock_ndjson(
        color,
        tolerance,
        BufReader::new(stdin.lock()),
        stdout.lock(),
    )?;
    std::io::stdout()
        .flush()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok(())
}
