//! foliage: composite procedural tree occluders onto COCO datasets and
//! evaluate detectors with a region-based protocol stratified by occlusion
//! level.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::Failure;

#[derive(Parser)]
#[command(name = "foliage", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_aspect(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("{s:?} is not LO:HI"))?;
    let lo: f64 = lo.parse().map_err(|_| format!("bad aspect bound {lo:?}"))?;
    let hi: f64 = hi.parse().map_err(|_| format!("bad aspect bound {hi:?}"))?;
    Ok((lo, hi))
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic asset bank (trunks + leaves).
    SynthAssets {
        #[arg(long)]
        seed: u64,
        /// Output directory (parent must exist).
        #[arg(long)]
        out: PathBuf,
    },
    /// Augment a COCO dataset with generated tree occluders.
    Augment {
        /// JSON config file; see the README for the schema.
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (0 = all cores). Output is identical at any count.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Extract positive (maximal non-overlap) and background regions.
    Regions {
        #[arg(long)]
        dataset: PathBuf,
        /// Output regions.json path.
        #[arg(long)]
        out: PathBuf,
        /// Background regions sampled per image.
        #[arg(long, default_value_t = 100)]
        n_background: usize,
        #[arg(long)]
        seed: u64,
        /// Minimum background-region side in pixels.
        #[arg(long, default_value_t = 16)]
        min_side: u32,
        /// Background aspect (height/width) range as LO:HI.
        #[arg(long, default_value = "0.5:2.0", value_parser = parse_aspect)]
        aspect: (f64, f64),
        #[arg(long, default_value = "person")]
        person_category: String,
    },
    /// Run a detector over a region file and write eval_result.csv.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        images_root: PathBuf,
        #[arg(long)]
        regions: PathBuf,
        /// mock:RRGGBB[:TOL] | precomputed:FILE | subprocess:COMMAND
        #[arg(long)]
        detector: String,
        /// Prefix for output files ("<prefix>eval_result.csv").
        #[arg(long, default_value = "")]
        out_prefix: String,
        #[arg(long, default_value = "person")]
        person_category: String,
        /// Score-threshold sweep granularity.
        #[arg(long, default_value_t = 0.01)]
        sweep_step: f64,
    },
    /// Render per-level precision/recall curves from eval_result.csv.
    Report {
        #[arg(long)]
        eval_csv: PathBuf,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Reference detector child process speaking the NDJSON wire protocol,
    /// backed by the color-blob mock detector.
    ServeMock {
        /// RRGGBB hex target color.
        #[arg(long, default_value = "ff0000")]
        color: String,
        #[arg(long, default_value_t = 0)]
        tolerance: u8,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::SynthAssets { seed, out } => commands::cmd_synth_assets(seed, &out),
        Command::Augment { config, workers } => commands::cmd_augment(&config, workers),
        Command::Regions {
            dataset,
            out,
            n_background,
            seed,
            min_side,
            aspect,
            person_category,
        } => commands::cmd_regions(
            &dataset,
            &out,
            n_background,
            seed,
            min_side,
            aspect,
            &person_category,
        ),
        Command::Eval {
            dataset,
            images_root,
            regions,
            detector,
            out_prefix,
            person_category,
            sweep_step,
        } => commands::cmd_eval(
            &dataset,
            &images_root,
            &regions,
            &detector,
            &out_prefix,
            &person_category,
            sweep_step,
        ),
        Command::Report { eval_csv, out } => commands::cmd_report(&eval_csv, &out),
        Command::ServeMock { color, tolerance } => {
            let color = commands::parse_color(&color)?;
            commands::cmd_serve_mock(color, tolerance)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(failure) = run(cli) {
        eprintln!("error: {}", failure.message());
        std::process::exit(failure.exit_code());
    }
}
