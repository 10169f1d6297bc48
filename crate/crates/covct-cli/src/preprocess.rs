//! The `preprocess` subcommand: read each scan's slice images, segment the
//! lungs, crop to the lung bounding box, resize to a standard grid, and
//! write one CVOL file per scan.
//!
//! Scans are processed independently; a scan that fails is reported and the
//! batch continues. Only an unusable input or output root aborts the run.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;

#[cfg(feature = "rayon")]
use rayon::prelude::*;

use covct::cvol::write_volume;
use covct::lungseg::{crop, mask_bounding_box, segment_lungs, BoundingBox, SegmentationParams};
use covct::resample::{resize_to, StandardSize};
use covct::slices::load_slice_stack;
use covct::Error;

#[derive(clap::Args)]
pub struct Args {
    /// Root directory with one subdirectory of slice images per scan
    #[arg(long, env = "COVCT_INPUT")]
    input: PathBuf,
    /// Output directory for <scan_id>.cvol files
    #[arg(long, env = "COVCT_OUTPUT")]
    output: PathBuf,
    /// Target grid: small (64x128x128), medium (256x256x176) or large
    /// (320x320x224)
    #[arg(long, env = "COVCT_SIZE", default_value_t = StandardSize::Small)]
    size: StandardSize,
    /// Intensity below which a voxel counts as air
    #[arg(long, env = "COVCT_THRESHOLD", default_value_t = SegmentationParams::default().threshold)]
    threshold: f32,
    /// Smallest air component kept, as a fraction of the volume
    #[arg(long, env = "COVCT_MIN_COMPONENT", default_value_t = SegmentationParams::default().min_component_fraction)]
    min_component: f64,
    /// Ball radius for morphological closing of the lung mask
    #[arg(long, env = "COVCT_CLOSING_RADIUS", default_value_t = SegmentationParams::default().closing_radius)]
    closing_radius: usize,
    /// Margin (in voxels) added around the lung bounding box
    #[arg(long, env = "COVCT_MARGIN", default_value_t = 2)]
    margin: usize,
    /// Worker threads (default: all available cores)
    #[arg(long, env = "COVCT_JOBS")]
    jobs: Option<usize>,
    /// Reprocess scans whose output file already exists
    #[arg(long, env = "COVCT_FORCE")]
    force: bool,
}

enum Outcome {
    Done {
        fallback: bool,
        mask_fraction: Option<f64>,
        bounding_box: BoundingBox,
        out_dims: (usize, usize, usize),
        millis: u128,
    },
    Skipped,
    Failed(String),
}

struct ScanReport {
    scan_id: String,
    outcome: Outcome,
}

pub fn run(args: &Args) -> anyhow::Result<()> {
    let started = Instant::now();
    let params = SegmentationParams {
        threshold: args.threshold,
        min_component_fraction: args.min_component,
        closing_radius: args.closing_radius,
    };
    params.validate()?;

    let mut scans: Vec<(String, PathBuf)> = Vec::new();
    let entries = fs::read_dir(&args.input)
        .with_context(|| format!("cannot read input root {}", args.input.display()))?;
    for entry in entries {
        let entry =
            entry.with_context(|| format!("cannot read input root {}", args.input.display()))?;
        let path = entry.path();
        if path.is_dir() {
            scans.push((entry.file_name().to_string_lossy().into_owned(), path));
        }
    }
    scans.sort();
    fs::create_dir_all(&args.output)
        .with_context(|| format!("cannot create output root {}", args.output.display()))?;

    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from))
        .max(1);

    let process = |(scan_id, dir): &(String, PathBuf)| -> ScanReport {
        let out_path = args.output.join(format!("{scan_id}.cvol"));
        let outcome = process_scan(dir, &out_path, &params, args.size, args.margin, args.force);
        let status = match &outcome {
            Outcome::Done { millis, .. } => format!("done in {millis} ms"),
            Outcome::Skipped => "skipped (output exists)".to_string(),
            Outcome::Failed(message) => format!("failed: {message}"),
        };
        eprintln!("{scan_id}: {status}");
        ScanReport {
            scan_id: scan_id.clone(),
            outcome,
        }
    };

    // Input order is sorted and the parallel map preserves it, so reports
    // always come out in scan-id order.
    #[cfg(feature = "rayon")]
    let reports: Vec<ScanReport> = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("cannot build worker pool")?
        .install(|| scans.par_iter().map(process).collect());
    #[cfg(not(feature = "rayon"))]
    let reports: Vec<ScanReport> = {
        if jobs > 1 {
            log::warn!("built without the rayon feature; running sequentially");
        }
        scans.iter().map(process).collect()
    };

    let mut done = 0usize;
    let mut skipped = 0usize;
    let mut failed = 0usize;
    let mut fallbacks = 0usize;
    for report in &reports {
        match &report.outcome {
            Outcome::Done {
                fallback,
                mask_fraction,
                bounding_box,
                out_dims,
                millis,
            } => {
                done += 1;
                let mut line = format!(
                    "scan={} status=ok fallback={}",
                    report.scan_id,
                    if *fallback { "yes" } else { "no" }
                );
                if *fallback {
                    fallbacks += 1;
                }
                if let Some(fraction) = mask_fraction {
                    line.push_str(&format!(" mask_fraction={fraction:.6}"));
                }
                line.push_str(&format!(
                    " box={}:{},{}:{},{}:{} out={}x{}x{} ms={millis}",
                    bounding_box.min[0],
                    bounding_box.max[0],
                    bounding_box.min[1],
                    bounding_box.max[1],
                    bounding_box.min[2],
                    bounding_box.max[2],
                    out_dims.0,
                    out_dims.1,
                    out_dims.2,
                ));
                println!("{line}");
            }
            Outcome::Skipped => {
                skipped += 1;
                println!("scan={} status=skipped", report.scan_id);
            }
            Outcome::Failed(message) => {
                failed += 1;
                println!("scan={} status=error error={message:?}", report.scan_id);
            }
        }
    }
    println!("--- summary");
    println!("scans={}", reports.len());
    println!("ok={done}");
    println!("skipped={skipped}");
    println!("errors={failed}");
    println!("fallbacks={fallbacks}");
    println!("size={}", args.size);
    println!("jobs={jobs}");
    println!("elapsed_ms={}", started.elapsed().as_millis());
    Ok(())
}

fn process_scan(
    dir: &Path,
    out_path: &Path,
    params: &SegmentationParams,
    size: StandardSize,
    margin: usize,
    force: bool,
) -> Outcome {
    // Failure strings carry the whole error chain (Display stops at the
    // outermost message).
    fn failed(e: Error) -> Outcome {
        Outcome::Failed(format!("{:#}", anyhow::Error::from(e)))
    }
    if out_path.exists() && !force {
        return Outcome::Skipped;
    }
    let start = Instant::now();
    let volume = match load_slice_stack(dir) {
        Ok(v) => v,
        Err(e) => return failed(e),
    };
    // A scan where segmentation finds no lung-sized air pocket is still
    // usable: fall back to the whole volume instead of cropping.
    let (bounding_box, mask_fraction, fallback) = match segment_lungs(&volume, params) {
        Ok(mask) => match mask_bounding_box(&mask, margin) {
            Ok(b) => (b, Some(mask.fraction()), false),
            Err(e) => return failed(e),
        },
        Err(Error::SegmentationEmpty { .. }) => {
            let (d, w, h) = volume.dims();
            let full = BoundingBox {
                min: [0; 3],
                max: [d - 1, w - 1, h - 1],
            };
            (full, None, true)
        }
        Err(e) => return failed(e),
    };
    let written = crop(&volume, &bounding_box)
        .and_then(|cropped| resize_to(&cropped, size))
        .and_then(|resized| write_volume(out_path, &resized).map(|()| resized.dims()));
    match written {
        Ok(out_dims) => Outcome::Done {
            fallback,
            mask_fraction,
            bounding_box,
            out_dims,
            millis: start.elapsed().as_millis(),
        },
        Err(e) => failed(e),
    }
}
