//! `covct`: batch preprocessing and evaluation tools for chest-CT
//! classification pipelines.
//!
//! Every option can also be supplied through a `COVCT_`-prefixed environment
//! variable (flags take precedence).

mod preprocess;

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{ensure, Context};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use covct::folds::{make_folds, write_fold_file};
use covct::loss::{gradient_check, NUM_CLASSES};
use covct::manifest::{read_manifest, Category};
use covct::metrics::{
    ensemble_average, macro_f1, presence_decision, read_predictions, severity_decision,
    write_predictions, Presence, DEFAULT_PRESENCE_THRESHOLD,
};

#[derive(Parser)]
#[command(
    name = "covct",
    version,
    about = "Preprocess chest-CT slice stacks and evaluate classifier predictions"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convert slice-image scans into cropped, resized CVOL volumes
    Preprocess(preprocess::Args),
    /// Assign stratified cross-validation folds from a dataset manifest
    Split(SplitArgs),
    /// Score a prediction file against manifest labels with macro F1
    Score(ScoreArgs),
    /// Average several prediction files into one
    Ensemble(EnsembleArgs),
    /// Check analytic loss gradients against finite differences
    Losscheck(LosscheckArgs),
}

#[derive(clap::Args)]
struct SplitArgs {
    /// Dataset manifest (scan_id,partition,label rows)
    #[arg(long, env = "COVCT_MANIFEST")]
    manifest: PathBuf,
    /// Shuffle seed; fold 0 is always the validation partition
    #[arg(long, env = "COVCT_SEED", default_value_t = 0)]
    seed: u64,
    /// Output fold file (scan_id,fold rows)
    #[arg(long, env = "COVCT_OUT")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct ScoreArgs {
    /// Dataset manifest holding the truth labels
    #[arg(long, env = "COVCT_TRUTH")]
    truth: PathBuf,
    /// Prediction file to score
    #[arg(long, env = "COVCT_PRED")]
    pred: PathBuf,
    /// 1 = presence (negative vs positive), 2 = severity (four classes)
    #[arg(long, env = "COVCT_TASK", value_parser = clap::value_parser!(u8).range(1..=2))]
    task: u8,
    /// Decision threshold on 1 - p0 for the presence task
    #[arg(long, env = "COVCT_PRESENCE_THRESHOLD", default_value_t = DEFAULT_PRESENCE_THRESHOLD)]
    presence_threshold: f64,
}

#[derive(clap::Args)]
struct EnsembleArgs {
    /// Output prediction file
    #[arg(long, env = "COVCT_OUT")]
    out: PathBuf,
    /// Prediction files to average (all must cover the same scans)
    #[arg(required = true)]
    predictions: Vec<PathBuf>,
}

#[derive(clap::Args)]
struct LosscheckArgs {
    /// Number of random trials
    #[arg(long, env = "COVCT_TRIALS", default_value_t = 1000)]
    trials: usize,
    /// Seed for the trial generator
    #[arg(long, env = "COVCT_SEED", default_value_t = 0)]
    seed: u64,
    /// Maximum allowed relative error per trial
    #[arg(long, env = "COVCT_TOLERANCE", default_value_t = 1e-5)]
    tolerance: f64,
    /// Central-difference step
    #[arg(long, env = "COVCT_FD_STEP", default_value_t = 1e-6)]
    fd_step: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Cmd::Preprocess(args) => preprocess::run(args),
        Cmd::Split(args) => run_split(args),
        Cmd::Score(args) => run_score(args),
        Cmd::Ensemble(args) => run_ensemble(args),
        Cmd::Losscheck(args) => run_losscheck(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}

fn run_split(args: &SplitArgs) -> anyhow::Result<()> {
    let records = read_manifest(&args.manifest)?;
    let assignment = make_folds(&records, args.seed)?;
    write_fold_file(&args.out, &assignment)?;
    let sizes = assignment.fold_sizes();
    eprintln!(
        "assigned {} scans, fold sizes {:?} (seed {})",
        assignment.len(),
        sizes,
        args.seed
    );
    Ok(())
}

fn run_score(args: &ScoreArgs) -> anyhow::Result<()> {
    let records = read_manifest(&args.truth)?;
    let truth_by_id: HashMap<&str, Option<Category>> = records
        .iter()
        .map(|r| (r.scan_id.as_str(), r.label))
        .collect();
    let predictions = read_predictions(&args.pred)?;

    let mut skipped = 0usize;
    let lookup = |scan_id: &str| -> anyhow::Result<Option<Category>> {
        truth_by_id
            .get(scan_id)
            .copied()
            .with_context(|| format!("prediction for scan {scan_id:?} missing from the manifest"))
    };

    let (score, scored) = match args.task {
        1 => {
            let mut truth = Vec::new();
            let mut decided = Vec::new();
            for (scan_id, probs) in predictions.iter() {
                match lookup(scan_id)? {
                    Some(category) => {
                        truth.push(if category == Category::Negative {
                            Presence::Negative
                        } else {
                            Presence::Positive
                        });
                        decided.push(presence_decision(probs, args.presence_threshold));
                    }
                    None => skipped += 1,
                }
            }
            ensure!(!truth.is_empty(), "no prediction had a usable truth label");
            let score = macro_f1(&truth, &decided, &[Presence::Negative, Presence::Positive])?;
            (score, truth.len())
        }
        _ => {
            const SEVERITIES: [Category; 4] = [
                Category::Mild,
                Category::Moderate,
                Category::Severe,
                Category::Critical,
            ];
            let mut truth = Vec::new();
            let mut decided = Vec::new();
            for (scan_id, probs) in predictions.iter() {
                match lookup(scan_id)? {
                    Some(category) if SEVERITIES.contains(&category) => {
                        truth.push(category);
                        decided.push(severity_decision(probs));
                    }
                    _ => skipped += 1,
                }
            }
            ensure!(!truth.is_empty(), "no prediction had a usable truth label");
            let score = macro_f1(&truth, &decided, &SEVERITIES)?;
            (score, truth.len())
        }
    };

    println!("{score:.9}");
    eprintln!(
        "task {}: scored {scored} prediction(s), skipped {skipped} without usable truth labels",
        args.task
    );
    Ok(())
}

fn run_ensemble(args: &EnsembleArgs) -> anyhow::Result<()> {
    let sets = args
        .predictions
        .iter()
        .map(|p| read_predictions(p).map_err(anyhow::Error::from))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let averaged = ensemble_average(&sets)?;
    write_predictions(&args.out, &averaged)?;
    eprintln!(
        "averaged {} file(s) covering {} scan(s)",
        sets.len(),
        averaged.len()
    );
    Ok(())
}

fn run_losscheck(args: &LosscheckArgs) -> anyhow::Result<()> {
    ensure!(args.trials > 0, "trials must be positive");
    ensure!(
        args.fd_step.is_finite() && args.fd_step > 0.0,
        "fd-step must be positive"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    for _ in 0..args.trials {
        let error = gradient_check(&mut rng, NUM_CLASSES, args.fd_step);
        // A NaN error must count as a failure, not slip past the comparison.
        if !error.is_finite() || error >= args.tolerance {
            failures += 1;
        }
        if error > worst {
            worst = error;
        }
    }
    println!(
        "trials={} max_rel_err={worst:.3e} tolerance={:.1e} {}",
        args.trials,
        args.tolerance,
        if failures == 0 { "PASS" } else { "FAIL" }
    );
    ensure!(failures == 0, "{failures} trial(s) exceeded the tolerance");
    Ok(())
}
