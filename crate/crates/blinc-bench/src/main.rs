use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use blinc::linalg::RidgeParam;
use blinc::model::{Activation, Architecture};
use blinc_bench::report::ReportFormat;
use blinc_bench::{emit_report, parse_strategies, run_experiment, DatasetConfig, ExperimentConfig};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DatasetKind {
    Mnist,
    Synth,
}

/// Benchmark incremental training on added inputs: one identically-seeded
/// initial fit per strategy, repeated increments, per-step accuracy and
/// wall-clock medians, and speedup tables against the baseline strategy.
#[derive(Debug, Parser)]
#[command(name = "blinc-bench", version)]
struct Cli {
    /// Dataset source.
    #[arg(long, value_enum)]
    dataset: DatasetKind,

    /// IDX training images (mnist).
    #[arg(long)]
    images: Option<PathBuf>,
    /// IDX training labels (mnist).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// IDX test images (mnist).
    #[arg(long)]
    test_images: Option<PathBuf>,
    /// IDX test labels (mnist).
    #[arg(long)]
    test_labels: Option<PathBuf>,

    /// Training samples to synthesize (synth).
    #[arg(long)]
    samples: Option<usize>,
    /// Input dimension (synth).
    #[arg(long)]
    dim: Option<usize>,
    /// Class count (synth).
    #[arg(long)]
    classes: Option<usize>,
    /// Test samples to synthesize (synth).
    #[arg(long, default_value_t = 1000)]
    test_samples: usize,

    #[arg(long, default_value_t = 10)]
    feature_groups: usize,
    #[arg(long, default_value_t = 10)]
    feature_nodes: usize,
    #[arg(long, default_value_t = 1)]
    enh_groups: usize,
    #[arg(long, default_value_t = 5000)]
    enh_nodes: usize,
    /// Ridge regularization strength.
    #[arg(long, default_value_t = 1e-8)]
    lambda: f64,
    /// Seed for the random maps and synthetic data.
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Samples in the initial training.
    #[arg(long)]
    initial: usize,
    /// Samples added per increment.
    #[arg(long, default_value_t = 0)]
    increment: usize,
    /// Number of increments.
    #[arg(long, default_value_t = 0)]
    steps: usize,

    /// Strategies to compare: existing, small_q, large_q, cpinv, auto.
    #[arg(long, value_delimiter = ',', default_value = "existing,auto")]
    strategies: Vec<String>,
    /// Timing repeats; medians are reported.
    #[arg(long, default_value_t = 5)]
    repeats: usize,

    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: csv, json or table.
    #[arg(long, default_value = "table")]
    format: String,
    /// Skip the residual check and treat the base as full column rank.
    #[arg(long)]
    assume_full_rank: bool,
}

fn dataset_config(cli: &Cli) -> Result<DatasetConfig> {
    match cli.dataset {
        DatasetKind::Mnist => {
            let (Some(images), Some(labels), Some(test_images), Some(test_labels)) = (
                cli.images.clone(),
                cli.labels.clone(),
                cli.test_images.clone(),
                cli.test_labels.clone(),
            ) else {
                bail!("--dataset mnist needs --images, --labels, --test-images and --test-labels");
            };
            Ok(DatasetConfig::Mnist {
                images,
                labels,
                test_images,
                test_labels,
            })
        }
        DatasetKind::Synth => {
            let (Some(samples), Some(dim), Some(classes)) = (cli.samples, cli.dim, cli.classes)
            else {
                bail!("--dataset synth needs --samples, --dim and --classes");
            };
            Ok(DatasetConfig::Synth {
                samples,
                dim,
                classes,
                test_samples: cli.test_samples,
            })
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let format: ReportFormat = cli.format.parse().map_err(anyhow::Error::msg)?;
    let strategies = parse_strategies(&cli.strategies)?;
    let dataset = dataset_config(&cli)?;

    // Tanh on both node kinds keeps the activation matrix full column rank
    // for any input dimension; identity feature nodes cap its rank at d+1
    // per group, which breaks small-dimension runs.
    let arch = Architecture::new(
        cli.feature_groups,
        cli.feature_nodes,
        cli.enh_groups,
        cli.enh_nodes,
        cli.seed,
    )
    .with_lambda(RidgeParam::new(cli.lambda))
    .with_activations(Activation::Tanh, Activation::Tanh);

    // A ridge state has no exact pseudoinverse, so the residual check cannot
    // distinguish rank deficiency from regularization; pair ridge with the
    // full-rank assumption the way the increment protocol intends.
    let assume_full_rank = cli.assume_full_rank || cli.lambda > 0.0;
    if assume_full_rank && !cli.assume_full_rank {
        eprintln!("note: lambda > 0 implies --assume-full-rank; residual checks are skipped");
    }

    let config = ExperimentConfig {
        dataset,
        arch,
        initial_samples: cli.initial,
        increment_size: cli.increment,
        num_increments: cli.steps,
        strategies,
        repeats: cli.repeats,
        assume_full_rank,
    };

    let report = run_experiment(&config)?;

    match &cli.out {
        Some(path) => {
            let file = File::create(path)
                .with_context(|| format!("creating report file {}", path.display()))?;
            let mut out = BufWriter::new(file);
            emit_report(&report, format, &mut out)?;
            out.flush()?;
            eprintln!("report written to {}", path.display());
        }
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            emit_report(&report, format, &mut out)?;
        }
    }
    Ok(())
}
