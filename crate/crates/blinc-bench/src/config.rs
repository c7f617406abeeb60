//! Experiment configuration: dataset source, architecture, increment
//! schedule and the strategies under comparison.

use std::path::PathBuf;

use anyhow::{bail, Result};
use blinc::incremental::BStrategy;
use blinc::model::Architecture;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub enum DatasetConfig {
    Mnist {
        images: PathBuf,
        labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
    Synth {
        samples: usize,
        dim: usize,
        classes: usize,
        test_samples: usize,
    },
}

impl DatasetConfig {
    pub fn describe(&self) -> String {
        match self {
            DatasetConfig::Mnist { images, .. } => format!("mnist ({})", images.display()),
            DatasetConfig::Synth {
                samples,
                dim,
                classes,
                test_samples,
            } => format!("synth (samples {samples}, dim {dim}, classes {classes}, test {test_samples})"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub arch: Architecture,
    pub initial_samples: usize,
    pub increment_size: usize,
    pub num_increments: usize,
    pub strategies: Vec<BStrategy>,
    /// Timing repeats; medians are reported, min/max retained.
    pub repeats: usize,
    pub assume_full_rank: bool,
}

impl ExperimentConfig {
    /// Validates the schedule against the training set size.
    pub fn validate(&self, train_len: usize) -> Result<()> {
        if self.strategies.is_empty() {
            bail!("no strategies selected");
        }
        if self.repeats == 0 {
            bail!("repeats must be at least 1");
        }
        if self.initial_samples == 0 {
            bail!("initial sample count must be at least 1");
        }
        if self.num_increments > 0 && self.increment_size == 0 {
            bail!("increment size must be at least 1 when steps > 0");
        }
        let needed = self.initial_samples + self.increment_size * self.num_increments;
        if needed > train_len {
            bail!(
                "schedule needs {needed} training samples (initial {} + {} x {}), dataset has {train_len}",
                self.initial_samples,
                self.num_increments,
                self.increment_size
            );
        }
        Ok(())
    }
}

/// Parses a comma-separated strategy list, rejecting duplicates.
pub fn parse_strategies(tokens: &[String]) -> Result<Vec<BStrategy>> {
    let mut out = Vec::new();
    for token in tokens {
        let strategy: BStrategy = token.parse().map_err(anyhow::Error::msg)?;
        if out.contains(&strategy) {
            bail!("strategy {strategy} listed twice");
        }
        out.push(strategy);
    }
    if out.is_empty() {
        bail!("no strategies selected");
    }
    Ok(out)
}
