//! Runs the increment experiment: per strategy, one identically-seeded
//! initial training followed by the scheduled increments, timed over
//! `repeats` runs with medians reported.
//!
//! Accuracy never depends on the repeat index (training is deterministic per
//! seed); the runner enforces that instead of assuming it.

use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use blinc::data::{load_idx, synth_classification, Dataset};
use blinc::incremental::{BStrategy, PhaseTimings, UpdateOptions, UpdateStats};
use blinc::matrix::Matrix;
use blinc::model::BlsModel;

use crate::config::{DatasetConfig, ExperimentConfig};
use crate::report::{ReportMeta, RunReport, SnapshotRow, SpeedupRow, SpeedupTable, StrategyRun};

/// Loads the train/test pair. Synthetic data is drawn in one pass and split,
/// so both sides share the same class geometry.
pub fn load_dataset(cfg: &DatasetConfig, seed: u64) -> Result<(Dataset, Dataset)> {
    match cfg {
        DatasetConfig::Mnist {
            images,
            labels,
            test_images,
            test_labels,
        } => {
            let train = load_idx(images, labels)
                .with_context(|| format!("loading training set from {}", images.display()))?;
            let test = load_idx(test_images, test_labels)
                .with_context(|| format!("loading test set from {}", test_images.display()))?;
            Ok((train, test))
        }
        DatasetConfig::Synth {
            samples,
            dim,
            classes,
            test_samples,
        } => {
            let all = synth_classification(seed, samples + test_samples, *dim, *classes);
            Ok((all.slice(0, *samples), all.slice(*samples, samples + test_samples)))
        }
    }
}

fn median(samples: &[f64]) -> f64 {
    debug_assert!(!samples.is_empty());
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn median_phases(stats: &[UpdateStats]) -> PhaseTimings {
    let of = |sel: fn(&PhaseTimings) -> f64| {
        let values: Vec<f64> = stats.iter().map(|s| sel(&s.timings)).collect();
        median(&values)
    };
    PhaseTimings {
        activations: of(|t| t.activations),
        dt: of(|t| t.dt),
        c_check: of(|t| t.c_check),
        dbar: of(|t| t.dbar),
        b: of(|t| t.b),
        update_pinv: of(|t| t.update_pinv),
        update_weights: of(|t| t.update_weights),
    }
}

fn min_max(samples: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in samples {
        min = min.min(v);
        max = max.max(v);
    }
    (min, max)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let (train, test) = load_dataset(&cfg.dataset, cfg.arch.seed)?;
    cfg.validate(train.len())?;
    ensure!(!test.is_empty(), "test split is empty");

    let y_train = train.one_hot_labels();
    let x0 = train.x.rows_range(0..cfg.initial_samples);
    let y0 = y_train.rows_range(0..cfg.initial_samples);
    let increments: Vec<(Matrix, Matrix)> = (0..cfg.num_increments)
        .map(|s| {
            let start = cfg.initial_samples + s * cfg.increment_size;
            let end = start + cfg.increment_size;
            (train.x.rows_range(start..end), y_train.rows_range(start..end))
        })
        .collect();

    let steps_n = cfg.num_increments + 1;
    let mut strategy_runs = Vec::with_capacity(cfg.strategies.len());

    for &strategy in &cfg.strategies {
        let mut train_times: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.repeats); steps_n];
        let mut test_times: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.repeats); steps_n];
        let mut accuracies: Vec<f64> = vec![f64::NAN; steps_n];
        let mut step_stats: Vec<Vec<UpdateStats>> = vec![Vec::new(); steps_n];

        for rep in 0..cfg.repeats {
            let clock = Instant::now();
            let mut model = BlsModel::train_initial(cfg.arch, &x0, &y0)
                .context("initial training failed")?;
            train_times[0].push(clock.elapsed().as_secs_f64());
            if cfg.assume_full_rank {
                // The residual check is off for the whole run, so the stored
                // activation matrix is dead weight.
                model.drop_input_matrix();
            }
            let clock = Instant::now();
            let acc = model.evaluate(&test)? * 100.0;
            test_times[0].push(clock.elapsed().as_secs_f64());
            record_accuracy(&mut accuracies, 0, acc, rep)?;

            for (step, (xs, ys)) in increments.iter().enumerate() {
                let opts = UpdateOptions {
                    strategy,
                    assume_full_rank: cfg.assume_full_rank,
                };
                let (next, stats) = model
                    .increment_inputs(xs, ys, &opts)
                    .with_context(|| format!("increment {} with strategy {strategy}", step + 1))?;
                model = next;
                train_times[step + 1].push(stats.timings.total());
                step_stats[step + 1].push(stats);

                let clock = Instant::now();
                let acc = model.evaluate(&test)? * 100.0;
                test_times[step + 1].push(clock.elapsed().as_secs_f64());
                record_accuracy(&mut accuracies, step + 1, acc, rep)?;
            }
        }

        let mut rows = Vec::with_capacity(steps_n);
        let mut train_accum = 0.0;
        let mut test_accum = 0.0;
        for step in 0..steps_n {
            let train_med = median(&train_times[step]);
            let test_med = median(&test_times[step]);
            let (train_min, train_max) = min_max(&train_times[step]);
            let (test_min, test_max) = min_max(&test_times[step]);
            train_accum += train_med;
            test_accum += test_med;

            let (strategy_used, solve_route, c_norm, phases) = if step == 0 {
                (None, None, None, None)
            } else {
                let stats = &step_stats[step];
                let used = stats[0].strategy_used;
                ensure!(
                    stats.iter().all(|s| s.strategy_used == used),
                    "strategy resolution varied across repeats"
                );
                (
                    Some(used),
                    stats[0].solve_route,
                    stats[0].c_norm,
                    Some(median_phases(stats)),
                )
            };

            let samples_before = if step == 0 {
                0
            } else {
                cfg.initial_samples + (step - 1) * cfg.increment_size
            };
            let samples_after = cfg.initial_samples + step * cfg.increment_size;

            rows.push(SnapshotRow {
                step,
                samples_before,
                samples_after,
                accuracy_pct: accuracies[step],
                train_seconds: train_med,
                train_seconds_min: train_min,
                train_seconds_max: train_max,
                train_accum_seconds: train_accum,
                test_seconds: test_med,
                test_seconds_min: test_min,
                test_seconds_max: test_max,
                test_accum_seconds: test_accum,
                strategy_used,
                solve_route,
                c_norm,
                phases,
            });
        }
        strategy_runs.push(StrategyRun { strategy, rows });
    }

    let speedups = build_speedups(&strategy_runs);
    let meta = ReportMeta {
        dataset: cfg.dataset.describe(),
        structure: cfg.arch.structure(),
        total_nodes: cfg.arch.total_nodes(),
        lambda: cfg.arch.lambda.value(),
        seed: cfg.arch.seed,
        initial_samples: cfg.initial_samples,
        increment_size: cfg.increment_size,
        num_increments: cfg.num_increments,
        repeats: cfg.repeats,
        assume_full_rank: cfg.assume_full_rank,
    };

    Ok(RunReport {
        meta,
        strategies: strategy_runs,
        speedups,
    })
}

fn record_accuracy(accuracies: &mut [f64], step: usize, acc: f64, rep: usize) -> Result<()> {
    if rep == 0 {
        accuracies[step] = acc;
    } else if accuracies[step] != acc {
        // Deterministic seeding makes accuracy a pure function of the step.
        bail!(
            "accuracy changed across repeats at step {step}: {} vs {acc}",
            accuracies[step]
        );
    }
    Ok(())
}

/// Pairwise ratios `T_existing / T_strategy`. Empty when the baseline
/// strategy was not part of the run. The initial row is 1.0 by definition:
/// both arms run the identical initial training.
fn build_speedups(runs: &[StrategyRun]) -> Vec<SpeedupTable> {
    let Some(base) = runs.iter().find(|r| r.strategy == BStrategy::Existing) else {
        return Vec::new();
    };
    runs.iter()
        .filter(|r| r.strategy != BStrategy::Existing)
        .map(|run| {
            let rows = run
                .rows
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    if i == 0 {
                        SpeedupRow {
                            step: 0,
                            train_each: 1.0,
                            train_accum: 1.0,
                            test_each: 1.0,
                            test_accum: 1.0,
                        }
                    } else {
                        let b = &base.rows[i];
                        SpeedupRow {
                            step: i,
                            train_each: b.train_seconds / row.train_seconds,
                            train_accum: b.train_accum_seconds / row.train_accum_seconds,
                            test_each: b.test_seconds / row.test_seconds,
                            test_accum: b.test_accum_seconds / row.test_accum_seconds,
                        }
                    }
                })
                .collect();
            SpeedupTable {
                baseline: BStrategy::Existing,
                strategy: run.strategy,
                rows,
            }
        })
        .collect()
}
