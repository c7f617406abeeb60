//! Run records and their serializers: JSON for machines, CSV for
//! spreadsheets, and a fixed-width table laid out like the usual snapshot
//! tables in incremental-learning write-ups.

use std::io::Write;

use anyhow::Result;
use blinc::incremental::{BStrategy, PhaseTimings};
use blinc::linalg::SolveRoute;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    Table,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "table" => Ok(ReportFormat::Table),
            other => Err(format!("unknown format {other:?}; expected csv, json or table")),
        }
    }
}

/// One snapshot: the state of a strategy's model after the initial training
/// (`step` 0) or after an increment.
#[derive(Debug, Clone, Serialize)]
pub struct SnapshotRow {
    pub step: usize,
    pub samples_before: usize,
    pub samples_after: usize,
    pub accuracy_pct: f64,
    /// Median over repeats; the extremes are kept for spread.
    pub train_seconds: f64,
    pub train_seconds_min: f64,
    pub train_seconds_max: f64,
    pub train_accum_seconds: f64,
    pub test_seconds: f64,
    pub test_seconds_min: f64,
    pub test_seconds_max: f64,
    pub test_accum_seconds: f64,
    /// Resolved strategy for this step; `None` on the initial row.
    pub strategy_used: Option<BStrategy>,
    pub solve_route: Option<SolveRoute>,
    pub c_norm: Option<f64>,
    /// Per-phase medians over repeats; `None` on the initial row.
    pub phases: Option<PhaseTimings>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyRun {
    pub strategy: BStrategy,
    pub rows: Vec<SnapshotRow>,
}

/// Ratios `T_baseline / T_strategy` per step. The initial row is defined as
/// 1.0: both arms run the identical initial training.
#[derive(Debug, Clone, Serialize)]
pub struct SpeedupRow {
    pub step: usize,
    pub train_each: f64,
    pub train_accum: f64,
    pub test_each: f64,
    pub test_accum: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpeedupTable {
    pub baseline: BStrategy,
    pub strategy: BStrategy,
    pub rows: Vec<SpeedupRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportMeta {
    pub dataset: String,
    /// `(total feature nodes, total enhancement nodes)`.
    pub structure: (usize, usize),
    pub total_nodes: usize,
    pub lambda: f64,
    pub seed: u64,
    pub initial_samples: usize,
    pub increment_size: usize,
    pub num_increments: usize,
    pub repeats: usize,
    pub assume_full_rank: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub meta: ReportMeta,
    pub strategies: Vec<StrategyRun>,
    pub speedups: Vec<SpeedupTable>,
}

impl RunReport {
    pub fn strategy(&self, s: BStrategy) -> Option<&StrategyRun> {
        self.strategies.iter().find(|r| r.strategy == s)
    }
}

/// Writes the report in the requested format.
pub fn emit_report(report: &RunReport, format: ReportFormat, out: &mut dyn Write) -> Result<()> {
    match format {
        ReportFormat::Json => emit_json(report, out),
        ReportFormat::Csv => emit_csv(report, out),
        ReportFormat::Table => emit_table(report, out),
    }
}

fn emit_json(report: &RunReport, out: &mut dyn Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, report)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, |v| v.to_string())
}

fn emit_csv(report: &RunReport, out: &mut dyn Write) -> Result<()> {
    writeln!(
        out,
        "strategy,step,samples_before,samples_after,accuracy_pct,\
         train_seconds,train_seconds_min,train_seconds_max,train_accum_seconds,\
         test_seconds,test_seconds_min,test_seconds_max,test_accum_seconds,\
         strategy_used,solve_route,c_norm,\
         phase_activations,phase_dt,phase_c_check,phase_dbar,phase_b,\
         phase_update_pinv,phase_update_weights"
    )?;
    for run in &report.strategies {
        for r in &run.rows {
            let p = r.phases.unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                run.strategy,
                r.step,
                r.samples_before,
                r.samples_after,
                r.accuracy_pct,
                r.train_seconds,
                r.train_seconds_min,
                r.train_seconds_max,
                r.train_accum_seconds,
                r.test_seconds,
                r.test_seconds_min,
                r.test_seconds_max,
                r.test_accum_seconds,
                opt(&r.strategy_used),
                opt(&r.solve_route),
                opt(&r.c_norm),
                p.activations,
                p.dt,
                p.c_check,
                p.dbar,
                p.b,
                p.update_pinv,
                p.update_weights,
            )?;
        }
    }
    if !report.speedups.is_empty() {
        writeln!(out, "# speedups")?;
        writeln!(out, "baseline,strategy,step,train_each,train_accum,test_each,test_accum")?;
        for table in &report.speedups {
            for r in &table.rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    table.baseline,
                    table.strategy,
                    r.step,
                    r.train_each,
                    r.train_accum,
                    r.test_each,
                    r.test_accum
                )?;
            }
        }
    }
    Ok(())
}

fn patterns_label(r: &SnapshotRow) -> String {
    if r.step == 0 {
        format!("{}", r.samples_after)
    } else {
        format!("{} -> {}", r.samples_before, r.samples_after)
    }
}

fn emit_table(report: &RunReport, out: &mut dyn Write) -> Result<()> {
    let meta = &report.meta;
    writeln!(
        out,
        "incremental input benchmark — dataset {}, structure ({},{}), lambda {:.1e}, seed {}, repeats {}",
        meta.dataset, meta.structure.0, meta.structure.1, meta.lambda, meta.seed, meta.repeats
    )?;
    writeln!(out)?;

    // Accuracy and per-step training time per strategy.
    let pat_w = 22;
    write!(out, "{:<pat_w$}", "input patterns")?;
    for run in &report.strategies {
        write!(out, "  {:>12}", format!("{} acc%", run.strategy))?;
    }
    for run in &report.strategies {
        write!(out, "  {:>14}", format!("{} train s", run.strategy))?;
    }
    writeln!(out)?;
    let steps = report.strategies.first().map_or(0, |r| r.rows.len());
    for i in 0..steps {
        let label = patterns_label(&report.strategies[0].rows[i]);
        write!(out, "{label:<pat_w$}")?;
        for run in &report.strategies {
            write!(out, "  {:>12.2}", run.rows[i].accuracy_pct)?;
        }
        for run in &report.strategies {
            write!(out, "  {:>14.4}", run.rows[i].train_seconds)?;
        }
        writeln!(out)?;
    }

    // One speedup block per pairing, columns in the conventional order.
    for table in &report.speedups {
        writeln!(out)?;
        writeln!(
            out,
            "speedups T_{} / T_{} (each & accumulative training, each & accumulative testing)",
            table.baseline, table.strategy
        )?;
        writeln!(
            out,
            "{:<pat_w$}  {:>12}  {:>12}  {:>12}  {:>12}",
            "input patterns", "train each", "train accum", "test each", "test accum"
        )?;
        for (i, r) in table.rows.iter().enumerate() {
            let label = patterns_label(&report.strategies[0].rows[i]);
            writeln!(
                out,
                "{label:<pat_w$}  {:>12.4}  {:>12.4}  {:>12.4}  {:>12.4}",
                r.train_each, r.train_accum, r.test_each, r.test_accum
            )?;
        }
    }
    Ok(())
}
