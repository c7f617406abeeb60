//! Incremental pseudoinverse and output-weight updates for appended input
//! rows.
//!
//! Given a tall activation matrix `A` with known pseudoinverse `A⁺`, a new
//! block of rows `Ax` extends the stacked matrix `[A; Ax]`, whose
//! pseudoinverse is `[A⁺ − B·Dᵀ  B]` with `Dᵀ = Ax·A⁺`. The correction block
//! `B` has three equivalent forms once the residual `C = Axᵀ − Aᵀ·D`
//! vanishes (guaranteed for full-column-rank `A`):
//!
//! * existing:  `B = A⁺·D·(I + Dᵀ·D)⁻¹` — one `q×q` solve against `Dᵀ·D`,
//! * small-q:   `B = D̄·(I + Ax·D̄)⁻¹`  — a `q×q` solve on the cheaper
//!   product `Ax·D̄`, where `D̄ = A⁺·D`,
//! * large-q:   `B = (I + D̄·Ax)⁻¹·D̄`  — a `k×k` solve, obtained from the
//!   small-q form through the push-through identity.
//!
//! When `C` does not vanish the correction is `B = (C⁺)ᵀ`, computed by SVD.
//! [`add_inputs`] orchestrates a full update and reports per-phase wall
//! clock times, which is what the benchmark CLI aggregates.

use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, LinalgError, RidgeParam, SolveRoute};
use crate::matrix::Matrix;

/// Scale factor applied to `‖Ax‖_max` to decide whether the residual block
/// `C` counts as zero.
pub const C_ZERO_RTOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum UpdateError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("strategy {requested} needs {expected}, but the residual norm is {c_norm:.3e}")]
    StrategyMismatch {
        requested: BStrategy,
        expected: &'static str,
        c_norm: f64,
    },
    #[error("the input matrix was dropped from this state; increments need assume_full_rank")]
    InputMatrixUnavailable,
}

/// Which form of the correction block `B` to use for an update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BStrategy {
    /// Baseline `q×q` solve against `I + Dᵀ·D`.
    Existing,
    /// `q×q` solve against the cheaper `I + Ax·D̄`.
    SmallQ,
    /// `k×k` solve against `I + D̄·Ax`.
    LargeQ,
    /// SVD pseudoinverse of the residual block, for rank-deficient bases.
    CPinv,
    /// Pick per the dispatch rule: `CPinv` when the residual is nonzero,
    /// otherwise `SmallQ` for `q < k` and `LargeQ` for `q >= k`.
    Auto,
}

impl std::fmt::Display for BStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BStrategy::Existing => "existing",
            BStrategy::SmallQ => "small_q",
            BStrategy::LargeQ => "large_q",
            BStrategy::CPinv => "cpinv",
            BStrategy::Auto => "auto",
        })
    }
}

impl FromStr for BStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "existing" => Ok(BStrategy::Existing),
            "small_q" | "smallq" => Ok(BStrategy::SmallQ),
            "large_q" | "largeq" => Ok(BStrategy::LargeQ),
            "cpinv" => Ok(BStrategy::CPinv),
            "auto" => Ok(BStrategy::Auto),
            other => Err(format!(
                "unknown strategy {other:?}; expected existing, small_q, large_q, cpinv or auto"
            )),
        }
    }
}

/// A tall activation matrix paired with its (ridge) pseudoinverse.
///
/// The stored matrix is needed only to evaluate the residual block `C`;
/// [`PinvState::drop_matrix`] trades that check away for memory, after which
/// updates must run with `assume_full_rank`.
#[derive(Debug, Clone)]
pub struct PinvState {
    a: Option<Matrix>,
    apinv: Matrix,
    lambda: RidgeParam,
}

impl PinvState {
    /// Pairs a matrix with an externally computed pseudoinverse.
    pub fn new(a: Matrix, apinv: Matrix, lambda: RidgeParam) -> Result<Self, UpdateError> {
        if apinv.rows() != a.cols() || apinv.cols() != a.rows() {
            return Err(UpdateError::Dimension(format!(
                "pseudoinverse of a {}x{} matrix must be {}x{}, got {}x{}",
                a.rows(),
                a.cols(),
                a.cols(),
                a.rows(),
                apinv.rows(),
                apinv.cols()
            )));
        }
        Ok(PinvState {
            a: Some(a),
            apinv,
            lambda,
        })
    }

    /// Builds the state by computing the ridge left inverse of `a`.
    pub fn from_matrix(a: Matrix, lambda: RidgeParam) -> Result<Self, UpdateError> {
        let apinv = linalg::left_pinv(&a, lambda)?;
        Ok(PinvState {
            a: Some(a),
            apinv,
            lambda,
        })
    }

    /// Number of stacked input rows (`l`).
    #[inline]
    pub fn samples(&self) -> usize {
        self.apinv.cols()
    }

    /// Number of columns / nodes (`k`).
    #[inline]
    pub fn nodes(&self) -> usize {
        self.apinv.rows()
    }

    #[inline]
    pub fn matrix(&self) -> Option<&Matrix> {
        self.a.as_ref()
    }

    #[inline]
    pub fn pinv(&self) -> &Matrix {
        &self.apinv
    }

    #[inline]
    pub fn lambda(&self) -> RidgeParam {
        self.lambda
    }

    /// Releases the stored input matrix; from here on the residual block can
    /// no longer be evaluated.
    pub fn drop_matrix(&mut self) {
        self.a = None;
    }
}

/// New activation rows and their labels for one increment.
#[derive(Debug, Clone)]
pub struct IncrementBatch {
    pub ax: Matrix,
    pub ya: Matrix,
}

impl IncrementBatch {
    pub fn new(ax: Matrix, ya: Matrix) -> Result<Self, UpdateError> {
        if ax.rows() == 0 {
            return Err(UpdateError::Dimension(
                "an increment needs at least one row".into(),
            ));
        }
        if ya.rows() != ax.rows() {
            return Err(UpdateError::Dimension(format!(
                "{} label rows for {} activation rows",
                ya.rows(),
                ax.rows()
            )));
        }
        Ok(IncrementBatch { ax, ya })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.ax.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.ax.rows() == 0
    }
}

/// Knobs for [`add_inputs`].
#[derive(Debug, Clone, Copy)]
pub struct UpdateOptions {
    pub strategy: BStrategy,
    /// Skip the residual evaluation and treat `C` as zero. Valid whenever
    /// the base matrix has full column rank, which holds in the benchmark
    /// regime `l >= k`.
    pub assume_full_rank: bool,
}

impl Default for UpdateOptions {
    fn default() -> Self {
        UpdateOptions {
            strategy: BStrategy::Auto,
            assume_full_rank: false,
        }
    }
}

/// Wall-clock seconds per update phase. Phases that did not run stay zero.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct PhaseTimings {
    /// Building activations for the new rows (filled by the model layer).
    pub activations: f64,
    /// The projection `Dᵀ = Ax·A⁺`.
    pub dt: f64,
    /// Residual block `C` and its norm check.
    pub c_check: f64,
    /// The projected block `D̄ = A⁺·D`.
    pub dbar: f64,
    /// The correction block `B`, including its inner solve.
    pub b: f64,
    /// Assembling the updated pseudoinverse and stacked matrix.
    pub update_pinv: f64,
    /// The output-weight correction.
    pub update_weights: f64,
}

impl PhaseTimings {
    pub fn total(&self) -> f64 {
        self.activations
            + self.dt
            + self.c_check
            + self.dbar
            + self.b
            + self.update_pinv
            + self.update_weights
    }
}

/// Metadata describing how one update went.
#[derive(Debug, Clone, Serialize)]
pub struct UpdateStats {
    pub strategy_used: BStrategy,
    /// Max-abs norm of the residual block; `None` when skipped via
    /// `assume_full_rank`.
    pub c_norm: Option<f64>,
    /// Factorization route the `B` solve took; `None` for the SVD branch.
    pub solve_route: Option<SolveRoute>,
    pub timings: PhaseTimings,
}

/// Result of one incremental update.
#[derive(Debug)]
pub struct UpdateOutcome {
    pub state: PinvState,
    pub weights: Matrix,
    pub stats: UpdateStats,
}

// ── Individual update steps ──────────────────────────────────────────

/// Projection of the new rows through the current pseudoinverse:
/// `Dᵀ = Ax·A⁺`, shaped `q×l`. `D` itself is never materialized.
pub fn compute_dt(apinv: &Matrix, ax: &Matrix) -> Result<Matrix, UpdateError> {
    if ax.cols() != apinv.rows() {
        return Err(UpdateError::Dimension(format!(
            "new rows have {} columns but the pseudoinverse has {} rows",
            ax.cols(),
            apinv.rows()
        )));
    }
    Ok(ax.matmul(apinv))
}

/// Residual block `C = Axᵀ − Aᵀ·D`, shaped `k×q`; zero exactly when the new
/// rows lie in the row space of `A`.
pub fn compute_c(a: &Matrix, ax: &Matrix, dt: &Matrix) -> Result<Matrix, UpdateError> {
    if a.cols() != ax.cols() {
        return Err(UpdateError::Dimension(format!(
            "base has {} columns, new rows have {}",
            a.cols(),
            ax.cols()
        )));
    }
    if dt.rows() != ax.rows() || dt.cols() != a.rows() {
        return Err(UpdateError::Dimension(format!(
            "projection must be {}x{}, got {}x{}",
            ax.rows(),
            a.rows(),
            dt.rows(),
            dt.cols()
        )));
    }
    // C = (Ax − Dᵀ·A)ᵀ, computed in the q×k orientation first.
    Ok(ax.sub(&dt.matmul(a)).transpose())
}

/// True when `‖C‖_max <= tol`, i.e. the residual counts as zero.
pub fn c_norm_check(c: &Matrix, tol: f64) -> bool {
    assert!(tol >= 0.0, "tolerance must be nonnegative");
    c.max_abs() <= tol
}

/// The default residual tolerance, `1e-8 · ‖Ax‖_max`.
pub fn default_c_tolerance(ax: &Matrix) -> f64 {
    C_ZERO_RTOL * ax.max_abs()
}

/// Baseline correction `B = A⁺·D·(I + Dᵀ·D)⁻¹` via one `q×q` solve.
pub fn compute_b_existing(
    apinv: &Matrix,
    dt: &Matrix,
) -> Result<(Matrix, SolveRoute), UpdateError> {
    if dt.cols() != apinv.cols() {
        return Err(UpdateError::Dimension(format!(
            "projection has {} columns but the pseudoinverse has {}",
            dt.cols(),
            apinv.cols()
        )));
    }
    let ad = apinv.matmul_bt(dt); // A⁺·D : k×q
    let mut g = dt.matmul_bt(dt); // Dᵀ·D : q×q
    g.add_diag(1.0);
    // B = (A⁺·D)·G⁻¹ with G symmetric, so solve G·Bᵀ = (A⁺·D)ᵀ.
    let (bt, route) = linalg::solve_square(&g, &ad.transpose())?;
    Ok((bt.transpose(), route))
}

/// The projected block `D̄ = A⁺·D`, shaped `k×q`.
pub fn compute_dbar(apinv: &Matrix, dt: &Matrix) -> Result<Matrix, UpdateError> {
    if dt.cols() != apinv.cols() {
        return Err(UpdateError::Dimension(format!(
            "projection has {} columns but the pseudoinverse has {}",
            dt.cols(),
            apinv.cols()
        )));
    }
    Ok(apinv.matmul_bt(dt))
}

/// Correction `B = D̄·(I + Ax·D̄)⁻¹`; the inner matrix is `q×q` but built
/// from a product that costs `q²k` instead of the baseline's `q²l`.
pub fn compute_b_small_q(
    dbar: &Matrix,
    ax: &Matrix,
) -> Result<(Matrix, SolveRoute), UpdateError> {
    check_dbar_ax(dbar, ax)?;
    let mut m = ax.matmul(dbar); // q×q; a symmetric Gram when D̄ = A⁺·D
    m.add_diag(1.0);
    // B = D̄·M⁻¹, so solve Mᵀ·Bᵀ = D̄ᵀ; the transpose matters for
    // asymmetric M even though the in-pipeline M is symmetric.
    let (bt, route) = linalg::solve_square(&m.transpose(), &dbar.transpose())
        .map_err(singular_system)?;
    Ok((bt.transpose(), route))
}

/// Correction `B = (I + D̄·Ax)⁻¹·D̄` via a single `k×k` solve; the cheap form
/// when `q >= k`.
pub fn compute_b_large_q(
    dbar: &Matrix,
    ax: &Matrix,
) -> Result<(Matrix, SolveRoute), UpdateError> {
    check_dbar_ax(dbar, ax)?;
    let mut m = dbar.matmul(ax); // k×k, not symmetric in general
    m.add_diag(1.0);
    let (b, route) = linalg::solve_square(&m, dbar).map_err(singular_system)?;
    Ok((b, route))
}

fn check_dbar_ax(dbar: &Matrix, ax: &Matrix) -> Result<(), UpdateError> {
    if dbar.rows() != ax.cols() || dbar.cols() != ax.rows() {
        return Err(UpdateError::Dimension(format!(
            "projected block is {}x{} but new rows are {}x{}",
            dbar.rows(),
            dbar.cols(),
            ax.rows(),
            ax.cols()
        )));
    }
    Ok(())
}

fn singular_system(e: LinalgError) -> UpdateError {
    UpdateError::Linalg(match e {
        LinalgError::NotPositiveDefinite => LinalgError::SingularSystem,
        other => other,
    })
}

/// Correction block for a nonzero residual: the SVD pseudoinverse of `C`,
/// transposed into the `k×q` orientation the stacked pseudoinverse needs.
/// Exact whenever `C` is zero-free with full column rank, which is the case
/// the dispatch rule routes here.
pub fn compute_b_cpinv(c: &Matrix) -> Result<Matrix, UpdateError> {
    Ok(linalg::svd_pinv(c, None)?.transpose())
}

/// Resolves the strategy for an update of `q` rows against `k` nodes.
/// Non-`Auto` requests pass through untouched; ties at `q = k` go to the
/// `k×k` solve, which costs the same there.
pub fn select_b_strategy(q: usize, k: usize, c_is_zero: bool, requested: BStrategy) -> BStrategy {
    debug_assert!(q >= 1 && k >= 1);
    if requested != BStrategy::Auto {
        return requested;
    }
    if !c_is_zero {
        BStrategy::CPinv
    } else if q < k {
        BStrategy::SmallQ
    } else {
        BStrategy::LargeQ
    }
}

/// Extends the state with the new rows: the pseudoinverse becomes
/// `[A⁺ − B·Dᵀ  B]` and the stored matrix (if any) gains the rows of `Ax`.
pub fn update_pinv(
    state: PinvState,
    b: &Matrix,
    dt: &Matrix,
    ax: &Matrix,
) -> Result<PinvState, UpdateError> {
    let (l, k, q) = (state.samples(), state.nodes(), ax.rows());
    if q == 0 {
        return Err(UpdateError::Dimension(
            "an increment needs at least one row".into(),
        ));
    }
    if ax.cols() != k {
        return Err(UpdateError::Dimension(format!(
            "new rows have {} columns, state has {k} nodes",
            ax.cols()
        )));
    }
    if b.rows() != k || b.cols() != q || dt.rows() != q || dt.cols() != l {
        return Err(UpdateError::Dimension(format!(
            "correction {}x{} / projection {}x{} inconsistent with state {l}x{k} and {q} new rows",
            b.rows(),
            b.cols(),
            dt.rows(),
            dt.cols()
        )));
    }
    // The left block A⁺ − B·Dᵀ accumulates straight into the old
    // pseudoinverse buffer; at scale that buffer is the dominant allocation.
    let PinvState { a, apinv, lambda } = state;
    let mut left = apinv;
    crate::matrix::gemm_into(-1.0, b.view(), dt.view(), 1.0, &mut left);
    let apinv = Matrix::hstack(&[&left, b]);
    drop(left);
    let a = a.map(|a| a.vstack(ax));
    Ok(PinvState { a, apinv, lambda })
}

/// Output-weight correction `W + B·(Ya − Ax·W)`.
pub fn update_weights(
    w: &Matrix,
    b: &Matrix,
    ax: &Matrix,
    ya: &Matrix,
) -> Result<Matrix, UpdateError> {
    if ax.cols() != w.rows() || ya.rows() != ax.rows() || ya.cols() != w.cols() {
        return Err(UpdateError::Dimension(format!(
            "weights {}x{} incompatible with {}x{} rows and {}x{} labels",
            w.rows(),
            w.cols(),
            ax.rows(),
            ax.cols(),
            ya.rows(),
            ya.cols()
        )));
    }
    if b.rows() != w.rows() || b.cols() != ax.rows() {
        return Err(UpdateError::Dimension(format!(
            "correction block {}x{} incompatible with {} weights rows and {} new rows",
            b.rows(),
            b.cols(),
            w.rows(),
            ax.rows()
        )));
    }
    let residual = ya.sub(&ax.matmul(w));
    Ok(w.add(&b.matmul(&residual)))
}

/// Runs one full increment: projection, residual check, strategy dispatch,
/// correction block, pseudoinverse update and weight update, with per-phase
/// timings.
pub fn add_inputs(
    state: PinvState,
    weights: &Matrix,
    batch: &IncrementBatch,
    opts: &UpdateOptions,
) -> Result<UpdateOutcome, UpdateError> {
    let k = state.nodes();
    let q = batch.len();
    if batch.ax.cols() != k {
        return Err(UpdateError::Dimension(format!(
            "batch rows have {} columns, state has {k} nodes",
            batch.ax.cols()
        )));
    }
    if weights.rows() != k {
        return Err(UpdateError::Dimension(format!(
            "weights have {} rows, state has {k} nodes",
            weights.rows()
        )));
    }

    let mut timings = PhaseTimings::default();

    let t = Instant::now();
    let dt = compute_dt(&state.apinv, &batch.ax)?;
    timings.dt = t.elapsed().as_secs_f64();

    let (c_mat, c_norm, c_is_zero) = if opts.assume_full_rank {
        (None, None, true)
    } else {
        let t = Instant::now();
        let a = state.a.as_ref().ok_or(UpdateError::InputMatrixUnavailable)?;
        let c = compute_c(a, &batch.ax, &dt)?;
        let norm = c.max_abs();
        let zero = norm <= default_c_tolerance(&batch.ax);
        timings.c_check = t.elapsed().as_secs_f64();
        (Some(c), Some(norm), zero)
    };

    let strategy = select_b_strategy(q, k, c_is_zero, opts.strategy);
    match strategy {
        BStrategy::SmallQ | BStrategy::LargeQ if !c_is_zero => {
            return Err(UpdateError::StrategyMismatch {
                requested: strategy,
                expected: "a vanishing residual block",
                c_norm: c_norm.unwrap_or(f64::NAN),
            });
        }
        BStrategy::CPinv if c_is_zero => {
            // Pseudo-inverting a (near-)zero block would blow up.
            return Err(UpdateError::StrategyMismatch {
                requested: strategy,
                expected: "a nonzero residual block",
                c_norm: c_norm.unwrap_or(0.0),
            });
        }
        BStrategy::CPinv if state.lambda.value() > 0.0 => {
            // Under ridge the stored pseudoinverse is inexact, so the
            // residual never truly vanishes; pseudo-inverting that noise
            // would wreck the update. Ridge states must assume full rank.
            return Err(UpdateError::StrategyMismatch {
                requested: strategy,
                expected: "an exact pseudoinverse state (lambda = 0), or assume_full_rank",
                c_norm: c_norm.unwrap_or(f64::NAN),
            });
        }
        _ => {}
    }

    let (b, solve_route) = match strategy {
        BStrategy::Existing => {
            let t = Instant::now();
            let (b, route) = compute_b_existing(&state.apinv, &dt)?;
            timings.b = t.elapsed().as_secs_f64();
            (b, Some(route))
        }
        BStrategy::SmallQ | BStrategy::LargeQ => {
            let t = Instant::now();
            let dbar = compute_dbar(&state.apinv, &dt)?;
            timings.dbar = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let (b, route) = if strategy == BStrategy::SmallQ {
                compute_b_small_q(&dbar, &batch.ax)?
            } else {
                compute_b_large_q(&dbar, &batch.ax)?
            };
            timings.b = t.elapsed().as_secs_f64();
            (b, Some(route))
        }
        BStrategy::CPinv => {
            let t = Instant::now();
            let b = compute_b_cpinv(c_mat.as_ref().expect("residual was evaluated"))?;
            timings.b = t.elapsed().as_secs_f64();
            (b, None)
        }
        BStrategy::Auto => unreachable!("auto resolves before dispatch"),
    };

    let t = Instant::now();
    let state = update_pinv(state, &b, &dt, &batch.ax)?;
    timings.update_pinv = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let weights = update_weights(weights, &b, &batch.ax, &batch.ya)?;
    timings.update_weights = t.elapsed().as_secs_f64();

    Ok(UpdateOutcome {
        state,
        weights,
        stats: UpdateStats {
            strategy_used: strategy,
            c_norm,
            solve_route,
            timings,
        },
    })
}
