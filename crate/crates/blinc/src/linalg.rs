//! Factor-and-solve primitives: the ridge-regularized left inverse, an SVD
//! pseudoinverse used as oracle and fallback, blocked Cholesky, LU with
//! partial pivoting, and the Moore-Penrose condition checker.
//!
//! Every `(..)⁻¹ · X` that appears in the update formulas is realized as
//! factorize-and-solve; explicit inverses are never formed. Solves run one
//! right-hand side per thread when the `parallel` feature is on.

use crate::matrix::{gemm_into, Matrix};
use serde::Serialize;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Relative tolerance under which a square matrix is treated as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

const CHOL_BLOCK: usize = 64;
const SVD_MAX_SWEEPS: usize = 60;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("gram matrix is not positive definite; the ridge system is singular")]
    SingularGram,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not symmetric within tolerance")]
    NotSymmetric,
    #[error("linear system is singular within tolerance")]
    SingularSystem,
    #[error("SVD iteration did not converge")]
    Convergence,
    #[error("matrix contains non-finite entries")]
    NonFinite,
}

/// Nonnegative ridge regularization strength; zero selects the exact left
/// inverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RidgeParam(f64);

impl RidgeParam {
    pub const ZERO: RidgeParam = RidgeParam(0.0);

    /// Panics on negative or non-finite values.
    pub fn new(lambda: f64) -> Self {
        assert!(
            lambda >= 0.0 && lambda.is_finite(),
            "ridge parameter must be finite and nonnegative, got {lambda}"
        );
        RidgeParam(lambda)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Which factorization ultimately produced a solve result; Cholesky is the
/// fast path, the others are recorded fallbacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveRoute {
    Cholesky,
    Lu,
    SvdFallback,
}

impl std::fmt::Display for SolveRoute {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveRoute::Cholesky => "cholesky",
            SolveRoute::Lu => "lu",
            SolveRoute::SvdFallback => "svd_fallback",
        })
    }
}

/// Unrolled dot product; the independent accumulators let LLVM vectorize.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 8;
    let (ah, at) = a.split_at(chunks * 8);
    let (bh, bt) = b.split_at(chunks * 8);
    let mut acc = [0.0f64; 8];
    for (ca, cb) in ah.chunks_exact(8).zip(bh.chunks_exact(8)) {
        for i in 0..8 {
            acc[i] += ca[i] * cb[i];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in at.iter().zip(bt) {
        s += x * y;
    }
    s
}

fn is_symmetric(m: &Matrix, rel_tol: f64) -> bool {
    if m.rows() != m.cols() {
        return false;
    }
    let scale = m.max_abs();
    if scale == 0.0 {
        return true;
    }
    let n = m.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > rel_tol * scale {
                return false;
            }
        }
    }
    true
}

// ── Cholesky ─────────────────────────────────────────────────────────

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
///
/// Blocked left-looking variant: the trailing updates are gemm calls, so the
/// O(n³) work runs on the parallel multiply kernel. Only the lower triangle
/// of `m` is read.
pub fn cholesky(m: &Matrix) -> Result<Matrix, LinalgError> {
    let n = m.rows();
    if m.cols() != n {
        return Err(LinalgError::Dimension(format!(
            "cholesky needs a square matrix, got {}x{}",
            n,
            m.cols()
        )));
    }
    let mut l = m.clone();
    let mut j = 0;
    while j < n {
        let jb = CHOL_BLOCK.min(n - j);
        if j > 0 {
            // Diagonal block update: S11 -= L10 · L10ᵀ.
            let mut p11 = Matrix::zeros(jb, jb);
            gemm_into(1.0, l.sub_view(j, j + jb, 0, j), l.sub_view_t(j, j + jb, 0, j), 0.0, &mut p11);
            for r in 0..jb {
                for c in 0..jb {
                    l[(j + r, j + c)] -= p11[(r, c)];
                }
            }
        }
        factor_diag_block(&mut l, j, jb)?;
        if j + jb < n {
            // Panel update: S21 = A21 - L20 · L10ᵀ, then L21 = S21 · L11⁻ᵀ.
            let mut p21 = Matrix::zeros(n - j - jb, jb);
            if j > 0 {
                gemm_into(
                    1.0,
                    l.sub_view(j + jb, n, 0, j),
                    l.sub_view_t(j, j + jb, 0, j),
                    0.0,
                    &mut p21,
                );
            }
            let (fixed, below) = l.data_mut().split_at_mut((j + jb) * n);
            let solve_row = |(r, row): (usize, &mut [f64])| {
                let x = &mut row[j..j + jb];
                for c in 0..jb {
                    x[c] -= p21[(r, c)];
                }
                for c in 0..jb {
                    let lrow = &fixed[(j + c) * n + j..(j + c) * n + j + c];
                    let s = x[c] - dot(lrow, &x[..c]);
                    x[c] = s / fixed[(j + c) * n + j + c];
                }
            };
            #[cfg(feature = "parallel")]
            below.par_chunks_mut(n).enumerate().for_each(solve_row);
            #[cfg(not(feature = "parallel"))]
            below.chunks_mut(n).enumerate().for_each(solve_row);
        }
        j += jb;
    }
    for r in 0..n {
        for c in (r + 1)..n {
            l[(r, c)] = 0.0;
        }
    }
    Ok(l)
}

fn factor_diag_block(l: &mut Matrix, j: usize, jb: usize) -> Result<(), LinalgError> {
    for c in 0..jb {
        let gc = j + c;
        let mut d = l[(gc, gc)];
        for p in 0..c {
            let v = l[(gc, j + p)];
            d -= v * v;
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite);
        }
        let root = d.sqrt();
        l[(gc, gc)] = root;
        for r in (c + 1)..jb {
            let gr = j + r;
            let mut s = l[(gr, gc)];
            for p in 0..c {
                s -= l[(gr, j + p)] * l[(gc, j + p)];
            }
            l[(gr, gc)] = s / root;
        }
    }
    Ok(())
}

/// Solves `L·Lᵀ·X = rhs` given the Cholesky factor `L`.
///
/// Right-hand sides are transposed so each one is a contiguous row, then
/// solved one per thread.
pub fn cholesky_solve(l: &Matrix, rhs: &Matrix) -> Matrix {
    let n = l.rows();
    assert_eq!(rhs.rows(), n, "rhs rows must match the factor size");
    let lt = l.transpose();
    let mut xt = rhs.transpose();

    let solve_one = |b: &mut [f64]| {
        for i in 0..n {
            let s = b[i] - dot(&l.row(i)[..i], &b[..i]);
            b[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let s = b[i] - dot(&lt.row(i)[i + 1..], &b[i + 1..]);
            b[i] = s / lt[(i, i)];
        }
    };

    #[cfg(feature = "parallel")]
    xt.data_mut().par_chunks_mut(n).for_each(solve_one);
    #[cfg(not(feature = "parallel"))]
    xt.data_mut().chunks_mut(n).for_each(solve_one);

    xt.transpose()
}

// ── LU ───────────────────────────────────────────────────────────────

/// LU factorization with partial pivoting, packed in one matrix.
pub fn lu_factor(m: &Matrix) -> Result<(Matrix, Vec<usize>), LinalgError> {
    let n = m.rows();
    if m.cols() != n {
        return Err(LinalgError::Dimension(format!(
            "lu_factor needs a square matrix, got {}x{}",
            n,
            m.cols()
        )));
    }
    let mut lu = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let tiny = f64::EPSILON * (n as f64) * m.max_abs();
    let mut pivot_row_tail = vec![0.0f64; n];

    for c in 0..n {
        let mut best = c;
        let mut best_abs = lu[(c, c)].abs();
        for r in (c + 1)..n {
            let v = lu[(r, c)].abs();
            if v > best_abs {
                best_abs = v;
                best = r;
            }
        }
        if !(best_abs > tiny) || !best_abs.is_finite() {
            return Err(LinalgError::SingularSystem);
        }
        if best != c {
            for k in 0..n {
                let a = lu[(c, k)];
                lu[(c, k)] = lu[(best, k)];
                lu[(best, k)] = a;
            }
            perm.swap(c, best);
        }
        let pivot = lu[(c, c)];
        pivot_row_tail[c + 1..n].copy_from_slice(&lu.row(c)[c + 1..n]);
        for r in (c + 1)..n {
            let f = lu[(r, c)] / pivot;
            lu[(r, c)] = f;
            let row = lu.row_mut(r);
            for k in (c + 1)..n {
                row[k] -= f * pivot_row_tail[k];
            }
        }
    }
    Ok((lu, perm))
}

/// Solves `M·X = rhs` given the packed LU factor and its row permutation.
pub fn lu_solve(lu: &Matrix, perm: &[usize], rhs: &Matrix) -> Matrix {
    let n = lu.rows();
    assert_eq!(rhs.rows(), n, "rhs rows must match the factor size");
    let mut xt = rhs.transpose();

    let solve_one = |b: &mut [f64]| {
        let mut y = vec![0.0f64; n];
        for i in 0..n {
            y[i] = b[perm[i]];
        }
        for i in 0..n {
            y[i] -= dot(&lu.row(i)[..i], &y[..i]);
        }
        for i in (0..n).rev() {
            let s = y[i] - dot(&lu.row(i)[i + 1..], &y[i + 1..]);
            y[i] = s / lu[(i, i)];
        }
        b.copy_from_slice(&y);
    };

    #[cfg(feature = "parallel")]
    xt.data_mut().par_chunks_mut(n).for_each(solve_one);
    #[cfg(not(feature = "parallel"))]
    xt.data_mut().chunks_mut(n).for_each(solve_one);

    xt.transpose()
}

// ── Solver entry points ──────────────────────────────────────────────

/// Solves the symmetric positive definite system `M·X = rhs`.
pub fn solve_spd(m: &Matrix, rhs: &Matrix) -> Result<Matrix, LinalgError> {
    if m.rows() != m.cols() {
        return Err(LinalgError::Dimension(format!(
            "solve_spd needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if m.rows() != rhs.rows() {
        return Err(LinalgError::Dimension(format!(
            "rhs has {} rows, expected {}",
            rhs.rows(),
            m.rows()
        )));
    }
    if !is_symmetric(m, SYMMETRY_TOL) {
        return Err(LinalgError::NotSymmetric);
    }
    let l = cholesky(m)?;
    Ok(cholesky_solve(&l, rhs))
}

/// Solves a general square system, preferring Cholesky and degrading to LU
/// and finally to the SVD pseudoinverse. The route taken is reported so
/// callers can surface fallbacks in their run records.
pub fn solve_square(m: &Matrix, rhs: &Matrix) -> Result<(Matrix, SolveRoute), LinalgError> {
    if m.rows() != m.cols() || m.rows() != rhs.rows() {
        return Err(LinalgError::Dimension(format!(
            "cannot solve {}x{} system against {}x{} rhs",
            m.rows(),
            m.cols(),
            rhs.rows(),
            rhs.cols()
        )));
    }
    if is_symmetric(m, SYMMETRY_TOL) {
        if let Ok(l) = cholesky(m) {
            return Ok((cholesky_solve(&l, rhs), SolveRoute::Cholesky));
        }
    }
    match lu_factor(m) {
        Ok((lu, perm)) => Ok((lu_solve(&lu, &perm, rhs), SolveRoute::Lu)),
        Err(LinalgError::SingularSystem) => {
            let pinv = svd_pinv(m, None)?;
            Ok((pinv.matmul(rhs), SolveRoute::SvdFallback))
        }
        Err(e) => Err(e),
    }
}

// ── Pseudoinverses ───────────────────────────────────────────────────

/// Ridge-regularized left inverse `(AᵀA + λI)⁻¹Aᵀ` for a tall matrix.
///
/// With `λ = 0` and full column rank this is the Moore-Penrose
/// pseudoinverse.
pub fn left_pinv(a: &Matrix, lambda: RidgeParam) -> Result<Matrix, LinalgError> {
    if a.rows() < a.cols() {
        return Err(LinalgError::Dimension(format!(
            "left inverse needs rows >= cols, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let mut gram = a.tr_matmul(a);
    if lambda.value() != 0.0 {
        gram.add_diag(lambda.value());
    }
    let l = cholesky(&gram).map_err(|_| LinalgError::SingularGram)?;
    Ok(cholesky_solve(&l, &a.transpose()))
}

/// Moore-Penrose pseudoinverse via one-sided Jacobi SVD.
///
/// Singular values at or below `rank_tol · σ_max` are treated as zero;
/// `rank_tol` defaults to `1e-12 · max(rows, cols)`. Intended as the test
/// oracle and as the fallback for rank-deficient inputs, not as a hot path.
pub fn svd_pinv(a: &Matrix, rank_tol: Option<f64>) -> Result<Matrix, LinalgError> {
    if !a.all_finite() {
        return Err(LinalgError::NonFinite);
    }
    let tol = rank_tol.unwrap_or(1e-12 * a.rows().max(a.cols()) as f64);
    assert!(tol > 0.0, "rank tolerance must be positive");
    if a.rows() < a.cols() {
        // pinv(A) = pinv(Aᵀ)ᵀ
        return Ok(svd_pinv(&a.transpose(), rank_tol)?.transpose());
    }

    let k = a.cols();
    let l = a.rows();
    // Work on Aᵀ so the columns being orthogonalized are contiguous rows.
    let mut ut = a.transpose(); // k x l
    let mut vt = Matrix::identity(k);

    let mut converged = false;
    for _ in 0..SVD_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..k {
            for j in (i + 1)..k {
                let (ri, rj) = row_pair(&mut ut, i, j, l);
                let aa = dot(ri, ri);
                let bb = dot(rj, rj);
                let cc = dot(ri, rj);
                if cc.abs() <= 1e-15 * (aa * bb).sqrt() || aa == 0.0 || bb == 0.0 {
                    continue;
                }
                rotated = true;
                let tau = (bb - aa) / (2.0 * cc);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(ri, rj, c, s);
                let (vi, vj) = row_pair(&mut vt, i, j, k);
                rotate(vi, vj, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::Convergence);
    }

    let sigma: Vec<f64> = (0..k).map(|i| dot(ut.row(i), ut.row(i)).sqrt()).collect();
    let sigma_max = sigma.iter().fold(0.0f64, |m, &v| m.max(v));
    let cut = tol * sigma_max;
    // A⁺ = V · Σ⁺ · Uᵀ with U's columns stored as rows of `ut`; scaling the
    // rows by 1/σ² folds both the normalization and Σ⁺ into one pass.
    let mut scaled = ut;
    for i in 0..k {
        let f = if sigma[i] > cut && sigma[i] > 0.0 {
            1.0 / (sigma[i] * sigma[i])
        } else {
            0.0
        };
        for v in scaled.row_mut(i) {
            *v *= f;
        }
    }
    Ok(vt.tr_matmul(&scaled))
}

fn row_pair<'m>(m: &'m mut Matrix, i: usize, j: usize, len: usize) -> (&'m mut [f64], &'m mut [f64]) {
    debug_assert!(i < j);
    let cols = m.cols();
    let (top, bottom) = m.data_mut().split_at_mut(j * cols);
    (&mut top[i * cols..i * cols + len], &mut bottom[..len])
}

#[inline]
fn rotate(ri: &mut [f64], rj: &mut [f64], c: f64, s: f64) {
    for (x, y) in ri.iter_mut().zip(rj.iter_mut()) {
        let xi = *x;
        let yj = *y;
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

// ── Moore-Penrose conditions ─────────────────────────────────────────

/// Per-condition outcome of the four Moore-Penrose identities.
#[derive(Debug, Clone, Serialize)]
pub struct MpConditions {
    pub pass: [bool; 4],
    pub deviation: [f64; 4],
}

impl MpConditions {
    pub fn all_pass(&self) -> bool {
        self.pass.iter().all(|&p| p)
    }
}

/// Checks `A·A⁺·A = A`, `A⁺·A·A⁺ = A⁺`, and the symmetry of `A·A⁺` and
/// `A⁺·A`, each in max-abs norm against `tol`.
pub fn mp_conditions_check(a: &Matrix, ap: &Matrix, tol: f64) -> Result<MpConditions, LinalgError> {
    if ap.rows() != a.cols() || ap.cols() != a.rows() {
        return Err(LinalgError::Dimension(format!(
            "pseudoinverse of a {}x{} matrix must be {}x{}, got {}x{}",
            a.rows(),
            a.cols(),
            a.cols(),
            a.rows(),
            ap.rows(),
            ap.cols()
        )));
    }
    let a_ap = a.matmul(ap);
    let ap_a = ap.matmul(a);
    let d1 = a_ap.matmul(a).sub(a).max_abs();
    let d2 = ap_a.matmul(ap).sub(ap).max_abs();
    let d3 = a_ap.sub(&a_ap.transpose()).max_abs();
    let d4 = ap_a.sub(&ap_a.transpose()).max_abs();
    let deviation = [d1, d2, d3, d4];
    Ok(MpConditions {
        pass: [d1 <= tol, d2 <= tol, d3 <= tol, d4 <= tol],
        deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_spd(n: usize, seed: u64) -> Matrix {
        let g = random(n, n, seed);
        let mut m = g.tr_matmul(&g);
        m.add_diag(1.0);
        m
    }

    fn rel_frob(a: &Matrix, b: &Matrix) -> f64 {
        a.sub(b).frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn left_pinv_identity() {
        let i2 = Matrix::identity(2);
        let p = left_pinv(&i2, RidgeParam::ZERO).unwrap();
        assert!(rel_frob(&p, &i2) < 1e-14);
    }

    #[test]
    fn left_pinv_column_of_ones() {
        let a = Matrix::from_rows(&[&[1.0], &[1.0]]);
        let p = left_pinv(&a, RidgeParam::ZERO).unwrap();
        assert_eq!(p.rows(), 1);
        assert_eq!(p.cols(), 2);
        assert_abs_diff_eq!(p[(0, 0)], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(p[(0, 1)], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn left_pinv_scalar_with_ridge() {
        let a = Matrix::from_rows(&[&[1.0]]);
        let p = left_pinv(&a, RidgeParam::new(1.0)).unwrap();
        assert_abs_diff_eq!(p[(0, 0)], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn left_pinv_matches_svd_oracle() {
        let a = random(50, 10, 42);
        let lp = left_pinv(&a, RidgeParam::ZERO).unwrap();
        let sp = svd_pinv(&a, None).unwrap();
        assert!(rel_frob(&lp, &sp) < 1e-10, "rel diff {}", rel_frob(&lp, &sp));
    }

    #[test]
    fn left_pinv_rejects_wide_input() {
        let a = random(3, 5, 1);
        assert!(matches!(
            left_pinv(&a, RidgeParam::ZERO),
            Err(LinalgError::Dimension(_))
        ));
    }

    #[test]
    fn left_pinv_reports_singular_gram() {
        // Duplicate columns make AᵀA singular at lambda = 0.
        let a = Matrix::from_rows(&[&[1.0, 1.0], &[2.0, 2.0], &[3.0, 3.0]]);
        assert!(matches!(
            left_pinv(&a, RidgeParam::ZERO),
            Err(LinalgError::SingularGram)
        ));
        // A positive ridge makes it solvable again.
        assert!(left_pinv(&a, RidgeParam::new(1e-6)).is_ok());
    }

    #[test]
    fn svd_pinv_of_zero_is_zero() {
        let z = Matrix::zeros(3, 2);
        let p = svd_pinv(&z, None).unwrap();
        assert_eq!(p.rows(), 2);
        assert_eq!(p.cols(), 3);
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn svd_pinv_diagonal_case_passes_mp_conditions() {
        let a = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 2.0], &[0.0, 0.0]]);
        let p = svd_pinv(&a, None).unwrap();
        let expected = Matrix::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 0.5, 0.0]]);
        assert!(rel_frob(&p, &expected) < 1e-12);
        assert!(mp_conditions_check(&a, &p, 1e-8).unwrap().all_pass());
    }

    #[test]
    fn svd_pinv_identity() {
        let i3 = Matrix::identity(3);
        let p = svd_pinv(&i3, None).unwrap();
        assert!(rel_frob(&p, &i3) < 1e-13);
    }

    #[test]
    fn svd_pinv_wide_and_rank_deficient() {
        // Rank-1 wide matrix: check the four conditions instead of entries.
        let a = Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]]);
        let p = svd_pinv(&a, None).unwrap();
        let report = mp_conditions_check(&a, &p, 1e-10).unwrap();
        assert!(report.all_pass(), "deviations: {:?}", report.deviation);
    }

    #[test]
    fn svd_pinv_rejects_non_finite() {
        let mut a = Matrix::zeros(2, 2);
        a[(0, 0)] = f64::NAN;
        assert!(matches!(svd_pinv(&a, None), Err(LinalgError::NonFinite)));
    }

    #[test]
    fn solve_spd_identity_returns_rhs() {
        let rhs = random(3, 2, 5);
        let x = solve_spd(&Matrix::identity(3), &rhs).unwrap();
        assert!(rel_frob(&x, &rhs) < 1e-14);
    }

    #[test]
    fn solve_spd_diagonal() {
        let m = Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 4.0]]);
        let rhs = Matrix::from_rows(&[&[1.0], &[1.0]]);
        let x = solve_spd(&m, &rhs).unwrap();
        assert_abs_diff_eq!(x[(0, 0)], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(x[(1, 0)], 0.25, epsilon = 1e-14);
    }

    #[test]
    fn solve_spd_residual_on_random_system() {
        let m = random_spd(20, 9);
        let rhs = random(20, 3, 10);
        let x = solve_spd(&m, &rhs).unwrap();
        let residual = m.matmul(&x).sub(&rhs).frobenius_norm();
        assert!(residual <= 1e-8 * rhs.frobenius_norm());
    }

    #[test]
    fn solve_spd_rejects_asymmetric_input() {
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        let rhs = Matrix::identity(2);
        assert!(matches!(solve_spd(&m, &rhs), Err(LinalgError::NotSymmetric)));
    }

    #[test]
    fn solve_spd_rejects_indefinite_input() {
        let m = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let rhs = Matrix::identity(2);
        assert!(matches!(
            solve_spd(&m, &rhs),
            Err(LinalgError::NotPositiveDefinite)
        ));
    }

    #[test]
    fn solve_spd_matches_explicit_inverse() {
        let m = random_spd(16, 33);
        let rhs = random(16, 4, 34);
        let minv = svd_pinv(&m, None).unwrap();
        let x = solve_spd(&m, &rhs).unwrap();
        assert!(rel_frob(&x, &minv.matmul(&rhs)) < 1e-8);
    }

    #[test]
    fn cholesky_of_large_blocked_system_solves_accurately() {
        // Bigger than one block so the blocked path is exercised.
        let m = random_spd(150, 77);
        let rhs = random(150, 7, 78);
        let l = cholesky(&m).unwrap();
        let x = cholesky_solve(&l, &rhs);
        let residual = m.matmul(&x).sub(&rhs).frobenius_norm();
        assert!(residual <= 1e-9 * rhs.frobenius_norm());
    }

    #[test]
    fn lu_solves_asymmetric_systems() {
        let m = random(30, 30, 55);
        let rhs = random(30, 5, 56);
        let (lu, perm) = lu_factor(&m).unwrap();
        let x = lu_solve(&lu, &perm, &rhs);
        let residual = m.matmul(&x).sub(&rhs).frobenius_norm();
        assert!(residual <= 1e-9 * rhs.frobenius_norm());
    }

    #[test]
    fn lu_detects_singularity() {
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(lu_factor(&m), Err(LinalgError::SingularSystem)));
    }

    #[test]
    fn solve_square_routes_and_falls_back() {
        let spd = random_spd(12, 60);
        let rhs = random(12, 2, 61);
        let (_, route) = solve_square(&spd, &rhs).unwrap();
        assert_eq!(route, SolveRoute::Cholesky);

        let asym = random(12, 12, 62);
        let (x, route) = solve_square(&asym, &rhs).unwrap();
        assert_eq!(route, SolveRoute::Lu);
        assert!(asym.matmul(&x).sub(&rhs).frobenius_norm() <= 1e-8 * rhs.frobenius_norm());

        let singular = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let rhs2 = Matrix::from_rows(&[&[1.0], &[2.0]]);
        let (x, route) = solve_square(&singular, &rhs2).unwrap();
        assert_eq!(route, SolveRoute::SvdFallback);
        // Least-squares solution of the consistent singular system.
        assert!(singular.matmul(&x).sub(&rhs2).max_abs() < 1e-10);
    }

    #[test]
    fn mp_conditions_trivial_cases() {
        let i2 = Matrix::identity(2);
        assert!(mp_conditions_check(&i2, &i2, 1e-12).unwrap().all_pass());

        let a = Matrix::from_rows(&[&[1.0], &[1.0]]);
        let ap = Matrix::from_rows(&[&[0.5, 0.5]]);
        assert!(mp_conditions_check(&a, &ap, 1e-12).unwrap().all_pass());
    }

    #[test]
    fn mp_conditions_detect_asymmetric_projector() {
        let a = Matrix::from_rows(&[&[1.0], &[1.0]]);
        let ap = Matrix::from_rows(&[&[1.0, 0.0]]);
        let report = mp_conditions_check(&a, &ap, 1e-12).unwrap();
        // A·Ap is idempotent but not symmetric: only condition 3 fails.
        assert_eq!(report.pass, [true, true, false, true]);
    }

    #[test]
    fn mp_conditions_dimension_error() {
        let a = Matrix::identity(2);
        let ap = Matrix::identity(3);
        assert!(mp_conditions_check(&a, &ap, 1e-12).is_err());
    }

    #[test]
    fn left_pinv_passes_mp_conditions_on_random_tall_matrices() {
        for seed in 0..10u64 {
            let a = random(40, 8, 100 + seed);
            let p = left_pinv(&a, RidgeParam::ZERO).unwrap();
            let report = mp_conditions_check(&a, &p, 1e-8).unwrap();
            assert!(report.all_pass(), "seed {seed}: {:?}", report.deviation);
            // Left-inverse identity.
            let pa = p.matmul(&a);
            assert!(pa.sub(&Matrix::identity(8)).max_abs() < 1e-8);
        }
    }
}
