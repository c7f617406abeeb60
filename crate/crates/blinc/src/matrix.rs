//! Dense row-major `f64` matrices and the multiply kernels everything else
//! builds on.
//!
//! Products go through `matrixmultiply`'s packed dgemm. With the `parallel`
//! feature (on by default) large products are split row-wise across the
//! rayon pool; [`Matrix::matmul_seq`] is the single-threaded path, and it is
//! the only path when the feature is disabled.

use std::fmt;
use std::ops::{Index, IndexMut, Range};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Products with at least this many `m * k * n` element-multiplies are split
/// across the thread pool; smaller ones are not worth the fork overhead.
#[cfg(feature = "parallel")]
const PAR_MIN_WORK: usize = 1 << 18;

/// Dense row-major matrix of `f64` values.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Wraps an existing row-major buffer. Panics if the length is not
    /// `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "buffer length {} does not match {}x{}",
            data.len(),
            rows,
            cols
        );
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from row slices; all rows must have equal length.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        assert!(!rows.is_empty(), "from_rows needs at least one row");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Copy of the row range `r` as a new matrix.
    pub fn rows_range(&self, r: Range<usize>) -> Matrix {
        assert!(r.end <= self.rows && r.start <= r.end, "row range out of bounds");
        Matrix {
            rows: r.end - r.start,
            cols: self.cols,
            data: self.data[r.start * self.cols..r.end * self.cols].to_vec(),
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        // Blocked to keep both sides cache-resident.
        const B: usize = 32;
        for i0 in (0..self.rows).step_by(B) {
            for j0 in (0..self.cols).step_by(B) {
                let i1 = (i0 + B).min(self.rows);
                let j1 = (j0 + B).min(self.cols);
                for i in i0..i1 {
                    for j in j0..j1 {
                        out.data[j * self.rows + i] = self.data[i * self.cols + j];
                    }
                }
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64 + Sync) {
        #[cfg(feature = "parallel")]
        if self.data.len() >= 1 << 14 {
            self.data.par_iter_mut().for_each(|v| *v = f(*v));
            return;
        }
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// Element-wise `self - rhs`.
    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in sub");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Element-wise `self + rhs`.
    pub fn add(&self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in add");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Adds `v` to every diagonal entry (square matrices only).
    pub fn add_diag(&mut self, v: f64) {
        assert_eq!(self.rows, self.cols, "add_diag needs a square matrix");
        for i in 0..self.rows {
            self.data[i * self.cols + i] += v;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|&v| v * v).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Column-concatenates `parts` (all with equal row counts).
    pub fn hstack(parts: &[&Matrix]) -> Matrix {
        assert!(!parts.is_empty());
        let rows = parts[0].rows;
        assert!(parts.iter().all(|p| p.rows == rows), "row counts differ in hstack");
        let cols: usize = parts.iter().map(|p| p.cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let dst = out.row_mut(i);
            let mut off = 0;
            for p in parts {
                dst[off..off + p.cols].copy_from_slice(p.row(i));
                off += p.cols;
            }
        }
        out
    }

    /// Row-concatenates `self` on top of `bottom`.
    pub fn vstack(&self, bottom: &Matrix) -> Matrix {
        assert_eq!(self.cols, bottom.cols, "column counts differ in vstack");
        let mut data = Vec::with_capacity((self.rows + bottom.rows) * self.cols);
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&bottom.data);
        Matrix {
            rows: self.rows + bottom.rows,
            cols: self.cols,
            data,
        }
    }

    /// `self * rhs`, parallel when the `parallel` feature is on and the
    /// product is large enough.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        gemm_into(1.0, self.view(), rhs.view(), 0.0, &mut out);
        out
    }

    /// `self * rhsᵀ` without materializing the transpose.
    pub fn matmul_bt(&self, rhs: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows, rhs.rows);
        gemm_into(1.0, self.view(), rhs.view_t(), 0.0, &mut out);
        out
    }

    /// `selfᵀ * rhs` without materializing the transpose.
    pub fn tr_matmul(&self, rhs: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        gemm_into(1.0, self.view_t(), rhs.view(), 0.0, &mut out);
        out
    }

    /// Single-threaded `self * rhs`. This is the fallback used everywhere
    /// when the `parallel` feature is off; exposed so the benches can compare
    /// the two paths directly.
    pub fn matmul_seq(&self, rhs: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        gemm_seq(1.0, self.view(), rhs.view(), 0.0, &mut out);
        out
    }

    #[inline]
    pub(crate) fn view(&self) -> View<'_> {
        View {
            data: &self.data,
            off: 0,
            rows: self.rows,
            cols: self.cols,
            rs: self.cols,
            cs: 1,
        }
    }

    #[inline]
    pub(crate) fn view_t(&self) -> View<'_> {
        View {
            data: &self.data,
            off: 0,
            rows: self.cols,
            cols: self.rows,
            rs: 1,
            cs: self.cols,
        }
    }

    /// View of the submatrix `[r0, r1) x [c0, c1)`.
    #[inline]
    pub(crate) fn sub_view(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> View<'_> {
        debug_assert!(r0 <= r1 && r1 <= self.rows && c0 <= c1 && c1 <= self.cols);
        View {
            data: &self.data,
            off: r0 * self.cols + c0,
            rows: r1 - r0,
            cols: c1 - c0,
            rs: self.cols,
            cs: 1,
        }
    }

    /// Transposed view of the submatrix `[r0, r1) x [c0, c1)`.
    #[inline]
    pub(crate) fn sub_view_t(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> View<'_> {
        debug_assert!(r0 <= r1 && r1 <= self.rows && c0 <= c1 && c1 <= self.cols);
        View {
            data: &self.data,
            off: r0 * self.cols + c0,
            rows: c1 - c0,
            cols: r1 - r0,
            rs: 1,
            cs: self.cols,
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        let show = self.rows.min(8);
        for i in 0..show {
            write!(f, "  [")?;
            for j in 0..self.cols.min(8) {
                write!(f, "{:12.5e}", self[(i, j)])?;
                if j + 1 < self.cols.min(8) {
                    write!(f, ", ")?;
                }
            }
            writeln!(f, "{}]", if self.cols > 8 { ", …" } else { "" })?;
        }
        if self.rows > show {
            writeln!(f, "  …")?;
        }
        write!(f, "]")
    }
}

/// Borrowed, possibly strided view into a matrix buffer. Strides are in
/// elements and always non-negative, so views stay `Send + Sync`.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    data: &'a [f64],
    off: usize,
    rows: usize,
    cols: usize,
    rs: usize,
    cs: usize,
}

impl<'a> View<'a> {
    #[inline]
    fn split_rows(self, r0: usize, nrows: usize) -> View<'a> {
        View {
            off: self.off + r0 * self.rs,
            rows: nrows,
            ..self
        }
    }
}

/// `c = alpha * a * b + beta * c` with `c` freshly allocated and contiguous.
pub(crate) fn gemm_into(alpha: f64, a: View<'_>, b: View<'_>, beta: f64, c: &mut Matrix) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    assert_eq!(c.rows, a.rows);
    assert_eq!(c.cols, b.cols);

    #[cfg(feature = "parallel")]
    {
        let work = a.rows * a.cols * b.cols;
        if work >= PAR_MIN_WORK && a.rows >= 2 {
            let n = c.cols;
            let threads = rayon::current_num_threads().max(1);
            let rows_per = a.rows.div_ceil(threads).max(8);
            c.data
                .par_chunks_mut(rows_per * n)
                .enumerate()
                .for_each(|(idx, chunk)| {
                    let r0 = idx * rows_per;
                    let nrows = chunk.len() / n;
                    dgemm_raw(alpha, a.split_rows(r0, nrows), b, beta, chunk, nrows, n);
                });
            return;
        }
    }

    gemm_seq(alpha, a, b, beta, c);
}

pub(crate) fn gemm_seq(alpha: f64, a: View<'_>, b: View<'_>, beta: f64, c: &mut Matrix) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    assert_eq!(c.rows, a.rows);
    assert_eq!(c.cols, b.cols);
    let (rows, cols) = (c.rows, c.cols);
    dgemm_raw(alpha, a, b, beta, &mut c.data, rows, cols);
}

fn dgemm_raw(alpha: f64, a: View<'_>, b: View<'_>, beta: f64, c: &mut [f64], m: usize, n: usize) {
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let k = a.cols;
    if k == 0 {
        for v in c.iter_mut() {
            *v *= beta;
        }
        return;
    }
    // Safety: the views index inside their backing slices by construction,
    // and `c` is an exclusive borrow disjoint from both inputs.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr().add(a.off),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr().add(b.off),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
