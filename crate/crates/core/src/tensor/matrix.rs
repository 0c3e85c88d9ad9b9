use std::fmt;

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix[{}x{}]", self.rows, self.cols)?;
        if self.data.len() <= 64 {
            f.debug_list()
                .entries(self.data.chunks(self.cols.max(1)))
                .finish()?;
        }
        Ok(())
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "buffer of length {} cannot be viewed as {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Builds a matrix from equal-length rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    /// A 1×n matrix.
    pub fn row_vector(values: &[f64]) -> Self {
        Matrix {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// `self += other`, elementwise.
    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        self.expect_shape(other.shape(), "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Rows in reverse order.
    pub fn reversed_rows(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            out.row_mut(self.rows - 1 - r).copy_from_slice(self.row(r));
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm_acc(
            &self.data,
            self.rows,
            self.cols,
            &other.data,
            other.cols,
            &mut out.data,
        );
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub(crate) fn expect_shape(&self, shape: (usize, usize), what: &str) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::Shape(format!(
                "{what}: expected {}x{}, got {}x{}",
                shape.0, shape.1, self.rows, self.cols
            )));
        }
        Ok(())
    }
}

/// `out[m×n] += a[m×k] · b[k×n]`.
pub fn gemm_acc(a: &[f64], m: usize, k: usize, b: &[f64], n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    gemm_into(Lhs::row_major(a, m, k), Rhs::row_major(b, n), out, n);
}

/// `out[k×n] += aᵀ · b` where `a` is `m×k` and `b` is `m×n`.
pub fn gemm_tn_acc(a: &[f64], m: usize, k: usize, b: &[f64], n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(out.len(), k * n);
    gemm_into(Lhs::transposed(a, m, k), Rhs::row_major(b, n), out, n);
}

/// `out[m×k] += a · bᵀ` where `a` is `m×n` and `b` is `k×n`.
pub fn gemm_nt_acc(a: &[f64], m: usize, n: usize, b: &[f64], k: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * k);
    let mut bt = vec![0.0; n * k];
    for (p, row) in b.chunks_exact(n).enumerate() {
        for (j, &v) in row.iter().enumerate() {
            bt[j * k + p] = v;
        }
    }
    gemm_into(Lhs::row_major(a, m, n), Rhs::row_major(&bt, k), out, k);
}

/// Left operand of [`gemm_into`]: element `(i, p)` is
/// `data[i·row_stride + p·col_stride]`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Lhs<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub inner: usize,
    pub row_stride: usize,
    pub col_stride: usize,
}

impl<'a> Lhs<'a> {
    pub fn row_major(data: &'a [f64], rows: usize, inner: usize) -> Self {
        Lhs {
            data,
            rows,
            inner,
            row_stride: inner,
            col_stride: 1,
        }
    }

    /// The transpose of a row-major `m×k` matrix.
    pub fn transposed(data: &'a [f64], m: usize, k: usize) -> Self {
        Lhs {
            data,
            rows: k,
            inner: m,
            row_stride: 1,
            col_stride: k,
        }
    }
}

/// Right operand of [`gemm_into`]: `cols` contiguous values per row, rows
/// `row_stride` apart.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Rhs<'a> {
    pub data: &'a [f64],
    pub cols: usize,
    pub row_stride: usize,
}

impl<'a> Rhs<'a> {
    pub fn row_major(data: &'a [f64], cols: usize) -> Self {
        Rhs {
            data,
            cols,
            row_stride: cols,
        }
    }
}

/// `out += a · b`, where output row `i` starts at `i·out_stride`.
///
/// Output is computed in register blocks. Every element still sums its
/// products in increasing inner index, so neither the blocking nor the
/// instruction set changes results.
pub(crate) fn gemm_into(a: Lhs, b: Rhs, out: &mut [f64], out_stride: usize) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports the enabled feature.
            unsafe { gemm_avx2(a, b, out, out_stride) };
            return;
        }
    }
    gemm_blocked(a, b, out, out_stride);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn gemm_avx2(a: Lhs, b: Rhs, out: &mut [f64], out_stride: usize) {
    gemm_blocked(a, b, out, out_stride);
}

#[inline(always)]
fn gemm_blocked(a: Lhs, b: Rhs, out: &mut [f64], out_stride: usize) {
    let mut i0 = 0;
    while i0 + 4 <= a.rows {
        block::<4, 8>(a, b, i0, out, out_stride);
        i0 += 4;
    }
    while i0 < a.rows {
        block::<1, 32>(a, b, i0, out, out_stride);
        i0 += 1;
    }
}

#[inline(always)]
fn block<const R: usize, const NR: usize>(
    a: Lhs,
    b: Rhs,
    i0: usize,
    out: &mut [f64],
    out_stride: usize,
) {
    let n = b.cols;
    const STACK: usize = 256;
    let mut on_stack = [[0.0; R]; STACK];
    let mut on_heap = Vec::new();
    let panel: &mut [[f64; R]] = if a.inner <= STACK {
        &mut on_stack[..a.inner]
    } else {
        on_heap.resize(a.inner, [0.0; R]);
        &mut on_heap
    };
    for (p, ap) in panel.iter_mut().enumerate() {
        for (r, v) in ap.iter_mut().enumerate() {
            *v = a.data[(i0 + r) * a.row_stride + p * a.col_stride];
        }
    }
    let panel = &*panel;
    let b_row = |p: usize| &b.data[p * b.row_stride..p * b.row_stride + n];
    let mut j0 = 0;
    while j0 + NR <= n {
        let mut acc = [[0.0; NR]; R];
        for (r, acc_r) in acc.iter_mut().enumerate() {
            let at = (i0 + r) * out_stride + j0;
            acc_r.copy_from_slice(&out[at..at + NR]);
        }
        for (p, ap) in panel.iter().enumerate() {
            let bp: &[f64; NR] = b_row(p)[j0..j0 + NR].try_into().unwrap();
            for (acc_r, &av) in acc.iter_mut().zip(ap) {
                for (o, &bv) in acc_r.iter_mut().zip(bp) {
                    *o += av * bv;
                }
            }
        }
        for (r, acc_r) in acc.iter().enumerate() {
            let at = (i0 + r) * out_stride + j0;
            out[at..at + NR].copy_from_slice(acc_r);
        }
        j0 += NR;
    }
    if j0 < n {
        for r in 0..R {
            let at = (i0 + r) * out_stride;
            let out_row = &mut out[at + j0..at + n];
            for (p, ap) in panel.iter().enumerate() {
                for (o, &bv) in out_row.iter_mut().zip(&b_row(p)[j0..]) {
                    *o += ap[r] * bv;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = crate::tensor::Rng::new(3);
        for _ in 0..20 {
            let (m, k, n) = (1 + rng.below(6), 1 + rng.below(6), 1 + rng.below(6));
            let a =
                Matrix::new(m, k, (0..m * k).map(|_| rng.uniform(-2.0, 2.0)).collect()).unwrap();
            let b =
                Matrix::new(k, n, (0..k * n).map(|_| rng.uniform(-2.0, 2.0)).collect()).unwrap();
            let fast = a.matmul(&b).unwrap();
            let slow = naive(&a, &b);
            for (x, y) in fast.as_slice().iter().zip(slow.as_slice()) {
                assert!((x - y).abs() < 1e-12);
            }

            // (aᵀ)ᵀ·b through the transposed-left kernel
            let at = a.transpose();
            let mut tn = vec![0.0; m * n];
            gemm_tn_acc(at.as_slice(), k, m, b.as_slice(), n, &mut tn);
            let bt = b.transpose();
            let mut nt = vec![0.0; m * n];
            gemm_nt_acc(a.as_slice(), m, k, bt.as_slice(), n, &mut nt);
            for ((x, y), z) in tn.iter().zip(&nt).zip(slow.as_slice()) {
                assert!((x - z).abs() < 1e-12);
                assert!((y - z).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn new_rejects_wrong_length() {
        assert!(matches!(
            Matrix::new(2, 2, vec![0.0; 3]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn reversed_rows_twice_is_identity() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        assert_eq!(m.reversed_rows().row(0), &[5.0, 6.0]);
        assert_eq!(m.reversed_rows().reversed_rows(), m);
    }
}
