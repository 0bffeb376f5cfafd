//! Dense real linear-algebra kernels.
//!
//! Everything here is plain IEEE double precision over row-major storage.
//! The [`LinearOperator`] trait is the seam the solvers work against, so a
//! rotated sensing matrix, a stacked design matrix or a tiny test matrix
//! can all be handed to the same FISTA loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Vectors are plain `Vec<f64>`; the matrix type carries the invariants.
pub type DenseVector = Vec<f64>;

/// Default number of power iterations used for Lipschitz estimates.
pub const DEFAULT_POWER_ITERS: usize = 100;

/// Multiply-add counter used to check per-step cost contracts.
///
/// The counter is thread-local so that tests running in parallel do not
/// interfere with each other. Kernels add their nominal operation count in
/// bulk, once per call.
pub mod flops {
    use std::cell::Cell;

    thread_local! {
        static COUNT: Cell<u64> = const { Cell::new(0) };
    }

    pub fn reset() {
        COUNT.with(|c| c.set(0));
    }

    pub fn count() -> u64 {
        COUNT.with(|c| c.get())
    }

    pub(crate) fn add(n: usize) {
        COUNT.with(|c| c.set(c.get().wrapping_add(n as u64)));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::config(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix entries",
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!(
                "non-finite matrix entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    what: "row length",
                    expected: c,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(r, c, data)
    }

    /// Builds an `rows x k` matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let k = columns.len();
        let m = columns.first().map_or(0, Vec::len);
        let mut data = vec![0.0; m * k];
        for (j, col) in columns.iter().enumerate() {
            if col.len() != m {
                return Err(Error::DimensionMismatch {
                    what: "column length",
                    expected: m,
                    got: col.len(),
                });
            }
            for (i, &v) in col.iter().enumerate() {
                data[i * k + j] = v;
            }
        }
        Self::from_vec(m, k, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::from_vec(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        Ok(m)
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        let n = values.len();
        let mut m = Self::zeros(n, n)?;
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        Self::from_vec(n, n, m.data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> DenseVector {
        (0..self.rows).map(|r| self.get(r, j)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut data = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        DenseMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                what: "inner dimension of matrix product",
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut data = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let out = &mut data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        flops::add(self.rows * self.cols * other.cols);
        Ok(DenseMatrix {
            rows: self.rows,
            cols: other.cols,
            data,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A real linear map `R^cols -> R^rows` with access to its adjoint and columns.
pub trait LinearOperator {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;

    /// `out = A x`
    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    /// `out = A^T y`
    fn apply_t_into(&self, y: &[f64], out: &mut [f64]);

    /// `out = A x` for a mostly-zero `x`; operators with column access override it.
    fn apply_sparse_into(&self, x: &[f64], out: &mut [f64]) {
        self.apply_into(x, out);
    }

    fn column_into(&self, j: usize, out: &mut [f64]);

    fn apply(&self, x: &[f64]) -> DenseVector {
        let mut out = vec![0.0; self.rows()];
        self.apply_into(x, &mut out);
        out
    }

    fn apply_t(&self, y: &[f64]) -> DenseVector {
        let mut out = vec![0.0; self.cols()];
        self.apply_t_into(y, &mut out);
        out
    }

    fn column(&self, j: usize) -> DenseVector {
        let mut out = vec![0.0; self.rows()];
        self.column_into(j, &mut out);
        out
    }
}

impl LinearOperator for DenseMatrix {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.cols, "matvec: input length");
        assert_eq!(out.len(), self.rows, "matvec: output length");
        for (r, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(r), x);
        }
        flops::add(self.rows * self.cols);
    }

    fn apply_t_into(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.rows, "matvec_t: input length");
        assert_eq!(out.len(), self.cols, "matvec_t: output length");
        out.fill(0.0);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            axpy(yr, self.row(r), out);
        }
        flops::add(self.rows * self.cols);
    }

    fn column_into(&self, j: usize, out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.get(r, j);
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().min(b.len());
    let (a, b) = (&a[..len], &b[..len]);
    // independent partial sums let the compiler vectorise the loop
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn matvec(a: &DenseMatrix, x: &[f64]) -> Result<DenseVector> {
    if a.cols != x.len() {
        return Err(Error::DimensionMismatch {
            what: "matvec input",
            expected: a.cols,
            got: x.len(),
        });
    }
    Ok(a.apply(x))
}

/// Least-squares solution of `A_S c ~ y` via a Cholesky factorisation of the
/// Gram matrix `A_S^T A_S`.
///
/// A pivot at or below `1e-12 * max|G|` is reported as [`Error::Singular`].
pub fn gram_solve(a_s: &DenseMatrix, y: &[f64]) -> Result<DenseVector> {
    if y.len() != a_s.rows {
        return Err(Error::DimensionMismatch {
            what: "gram_solve right-hand side",
            expected: a_s.rows,
            got: y.len(),
        });
    }
    let k = a_s.cols;
    if k > a_s.rows {
        return Err(Error::Singular {
            pivot: 0.0,
            tolerance: 0.0,
        });
    }
    let columns: Vec<DenseVector> = (0..k).map(|j| a_s.column(j)).collect();
    let mut gram = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let g = dot(&columns[i], &columns[j]);
            gram[i * k + j] = g;
            gram[j * k + i] = g;
        }
    }
    let rhs: Vec<f64> = columns.iter().map(|c| dot(c, y)).collect();
    flops::add(a_s.rows * k * (k + 3) / 2);
    cholesky_solve(&mut gram, k, rhs)
}

/// Solves `G c = b` in place for symmetric positive-definite `G` (k x k,
/// row-major). Only the lower triangle of `gram` is read.
fn cholesky_solve(gram: &mut [f64], k: usize, mut b: Vec<f64>) -> Result<DenseVector> {
    let tolerance = 1e-12 * gram.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for j in 0..k {
        let mut d = gram[j * k + j];
        for p in 0..j {
            d -= gram[j * k + p] * gram[j * k + p];
        }
        if d <= tolerance || !d.is_finite() {
            return Err(Error::Singular {
                pivot: d,
                tolerance,
            });
        }
        let d = d.sqrt();
        gram[j * k + j] = d;
        for i in j + 1..k {
            let mut s = gram[i * k + j];
            for p in 0..j {
                s -= gram[i * k + p] * gram[j * k + p];
            }
            gram[i * k + j] = s / d;
        }
    }
    // L z = b
    for i in 0..k {
        let mut s = b[i];
        for p in 0..i {
            s -= gram[i * k + p] * b[p];
        }
        b[i] = s / gram[i * k + i];
    }
    // L^T c = z
    for i in (0..k).rev() {
        let mut s = b[i];
        for p in i + 1..k {
            s -= gram[p * k + i] * b[p];
        }
        b[i] = s / gram[i * k + i];
    }
    flops::add(k * k * k / 3 + 2 * k * k);
    Ok(b)
}

/// Power-iteration estimate of `lambda_max(A^T A)`.
///
/// Returns the Rayleigh quotient of the last iterate, which never exceeds the
/// true eigenvalue and is nondecreasing in `iters`.
pub fn spectral_norm_sq(a: &DenseMatrix, iters: usize, seed: u64) -> f64 {
    operator_norm_sq(a, iters, seed)
}

pub fn operator_norm_sq<A: LinearOperator + ?Sized>(a: &A, iters: usize, seed: u64) -> f64 {
    let n = a.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nv = norm2(&v);
    if nv == 0.0 {
        return 0.0;
    }
    v.iter_mut().for_each(|x| *x /= nv);

    let mut av = vec![0.0; a.rows()];
    let mut w = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        a.apply_into(&v, &mut av);
        a.apply_t_into(&av, &mut w);
        estimate = dot(&v, &w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
    }
    estimate
}

/// Modified Gram-Schmidt on the columns of a square matrix.
pub fn orthonormalize(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.cols;
    let mut q: Vec<DenseVector> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = a.column(j);
        for qk in &q {
            let c = dot(qk, &v);
            axpy(-c, qk, &mut v);
        }
        let nv = norm2(&v);
        if nv <= 1e-12 * a.max_abs().max(f64::MIN_POSITIVE) {
            return Err(Error::Degenerate(format!(
                "column {j} is linearly dependent on earlier columns"
            )));
        }
        v.iter_mut().for_each(|x| *x /= nv);
        q.push(v);
    }
    DenseMatrix::from_columns(&q)
}

/// `max |Q^T Q - I|` over all entries.
pub fn orthonormality_deviation(q: &DenseMatrix) -> f64 {
    let cols: Vec<DenseVector> = (0..q.cols).map(|j| q.column(j)).collect();
    let mut worst = 0.0f64;
    for i in 0..q.cols {
        for j in 0..=i {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(&cols[i], &cols[j]) - target).abs());
        }
    }
    worst
}

pub(crate) fn ensure_orthonormal(q: &DenseMatrix) -> Result<()> {
    if q.rows != q.cols {
        return Err(Error::DimensionMismatch {
            what: "square basis",
            expected: q.rows,
            got: q.cols,
        });
    }
    let deviation = orthonormality_deviation(q);
    if deviation > 1e-8 {
        return Err(Error::NotOrthonormal { deviation });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        DenseMatrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn matvec_examples() {
        let id = DenseMatrix::identity(3).unwrap();
        assert_eq!(matvec(&id, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);

        let z = DenseMatrix::zeros(2, 2).unwrap();
        assert_eq!(matvec(&z, &[5.0, -7.0]).unwrap(), vec![0.0, 0.0]);

        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(matvec(&a, &[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
    }

    #[test]
    fn matvec_rejects_bad_length() {
        let a = DenseMatrix::identity(3).unwrap();
        assert!(matches!(
            matvec(&a, &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn construction_rejects_non_finite_and_empty() {
        assert!(DenseMatrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::from_vec(0, 2, vec![]).is_err());
    }

    #[test]
    fn gram_solve_scalar_and_orthonormal() {
        let a = DenseMatrix::from_rows(&[vec![2.0], vec![0.0]]).unwrap();
        let c = gram_solve(&a, &[4.0, 0.0]).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-15);

        let q = orthonormalize(&gaussian(6, 6, 3)).unwrap();
        let cols: Vec<_> = (0..3).map(|j| q.column(j)).collect();
        let q3 = DenseMatrix::from_columns(&cols).unwrap();
        let y = [0.3, -1.0, 2.0, 0.5, 0.1, -0.7];
        let c = gram_solve(&q3, &y).unwrap();
        let expect = q3.apply_t(&y);
        for (a, b) in c.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_solve_consistent_system() {
        let a = gaussian(8, 3, 11);
        let truth = [1.0, -2.0, 3.0];
        let y = a.apply(&truth);
        let c = gram_solve(&a, &y).unwrap();
        for (ci, ti) in c.iter().zip(&truth) {
            assert!((ci - ti).abs() < 1e-9);
        }
    }

    #[test]
    fn gram_solve_detects_rank_deficiency() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
        assert!(matches!(
            gram_solve(&a, &[1.0, 1.0, 1.0]),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn spectral_norm_examples() {
        let id = DenseMatrix::identity(5).unwrap();
        assert!((spectral_norm_sq(&id, 1, 0) - 1.0).abs() < 1e-12);

        let d = DenseMatrix::diag(&[3.0, 1.0]).unwrap();
        assert!((spectral_norm_sq(&d, 100, 7) - 9.0).abs() < 1e-6);

        let z = DenseMatrix::zeros(3, 4).unwrap();
        assert_eq!(spectral_norm_sq(&z, 10, 1), 0.0);
    }

    #[test]
    fn spectral_norm_matches_dense_eigensolver() {
        let a = gaussian(20, 50, 5);
        // A A^T is 20x20 and shares the nonzero spectrum of A^T A.
        let na = nalgebra::DMatrix::from_row_slice(20, 50, a.as_slice());
        let eig = nalgebra::SymmetricEigen::new(&na * na.transpose());
        let truth = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        let est = spectral_norm_sq(&a, 2000, 9);
        assert!(((est - truth) / truth).abs() < 1e-4, "{est} vs {truth}");
        assert!(est <= truth * (1.0 + 1e-12));
    }

    #[test]
    fn spectral_norm_monotone_in_iterations() {
        let a = gaussian(10, 30, 2);
        let mut prev = 0.0;
        for iters in 1..40 {
            let est = spectral_norm_sq(&a, iters, 4);
            assert!(est >= prev - 1e-12 * est, "iters {iters}: {est} < {prev}");
            prev = est;
        }
    }

    #[test]
    fn flop_counter_tracks_matvec() {
        let a = gaussian(4, 7, 1);
        flops::reset();
        let _ = a.apply(&[1.0; 7]);
        assert_eq!(flops::count(), 28);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn matvec_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
                let m = gaussian(5, 9, seed);
                let x = gaussian(1, 9, seed + 1).as_slice().to_vec();
                let y = gaussian(1, 9, seed + 2).as_slice().to_vec();
                let comb: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
                let lhs = m.apply(&comb);
                let (mx, my) = (m.apply(&x), m.apply(&y));
                for i in 0..5 {
                    let rhs = a * mx[i] + b * my[i];
                    let scale = (a * mx[i]).abs() + (b * my[i]).abs() + 1.0;
                    prop_assert!((lhs[i] - rhs).abs() <= 1e-12 * scale);
                }
            }

            #[test]
            fn gram_solve_residual_orthogonal(seed in 0u64..1000, k in 1usize..6) {
                let a = gaussian(12, k, seed);
                let y = gaussian(1, 12, seed + 99).as_slice().to_vec();
                let c = gram_solve(&a, &y).unwrap();
                let fit = a.apply(&c);
                let r: Vec<f64> = y.iter().zip(&fit).map(|(p, q)| p - q).collect();
                let atr = a.apply_t(&r);
                let aty = a.apply_t(&y);
                let bound = 1e-9 * aty.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                prop_assert!(atr.iter().all(|v| v.abs() <= bound));
            }
        }
    }
}
