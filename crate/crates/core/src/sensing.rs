//! Sensing-matrix ensembles and the cyclic column rotation.
//!
//! Window `i` is sampled with `A(i) = A(0) P^i`, where `P` moves every column
//! one slot to the left. The rotation is never materialised on the hot path:
//! a [`PermutationOffset`] records how far the columns have turned and a
//! [`RotatedView`] reads the base matrix through it. Logical column `j` of
//! `A(i)` is base column `(j + i) mod n`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::numkernel::{
    self, dot, ensure_orthonormal, flops, norm2, DenseMatrix, DenseVector, LinearOperator,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ensemble {
    /// i.i.d. `N(0, 1/m)`
    Gaussian,
    /// `+-1/sqrt(m)` with equal probability
    Bernoulli,
    /// `{1, 0, -1}` with probabilities `{1/6, 2/3, 1/6}`
    Achlioptas,
}

impl Ensemble {
    pub(crate) fn tag(self) -> u8 {
        match self {
            Ensemble::Gaussian => 0,
            Ensemble::Bernoulli => 1,
            Ensemble::Achlioptas => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Ensemble::Gaussian),
            1 => Some(Ensemble::Bernoulli),
            2 => Some(Ensemble::Achlioptas),
            _ => None,
        }
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ensemble::Gaussian => "gaussian",
            Ensemble::Bernoulli => "bernoulli",
            Ensemble::Achlioptas => "achlioptas",
        })
    }
}

impl FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Ensemble::Gaussian),
            "bernoulli" => Ok(Ensemble::Bernoulli),
            "achlioptas" => Ok(Ensemble::Achlioptas),
            other => Err(Error::config(format!("unknown ensemble '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    base: DenseMatrix,
    /// Column-major copy of `base` for sparse products.
    columns: Vec<f64>,
    kind: Ensemble,
    seed: u64,
}

impl SensingMatrix {
    pub fn generate(kind: Ensemble, m: usize, n: usize, seed: u64) -> Result<Self> {
        if m == 0 || m >= n {
            return Err(Error::config(format!(
                "sensing matrix needs 1 <= m < n, got m={m}, n={n}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = match kind {
            Ensemble::Gaussian => {
                let normal = Normal::new(0.0, 1.0 / (m as f64).sqrt())
                    .map_err(|e| Error::config(e.to_string()))?;
                (0..m * n).map(|_| normal.sample(&mut rng)).collect()
            }
            Ensemble::Bernoulli => {
                let a = 1.0 / (m as f64).sqrt();
                (0..m * n)
                    .map(|_| if rng.random::<bool>() { a } else { -a })
                    .collect()
            }
            Ensemble::Achlioptas => (0..m * n)
                .map(|_| match rng.random_range(0..6u8) {
                    0 => 1.0,
                    1 => -1.0,
                    _ => 0.0,
                })
                .collect(),
        };
        Self::from_parts(DenseMatrix::from_vec(m, n, data)?, kind, seed)
    }

    /// Wraps an existing matrix; the compressive `m < n` shape is required.
    pub fn from_parts(base: DenseMatrix, kind: Ensemble, seed: u64) -> Result<Self> {
        if base.rows() >= base.cols() {
            return Err(Error::config(format!(
                "sensing matrix needs m < n, got {}x{}",
                base.rows(),
                base.cols()
            )));
        }
        let (m, n) = (base.rows(), base.cols());
        let mut columns = Vec::with_capacity(m * n);
        for j in 0..n {
            columns.extend((0..m).map(|r| base.get(r, j)));
        }
        Ok(Self {
            base,
            columns,
            kind,
            seed,
        })
    }

    pub fn base(&self) -> &DenseMatrix {
        &self.base
    }

    pub fn kind(&self) -> Ensemble {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn m(&self) -> usize {
        self.base.rows()
    }

    pub fn n(&self) -> usize {
        self.base.cols()
    }

    pub fn view(&self, offset: PermutationOffset) -> RotatedView<'_> {
        assert_eq!(offset.n, self.n(), "offset built for a different width");
        RotatedView {
            matrix: self,
            offset: offset.offset,
        }
    }

    /// Lipschitz estimate of `A^T A`, shared by every rotation of this matrix.
    pub fn lipschitz(&self) -> f64 {
        // 1% headroom over the power-iteration estimate, which is a lower bound.
        1.01 * numkernel::spectral_norm_sq(&self.base, 300, self.seed ^ 0x5eed)
    }
}

pub fn gen_gaussian(m: usize, n: usize, seed: u64) -> Result<SensingMatrix> {
    SensingMatrix::generate(Ensemble::Gaussian, m, n, seed)
}

pub fn gen_bernoulli(m: usize, n: usize, seed: u64) -> Result<SensingMatrix> {
    SensingMatrix::generate(Ensemble::Bernoulli, m, n, seed)
}

pub fn gen_achlioptas(m: usize, n: usize, seed: u64) -> Result<SensingMatrix> {
    SensingMatrix::generate(Ensemble::Achlioptas, m, n, seed)
}

/// Column rotation `P^offset` on an `n`-column matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PermutationOffset {
    offset: usize,
    n: usize,
}

impl PermutationOffset {
    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "rotation width must be positive");
        Self { offset: 0, n }
    }

    pub fn new(offset: usize, n: usize) -> Self {
        assert!(n > 0, "rotation width must be positive");
        Self { offset: offset % n, n }
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn width(&self) -> usize {
        self.n
    }

    #[must_use]
    pub fn rotate(self, steps: usize) -> Self {
        Self {
            offset: (self.offset + steps % self.n) % self.n,
            n: self.n,
        }
    }

    /// Base column backing logical column `j`.
    pub fn base_index(&self, j: usize) -> usize {
        let k = self.offset + j;
        if k >= self.n {
            k - self.n
        } else {
            k
        }
    }
}

pub fn rotate(off: PermutationOffset, steps: usize) -> PermutationOffset {
    off.rotate(steps)
}

pub fn column(a: &SensingMatrix, off: PermutationOffset, j: usize) -> Result<DenseVector> {
    if j >= a.n() {
        return Err(Error::OutOfRange {
            index: j,
            limit: a.n(),
        });
    }
    Ok(a.base.column(off.base_index(j)))
}

/// `A(0) P^offset` seen through an index map.
#[derive(Debug, Clone, Copy)]
pub struct RotatedView<'a> {
    matrix: &'a SensingMatrix,
    offset: usize,
}

impl<'a> RotatedView<'a> {
    pub fn matrix(&self) -> &'a SensingMatrix {
        self.matrix
    }

    pub fn offset(&self) -> PermutationOffset {
        PermutationOffset::new(self.offset, self.matrix.n())
    }

    /// Dense copy of the rotated matrix.
    pub fn materialize(&self) -> DenseMatrix {
        let (m, n) = (self.matrix.m(), self.matrix.n());
        let off = self.offset();
        let mut data = Vec::with_capacity(m * n);
        for r in 0..m {
            let row = self.matrix.base.row(r);
            data.extend((0..n).map(|j| row[off.base_index(j)]));
        }
        DenseMatrix::from_vec(m, n, data).expect("rotation of a valid matrix")
    }
}

impl LinearOperator for RotatedView<'_> {
    fn rows(&self) -> usize {
        self.matrix.m()
    }

    fn cols(&self) -> usize {
        self.matrix.n()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.matrix.n();
        assert_eq!(x.len(), n, "rotated matvec: input length");
        let o = self.offset;
        // logical j < n - o reads base column j + o; the rest wrap to j + o - n
        let (x_head, x_tail) = x.split_at(n - o);
        for (r, out_r) in out.iter_mut().enumerate() {
            let row = self.matrix.base.row(r);
            *out_r = dot(&row[o..], x_head) + dot(&row[..o], x_tail);
        }
        flops::add(self.matrix.m() * n);
    }

    fn apply_t_into(&self, y: &[f64], out: &mut [f64]) {
        let n = self.matrix.n();
        assert_eq!(y.len(), self.matrix.m(), "rotated matvec_t: input length");
        assert_eq!(out.len(), n, "rotated matvec_t: output length");
        let o = self.offset;
        out.fill(0.0);
        let (out_head, out_tail) = out.split_at_mut(n - o);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            let row = self.matrix.base.row(r);
            numkernel::axpy(yr, &row[o..], out_head);
            numkernel::axpy(yr, &row[..o], out_tail);
        }
        flops::add(self.matrix.m() * n);
    }

    fn apply_sparse_into(&self, x: &[f64], out: &mut [f64]) {
        let (m, n) = (self.matrix.m(), self.matrix.n());
        assert_eq!(x.len(), n, "rotated matvec: input length");
        let nnz = x.iter().filter(|v| **v != 0.0).count();
        if 4 * nnz >= n {
            return self.apply_into(x, out);
        }
        out.fill(0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                let b = (j + self.offset) % n;
                numkernel::axpy(xj, &self.matrix.columns[b * m..(b + 1) * m], out);
            }
        }
        flops::add(m * nnz);
    }

    fn column_into(&self, j: usize, out: &mut [f64]) {
        let (b, m) = (self.offset().base_index(j), self.matrix.m());
        out.copy_from_slice(&self.matrix.columns[b * m..(b + 1) * m]);
    }
}

/// Largest normalised inner product between two distinct columns.
pub fn mutual_coherence(a: &DenseMatrix) -> Result<f64> {
    let cols: Vec<DenseVector> = (0..a.cols()).map(|j| a.column(j)).collect();
    let norms: Vec<f64> = cols.iter().map(|c| norm2(c)).collect();
    if let Some(j) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::Degenerate(format!("column {j} is zero")));
    }
    let mut best = 0.0f64;
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            let mu = dot(&cols[i], &cols[j]).abs() / (norms[i] * norms[j]);
            best = best.max(mu);
        }
    }
    Ok(best.min(1.0))
}

/// `sqrt(n) * max |<phi_k, psi_j>|` for two orthonormal bases (columns).
pub fn basis_coherence(phi: &DenseMatrix, psi: &DenseMatrix) -> Result<f64> {
    ensure_orthonormal(phi)?;
    ensure_orthonormal(psi)?;
    if phi.rows() != psi.rows() {
        return Err(Error::DimensionMismatch {
            what: "basis dimension",
            expected: phi.rows(),
            got: psi.rows(),
        });
    }
    let cross = phi.transpose().matmul(psi)?;
    Ok((phi.rows() as f64).sqrt() * cross.max_abs())
}

/// Square complex basis stored column-major (column `k` is basis vector `k`).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexBasis {
    n: usize,
    data: Vec<Complex64>,
}

impl ComplexBasis {
    /// Orthonormal DFT basis with vectors `f_k[t] = exp(2 pi i k t / n) / sqrt(n)`.
    pub fn fourier(n: usize) -> Self {
        let scale = 1.0 / (n as f64).sqrt();
        let mut data = Vec::with_capacity(n * n);
        for k in 0..n {
            for t in 0..n {
                let angle = 2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                data.push(Complex64::from_polar(scale, angle));
            }
        }
        Self { n, data }
    }

    pub fn from_real(basis: &DenseMatrix) -> Result<Self> {
        if basis.rows() != basis.cols() {
            return Err(Error::DimensionMismatch {
                what: "square basis",
                expected: basis.rows(),
                got: basis.cols(),
            });
        }
        let n = basis.rows();
        let mut data = Vec::with_capacity(n * n);
        for k in 0..n {
            data.extend(basis.column(k).into_iter().map(|v| Complex64::new(v, 0.0)));
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn vector(&self, k: usize) -> &[Complex64] {
        &self.data[k * self.n..(k + 1) * self.n]
    }

    fn inner(&self, k: usize, other: &ComplexBasis, j: usize) -> Complex64 {
        self.vector(k)
            .iter()
            .zip(other.vector(j))
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn orthonormality_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..=i {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((self.inner(i, self, j) - target).norm());
            }
        }
        worst
    }
}

/// Coherence for complex (unitary) bases such as Fourier vs. canonical.
pub fn basis_coherence_complex(phi: &ComplexBasis, psi: &ComplexBasis) -> Result<f64> {
    if phi.n != psi.n {
        return Err(Error::DimensionMismatch {
            what: "basis dimension",
            expected: phi.n,
            got: psi.n,
        });
    }
    for b in [phi, psi] {
        let deviation = b.orthonormality_deviation();
        if deviation > 1e-8 {
            return Err(Error::NotOrthonormal { deviation });
        }
    }
    let mut best = 0.0f64;
    for k in 0..phi.n {
        for j in 0..psi.n {
            best = best.max(phi.inner(k, psi, j).norm());
        }
    }
    Ok((phi.n as f64).sqrt() * best)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `P` with ones at `(0, n-1)` and `(k, k-1)`.
    fn permutation_matrix(n: usize) -> DenseMatrix {
        let mut rows = vec![vec![0.0; n]; n];
        rows[0][n - 1] = 1.0;
        for (k, row) in rows.iter_mut().enumerate().skip(1) {
            row[k - 1] = 1.0;
        }
        DenseMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn permutation_matrix_shifts_down() {
        let p = permutation_matrix(4);
        assert_eq!(p.apply(&[1.0, 2.0, 3.0, 4.0]), vec![4.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn rotate_wraps_and_matches_explicit_product() {
        let a = gen_gaussian(3, 5, 1).unwrap();
        let off = PermutationOffset::identity(5);
        assert_eq!(off.rotate(5).offset(), 0);
        assert_eq!(off.rotate(7).offset(), 2);

        let once = off.rotate(1);
        let explicit = a.base().matmul(&permutation_matrix(5)).unwrap();
        assert_eq!(column(&a, once, 0).unwrap(), explicit.column(0));
        assert_eq!(column(&a, once, 0).unwrap(), a.base().column(1));
        assert_eq!(column(&a, once, 4).unwrap(), a.base().column(0));
        assert_eq!(column(&a, off, 0).unwrap(), a.base().column(0));
        assert!(column(&a, off, 5).is_err());
    }

    #[test]
    fn view_matches_materialized_powers() {
        let n = 6;
        let a = gen_gaussian(4, n, 2).unwrap();
        let p = permutation_matrix(n);
        let mut explicit = a.base().clone();
        let x: Vec<f64> = (0..n).map(|k| k as f64 - 2.5).collect();
        let y: Vec<f64> = vec![0.5, -1.0, 2.0, 0.25];
        for i in 0..2 * n {
            let view = a.view(PermutationOffset::new(i, n));
            assert_eq!(view.materialize(), explicit, "offset {i}");
            for j in 0..n {
                assert_eq!(view.column(j), explicit.column(j));
            }
            let fx = view.apply(&x);
            let ex = explicit.apply(&x);
            for (u, v) in fx.iter().zip(&ex) {
                assert!((u - v).abs() < 1e-12);
            }
            let ft = view.apply_t(&y);
            let et = explicit.apply_t(&y);
            for (u, v) in ft.iter().zip(&et) {
                assert!((u - v).abs() < 1e-12);
            }
            explicit = explicit.matmul(&p).unwrap();
        }
    }

    #[test]
    fn rejects_non_compressive_shapes() {
        assert!(gen_gaussian(10, 10, 0).is_err());
        assert!(gen_bernoulli(0, 10, 0).is_err());
        assert!(gen_achlioptas(12, 10, 0).is_err());
    }

    #[test]
    fn gaussian_column_norms_concentrate() {
        let m = 50;
        let a = gen_gaussian(m, 1000, 4).unwrap();
        let mean = (0..1000).map(|j| norm2(&a.base().column(j)).powi(2)).sum::<f64>() / 1000.0;
        // ||a_j||^2 ~ chi2_m / m: variance 2/m per column
        let sd = (2.0 / m as f64 / 1000.0).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * sd, "{mean}");
        assert_ne!(gen_gaussian(5, 9, 1).unwrap(), gen_gaussian(5, 9, 2).unwrap());
        assert_eq!(gen_gaussian(5, 9, 1).unwrap(), gen_gaussian(5, 9, 1).unwrap());
    }

    #[test]
    fn bernoulli_properties() {
        let a = gen_bernoulli(40, 200, 9).unwrap();
        for j in 0..200 {
            assert!((norm2(&a.base().column(j)).powi(2) - 1.0).abs() < 1e-12);
        }
        let total = 40.0 * 200.0;
        let pos = a.base().as_slice().iter().filter(|v| **v > 0.0).count() as f64;
        assert!((pos - total / 2.0).abs() < 3.0 * (total / 4.0).sqrt());
        assert!(mutual_coherence(a.base()).unwrap() < 1.0);
    }

    #[test]
    fn achlioptas_properties() {
        let a = gen_achlioptas(100, 1000, 13).unwrap();
        let s = a.base().as_slice();
        assert!(s.iter().all(|v| *v == 0.0 || *v == 1.0 || *v == -1.0));
        let total = s.len() as f64;
        let zeros = s.iter().filter(|v| **v == 0.0).count() as f64;
        let p0 = 2.0 / 3.0;
        assert!((zeros / total - p0).abs() < 3.0 * (p0 * (1.0 - p0) / total).sqrt());
        // entry variance is 1/3
        let mean = s.iter().sum::<f64>() / total;
        assert!(mean.abs() < 3.0 * (1.0 / 3.0 / total).sqrt());
    }

    #[test]
    fn coherence_examples() {
        assert_eq!(mutual_coherence(&DenseMatrix::identity(4).unwrap()).unwrap(), 0.0);
        let dup = DenseMatrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 1.0]]).unwrap();
        assert!((mutual_coherence(&dup).unwrap() - 1.0).abs() < 1e-15);
        let zero_col = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert!(matches!(mutual_coherence(&zero_col), Err(Error::Degenerate(_))));
    }

    #[test]
    fn coherence_matches_brute_force() {
        let a = gen_gaussian(20, 40, 21).unwrap();
        let mut best = 0.0f64;
        for i in 0..40 {
            for j in 0..40 {
                if i == j {
                    continue;
                }
                let (ci, cj) = (a.base().column(i), a.base().column(j));
                let v: f64 = ci.iter().zip(&cj).map(|(p, q)| p * q).sum::<f64>().abs()
                    / (ci.iter().map(|p| p * p).sum::<f64>().sqrt()
                        * cj.iter().map(|q| q * q).sum::<f64>().sqrt());
                best = best.max(v);
            }
        }
        assert!((mutual_coherence(a.base()).unwrap() - best).abs() < 1e-14);
    }

    #[test]
    fn coherence_invariant_under_rotation() {
        let a = gen_bernoulli(10, 24, 5).unwrap();
        let base = mutual_coherence(a.base()).unwrap();
        for i in 0..24 {
            let rotated = a.view(PermutationOffset::new(i, 24)).materialize();
            assert_eq!(mutual_coherence(&rotated).unwrap(), base);
        }
    }

    #[test]
    fn basis_coherence_examples() {
        let n = 16;
        let id = DenseMatrix::identity(n).unwrap();
        assert!((basis_coherence(&id, &id).unwrap() - (n as f64).sqrt()).abs() < 1e-12);

        let fourier = ComplexBasis::fourier(n);
        let canon = ComplexBasis::from_real(&id).unwrap();
        assert!((basis_coherence_complex(&fourier, &canon).unwrap() - 1.0).abs() < 1e-12);

        let skew = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let id2 = DenseMatrix::identity(2).unwrap();
        assert!(matches!(
            basis_coherence(&skew, &id2),
            Err(Error::NotOrthonormal { .. })
        ));
    }
}
