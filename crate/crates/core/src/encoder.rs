//! Recursive measurement of a sliding window.
//!
//! The first window is encoded with one full product. Every later window
//! reuses the previous measurement: when the window slides by `tau`, the
//! rotated matrix `A(i+1) = A(i) P^tau` lines the surviving entries up with
//! the same columns, so only the `tau` exchanged entries contribute,
//!
//! ```text
//! y(i+1) = y(i) + sum_t (entering[t] - leaving[t]) * a_t(i) + w(i+1) - w(i)
//! ```
//!
//! which costs `O(m tau)` instead of `O(m n)`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numkernel::{axpy, ensure_orthonormal, flops, DenseMatrix, DenseVector, LinearOperator};
use crate::sensing::{PermutationOffset, SensingMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { sigma: 0.0, seed: 0 }
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        Self { sigma, seed }
    }

    pub fn source(&self) -> Result<NoiseSource> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(format!(
                "noise level must be finite and nonnegative, got {}",
                self.sigma
            )));
        }
        Ok(NoiseSource {
            sigma: self.sigma,
            rng: ChaCha8Rng::seed_from_u64(self.seed),
        })
    }
}

/// Stream of i.i.d. `N(0, sigma^2 I)` measurement-noise vectors.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    sigma: f64,
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn draw(&mut self, m: usize) -> DenseVector {
        if self.sigma == 0.0 {
            return vec![0.0; m];
        }
        (0..m)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                self.sigma * z
            })
            .collect()
    }
}

/// Measurement state of the current window.
#[derive(Debug, Clone)]
pub struct EncoderState<'a> {
    matrix: &'a SensingMatrix,
    y: DenseVector,
    window_index: usize,
    offset: PermutationOffset,
    tau: usize,
    noise: NoiseSource,
    last_noise: DenseVector,
}

/// `y(0) = A(0) x(0) + w(0)`.
pub fn encode_first<'a>(
    matrix: &'a SensingMatrix,
    x0: &[f64],
    noise: NoiseModel,
    tau: usize,
) -> Result<EncoderState<'a>> {
    if tau == 0 || tau > matrix.n() {
        return Err(Error::config(format!(
            "step size must satisfy 1 <= tau <= n = {}, got {tau}",
            matrix.n()
        )));
    }
    let offset = PermutationOffset::identity(matrix.n());
    let mut source = noise.source()?;
    let w = source.draw(matrix.m());
    let y = encode_with_noise(matrix, offset, x0, &w)?;
    Ok(EncoderState {
        matrix,
        y,
        window_index: 0,
        offset,
        tau,
        noise: source,
        last_noise: w,
    })
}

impl<'a> EncoderState<'a> {
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn window_index(&self) -> usize {
        self.window_index
    }

    pub fn offset(&self) -> PermutationOffset {
        self.offset
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn matrix(&self) -> &'a SensingMatrix {
        self.matrix
    }

    /// Noise vector carried by the current measurement.
    pub fn current_noise(&self) -> &[f64] {
        &self.last_noise
    }

    /// Slides the window by `tau`: `leaving` are the entries that drop out at
    /// the front, `entering` the new entries appended at the back.
    pub fn step(&mut self, leaving: &[f64], entering: &[f64]) -> Result<()> {
        for (what, got) in [("leaving entries", leaving.len()), ("entering entries", entering.len())] {
            if got != self.tau {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: self.tau,
                    got,
                });
            }
        }
        let view = self.matrix.view(self.offset);
        let mut col = vec![0.0; self.matrix.m()];
        for (t, (&out, &inn)) in leaving.iter().zip(entering).enumerate() {
            let innovation = inn - out;
            if innovation == 0.0 {
                continue;
            }
            view.column_into(t, &mut col);
            axpy(innovation, &col, &mut self.y);
        }
        flops::add(self.matrix.m() * self.tau);

        self.offset = self.offset.rotate(self.tau);
        self.window_index += 1;

        if self.noise.sigma() > 0.0 {
            let fresh = self.noise.draw(self.matrix.m());
            for ((y, f), old) in self.y.iter_mut().zip(&fresh).zip(&self.last_noise) {
                *y += f - old;
            }
            self.last_noise = fresh;
        }
        Ok(())
    }
}

pub fn encode_step<'a>(
    mut state: EncoderState<'a>,
    leaving: &[f64],
    entering: &[f64],
) -> Result<EncoderState<'a>> {
    state.step(leaving, entering)?;
    Ok(state)
}

fn encode_with_noise(
    matrix: &SensingMatrix,
    offset: PermutationOffset,
    x: &[f64],
    w: &[f64],
) -> Result<DenseVector> {
    if x.len() != matrix.n() {
        return Err(Error::DimensionMismatch {
            what: "window length",
            expected: matrix.n(),
            got: x.len(),
        });
    }
    let mut y = matrix.view(offset).apply(x);
    for (yi, wi) in y.iter_mut().zip(w) {
        *yi += wi;
    }
    Ok(y)
}

/// Full `O(mn)` product `A(0) P^offset x + w`, the non-recursive baseline.
pub fn encode_direct(
    matrix: &SensingMatrix,
    offset: PermutationOffset,
    x: &[f64],
    noise: &mut NoiseSource,
) -> Result<DenseVector> {
    let w = noise.draw(matrix.m());
    encode_with_noise(matrix, offset, x, &w)
}

/// Coefficient recursion for a window represented in an orthonormal basis
/// `x = Psi alpha`: `alpha(i+1) = Gamma Pi Psi alpha(i) + gamma_{n-1} (x_new - x_old)`
/// with `Gamma = Psi^T` and `Pi` the upward shift.
#[derive(Debug, Clone)]
pub struct OrthoRecursion {
    psi: DenseMatrix,
    gamma: DenseMatrix,
}

impl OrthoRecursion {
    pub fn new(psi: DenseMatrix) -> Result<Self> {
        ensure_orthonormal(&psi)?;
        let gamma = psi.transpose();
        Ok(Self { psi, gamma })
    }

    pub fn analyze(&self, x: &[f64]) -> DenseVector {
        self.gamma.apply(x)
    }

    pub fn step(&self, alpha_prev: &[f64], x_new: f64, x_old: f64) -> Result<DenseVector> {
        let n = self.psi.rows();
        if alpha_prev.len() != n {
            return Err(Error::DimensionMismatch {
                what: "coefficient vector",
                expected: n,
                got: alpha_prev.len(),
            });
        }
        let x = self.psi.apply(alpha_prev);
        let mut shifted = Vec::with_capacity(n);
        shifted.extend_from_slice(&x[1..]);
        shifted.push(x[0]);
        let mut alpha = self.gamma.apply(&shifted);
        let d = x_new - x_old;
        for (k, a) in alpha.iter_mut().enumerate() {
            *a += d * self.gamma.get(k, n - 1);
        }
        flops::add(n);
        Ok(alpha)
    }
}

pub fn ortho_coeff_step(
    alpha_prev: &[f64],
    psi: &DenseMatrix,
    x_new: f64,
    x_old: f64,
) -> Result<DenseVector> {
    OrthoRecursion::new(psi.clone())?.step(alpha_prev, x_new, x_old)
}

/// Sliding DFT: with `alpha = F x`, `F[k][t] = exp(-2 pi i k t / n) / sqrt(n)`,
/// a unit left shift multiplies coefficient `k` by `exp(2 pi i k / n)`.
#[derive(Debug, Clone)]
pub struct FourierRecursion {
    twiddle: Vec<Complex64>,
    scale: f64,
}

impl FourierRecursion {
    pub fn new(n: usize) -> Self {
        let twiddle = (0..n)
            .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64))
            .collect();
        Self {
            twiddle,
            scale: 1.0 / (n as f64).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.twiddle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.twiddle.is_empty()
    }

    /// Direct `O(n^2)` transform for the first window.
    pub fn analyze(&self, x: &[f64]) -> Vec<Complex64> {
        let n = self.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| v * self.twiddle[(k * t) % n].conj())
                    .sum::<Complex64>()
                    * self.scale
            })
            .collect()
    }

    pub fn step(&self, alpha_prev: &[Complex64], x_new: f64, x_old: f64) -> Result<Vec<Complex64>> {
        if alpha_prev.len() != self.len() {
            return Err(Error::DimensionMismatch {
                what: "spectrum length",
                expected: self.len(),
                got: alpha_prev.len(),
            });
        }
        let d = (x_new - x_old) * self.scale;
        flops::add(self.len());
        Ok(alpha_prev
            .iter()
            .zip(&self.twiddle)
            .map(|(a, w)| w * (a + d))
            .collect())
    }
}

pub fn fourier_coeff_step(alpha_prev: &[Complex64], x_new: f64, x_old: f64) -> Vec<Complex64> {
    FourierRecursion::new(alpha_prev.len())
        .step(alpha_prev, x_new, x_old)
        .expect("length taken from input")
}
