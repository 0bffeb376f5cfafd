//! Synthetic sparse streams and the model-mismatch expectation.
//!
//! Each stream entry is zero with probability `1 - p`; otherwise its
//! magnitude is uniform on `[amp_low, amp_high]` and its sign is a fair coin.
//! With `amp_low = 0` this is the uniform-on-`[-A, A]` source.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numkernel::DenseVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamConfig {
    pub p: f64,
    pub amp_low: f64,
    pub amp_high: f64,
    pub seed: u64,
    pub length: usize,
}

impl StreamConfig {
    pub fn new(p: f64, amp_low: f64, amp_high: f64, seed: u64, length: usize) -> Self {
        Self {
            p,
            amp_low,
            amp_high,
            seed,
            length,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::config(format!(
                "nonzero probability must lie in (0, 1], got {}",
                self.p
            )));
        }
        if !(self.amp_low >= 0.0 && self.amp_low <= self.amp_high && self.amp_high.is_finite()) {
            return Err(Error::config(format!(
                "amplitude band [{}, {}] is invalid",
                self.amp_low, self.amp_high
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseStream {
    pub values: Vec<f64>,
    pub config: StreamConfig,
}

impl SparseStream {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn window(&self, i: usize, n: usize, tau: usize) -> Result<DenseVector> {
        window(&self.values, i, n, tau)
    }

    /// Number of full windows of length `n` with step `tau`.
    pub fn window_count(&self, n: usize, tau: usize) -> usize {
        window_count(self.values.len(), n, tau)
    }
}

pub(crate) fn draw_entry<R: Rng>(rng: &mut R, p: f64, low: f64, high: f64) -> f64 {
    if rng.random::<f64>() >= p {
        return 0.0;
    }
    let magnitude = if high > low {
        rng.random_range(low..=high)
    } else {
        low
    };
    if rng.random::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

pub fn gen_stream(cfg: &StreamConfig) -> Result<SparseStream> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let values = (0..cfg.length)
        .map(|_| draw_entry(&mut rng, cfg.p, cfg.amp_low, cfg.amp_high))
        .collect();
    Ok(SparseStream {
        values,
        config: *cfg,
    })
}

/// `[x_{i tau}, ..., x_{i tau + n - 1}]`
pub fn window(values: &[f64], i: usize, n: usize, tau: usize) -> Result<DenseVector> {
    let start = i * tau;
    let end = start + n;
    if end > values.len() {
        return Err(Error::OutOfRange {
            index: end.saturating_sub(1),
            limit: values.len(),
        });
    }
    Ok(values[start..end].to_vec())
}

pub fn window_count(len: usize, n: usize, tau: usize) -> usize {
    if len < n || tau == 0 {
        0
    } else {
        (len - n) / tau + 1
    }
}

/// Length-`n` vector with exactly `kappa` nonzeros at uniformly random
/// positions, magnitudes uniform on `[amp_low, amp_high]` with random signs.
pub fn gen_k_sparse(n: usize, kappa: usize, amp_low: f64, amp_high: f64, seed: u64) -> Result<DenseVector> {
    if kappa > n {
        return Err(Error::config(format!("cannot place {kappa} nonzeros in {n} entries")));
    }
    StreamConfig::new(1.0, amp_low, amp_high, seed, n).validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; n];
    for j in rand::seq::index::sample(&mut rng, n, kappa) {
        x[j] = draw_entry(&mut rng, 1.0, amp_low, amp_high);
    }
    Ok(x)
}

/// Natural-log factorials `ln k!` for `k = 0..=n`.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// `sum_{i=kappa+1}^{k} (1 - i/(k+1))`, the expected tail mass of `k`
/// sorted uniform magnitudes beyond the largest `kappa`.
fn tail_order_stat_sum(k: usize, kappa: usize) -> f64 {
    if k <= kappa {
        return 0.0;
    }
    let (k, kappa) = (k as f64, kappa as f64);
    let index_sum = (k * (k + 1.0) - kappa * (kappa + 1.0)) / 2.0;
    (k - kappa) - index_sum / (k + 1.0)
}

/// Closed-form `E ||X - X_kappa||_1` for `n` i.i.d. entries that are zero
/// with probability `1 - p` and uniform on `[-amp, amp]` otherwise.
pub fn mismatch_expectation(n: usize, kappa: usize, p: f64, amp: f64) -> f64 {
    if kappa >= n || p <= 0.0 {
        return 0.0;
    }
    let ln_fact = ln_factorials(n);
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let mut total = 0.0;
    for k in kappa + 1..=n {
        let zeros = n - k;
        let ln_pmf = ln_fact[n] - ln_fact[k] - ln_fact[zeros]
            + k as f64 * ln_p
            + if zeros == 0 { 0.0 } else { zeros as f64 * ln_q };
        let weight = ln_pmf.exp();
        if weight == 0.0 {
            continue;
        }
        total += weight * tail_order_stat_sum(k, kappa);
    }
    amp * total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub trials: usize,
}

/// Empirical mean of `||X - X_kappa||_1` over `trials` independent draws.
pub fn mismatch_mc(n: usize, kappa: usize, p: f64, amp: f64, trials: usize, seed: u64) -> f64 {
    mismatch_mc_stats(n, kappa, p, amp, trials, seed).mean
}

pub fn mismatch_mc_stats(
    n: usize,
    kappa: usize,
    p: f64,
    amp: f64,
    trials: usize,
    seed: u64,
) -> MonteCarloEstimate {
    let trials = trials.max(1);
    if kappa >= n {
        return MonteCarloEstimate {
            mean: 0.0,
            std_err: 0.0,
            trials,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mags = Vec::with_capacity(n);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..trials {
        mags.clear();
        for _ in 0..n {
            let v = draw_entry(&mut rng, p, 0.0, amp);
            if v != 0.0 {
                mags.push(v.abs());
            }
        }
        let tail = if mags.len() > kappa {
            mags.sort_unstable_by(|a, b| b.total_cmp(a));
            mags[kappa..].iter().sum()
        } else {
            0.0
        };
        sum += tail;
        sum_sq += tail * tail;
    }
    let t = trials as f64;
    let mean = sum / t;
    let var = if trials > 1 {
        ((sum_sq - t * mean * mean) / (t - 1.0)).max(0.0)
    } else {
        0.0
    };
    MonteCarloEstimate {
        mean,
        std_err: (var / t).sqrt(),
        trials,
    }
}
