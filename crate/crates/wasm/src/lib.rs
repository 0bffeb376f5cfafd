//! WebAssembly bindings for the browser demo in `www/`.

use rcs_core::decoder::RcsConfig;
use rcs_core::harness::{derive_seed, expected_sparsity, run_stream, support_sweep, StreamRun, SupportConfig};
use rcs_core::signal::mismatch_expectation;
use rcs_core::solvers::FistaOptions;
use rcs_core::{gen_stream, Ensemble, SensingMatrix, StreamConfig};
use wasm_bindgen::prelude::*;

/// Outcome of a streaming reconstruction.
#[wasm_bindgen]
pub struct Reconstruction {
    truth: Vec<f64>,
    estimate: Vec<f64>,
    nev: f64,
    tpr: f64,
    fpr: f64,
    mean_iterations: f64,
    m: usize,
}

#[wasm_bindgen]
impl Reconstruction {
    #[wasm_bindgen(getter)]
    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn estimate(&self) -> Vec<f64> {
        self.estimate.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn nev(&self) -> f64 {
        self.nev
    }
    #[wasm_bindgen(getter)]
    pub fn tpr(&self) -> f64 {
        self.tpr
    }
    #[wasm_bindgen(getter)]
    pub fn fpr(&self) -> f64 {
        self.fpr
    }
    #[wasm_bindgen(getter, js_name = meanIterations)]
    pub fn mean_iterations(&self) -> f64 {
        self.mean_iterations
    }
    #[wasm_bindgen(getter)]
    pub fn m(&self) -> usize {
        self.m
    }
}

fn js(e: rcs_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Generates a stream, encodes it recursively with `m = 5 ceil(n p)`
/// measurements per window and decodes it.
pub fn reconstruct_stream(
    n: usize,
    tau: usize,
    length: usize,
    p: f64,
    sigma: f64,
    seed: u64,
) -> rcs_core::Result<Reconstruction> {
    let truth = gen_stream(&StreamConfig::new(p, 1.0, 2.0, seed, length))?.values;
    let m = (5 * expected_sparsity(n, p)).clamp(1, n.saturating_sub(1).max(1));
    let matrix = SensingMatrix::generate(Ensemble::Gaussian, m, n, derive_seed(seed, 1, 0))?;
    let rcs = RcsConfig::new(n, tau, sigma);
    rcs.validate()?;
    let res = run_stream(
        &truth,
        &matrix,
        &StreamRun {
            rcs,
            sigma,
            noise_seed: derive_seed(seed, 2, 0),
            audit: false,
            trace: false,
        },
    )?;
    let estimate = res.estimate();
    Ok(Reconstruction {
        truth: truth[..estimate.len()].to_vec(),
        estimate,
        nev: res.summary.stream_nev,
        tpr: res.summary.tpr,
        fpr: res.summary.fpr,
        mean_iterations: res.summary.mean_iterations,
        m,
    })
}

/// Expected squared mismatch of a top-`kappa` truncation for each `p`,
/// with `kappa = multiple ceil(n p)` capped at `n`.
pub fn mismatch_values(n: usize, ps: &[f64], multiple: usize, amp: f64) -> Vec<f64> {
    ps.iter()
        .map(|&p| mismatch_expectation(n, (multiple * expected_sparsity(n, p)).min(n), p, amp))
        .collect()
}

/// Single-window support detection rates for each `m`, as `[tpr, fpr]` pairs.
pub fn support_rates(
    n: usize,
    kappa: usize,
    sigma: f64,
    ms: &[u32],
    xi1: f64,
    trials: usize,
    seed: u64,
) -> rcs_core::Result<Vec<f64>> {
    let rows = support_sweep(&SupportConfig {
        n,
        kappa,
        sigma,
        amp_low: 1.0,
        amp_high: 2.0,
        ms: ms.iter().map(|&m| m as usize).collect(),
        xi1s: vec![xi1],
        trials,
        seed,
        ensemble: Ensemble::Gaussian,
        lambda: None,
        solver: FistaOptions::default(),
    })?;
    Ok(rows.iter().flat_map(|r| [r.tpr, r.fpr]).collect())
}

#[wasm_bindgen]
pub fn reconstruct(n: usize, tau: usize, length: usize, p: f64, sigma: f64, seed: u32) -> Result<Reconstruction, JsError> {
    reconstruct_stream(n, tau, length, p, sigma, seed as u64).map_err(js)
}

#[wasm_bindgen(js_name = mismatchCurve)]
pub fn mismatch_curve(n: usize, ps: &[f64], multiple: usize, amp: f64) -> Vec<f64> {
    mismatch_values(n, ps, multiple, amp)
}

#[wasm_bindgen(js_name = supportSweep)]
pub fn support_sweep_js(
    n: usize,
    kappa: usize,
    sigma: f64,
    ms: &[u32],
    xi1: f64,
    trials: usize,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    support_rates(n, kappa, sigma, ms, xi1, trials, seed as u64).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_stream_is_recovered() {
        let r = reconstruct_stream(64, 8, 512, 0.05, 0.0, 3).unwrap();
        assert_eq!(r.truth.len(), r.estimate.len());
        assert!(r.nev < 1e-2, "{}", r.nev);
        assert_eq!(r.tpr, 1.0);
        assert_eq!(r.m, 20);
    }

    #[test]
    fn bad_window_is_an_error() {
        assert!(reconstruct_stream(32, 40, 200, 0.1, 0.1, 1).is_err());
    }

    #[test]
    fn mismatch_vanishes_at_full_sparsity() {
        let v = mismatch_values(20, &[0.0, 0.1, 1.0], 2, 1.0);
        assert_eq!(v[0], 0.0);
        assert!(v[1] > 0.0);
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn support_rates_come_in_pairs() {
        let v = support_rates(100, 3, 0.05, &[30, 60], 0.1, 2, 5).unwrap();
        assert_eq!(v.len(), 4);
        assert!(v.iter().all(|r| (0.0..=1.0).contains(r)));
    }
}
