//! Experiment drivers: streaming runs, the runtime comparison, support and
//! debiasing sweeps, and mismatch tables.
//!
//! Trials are independent and may run on a worker pool; each trial derives
//! its own seeds from the base seed, so results do not depend on scheduling.

use crate::decoder::{
    default_lambda, detect_support_threshold, Emission, RcsConfig, RcsDecoder, StepOutput,
};
use crate::encoder::{encode_direct, encode_first, NoiseModel};
use crate::error::{Error, Result};
use crate::metrics::{
    normalized_error, stream_nev, tpr_fpr, ErrorSummary, JensenAudit, JensenReport, PhaseTimes,
};
use crate::numkernel::{flops, DenseVector};
use crate::sensing::{Ensemble, SensingMatrix};
use crate::signal::{gen_k_sparse, gen_stream, mismatch_expectation, mismatch_mc_stats, window_count, StreamConfig};
use crate::solvers::{fista, lse_on_support, FistaOptions, LassoProblem};

/// SplitMix64 mix of a base seed with two labels.
pub fn derive_seed(base: u64, stream: u64, k: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(k.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Pool size: `RCS_THREADS` if set to a positive integer, else all cores.
pub fn worker_threads() -> usize {
    std::env::var("RCS_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&k| k > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |k| k.get()))
}

/// Maps `f` over `items`, in parallel when the `parallel` feature is on.
/// Output order follows input order.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let threads = worker_threads();
        if threads > 1 && items.len() > 1 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                return pool.install(|| items.par_iter().map(&f).collect());
            }
        }
    }
    items.iter().map(f).collect()
}

mod clock {
    use std::time::Duration;

    #[cfg(not(target_arch = "wasm32"))]
    pub struct Stopwatch(std::time::Instant);
    #[cfg(target_arch = "wasm32")]
    pub struct Stopwatch;

    impl Stopwatch {
        #[cfg(not(target_arch = "wasm32"))]
        pub fn start() -> Self {
            Stopwatch(std::time::Instant::now())
        }
        #[cfg(target_arch = "wasm32")]
        pub fn start() -> Self {
            Stopwatch
        }
        #[cfg(not(target_arch = "wasm32"))]
        pub fn elapsed(&self) -> Duration {
            self.0.elapsed()
        }
        /// No monotonic clock on bare wasm; timings read as zero.
        #[cfg(target_arch = "wasm32")]
        pub fn elapsed(&self) -> Duration {
            Duration::ZERO
        }
    }
}
use clock::Stopwatch;

/// Rounds `n p` up, ignoring floating-point dust.
pub fn expected_sparsity(n: usize, p: f64) -> usize {
    ((n as f64 * p) - 1e-9).ceil().max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamRun {
    pub rcs: RcsConfig,
    pub sigma: f64,
    pub noise_seed: u64,
    /// Record every averaged contribution and check the Jensen bound.
    pub audit: bool,
    /// Keep every measurement vector.
    pub trace: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStat {
    pub window: usize,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    pub detected: usize,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamResult {
    pub emissions: Vec<Emission>,
    pub windows: Vec<WindowStat>,
    pub summary: ErrorSummary,
    pub jensen: Option<JensenReport>,
    pub trace: Vec<(usize, DenseVector)>,
}

impl StreamResult {
    /// Emitted averages in index order.
    pub fn estimate(&self) -> Vec<f64> {
        self.emissions.iter().map(|e| e.x_bar).collect()
    }
}

/// Encodes `values` window by window with recursive updates and noise, and
/// decodes them. Entries past the last full window are ignored.
pub fn run_stream(values: &[f64], matrix: &SensingMatrix, run: &StreamRun) -> Result<StreamResult> {
    let (n, tau) = (run.rcs.n, run.rcs.tau);
    if matrix.n() != n {
        return Err(Error::DimensionMismatch {
            what: "matrix width",
            expected: n,
            got: matrix.n(),
        });
    }
    let windows = window_count(values.len(), n, tau);
    if windows == 0 {
        return Err(Error::config(format!(
            "stream of length {} is shorter than one window of {n}",
            values.len()
        )));
    }
    let mut rcs = run.rcs.clone();
    rcs.total_windows = Some(windows);
    if rcs.solver.lipschitz.is_none() {
        rcs.solver.lipschitz = Some(matrix.lipschitz());
    }
    let mode = rcs.mode;
    let mut decoder = RcsDecoder::new(rcs)?;

    let mut times = PhaseTimes::default();
    let clock = Stopwatch::start();
    let mut encoder = encode_first(matrix, &values[..n], NoiseModel::gaussian(run.sigma, run.noise_seed), tau)?;
    times.encode += clock.elapsed();

    let mut emissions = Vec::with_capacity(values.len());
    let mut stats = Vec::with_capacity(windows);
    let mut audit = run.audit.then(JensenAudit::new);
    let mut trace = Vec::new();
    let mut iter_sum = 0usize;

    for i in 0..windows {
        if i > 0 {
            let s = (i - 1) * tau;
            let clock = Stopwatch::start();
            encoder
                .step(&values[s..s + tau], &values[s + n..s + n + tau])
                .map_err(|e| e.at_window(i))?;
            times.encode += clock.elapsed();
        }
        if run.trace {
            trace.push((i, encoder.y().to_vec()));
        }
        let clock = Stopwatch::start();
        let out: StepOutput = decoder.step(&matrix.view(encoder.offset()), encoder.y())?;
        times.decode += clock.elapsed();

        let report = &out.estimate.report;
        iter_sum += report.iterations;
        stats.push(WindowStat {
            window: i,
            iterations: report.iterations,
            kkt_residual: report.kkt_residual,
            converged: report.converged,
            detected: out.estimate.detected.len(),
            support: out.estimate.accepted.len(),
        });
        if let Some(a) = audit.as_mut() {
            a.record(out.contributions(mode));
        }
        emissions.extend_from_slice(&out.emitted);
    }
    emissions.extend(decoder.finish());

    let covered = emissions.len();
    let truth = &values[..covered];
    let estimate: Vec<f64> = emissions.iter().map(|e| e.x_bar).collect();

    let mut summary = ErrorSummary {
        mean_iterations: iter_sum as f64 / windows as f64,
        wall_times: times,
        stream_nev: stream_nev(&estimate, truth).unwrap_or(f64::NAN),
        ..ErrorSummary::default()
    };
    for i in 0..windows {
        let r = i * tau..i * tau + n;
        match normalized_error(&estimate[r.clone()], &truth[r]) {
            Ok(v) => summary.ne_per_window.push(v),
            Err(_) => summary.ne_skipped += 1,
        }
    }
    let detected: Vec<usize> = (0..covered).filter(|&g| estimate[g] != 0.0).collect();
    let true_support: Vec<usize> = (0..covered).filter(|&g| truth[g] != 0.0).collect();
    (summary.tpr, summary.fpr) = tpr_fpr(&detected, &true_support, covered).unwrap_or((f64::NAN, f64::NAN));

    let jensen = audit.map(|a| a.check(&emissions, truth));
    Ok(StreamResult {
        emissions,
        windows: stats,
        summary,
        jensen,
        trace,
    })
}

/// Matrix size rule for experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MRule {
    Fixed(usize),
    /// `m = c n p`, rounded up.
    TimesExpected(f64),
}

impl MRule {
    pub fn resolve(self, n: usize, p: f64) -> usize {
        match self {
            MRule::Fixed(m) => m,
            MRule::TimesExpected(c) => ((c * n as f64 * p) - 1e-9).ceil().max(1.0) as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub n: usize,
    pub tau: usize,
    pub p: f64,
    pub m: usize,
    pub sigma: f64,
    pub amp_low: f64,
    pub amp_high: f64,
    pub ensemble: Ensemble,
    pub windows: usize,
    pub seed: u64,
    pub lambda: Option<f64>,
    pub solver: FistaOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub n: usize,
    pub m: usize,
    pub tau: usize,
    pub windows: usize,
    /// Mean seconds per window, recursive encoding and warm start.
    pub recursive_secs: f64,
    /// Mean seconds per window, direct encoding and cold start.
    pub direct_secs: f64,
    pub warm_iterations: Vec<usize>,
    pub cold_iterations: Vec<usize>,
    /// Mean multiply-adds per window spent on encoding in each arm.
    pub encode_flops_recursive: f64,
    pub encode_flops_direct: f64,
    /// Largest entrywise gap between the two arms' estimates.
    pub max_gap: f64,
}

impl BenchResult {
    pub fn speedup(&self) -> f64 {
        self.direct_secs / self.recursive_secs
    }
}

pub fn mean_sd(v: &[usize]) -> (f64, f64) {
    let k = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<usize>() as f64 / k;
    let var = if v.len() > 1 {
        v.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Times both arms on the same stream, matrix and noise draws.
pub fn bench(cfg: &BenchConfig) -> Result<BenchResult> {
    let (n, tau, windows) = (cfg.n, cfg.tau, cfg.windows);
    if windows == 0 {
        return Err(Error::config("benchmark needs at least one window"));
    }
    let len = n + (windows - 1) * tau;
    let stream = gen_stream(&StreamConfig::new(cfg.p, cfg.amp_low, cfg.amp_high, derive_seed(cfg.seed, 1, 0), len))?;
    let values = &stream.values;
    let matrix = SensingMatrix::generate(cfg.ensemble, cfg.m, n, derive_seed(cfg.seed, 2, 0))?;
    let lambda = cfg.lambda.unwrap_or_else(|| default_lambda(cfg.sigma, n));
    let opts = FistaOptions {
        lipschitz: Some(cfg.solver.lipschitz.unwrap_or_else(|| matrix.lipschitz())),
        ..cfg.solver
    };
    let noise = NoiseModel::gaussian(cfg.sigma, derive_seed(cfg.seed, 3, 0));

    // recursive encoding, warm start
    let mut warm_est = Vec::with_capacity(windows);
    let mut warm_iterations = Vec::with_capacity(windows);
    let mut enc_flops_rec = 0u64;
    let clock = Stopwatch::start();
    flops::reset();
    let mut enc = encode_first(&matrix, &values[..n], noise, tau)?;
    enc_flops_rec += flops::count();
    let mut prev: Option<DenseVector> = None;
    for i in 0..windows {
        if i > 0 {
            let s = (i - 1) * tau;
            flops::reset();
            enc.step(&values[s..s + tau], &values[s + n..s + n + tau])?;
            enc_flops_rec += flops::count();
        }
        let x0 = match &prev {
            Some(p) => crate::decoder::warm_start(p, tau, crate::decoder::TailPolicy::Zeros),
            None => vec![0.0; n],
        };
        let view = matrix.view(enc.offset());
        let rep = fista(&LassoProblem::new(&view, enc.y(), lambda)?, &x0, &opts)?;
        warm_iterations.push(rep.iterations);
        prev = Some(rep.x_hat.clone());
        warm_est.push(rep.x_hat);
    }
    let recursive_secs = clock.elapsed().as_secs_f64() / windows as f64;

    // direct encoding, cold start
    let mut source = noise.source()?;
    let mut cold_iterations = Vec::with_capacity(windows);
    let mut enc_flops_dir = 0u64;
    let mut max_gap = 0.0f64;
    let zero = vec![0.0; n];
    let clock = Stopwatch::start();
    for (i, warm) in warm_est.iter().enumerate() {
        let view = matrix.view(crate::sensing::PermutationOffset::new(i * tau, n));
        flops::reset();
        let y = encode_direct(&matrix, view.offset(), &values[i * tau..i * tau + n], &mut source)?;
        enc_flops_dir += flops::count();
        let rep = fista(&LassoProblem::new(&view, &y, lambda)?, &zero, &opts)?;
        cold_iterations.push(rep.iterations);
        for (a, b) in rep.x_hat.iter().zip(warm) {
            max_gap = max_gap.max((a - b).abs());
        }
    }
    let direct_secs = clock.elapsed().as_secs_f64() / windows as f64;

    Ok(BenchResult {
        n,
        m: cfg.m,
        tau,
        windows,
        recursive_secs,
        direct_secs,
        warm_iterations,
        cold_iterations,
        encode_flops_recursive: enc_flops_rec as f64 / windows as f64,
        encode_flops_direct: enc_flops_dir as f64 / windows as f64,
        max_gap,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportConfig {
    pub n: usize,
    pub kappa: usize,
    pub sigma: f64,
    pub amp_low: f64,
    pub amp_high: f64,
    pub ms: Vec<usize>,
    pub xi1s: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub ensemble: Ensemble,
    pub lambda: Option<f64>,
    pub solver: FistaOptions,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportRow {
    pub m: usize,
    pub xi1: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub trials: usize,
}

/// Single-window LASSO support detection rates, averaged over trials, for
/// every `(m, xi1)` pair. Rows come ordered by `m`, then by `xi1` as given.
pub fn support_sweep(cfg: &SupportConfig) -> Result<Vec<SupportRow>> {
    if cfg.trials == 0 {
        return Err(Error::config("support sweep needs at least one trial"));
    }
    let lambda = cfg.lambda.unwrap_or_else(|| default_lambda(cfg.sigma, cfg.n));
    let jobs: Vec<(usize, usize)> = cfg
        .ms
        .iter()
        .enumerate()
        .flat_map(|(mi, _)| (0..cfg.trials).map(move |t| (mi, t)))
        .collect();
    let results = par_map(&jobs, |&(mi, t)| -> Result<Vec<(f64, f64)>> {
        let m = cfg.ms[mi];
        let s = derive_seed(cfg.seed, m as u64, t as u64);
        let matrix = SensingMatrix::generate(cfg.ensemble, m, cfg.n, derive_seed(s, 1, 0))?;
        let x = gen_k_sparse(cfg.n, cfg.kappa, cfg.amp_low, cfg.amp_high, derive_seed(s, 2, 0))?;
        let view = matrix.view(crate::sensing::PermutationOffset::identity(cfg.n));
        let mut noise = NoiseModel::gaussian(cfg.sigma, derive_seed(s, 3, 0)).source()?;
        let y = encode_direct(&matrix, view.offset(), &x, &mut noise)?;
        let opts = FistaOptions {
            lipschitz: Some(matrix.lipschitz()),
            ..cfg.solver
        };
        let x_hat = fista(&LassoProblem::new(&view, &y, lambda)?, &vec![0.0; cfg.n], &opts)?.x_hat;
        let truth: Vec<usize> = (0..cfg.n).filter(|&j| x[j] != 0.0).collect();
        cfg.xi1s
            .iter()
            .map(|&xi1| tpr_fpr(&detect_support_threshold(&x_hat, xi1), &truth, cfg.n))
            .collect()
    });

    let mut rows = Vec::new();
    for (mi, &m) in cfg.ms.iter().enumerate() {
        for (ti, &xi1) in cfg.xi1s.iter().enumerate() {
            let (mut tpr, mut fpr) = (0.0, 0.0);
            for (job, res) in jobs.iter().zip(&results) {
                if job.0 != mi {
                    continue;
                }
                let rates = res.as_ref().map_err(|e| Error::config(format!("m = {m}: {e}")))?;
                tpr += rates[ti].0;
                fpr += rates[ti].1;
            }
            let k = cfg.trials as f64;
            rows.push(SupportRow {
                m,
                xi1,
                tpr: tpr / k,
                fpr: fpr / k,
                trials: cfg.trials,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DebiasConfig {
    pub n: usize,
    pub kappa: usize,
    pub m: usize,
    pub sigma: f64,
    pub amp_low: f64,
    pub amp_high: f64,
    /// Numbers of repeated measurements to evaluate.
    pub ks: Vec<usize>,
    pub seeds: usize,
    pub seed: u64,
    pub ensemble: Ensemble,
    pub lambda: Option<f64>,
    pub xi1: f64,
    pub solver: FistaOptions,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DebiasRow {
    pub k: usize,
    /// Mean squared error per entry, averaged over seeds.
    pub mse_average: f64,
    pub mse_voting: f64,
    pub mse_debias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DebiasResult {
    pub rows: Vec<DebiasRow>,
    /// Per-seed rows, `per_seed[s][k_index]`.
    pub per_seed: Vec<Vec<DebiasRow>>,
    pub jensen: JensenReport,
}

/// One window measured `K` times with fresh noise. Compares averaging the
/// LASSO outputs, voting with a majority threshold `ceil(K/2)` followed by
/// refits on the accepted support, and refits on each measurement's own
/// detected support.
pub fn debias(cfg: &DebiasConfig) -> Result<DebiasResult> {
    let k_max = cfg.ks.iter().copied().max().unwrap_or(0);
    if k_max == 0 || cfg.seeds == 0 {
        return Err(Error::config("debias sweep needs K >= 1 and at least one seed"));
    }
    let lambda = cfg.lambda.unwrap_or_else(|| default_lambda(cfg.sigma, cfg.n));
    let n = cfg.n;
    let seeds: Vec<usize> = (0..cfg.seeds).collect();

    let per_seed = par_map(&seeds, |&sd| -> Result<(Vec<DebiasRow>, JensenReport)> {
        let s = derive_seed(cfg.seed, sd as u64, 0);
        let matrix = SensingMatrix::generate(cfg.ensemble, cfg.m, n, derive_seed(s, 1, 0))?;
        let view = matrix.view(crate::sensing::PermutationOffset::identity(n));
        let x = gen_k_sparse(n, cfg.kappa, cfg.amp_low, cfg.amp_high, derive_seed(s, 2, 0))?;
        let mut noise = NoiseModel::gaussian(cfg.sigma, derive_seed(s, 3, 0)).source()?;
        let opts = FistaOptions {
            lipschitz: Some(matrix.lipschitz()),
            ..cfg.solver
        };

        let mut ys = Vec::with_capacity(k_max);
        let mut lasso = Vec::with_capacity(k_max);
        let mut detected = Vec::with_capacity(k_max);
        let mut own_refit = Vec::with_capacity(k_max);
        let mut x0 = vec![0.0; n];
        for _ in 0..k_max {
            let y = encode_direct(&matrix, view.offset(), &x, &mut noise)?;
            let x_hat = fista(&LassoProblem::new(&view, &y, lambda)?, &x0, &opts)?.x_hat;
            let mut det = detect_support_threshold(&x_hat, cfg.xi1);
            if det.len() >= cfg.m {
                det.sort_by(|&a, &b| x_hat[b].abs().total_cmp(&x_hat[a].abs()).then(a.cmp(&b)));
                det.truncate(cfg.m - 1);
                det.sort_unstable();
            }
            own_refit.push(lse_on_support(&view, &y, &det)?);
            x0.clone_from(&x_hat);
            lasso.push(x_hat);
            detected.push(det);
            ys.push(y);
        }

        let mut jensen = JensenReport::empty();
        let mut rows = Vec::with_capacity(cfg.ks.len());
        for &k in &cfg.ks {
            let mut votes = vec![0usize; n];
            for det in &detected[..k] {
                for &j in det {
                    votes[j] += 1;
                }
            }
            let need = k.div_ceil(2);
            let mut accepted: Vec<usize> = (0..n).filter(|&j| votes[j] >= need).collect();
            if accepted.len() >= cfg.m {
                accepted.sort_by(|&a, &b| votes[b].cmp(&votes[a]).then(a.cmp(&b)));
                accepted.truncate(cfg.m - 1);
                accepted.sort_unstable();
            }
            let voted: Vec<DenseVector> = ys[..k]
                .iter()
                .map(|y| lse_on_support(&view, y, &accepted))
                .collect::<Result<_>>()?;

            let mut mse = [0.0f64; 3];
            for (slot, family) in [&lasso[..k], &voted[..], &own_refit[..k]].into_iter().enumerate() {
                let avg = running_mean(family);
                for j in 0..n {
                    let column: Vec<f64> = family.iter().map(|v| v[j]).collect();
                    jensen.observe(avg[j], &column, x[j]);
                    mse[slot] += (avg[j] - x[j]).powi(2);
                }
                mse[slot] /= n as f64;
            }
            rows.push(DebiasRow {
                k,
                mse_average: mse[0],
                mse_voting: mse[1],
                mse_debias: mse[2],
            });
        }
        Ok((rows, jensen))
    });

    let mut jensen = JensenReport::empty();
    let mut all = Vec::with_capacity(cfg.seeds);
    for r in per_seed {
        let (rows, j) = r?;
        jensen.merge(&j);
        all.push(rows);
    }
    let s = cfg.seeds as f64;
    let rows = (0..cfg.ks.len())
        .map(|ki| DebiasRow {
            k: cfg.ks[ki],
            mse_average: all.iter().map(|r| r[ki].mse_average).sum::<f64>() / s,
            mse_voting: all.iter().map(|r| r[ki].mse_voting).sum::<f64>() / s,
            mse_debias: all.iter().map(|r| r[ki].mse_debias).sum::<f64>() / s,
        })
        .collect();
    Ok(DebiasResult {
        rows,
        per_seed: all,
        jensen,
    })
}

/// Entrywise mean, accumulated in the same running form the decoder uses.
fn running_mean(vs: &[DenseVector]) -> DenseVector {
    let mut mean = vec![0.0; vs.first().map_or(0, |v| v.len())];
    for (l, v) in vs.iter().enumerate() {
        let l = (l + 1) as f64;
        for (a, b) in mean.iter_mut().zip(v) {
            *a += (b - *a) / l;
        }
    }
    mean
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchRow {
    pub n: usize,
    pub p: f64,
    pub kappa: usize,
    pub expectation: f64,
    pub mc_mean: Option<f64>,
    pub mc_std_err: Option<f64>,
}

/// Tabulates the closed form for each `(n, p)` and each `kappa = c ceil(n p)`
/// (capped at `n`), optionally next to a Monte Carlo estimate.
pub fn mismatch_table(
    ns: &[usize],
    ps: &[f64],
    kappa_multiples: &[usize],
    amp: f64,
    mc_trials: usize,
    seed: u64,
) -> Vec<MismatchRow> {
    let mut jobs = Vec::new();
    for &n in ns {
        for &p in ps {
            for &c in kappa_multiples {
                jobs.push((n, p, (c * expected_sparsity(n, p)).min(n)));
            }
        }
    }
    par_map(&jobs, |&(n, p, kappa)| {
        let mc = (mc_trials > 0).then(|| {
            let s = derive_seed(seed, n as u64, kappa as u64 ^ p.to_bits());
            mismatch_mc_stats(n, kappa, p, amp, mc_trials, s)
        });
        MismatchRow {
            n,
            p,
            kappa,
            expectation: mismatch_expectation(n, kappa, p, amp),
            mc_mean: mc.map(|e| e.mean),
            mc_std_err: mc.map(|e| e.std_err),
        }
    })
}
