//! Streaming reconstruction: per-window LASSO, support voting, least-squares
//! debiasing on the accepted support and running averages across windows.
//!
//! Global stream index `g` lives in windows `i` with `i tau <= g < i tau + n`.
//! Once window `i` is processed, indices below `(i + 1) tau` can no longer be
//! touched and are emitted.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::numkernel::{DenseMatrix, DenseVector, LinearOperator};
use crate::solvers::{fista, lse_on_support, FistaOptions, LassoProblem, SolverReport};

/// Fill rule for the trailing `tau` entries of a shifted warm start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailPolicy {
    #[default]
    Zeros,
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Detector {
    /// `|x_hat_j| >= xi1`.
    #[default]
    Threshold,
    /// Top `xi3` entries of a LASSO fit to the residual left by the warm start.
    AnnihilateTopK,
}

/// What gets averaged across windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Vote, refit on the accepted support, average the refits.
    #[default]
    Voting,
    /// Refit on each window's own detected support, no voting.
    DebiasNoVote,
    /// Average the raw LASSO outputs over every covering window.
    AverageOnly,
}

/// Columns used in the least-squares refit of a voting window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefitSupport {
    /// Only entries with enough votes. Nonzeros that entered the window too
    /// recently to be accepted are then left out of the fit and bias it.
    Accepted,
    /// Accepted entries plus this window's detections. Only the accepted
    /// entries are averaged either way.
    #[default]
    AcceptedAndDetected,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Voting => "voting",
            Mode::DebiasNoVote => "debias",
            Mode::AverageOnly => "average",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcsConfig {
    pub n: usize,
    pub tau: usize,
    pub lambda: f64,
    pub xi1: f64,
    pub xi2: usize,
    pub xi3: usize,
    pub tail_policy: TailPolicy,
    pub detector: Detector,
    pub mode: Mode,
    pub refit: RefitSupport,
    pub warm_start: bool,
    pub solver: FistaOptions,
    /// Number of windows in the stream, when known. Lets entries near the end
    /// be accepted with fewer votes, matching their actual coverage.
    pub total_windows: Option<usize>,
}

/// `4 sigma sqrt(2 ln n)`, or `1e-4` for noiseless data.
pub fn default_lambda(sigma: f64, n: usize) -> f64 {
    if sigma > 0.0 {
        4.0 * sigma * (2.0 * (n as f64).ln()).sqrt()
    } else {
        1e-4
    }
}

/// `2 sigma sqrt(2 ln n)`: the universal noise threshold in this objective's
/// scaling. Less shrinkage than [`default_lambda`], for weak amplitudes.
pub fn universal_lambda(sigma: f64, n: usize) -> f64 {
    default_lambda(sigma, n) / 2.0
}

/// Majority of the windows covering an interior entry.
pub fn default_xi2(n: usize, tau: usize) -> usize {
    n.div_ceil(2 * tau).max(1)
}

impl RcsConfig {
    pub fn new(n: usize, tau: usize, sigma: f64) -> Self {
        Self {
            n,
            tau,
            lambda: default_lambda(sigma, n),
            xi1: 0.1,
            xi2: default_xi2(n, tau.max(1)),
            xi3: 1,
            tail_policy: TailPolicy::Zeros,
            detector: Detector::Threshold,
            mode: Mode::Voting,
            refit: RefitSupport::AcceptedAndDetected,
            warm_start: true,
            solver: FistaOptions::default(),
            total_windows: None,
        }
    }

    /// Windows covering an interior entry.
    pub fn coverage(&self) -> usize {
        self.n / self.tau
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.tau == 0 || self.tau > self.n {
            return Err(Error::config(format!(
                "need 1 <= tau <= n, got n = {}, tau = {}",
                self.n, self.tau
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.xi1 > 0.0 && self.xi1.is_finite()) {
            return Err(Error::config(format!("xi1 must be > 0, got {}", self.xi1)));
        }
        if self.xi2 == 0 || self.xi2 > self.coverage() {
            return Err(Error::config(format!(
                "xi2 must lie in [1, {}], got {}",
                self.coverage(),
                self.xi2
            )));
        }
        if self.detector == Detector::AnnihilateTopK && (self.xi3 == 0 || self.xi3 > self.xi2) {
            return Err(Error::config(format!(
                "xi3 must lie in [1, xi2 = {}], got {}",
                self.xi2, self.xi3
            )));
        }
        if self.total_windows == Some(0) {
            return Err(Error::config("total window count must be positive"));
        }
        Ok(())
    }
}

/// Shift left by `tau` and refill the tail.
pub fn warm_start(prev: &[f64], tau: usize, policy: TailPolicy) -> DenseVector {
    let n = prev.len();
    let tau = tau.min(n);
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&prev[tau..]);
    let fill = match policy {
        TailPolicy::Zeros => 0.0,
        TailPolicy::Hold => prev.last().copied().unwrap_or(0.0),
    };
    let fill = if tau == n { 0.0 } else { fill };
    out.resize(n, fill);
    out
}

pub fn detect_support_threshold(x_hat: &[f64], xi1: f64) -> Vec<usize> {
    (0..x_hat.len()).filter(|&j| x_hat[j].abs() >= xi1).collect()
}

/// Fits the residual `y - A x_warm` and returns the `xi3` largest entries of
/// that fit together with the support of `x_warm`. A residual fit that is
/// numerically zero contributes nothing.
pub fn detect_support_annihilate<A: LinearOperator + ?Sized>(
    y: &[f64],
    op: &A,
    x_warm: &[f64],
    lambda: f64,
    xi3: usize,
    opts: &FistaOptions,
) -> Result<Vec<usize>> {
    let n = op.cols();
    let fit = op.apply(x_warm);
    let resid: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
    let prob = LassoProblem::new(op, &resid, lambda)?;
    let e = fista(&prob, &vec![0.0; n], opts)?.x_hat;

    let mut chosen = vec![false; n];
    for (j, v) in x_warm.iter().enumerate() {
        chosen[j] = *v != 0.0;
    }
    let peak = e.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if peak >= 1e-12 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| e[b].abs().total_cmp(&e[a].abs()).then(a.cmp(&b)));
        for &j in order.iter().take(xi3) {
            chosen[j] = true;
        }
    }
    Ok((0..n).filter(|&j| chosen[j]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Slot {
    votes: u32,
    recoveries: u32,
    mean: f64,
}

/// Per-index votes, recovery counts and running means over the live range
/// `[base, base + len)` of the stream.
#[derive(Debug, Clone)]
pub struct VoteLedger {
    n: usize,
    tau: usize,
    total_windows: Option<usize>,
    base: usize,
    slots: VecDeque<Slot>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emission {
    pub global_index: usize,
    pub x_bar: f64,
    pub votes: u32,
    pub recoveries: u32,
    pub finalized_at_window: usize,
}

impl VoteLedger {
    pub fn new(n: usize, tau: usize, total_windows: Option<usize>) -> Self {
        assert!(n > 0 && tau > 0 && tau <= n, "ledger needs 1 <= tau <= n");
        Self {
            n,
            tau,
            total_windows,
            base: 0,
            slots: VecDeque::new(),
        }
    }

    /// First index not yet emitted.
    pub fn horizon_start(&self) -> usize {
        self.base
    }

    pub fn horizon_end(&self) -> usize {
        self.base + self.slots.len()
    }

    fn ensure(&mut self, end: usize) {
        while self.horizon_end() < end {
            self.slots.push_back(Slot::default());
        }
    }

    fn slot(&self, g: usize) -> Option<&Slot> {
        g.checked_sub(self.base).and_then(|k| self.slots.get(k))
    }

    fn slot_mut(&mut self, g: usize) -> &mut Slot {
        assert!(g >= self.base, "index {g} is already finalized");
        self.ensure(g + 1);
        &mut self.slots[g - self.base]
    }

    pub fn votes(&self, g: usize) -> u32 {
        self.slot(g).map_or(0, |s| s.votes)
    }

    pub fn recoveries(&self, g: usize) -> u32 {
        self.slot(g).map_or(0, |s| s.recoveries)
    }

    pub fn average(&self, g: usize) -> f64 {
        self.slot(g).map_or(0.0, |s| s.mean)
    }

    /// Number of windows that will ever contain global index `g`.
    pub fn coverage(&self, g: usize) -> usize {
        let first = if g + 1 > self.n {
            (g + 1 - self.n).div_ceil(self.tau)
        } else {
            0
        };
        let mut last = g / self.tau;
        if let Some(w) = self.total_windows {
            last = last.min(w.saturating_sub(1));
        }
        if last < first {
            0
        } else {
            last - first + 1
        }
    }

    pub fn cast_votes(&mut self, support: &[usize], window_start: usize) {
        self.ensure(window_start + self.n);
        for &j in support {
            debug_assert!(j < self.n);
            self.slot_mut(window_start + j).votes += 1;
        }
    }

    /// Window-local indices whose votes reach `min(xi2, coverage)`. When that
    /// leaves `m` or more, the `m - 1` most voted are kept (lower index wins
    /// ties). Returned in increasing order.
    pub fn accepted_support(&self, window_start: usize, xi2: usize, m: usize) -> Vec<usize> {
        let mut picked: Vec<usize> = (0..self.n)
            .filter(|&j| {
                let g = window_start + j;
                let need = xi2.min(self.coverage(g)).max(1);
                self.votes(g) as usize >= need
            })
            .collect();
        if picked.len() >= m {
            picked.sort_by(|&a, &b| {
                self.votes(window_start + b)
                    .cmp(&self.votes(window_start + a))
                    .then(a.cmp(&b))
            });
            picked.truncate(m.saturating_sub(1));
            picked.sort_unstable();
        }
        picked
    }

    /// Folds `values[j]` into the running mean of each `j` in `support`.
    pub fn update_averages(&mut self, values: &[f64], support: &[usize], window_start: usize) {
        for &j in support {
            let s = self.slot_mut(window_start + j);
            s.recoveries += 1;
            s.mean += (values[j] - s.mean) / s.recoveries as f64;
        }
    }

    /// Removes and returns every live index below `end`.
    pub fn finalize_before(&mut self, end: usize, window: usize) -> Vec<Emission> {
        let mut out = Vec::new();
        while self.base < end {
            let s = self.slots.pop_front().unwrap_or_default();
            out.push(Emission {
                global_index: self.base,
                x_bar: s.mean,
                votes: s.votes,
                recoveries: s.recoveries,
                finalized_at_window: window,
            });
            self.base += 1;
        }
        out
    }
}

pub fn cast_votes(ledger: &mut VoteLedger, support: &[usize], window_start: usize) {
    ledger.cast_votes(support, window_start);
}

pub fn accepted_support(ledger: &VoteLedger, window_start: usize, xi2: usize, m: usize) -> Vec<usize> {
    ledger.accepted_support(window_start, xi2, m)
}

pub fn update_averages(ledger: &mut VoteLedger, x_tilde: &[f64], support: &[usize], window_start: usize) {
    ledger.update_averages(x_tilde, support, window_start);
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowEstimate {
    pub lasso: DenseVector,
    /// Least-squares refit on `support`, zero elsewhere.
    pub debiased: DenseVector,
    /// Indices voted for in this window.
    pub detected: Vec<usize>,
    /// Indices used in the refit.
    pub support: Vec<usize>,
    /// Indices whose refit values were folded into the averages.
    pub accepted: Vec<usize>,
    pub report: SolverReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub window: usize,
    pub window_start: usize,
    pub estimate: WindowEstimate,
    pub emitted: Vec<Emission>,
}

impl StepOutput {
    /// `(global index, value)` pairs this window folded into the averages.
    pub fn contributions(&self, mode: Mode) -> Vec<(usize, f64)> {
        let e = &self.estimate;
        match mode {
            Mode::AverageOnly => e
                .lasso
                .iter()
                .enumerate()
                .map(|(j, &v)| (self.window_start + j, v))
                .collect(),
            Mode::Voting | Mode::DebiasNoVote => e
                .accepted
                .iter()
                .map(|&j| (self.window_start + j, e.debiased[j]))
                .collect(),
        }
    }
}

/// Sequential decoder for one stream.
#[derive(Debug, Clone)]
pub struct RcsDecoder {
    cfg: RcsConfig,
    ledger: VoteLedger,
    window: usize,
    prev_lasso: Option<DenseVector>,
    prev_debiased: Option<DenseVector>,
    lipschitz: Option<f64>,
}

impl RcsDecoder {
    pub fn new(cfg: RcsConfig) -> Result<Self> {
        cfg.validate()?;
        let ledger = VoteLedger::new(cfg.n, cfg.tau, cfg.total_windows);
        Ok(Self {
            lipschitz: cfg.solver.lipschitz,
            cfg,
            ledger,
            window: 0,
            prev_lasso: None,
            prev_debiased: None,
        })
    }

    pub fn config(&self) -> &RcsConfig {
        &self.cfg
    }

    pub fn ledger(&self) -> &VoteLedger {
        &self.ledger
    }

    /// Windows processed so far.
    pub fn windows_done(&self) -> usize {
        self.window
    }

    /// Processes the measurement of the next window. `op` must be the rotated
    /// matrix of that window.
    pub fn step<A: LinearOperator + ?Sized>(&mut self, op: &A, y: &[f64]) -> Result<StepOutput> {
        let i = self.window;
        self.step_inner(op, y).map_err(|e| e.at_window(i))
    }

    fn step_inner<A: LinearOperator + ?Sized>(&mut self, op: &A, y: &[f64]) -> Result<StepOutput> {
        let cfg = &self.cfg;
        let (m, n) = (op.rows(), op.cols());
        if n != cfg.n {
            return Err(Error::DimensionMismatch {
                what: "window length",
                expected: cfg.n,
                got: n,
            });
        }
        if let Some(w) = cfg.total_windows {
            if self.window >= w {
                return Err(Error::OutOfRange {
                    index: self.window,
                    limit: w,
                });
            }
        }
        let lip = match self.lipschitz {
            Some(l) => l,
            None => {
                let l = 1.01 * crate::numkernel::operator_norm_sq(op, 300, 0x5eed);
                self.lipschitz = Some(l);
                l
            }
        };
        let opts = FistaOptions {
            lipschitz: Some(lip),
            ..cfg.solver
        };
        let window_start = self.window * cfg.tau;

        let x0 = match (&self.prev_lasso, cfg.warm_start) {
            (Some(prev), true) => warm_start(prev, cfg.tau, cfg.tail_policy),
            _ => vec![0.0; n],
        };
        let prob = LassoProblem::new(op, y, cfg.lambda)?;
        let report = fista(&prob, &x0, &opts)?;
        let lasso = report.x_hat.clone();

        let detected = match cfg.detector {
            Detector::Threshold => detect_support_threshold(&lasso, cfg.xi1),
            Detector::AnnihilateTopK => {
                let x_warm = match &self.prev_debiased {
                    Some(prev) => warm_start(prev, cfg.tau, TailPolicy::Zeros),
                    None => vec![0.0; n],
                };
                detect_support_annihilate(y, op, &x_warm, cfg.lambda, cfg.xi3, &opts)?
            }
        };

        let (support, accepted, debiased) = match cfg.mode {
            Mode::Voting => {
                self.ledger.cast_votes(&detected, window_start);
                let accepted = self.ledger.accepted_support(window_start, cfg.xi2, m);
                let support = match cfg.refit {
                    RefitSupport::Accepted => accepted.clone(),
                    RefitSupport::AcceptedAndDetected => widen_support(&accepted, &detected, &lasso, m),
                };
                let debiased = lse_on_support(op, y, &support)?;
                self.ledger.update_averages(&debiased, &accepted, window_start);
                (support, accepted, debiased)
            }
            Mode::DebiasNoVote => {
                self.ledger.cast_votes(&detected, window_start);
                let support = cap_by_magnitude(&detected, &lasso, m);
                let debiased = lse_on_support(op, y, &support)?;
                self.ledger.update_averages(&debiased, &support, window_start);
                (support.clone(), support, debiased)
            }
            Mode::AverageOnly => {
                self.ledger.cast_votes(&detected, window_start);
                let all: Vec<usize> = (0..n).collect();
                self.ledger.update_averages(&lasso, &all, window_start);
                (Vec::new(), Vec::new(), vec![0.0; n])
            }
        };

        let emitted = self.ledger.finalize_before(window_start + cfg.tau, self.window);
        self.window += 1;
        self.prev_lasso = Some(lasso.clone());
        self.prev_debiased = Some(debiased.clone());

        Ok(StepOutput {
            window: self.window - 1,
            window_start,
            estimate: WindowEstimate {
                lasso,
                debiased,
                detected,
                support,
                accepted,
                report,
            },
            emitted,
        })
    }

    /// Emits everything still pending once the stream has ended.
    pub fn finish(mut self) -> Vec<Emission> {
        let last = self.window.saturating_sub(1);
        let end = if self.window == 0 {
            0
        } else {
            last * self.cfg.tau + self.cfg.n
        };
        self.ledger.finalize_before(end, last)
    }
}

/// `accepted` plus as many of `detected` as fit below `m` columns, largest
/// `|x|` first.
fn widen_support(accepted: &[usize], detected: &[usize], x: &[f64], m: usize) -> Vec<usize> {
    let room = m.saturating_sub(1).saturating_sub(accepted.len());
    let extra: Vec<usize> = detected
        .iter()
        .copied()
        .filter(|j| accepted.binary_search(j).is_err())
        .collect();
    let mut out = accepted.to_vec();
    if extra.len() <= room {
        out.extend(extra);
    } else {
        out.extend(cap_by_magnitude(&extra, x, room + 1));
    }
    out.sort_unstable();
    out
}

/// Keeps at most `m - 1` entries of `support`, largest `|x|` first.
fn cap_by_magnitude(support: &[usize], x: &[f64], m: usize) -> Vec<usize> {
    if support.len() < m {
        return support.to_vec();
    }
    let mut s = support.to_vec();
    s.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    s.truncate(m.saturating_sub(1));
    s.sort_unstable();
    s
}

/// One window of a joint estimate: its rotated matrix and measurement.
pub struct JointWindow<'a> {
    pub op: &'a dyn LinearOperator,
    pub y: &'a [f64],
}

/// Default cap on the stacked design, in matrix cells.
pub const JOINT_CELL_CAP: usize = 50_000_000;

/// Joint LASSO over the last `K` windows with exponential forgetting:
///
/// ```text
/// sum_k rho^(K-1-k) ( ||A_k x_k - y_k||^2 + lambda ||x_k||_1 )
/// ```
///
/// where window `k` (oldest first) sees the slice `z[k tau .. k tau + n]` of
/// one shared vector `z` of length `n + (K - 1) tau`. The overlapping penalty
/// collapses into per-entry weights, absorbed by rescaling columns, so the
/// problem is a plain LASSO on a stacked design. With `rho = 0` only the
/// newest window carries weight (`rho^0 = 1`); entries seen by no weighted
/// window come back as zero.
pub fn forgetting_joint_estimate(
    windows: &[JointWindow<'_>],
    tau: usize,
    rho: f64,
    lambda: f64,
    opts: &FistaOptions,
    cell_cap: usize,
) -> Result<DenseVector> {
    let k_count = windows.len();
    if k_count == 0 {
        return Err(Error::config("joint estimate needs at least one window"));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::config(format!("forgetting factor must lie in [0, 1), got {rho}")));
    }
    let n = windows[0].op.cols();
    if tau == 0 || tau > n {
        return Err(Error::config(format!("need 1 <= tau <= n = {n}, got {tau}")));
    }
    for w in windows {
        if w.op.cols() != n {
            return Err(Error::DimensionMismatch {
                what: "window length",
                expected: n,
                got: w.op.cols(),
            });
        }
        if w.y.len() != w.op.rows() {
            return Err(Error::DimensionMismatch {
                what: "measurement length",
                expected: w.op.rows(),
                got: w.y.len(),
            });
        }
    }
    let total = n + (k_count - 1) * tau;
    let weights: Vec<f64> = (0..k_count)
        .map(|k| if k + 1 == k_count { 1.0 } else { rho.powi((k_count - 1 - k) as i32) })
        .collect();
    let active: Vec<usize> = (0..k_count).filter(|&k| weights[k] > 0.0).collect();
    let rows: usize = active.iter().map(|&k| windows[k].op.rows()).sum();
    let cells = rows.saturating_mul(total);
    if cells > cell_cap {
        return Err(Error::TooLarge { cells, cap: cell_cap });
    }

    let mut c = vec![0.0; total];
    for &k in &active {
        for v in &mut c[k * tau..k * tau + n] {
            *v += weights[k];
        }
    }

    // design entry for shared unknown g, scaled by sqrt(w_k) / c_g
    let mut data = vec![0.0; cells];
    let mut rhs = Vec::with_capacity(rows);
    let mut row0 = 0;
    let mut col = vec![0.0; windows[0].op.rows()];
    for &k in &active {
        let w = &windows[k];
        let mk = w.op.rows();
        col.resize(mk, 0.0);
        let sw = weights[k].sqrt();
        for j in 0..n {
            let g = k * tau + j;
            w.op.column_into(j, &mut col);
            for (r, v) in col.iter().enumerate() {
                data[(row0 + r) * total + g] = sw * v / c[g];
            }
        }
        rhs.extend(w.y.iter().map(|v| sw * v));
        row0 += mk;
    }
    let design = DenseMatrix::from_vec(rows, total, data)?;
    let prob = LassoProblem::new(&design, &rhs, lambda)?;
    let u = fista(&prob, &vec![0.0; total], &FistaOptions { lipschitz: None, ..*opts })?.x_hat;
    Ok(u
        .iter()
        .zip(&c)
        .map(|(ui, ci)| if *ci > 0.0 { ui / ci } else { 0.0 })
        .collect())
}

/// Entries of the newest window inside a joint estimate.
pub fn newest_window(joint: &[f64], n: usize) -> &[f64] {
    &joint[joint.len() - n..]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{encode_first, NoiseModel};
    use crate::sensing::{gen_gaussian, PermutationOffset};

    #[test]
    fn warm_start_examples() {
        assert_eq!(warm_start(&[1.0, 2.0, 3.0], 1, TailPolicy::Zeros), vec![2.0, 3.0, 0.0]);
        assert_eq!(warm_start(&[1.0, 2.0, 3.0], 3, TailPolicy::Zeros), vec![0.0; 3]);
        assert_eq!(warm_start(&[1.0, 2.0, 3.0], 1, TailPolicy::Hold), vec![2.0, 3.0, 3.0]);
        assert_eq!(warm_start(&[1.0, 2.0, 3.0, 4.0], 2, TailPolicy::Hold), vec![3.0, 4.0, 4.0, 4.0]);
    }

    #[test]
    fn threshold_detector() {
        assert!(detect_support_threshold(&[0.0; 4], 0.1).is_empty());
        assert_eq!(detect_support_threshold(&[0.005, 0.5], 0.1), vec![1]);
        assert_eq!(detect_support_threshold(&[-0.1, 0.09], 0.1), vec![0]);
    }

    #[test]
    fn votes_and_coverage() {
        let mut l = VoteLedger::new(4, 1, None);
        l.cast_votes(&[], 0);
        assert_eq!(l.votes(0), 0);
        l.cast_votes(&[0], 5);
        assert_eq!(l.votes(5), 1);

        // an entry voted in every covering window reaches n / tau
        let (n, tau) = (6, 2);
        let mut l = VoteLedger::new(n, tau, None);
        let g = 10;
        for i in 0..=g / tau {
            let start = i * tau;
            if g >= start && g < start + n {
                l.cast_votes(&[g - start], start);
            }
        }
        assert_eq!(l.votes(g) as usize, n / tau);
        assert_eq!(l.coverage(g), n / tau);
        assert_eq!(l.coverage(0), 1);
        assert_eq!(l.coverage(3), 2);

        let l = VoteLedger::new(6, 2, Some(3));
        // windows start at 0, 2, 4 and end at 9
        assert_eq!(l.coverage(9), 1);
        assert_eq!(l.coverage(5), 3);
    }

    #[test]
    fn acceptance_rules() {
        let mut l = VoteLedger::new(8, 1, None);
        assert!(l.accepted_support(20, 3, 5).is_empty());
        for _ in 0..3 {
            l.cast_votes(&[0, 2, 7], 20);
        }
        assert_eq!(l.accepted_support(20, 3, 5), vec![0, 2, 7]);
        assert!(l.accepted_support(20, 4, 5).is_empty());

        // m + 5 qualifying entries: keep the m - 1 most voted
        let m = 3;
        let mut l = VoteLedger::new(8, 1, None);
        for _ in 0..2 {
            l.cast_votes(&(0..8).collect::<Vec<_>>(), 10);
        }
        l.cast_votes(&[6, 4], 10);
        assert_eq!(l.accepted_support(10, 2, m), vec![4, 6]);
        l.cast_votes(&[1], 10);
        l.cast_votes(&[1], 10);
        assert_eq!(l.accepted_support(10, 2, m), vec![1, 4]);
    }

    #[test]
    fn edge_entries_need_fewer_votes() {
        let mut l = VoteLedger::new(8, 1, None);
        l.cast_votes(&[0], 0);
        // entry 0 is only ever covered by window 0
        assert_eq!(l.accepted_support(0, 4, 8), vec![0]);
    }

    #[test]
    fn running_means() {
        let mut l = VoteLedger::new(4, 1, None);
        l.update_averages(&[1.0, 0.0, 0.0, 0.0], &[0], 0);
        assert_eq!(l.average(0), 1.0);
        assert_eq!(l.recoveries(0), 1);
        l.update_averages(&[3.0, 0.0, 0.0, 0.0], &[0], 0);
        assert_eq!(l.average(0), 2.0);
        assert_eq!(l.average(1), 0.0);
        let out = l.finalize_before(2, 7);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].x_bar, 2.0);
        assert_eq!(out[0].finalized_at_window, 7);
        assert_eq!(l.horizon_start(), 2);
    }

    fn planted(n: usize, seed: u64) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for k in 0..4 {
            let j = ((seed as usize + 1) * 37 + k * 53) % n;
            x[j] = if k % 2 == 0 { 2.0 + k as f64 } else { -1.5 };
        }
        x
    }

    #[test]
    fn annihilation_finds_a_new_spike() {
        let (m, n) = (30, 80);
        let a = gen_gaussian(m, n, 3).unwrap();
        let view = a.view(PermutationOffset::identity(n));
        let x = planted(n, 1);
        let mut x_with_spike = x.clone();
        x_with_spike[79] = 3.0;
        let y = view.apply(&x_with_spike);
        let opts = FistaOptions {
            eps: Some(1e-8),
            ..FistaOptions::default()
        };
        let s = detect_support_annihilate(&y, &view, &x, 1e-3, 1, &opts).unwrap();
        assert!(s.contains(&79));
        for j in (0..n).filter(|&j| x[j] != 0.0) {
            assert!(s.contains(&j));
        }
        let all = detect_support_annihilate(&y, &view, &x, 1e-3, n, &opts).unwrap();
        assert_eq!(all, (0..n).collect::<Vec<_>>());

        // nothing left to explain
        let y0 = view.apply(&x);
        let s = detect_support_annihilate(&y0, &view, &x, 1e-3, 3, &opts).unwrap();
        assert_eq!(s, (0..n).filter(|&j| x[j] != 0.0).collect::<Vec<_>>());
    }

    fn drive(values: &[f64], cfg: RcsConfig, m: usize, seed: u64) -> (Vec<Emission>, Vec<StepOutput>) {
        let n = cfg.n;
        let tau = cfg.tau;
        let windows = (values.len() - n) / tau + 1;
        let a = gen_gaussian(m, n, seed).unwrap();
        let mut enc = encode_first(&a, &values[..n], NoiseModel::noiseless(), tau).unwrap();
        let mut dec = RcsDecoder::new(RcsConfig {
            total_windows: Some(windows),
            ..cfg
        })
        .unwrap();
        let mut emitted = Vec::new();
        let mut steps = Vec::new();
        for i in 0..windows {
            if i > 0 {
                let s = (i - 1) * tau;
                enc.step(&values[s..s + tau], &values[s + n..s + n + tau]).unwrap();
            }
            let out = dec.step(&a.view(enc.offset()), enc.y()).unwrap();
            emitted.extend(out.emitted.iter().copied());
            steps.push(out);
        }
        emitted.extend(dec.finish());
        (emitted, steps)
    }

    #[test]
    fn noiseless_stream_recovered() {
        let n = 60;
        let mut values = vec![0.0; 200];
        for (g, v) in [(3, 1.5), (17, -2.0), (40, 1.0), (77, 2.5), (120, -1.2), (150, 1.1), (199, 2.0)] {
            values[g] = v;
        }
        let mut cfg = RcsConfig::new(n, 1, 0.0);
        cfg.solver.eps = Some(1e-9);
        let (emitted, _) = drive(&values, cfg, 24, 5);
        assert_eq!(emitted.len(), values.len());
        for (k, e) in emitted.iter().enumerate() {
            assert_eq!(e.global_index, k);
            assert!((e.x_bar - values[k]).abs() <= 1e-6, "{e:?} vs {}", values[k]);
        }
    }

    #[test]
    fn zero_stream_emits_zeros() {
        let values = vec![0.0; 90];
        let cfg = RcsConfig::new(30, 3, 0.0);
        let xi2 = cfg.xi2;
        let (emitted, steps) = drive(&values, cfg, 10, 2);
        assert_eq!(emitted.len(), 90);
        assert!(emitted.iter().all(|e| e.x_bar == 0.0 && (e.votes as usize) < xi2));
        assert!(steps.iter().all(|s| s.estimate.accepted.is_empty()));
    }

    #[test]
    fn emissions_follow_the_last_covering_window() {
        let values = vec![0.0; 50];
        let (n, tau) = (10, 4);
        let cfg = RcsConfig::new(n, tau, 0.0);
        let (emitted, steps) = drive(&values, cfg, 4, 9);
        let windows = steps.len();
        assert_eq!(windows, 11);
        for e in &emitted {
            let last = (e.global_index / tau).min(windows - 1);
            assert_eq!(e.finalized_at_window, last);
        }
        assert_eq!(emitted.len(), (windows - 1) * tau + n);
    }

    #[test]
    fn average_only_single_window_is_the_lasso() {
        let x = planted(40, 3);
        let mut cfg = RcsConfig::new(40, 1, 0.0);
        cfg.mode = Mode::AverageOnly;
        cfg.lambda = 0.05;
        let (emitted, steps) = drive(&x, cfg, 20, 4);
        assert_eq!(steps.len(), 1);
        for (e, v) in emitted.iter().zip(&steps[0].estimate.lasso) {
            assert_eq!(e.x_bar, *v);
        }
    }

    #[test]
    fn joint_single_window_matches_lasso() {
        let (m, n) = (20, 50);
        let a = gen_gaussian(m, n, 12).unwrap();
        let view = a.view(PermutationOffset::new(7, n));
        let x = planted(n, 2);
        let y = view.apply(&x);
        let opts = FistaOptions {
            eps: Some(1e-10),
            ..FistaOptions::default()
        };
        let joint = forgetting_joint_estimate(&[JointWindow { op: &view, y: &y }], 1, 0.5, 0.01, &opts, JOINT_CELL_CAP)
            .unwrap();
        let prob = LassoProblem::new(&view, &y, 0.01).unwrap();
        let single = fista(&prob, &vec![0.0; n], &opts).unwrap().x_hat;
        for (p, q) in joint.iter().zip(&single) {
            assert!((p - q).abs() < 1e-8);
        }
    }

    #[test]
    fn joint_two_windows_recover_overlap() {
        let (m, n) = (30, 60);
        let a = gen_gaussian(m, n, 21).unwrap();
        let mut stream = vec![0.0; n + 1];
        for (g, v) in [(4, 2.0), (20, -1.5), (33, 1.0), (59, 2.5), (60, -2.0)] {
            stream[g] = v;
        }
        let v0 = a.view(PermutationOffset::identity(n));
        let v1 = a.view(PermutationOffset::new(1, n));
        let y0 = v0.apply(&stream[..n]);
        let y1 = v1.apply(&stream[1..]);
        let opts = FistaOptions {
            eps: Some(1e-12),
            max_iter: 50_000,
            ..FistaOptions::default()
        };
        let ws = [JointWindow { op: &v0, y: &y0 }, JointWindow { op: &v1, y: &y1 }];
        let joint = forgetting_joint_estimate(&ws, 1, 0.8, 1e-6, &opts, JOINT_CELL_CAP).unwrap();
        assert_eq!(joint.len(), n + 1);
        for g in 1..n {
            assert!((joint[g] - stream[g]).abs() < 1e-3, "entry {g}: {} vs {}", joint[g], stream[g]);
        }
        assert_eq!(newest_window(&joint, n).len(), n);

        // rho = 0 drops the older window entirely
        let j0 = forgetting_joint_estimate(&ws, 1, 0.0, 1e-6, &opts, JOINT_CELL_CAP).unwrap();
        assert_eq!(j0[0], 0.0);

        assert!(matches!(
            forgetting_joint_estimate(&ws, 1, 0.8, 1e-6, &opts, 100),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(RcsConfig::new(10, 1, 0.1).validate().is_ok());
        let mut c = RcsConfig::new(10, 1, 0.1);
        c.xi2 = 11;
        assert!(c.validate().is_err());
        let mut c = RcsConfig::new(10, 1, 0.1);
        c.detector = Detector::AnnihilateTopK;
        c.xi3 = c.xi2 + 1;
        assert!(c.validate().is_err());
        assert!(RcsConfig::new(10, 11, 0.1).validate().is_err());
        assert_eq!(default_xi2(600, 1), 300);
        assert_eq!(default_xi2(7, 2), 2);
    }
}
