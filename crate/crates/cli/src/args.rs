//! Flag definitions and `--config` file expansion.
//!
//! A config file holds `key = value` lines whose keys are the long flag names
//! of the chosen subcommand. Its entries are spliced in ahead of the command
//! line flags, and a flag given twice keeps its last value, so command line
//! flags win over the file and the file wins over built-in defaults.

use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rcs_core::decoder::{default_lambda, universal_lambda, Detector, Mode, RefitSupport, TailPolicy};
use rcs_core::harness::MRule;
use rcs_core::Ensemble;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "rcs",
    version,
    about = "Recursive compressed sensing over a sliding window of a sparse stream",
    long_about = "Recursive compressed sensing over a sliding window of a sparse stream.\n\n\
        Every subcommand is deterministic given --seed and writes CSV with a header row. \
        Any subcommand accepts --config FILE with `key = value` lines (long flag names); \
        command line flags override the file. RCS_THREADS caps the worker pool.",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a sparse stream, one value per line.
    Gen(GenArgs),
    /// Encode a stream window by window and reconstruct it.
    Run(RunArgs),
    /// Per-window time of recursive encoding + warm start against direct encoding + cold start.
    #[command(long_about = "Per-window time of recursive encoding + warm start against direct \
        encoding + cold start, over a sweep of window lengths. Timings are wall clock and vary \
        between runs; every other column is deterministic.")]
    Bench(BenchArgs),
    /// Support detection rates against the number of measurements.
    #[command(long_about = "Support detection rates against the number of measurements, for \
        each magnitude threshold xi1. Defaults are the n = 6000, kappa = 60 setting scaled \
        down by 10 (n = 600, kappa = 6, m up to 120).")]
    Support(SupportArgs),
    /// Averaging, voting and debiasing on one window measured K times.
    #[command(long_about = "Averaging, voting and debiasing on one window measured K times \
        with fresh noise. Reports per-entry mean squared error of each estimate.")]
    Debias(DebiasArgs),
    /// Expected l1 mass beyond the kappa largest entries, against n and p.
    #[command(long_about = "Expected l1 mass beyond the kappa largest entries of a random \
        sparse window, with kappa a multiple of ceil(n p). Optional Monte Carlo check.")]
    Mismatch(MismatchArgs),
}

/// Comma-separated list flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|t| t.trim().parse::<T>().map_err(|e| format!("{t:?}: {e}")))
            .collect::<Result<Vec<T>, String>>()
            .map(List)
    }
}

/// How the number of measurements follows from `n` and `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MRuleArg {
    /// Use --m as given.
    Fixed,
    /// m = 6 n p.
    #[value(name = "6pn")]
    SixPn,
    /// m = 5 times the expected window sparsity n p.
    #[value(name = "5k")]
    FiveK,
}

pub fn resolve_m(rule: MRuleArg, m: Option<usize>, n: usize, p: f64) -> Result<usize, CliError> {
    let m = match rule {
        MRuleArg::Fixed => m.ok_or_else(|| CliError::Usage("--m-rule fixed needs --m".into()))?,
        MRuleArg::SixPn => MRule::TimesExpected(6.0).resolve(n, p),
        MRuleArg::FiveK => MRule::TimesExpected(5.0).resolve(n, p),
    };
    if m == 0 || m >= n {
        return Err(CliError::Usage(format!("need 1 <= m < n, got m = {m}, n = {n}")));
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LambdaRule {
    /// 4 sigma sqrt(2 ln n), the support-recovery choice.
    Theorem,
    /// 2 sigma sqrt(2 ln n), less shrinkage for weak amplitudes.
    Universal,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Regularisation rule; ignored when --lambda is given.
    #[arg(long, value_enum, default_value_t = LambdaRule::Theorem)]
    pub lambda_rule: LambdaRule,
    /// Explicit regularisation weight.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Optimality tolerance (default 1e-6 lambda).
    #[arg(long)]
    pub solver_eps: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
}

impl SolverArgs {
    pub fn lambda(&self, sigma: f64, n: usize) -> f64 {
        self.lambda.unwrap_or_else(|| match self.lambda_rule {
            LambdaRule::Theorem => default_lambda(sigma, n),
            LambdaRule::Universal => universal_lambda(sigma, n),
        })
    }

    pub fn options(&self) -> rcs_core::FistaOptions {
        rcs_core::FistaOptions {
            eps: self.solver_eps,
            max_iter: self.max_iter,
            ..rcs_core::FistaOptions::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct StreamArgs {
    /// Stream length.
    #[arg(long, default_value_t = 4000)]
    pub length: usize,
    /// Probability that an entry is nonzero.
    #[arg(long, default_value_t = 0.05)]
    pub p: f64,
    /// Smallest nonzero magnitude.
    #[arg(long, default_value_t = 1.0)]
    pub amp_low: f64,
    /// Largest nonzero magnitude.
    #[arg(long, default_value_t = 2.0)]
    pub amp_high: f64,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub stream: StreamArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output file; `-` writes to stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DetectorArg {
    Threshold,
    Annihilate,
}

impl From<DetectorArg> for Detector {
    fn from(d: DetectorArg) -> Self {
        match d {
            DetectorArg::Threshold => Detector::Threshold,
            DetectorArg::Annihilate => Detector::AnnihilateTopK,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Voting,
    Debias,
    Average,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Voting => Mode::Voting,
            ModeArg::Debias => Mode::DebiasNoVote,
            ModeArg::Average => Mode::AverageOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TailArg {
    Zeros,
    Hold,
}

impl From<TailArg> for TailPolicy {
    fn from(t: TailArg) -> Self {
        match t {
            TailArg::Zeros => TailPolicy::Zeros,
            TailArg::Hold => TailPolicy::Hold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RefitArg {
    /// Refit on accepted entries only.
    Accepted,
    /// Refit on accepted entries plus this window's detections.
    AcceptedDetected,
}

impl From<RefitArg> for RefitSupport {
    fn from(r: RefitArg) -> Self {
        match r {
            RefitArg::Accepted => RefitSupport::Accepted,
            RefitArg::AcceptedDetected => RefitSupport::AcceptedAndDetected,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Stream file to reconstruct; generated from the stream flags when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub stream: StreamArgs,
    /// Window length.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Window step.
    #[arg(long, default_value_t = 1)]
    pub tau: usize,
    #[arg(long, value_enum, default_value_t = MRuleArg::FiveK)]
    pub m_rule: MRuleArg,
    /// Measurements per window, for --m-rule fixed.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = Ensemble::Gaussian)]
    pub ensemble: Ensemble,
    /// Measurement noise standard deviation.
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Vote magnitude threshold.
    #[arg(long, default_value_t = 0.1)]
    pub xi1: f64,
    /// Votes needed for acceptance (default: majority of n / tau).
    #[arg(long)]
    pub xi2: Option<usize>,
    /// Entries taken per window by the annihilation detector.
    #[arg(long, default_value_t = 1)]
    pub xi3: usize,
    #[arg(long, value_enum, default_value_t = DetectorArg::Threshold)]
    pub detector: DetectorArg,
    #[arg(long, value_enum, default_value_t = TailArg::Zeros)]
    pub tail: TailArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Voting)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = RefitArg::AcceptedDetected)]
    pub refit: RefitArg,
    /// Read the sensing matrix from this container instead of generating it.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Write the sensing matrix container here.
    #[arg(long)]
    pub save_matrix: Option<PathBuf>,
    /// Per-entry estimate CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary CSV; `-` writes to stdout.
    #[arg(long, default_value = "-")]
    pub summary: PathBuf,
    /// Per-window measurement vectors CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Check the squared error of every average against its contributions.
    #[arg(long, action = ArgAction::Set, default_value_t = false)]
    pub audit: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Window lengths.
    #[arg(long, default_value = "200,400,600,800,1000")]
    pub ns: List<usize>,
    #[arg(long, default_value_t = 1)]
    pub tau: usize,
    #[arg(long, default_value_t = 0.05)]
    pub p: f64,
    #[arg(long, value_enum, default_value_t = MRuleArg::SixPn)]
    pub m_rule: MRuleArg,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub amp_low: f64,
    #[arg(long, default_value_t = 2.0)]
    pub amp_high: f64,
    #[arg(long, default_value_t = Ensemble::Gaussian)]
    pub ensemble: Ensemble,
    /// Windows timed per arm.
    #[arg(long, default_value_t = 50)]
    pub windows: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SupportArgs {
    #[arg(long, default_value_t = 600)]
    pub n: usize,
    /// Nonzeros per trial signal.
    #[arg(long, default_value_t = 6)]
    pub kappa: usize,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 3.34)]
    pub amp_low: f64,
    #[arg(long, default_value_t = 4.34)]
    pub amp_high: f64,
    /// Measurement counts.
    #[arg(long, default_value = "6,12,18,24,36,48,60,72,90,120")]
    pub ms: List<usize>,
    /// Magnitude thresholds.
    #[arg(long, default_value = "0.01,0.1,1")]
    pub xi1s: List<f64>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = Ensemble::Gaussian)]
    pub ensemble: Ensemble,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DebiasArgs {
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub kappa: usize,
    #[arg(long, default_value_t = 120)]
    pub m: usize,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 3.34)]
    pub amp_low: f64,
    #[arg(long, default_value_t = 4.34)]
    pub amp_high: f64,
    /// Numbers of repeated measurements.
    #[arg(long, default_value = "1,2,4,8,16,32,64")]
    pub ks: List<usize>,
    /// Independent signals averaged per row.
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0.1)]
    pub xi1: f64,
    #[arg(long, default_value_t = Ensemble::Gaussian)]
    pub ensemble: Ensemble,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct MismatchArgs {
    #[arg(long, default_value = "20,100,1000")]
    pub ns: List<usize>,
    #[arg(long, default_value = "0.01,0.02,0.05,0.1,0.2,0.3,0.5")]
    pub ps: List<f64>,
    /// kappa = c * ceil(n p) for each c, capped at n.
    #[arg(long, default_value = "1,2")]
    pub kappa_multiples: List<usize>,
    /// Largest nonzero magnitude.
    #[arg(long, default_value_t = 1.0)]
    pub amp: f64,
    /// Monte Carlo draws per row; 0 skips the check.
    #[arg(long, default_value_t = 0)]
    pub mc_trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

/// Replaces `--config FILE` with the file's entries as flags, placed right
/// after the subcommand so that explicit flags override them.
pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(pos) = argv.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(argv);
    };
    let (path, consumed) = match argv[pos].strip_prefix("--config=") {
        Some(p) => (p.to_string(), 1),
        None => match argv.get(pos + 1) {
            Some(p) => (p.clone(), 2),
            None => return Err(CliError::Usage("--config needs a file path".into())),
        },
    };
    let sub = argv.get(1).cloned().unwrap_or_default();
    let text = std::fs::read_to_string(&path).map_err(|source| CliError::File {
        path: path.clone(),
        source,
    })?;
    let known = known_flags(&sub);

    let mut injected = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| CliError::ConfigFile {
            path: path.clone(),
            line: k + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
        let key = key.trim().replace('_', "-");
        if key == "config" || !known.iter().any(|f| *f == key) {
            return Err(err(format!("unknown key {key:?} for subcommand {sub:?}")));
        }
        injected.push(format!("--{key}"));
        injected.push(value.trim().to_string());
    }

    let mut out: Vec<String> = argv[..pos].to_vec();
    out.extend(argv[pos + consumed..].iter().cloned());
    let at = 2.min(out.len());
    out.splice(at..at, injected);
    Ok(out)
}

fn known_flags(sub: &str) -> Vec<String> {
    Cli::command()
        .find_subcommand(sub)
        .map(|c| c.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect())
        .unwrap_or_default()
}
