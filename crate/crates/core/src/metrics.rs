//! Error and detection measures.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use crate::decoder::Emission;
use crate::error::{Error, Result};
use crate::numkernel::norm2;

/// `||x_bar - x|| / ||x||` for one window.
pub fn normalized_error(x_bar: &[f64], x_true: &[f64]) -> Result<f64> {
    check_len(x_bar.len(), x_true.len())?;
    let denom = norm2(x_true);
    if denom == 0.0 {
        return Err(Error::UndefinedMetric("normalized error of an all-zero window"));
    }
    let diff: Vec<f64> = x_bar.iter().zip(x_true).map(|(a, b)| a - b).collect();
    Ok(norm2(&diff) / denom)
}

/// `sum (x_bar_i - x_i)^2 / sum x_i^2` over a finalized range.
pub fn stream_nev(x_bar: &[f64], x_true: &[f64]) -> Result<f64> {
    check_len(x_bar.len(), x_true.len())?;
    let num: f64 = x_bar.iter().zip(x_true).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = x_true.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(Error::UndefinedMetric("error variance of an all-zero stream"));
    }
    Ok(num / den)
}

/// True- and false-positive rates of a detected support within `[0, n)`.
pub fn tpr_fpr(detected: &[usize], truth: &[usize], n: usize) -> Result<(f64, f64)> {
    if let Some(&bad) = detected.iter().chain(truth).find(|&&j| j >= n) {
        return Err(Error::OutOfRange { index: bad, limit: n });
    }
    let truth: BTreeSet<usize> = truth.iter().copied().collect();
    let detected: BTreeSet<usize> = detected.iter().copied().collect();
    if truth.is_empty() {
        return Err(Error::UndefinedMetric("true positive rate with an empty true support"));
    }
    let hits = detected.intersection(&truth).count();
    let false_hits = detected.len() - hits;
    let negatives = n - truth.len();
    let fpr = if negatives == 0 {
        0.0
    } else {
        false_hits as f64 / negatives as f64
    };
    Ok((hits as f64 / truth.len() as f64, fpr))
}

/// Samples taken per recovered entry after `i` windows: `i m / (n + (i-1) tau)`.
pub fn sampling_efficiency(m: usize, n: usize, tau: usize, i: usize) -> Result<f64> {
    if i == 0 {
        return Err(Error::config("sampling efficiency needs at least one window"));
    }
    Ok((i * m) as f64 / (n + (i - 1) * tau) as f64)
}

/// Large-`i` limit of [`sampling_efficiency`] when every window is sampled afresh.
pub fn sampling_efficiency_limit(m: usize, tau: usize) -> f64 {
    m as f64 / tau as f64
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhaseTimes {
    pub encode: Duration,
    pub decode: Duration,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorSummary {
    pub ne_per_window: Vec<f64>,
    /// Windows whose true signal was all zero.
    pub ne_skipped: usize,
    pub stream_nev: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub mean_iterations: f64,
    pub wall_times: PhaseTimes,
}

impl ErrorSummary {
    pub fn mean_ne(&self) -> Option<f64> {
        if self.ne_per_window.is_empty() {
            None
        } else {
            Some(self.ne_per_window.iter().sum::<f64>() / self.ne_per_window.len() as f64)
        }
    }
}

/// Collects every per-window contribution to each running average and checks
/// that the squared error of the average never exceeds the mean squared error
/// of its contributions.
#[derive(Debug, Clone, Default)]
pub struct JensenAudit {
    terms: BTreeMap<usize, Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JensenReport {
    pub checked: usize,
    pub violations: usize,
    /// Largest `(x_bar - x)^2 - mean (x_k - x)^2` seen.
    pub worst_gap: f64,
}

impl JensenAudit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, contributions: impl IntoIterator<Item = (usize, f64)>) {
        for (g, v) in contributions {
            self.terms.entry(g).or_default().push(v);
        }
    }

    /// Checks each emitted average against `truth[global_index]`.
    pub fn check(&self, emissions: &[Emission], truth: &[f64]) -> JensenReport {
        let mut rep = JensenReport::empty();
        for e in emissions {
            let Some(values) = self.terms.get(&e.global_index) else { continue };
            rep.observe(e.x_bar, values, truth[e.global_index]);
        }
        rep
    }
}

impl JensenReport {
    pub fn empty() -> Self {
        Self {
            worst_gap: f64::NEG_INFINITY,
            ..Self::default()
        }
    }

    /// Checks one average of `values` against the true value `x`.
    pub fn observe(&mut self, average: f64, values: &[f64], x: f64) {
        if values.is_empty() {
            return;
        }
        let mean_sq = values.iter().map(|v| (v - x) * (v - x)).sum::<f64>() / values.len() as f64;
        let avg_sq = (average - x) * (average - x);
        self.checked += 1;
        self.worst_gap = self.worst_gap.max(avg_sq - mean_sq);
        if avg_sq > mean_sq {
            self.violations += 1;
        }
    }

    pub fn merge(&mut self, other: &JensenReport) {
        self.checked += other.checked;
        self.violations += other.violations;
        self.worst_gap = self.worst_gap.max(other.worst_gap);
    }

    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            what: "estimate length",
            expected: b,
            got: a,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalized_error_examples() {
        let x = [1.0, -2.0, 0.0];
        assert_eq!(normalized_error(&x, &x).unwrap(), 0.0);
        assert_eq!(normalized_error(&[0.0; 3], &x).unwrap(), 1.0);
        assert_eq!(normalized_error(&[2.0, -4.0, 0.0], &x).unwrap(), 1.0);
        assert!(matches!(normalized_error(&x, &[0.0; 3]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn stream_nev_examples() {
        let x = [1.0, 0.0, 2.0];
        assert_eq!(stream_nev(&x, &x).unwrap(), 0.0);
        assert_eq!(stream_nev(&[0.0; 3], &x).unwrap(), 1.0);
        assert_eq!(stream_nev(&[0.0, 0.0, 2.0], &x).unwrap(), 0.2);
        assert!(stream_nev(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn rates_examples() {
        assert_eq!(tpr_fpr(&[0, 1], &[0, 1], 4).unwrap(), (1.0, 0.0));
        assert_eq!(tpr_fpr(&[], &[0, 1], 4).unwrap(), (0.0, 0.0));
        assert_eq!(tpr_fpr(&[1, 2], &[0, 1], 4).unwrap(), (0.5, 0.5));
        assert!(tpr_fpr(&[1], &[], 4).is_err());
        assert!(tpr_fpr(&[9], &[0], 4).is_err());
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(sampling_efficiency(60, 1200, 1, 1).unwrap(), 0.05);
        let big = sampling_efficiency(60, 1200, 60, 1_000_000).unwrap();
        assert!((big - 1.0).abs() < 1e-3);
        let many = sampling_efficiency(60, 1200, 1, 100_000_000).unwrap();
        assert!((many - 60.0).abs() < 1e-3);
        assert_eq!(sampling_efficiency_limit(60, 1), 60.0);
        assert!(sampling_efficiency(1, 2, 1, 0).is_err());
    }

    #[test]
    fn jensen_audit_flags_a_bad_average() {
        let mut a = JensenAudit::new();
        a.record([(0, 1.0), (0, 3.0)]);
        let good = Emission {
            global_index: 0,
            x_bar: 2.0,
            votes: 2,
            recoveries: 2,
            finalized_at_window: 0,
        };
        let rep = a.check(&[good], &[0.0]);
        assert_eq!((rep.checked, rep.violations), (1, 0));
        let bad = Emission { x_bar: 4.0, ..good };
        assert_eq!(a.check(&[bad], &[0.0]).violations, 1);
    }

    proptest! {
        #[test]
        fn nev_of_concatenation_is_between_parts(
            a in prop::collection::vec((-5.0f64..5.0, 0.5f64..5.0), 1..20),
            b in prop::collection::vec((-5.0f64..5.0, 0.5f64..5.0), 1..20),
        ) {
            let split = |v: &[(f64, f64)]| -> (Vec<f64>, Vec<f64>) { v.iter().copied().unzip() };
            let (ea, xa) = split(&a);
            let (eb, xb) = split(&b);
            let na = stream_nev(&ea, &xa).unwrap();
            let nb = stream_nev(&eb, &xb).unwrap();
            let joined = stream_nev(&[ea, eb].concat(), &[xa, xb].concat()).unwrap();
            let tol = 1e-12 * na.max(nb);
            prop_assert!(joined >= na.min(nb) - tol && joined <= na.max(nb) + tol);
        }

        #[test]
        fn rates_ignore_labels(
            truth in prop::collection::btree_set(0usize..30, 1..10),
            detected in prop::collection::btree_set(0usize..30, 0..15),
            shift in 0usize..30,
        ) {
            let t: Vec<usize> = truth.iter().copied().collect();
            let d: Vec<usize> = detected.iter().copied().collect();
            let relabel = |s: &[usize]| s.iter().map(|j| (j * 7 + shift) % 30).collect::<Vec<_>>();
            prop_assert_eq!(tpr_fpr(&d, &t, 30).unwrap(), tpr_fpr(&relabel(&d), &relabel(&t), 30).unwrap());
        }
    }
}
