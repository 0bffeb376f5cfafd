//! Sparse-recovery engines.
//!
//! The LASSO objective is `||A x - y||_2^2 + lambda ||x||_1`. With
//! `g = A^T (y - A x)` the optimality conditions read `g_i = (lambda/2) sgn(x_i)`
//! on the support and `|g_j| < lambda/2` off it; [`fista`] stops at the first
//! iterate satisfying both up to `eps`.

use crate::error::{Error, Result};
use crate::numkernel::{dot, gram_solve, norm2, operator_norm_sq, DenseMatrix, DenseVector, LinearOperator};

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LassoProblem<'a, A: LinearOperator + ?Sized> {
    pub op: &'a A,
    pub y: &'a [f64],
    pub lambda: f64,
}

impl<'a, A: LinearOperator + ?Sized> LassoProblem<'a, A> {
    pub fn new(op: &'a A, y: &'a [f64], lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be >= 0, got {lambda}")));
        }
        if y.len() != op.rows() {
            return Err(Error::DimensionMismatch {
                what: "measurement length",
                expected: op.rows(),
                got: y.len(),
            });
        }
        Ok(Self { op, y, lambda })
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let r = residual(self.op, self.y, x);
        dot(&r, &r) + self.lambda * l1(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FistaOptions {
    /// KKT tolerance; `None` means `1e-6 * lambda`.
    pub eps: Option<f64>,
    pub max_iter: usize,
    /// Upper bound on `lambda_max(A^T A)`; estimated when absent.
    pub lipschitz: Option<f64>,
    /// Reject momentum steps that increase the objective.
    pub monotone: bool,
}

impl Default for FistaOptions {
    fn default() -> Self {
        Self {
            eps: None,
            max_iter: 10_000,
            lipschitz: None,
            monotone: true,
        }
    }
}

impl FistaOptions {
    pub fn resolved_eps(&self, lambda: f64) -> f64 {
        self.eps.unwrap_or(1e-6 * lambda).max(1e-12)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub x_hat: DenseVector,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub objective: f64,
    pub converged: bool,
}

fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

fn residual<A: LinearOperator + ?Sized>(op: &A, y: &[f64], x: &[f64]) -> DenseVector {
    let mut r = op.apply(x);
    for (ri, yi) in r.iter_mut().zip(y) {
        *ri = yi - *ri;
    }
    r
}

/// Worst violation of the LASSO optimality conditions given `g = A^T (y - A x)`.
///
/// On the support this is `|g_i - (lambda/2) sgn(x_i)|`; off the support it
/// is the excess `|g_j| - lambda/2` (clamped at zero).
pub fn kkt_violation(g: &[f64], x: &[f64], lambda: f64) -> f64 {
    let half = 0.5 * lambda;
    g.iter().zip(x).fold(0.0f64, |worst, (&gi, &xi)| {
        let v = if xi != 0.0 {
            (gi - half * xi.signum()).abs()
        } else {
            (gi.abs() - half).max(0.0)
        };
        worst.max(v)
    })
}

/// The epsilon-optimality test. The off-support inequality is strict, so a tie
/// `|g_j| = lambda/2 + eps` counts as a violation.
pub fn kkt_satisfied(g: &[f64], x: &[f64], lambda: f64, eps: f64) -> bool {
    let half = 0.5 * lambda;
    g.iter().zip(x).all(|(&gi, &xi)| {
        if xi != 0.0 {
            (gi - half * xi.signum()).abs() <= eps
        } else {
            gi.abs() < half + eps
        }
    })
}

/// Accelerated proximal gradient for the LASSO, warm-started at `x0`.
///
/// The smooth part `||Ax - y||^2` has gradient `-2 g` with Lipschitz constant
/// `2 L`, so the step is `1/(2L)` and the shrinkage threshold `lambda/(2L)`.
/// Each iteration costs one product with `A` and one with `A^T`.
pub fn fista<A: LinearOperator + ?Sized>(
    prob: &LassoProblem<'_, A>,
    x0: &[f64],
    opts: &FistaOptions,
) -> Result<SolverReport> {
    let op = prob.op;
    let n = op.cols();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            what: "starting point",
            expected: n,
            got: x0.len(),
        });
    }
    let lambda = prob.lambda;
    let eps = opts.resolved_eps(lambda);
    let lip = match opts.lipschitz {
        Some(l) => l,
        None => 1.01 * operator_norm_sq(op, 300, 0x5eed),
    };

    let mut x = x0.to_vec();
    let mut r_x = residual(op, prob.y, &x);
    let mut g_x = op.apply_t(&r_x);
    let mut f_x = dot(&r_x, &r_x) + lambda * l1(&x);

    let report = |x: Vec<f64>, g: &[f64], f: f64, iterations: usize, converged: bool| SolverReport {
        kkt_residual: kkt_violation(g, &x, lambda),
        x_hat: x,
        iterations,
        objective: f,
        converged,
    };

    if kkt_satisfied(&g_x, &x, lambda, eps) {
        return Ok(report(x, &g_x, f_x, 0, true));
    }
    if lip <= 0.0 {
        // A == 0: the minimiser is x = 0.
        let zero = vec![0.0; n];
        let g = op.apply_t(prob.y);
        let f = dot(prob.y, prob.y);
        let ok = kkt_satisfied(&g, &zero, lambda, eps);
        return Ok(report(zero, &g, f, 0, ok));
    }

    let step = 1.0 / (2.0 * lip);
    let shrink = lambda * step;

    let mut w = x.clone();
    let mut r_w = r_x.clone();
    let mut g_w = g_x.clone();
    let mut t = 1.0f64;
    let mut z = vec![0.0; n];
    let mut az = vec![0.0; op.rows()];
    let mut g_z = vec![0.0; n];

    for k in 1..=opts.max_iter {
        for ((zi, wi), gi) in z.iter_mut().zip(&w).zip(&g_w) {
            *zi = soft_threshold(wi + 2.0 * step * gi, shrink);
        }
        op.apply_sparse_into(&z, &mut az);
        let r_z: Vec<f64> = prob.y.iter().zip(&az).map(|(yi, ai)| yi - ai).collect();
        op.apply_t_into(&r_z, &mut g_z);
        let f_z = dot(&r_z, &r_z) + lambda * l1(&z);

        let take_z = !opts.monotone || f_z <= f_x;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let a = t / t_next;
        let b = (t - 1.0) / t_next;

        if take_z {
            // w = z + b (z - x_prev)
            combine(&mut w, &z, &z, &x, a, b);
            combine(&mut r_w, &r_z, &r_z, &r_x, a, b);
            combine(&mut g_w, &g_z, &g_z, &g_x, a, b);
            x.copy_from_slice(&z);
            r_x = r_z;
            g_x.copy_from_slice(&g_z);
            f_x = f_z;
        } else {
            // w = x + a (z - x)
            combine(&mut w, &x, &z, &x, a, 0.0);
            combine(&mut r_w, &r_x, &r_z, &r_x, a, 0.0);
            combine(&mut g_w, &g_x, &g_z, &g_x, a, 0.0);
        }
        t = t_next;

        if kkt_satisfied(&g_x, &x, lambda, eps) {
            return Ok(report(x, &g_x, f_x, k, true));
        }
    }
    Ok(report(x, &g_x, f_x, opts.max_iter, false))
}

/// `out = new + a (z - new) + b (new - old)`; `out` may alias none of the inputs.
fn combine(out: &mut [f64], new: &[f64], z: &[f64], old: &[f64], a: f64, b: f64) {
    for (((o, &nv), &zv), &ov) in out.iter_mut().zip(new).zip(z).zip(old) {
        *o = nv + a * (zv - nv) + b * (nv - ov);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpReport {
    pub x: DenseVector,
    /// Selected columns in order of selection.
    pub support: Vec<usize>,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Orthogonal matching pursuit: pick the column with the largest absolute
/// normalised correlation with the residual, refit on all selected columns,
/// stop once `||r|| <= gamma` or `max_atoms` columns are in use.
pub fn omp<A: LinearOperator + ?Sized>(
    op: &A,
    y: &[f64],
    max_atoms: usize,
    gamma: f64,
) -> Result<OmpReport> {
    let (m, n) = (op.rows(), op.cols());
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            what: "measurement length",
            expected: m,
            got: y.len(),
        });
    }
    if max_atoms >= m {
        return Err(Error::config(format!(
            "OMP needs max_atoms < m = {m}, got {max_atoms}"
        )));
    }
    let norms: Vec<f64> = (0..n).map(|j| norm2(&op.column(j))).collect();

    let mut support: Vec<usize> = Vec::new();
    let mut columns: Vec<DenseVector> = Vec::new();
    let mut selected = vec![false; n];
    let mut coeffs: DenseVector = Vec::new();
    let mut r = y.to_vec();
    let mut r_norm = norm2(&r);

    while r_norm > gamma && support.len() < max_atoms {
        let corr = op.apply_t(&r);
        let best = (0..n)
            .filter(|&j| !selected[j] && norms[j] > 0.0)
            .map(|j| (j, corr[j].abs() / norms[j]))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        let Some((j, score)) = best else { break };
        if score == 0.0 {
            break;
        }
        selected[j] = true;
        support.push(j);
        columns.push(op.column(j));

        let a_s = DenseMatrix::from_columns(&columns)?;
        coeffs = gram_solve(&a_s, y)?;
        let fit = a_s.apply(&coeffs);
        for ((ri, yi), fi) in r.iter_mut().zip(y).zip(&fit) {
            *ri = yi - fi;
        }
        r_norm = norm2(&r);
    }

    let mut x = vec![0.0; n];
    for (&j, &c) in support.iter().zip(&coeffs) {
        x[j] = c;
    }
    Ok(OmpReport {
        x,
        iterations: support.len(),
        support,
        residual_norm: r_norm,
    })
}

/// Least squares restricted to `support`, zero elsewhere.
pub fn lse_on_support<A: LinearOperator + ?Sized>(
    op: &A,
    y: &[f64],
    support: &[usize],
) -> Result<DenseVector> {
    let (m, n) = (op.rows(), op.cols());
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            what: "measurement length",
            expected: m,
            got: y.len(),
        });
    }
    let mut x = vec![0.0; n];
    if support.is_empty() {
        return Ok(x);
    }
    if support.len() >= m {
        return Err(Error::config(format!(
            "support of size {} does not give an overdetermined system with m = {m}",
            support.len()
        )));
    }
    if let Some(&bad) = support.iter().find(|&&j| j >= n) {
        return Err(Error::OutOfRange {
            index: bad,
            limit: n,
        });
    }
    let columns: Vec<DenseVector> = support.iter().map(|&j| op.column(j)).collect();
    let coeffs = gram_solve(&DenseMatrix::from_columns(&columns)?, y)?;
    for (&j, c) in support.iter().zip(coeffs) {
        x[j] = c;
    }
    Ok(x)
}
