//! First-order Riemannian minimization over orthonormal frames.
//!
//! Points are `n × m` matrices with `UᵀU = I`. Tangent vectors are
//! represented in the horizontal space `{ξ : Uᵀξ = 0}` via the projection
//! `(I − UUᵀ)`, which is the right geometry for costs invariant under
//! `U → UQ`. Steps are taken with the QR retraction and directions are
//! carried between iterates by re-projection.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inner, orthonormality_error, qr_positive};
use crate::rng;

const FEASIBILITY_TOL: f64 = 1e-10;
const REORTHONORMALIZE_TOL: f64 = 1e-6;

/// An `n × m` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalFrame(DMatrix<f64>);

impl OrthonormalFrame {
    /// Accepts `matrix` if it is orthonormal to 1e-10, re-orthonormalizes it
    /// if it is off by at most 1e-6, and rejects it otherwise.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (n, m) = matrix.shape();
        if m == 0 || m > n {
            return Err(Error::InvalidArgument(format!("frame shape {n}x{m} needs 1 <= m <= n")));
        }
        let err = orthonormality_error(&matrix);
        if err <= FEASIBILITY_TOL {
            Ok(Self(matrix))
        } else if err <= REORTHONORMALIZE_TOL {
            qr_positive(&matrix)
                .map(Self)
                .ok_or_else(|| Error::Numerical("re-orthonormalization failed".into()))
        } else {
            Err(Error::InvalidArgument(format!("matrix is not orthonormal (‖UᵀU − I‖ = {err:.3e})")))
        }
    }

    /// QR-orthonormalized matrix of seeded standard normals.
    pub fn random(n: usize, m: usize, seed: u64) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::InvalidArgument(format!("cannot draw a {n}x{m} frame: need 1 <= m <= n")));
        }
        let mut rng = rng::seeded(seed);
        loop {
            let g = DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(&mut rng));
            if let Some(q) = qr_positive(&g) {
                return Ok(Self(q));
            }
        }
    }

    /// First `m` columns of the identity.
    pub fn identity(n: usize, m: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, m))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn m(&self) -> usize {
        self.0.ncols()
    }

    pub fn feasibility_error(&self) -> f64 {
        orthonormality_error(&self.0)
    }
}

/// A horizontal tangent vector at some frame.
///
/// The base frame is not stored; operations that need it take it explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(DMatrix<f64>);

impl TangentVector {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn inner(&self, other: &TangentVector) -> f64 {
        inner(&self.0, &other.0)
    }

    /// `‖Uᵀξ‖_F` at the given frame.
    pub fn tangency_error(&self, base: &OrthonormalFrame) -> f64 {
        (base.matrix().transpose() * &self.0).norm()
    }

    fn scaled_add(&self, alpha: f64, other: &TangentVector, beta: f64) -> TangentVector {
        TangentVector(&self.0 * alpha + &other.0 * beta)
    }
}

/// `(I − UUᵀ) G`.
pub fn project_tangent(frame: &OrthonormalFrame, g: &DMatrix<f64>) -> Result<TangentVector> {
    let u = frame.matrix();
    if g.shape() != u.shape() {
        return Err(Error::mismatch(
            format!("{}x{}", u.nrows(), u.ncols()),
            format!("{}x{}", g.nrows(), g.ncols()),
        ));
    }
    let coeffs = u.transpose() * g;
    Ok(TangentVector(g - u * coeffs))
}

/// QR retraction `qf(U + tξ)`. Fails if `U + tξ` is rank deficient.
pub fn retract(frame: &OrthonormalFrame, xi: &TangentVector, t: f64) -> Result<OrthonormalFrame> {
    if xi.0.shape() != frame.0.shape() {
        return Err(Error::mismatch(
            format!("{}x{}", frame.n(), frame.m()),
            format!("{}x{}", xi.0.nrows(), xi.0.ncols()),
        ));
    }
    if t == 0.0 {
        return Ok(frame.clone());
    }
    let moved = &frame.0 + &xi.0 * t;
    qr_positive(&moved)
        .map(OrthonormalFrame)
        .ok_or_else(|| Error::Numerical("retraction hit a rank-deficient point".into()))
}

/// Projection-based vector transport onto the tangent space at `to`.
pub fn transport(to: &OrthonormalFrame, xi: &TangentVector) -> Result<TangentVector> {
    project_tangent(to, &xi.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CgOptions {
    pub max_iters: usize,
    /// Stop once the Riemannian gradient's Frobenius norm drops below this.
    pub grad_tol: f64,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    /// Trial step of the first line search. Later searches start from the
    /// step that would repeat the previous iteration's decrease.
    pub initial_step: f64,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-6,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            max_backtracks: 50,
            initial_step: 1.0,
        }
    }
}

impl CgOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !positive(self.grad_tol) || !positive(self.initial_step) {
            return Err(Error::InvalidArgument("grad_tol and initial_step must be positive".into()));
        }
        if !unit(self.armijo_c1) || !unit(self.backtrack_factor) {
            return Err(Error::InvalidArgument("armijo_c1 and backtrack_factor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GradTol,
    MaxIters,
    LineSearchFail,
}

/// State at one iterate; iteration 0 is the starting frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: f64,
    pub grad_norm: f64,
    /// Accepted step that produced this iterate (0 for the start).
    pub step: f64,
    pub feasibility: f64,
    pub tangency: f64,
}

#[derive(Debug, Clone)]
pub struct OptResult {
    pub frame: OrthonormalFrame,
    pub cost: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub cost_trace: Vec<f64>,
    pub termination: Termination,
    pub history: Vec<IterationRecord>,
}

impl OptResult {
    /// `iter,cost,grad_norm,step` lines.
    pub fn iteration_log(&self) -> String {
        let mut out = String::from("iter,cost,grad_norm,step\n");
        for r in &self.history {
            let _ = writeln!(out, "{},{:e},{:e},{:e}", r.iter, r.cost, r.grad_norm, r.step);
        }
        out
    }
}

fn finite_cost(cost: f64, iteration: usize) -> Result<f64> {
    if cost.is_finite() {
        Ok(cost)
    } else {
        Err(Error::NonFinite { what: "cost", iteration })
    }
}

fn riemannian_gradient<G>(egrad: &G, frame: &OrthonormalFrame, iteration: usize) -> Result<TangentVector>
where
    G: Fn(&OrthonormalFrame) -> DMatrix<f64>,
{
    let e = egrad(frame);
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "gradient", iteration });
    }
    project_tangent(frame, &e)
}

/// Polak–Ribière+ conjugate gradient with Armijo backtracking.
///
/// `egrad` returns the Euclidean gradient of `cost` at a frame; it is
/// projected to the horizontal space internally.
pub fn minimize_cg<C, G>(cost: C, egrad: G, start: OrthonormalFrame, opts: &CgOptions) -> Result<OptResult>
where
    C: Fn(&OrthonormalFrame) -> f64,
    G: Fn(&OrthonormalFrame) -> DMatrix<f64>,
{
    opts.validate()?;
    let mut frame = start;
    let mut f = finite_cost(cost(&frame), 0)?;
    let mut grad = riemannian_gradient(&egrad, &frame, 0)?;
    let mut grad_norm = grad.norm();
    let mut dir = grad.scaled_add(-1.0, &grad, 0.0);
    let mut history = vec![IterationRecord {
        iter: 0,
        cost: f,
        grad_norm,
        step: 0.0,
        feasibility: frame.feasibility_error(),
        tangency: grad.tangency_error(&frame),
    }];
    let mut cost_trace = vec![f];
    let mut last_decrease: Option<f64> = None;
    let mut iterations = 0;

    let termination = loop {
        if grad_norm <= opts.grad_tol {
            break Termination::GradTol;
        }
        if iterations >= opts.max_iters {
            break Termination::MaxIters;
        }
        let mut slope = grad.inner(&dir);
        if !(slope < 0.0) {
            dir = grad.scaled_add(-1.0, &grad, 0.0);
            slope = -grad_norm * grad_norm;
        }

        // start where a quadratic model would repeat the last decrease
        let mut t = match last_decrease {
            Some(df) if df > 0.0 => 2.0 * df / -slope,
            _ => opts.initial_step,
        };
        if !t.is_finite() || t <= 0.0 {
            t = opts.initial_step;
        }
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            if let Ok(candidate) = retract(&frame, &dir, t) {
                let fc = cost(&candidate);
                if fc.is_finite() && fc <= f + opts.armijo_c1 * t * slope && fc < f {
                    accepted = Some((candidate, fc));
                    break;
                }
            }
            t *= opts.backtrack_factor;
        }
        let Some((mut next, mut f_next)) = accepted else {
            break Termination::LineSearchFail;
        };
        // one interpolation step toward the minimizer of the quadratic through
        // f(0), the slope and f(t); kept only if it does better
        let curvature = f_next - f - slope * t;
        if curvature > 0.0 {
            let tq = -slope * t * t / (2.0 * curvature);
            if tq.is_finite() && tq > 0.0 && (tq - t).abs() > 1e-3 * t {
                if let Ok(candidate) = retract(&frame, &dir, tq) {
                    let fq = cost(&candidate);
                    if fq.is_finite() && fq < f_next && fq <= f + opts.armijo_c1 * tq * slope {
                        next = candidate;
                        f_next = fq;
                        t = tq;
                    }
                }
            }
        }

        iterations += 1;
        let next_grad = riemannian_gradient(&egrad, &next, iterations)?;
        let old_grad = transport(&next, &grad)?;
        let old_dir = transport(&next, &dir)?;
        let denom = grad_norm * grad_norm;
        let beta = (next_grad.inner(&next_grad) - next_grad.inner(&old_grad)) / denom;
        let beta = if beta.is_finite() { beta.max(0.0) } else { 0.0 };
        dir = next_grad.scaled_add(-1.0, &old_dir, beta);

        last_decrease = Some(f - f_next);
        frame = next;
        f = f_next;
        grad = next_grad;
        grad_norm = grad.norm();
        cost_trace.push(f);
        history.push(IterationRecord {
            iter: iterations,
            cost: f,
            grad_norm,
            step: t,
            feasibility: frame.feasibility_error(),
            tangency: grad.tangency_error(&frame),
        });
    };

    Ok(OptResult {
        frame,
        cost: f,
        grad_norm,
        iterations,
        cost_trace,
        termination,
        history,
    })
}
