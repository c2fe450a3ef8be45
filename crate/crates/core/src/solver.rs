//! Constrained maximum likelihood.
//!
//! The fit is always computed under the sum constraint `1ᵀβ = 0` by Newton's
//! method on the reduced coordinates `β = (θ, −1ᵀθ)`. Any other admissible
//! constraint `αᵀβ = 0` with `1ᵀα ≠ 0` is reached by shifting along `1`,
//! which leaves every pairwise difference and the likelihood unchanged.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::likelihood::{self, LikelihoodError, ScoreVector};
use crate::pairdata::{ComparisonData, ConnectivityReport};

/// `|1ᵀα| ≤ DEGENERATE_RTOL · ‖α‖₁` is treated as non-identifiable.
pub const DEGENERATE_RTOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("comparison graph is not strongly connected; the MLE does not exist or is not unique")]
    NotConnected(ConnectivityReport),
    #[error("no convergence after {iterations} iterations (gradient sup-norm {grad_norm:e})")]
    MaxIterations { iterations: usize, grad_norm: f64 },
    #[error("line search made no progress at iteration {iteration} (gradient sup-norm {grad_norm:e})")]
    LineSearchFailed { iteration: usize, grad_norm: f64 },
    #[error("reduced Hessian is not negative definite")]
    SingularHessian,
    #[error("constraint is non-identifiable: 1ᵀα = {ones_dot:e}")]
    DegenerateConstraint { ones_dot: f64 },
    #[error("constraint vector is zero")]
    ZeroConstraint,
    #[error("constraint vector has non-finite entries")]
    NonFiniteConstraint,
    #[error("expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("strength w[{0}] is not a positive finite number")]
    NonPositiveW(usize),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
}

/// Identification hyperplane `αᵀβ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    alpha: DVector<f64>,
}

impl Constraint {
    pub fn new(alpha: DVector<f64>) -> Result<Self, SolverError> {
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(SolverError::NonFiniteConstraint);
        }
        if alpha.iter().all(|&a| a == 0.0) {
            return Err(SolverError::ZeroConstraint);
        }
        Ok(Self { alpha })
    }

    pub fn from_vec(alpha: Vec<f64>) -> Result<Self, SolverError> {
        Self::new(DVector::from_vec(alpha))
    }

    /// `α = 1`.
    pub fn sum(n: usize) -> Self {
        Self {
            alpha: DVector::from_element(n, 1.0),
        }
    }

    /// `α = e_i`: object `i` is pinned at zero.
    pub fn reference(n: usize, i: usize) -> Self {
        assert!(i < n, "reference index {i} out of range for {n} objects");
        let mut alpha = DVector::zeros(n);
        alpha[i] = 1.0;
        Self { alpha }
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// `1ᵀα`.
    pub fn ones_dot(&self) -> f64 {
        self.alpha.sum()
    }

    pub fn check_identifiable(&self) -> Result<f64, SolverError> {
        let s = self.ones_dot();
        if s.abs() <= DEGENERATE_RTOL * self.alpha.lp_norm(1) {
            return Err(SolverError::DegenerateConstraint { ones_dot: s });
        }
        Ok(s)
    }

    /// Whether `α` is a multiple of `1` (up to a relative tolerance).
    pub fn is_sum_like(&self) -> bool {
        let mean = self.alpha.mean();
        let scale = self.alpha.amax();
        mean != 0.0 && self.alpha.iter().all(|a| (a - mean).abs() <= 1e-12 * scale)
    }

    /// `(I − 1αᵀ/(1ᵀα))`, the oblique projector onto the hyperplane along `1`.
    pub fn projector(&self) -> Result<DMatrix<f64>, SolverError> {
        let s = self.check_identifiable()?;
        let n = self.len();
        Ok(DMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - self.alpha[j] / s
        }))
    }

    fn check_len(&self, n: usize) -> Result<(), SolverError> {
        if self.len() != n {
            return Err(SolverError::DimensionMismatch {
                expected: n,
                got: self.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Stop once the gradient sup-norm is at most this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta_hat: ScoreVector,
    pub constraint: Constraint,
    pub loglik: f64,
    pub iterations: usize,
    /// Sup-norm of `∇ℓ` at the solution. The maximiser is a stationary point
    /// of the translation-invariant likelihood, so this bounds the violation
    /// of the first-order condition for every constraint.
    pub grad_norm: f64,
    pub converged: bool,
}

/// Maximises the likelihood on `{β : 1ᵀβ = 0}` starting from `β = 0`.
pub fn fit_sum_constraint(data: &ComparisonData, opts: &FitOptions) -> Result<FitResult, SolverError> {
    fit_sum_constraint_from(data, &DVector::zeros(data.n()), opts)
}

/// As [`fit_sum_constraint`], starting from `start` (centred first).
pub fn fit_sum_constraint_from(
    data: &ComparisonData,
    start: &DVector<f64>,
    opts: &FitOptions,
) -> Result<FitResult, SolverError> {
    let n = data.n();
    if start.len() != n {
        return Err(SolverError::DimensionMismatch {
            expected: n,
            got: start.len(),
        });
    }
    let report = data.check_connectivity();
    if !report.strongly_connected {
        return Err(SolverError::NotConnected(report));
    }

    let mut beta = center(start.clone());
    let mut ll = likelihood::log_likelihood(&beta, data)?;
    for iter in 0..=opts.max_iter {
        let g = likelihood::gradient(&beta, data)?;
        let grad_norm = g.amax();
        if grad_norm <= opts.tol {
            return Ok(FitResult {
                beta_hat: ScoreVector::new(beta)?,
                constraint: Constraint::sum(n),
                loglik: ll,
                iterations: iter,
                grad_norm,
                converged: true,
            });
        }
        if iter == opts.max_iter {
            return Err(SolverError::MaxIterations {
                iterations: iter,
                grad_norm,
            });
        }

        let h = likelihood::hessian(&beta, data)?;
        let step = reduced_newton_step(&g, &h)?;
        let slope = g.dot(&step);

        // Armijo with step halving; the slack absorbs rounding in ℓ once the
        // Newton decrement is below machine precision.
        let slack = 8.0 * f64::EPSILON * ll.abs();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &beta + &step * t;
            let trial_ll = likelihood::log_likelihood(&trial, data)?;
            if trial_ll >= ll + 1e-4 * t * slope - slack {
                accepted = Some(trial);
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some(trial) => {
                beta = center(trial);
                ll = likelihood::log_likelihood(&beta, data)?;
            }
            None => {
                return Err(SolverError::LineSearchFailed {
                    iteration: iter,
                    grad_norm,
                })
            }
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// Newton ascent direction in β-space, restricted to `1ᵀΔ = 0`.
fn reduced_newton_step(g: &DVector<f64>, h: &DMatrix<f64>) -> Result<DVector<f64>, SolverError> {
    let n = g.len();
    let m = n - 1;
    let last = m;
    let r = DVector::from_fn(m, |k, _| g[k] - g[last]);
    let neg_reduced = DMatrix::from_fn(m, m, |k, l| {
        -(h[(k, l)] - h[(k, last)] - h[(last, l)] + h[(last, last)])
    });
    let delta = neg_reduced
        .cholesky()
        .ok_or(SolverError::SingularHessian)?
        .solve(&r);
    let mut step = DVector::zeros(n);
    step.rows_mut(0, m).copy_from(&delta);
    step[last] = -delta.sum();
    Ok(step)
}

fn center(mut beta: DVector<f64>) -> DVector<f64> {
    let mean = beta.mean();
    beta.add_scalar_mut(-mean);
    beta
}

/// Maximiser under `αᵀβ = 0`: the sum-constrained fit shifted by
/// `γ̂ = (I − 1αᵀ/(1ᵀα)) β̂`.
pub fn fit_with_constraint(
    data: &ComparisonData,
    constraint: &Constraint,
    opts: &FitOptions,
) -> Result<FitResult, SolverError> {
    constraint.check_len(data.n())?;
    constraint.check_identifiable()?;
    let sum_fit = fit_sum_constraint(data, opts)?;
    reconstrain(&sum_fit, data, constraint)
}

/// Moves an existing fit onto another admissible constraint.
pub fn reconstrain(
    fit: &FitResult,
    data: &ComparisonData,
    constraint: &Constraint,
) -> Result<FitResult, SolverError> {
    constraint.check_len(data.n())?;
    let gamma = shift_to_constraint(&fit.beta_hat, constraint)?;
    let loglik = likelihood::log_likelihood(&gamma, data)?;
    let grad_norm = likelihood::gradient(&gamma, data)?.amax();
    Ok(FitResult {
        beta_hat: ScoreVector::new(gamma)?,
        constraint: constraint.clone(),
        loglik,
        iterations: fit.iterations,
        grad_norm,
        converged: fit.converged,
    })
}

/// `β − (αᵀβ / 1ᵀα) 1`.
pub fn shift_to_constraint(beta: &DVector<f64>, constraint: &Constraint) -> Result<DVector<f64>, SolverError> {
    constraint.check_len(beta.len())?;
    let s = constraint.check_identifiable()?;
    Ok(beta.add_scalar(-constraint.alpha().dot(beta) / s))
}

/// `γ − (1ᵀγ / n) 1`, the inverse of [`shift_to_constraint`] on the hyperplane.
pub fn to_sum_constraint(gamma: &DVector<f64>) -> DVector<f64> {
    center(gamma.clone())
}

/// `f_α(w) = log w − (αᵀ log w / 1ᵀα) 1`.
pub fn beta_from_w(w: &DVector<f64>, constraint: &Constraint) -> Result<ScoreVector, SolverError> {
    constraint.check_len(w.len())?;
    if let Some(i) = w.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(SolverError::NonPositiveW(i));
    }
    let s = constraint.check_identifiable()?;
    let log_w = w.map(f64::ln);
    let shift = constraint.alpha().dot(&log_w) / s;
    Ok(ScoreVector::new(log_w.add_scalar(-shift))?)
}

/// Softmax of β: positive strengths summing to one.
pub fn w_from_beta(beta: &DVector<f64>) -> DVector<f64> {
    let max = beta.max();
    let e = beta.map(|b| (b - max).exp());
    let total = e.sum();
    e / total
}
