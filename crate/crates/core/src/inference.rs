//! Variance estimates for fitted scores.
//!
//! Under the sum constraint the plug-in covariance is `−H†(β̂)`, the
//! Moore-Penrose pseudoinverse of the negative Hessian. Under any other
//! admissible constraint it is obtained by pushing that matrix through the
//! projector `T = I − 1αᵀ/(1ᵀα)`, which yields a reflexive generalized
//! inverse of `−H` that is no longer symmetric-product (Penrose 3/4) and has
//! strictly larger trace unless `α ∝ 1`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::likelihood::{self, LikelihoodError};
use crate::pairdata::ComparisonData;
use crate::solver::{Constraint, FitResult, SolverError};

/// Relative tolerance for symmetry and `M·1 = 0` on pseudoinverse input.
const INPUT_RTOL: f64 = 1e-10;
/// Eigenvalues below this fraction of the largest are treated as zero.
pub const RANK_RTOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("M·1 is not zero (sup-norm {0:e})")]
    KernelNotOnes(f64),
    #[error("kernel is larger than span(1) (condition estimate {0:e}); data are likely disconnected")]
    KernelTooLarge(f64),
    #[error("expected a variance estimate under the sum constraint")]
    NotSumConstraint,
    #[error("fitted scores do not satisfy the variance estimate's constraint")]
    ConstraintMismatch,
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("interval multiplier must be finite and non-negative, got {0}")]
    InvalidMultiplier(f64),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
}

/// Estimated covariance of fitted scores under a given constraint.
#[derive(Debug, Clone)]
pub struct VarianceEstimate {
    pub cov: DMatrix<f64>,
    pub constraint: Constraint,
    pub se: DVector<f64>,
}

impl VarianceEstimate {
    fn new(cov: DMatrix<f64>, constraint: Constraint) -> Self {
        let cov = symmetrize(cov);
        let se = cov.diagonal().map(|v| v.max(0.0).sqrt());
        Self { cov, constraint, se }
    }

    /// Sum of the score variances.
    pub fn total_variance(&self) -> f64 {
        self.cov.trace()
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn ones(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0)
}

fn check_square(m: &DMatrix<f64>) -> Result<usize, InferenceError> {
    if !m.is_square() {
        return Err(InferenceError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Moore-Penrose pseudoinverse of a symmetric `M` whose kernel is `span(1)`.
///
/// Uses the rank repair `M† = (M + (s/n)·11ᵀ)⁻¹ − 11ᵀ/(n·s)`, exact when the
/// kernel is `span(1)`. The scale `s` is the RMS of the non-zero eigenvalues
/// (signed like the trace), so the repaired matrix is as well conditioned as
/// `M` restricted to `1⊥`; an ill-conditioned repair means a second
/// near-null direction.
pub fn pseudoinverse_known_kernel(m: &DMatrix<f64>) -> Result<DMatrix<f64>, InferenceError> {
    let n = check_square(m)?;
    let scale = m.amax();
    let asym = (m - m.transpose()).amax();
    if asym > INPUT_RTOL * scale {
        return Err(InferenceError::NotSymmetric(asym));
    }
    let row_sums = m * ones(n);
    if row_sums.amax() > INPUT_RTOL * scale * n as f64 {
        return Err(InferenceError::KernelNotOnes(row_sums.amax()));
    }
    if n == 1 {
        return Ok(DMatrix::zeros(1, 1));
    }
    if scale == 0.0 {
        return Err(InferenceError::KernelTooLarge(f64::INFINITY));
    }

    let sign = if m.trace() < 0.0 { -1.0 } else { 1.0 };
    let s = sign * m.norm() / ((n - 1) as f64).sqrt();
    let repaired = m.add_scalar(s / n as f64);
    let inv = repaired
        .clone()
        .try_inverse()
        .ok_or(InferenceError::KernelTooLarge(f64::INFINITY))?;
    let condition = norm1(&repaired) * norm1(&inv);
    if !condition.is_finite() || condition > 1.0 / RANK_RTOL * n as f64 {
        return Err(InferenceError::KernelTooLarge(condition));
    }
    let pinv = inv.add_scalar(-1.0 / (n as f64 * s));
    Ok(double_center(symmetrize(pinv)))
}

/// Largest absolute column sum.
fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Removes the residual `1` component left by rounding: `(I − J/n) X (I − J/n)`.
fn double_center(x: DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let row_means: Vec<f64> = x.row_iter().map(|r| r.mean()).collect();
    let col_means: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
    let grand = x.mean();
    DMatrix::from_fn(n, n, |i, j| x[(i, j)] - row_means[i] - col_means[j] + grand)
}

/// Pseudoinverse of a symmetric matrix by eigendecomposition, inverting
/// eigenvalues above `rel_threshold · max|λ|`. Returns the matrix and its rank.
pub fn pseudoinverse_eigen(m: &DMatrix<f64>, rel_threshold: f64) -> Result<(DMatrix<f64>, usize), InferenceError> {
    let n = check_square(m)?;
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.amax();
    let mut out = DMatrix::zeros(n, n);
    let mut rank = 0;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > rel_threshold * max {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / lambda;
            rank += 1;
        }
    }
    Ok((out, rank))
}

/// `−H(β̂)†`, the plug-in covariance under the sum constraint.
///
/// The Hessian depends only on pairwise differences, so a fit under any
/// constraint yields the same matrix; the result is reported for `α = 1`.
pub fn variance_sum_constraint(fit: &FitResult, data: &ComparisonData) -> Result<VarianceEstimate, InferenceError> {
    let n = data.n();
    if fit.beta_hat.len() != n {
        return Err(InferenceError::DimensionMismatch {
            expected: n,
            got: fit.beta_hat.len(),
        });
    }
    let neg_h = -likelihood::hessian(&fit.beta_hat, data)?;
    let cov = pseudoinverse_known_kernel(&neg_h)?;
    Ok(VarianceEstimate::new(cov, Constraint::sum(n)))
}

/// `T · cov_β · Tᵀ` with `T = I − 1αᵀ/(1ᵀα)`.
pub fn variance_general_constraint(
    var_sum: &VarianceEstimate,
    constraint: &Constraint,
) -> Result<VarianceEstimate, InferenceError> {
    if !var_sum.constraint.is_sum_like() {
        return Err(InferenceError::NotSumConstraint);
    }
    let n = var_sum.cov.nrows();
    if constraint.len() != n {
        return Err(InferenceError::DimensionMismatch {
            expected: n,
            got: constraint.len(),
        });
    }
    let t = constraint.projector()?;
    let cov = &t * &var_sum.cov * t.transpose();
    Ok(VarianceEstimate::new(cov, constraint.clone()))
}

/// Relative residuals of the four Penrose conditions for `X` against `A = −M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PenroseResiduals {
    /// `‖AXA − A‖ / ‖A‖`
    pub axa: f64,
    /// `‖XAX − X‖ / ‖X‖`
    pub xax: f64,
    /// `‖(AX)ᵀ − AX‖ / ‖AX‖`
    pub ax_symmetric: f64,
    /// `‖(XA)ᵀ − XA‖ / ‖XA‖`
    pub xa_symmetric: f64,
}

impl PenroseResiduals {
    pub fn is_reflexive(&self, tol: f64) -> bool {
        self.axa <= tol && self.xax <= tol
    }

    pub fn is_pseudoinverse(&self, tol: f64) -> bool {
        self.is_reflexive(tol) && self.ax_symmetric <= tol && self.xa_symmetric <= tol
    }
}

fn rel(residual: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        if residual == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        residual / reference
    }
}

/// Frobenius-norm residuals; `M` is the Hessian-like matrix, `A = −M`.
pub fn penrose_residuals(candidate: &DMatrix<f64>, m: &DMatrix<f64>) -> PenroseResiduals {
    let a = -m;
    let x = candidate;
    let ax = &a * x;
    let xa = x * &a;
    PenroseResiduals {
        axa: rel((&ax * &a - &a).norm(), a.norm()),
        xax: rel((&xa * x - x).norm(), x.norm()),
        ax_symmetric: rel((ax.transpose() - &ax).norm(), ax.norm()),
        xa_symmetric: rel((xa.transpose() - &xa).norm(), xa.norm()),
    }
}

/// `AXA = A` and `XAX = X` (relative Frobenius tolerance) with `A = −M`.
pub fn check_reflexive_inverse(candidate: &DMatrix<f64>, m: &DMatrix<f64>, tol: f64) -> bool {
    if !candidate.is_square() || candidate.shape() != m.shape() {
        return false;
    }
    if candidate.iter().chain(m.iter()).any(|v| !v.is_finite()) {
        return false;
    }
    penrose_residuals(candidate, m).is_reflexive(tol)
}

/// Increase in total variance from using `α` instead of the sum constraint:
/// `trace(T cov_β Tᵀ) − trace(cov_β) = n · αᵀ cov_β α / (1ᵀα)²`.
///
/// The cross terms vanish because `cov_β 1 = 0`; the quadratic term is
/// `trace(1 (αᵀ cov_β α) 1ᵀ) = n · αᵀ cov_β α`.
pub fn trace_excess(var_sum: &VarianceEstimate, constraint: &Constraint) -> Result<f64, InferenceError> {
    let n = var_sum.cov.nrows();
    Ok(n as f64 * alpha_quadratic_form(var_sum, constraint)?)
}

/// `αᵀ cov_β α / (1ᵀα)²`, the variance of the shift `αᵀβ̂ / 1ᵀα` applied to
/// every score when moving from the sum constraint to `α`.
pub fn alpha_quadratic_form(var_sum: &VarianceEstimate, constraint: &Constraint) -> Result<f64, InferenceError> {
    if !var_sum.constraint.is_sum_like() {
        return Err(InferenceError::NotSumConstraint);
    }
    let n = var_sum.cov.nrows();
    if constraint.len() != n {
        return Err(InferenceError::DimensionMismatch {
            expected: n,
            got: constraint.len(),
        });
    }
    let s = constraint.check_identifiable()?;
    let alpha = constraint.alpha();
    Ok((alpha.transpose() * &var_sum.cov * alpha)[0] / (s * s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub center: f64,
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

/// `β̂_i ± multiplier · se_i`.
pub fn confidence_intervals(
    fit: &FitResult,
    var: &VarianceEstimate,
    multiplier: f64,
) -> Result<Vec<Interval>, InferenceError> {
    if !(multiplier.is_finite() && multiplier >= 0.0) {
        return Err(InferenceError::InvalidMultiplier(multiplier));
    }
    let n = var.se.len();
    if fit.beta_hat.len() != n {
        return Err(InferenceError::DimensionMismatch {
            expected: n,
            got: fit.beta_hat.len(),
        });
    }
    let alpha = var.constraint.alpha();
    let violation = alpha.dot(&fit.beta_hat).abs();
    if violation > 1e-8 * (1.0 + fit.beta_hat.norm()) * alpha.norm() {
        return Err(InferenceError::ConstraintMismatch);
    }
    Ok(fit
        .beta_hat
        .iter()
        .zip(var.se.iter())
        .map(|(&b, &se)| Interval {
            center: b,
            low: b - multiplier * se,
            high: b + multiplier * se,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{fit_sum_constraint, fit_with_constraint, FitOptions};

    fn two() -> ComparisonData {
        ComparisonData::from_unlabelled(vec![vec![0, 3], vec![1, 0]]).unwrap()
    }

    fn assert_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) {
        assert!((a - b).amax() <= tol, "{a} vs {b}");
    }

    #[test]
    fn two_by_two_pseudoinverse() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        let expected = DMatrix::from_row_slice(2, 2, &[-0.25, 0.25, 0.25, -0.25]);
        // Oracle: single non-zero eigenvalue −2 along (1, −1)/√2.
        let v = DVector::from_vec(vec![1.0, -1.0]) / 2f64.sqrt();
        let oracle = &v * v.transpose() / -2.0;
        assert_close(&oracle, &expected, 1e-15);
        let p = pseudoinverse_known_kernel(&m).unwrap();
        assert_close(&p, &expected, 1e-14);
        assert!((p * ones(2)).amax() < 1e-15);
    }

    #[test]
    fn pseudoinverse_input_errors() {
        let asym = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.5, -0.5]);
        assert!(matches!(pseudoinverse_known_kernel(&asym), Err(InferenceError::NotSymmetric(_))));
        let wrong_kernel = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!(matches!(pseudoinverse_known_kernel(&wrong_kernel), Err(InferenceError::KernelNotOnes(_))));
        // Two disconnected blocks: kernel is two-dimensional.
        let blocks = DMatrix::from_row_slice(
            4,
            4,
            &[1.0, -1.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0, -2.0, 0.0, 0.0, -2.0, 2.0],
        );
        assert!(matches!(pseudoinverse_known_kernel(&blocks), Err(InferenceError::KernelTooLarge(_))));
        assert!(matches!(
            pseudoinverse_known_kernel(&DMatrix::zeros(3, 3)),
            Err(InferenceError::KernelTooLarge(_))
        ));
        assert!(matches!(
            pseudoinverse_known_kernel(&DMatrix::zeros(2, 3)),
            Err(InferenceError::NotSquare { .. })
        ));
    }

    #[test]
    fn two_object_variance() {
        let d = two();
        let fit = fit_sum_constraint(&d, &FitOptions::default()).unwrap();
        let var = variance_sum_constraint(&fit, &d).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]) / 3.0;
        assert_close(&var.cov, &expected, 1e-12);
        assert!((var.se[0] - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);

        let refv = variance_general_constraint(&var, &Constraint::reference(2, 0)).unwrap();
        assert_eq!(refv.cov.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0]);
        assert_eq!(refv.cov.column(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0]);
        assert_eq!(refv.se[0], 0.0);

        // Explicit transform: T = [[0, 0], [-1, 1]] gives cov_γ = [[0, 0], [0, 4/3]].
        let expected_ref = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 4.0 / 3.0]);
        assert_close(&refv.cov, &expected_ref, 1e-12);
        let excess = trace_excess(&var, &Constraint::reference(2, 0)).unwrap();
        assert!((excess - 2.0 / 3.0).abs() < 1e-12);
        let quad = alpha_quadratic_form(&var, &Constraint::reference(2, 0)).unwrap();
        assert!((quad - 1.0 / 3.0).abs() < 1e-12);
        assert!((refv.total_variance() - 4.0 / 3.0).abs() < 1e-12);
        assert!((refv.total_variance() - var.total_variance() - excess).abs() < 1e-12);
        assert!(trace_excess(&var, &Constraint::sum(2)).unwrap().abs() < 1e-15);
    }

    #[test]
    fn sum_alpha_leaves_covariance() {
        let d = ComparisonData::from_unlabelled(vec![vec![0, 2, 1], vec![1, 0, 2], vec![2, 1, 0]]).unwrap();
        let fit = fit_sum_constraint(&d, &FitOptions::default()).unwrap();
        let var = variance_sum_constraint(&fit, &d).unwrap();
        let same = variance_general_constraint(&var, &Constraint::from_vec(vec![3.0; 3]).unwrap()).unwrap();
        assert_close(&same.cov, &var.cov, 1e-14);
    }

    #[test]
    fn reflexive_but_not_penrose_for_reference() {
        let d = ComparisonData::from_unlabelled(vec![vec![0, 2, 1], vec![1, 0, 2], vec![2, 1, 0]]).unwrap();
        let fit = fit_sum_constraint(&d, &FitOptions::default()).unwrap();
        let h = likelihood::hessian(&fit.beta_hat, &d).unwrap();
        let var = variance_sum_constraint(&fit, &d).unwrap();
        assert!(check_reflexive_inverse(&var.cov, &h, 1e-10));
        assert!(penrose_residuals(&var.cov, &h).is_pseudoinverse(1e-10));

        let refv = variance_general_constraint(&var, &Constraint::reference(3, 0)).unwrap();
        assert!(check_reflexive_inverse(&refv.cov, &h, 1e-10));
        let r = penrose_residuals(&refv.cov, &h);
        assert!(r.ax_symmetric > 1e-3 && r.xa_symmetric > 1e-3, "{r:?}");

        assert!(!check_reflexive_inverse(&DMatrix::zeros(3, 3), &h, 1e-8));
    }

    #[test]
    fn intervals() {
        let d = two();
        let fit = fit_sum_constraint(&d, &FitOptions::default()).unwrap();
        let var = variance_sum_constraint(&fit, &d).unwrap();
        let ci = confidence_intervals(&fit, &var, 2.0).unwrap();
        let half = 2.0 * (1.0f64 / 3.0).sqrt();
        assert!((ci[0].center - 0.549306).abs() < 1e-6);
        assert!((ci[0].width() / 2.0 - half).abs() < 1e-12);
        assert!((half - 1.154701).abs() < 1e-6);

        let zero = confidence_intervals(&fit, &var, 0.0).unwrap();
        assert!(zero.iter().all(|i| i.low == i.center && i.high == i.center));

        let rfit = fit_with_constraint(&d, &Constraint::reference(2, 0), &FitOptions::default()).unwrap();
        let rvar = variance_general_constraint(&var, &Constraint::reference(2, 0)).unwrap();
        let rci = confidence_intervals(&rfit, &rvar, 2.0).unwrap();
        assert_eq!((rci[0].low, rci[0].high), (0.0, 0.0));

        assert!(matches!(
            confidence_intervals(&fit, &rvar, 2.0),
            Err(InferenceError::ConstraintMismatch)
        ));
        assert!(matches!(
            confidence_intervals(&fit, &var, -1.0),
            Err(InferenceError::InvalidMultiplier(_))
        ));
    }
}
