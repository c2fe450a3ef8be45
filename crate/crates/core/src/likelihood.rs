//! Log-likelihood, gradient and Hessian of the Bradley-Terry model in the
//! β-parameterization, `P(i beats j) = σ(β_i − β_j)`.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::pairdata::ComparisonData;

#[derive(Debug, Error, PartialEq)]
pub enum LikelihoodError {
    #[error("score vector has length {got}, data has {expected} objects")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("score {0} is not finite")]
    NonFinite(usize),
}

/// Log-strength scores. All entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(DVector<f64>);

impl ScoreVector {
    pub fn new(beta: DVector<f64>) -> Result<Self, LikelihoodError> {
        if let Some(i) = beta.iter().position(|b| !b.is_finite()) {
            return Err(LikelihoodError::NonFinite(i));
        }
        Ok(Self(beta))
    }

    pub fn from_vec(beta: Vec<f64>) -> Result<Self, LikelihoodError> {
        Self::new(DVector::from_vec(beta))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

impl Deref for ScoreVector {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log σ(t)` without underflow for large `|t|`.
#[inline]
pub fn log_sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        -(-t).exp().ln_1p()
    } else {
        t - t.exp().ln_1p()
    }
}

fn check_dims(beta: &DVector<f64>, data: &ComparisonData) -> Result<usize, LikelihoodError> {
    let n = data.n();
    if beta.len() != n {
        return Err(LikelihoodError::DimensionMismatch {
            expected: n,
            got: beta.len(),
        });
    }
    Ok(n)
}

/// `Σ_{i≠j} W_ij log σ(β_i − β_j)`.
pub fn log_likelihood(beta: &DVector<f64>, data: &ComparisonData) -> Result<f64, LikelihoodError> {
    let n = check_dims(beta, data)?;
    let mut ll = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = beta[i] - beta[j];
            let (wij, wji) = (data.wins(i, j), data.wins(j, i));
            if wij > 0 {
                ll += wij as f64 * log_sigmoid(d);
            }
            if wji > 0 {
                ll += wji as f64 * log_sigmoid(-d);
            }
        }
    }
    Ok(ll)
}

/// `∂ℓ/∂β_i = Σ_j [W_ij σ(β_j − β_i) − W_ji σ(β_i − β_j)]`.
///
/// Each pair contributes equal and opposite amounts, so the entries sum to zero.
pub fn gradient(beta: &DVector<f64>, data: &ComparisonData) -> Result<DVector<f64>, LikelihoodError> {
    let n = check_dims(beta, data)?;
    let mut g = DVector::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = data.comparisons(i, j);
            if v == 0 {
                continue;
            }
            let p = sigmoid(beta[i] - beta[j]);
            let q = sigmoid(beta[j] - beta[i]);
            let flow = data.wins(i, j) as f64 * q - data.wins(j, i) as f64 * p;
            g[i] += flow;
            g[j] -= flow;
        }
    }
    Ok(g)
}

/// `−Σ_{i<j} V_ij σ(β_i−β_j) σ(β_j−β_i) (e_i − e_j)(e_i − e_j)ᵀ`, assembled densely.
pub fn hessian(beta: &DVector<f64>, data: &ComparisonData) -> Result<DMatrix<f64>, LikelihoodError> {
    let n = check_dims(beta, data)?;
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = data.comparisons(i, j);
            if v == 0 {
                continue;
            }
            let c = v as f64 * sigmoid(beta[i] - beta[j]) * sigmoid(beta[j] - beta[i]);
            h[(i, i)] -= c;
            h[(j, j)] -= c;
            h[(i, j)] += c;
            h[(j, i)] += c;
        }
    }
    Ok(h)
}
