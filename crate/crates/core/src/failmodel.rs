//! Exponential model of the design density conditioned on failure,
//! `p(θ | F) ∝ exp(-α - β·θ)`, fitted online from failed designs. Its log-gradient `-β`
//! drives the failure-probability penalty.

use crate::error::{Error, Result};
use crate::scalar::{dot, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct FailureDensityModel<T> {
    pub alpha: T,
    pub beta: Vec<T>,
    pub eta_f: T,
}

impl<T: Real> FailureDensityModel<T> {
    pub fn new(alpha: T, beta: Vec<T>, eta_f: T) -> Result<Self> {
        if !(eta_f > T::zero()) || !eta_f.is_finite() {
            return Err(Error::InvalidParameter(format!("eta_F must be positive, got {eta_f}")));
        }
        if !alpha.is_finite() || beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter("alpha and beta must be finite".into()));
        }
        if beta.is_empty() {
            return Err(Error::InvalidParameter("beta must match a nonempty design".into()));
        }
        Ok(Self { alpha, beta, eta_f })
    }

    /// Same initial value for α and every β component.
    pub fn uniform(dim: usize, init: T, eta_f: T) -> Result<Self> {
        Self::new(init, vec![init; dim], eta_f)
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    /// `-α - β·θ`.
    pub fn log_density(&self, theta: &[T]) -> T {
        -self.alpha - dot(&self.beta, theta)
    }

    fn term(&self, theta: &[T]) -> Result<T> {
        let x = self.log_density(theta);
        let limit = T::max_exponent();
        if x > limit || x.is_nan() {
            return Err(Error::Overflow {
                exponent: x.as_f64(),
                limit: limit.as_f64(),
            });
        }
        Ok(x.exp())
    }

    /// Normalization residual `q̂ = Σ_j e_j - 1` and its gradient
    /// `L̂ = (-Σ e_j, -Σ θ_1 e_j, …)` with respect to `(α, β)`.
    pub fn residual_and_score(&self, failed: &[Vec<T>]) -> Result<(T, Vec<T>)> {
        if failed.is_empty() {
            return Err(Error::InvalidParameter("at least one failed design is required".into()));
        }
        let mut q = -T::one();
        let mut score = vec![T::zero(); self.dim() + 1];
        for theta in failed {
            if theta.len() != self.dim() {
                return Err(Error::InvalidParameter(format!(
                    "design of length {} for a model of dimension {}",
                    theta.len(),
                    self.dim()
                )));
            }
            let e = self.term(theta)?;
            q += e;
            score[0] -= e;
            for (s, &t) in score[1..].iter_mut().zip(theta) {
                *s -= t * e;
            }
        }
        Ok((q, score))
    }

    /// One gradient step on `½ q̂²`. No change without failed designs.
    pub fn update(&mut self, failed: &[Vec<T>]) -> Result<()> {
        if failed.is_empty() {
            return Ok(());
        }
        let (q, score) = self.residual_and_score(failed)?;
        let alpha = self.alpha - self.eta_f * score[0] * q;
        let beta: Vec<T> = self
            .beta
            .iter()
            .zip(&score[1..])
            .map(|(&b, &s)| b - self.eta_f * s * q)
            .collect();
        if !alpha.is_finite() {
            return Err(Error::NonFinite {
                quantity: "alpha",
                iteration: 0,
                component: 0,
            });
        }
        if let Some(i) = beta.iter().position(|b| !b.is_finite()) {
            return Err(Error::NonFinite {
                quantity: "beta",
                iteration: 0,
                component: i,
            });
        }
        self.alpha = alpha;
        self.beta = beta;
        Ok(())
    }

    /// Failure penalty contribution to the stochastic gradient,
    /// `κ_F (ln p̂ - ln p_a)^+ ∇_θ ln p(θ|F) = -κ_F (ln p̂ - ln p_a)^+ β`.
    /// Zero when `p̂ <= p_a`, including `p̂ = 0`.
    pub fn penalty_gradient(&self, p_hat: T, p_a: T, kappa_f: T) -> Vec<T> {
        if !(p_hat > p_a) {
            return vec![T::zero(); self.dim()];
        }
        let excess = p_hat.ln() - p_a.ln();
        self.beta.iter().map(|&b| -kappa_f * excess * b).collect()
    }
}
