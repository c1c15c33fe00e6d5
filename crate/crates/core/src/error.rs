use thiserror::Error;

/// Errors raised by the estimators, the surrogate fit, the finite-element kernel and the
/// optimization loop. Numerical payloads are reported in `f64` regardless of the scalar type
/// the computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("value outside the distribution support: {0}")]
    Domain(String),

    #[error(
        "subset simulation exceeded {levels} levels with threshold still at {threshold} \
         (partial estimate {partial:e})"
    )]
    SubsetStalled {
        levels: usize,
        threshold: f64,
        partial: f64,
    },

    #[error("least-squares design matrix is rank deficient (condition estimate {condition:e})")]
    RankDeficient { condition: f64 },

    #[error("system matrix is not positive definite: pivot {pivot:e} at equation {equation}")]
    NotPositiveDefinite { equation: usize, pivot: f64 },

    #[error("failure-density exponent {exponent} exceeds the overflow guard {limit}")]
    Overflow { exponent: f64, limit: f64 },

    #[error("non-finite {quantity} at iteration {iteration}, component {component}")]
    NonFinite {
        quantity: &'static str,
        iteration: usize,
        component: usize,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
