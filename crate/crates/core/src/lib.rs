//! Reliability-based topology optimization driven by stochastic gradients.
//!
//! The crate is generic over the floating-point type through [`Real`]; the aliases at the
//! bottom of this file fix `f64` (and `f32` where useful) for callers that do not care.

// Negated comparisons reject NaN on purpose; index loops mirror the matrix algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fem;
pub mod failmodel;
pub mod linalg;
pub mod optimizer;
pub mod pce;
pub mod probmod;
pub mod reliability;
pub mod scalar;
pub mod truss;

pub use error::{Error, Result};
pub use scalar::Real;

pub type RandomInput64 = probmod::RandomInput<f64>;
pub type RandomInput32 = probmod::RandomInput<f32>;
pub type PceModel64 = pce::PceModel<f64>;
pub type FailureDensityModel64 = failmodel::FailureDensityModel<f64>;
pub type ReliabilityEstimate64 = reliability::ReliabilityEstimate<f64>;
pub type EstimatorConfig64 = reliability::EstimatorConfig<f64>;
pub type OptimizerConfig64 = optimizer::OptimizerConfig<f64>;
pub type RunHistory64 = optimizer::RunHistory<f64>;
pub type TrussProblem64 = truss::TrussProblem<f64>;
pub type TrussProblem32 = truss::TrussProblem<f32>;
pub type BeamProblem64 = fem::BeamProblem<f64>;
pub type BeamSettings64 = fem::BeamSettings<f64>;
