//! Penalized stochastic gradient descent for reliability-based design.
//!
//! Each iteration draws a fresh mini-batch of realizations, updates the failure-density
//! model when any of them fails, and takes a projected step along
//! `h = Σ ∇f + Σ κ_C q⁺ ∇q + κ_F (ln P̂_F - ln p_a)^+ ∇ ln p(θ|F)`.
//! `P̂_F` is refreshed at the first iteration and every `m` iterations after that.

use crate::error::{Error, Result};
use crate::failmodel::FailureDensityModel;
use crate::probmod::{RandomInput, SampleMatrix, SampleStream};
use crate::reliability::{EstimatorConfig, LimitState, ReliabilityEstimate};
use crate::scalar::{norm, Real};

/// Sampled design problem. Gradients are with respect to the design vector and have
/// length [`dim`](Self::dim).
pub trait Problem<T: Real> {
    fn dim(&self) -> usize;

    /// Componentwise box `(lower, upper)`.
    fn bounds(&self) -> (Vec<T>, Vec<T>);

    fn initial_design(&self) -> Vec<T>;

    fn input(&self) -> &RandomInput<T>;

    /// Objective realization `f(θ; ξ)` and its design gradient.
    fn objective_sample(&self, theta: &[T], xi: &[T]) -> Result<(T, Vec<T>)>;

    /// Inequality constraint realizations `q_i(θ; ξ) <= 0` with gradients.
    fn constraint_samples(&self, _theta: &[T], _xi: &[T]) -> Result<Vec<(T, Vec<T>)>> {
        Ok(Vec::new())
    }

    /// Limit state `g(θ; ξ)`; failure is `g <= 0`.
    fn limit_state(&self, theta: &[T], xi: &[T]) -> Result<T>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailureModelInit<T> {
    pub alpha: T,
    pub beta: T,
    pub eta_f: T,
}

/// How the per-sample objective and constraint gradients of a mini-batch are combined.
/// The failure penalty is added once either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchReduction {
    #[default]
    Sum,
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig<T> {
    pub eta: T,
    pub batch_size: usize,
    pub reduction: BatchReduction,
    /// Refresh interval `m` for the failure-probability estimate.
    pub refresh_interval: usize,
    pub kappa_f: T,
    /// One penalty per constraint returned by [`Problem::constraint_samples`].
    pub kappa_c: Vec<T>,
    pub p_a: T,
    pub iterations: usize,
    /// `None` runs the robust variant: no estimation, no failure-model updates.
    pub estimator: Option<EstimatorConfig<T>>,
    pub failure_model: FailureModelInit<T>,
    pub seed: u64,
    /// Starting design; the problem's default when `None`.
    pub initial_design: Option<Vec<T>>,
    /// Keep every iterate in [`RunHistory::designs`].
    pub record_designs: bool,
}

impl<T: Real> OptimizerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.eta > T::zero()) || !self.eta.is_finite() {
            return bad("eta must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be >= 1");
        }
        if self.refresh_interval == 0 {
            return bad("refresh interval must be >= 1");
        }
        if !(self.kappa_f >= T::zero()) || self.kappa_c.iter().any(|k| !(*k >= T::zero())) {
            return bad("penalty parameters must be >= 0");
        }
        if !(self.p_a > T::zero() && self.p_a < T::one()) {
            return bad("p_a must lie in (0, 1)");
        }
        if self.iterations == 0 {
            return bad("iterations must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    /// Mean objective over the mini-batch at the design the step starts from.
    pub batch_objective: T,
    /// Set on refresh iterations only.
    pub p_hat: Option<T>,
    pub alpha: T,
    pub beta_norm: T,
    pub failure_update: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory<T> {
    pub records: Vec<IterationRecord<T>>,
    /// `(iteration, estimate)` for every refresh.
    pub estimates: Vec<(usize, ReliabilityEstimate<T>)>,
    pub theta: Vec<T>,
    /// Design after each iteration, when requested.
    pub designs: Vec<Vec<T>>,
    pub alpha: T,
    pub beta: Vec<T>,
    /// Exact limit-state evaluations, estimator calls and mini-batch checks together.
    pub exact_evaluations: u64,
    pub objective_evaluations: u64,
}

/// A run that stopped early, with everything recorded up to the failing iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure<T> {
    pub error: Error,
    pub history: RunHistory<T>,
}

impl<T> std::fmt::Display for RunFailure<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.error)
    }
}

impl<T: std::fmt::Debug> std::error::Error for RunFailure<T> {}

/// Clips `theta` into `[lower, upper]` componentwise.
pub fn project<T: Real>(theta: &mut [T], lower: &[T], upper: &[T]) {
    for ((t, &lo), &hi) in theta.iter_mut().zip(lower).zip(upper) {
        *t = t.max(lo).min(hi);
    }
}

/// Stochastic gradient over a mini-batch (sums, not averages) plus a precomputed failure
/// penalty. Returns the gradient and the summed objective.
pub fn stochastic_gradient<T: Real, P: Problem<T> + ?Sized>(
    problem: &P,
    theta: &[T],
    batch: &SampleMatrix<T>,
    kappa_c: &[T],
    failure_penalty: &[T],
    reduction: BatchReduction,
) -> Result<(Vec<T>, T)> {
    if batch.rows() == 0 {
        return Err(Error::InvalidParameter("empty mini-batch".into()));
    }
    let mut h = vec![T::zero(); failure_penalty.len()];
    let mut total = T::zero();
    for xi in batch.iter_rows() {
        let (f, grad) = problem.objective_sample(theta, xi)?;
        total += f;
        for (a, &b) in h.iter_mut().zip(&grad) {
            *a += b;
        }
        let constraints = problem.constraint_samples(theta, xi)?;
        if constraints.len() > kappa_c.len() {
            return Err(Error::InvalidParameter(format!(
                "{} constraints but {} penalty parameters",
                constraints.len(),
                kappa_c.len()
            )));
        }
        for ((q, grad), &kappa) in constraints.iter().zip(kappa_c) {
            if *q > T::zero() {
                for (a, &b) in h.iter_mut().zip(grad) {
                    *a += kappa * *q * b;
                }
            }
        }
    }
    if reduction == BatchReduction::Mean {
        let n = T::of(batch.rows() as f64);
        h.iter_mut().for_each(|v| *v /= n);
    }
    for (a, &p) in h.iter_mut().zip(failure_penalty) {
        *a += p;
    }
    Ok((h, total))
}

fn tag_iteration(e: Error, k: usize) -> Error {
    match e {
        Error::NonFinite {
            quantity,
            component,
            ..
        } => Error::NonFinite {
            quantity,
            iteration: k,
            component,
        },
        other => other,
    }
}

/// Runs the optimization loop. Deterministic given `cfg.seed`: iteration `k` draws its
/// mini-batch from `seed / "batch" / k` and its estimate from `seed / "estimate" / k`.
pub fn run<T: Real, P: Problem<T> + ?Sized>(
    problem: &P,
    cfg: &OptimizerConfig<T>,
) -> Result<RunHistory<T>, Box<RunFailure<T>>> {
    let d = problem.dim();
    let (lower, upper) = problem.bounds();
    let mut theta = cfg
        .initial_design
        .clone()
        .unwrap_or_else(|| problem.initial_design());
    let fm = &cfg.failure_model;

    let mut history = RunHistory {
        records: Vec::with_capacity(cfg.iterations),
        estimates: Vec::new(),
        theta: theta.clone(),
        designs: Vec::new(),
        alpha: fm.alpha,
        beta: vec![fm.beta; d],
        exact_evaluations: 0,
        objective_evaluations: 0,
    };
    let fail = |error: Error, history: RunHistory<T>| Box::new(RunFailure { error, history });

    let mut model = match cfg
        .validate()
        .and_then(|()| FailureDensityModel::new(fm.alpha, vec![fm.beta; d], fm.eta_f))
    {
        Ok(m) => m,
        Err(e) => return Err(fail(e, history)),
    };
    if theta.len() != d || lower.len() != d || upper.len() != d {
        return Err(fail(
            Error::InvalidParameter("design, bounds and problem dimension disagree".into()),
            history,
        ));
    }
    project(&mut theta, &lower, &upper);

    let root = SampleStream::new(cfg.seed);
    let input = problem.input();
    let g = LimitState::try_new(|t: &[T], x: &[T]| problem.limit_state(t, x));
    let mut p_hat: Option<T> = None;

    for k in 1..=cfg.iterations {
        let step = (|| -> Result<IterationRecord<T>> {
            let mut refreshed = None;
            if let Some(est) = &cfg.estimator {
                if k == 1 || k % cfg.refresh_interval == 0 {
                    let e = est.estimate(&g, &theta, input, &root.child("estimate").child(k))?;
                    refreshed = Some(e.p_hat);
                    p_hat = Some(e.p_hat);
                    history.estimates.push((k, e));
                }
            }

            let batch = input.sample(cfg.batch_size, &root.child("batch").child(k));
            let mut failed = false;
            if cfg.estimator.is_some() {
                for xi in batch.iter_rows() {
                    if g.evaluate(&theta, xi)? <= T::zero() {
                        failed = true;
                    }
                }
                if failed {
                    model
                        .update(std::slice::from_ref(&theta))
                        .map_err(|e| tag_iteration(e, k))?;
                }
            }

            let penalty = match p_hat {
                Some(p) => model.penalty_gradient(p, cfg.p_a, cfg.kappa_f),
                None => vec![T::zero(); d],
            };
            let (h, total) = stochastic_gradient(problem, &theta, &batch, &cfg.kappa_c, &penalty, cfg.reduction)?;
            history.objective_evaluations += cfg.batch_size as u64;
            if let Some(c) = h.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    quantity: "gradient",
                    iteration: k,
                    component: c,
                });
            }
            let record = IterationRecord {
                iteration: k,
                batch_objective: total / T::of(cfg.batch_size as f64),
                p_hat: refreshed,
                alpha: model.alpha,
                beta_norm: norm(&model.beta),
                failure_update: failed,
            };
            for (t, &v) in theta.iter_mut().zip(&h) {
                *t -= cfg.eta * v;
            }
            project(&mut theta, &lower, &upper);
            if cfg.record_designs {
                history.designs.push(theta.clone());
            }
            Ok(record)
        })();

        history.exact_evaluations = g.evaluations();
        match step {
            Ok(record) => history.records.push(record),
            Err(e) => {
                history.theta = theta;
                history.alpha = model.alpha;
                history.beta = model.beta;
                return Err(fail(e, history));
            }
        }
    }
    history.theta = theta;
    history.alpha = model.alpha;
    history.beta = model.beta;
    Ok(history)
}
