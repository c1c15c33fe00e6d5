//! Failure-probability estimators: crude Monte Carlo, subset simulation with a modified
//! Metropolis kernel, and the hybrid surrogate/exact scheme.
//!
//! Failure is `g <= 0` throughout.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::pce::{MultiIndexSet, PceModel};
use crate::probmod::{RandomInput, SampleMatrix, SampleStream};
use crate::scalar::Real;

type Evaluator<'a, T> = Box<dyn Fn(&[T], &[T]) -> Result<T> + 'a>;

/// Limit-state function `g(θ; ξ)` with a counter of exact evaluations.
pub struct LimitState<'a, T> {
    eval: Evaluator<'a, T>,
    count: AtomicU64,
}

impl<'a, T: Real> LimitState<'a, T> {
    pub fn new(f: impl Fn(&[T], &[T]) -> T + 'a) -> Self {
        Self::try_new(move |theta, xi| Ok(f(theta, xi)))
    }

    /// For limit states whose evaluation can fail (e.g. a singular stiffness matrix).
    pub fn try_new(f: impl Fn(&[T], &[T]) -> Result<T> + 'a) -> Self {
        Self {
            eval: Box::new(f),
            count: AtomicU64::new(0),
        }
    }

    pub fn evaluate(&self, theta: &[T], xi: &[T]) -> Result<T> {
        self.count.fetch_add(1, Ordering::Relaxed);
        (self.eval)(theta, xi)
    }

    /// Exact evaluations performed so far.
    pub fn evaluations(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }
}

impl<T> std::fmt::Debug for LimitState<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LimitState")
            .field("evaluations", &self.count.load(Ordering::Relaxed))
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    MonteCarlo,
    Subset,
    Hybrid,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::MonteCarlo => "mc",
            Self::Subset => "subset",
            Self::Hybrid => "hybrid",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityEstimate<T> {
    pub p_hat: T,
    pub method: Method,
    /// Number of intermediate subset levels `k`; zero for the other methods.
    pub levels: usize,
    pub n_exact_evals: u64,
    pub n_surrogate_evals: u64,
    /// Subset thresholds `b_0, b_1, ...`, ending with the first non-positive one.
    pub thresholds: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetConfig<T> {
    pub samples: usize,
    pub p0: T,
    pub proposal_std: T,
    pub max_levels: usize,
}

impl<T: Real> SubsetConfig<T> {
    pub fn new(samples: usize, p0: T) -> Self {
        Self {
            samples,
            p0,
            proposal_std: T::one(),
            max_levels: 20,
        }
    }

    /// `⌈N p0⌉`, the number of chain seeds per level.
    pub fn seeds(&self) -> usize {
        (T::of(self.samples as f64) * self.p0).ceil().as_f64() as usize
    }

    /// `⌊1 / p0⌋`, the nominal chain length.
    pub fn chain_length(&self) -> usize {
        (T::one() / self.p0).floor().as_f64() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p0 > T::zero() && self.p0 < T::one()) {
            return Err(Error::InvalidParameter(format!("p0 must lie in (0, 1), got {}", self.p0)));
        }
        if !(self.proposal_std > T::zero()) || !self.proposal_std.is_finite() {
            return Err(Error::InvalidParameter("proposal std must be positive".into()));
        }
        if self.seeds() < 2 || self.chain_length() < 2 {
            return Err(Error::InvalidParameter(format!(
                "subset simulation needs ceil(N p0) >= 2 and floor(1/p0) >= 2 (N {}, p0 {})",
                self.samples, self.p0
            )));
        }
        if self.max_levels == 0 {
            return Err(Error::InvalidParameter("max_levels must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridConfig<T> {
    /// Half-width of the band `|ĝ| <= gamma` that is re-evaluated exactly.
    pub gamma: T,
    pub samples: usize,
    pub n_fit: usize,
    pub pce_order: usize,
}

impl<T: Real> HybridConfig<T> {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.gamma >= T::zero()) {
            return Err(Error::InvalidParameter(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.samples == 0 {
            return Err(Error::InvalidParameter("hybrid sample count must be >= 1".into()));
        }
        let terms = MultiIndexSet::cardinality(dim, self.pce_order);
        if self.n_fit < terms {
            return Err(Error::InvalidParameter(format!(
                "n_fit {} is below the {terms} basis terms of an order-{} expansion",
                self.n_fit, self.pce_order
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorConfig<T> {
    MonteCarlo { samples: usize },
    Subset(SubsetConfig<T>),
    Hybrid(HybridConfig<T>),
}

impl<T: Real> EstimatorConfig<T> {
    pub fn estimate(
        &self,
        g: &LimitState<'_, T>,
        theta: &[T],
        input: &RandomInput<T>,
        stream: &SampleStream,
    ) -> Result<ReliabilityEstimate<T>> {
        match self {
            Self::MonteCarlo { samples } => mc_estimate(g, theta, input, *samples, stream),
            Self::Subset(cfg) => subset_estimate(g, theta, input, cfg, stream),
            Self::Hybrid(cfg) => hybrid_estimate(g, theta, input, cfg, stream),
        }
    }

    pub fn method(&self) -> Method {
        match self {
            Self::MonteCarlo { .. } => Method::MonteCarlo,
            Self::Subset(_) => Method::Subset,
            Self::Hybrid(_) => Method::Hybrid,
        }
    }
}

fn fraction<T: Real>(count: usize, total: usize) -> T {
    T::of(count as f64) / T::of(total as f64)
}

/// Crude Monte Carlo on `n` realizations from `stream`.
pub fn mc_estimate<T: Real>(
    g: &LimitState<'_, T>,
    theta: &[T],
    input: &RandomInput<T>,
    n: usize,
    stream: &SampleStream,
) -> Result<ReliabilityEstimate<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter("Monte Carlo needs at least one sample".into()));
    }
    let xs = input.sample(n, stream);
    let mut fails = 0;
    for x in xs.iter_rows() {
        if g.evaluate(theta, x)? <= T::zero() {
            fails += 1;
        }
    }
    Ok(ReliabilityEstimate {
        p_hat: fraction(fails, n),
        method: Method::MonteCarlo,
        levels: 0,
        n_exact_evals: n as u64,
        n_surrogate_evals: 0,
        thresholds: Vec::new(),
    })
}

/// Subset simulation. The first level uses the same draws as [`mc_estimate`] on `stream`;
/// Markov chains at level `j` draw from `stream / "mcmc" / j / chain`.
///
/// Each level keeps the `⌈N p0⌉` smallest limit-state values as chain seeds and grows
/// `N` new states from them (chain lengths `⌊1/p0⌋`, adjusted by at most one so the level
/// holds exactly `N` samples). Seeds are not copied into the next level, so every level
/// after the first costs exactly `N` evaluations.
pub fn subset_estimate<T: Real>(
    g: &LimitState<'_, T>,
    theta: &[T],
    input: &RandomInput<T>,
    cfg: &SubsetConfig<T>,
    stream: &SampleStream,
) -> Result<ReliabilityEstimate<T>> {
    cfg.validate()?;
    let n = cfg.samples;
    let d = input.dim();
    let n_seeds = cfg.seeds();
    let mut evals = 0u64;

    let mut us = input.sample_u(n, stream).as_slice().to_vec();
    let mut gs = Vec::with_capacity(n);
    let mut x = vec![T::zero(); d];
    for u in us.chunks_exact(d) {
        input.from_u_into(u, &mut x);
        let v = g.evaluate(theta, &x)?;
        if v.is_nan() {
            return Err(Error::InvalidParameter("limit state returned NaN".into()));
        }
        gs.push(v);
        evals += 1;
    }

    let mut thresholds = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    let mut scale = T::one();
    let mut level = 0;
    loop {
        order.sort_by(|&a, &b| gs[a].partial_cmp(&gs[b]).expect("limit-state values are not NaN"));
        let b = gs[order[n_seeds - 1]];
        thresholds.push(b);
        let fails = gs.iter().filter(|&&v| v <= T::zero()).count();
        if b <= T::zero() {
            return Ok(ReliabilityEstimate {
                p_hat: scale * fraction(fails, n),
                method: Method::Subset,
                levels: level,
                n_exact_evals: evals,
                n_surrogate_evals: 0,
                thresholds,
            });
        }
        if level == cfg.max_levels {
            return Err(Error::SubsetStalled {
                levels: level,
                threshold: b.as_f64(),
                partial: (scale * fraction(fails, n)).as_f64(),
            });
        }

        let seed_u: Vec<T> = order[..n_seeds]
            .iter()
            .flat_map(|&i| us[i * d..(i + 1) * d].iter().copied())
            .collect();
        let seed_g: Vec<T> = order[..n_seeds].iter().map(|&i| gs[i]).collect();
        let level_stream = stream.child("mcmc").child(level);
        let (next_u, next_g) = grow_level(
            g,
            theta,
            input,
            (&seed_u, &seed_g),
            b,
            n,
            cfg.proposal_std,
            &level_stream,
        )?;
        evals += n as u64;
        us = next_u;
        gs = next_g;
        scale *= cfg.p0;
        level += 1;
    }
}

/// Runs one modified-Metropolis chain per seed, targeting the input law conditioned on
/// `g <= b`, and returns `n` new states with their limit-state values. Chain `c` draws from
/// `stream / c`; lengths are `n / seeds`, plus one for the first `n % seeds` chains.
#[allow(clippy::too_many_arguments)]
pub(crate) fn grow_level<T: Real>(
    g: &LimitState<'_, T>,
    theta: &[T],
    input: &RandomInput<T>,
    (seed_u, seed_g): (&[T], &[T]),
    b: T,
    n: usize,
    proposal_std: T,
    stream: &SampleStream,
) -> Result<(Vec<T>, Vec<T>)> {
    let d = input.dim();
    let n_seeds = seed_g.len();
    let mut next_u = Vec::with_capacity(n * d);
    let mut next_g = Vec::with_capacity(n);
    let mut x = vec![T::zero(); d];
    let mut cand = vec![T::zero(); d];
    let base = n / n_seeds;
    let extra = n % n_seeds;
    for c in 0..n_seeds {
        let len = base + usize::from(c < extra);
        let mut rng = stream.child(c).rng();
        let mut cur = seed_u[c * d..(c + 1) * d].to_vec();
        let mut cur_g = seed_g[c];
        for _ in 0..len {
            for (k, cv) in cand.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                let prop = cur[k] + proposal_std * T::of(z);
                let log_ratio = (cur[k] * cur[k] - prop * prop) / T::of(2.0);
                let accept: f64 = rng.random();
                *cv = if T::of(accept.ln()) < log_ratio { prop } else { cur[k] };
            }
            input.from_u_into(&cand, &mut x);
            let cand_g = g.evaluate(theta, &x)?;
            if cand_g <= b {
                cur.copy_from_slice(&cand);
                cur_g = cand_g;
            }
            next_u.extend_from_slice(&cur);
            next_g.push(cur_g);
        }
    }
    Ok((next_u, next_g))
}

/// Hybrid estimator: a polynomial-chaos surrogate screens `N` samples and only those with
/// `|ĝ| <= gamma` are evaluated exactly. Fit points come from `stream / "pce-fit"`; the
/// screened samples are the same draws [`mc_estimate`] would use on `stream`.
pub fn hybrid_estimate<T: Real>(
    g: &LimitState<'_, T>,
    theta: &[T],
    input: &RandomInput<T>,
    cfg: &HybridConfig<T>,
    stream: &SampleStream,
) -> Result<ReliabilityEstimate<T>> {
    let d = input.dim();
    cfg.validate(d)?;

    let u_fit = input.sample_u(cfg.n_fit, &stream.child("pce-fit"));
    let mut x = vec![T::zero(); d];
    let mut values = Vec::with_capacity(cfg.n_fit);
    for u in u_fit.iter_rows() {
        input.from_u_into(u, &mut x);
        values.push(g.evaluate(theta, &x)?);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "limit state is not finite at surrogate fit point {i}"
        )));
    }
    let indices = MultiIndexSet::total_degree(d, cfg.pce_order)?;
    let model = PceModel::fit_least_squares(&u_fit, &values, indices, input.clone())?;

    let us: SampleMatrix<T> = input.sample_u(cfg.samples, stream);
    let mut eval = model.evaluator();
    let mut fails = 0;
    let mut band = 0u64;
    for u in us.iter_rows() {
        let approx = eval.evaluate_u(u);
        if approx < -cfg.gamma {
            fails += 1;
        } else if approx.abs() <= cfg.gamma {
            band += 1;
            input.from_u_into(u, &mut x);
            if g.evaluate(theta, &x)? <= T::zero() {
                fails += 1;
            }
        }
    }
    Ok(ReliabilityEstimate {
        p_hat: fraction(fails, cfg.samples),
        method: Method::Hybrid,
        levels: 0,
        n_exact_evals: cfg.n_fit as u64 + band,
        n_surrogate_evals: cfg.samples as u64,
        thresholds: Vec::new(),
    })
}
