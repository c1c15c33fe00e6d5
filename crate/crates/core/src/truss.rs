//! Two-bar truss benchmark. Design `θ = (λ, δ)`: normalized cross-section and bar angle.
//! Objective `J = λ / cos δ` (volume); the compliance limit state is
//! `g = c0 - (1 / (λ cos δ)) (1 / sin²δ + ξ² / (P² cos²δ))` with `ξ` a standard normal
//! horizontal load.

use crate::error::Result;
use crate::optimizer::Problem;
use crate::probmod::RandomInput;
use crate::scalar::Real;

/// Keeps `δ` away from the singularities of `1/sin δ` and `1/cos δ`.
pub const ANGLE_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct TrussProblem<T> {
    /// `2 C_max E A_max / (P² H)`.
    pub c0: T,
    pub load: T,
    input: RandomInput<T>,
}

impl<T: Real> Default for TrussProblem<T> {
    fn default() -> Self {
        Self::new(T::of(100.0), T::one())
    }
}

impl<T: Real> TrussProblem<T> {
    pub fn new(c0: T, load: T) -> Self {
        Self {
            c0,
            load,
            input: RandomInput::standard_normal(1).expect("one component"),
        }
    }

    /// `(J, ∇J)` at `(λ, δ)`.
    pub fn objective(&self, lambda: T, delta: T) -> (T, [T; 2]) {
        let c = delta.cos();
        let s = delta.sin();
        (lambda / c, [T::one() / c, lambda * s / (c * c)])
    }

    /// Limit state; a vanishing cross-section always fails.
    pub fn limit_state_value(&self, lambda: T, delta: T, xi: T) -> T {
        if lambda <= T::zero() {
            return T::neg_infinity();
        }
        let c = delta.cos();
        let s = delta.sin();
        let p = self.load;
        self.c0 - (T::one() / (s * s) + xi * xi / (p * p * c * c)) / (lambda * c)
    }
}

impl<T: Real> Problem<T> for TrussProblem<T> {
    fn dim(&self) -> usize {
        2
    }

    fn bounds(&self) -> (Vec<T>, Vec<T>) {
        let m = T::of(ANGLE_MARGIN);
        (vec![T::zero(), m], vec![T::one(), T::FRAC_PI_2() - m])
    }

    fn initial_design(&self) -> Vec<T> {
        vec![T::of(0.1), T::FRAC_PI_4()]
    }

    fn input(&self) -> &RandomInput<T> {
        &self.input
    }

    fn objective_sample(&self, theta: &[T], _xi: &[T]) -> Result<(T, Vec<T>)> {
        let (j, g) = self.objective(theta[0], theta[1]);
        Ok((j, g.to_vec()))
    }

    fn limit_state(&self, theta: &[T], xi: &[T]) -> Result<T> {
        Ok(self.limit_state_value(theta[0], theta[1], xi[0]))
    }
}
