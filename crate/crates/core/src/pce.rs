//! Polynomial chaos surrogates in standard-normal space.
//!
//! The basis is the tensor product of normalized probabilists' Hermite polynomials
//! `He_n(x) / sqrt(n!)`, which is orthonormal under the standard normal weight. A total
//! degree truncation is used and coefficients are found by least squares.

use crate::error::{Error, Result};
use crate::linalg;
use crate::probmod::{RandomInput, SampleMatrix};
use crate::scalar::Real;

/// Total-degree multi-index set in graded lexicographic order: ascending total degree, and
/// within one degree, larger leading exponents first. The zero tuple is always first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexSet {
    dim: usize,
    order: usize,
    indices: Vec<Vec<usize>>,
}

impl MultiIndexSet {
    pub fn total_degree(dim: usize, order: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("multi-index dimension must be >= 1".into()));
        }
        let mut indices = Vec::new();
        for degree in 0..=order {
            let mut current = vec![0; dim];
            push_compositions(degree, 0, &mut current, &mut indices);
        }
        Ok(Self {
            dim,
            order,
            indices,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    /// `C(order + dim, dim)`.
    pub fn cardinality(dim: usize, order: usize) -> usize {
        (1..=dim).fold(1usize, |acc, k| acc * (order + k) / k)
    }

    /// Values of every basis function at `u`, using `table` as scratch for the 1D values.
    fn basis_row<T: Real>(&self, u: &[T], table: &mut [T], out: &mut [T]) {
        let width = self.order + 1;
        for (c, &x) in u.iter().enumerate() {
            hermite_table_into(x, &mut table[c * width..(c + 1) * width]);
        }
        for (o, alpha) in out.iter_mut().zip(&self.indices) {
            let mut v = T::one();
            for (c, &a) in alpha.iter().enumerate() {
                if a > 0 {
                    v *= table[c * width + a];
                }
            }
            *o = v;
        }
    }
}

fn push_compositions(remaining: usize, pos: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let dim = current.len();
    if pos == dim - 1 {
        current[pos] = remaining;
        out.push(current.clone());
        current[pos] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k;
        push_compositions(remaining - k, pos + 1, current, out);
    }
    current[pos] = 0;
}

/// Normalized probabilists' Hermite polynomial `He_n(x) / sqrt(n!)`.
pub fn hermite<T: Real>(n: usize, x: T) -> T {
    let mut table = vec![T::zero(); n + 1];
    hermite_table_into(x, &mut table);
    table[n]
}

/// Fills `out[k]` with the normalized Hermite polynomial of degree `k`, `k < out.len()`.
pub fn hermite_table_into<T: Real>(x: T, out: &mut [T]) {
    if out.is_empty() {
        return;
    }
    out[0] = T::one();
    if out.len() > 1 {
        out[1] = x;
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = T::of(k as f64);
        out[k + 1] = (x * out[k] - kf.sqrt() * out[k - 1]) / (kf + T::one()).sqrt();
    }
}

/// Fitted surrogate: coefficients over a multi-index set plus the input map used to bring
/// physical realizations into u-space.
#[derive(Debug, Clone, PartialEq)]
pub struct PceModel<T> {
    indices: MultiIndexSet,
    coefficients: Vec<T>,
    input: RandomInput<T>,
}

impl<T: Real> PceModel<T> {
    pub fn new(indices: MultiIndexSet, coefficients: Vec<T>, input: RandomInput<T>) -> Result<Self> {
        if coefficients.len() != indices.len() {
            return Err(Error::InvalidParameter(format!(
                "{} coefficients for {} basis terms",
                coefficients.len(),
                indices.len()
            )));
        }
        if indices.dim() != input.dim() {
            return Err(Error::InvalidParameter(
                "basis dimension differs from the random input dimension".into(),
            ));
        }
        if let Some(i) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!("coefficient {i} is not finite")));
        }
        Ok(Self {
            indices,
            coefficients,
            input,
        })
    }

    /// Least-squares fit of `values` observed at the u-space points `u_samples`.
    pub fn fit_least_squares(
        u_samples: &SampleMatrix<T>,
        values: &[T],
        indices: MultiIndexSet,
        input: RandomInput<T>,
    ) -> Result<Self> {
        let rows = u_samples.rows();
        let cols = indices.len();
        if u_samples.cols() != indices.dim() || values.len() != rows {
            return Err(Error::InvalidParameter(
                "sample matrix, values and basis dimensions disagree".into(),
            ));
        }
        if rows < cols {
            return Err(Error::InvalidParameter(format!(
                "{rows} fit samples cannot determine {cols} coefficients"
            )));
        }
        let mut design = vec![T::zero(); rows * cols];
        let mut table = vec![T::zero(); indices.dim() * (indices.order() + 1)];
        for (i, u) in u_samples.iter_rows().enumerate() {
            indices.basis_row(u, &mut table, &mut design[i * cols..(i + 1) * cols]);
        }
        let coefficients = linalg::least_squares(&design, rows, cols, values)?;
        Self::new(indices, coefficients, input)
    }

    pub fn indices(&self) -> &MultiIndexSet {
        &self.indices
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    pub fn input(&self) -> &RandomInput<T> {
        &self.input
    }

    /// Surrogate value at a physical realization.
    pub fn evaluate(&self, xi: &[T]) -> Result<T> {
        let u = self.input.to_u(xi)?;
        Ok(self.evaluate_u(&u))
    }

    /// Surrogate value at a u-space point.
    pub fn evaluate_u(&self, u: &[T]) -> T {
        let mut eval = self.evaluator();
        eval.evaluate_u(u)
    }

    /// Reusable evaluator that keeps its scratch buffers between calls.
    pub fn evaluator(&self) -> PceEvaluator<'_, T> {
        PceEvaluator {
            model: self,
            table: vec![T::zero(); self.indices.dim() * (self.indices.order() + 1)],
            row: vec![T::zero(); self.indices.len()],
        }
    }
}

pub struct PceEvaluator<'a, T> {
    model: &'a PceModel<T>,
    table: Vec<T>,
    row: Vec<T>,
}

impl<T: Real> PceEvaluator<'_, T> {
    pub fn evaluate_u(&mut self, u: &[T]) -> T {
        self.model
            .indices
            .basis_row(u, &mut self.table, &mut self.row);
        self.row
            .iter()
            .zip(&self.model.coefficients)
            .map(|(&b, &c)| b * c)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probmod::SampleStream;

    #[test]
    fn multi_index_counts() {
        let s = MultiIndexSet::total_degree(2, 4).unwrap();
        assert_eq!(s.len(), 15);
        assert_eq!(MultiIndexSet::cardinality(2, 4), 15);
        assert_eq!(
            MultiIndexSet::total_degree(1, 3).unwrap().indices(),
            &[vec![0], vec![1], vec![2], vec![3]]
        );
        assert_eq!(MultiIndexSet::total_degree(2, 0).unwrap().indices(), &[vec![0, 0]]);
        for (d, p) in [(1, 5), (3, 3), (4, 2), (5, 4)] {
            let s = MultiIndexSet::total_degree(d, p).unwrap();
            assert_eq!(s.len(), MultiIndexSet::cardinality(d, p));
            assert!(s.indices()[0].iter().all(|&a| a == 0));
            assert!(s.indices().iter().all(|a| a.iter().sum::<usize>() <= p));
        }
    }

    #[test]
    fn graded_lexicographic_order() {
        let s = MultiIndexSet::total_degree(2, 2).unwrap();
        assert_eq!(
            s.indices(),
            &[
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite(0, 3.7f64), 1.0);
        assert!((hermite(2, 0.0f64) + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        // He_3(x) = x^3 - 3x
        let x = 1.3f64;
        assert!((hermite(3, x) - (x.powi(3) - 3.0 * x) / 6f64.sqrt()).abs() < 1e-14);
        // He_4(x) = x^4 - 6x^2 + 3
        assert!((hermite(4, x) - (x.powi(4) - 6.0 * x * x + 3.0) / 24f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn hermite_orthonormal_under_gaussian_weight() {
        // Monte Carlo quadrature; tolerances are three standard errors of each entry.
        let u = SampleStream::new(99).standard_normal_matrix::<f64>(1_000_000, 2);
        let idx = MultiIndexSet::total_degree(2, 4).unwrap();
        let m = u.rows() as f64;
        let k = idx.len();
        let mut sum = vec![0.0; k * k];
        let mut sum2 = vec![0.0; k * k];
        let mut table = vec![0.0; 10];
        let mut row = vec![0.0; k];
        for r in u.iter_rows() {
            idx.basis_row(r, &mut table, &mut row);
            for i in 0..k {
                for j in 0..k {
                    let v = row[i] * row[j];
                    sum[i * k + j] += v;
                    sum2[i * k + j] += v * v;
                }
            }
        }
        for i in 0..k {
            for j in 0..k {
                let mean = sum[i * k + j] / m;
                let se = ((sum2[i * k + j] / m - mean * mean) / m).sqrt();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (mean - target).abs() < 3.0 * se.max(1e-3),
                    "gram ({i},{j}) = {mean}, se {se}"
                );
            }
        }
        let x: Vec<f64> = u.iter_rows().map(|r| r[0]).collect();
        let cross = x.iter().map(|&v| hermite(2, v) * hermite(3, v)).sum::<f64>() / m;
        // E[(He2 He3)^2] = 31 for the normalized pair
        assert!(cross.abs() < 3.0 * (31.0 / m).sqrt(), "{cross}");
    }

    #[test]
    fn constant_values_fit_to_mean_term() {
        let input = RandomInput::<f64>::standard_normal(2).unwrap();
        let idx = MultiIndexSet::total_degree(2, 3).unwrap();
        let u = input.sample_u(40, &SampleStream::new(1));
        let values = vec![4.25; 40];
        let m = PceModel::fit_least_squares(&u, &values, idx, input).unwrap();
        assert!((m.coefficients()[0] - 4.25).abs() < 1e-12);
        assert!(m.coefficients()[1..].iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn square_system_interpolates() {
        let input = RandomInput::<f64>::standard_normal(2).unwrap();
        let idx = MultiIndexSet::total_degree(2, 2).unwrap();
        let u = input.sample_u(idx.len(), &SampleStream::new(8));
        let values: Vec<f64> = u.iter_rows().map(|r| (r[0] * 0.7).sin() + r[1].exp()).collect();
        let m = PceModel::fit_least_squares(&u, &values, idx, input).unwrap();
        for (r, v) in u.iter_rows().zip(&values) {
            assert!((m.evaluate_u(r) - v).abs() < 1e-9);
        }
    }

    #[test]
    fn evaluate_maps_physical_inputs() {
        use crate::probmod::RandomVariable;
        let input = RandomInput::new(vec![
            RandomVariable::StandardNormal,
            RandomVariable::lognormal(1.0, 0.1).unwrap(),
        ])
        .unwrap();
        let idx = MultiIndexSet::total_degree(2, 1).unwrap();
        let m = PceModel::new(idx, vec![1.0, 2.0, -3.0], input.clone()).unwrap();
        let u = [0.4f64, -1.1];
        let x = input.from_u(&u);
        assert!((m.evaluate(&x).unwrap() - (1.0 + 2.0 * 0.4 + 3.0 * 1.1)).abs() < 1e-12);
        assert!(m.evaluate(&[0.0, -1.0]).is_err());
    }

    #[test]
    fn underdetermined_fit_is_rejected() {
        let input = RandomInput::<f64>::standard_normal(2).unwrap();
        let idx = MultiIndexSet::total_degree(2, 4).unwrap();
        let u = input.sample_u(10, &SampleStream::new(2));
        let r = PceModel::fit_least_squares(&u, &[0.0; 10], idx, input);
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn duplicated_points_are_rank_deficient() {
        let input = RandomInput::<f64>::standard_normal(1).unwrap();
        let idx = MultiIndexSet::total_degree(1, 3).unwrap();
        let u = SampleMatrix::from_rows(1, vec![0.5; 8]);
        let r = PceModel::fit_least_squares(&u, &[1.0; 8], idx, input);
        assert!(matches!(r, Err(Error::RankDeficient { .. })));
    }
}
