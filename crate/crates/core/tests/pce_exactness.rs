//! Least-squares fits of polynomials that lie in the span of the basis are exact.

use proptest::prelude::*;
use rbto::pce::{MultiIndexSet, PceModel};
use rbto::probmod::{RandomInput, SampleMatrix, SampleStream};

/// Normalized probabilists' Hermite polynomials in closed form.
fn he(n: usize, x: f64) -> f64 {
    let raw = match n {
        0 => 1.0,
        1 => x,
        2 => x * x - 1.0,
        3 => x * x * x - 3.0 * x,
        4 => x.powi(4) - 6.0 * x * x + 3.0,
        _ => unreachable!("degree above 4"),
    };
    let fact = [1.0, 1.0, 2.0, 6.0, 24.0][n];
    raw / f64::sqrt(fact)
}

fn polynomial(coeffs: &[f64], indices: &[Vec<usize>], u: &[f64]) -> f64 {
    coeffs
        .iter()
        .zip(indices)
        .map(|(c, a)| c * he(a[0], u[0]) * he(a[1], u[1]))
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn degree_four_polynomials_are_recovered(
        order in 0usize..=4,
        raw in prop::collection::vec(-5.0f64..5.0, 15),
        seed in any::<u64>(),
    ) {
        let set = MultiIndexSet::total_degree(2, order).unwrap();
        let p = set.len();
        let coeffs = &raw[..p];
        let n_fit = 2 * p;
        let u = SampleStream::new(seed).standard_normal_matrix::<f64>(n_fit, 2);
        let values: Vec<f64> = u.iter_rows().map(|r| polynomial(coeffs, set.indices(), r)).collect();
        let indices = set.indices().to_vec();
        let input = RandomInput::standard_normal(2).unwrap();
        let fit = PceModel::fit_least_squares(&u, &values, set, input).unwrap();
        for (i, (a, b)) in fit.coefficients().iter().zip(coeffs).enumerate() {
            prop_assert!((a - b).abs() < 1e-10, "coefficient {i} {:?}: {a} vs {b}", indices[i]);
        }
        let probe = [0.7, -1.3];
        prop_assert!((fit.evaluate_u(&probe) - polynomial(coeffs, &indices, &probe)).abs() < 1e-9);
    }
}

#[test]
fn basis_size_for_two_inputs_at_order_four() {
    assert_eq!(MultiIndexSet::total_degree(2, 4).unwrap().len(), 15);
    assert_eq!(MultiIndexSet::cardinality(2, 4), 15);
}

#[test]
fn fit_from_explicit_rows() {
    // f(u) = 2 + 3 He2(u0)/√2 on six hand-picked points
    let rows = vec![0.0, 0.0, 1.0, 0.5, -1.0, 2.0, 2.0, -0.5, 0.3, 0.1, -2.5, 1.0];
    let u = SampleMatrix::from_rows(2, rows);
    let values: Vec<f64> = u.iter_rows().map(|r| 2.0 + 3.0 * he(2, r[0])).collect();
    let set = MultiIndexSet::total_degree(2, 2).unwrap();
    let fit =
        PceModel::fit_least_squares(&u, &values, set, RandomInput::standard_normal(2).unwrap()).unwrap();
    let expected = [2.0, 0.0, 0.0, 3.0, 0.0, 0.0];
    for (a, b) in fit.coefficients().iter().zip(expected) {
        assert!((a - b).abs() < 1e-10, "{:?}", fit.coefficients());
    }
}
