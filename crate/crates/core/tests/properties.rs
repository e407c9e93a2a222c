//! Randomized invariants of the symmetric-function, sphere, body and
//! mollifier layers.

use mixedarea::bodies::{ellipsoid, SupportBody};
use mixedarea::conditions::{check_mi, eigen_sum, lemma_equiv_bruteforce};
use mixedarea::functionals::{functional_f, FunctionalSpec};
use mixedarea::mollify::MollifierKernel;
use mixedarea::sphere::grid::spiral;
use mixedarea::sphere::{q_matrix, random_rotation, random_unit_vector, Polynomial};
use mixedarea::symfun::{elem_sym, elem_sym_values, mixed_discriminant};
use mixedarea::{SphericalFunction, SymMatrix};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn symmetric(max_dim: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_dim).prop_flat_map(|n| {
        proptest::collection::vec(-2.0..2.0f64, n * n).prop_map(move |v| {
            let m = DMatrix::from_vec(n, n, v);
            SymMatrix::symmetrized(&m + m.transpose())
        })
    })
}

fn polynomial(n: usize, seed: u64) -> SphericalFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SphericalFunction::polynomial(Polynomial::random(n, 4, 4, &mut rng))
}

fn sorted_eigenvalues(q: &SymMatrix) -> Vec<f64> {
    let mut e = q.eigenvalues();
    e.sort_by(f64::total_cmp);
    e
}

fn body(axes: &[f64]) -> SupportBody {
    ellipsoid(axes).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn elementary_symmetric_functions_are_spectral(a in symmetric(6), seed in any::<u64>()) {
        let n = a.dim();
        let t = random_rotation(n.max(2), &mut ChaCha8Rng::seed_from_u64(seed));
        let t = if n == 1 { DMatrix::identity(1, 1) } else { t };
        let b = a.congruence(&t);
        let abs: Vec<f64> = a.eigenvalues().iter().map(|v| v.abs()).collect();
        let scale = elem_sym_values(&abs);
        for i in 0..=n {
            let (x, y) = (elem_sym(&a, i).unwrap(), elem_sym(&b, i).unwrap());
            prop_assert!((x - y).abs() <= 1e-10 * scale[i].max(1.0), "i={} {} vs {}", i, x, y);
        }
    }

    #[test]
    fn mixed_discriminant_of_equal_arguments_is_determinant(a in symmetric(5)) {
        let copies = vec![a.clone(); a.dim()];
        let det = a.as_matrix().determinant();
        let d = mixed_discriminant(&copies).unwrap();
        let scale = a.eigenvalues().iter().map(|v| v.abs()).product::<f64>().max(1.0);
        prop_assert!((d - det).abs() <= 1e-9 * scale);
    }

    #[test]
    fn smallest_sum_matches_subset_form(mu in proptest::collection::vec(-1.0..1.0f64, 1..=6), pick in 0usize..6) {
        let n = mu.len();
        let i = 1 + pick % n;
        let mut sorted = mu.clone();
        sorted.sort_by(f64::total_cmp);
        let smallest: f64 = sorted.iter().take(n - i + 1).sum();
        let (_, subset) = lemma_equiv_bruteforce(&mu, i).unwrap();
        let thresh = -1e-12 * (1.0 + mu.iter().map(|v| v.abs()).sum::<f64>());
        prop_assert_eq!(subset, smallest >= thresh);
    }

    #[test]
    fn hessian_is_rotation_covariant(seed in any::<u64>(), n in 3usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = polynomial(n, seed);
        let rot = random_rotation(n, &mut rng);
        let u = random_unit_vector(n, &mut rng);
        let g = f.compose_rotation(rot.clone());
        let a = sorted_eigenvalues(&q_matrix(&g, &u).unwrap());
        let b = sorted_eigenvalues(&q_matrix(&f, &(&rot * &u)).unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-8 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn linear_terms_do_not_change_the_condition(seed in any::<u64>(), v in proptest::collection::vec(-3.0..3.0f64, 3)) {
        let f = polynomial(3, seed);
        let g = f.add(&SphericalFunction::linear(DVector::from_vec(v)));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let u = random_unit_vector(3, &mut rng);
        for i in 1..3 {
            let (a, b) = (eigen_sum(&f, i, &u).unwrap(), eigen_sum(&g, i, &u).unwrap());
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn scaling_a_body_scales_its_support(axes in proptest::collection::vec(0.3..3.0f64, 3), r in 0.1..5.0f64, seed in any::<u64>()) {
        let k = body(&axes);
        let rk = k.scaled(r).unwrap();
        let u = random_unit_vector(3, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!((rk.h().value(&u) - r * k.h().value(&u)).abs() <= 1e-12 * (1.0 + r * k.h().value(&u)));
    }

    #[test]
    fn mollifier_is_linear(seed in any::<u64>(), alpha in -2.0..2.0f64, beta in -2.0..2.0f64) {
        let (f, g) = (polynomial(3, seed), polynomial(3, seed.wrapping_add(1)));
        let kernel = MollifierKernel::new(3, 8.0, 120, seed).unwrap();
        let lhs = kernel.apply(&SphericalFunction::combination(vec![(alpha, f.clone()), (beta, g.clone())])).unwrap();
        let (mf, mg) = (kernel.apply(&f).unwrap(), kernel.apply(&g).unwrap());
        let u = random_unit_vector(3, &mut ChaCha8Rng::seed_from_u64(seed ^ 7));
        let want = alpha * mf.value(&u) + beta * mg.value(&u);
        prop_assert!((lhs.value(&u) - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn functionals_are_translation_invariant(seed in any::<u64>(), shift in proptest::collection::vec(-1.0..1.0f64, 3)) {
        let grid = spiral(2048);
        let spec = FunctionalSpec::new(polynomial(3, seed), 2).unwrap();
        let k = body(&[1.0, 2.0, 0.5]);
        let moved = k.translated(&DVector::from_vec(shift)).unwrap();
        let (a, b) = (functional_f(&spec, &k, &grid).unwrap(), functional_f(&spec, &moved, &grid).unwrap());
        prop_assert!((a.value - b.value).abs() <= a.tolerance() + b.tolerance() + 1e-10 * (1.0 + a.value.abs()));
    }

    #[test]
    fn condition_verdict_ignores_linear_terms(seed in any::<u64>()) {
        let grid = spiral(1024);
        let f = polynomial(3, seed);
        let g = f.add(&SphericalFunction::linear(DVector::from_vec(vec![0.7, -1.1, 0.4])));
        for i in 1..3 {
            let (a, b) = (check_mi(&f, i, &grid, 1e-7).unwrap(), check_mi(&g, i, &grid, 1e-7).unwrap());
            prop_assert_eq!(a.verdict, b.verdict);
            prop_assert!((a.worst_value - b.worst_value).abs() <= 1e-8 * (1.0 + a.worst_value.abs()));
        }
    }
}
