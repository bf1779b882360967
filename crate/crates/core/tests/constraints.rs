mod common;

use maxent_core::constraints::{
    induced_moments, kernel_basis, nesting_map, to_architecture, CoefficientMatrix,
};
use maxent_core::ising::{self, Hypergraph};
use maxent_core::linalg::Matrix;
use maxent_core::{solver, Distribution, Error, SolveOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_form_is_idempotent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, r, _) = common::random_marginal_system(&mut rng, 5);
        // The canonical rows need not contain an all-ones row, so one is appended;
        // it already lies in their span and must not change the result.
        let mut rows: Vec<Vec<f64>> = r.rows().rows_iter().map(|x| x.to_vec()).collect();
        rows.push(vec![1.0; r.states()]);
        let mut moments = r.moments().to_vec();
        moments.push(1.0);
        let again = to_architecture(&CoefficientMatrix::new(Matrix::from_rows(&rows), moments).unwrap()).unwrap();
        prop_assert!(r.approx_eq(&again, 1e-12));
    }

    #[test]
    fn binary_marginals_satisfy_normalization_identity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, r, _) = common::random_marginal_system(&mut rng, 6);
        prop_assert!(r.satisfies_normalization(1e-10));
    }

    #[test]
    fn empirical_distribution_is_feasible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, r, f) = common::random_marginal_system(&mut rng, 6);
        prop_assert!(r.residual(f.probs()) < 1e-10);
    }

    #[test]
    fn reduction_preserves_solution_set(seed in any::<u64>()) {
        // Vectors feasible for the raw system stay feasible for the canonical one,
        // and vice versa for points built from the canonical kernel.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, r, f) = common::random_marginal_system(&mut rng, 5);
        let raw_residual = |p: &[f64]| {
            c.rows().mul_vec(p).iter().zip(c.moments()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let k = kernel_basis(&r, &f).unwrap();
        for _ in 0..5 {
            let mut p = f.probs().to_vec();
            for v in k.vectors() {
                let x: f64 = rng.random_range(-1e-3..1e-3);
                for (pi, (vi, fi)) in p.iter_mut().zip(v.iter().zip(f.probs())) {
                    *pi += x * vi * fi.sqrt();
                }
            }
            prop_assert!(r.residual(&p) < 1e-10);
            prop_assert!(raw_residual(&p) < 1e-10);
        }
    }

    #[test]
    fn kernel_basis_invariants(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, r, f) = common::random_marginal_system(&mut rng, 5);
        let p_hat = solver::solve_newton(&r, &SolveOptions::newton()).unwrap().distribution;
        let k = kernel_basis(&r, &p_hat).unwrap();
        prop_assert_eq!(k.dim(), r.states() - r.rank());
        for (i, x) in k.vectors().iter().enumerate() {
            for a in 0..r.rank() {
                let s: f64 = (0..r.states()).map(|al| r.rows()[(a, al)] * p_hat.probs()[al].sqrt() * x[al]).sum();
                prop_assert!(s.abs() < 1e-10);
            }
            for (j, y) in k.vectors().iter().enumerate() {
                let d: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                prop_assert!((d - f64::from(u8::from(i == j))).abs() < 1e-10);
            }
        }
        let _ = f;
    }

    #[test]
    fn nesting_is_transitive(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = 4;
        let archs: Vec<_> = (0..3).map(|_| ising::architecture(&common::random_closure(&mut rng, l))).collect();
        let (a, b, c) = (&archs[0], &archs[1], &archs[2]);
        if nesting_map(a, b).is_some() && nesting_map(b, c).is_some() {
            prop_assert!(nesting_map(a, c).is_some());
        }
    }
}

#[test]
fn nesting_chain_is_transitive() {
    // Explicit chain so the implication above is exercised at least once.
    let l = 5;
    let a =
        ising::architecture(&ising::closure(&Hypergraph::new(l, &[vec![3, 5]]).unwrap()).unwrap());
    let b = ising::architecture(
        &ising::closure(&Hypergraph::new(l, &[vec![3, 5], vec![1, 2, 3]]).unwrap()).unwrap(),
    );
    let c = ising::architecture(&ising::closure(&Hypergraph::g_ising()).unwrap());
    assert!(nesting_map(&a, &b).is_some());
    assert!(nesting_map(&b, &c).is_some());
    assert!(nesting_map(&a, &c).is_some());
    assert!(nesting_map(&c, &a).is_none());
}

#[test]
fn nesting_map_reconstructs_rows() {
    let a =
        ising::architecture(&ising::closure(&Hypergraph::new(5, &[vec![3, 5]]).unwrap()).unwrap());
    let c = ising::architecture(&ising::closure(&Hypergraph::g_ising()).unwrap());
    let t = nesting_map(&a, &c).unwrap();
    assert_eq!(t.matrix().nrows(), a.rank());
    assert_eq!(t.matrix().ncols(), c.rank());
    assert!(t.matrix().matmul(c.rows()).max_abs_diff(a.rows()) < 1e-9);
    let id = nesting_map(&c, &c).unwrap();
    assert!(id.matrix().max_abs_diff(&Matrix::identity(c.rank())) < 1e-12);
}

#[test]
fn disjoint_single_edges_are_not_nested() {
    let e12 =
        ising::architecture(&ising::closure(&Hypergraph::new(4, &[vec![1, 2]]).unwrap()).unwrap());
    let e34 =
        ising::architecture(&ising::closure(&Hypergraph::new(4, &[vec![3, 4]]).unwrap()).unwrap());
    assert!(nesting_map(&e12, &e34).is_none());
    assert!(nesting_map(&e34, &e12).is_none());
    // Independent check: the least-squares residual of R = T·R' is far from zero.
    let gram = e34.rows().weighted_gram(&[1.0; 16]);
    let chol = maxent_core::linalg::Cholesky::new(&gram, 1e-12).unwrap();
    let mut worst = 0.0_f64;
    for row in e12.rows().rows_iter() {
        let t = chol.solve(&e34.rows().mul_vec(row));
        let fit = e34.rows().tr_mul_vec(&t);
        worst = worst.max(
            fit.iter()
                .zip(row)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
    }
    assert!(worst > 0.1);
}

#[test]
fn pair_moment_under_uniform() {
    let c = ising::closure(&Hypergraph::new(5, &[vec![1, 2]]).unwrap()).unwrap();
    let coeffs = ising::to_coefficients(&c);
    // Rows: normalization, {1}, {2}, {1,2}.
    let pair_row = coeffs.rows().row(3).to_vec();
    let m: f64 = pair_row.iter().sum::<f64>() / 32.0;
    assert!((m - 0.25).abs() < 1e-15);
    let r = to_architecture(&coeffs).unwrap();
    let moments = induced_moments(&r, &Distribution::uniform(32)).unwrap();
    assert!((moments.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn coefficient_validation() {
    let no_norm = CoefficientMatrix::new(Matrix::from_rows(&[vec![1.0, 0.0]]), vec![0.5]);
    assert!(matches!(no_norm, Err(Error::InvalidCoefficients(_))));
    let zero_row = CoefficientMatrix::new(
        Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]),
        vec![1.0, 0.0],
    );
    assert!(matches!(zero_row, Err(Error::InvalidCoefficients(_))));
}

#[test]
fn identity_kernel_is_empty_and_two_state_kernel_is_antisymmetric() {
    let f = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
    let id = to_architecture(
        &CoefficientMatrix::from_distribution(
            Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![1.0; 3]]),
            &f,
        )
        .unwrap(),
    )
    .unwrap();
    assert_eq!(kernel_basis(&id, &f).unwrap().dim(), 0);

    let u = Distribution::uniform(2);
    let norm = to_architecture(
        &CoefficientMatrix::new(Matrix::from_rows(&[vec![1.0, 1.0]]), vec![1.0]).unwrap(),
    )
    .unwrap();
    let k = kernel_basis(&norm, &u).unwrap();
    let v = &k.vectors()[0];
    assert!((v[0].abs() - 0.5f64.sqrt()).abs() < 1e-12);
    assert!((v[0] + v[1]).abs() < 1e-12);
}
