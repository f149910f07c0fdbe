mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rbmci::determinant::{enumerate_space, to_key, Determinant};
use rbmci::eigensolver::{
    build_hamiltonian, davidson_lowest, default_guess, dense_lowest, diagonalize, DavidsonOptions, SolverKind,
    SparseHamiltonian,
};
use rbmci::Error;

fn overlap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().abs()
}

#[test]
fn davidson_matches_dense_in_energy_and_vector() {
    for (trial, n) in [2usize, 10, 57, 300, 500].into_iter().enumerate() {
        let m = common::random_symmetric(n, 40 + trial as u64);
        let h = SparseHamiltonian::from_dense(&m).unwrap();
        let d = davidson_lowest(&h, &default_guess(&h), &DavidsonOptions::default()).unwrap();
        let e = dense_lowest(&h, 2000).unwrap();
        assert!((d.energy - common::dense_ground_energy(&m)).abs() <= 1e-10, "dim {n}");
        assert!((d.energy - e.energy).abs() <= 1e-10);
        assert!(overlap(&d.vector, &e.vector) >= 1.0 - 1e-8, "dim {n}");
        // residual criterion holds
        let x = DVector::from_vec(d.vector.clone());
        let r = &m * &x - d.energy * &x;
        assert!(r.norm() <= 1e-9 * 1.0001);
    }
}

#[test]
fn diagonally_dominant_300() {
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let mut m = DMatrix::zeros(300, 300);
    for i in 0..300 {
        for j in 0..i {
            let x = rng.gen_range(-0.01..0.01);
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
        m[(i, i)] = i as f64 + rng.gen_range(0.0..0.5);
    }
    let h = SparseHamiltonian::from_dense(&m).unwrap();
    let d = davidson_lowest(&h, &default_guess(&h), &DavidsonOptions::default()).unwrap();
    assert!((d.energy - common::dense_ground_energy(&m)).abs() <= 1e-10);
}

#[test]
fn sign_convention_and_normalization() {
    let t = common::load("h4_chain");
    let dets = enumerate_space(4, 2, 2);
    for solver in [SolverKind::Dense, SolverKind::Davidson] {
        let s = diagonalize(&dets, &t, None, solver, &DavidsonOptions::default()).unwrap();
        assert!((s.norm_squared() - 1.0).abs() <= 1e-12);
        let big = s
            .coefficients
            .iter()
            .copied()
            .fold(0.0f64, |a, c| if c.abs() > a.abs() { c } else { a });
        assert!(big > 0.0);
        let reference = common::reference("h4_chain").e_fci;
        assert!(
            (s.energy - reference).abs() < 1e-9,
            "{solver:?}: {} vs {reference}",
            s.energy
        );
    }
}

#[test]
fn dense_energy_matches_external_reference() {
    for name in common::FIXTURES {
        let t = common::load(name);
        let dets = enumerate_space(t.n_orbitals(), t.n_alpha(), t.n_beta());
        let s = diagonalize(&dets, &t, None, SolverKind::Dense, &DavidsonOptions::default()).unwrap();
        let reference = common::reference(name).e_fci;
        assert!(
            (s.energy - reference).abs() < 1e-9,
            "{name}: {} vs {reference}",
            s.energy
        );
    }
}

#[test]
fn dense_cutoff_refuses() {
    let h = SparseHamiltonian::from_dense(&DMatrix::identity(5, 5)).unwrap();
    assert!(matches!(dense_lowest(&h, 4), Err(Error::Refused(_))));
}

#[test]
fn rayleigh_quotient_equals_energy() {
    let t = common::load("h2o");
    let dets = enumerate_space(7, 5, 5);
    let h = build_hamiltonian(&dets, &t).unwrap();
    let s = diagonalize(&dets, &t, None, SolverKind::Davidson, &DavidsonOptions::default()).unwrap();
    let hc = h.matvec(&s.coefficients);
    let rq: f64 = hc.iter().zip(&s.coefficients).map(|(a, b)| a * b).sum();
    assert!((rq - s.energy).abs() < 1e-12);
}

#[test]
fn coordinate_dump_lists_both_triangles() {
    let h = SparseHamiltonian::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0])).unwrap();
    let text = h.to_coordinate_text();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("1 1 "));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn matvec_matches_dense(n in 1usize..80, seed in any::<u64>()) {
        let m = common::random_symmetric(n, seed);
        let h = SparseHamiltonian::from_dense(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dense = &m * DVector::from_vec(x.clone());
        for (a, b) in h.matvec(&x).iter().zip(dense.iter()) {
            prop_assert!((a - b).abs() <= 1e-13);
        }
    }

    #[test]
    fn variational_monotonicity_on_nested_sets(seed in any::<u64>()) {
        let t = common::load("h4_chain");
        let full = enumerate_space(4, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<Determinant> = full.clone();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let mut previous = f64::INFINITY;
        for size in [1, 4, 9, 20, 36] {
            let mut subset = order[..size].to_vec();
            subset.sort_by_key(|d| to_key(d, 4));
            let e = diagonalize(&subset, &t, None, SolverKind::Dense, &DavidsonOptions::default()).unwrap().energy;
            prop_assert!(e <= previous + 1e-12);
            previous = e;
        }
    }
}
