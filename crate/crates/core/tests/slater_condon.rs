mod common;

use proptest::prelude::*;
use rbmci::determinant::{enumerate_space, excitation_degree, generate_cisd, hf_reference, Determinant};
use rbmci::eigensolver::build_hamiltonian;
use rbmci::slater_condon::{analyze_excitation, matrix_element, Excitation};

#[test]
fn random_integrals_match_second_quantization() {
    for (seed, (n, na, nb)) in [(3, 1, 1), (4, 2, 2), (4, 3, 1), (5, 2, 3), (6, 3, 3)]
        .into_iter()
        .enumerate()
    {
        let t = common::random_table(n, na, nb, seed as u64);
        let dets: Vec<Determinant> = enumerate_space(n, na, nb);
        let oracle = common::brute_force_hamiltonian(&t, &dets);
        for (i, a) in dets.iter().enumerate() {
            for (j, b) in dets.iter().enumerate() {
                let h = matrix_element(a, b, &t).unwrap();
                assert!(
                    (h - oracle[(i, j)]).abs() <= 1e-12,
                    "n={n} ({na},{nb}): <{a:?}|H|{b:?}> = {h} vs {}",
                    oracle[(i, j)]
                );
            }
        }
    }
}

#[test]
fn fixture_cisd_blocks_match_second_quantization() {
    for name in common::FIXTURES {
        let t = common::load(name);
        let hf = hf_reference(t.n_alpha(), t.n_beta(), t.n_orbitals()).unwrap();
        let dets = generate_cisd(&hf, t.n_orbitals());
        let built = build_hamiltonian(&dets, &t).unwrap().to_dense();
        let oracle = common::brute_force_hamiltonian(&t, &dets);
        assert!((&built - &oracle).abs().max() <= 1e-12, "{name}");
        assert!((&built - built.transpose()).abs().max() == 0.0, "{name}: not symmetric");
    }
}

#[test]
fn h2_elements_by_hand() {
    let t = common::load("h2");
    let hf = Determinant::new(0b01, 0b01);
    let double = Determinant::new(0b10, 0b10);
    let diag = t.core_energy() + 2.0 * t.get_one(1, 1).unwrap() + t.get_two_chem(1, 1, 1, 1).unwrap();
    assert!((matrix_element(&hf, &hf, &t).unwrap() - diag).abs() < 1e-14);
    let coupling = t.get_two_chem(1, 2, 1, 2).unwrap();
    assert!((matrix_element(&hf, &double, &t).unwrap() - coupling).abs() < 1e-14);
}

fn det_strategy(n: usize, na: usize, nb: usize) -> impl Strategy<Value = Determinant> {
    let a = proptest::sample::subsequence((0..n).collect::<Vec<_>>(), na);
    let b = proptest::sample::subsequence((0..n).collect::<Vec<_>>(), nb);
    (a, b).prop_map(|(a, b)| {
        Determinant::new(
            a.iter().fold(0, |m, &p| m | 1 << p),
            b.iter().fold(0, |m, &p| m | 1 << p),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn hermitian_and_zero_beyond_doubles(a in det_strategy(7, 5, 5), b in det_strategy(7, 5, 5)) {
        let t = common::load("h2o");
        let ab = matrix_element(&a, &b, &t).unwrap();
        let ba = matrix_element(&b, &a, &t).unwrap();
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
        let degree = excitation_degree(&a, &b).unwrap();
        match analyze_excitation(&a, &b).unwrap() {
            Excitation::Disconnected => {
                prop_assert!(degree > 2);
                prop_assert_eq!(ab, 0.0);
            }
            Excitation::Connected(info) => {
                prop_assert_eq!(info.degree, degree);
                prop_assert!(info.phase == 1 || info.phase == -1);
            }
        }
    }
}
