mod common;

use proptest::prelude::*;
use rbmci::determinant::{
    combinations, connectivity_filter, dedupe_and_taboo, enumerate_space, excitation_degree, format_determinants,
    from_key, generate_cisd, hamming_distance, hf_reference, parse_determinants, to_key, Determinant, DeterminantKey,
    TabooList,
};

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn cisd_closed_form(na: usize, nb: usize, n: usize) -> usize {
    let (va, vb) = (n - na, n - nb);
    1 + na * va + nb * vb + binom(na, 2) * binom(va, 2) + binom(nb, 2) * binom(vb, 2) + na * va * nb * vb
}

/// Random determinant with exactly `na`/`nb` electrons in `n` orbitals.
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

#[test]
fn cisd_size_matches_closed_form() {
    for n in 1..=9 {
        for na in 0..=n {
            for nb in 0..=n {
                let hf = hf_reference(na, nb, n).unwrap();
                let cisd = generate_cisd(&hf, n);
                assert_eq!(cisd.len(), cisd_closed_form(na, nb, n), "({na},{nb},{n})");
                assert!(cisd.iter().all(|d| d.is_valid(n, na, nb)));
                let keys: Vec<DeterminantKey> = cisd.iter().map(|d| to_key(d, n)).collect();
                assert!(keys.windows(2).all(|w| w[0] < w[1]), "sorted and unique");
            }
        }
    }
}

#[test]
fn triple_next_to_a_double_survives_the_filter() {
    let t = common::load("h2o");
    let hf = hf_reference(5, 5, 7).unwrap();
    let cisd = generate_cisd(&hf, 7);
    // alpha double (4,5 -> 6,7) plus beta single (5 -> 6): degree 3 from HF,
    // degree 1 from the alpha double already in the set
    let triple = Determinant::new(0b1100111, 0b0101111);
    assert_eq!(excitation_degree(&triple, &hf).unwrap(), 3);
    assert!(cisd.contains(&Determinant::new(0b1100111, 0b0011111)));
    assert_eq!(connectivity_filter(&[triple], &cisd), vec![triple]);
    // a quadruple of HF is farther than two from every CISD member
    let quad = Determinant::new(0b1100111, 0b1100111);
    assert_eq!(excitation_degree(&quad, &hf).unwrap(), 4);
    assert_eq!(connectivity_filter(&[quad], &[hf]), vec![]);
    assert_eq!(t.n_orbitals(), 7);
}

#[test]
fn keys_injective_over_every_pattern() {
    for n in 1..=10 {
        let mut seen = std::collections::HashSet::new();
        for a in 0..1u64 << n {
            for b in 0..1u64 << n {
                let d = Determinant::new(a, b);
                let k = to_key(&d, n);
                assert!(seen.insert(k));
                assert_eq!(from_key(k, n).unwrap(), d);
            }
        }
    }
    assert!(from_key(DeterminantKey(1 << 4), 2).is_err());
}

#[test]
fn full_space_sizes() {
    for n in 1..=8 {
        for na in 0..=n {
            let space = enumerate_space(n, na, na);
            assert_eq!(space.len(), binom(n, na).pow(2));
            assert_eq!(combinations(n, na).len(), binom(n, na));
        }
    }
}

#[test]
fn taboo_and_dedupe() {
    let mut taboo = TabooList::new(4);
    let a = Determinant::new(0b0011, 0b0011);
    let b = Determinant::new(0b0101, 0b0011);
    assert!(taboo.insert(&a));
    assert!(!taboo.insert(&a));
    assert_eq!(taboo.len(), 1);
    assert_eq!(dedupe_and_taboo(&[b, a, b], &taboo), vec![b]);
    assert_eq!(dedupe_and_taboo(&[b, a, b], &TabooList::new(4)).len(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn hamming_triangle_and_degree_symmetry(
        a in det_strategy(10, 4, 3),
        b in det_strategy(10, 4, 3),
        c in det_strategy(10, 4, 3),
    ) {
        prop_assert!(hamming_distance(&a, &c) <= hamming_distance(&a, &b) + hamming_distance(&b, &c));
        prop_assert_eq!(excitation_degree(&a, &b).unwrap(), excitation_degree(&b, &a).unwrap());
        prop_assert_eq!(hamming_distance(&a, &b) % 2, 0);
        prop_assert_eq!(hamming_distance(&a, &a), 0);
    }

    #[test]
    fn key_round_trip(d in det_strategy(30, 9, 12)) {
        prop_assert_eq!(from_key(to_key(&d, 30), 30).unwrap(), d);
    }

    #[test]
    fn text_round_trip(dets in prop::collection::vec(det_strategy(12, 5, 4), 0..20)) {
        let text = format_determinants(&dets, 12);
        prop_assert_eq!(parse_determinants(&text, 12).unwrap(), dets);
    }

    #[test]
    fn filter_keeps_exactly_the_close_candidates(
        cands in prop::collection::vec(det_strategy(8, 3, 3), 1..30),
        current in prop::collection::vec(det_strategy(8, 3, 3), 1..10),
    ) {
        let kept = connectivity_filter(&cands, &current);
        let expected: Vec<Determinant> = cands
            .iter()
            .copied()
            .filter(|c| current.iter().any(|d| excitation_degree(c, d).unwrap() <= 2))
            .collect();
        prop_assert_eq!(kept, expected);
    }

    #[test]
    fn cisd_members_pass_pauli_and_degree(na in 0usize..6, nb in 0usize..6, extra in 0usize..5) {
        let n = na.max(nb) + extra;
        prop_assume!(n >= 1);
        let hf = hf_reference(na, nb, n).unwrap();
        for d in generate_cisd(&hf, n) {
            prop_assert!(d.is_valid(n, na, nb));
            prop_assert!(excitation_degree(&d, &hf).unwrap() <= 2);
        }
    }
}
