#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rbmci::determinant::Determinant;
use rbmci::fcidump::IntegralTable;

pub const FIXTURES: [&str; 3] = ["h2", "h4_chain", "h2o"];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(format!("{name}.fcidump"))
}

pub fn load(name: &str) -> IntegralTable {
    IntegralTable::from_path(fixture_path(name)).unwrap()
}

pub struct Reference {
    pub e_hf: f64,
    pub e_fci: f64,
}

/// Energies computed with an independent quantum chemistry package.
pub fn reference(name: &str) -> Reference {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/reference.json");
    let all: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    Reference {
        e_hf: all[name]["e_hf"].as_f64().unwrap(),
        e_fci: all[name]["e_fci"].as_f64().unwrap(),
    }
}

/// Occupation string over 2n spin orbitals: alpha orbitals at 0..n, beta at n..2n.
fn occupation(d: &Determinant, n: usize) -> u128 {
    d.alpha as u128 | (d.beta as u128) << n
}

fn annihilate(state: u128, p: usize) -> Option<(u128, f64)> {
    if state >> p & 1 == 0 {
        return None;
    }
    let below = (state & ((1u128 << p) - 1)).count_ones();
    Some((state & !(1u128 << p), if below % 2 == 0 { 1.0 } else { -1.0 }))
}

fn create(state: u128, p: usize) -> Option<(u128, f64)> {
    if state >> p & 1 == 1 {
        return None;
    }
    let below = (state & ((1u128 << p) - 1)).count_ones();
    Some((state | 1u128 << p, if below % 2 == 0 { 1.0 } else { -1.0 }))
}

/// Applies a string of operators right to left: `ops = [(p, true), ...]` means
/// `a†_p` when true, `a_p` when false; the last entry acts first.
fn apply_ops(state: u128, ops: &[(usize, bool)]) -> Option<(u128, f64)> {
    let mut s = state;
    let mut sign = 1.0;
    for &(p, dagger) in ops.iter().rev() {
        let (next, f) = if dagger { create(s, p)? } else { annihilate(s, p)? };
        s = next;
        sign *= f;
    }
    Some((s, sign))
}

/// `H|ket>` in second quantization, with the determinant `|D> = a†_{i1} a†_{i2} ... |0>`
/// (`i1 < i2 < ...`). Orbitals are spatial, spin is encoded by the offset.
fn apply_hamiltonian(table: &IntegralTable, ket: u128) -> HashMap<u128, f64> {
    let n = table.n_orbitals();
    let mut out: HashMap<u128, f64> = HashMap::new();
    *out.entry(ket).or_default() += table.core_energy();
    let spin_offsets = [0, n];
    for &sp in &spin_offsets {
        for p in 0..n {
            for q in 0..n {
                let h = table.get_one(p + 1, q + 1).unwrap();
                if h == 0.0 {
                    continue;
                }
                if let Some((s, f)) = apply_ops(ket, &[(p + sp, true), (q + sp, false)]) {
                    *out.entry(s).or_default() += h * f;
                }
            }
        }
    }
    for &s1 in &spin_offsets {
        for &s2 in &spin_offsets {
            for p in 0..n {
                for q in 0..n {
                    for r in 0..n {
                        for s in 0..n {
                            let v = table.get_two_chem(p + 1, q + 1, r + 1, s + 1).unwrap();
                            if v == 0.0 {
                                continue;
                            }
                            // 1/2 (pq|rs) a†_{p s1} a†_{r s2} a_{s s2} a_{q s1}
                            let ops = [(p + s1, true), (r + s2, true), (s + s2, false), (q + s1, false)];
                            if let Some((st, f)) = apply_ops(ket, &ops) {
                                *out.entry(st).or_default() += 0.5 * v * f;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Dense Hamiltonian over `dets` by explicit operator application.
pub fn brute_force_hamiltonian(table: &IntegralTable, dets: &[Determinant]) -> DMatrix<f64> {
    let n = table.n_orbitals();
    let index: HashMap<u128, usize> = dets.iter().enumerate().map(|(i, d)| (occupation(d, n), i)).collect();
    let mut h = DMatrix::zeros(dets.len(), dets.len());
    for (j, d) in dets.iter().enumerate() {
        for (state, value) in apply_hamiltonian(table, occupation(d, n)) {
            if let Some(&i) = index.get(&state) {
                h[(i, j)] += value;
            }
        }
    }
    h
}

/// Random integrals with the full 8-fold symmetry.
pub fn random_table(n_orbitals: usize, n_alpha: usize, n_beta: usize, seed: u64) -> IntegralTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ms2 = n_alpha as i32 - n_beta as i32;
    let mut t = IntegralTable::new(n_orbitals, n_alpha + n_beta, ms2).unwrap();
    t.set_core_energy(rng.gen_range(-1.0..1.0));
    for p in 1..=n_orbitals {
        for q in 1..=p {
            t.set_one(p, q, rng.gen_range(-1.0..1.0)).unwrap();
        }
    }
    for p in 1..=n_orbitals {
        for q in 1..=n_orbitals {
            for r in 1..=n_orbitals {
                for s in 1..=n_orbitals {
                    t.set_two(p, q, r, s, rng.gen_range(-0.5..0.5)).unwrap();
                }
            }
        }
    }
    t
}

/// Random symmetric matrix with entries uniform in `[-1, 1]` and a spread diagonal.
pub fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let x: f64 = rng.gen_range(-1.0..1.0);
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
        m[(i, i)] += i as f64 * 0.1;
    }
    m
}

/// Lowest eigenvalue by an independent route: nalgebra's full symmetric eigendecomposition.
pub fn dense_ground_energy(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}
