//! Slater determinants as pairs of occupation bitmasks.
//!
//! Bit `p` of `alpha` (resp. `beta`) is set when spatial orbital `p` (0-based)
//! holds a spin-up (resp. spin-down) electron. Up to [`MAX_ORBITALS`] spatial
//! orbitals are supported.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ORBITALS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Determinant {
    pub alpha: u64,
    pub beta: u64,
}

/// Integer key formed by placing the beta bits above the alpha bits:
/// `key = alpha | beta << n_orbitals`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeterminantKey(pub u128);

fn mask(n_orbitals: usize) -> u64 {
    if n_orbitals >= 64 {
        u64::MAX
    } else {
        (1u64 << n_orbitals) - 1
    }
}

fn check_orbitals(n_orbitals: usize) -> Result<()> {
    if n_orbitals > MAX_ORBITALS {
        Err(Error::Capacity(format!(
            "{n_orbitals} orbitals exceed the {MAX_ORBITALS}-orbital bitmask"
        )))
    } else {
        Ok(())
    }
}

impl Determinant {
    pub const fn new(alpha: u64, beta: u64) -> Self {
        Self { alpha, beta }
    }

    pub fn n_alpha(&self) -> usize {
        self.alpha.count_ones() as usize
    }

    pub fn n_beta(&self) -> usize {
        self.beta.count_ones() as usize
    }

    /// Pauli bookkeeping: the right number of electrons per spin, all inside the orbital range.
    pub fn is_valid(&self, n_orbitals: usize, n_alpha: usize, n_beta: usize) -> bool {
        let m = mask(n_orbitals);
        self.alpha & !m == 0 && self.beta & !m == 0 && self.n_alpha() == n_alpha && self.n_beta() == n_beta
    }

    pub fn key(&self, n_orbitals: usize) -> DeterminantKey {
        to_key(self, n_orbitals)
    }

    /// Occupied alpha orbitals, ascending.
    pub fn alpha_orbitals(&self) -> BitIter {
        BitIter(self.alpha)
    }

    pub fn beta_orbitals(&self) -> BitIter {
        BitIter(self.beta)
    }
}

/// Iterator over set bit positions, ascending.
#[derive(Debug, Clone)]
pub struct BitIter(pub u64);

impl Iterator for BitIter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            let p = self.0.trailing_zeros() as usize;
            self.0 &= self.0 - 1;
            Some(p)
        }
    }
}

pub fn to_key(det: &Determinant, n_orbitals: usize) -> DeterminantKey {
    DeterminantKey(det.alpha as u128 | (det.beta as u128) << n_orbitals)
}

pub fn from_key(key: DeterminantKey, n_orbitals: usize) -> Result<Determinant> {
    check_orbitals(n_orbitals)?;
    if 2 * n_orbitals < 128 && key.0 >> (2 * n_orbitals) != 0 {
        return Err(Error::Domain(format!(
            "key {} has bits at or above 2*n_orbitals = {}",
            key.0,
            2 * n_orbitals
        )));
    }
    let m = mask(n_orbitals) as u128;
    Ok(Determinant {
        alpha: (key.0 & m) as u64,
        beta: ((key.0 >> n_orbitals) & m) as u64,
    })
}

/// Hartree-Fock reference: the lowest `n_alpha` / `n_beta` orbitals occupied.
pub fn hf_reference(n_alpha: usize, n_beta: usize, n_orbitals: usize) -> Result<Determinant> {
    check_orbitals(n_orbitals)?;
    if n_alpha > n_orbitals || n_beta > n_orbitals {
        return Err(Error::Capacity(format!(
            "{n_alpha} alpha / {n_beta} beta electrons do not fit in {n_orbitals} orbitals"
        )));
    }
    Ok(Determinant::new(mask(n_alpha), mask(n_beta)))
}

pub fn hamming_distance(a: &Determinant, b: &Determinant) -> usize {
    ((a.alpha ^ b.alpha).count_ones() + (a.beta ^ b.beta).count_ones()) as usize
}

/// Number of electrons moved between two determinants with equal per-spin counts.
pub fn excitation_degree(a: &Determinant, b: &Determinant) -> Result<usize> {
    if a.n_alpha() != b.n_alpha() || a.n_beta() != b.n_beta() {
        return Err(Error::Domain(format!(
            "excitation degree undefined between ({}a,{}b) and ({}a,{}b)",
            a.n_alpha(),
            a.n_beta(),
            b.n_alpha(),
            b.n_beta()
        )));
    }
    Ok(hamming_distance(a, b) / 2)
}

/// All `n_orbitals`-bit masks with `k` bits set, ascending.
pub fn combinations(n_orbitals: usize, k: usize) -> Vec<u64> {
    if k > n_orbitals || n_orbitals > MAX_ORBITALS {
        return Vec::new();
    }
    if k == 0 {
        return vec![0];
    }
    let mut out = Vec::new();
    let last = mask(k) << (n_orbitals - k);
    let mut x = mask(k);
    loop {
        out.push(x);
        if x == last {
            break;
        }
        // next mask with the same popcount (Gosper's hack)
        let c = x & x.wrapping_neg();
        let r = x + c;
        x = (((r ^ x) >> 2) / c) | r;
    }
    out
}

/// Single- and double-excitation masks of one spin channel relative to `occ`.
fn channel_excitations(occ: u64, n_orbitals: usize, degree: usize) -> Vec<u64> {
    let virt = !occ & mask(n_orbitals);
    let occ_list: Vec<usize> = BitIter(occ).collect();
    let virt_list: Vec<usize> = BitIter(virt).collect();
    let mut out = Vec::new();
    match degree {
        1 => {
            for &i in &occ_list {
                for &a in &virt_list {
                    out.push(occ ^ (1 << i) ^ (1 << a));
                }
            }
        }
        2 => {
            for (x, &i) in occ_list.iter().enumerate() {
                for &j in &occ_list[x + 1..] {
                    for (y, &a) in virt_list.iter().enumerate() {
                        for &b in &virt_list[y + 1..] {
                            out.push(occ ^ (1 << i) ^ (1 << j) ^ (1 << a) ^ (1 << b));
                        }
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    out
}

/// The reference plus every spin-conserving single and double excitation, sorted by key.
pub fn generate_cisd(reference: &Determinant, n_orbitals: usize) -> Vec<Determinant> {
    let singles_a = channel_excitations(reference.alpha, n_orbitals, 1);
    let singles_b = channel_excitations(reference.beta, n_orbitals, 1);
    let mut out = vec![*reference];
    out.extend(singles_a.iter().map(|&a| Determinant::new(a, reference.beta)));
    out.extend(singles_b.iter().map(|&b| Determinant::new(reference.alpha, b)));
    out.extend(
        channel_excitations(reference.alpha, n_orbitals, 2)
            .into_iter()
            .map(|a| Determinant::new(a, reference.beta)),
    );
    out.extend(
        channel_excitations(reference.beta, n_orbitals, 2)
            .into_iter()
            .map(|b| Determinant::new(reference.alpha, b)),
    );
    for &a in &singles_a {
        for &b in &singles_b {
            out.push(Determinant::new(a, b));
        }
    }
    sort_by_key(&mut out, n_orbitals);
    out
}

/// Every determinant with the given electron counts, sorted by key.
pub fn enumerate_space(n_orbitals: usize, n_alpha: usize, n_beta: usize) -> Vec<Determinant> {
    let alphas = combinations(n_orbitals, n_alpha);
    let betas = combinations(n_orbitals, n_beta);
    // beta is the high half of the key, so beta-major order is key order
    betas
        .iter()
        .flat_map(|&b| alphas.iter().map(move |&a| Determinant::new(a, b)))
        .collect()
}

pub fn sort_by_key(dets: &mut [Determinant], n_orbitals: usize) {
    dets.sort_unstable_by_key(|d| to_key(d, n_orbitals));
}

/// Keeps candidates within excitation degree 2 (total Hamming distance ≤ 4)
/// of at least one member of `current`.
pub fn connectivity_filter(candidates: &[Determinant], current: &[Determinant]) -> Vec<Determinant> {
    candidates
        .par_iter()
        .filter(|c| current.iter().any(|d| hamming_distance(c, d) <= 4))
        .copied()
        .collect()
}

/// Registry of pruned determinant keys. Membership is permanent.
#[derive(Debug, Clone)]
pub struct TabooList {
    n_orbitals: usize,
    keys: BTreeSet<DeterminantKey>,
}

impl TabooList {
    pub fn new(n_orbitals: usize) -> Self {
        Self {
            n_orbitals,
            keys: BTreeSet::new(),
        }
    }

    /// Returns `true` if the key was not yet present.
    pub fn insert(&mut self, det: &Determinant) -> bool {
        self.keys.insert(to_key(det, self.n_orbitals))
    }

    pub fn insert_key(&mut self, key: DeterminantKey) -> bool {
        self.keys.insert(key)
    }

    pub fn contains(&self, det: &Determinant) -> bool {
        self.keys.contains(&to_key(det, self.n_orbitals))
    }

    pub fn contains_key(&self, key: &DeterminantKey) -> bool {
        self.keys.contains(key)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &DeterminantKey> {
        self.keys.iter()
    }
}

/// Removes duplicate and tabooed candidates, returning the survivors in key order.
pub fn dedupe_and_taboo(candidates: &[Determinant], taboo: &TabooList) -> Vec<Determinant> {
    let n = taboo.n_orbitals;
    let unique: BTreeSet<DeterminantKey> = candidates.iter().map(|d| to_key(d, n)).collect();
    unique
        .into_iter()
        .filter(|k| !taboo.contains_key(k))
        .map(|k| from_key(k, n).expect("key built from a determinant of the same width"))
        .collect()
}

fn bit_string(bits: u64, n_orbitals: usize) -> String {
    (0..n_orbitals)
        .map(|p| if bits >> p & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// One determinant per line, `alpha beta` as binary strings with orbital 1 first
/// (most significant orbital last).
pub fn format_determinants(dets: &[Determinant], n_orbitals: usize) -> String {
    let mut out = String::with_capacity(dets.len() * (2 * n_orbitals + 2));
    for d in dets {
        let _ = writeln!(
            out,
            "{} {}",
            bit_string(d.alpha, n_orbitals),
            bit_string(d.beta, n_orbitals)
        );
    }
    out
}

fn parse_bits(field: &str, n_orbitals: usize, line: usize) -> Result<u64> {
    if field.len() != n_orbitals {
        return Err(Error::Parse {
            line,
            message: format!("expected {n_orbitals} bits, found `{field}`"),
        });
    }
    field.chars().enumerate().try_fold(0u64, |acc, (p, c)| match c {
        '0' => Ok(acc),
        '1' => Ok(acc | 1 << p),
        _ => Err(Error::Parse {
            line,
            message: format!("invalid bit `{c}`"),
        }),
    })
}

pub fn parse_determinants(text: &str, n_orbitals: usize) -> Result<Vec<Determinant>> {
    check_orbitals(n_orbitals)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => continue,
            [a, b] => out.push(Determinant::new(
                parse_bits(a, n_orbitals, i + 1)?,
                parse_bits(b, n_orbitals, i + 1)?,
            )),
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected `alpha_bits beta_bits`".into(),
                })
            }
        }
    }
    Ok(out)
}
