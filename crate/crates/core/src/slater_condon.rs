//! Hamiltonian matrix elements between determinants (Slater-Condon rules).
//!
//! Spin-orbitals are ordered alpha block first, then beta, each by ascending
//! orbital index. Phases are taken with respect to that ordering.

use crate::determinant::{hamming_distance, BitIter, Determinant};
use crate::error::{Error, Result};
use crate::fcidump::IntegralTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Alpha,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinOrbital {
    /// 0-based spatial orbital.
    pub orbital: usize,
    pub spin: Spin,
}

impl SpinOrbital {
    fn canonical(self) -> u32 {
        match self.spin {
            Spin::Alpha => self.orbital as u32,
            Spin::Beta => 64 + self.orbital as u32,
        }
    }
}

/// Excitation connecting a bra `D1` to a ket `D2`.
///
/// `holes` are occupied in the bra and empty in the ket, `particles` the reverse,
/// so that `|D1> = phase * a†(holes) a(particles) |D2>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExcitationInfo {
    pub degree: usize,
    pub holes: Vec<SpinOrbital>,
    pub particles: Vec<SpinOrbital>,
    pub phase: i8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Excitation {
    Connected(ExcitationInfo),
    Disconnected,
}

/// Occupation of the full spin-orbital string, alpha in the low 64 bits.
fn spin_string(d: &Determinant) -> u128 {
    d.alpha as u128 | (d.beta as u128) << 64
}

fn occupied_below(occ: u128, pos: u32) -> u32 {
    (occ & ((1u128 << pos) - 1)).count_ones()
}

/// Sign of applying `a†(creates[last]) .. a†(creates[0]) a(annihilates[last]) .. a(annihilates[0])`
/// to `occ`, operators acting right to left in the order listed.
fn operator_phase(mut occ: u128, annihilates: &[u32], creates: &[u32]) -> i8 {
    let mut odd = 0u32;
    for &pos in annihilates {
        odd += occupied_below(occ, pos);
        occ &= !(1u128 << pos);
    }
    for &pos in creates {
        odd += occupied_below(occ, pos);
        occ |= 1u128 << pos;
    }
    if odd % 2 == 0 {
        1
    } else {
        -1
    }
}

fn collect(bits: u64, spin: Spin, out: &mut Vec<SpinOrbital>) {
    out.extend(BitIter(bits).map(|orbital| SpinOrbital { orbital, spin }));
}

fn check_counts(d1: &Determinant, d2: &Determinant) -> Result<()> {
    if d1.n_alpha() != d2.n_alpha() || d1.n_beta() != d2.n_beta() {
        return Err(Error::Domain(format!(
            "determinants have different electron counts: ({}a,{}b) vs ({}a,{}b)",
            d1.n_alpha(),
            d1.n_beta(),
            d2.n_alpha(),
            d2.n_beta()
        )));
    }
    Ok(())
}

pub fn analyze_excitation(d1: &Determinant, d2: &Determinant) -> Result<Excitation> {
    check_counts(d1, d2)?;
    let degree = hamming_distance(d1, d2) / 2;
    if degree > 2 {
        return Ok(Excitation::Disconnected);
    }
    let mut holes = Vec::with_capacity(degree);
    let mut particles = Vec::with_capacity(degree);
    collect(d1.alpha & !d2.alpha, Spin::Alpha, &mut holes);
    collect(d1.beta & !d2.beta, Spin::Beta, &mut holes);
    collect(d2.alpha & !d1.alpha, Spin::Alpha, &mut particles);
    collect(d2.beta & !d1.beta, Spin::Beta, &mut particles);
    let annihilate: Vec<u32> = particles.iter().map(|s| s.canonical()).collect();
    // a†_p a†_q a_s a_r: annihilate r then s, create q then p
    let create: Vec<u32> = holes.iter().rev().map(|s| s.canonical()).collect();
    let phase = operator_phase(spin_string(d2), &annihilate, &create);
    Ok(Excitation::Connected(ExcitationInfo {
        degree,
        holes,
        particles,
        phase,
    }))
}

fn same_spin(a: Spin, b: Spin) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

fn diagonal(d: &Determinant, table: &IntegralTable) -> f64 {
    let alpha: Vec<usize> = d.alpha_orbitals().collect();
    let beta: Vec<usize> = d.beta_orbitals().collect();
    let mut one = 0.0;
    for &i in alpha.iter().chain(&beta) {
        one += table.h1(i, i);
    }
    // 1/2 sum over ordered pairs i != j equals the sum over unordered pairs
    let mut two = 0.0;
    for block in [&alpha, &beta] {
        for (x, &i) in block.iter().enumerate() {
            for &j in &block[x + 1..] {
                two += table.phys(i, j, i, j) - table.phys(i, j, j, i);
            }
        }
    }
    for &i in &alpha {
        for &j in &beta {
            two += table.phys(i, j, i, j);
        }
    }
    table.core_energy() + one + two
}

fn single(hole: SpinOrbital, particle: SpinOrbital, ket: &Determinant, table: &IntegralTable) -> f64 {
    let (p, q) = (hole.orbital, particle.orbital);
    let mut value = table.h1(p, q);
    let (same, other) = match particle.spin {
        Spin::Alpha => (ket.alpha & !(1 << q), ket.beta),
        Spin::Beta => (ket.beta & !(1 << q), ket.alpha),
    };
    for i in BitIter(same) {
        value += table.phys(p, i, q, i) - table.phys(p, i, i, q);
    }
    for i in BitIter(other) {
        value += table.phys(p, i, q, i);
    }
    value
}

fn double(holes: &[SpinOrbital], particles: &[SpinOrbital], table: &IntegralTable) -> f64 {
    let (p, q) = (holes[0], holes[1]);
    let (r, s) = (particles[0], particles[1]);
    let direct = same_spin(p.spin, r.spin) * same_spin(q.spin, s.spin);
    let exchange = same_spin(p.spin, s.spin) * same_spin(q.spin, r.spin);
    let mut value = 0.0;
    if direct != 0.0 {
        value += table.phys(p.orbital, q.orbital, r.orbital, s.orbital);
    }
    if exchange != 0.0 {
        value -= table.phys(p.orbital, q.orbital, s.orbital, r.orbital);
    }
    value
}

/// `<D1|H|D2>` in Hartree, including the core energy on the diagonal.
pub fn matrix_element(d1: &Determinant, d2: &Determinant, table: &IntegralTable) -> Result<f64> {
    let n = table.n_orbitals();
    let range = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
    for d in [d1, d2] {
        if (d.alpha | d.beta) & !range != 0 {
            return Err(Error::IndexOutOfRange {
                index: 64 - (d.alpha | d.beta).leading_zeros() as usize,
                n_orbitals: n,
                line: None,
            });
        }
    }
    let info = match analyze_excitation(d1, d2)? {
        Excitation::Disconnected => return Ok(0.0),
        Excitation::Connected(info) => info,
    };
    let phase = info.phase as f64;
    Ok(match info.degree {
        0 => diagonal(d1, table),
        1 => phase * single(info.holes[0], info.particles[0], d2, table),
        _ => phase * double(&info.holes, &info.particles, table),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fcidump::parse_fcidump;

    fn connected(d1: Determinant, d2: Determinant) -> ExcitationInfo {
        match analyze_excitation(&d1, &d2).unwrap() {
            Excitation::Connected(info) => info,
            Excitation::Disconnected => panic!("expected connected pair"),
        }
    }

    #[test]
    fn identity_excitation() {
        let d = Determinant::new(0b0011, 0b0001);
        let info = connected(d, d);
        assert_eq!(info.degree, 0);
        assert_eq!(info.phase, 1);
        assert!(info.holes.is_empty());
    }

    #[test]
    fn adjacent_single_has_positive_phase() {
        let info = connected(Determinant::new(0b0011, 0), Determinant::new(0b0101, 0));
        assert_eq!(info.degree, 1);
        assert_eq!(info.phase, 1);
        assert_eq!(info.holes[0].orbital, 1);
        assert_eq!(info.particles[0].orbital, 2);
    }

    #[test]
    fn single_across_occupied_orbital_is_negative() {
        // bra 0b0111, ket 0b1101: electron moves between orbitals 2 and 4 past orbital 3
        let info = connected(Determinant::new(0b0111, 0), Determinant::new(0b1101, 0));
        assert_eq!(info.phase, -1);
    }

    /// Three electrons in four orbitals: expand both determinants as explicit
    /// antisymmetrized products and read the sign of the overlap of
    /// a†_hole a_particle |ket> with |bra>.
    #[test]
    fn phase_against_explicit_antisymmetrization() {
        fn perm_sign(p: &[usize]) -> i32 {
            let mut s = 1;
            for i in 0..p.len() {
                for j in i + 1..p.len() {
                    if p[i] > p[j] {
                        s = -s;
                    }
                }
            }
            s
        }
        // ket occupied (0,2,3); apply a†_1 a_3: replace orbital 3 with 1 in place,
        // giving the ordered product (0,2,1); its sign relative to sorted (0,1,2)
        let replaced = [0usize, 2, 1];
        let mut sorted = replaced;
        sorted.sort();
        let idx: Vec<usize> = replaced
            .iter()
            .map(|x| sorted.iter().position(|y| y == x).unwrap())
            .collect();
        let explicit = perm_sign(&idx);
        let info = connected(Determinant::new(0b0111, 0), Determinant::new(0b1101, 0));
        assert_eq!(info.phase as i32, explicit);
    }

    #[test]
    fn disconnected_and_domain() {
        let a = Determinant::new(0b000111, 0);
        let b = Determinant::new(0b111000, 0);
        assert_eq!(analyze_excitation(&a, &b).unwrap(), Excitation::Disconnected);
        assert!(analyze_excitation(&a, &Determinant::new(0b11, 0)).is_err());
    }

    #[test]
    fn phase_symmetric_under_transpose() {
        let a = Determinant::new(0b01011, 0b00111);
        for b in [
            Determinant::new(0b10011, 0b00111),
            Determinant::new(0b10110, 0b00111),
            Determinant::new(0b01011, 0b11001),
            Determinant::new(0b11010, 0b01101),
        ] {
            assert_eq!(connected(a, b).phase, connected(b, a).phase, "{b:?}");
        }
    }

    #[test]
    fn degree_three_is_zero() {
        let t = IntegralTable::new(6, 6, 0).unwrap();
        let a = Determinant::new(0b000111, 0b000111);
        let b = Determinant::new(0b111000, 0b000111);
        assert_eq!(matrix_element(&a, &b, &t).unwrap(), 0.0);
    }

    #[test]
    fn h2_elements_from_integrals() {
        let text = include_str!("../tests/fixtures/h2.fcidump");
        let t = parse_fcidump(text).unwrap();
        let hf = Determinant::new(1, 1);
        let dbl = Determinant::new(2, 2);
        let expected_hf = t.core_energy() + 2.0 * t.get_one(1, 1).unwrap() + t.get_two_chem(1, 1, 1, 1).unwrap();
        assert!((matrix_element(&hf, &hf, &t).unwrap() - expected_hf).abs() < 1e-14);
        let k12 = t.get_two_chem(1, 2, 1, 2).unwrap();
        assert!((matrix_element(&hf, &dbl, &t).unwrap() - k12).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_determinant() {
        let t = IntegralTable::new(2, 2, 0).unwrap();
        let d = Determinant::new(0b100, 0b1);
        assert!(matches!(matrix_element(&d, &d, &t), Err(Error::IndexOutOfRange { .. })));
    }
}
