//! FCIDUMP integral files.
//!
//! The format is a Fortran namelist header (`&FCI NORB=.., NELEC=.., MS2=.., &END`)
//! followed by one `value i j k l` record per line, orbital indices 1-based:
//!
//! | indices          | meaning                                |
//! |------------------|----------------------------------------|
//! | `i j k l` > 0    | two-electron integral `(ij|kl)`        |
//! | `i j` > 0, `k l` = 0 | one-electron integral `h_ij`       |
//! | `i` > 0, rest 0  | orbital energy (kept, otherwise unused) |
//! | all 0            | core (nuclear repulsion) energy        |
//!
//! Two-electron integrals are stored once under the lexicographically smallest
//! of their eight permutationally equivalent index tuples.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IntegralTable {
    n_orbitals: usize,
    n_electrons: usize,
    ms2: i32,
    orbsym: Vec<i64>,
    isym: Option<i64>,
    core_energy: f64,
    orbital_energies: Vec<Option<f64>>,
    /// Dense row-major `n × n`, kept symmetric on every write.
    one_electron: Vec<f64>,
    two_electron: HashMap<u64, f64>,
}

/// Lexicographically smallest of the eight equivalent orderings of `(pq|rs)`.
pub fn canonical_index(p: usize, q: usize, r: usize, s: usize) -> (usize, usize, usize, usize) {
    let (a, b) = if p <= q { (p, q) } else { (q, p) };
    let (c, d) = if r <= s { (r, s) } else { (s, r) };
    if (a, b) <= (c, d) {
        (a, b, c, d)
    } else {
        (c, d, a, b)
    }
}

fn pack(p: usize, q: usize, r: usize, s: usize) -> u64 {
    let (a, b, c, d) = canonical_index(p, q, r, s);
    ((a as u64) << 48) | ((b as u64) << 32) | ((c as u64) << 16) | d as u64
}

fn unpack(key: u64) -> (usize, usize, usize, usize) {
    (
        (key >> 48) as usize & 0xffff,
        (key >> 32) as usize & 0xffff,
        (key >> 16) as usize & 0xffff,
        key as usize & 0xffff,
    )
}

impl IntegralTable {
    /// Empty table with every integral zero.
    pub fn new(n_orbitals: usize, n_electrons: usize, ms2: i32) -> Result<Self> {
        if n_orbitals == 0 {
            return Err(Error::Domain("NORB must be at least 1".into()));
        }
        if n_orbitals > u16::MAX as usize {
            return Err(Error::Capacity(format!("NORB={n_orbitals} exceeds {}", u16::MAX)));
        }
        if n_electrons == 0 || n_electrons > 2 * n_orbitals {
            return Err(Error::Domain(format!(
                "NELEC={n_electrons} must lie in [1, {}]",
                2 * n_orbitals
            )));
        }
        if ms2.unsigned_abs() as usize > n_electrons || (n_electrons as i64 + ms2 as i64) % 2 != 0 {
            return Err(Error::Domain(format!(
                "MS2={ms2} is inconsistent with NELEC={n_electrons}"
            )));
        }
        let n_alpha = (n_electrons as i64 + ms2 as i64) / 2;
        let n_beta = n_electrons as i64 - n_alpha;
        if n_alpha > n_orbitals as i64 || n_beta > n_orbitals as i64 {
            return Err(Error::Domain(format!(
                "{n_alpha} alpha / {n_beta} beta electrons do not fit in {n_orbitals} orbitals"
            )));
        }
        Ok(Self {
            n_orbitals,
            n_electrons,
            ms2,
            orbsym: Vec::new(),
            isym: None,
            core_energy: 0.0,
            orbital_energies: vec![None; n_orbitals],
            one_electron: vec![0.0; n_orbitals * n_orbitals],
            two_electron: HashMap::new(),
        })
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn n_electrons(&self) -> usize {
        self.n_electrons
    }

    pub fn ms2(&self) -> i32 {
        self.ms2
    }

    pub fn n_alpha(&self) -> usize {
        ((self.n_electrons as i64 + self.ms2 as i64) / 2) as usize
    }

    pub fn n_beta(&self) -> usize {
        self.n_electrons - self.n_alpha()
    }

    pub fn core_energy(&self) -> f64 {
        self.core_energy
    }

    pub fn orbsym(&self) -> &[i64] {
        &self.orbsym
    }

    pub fn isym(&self) -> Option<i64> {
        self.isym
    }

    /// Orbital energy record for 1-based orbital `p`, if the file carried one.
    pub fn orbital_energy(&self, p: usize) -> Result<Option<f64>> {
        self.check(p)?;
        Ok(self.orbital_energies[p - 1])
    }

    /// Number of stored (canonical) two-electron entries.
    pub fn n_two_electron_entries(&self) -> usize {
        self.two_electron.len()
    }

    fn check(&self, p: usize) -> Result<()> {
        if p == 0 || p > self.n_orbitals {
            Err(Error::IndexOutOfRange {
                index: p,
                n_orbitals: self.n_orbitals,
                line: None,
            })
        } else {
            Ok(())
        }
    }

    pub fn set_core_energy(&mut self, value: f64) {
        self.core_energy = value;
    }

    pub fn set_one(&mut self, p: usize, q: usize, value: f64) -> Result<()> {
        self.check(p)?;
        self.check(q)?;
        let n = self.n_orbitals;
        self.one_electron[(p - 1) * n + (q - 1)] = value;
        self.one_electron[(q - 1) * n + (p - 1)] = value;
        Ok(())
    }

    /// Sets `(pq|rs)` in chemists' notation, and with it all seven symmetric partners.
    pub fn set_two(&mut self, p: usize, q: usize, r: usize, s: usize, value: f64) -> Result<()> {
        for i in [p, q, r, s] {
            self.check(i)?;
        }
        self.two_electron.insert(pack(p, q, r, s), value);
        Ok(())
    }

    /// One-electron integral `h_pq` (1-based).
    pub fn get_one(&self, p: usize, q: usize) -> Result<f64> {
        self.check(p)?;
        self.check(q)?;
        Ok(self.h1(p - 1, q - 1))
    }

    /// Two-electron integral `(pq|rs)` in chemists' notation (1-based).
    pub fn get_two_chem(&self, p: usize, q: usize, r: usize, s: usize) -> Result<f64> {
        for i in [p, q, r, s] {
            self.check(i)?;
        }
        Ok(self.two_electron.get(&pack(p, q, r, s)).copied().unwrap_or(0.0))
    }

    /// Two-electron integral `<ij|kl>` in physicists' notation (1-based), `= (ik|jl)`.
    pub fn get_two_phys(&self, i: usize, j: usize, k: usize, l: usize) -> Result<f64> {
        self.get_two_chem(i, k, j, l)
    }

    /// Unchecked 0-based `h_pq`.
    #[inline]
    pub(crate) fn h1(&self, p: usize, q: usize) -> f64 {
        self.one_electron[p * self.n_orbitals + q]
    }

    /// Unchecked 0-based `(pq|rs)`.
    #[inline]
    pub(crate) fn chem(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.two_electron
            .get(&pack(p + 1, q + 1, r + 1, s + 1))
            .copied()
            .unwrap_or(0.0)
    }

    /// Unchecked 0-based `<ij|kl>`.
    #[inline]
    pub(crate) fn phys(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.chem(i, k, j, l)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        parse_fcidump(&text)
    }

    /// Serializes to FCIDUMP text. Values use shortest round-trip formatting,
    /// so `parse_fcidump(&t.to_fcidump())` reproduces every value bit for bit.
    pub fn to_fcidump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "&FCI NORB={},NELEC={},MS2={},",
            self.n_orbitals, self.n_electrons, self.ms2
        );
        if !self.orbsym.is_empty() {
            out.push_str(" ORBSYM=");
            for s in &self.orbsym {
                let _ = write!(out, "{s},");
            }
            out.push('\n');
        }
        if let Some(isym) = self.isym {
            let _ = writeln!(out, " ISYM={isym},");
        }
        out.push_str("&END\n");

        let mut keys: Vec<u64> = self.two_electron.keys().copied().collect();
        keys.sort_unstable();
        for key in keys {
            let (p, q, r, s) = unpack(key);
            let _ = writeln!(out, "{:e} {p} {q} {r} {s}", self.two_electron[&key]);
        }
        let n = self.n_orbitals;
        for p in 0..n {
            for q in 0..=p {
                let v = self.h1(p, q);
                if v != 0.0 || v.is_sign_negative() {
                    let _ = writeln!(out, "{v:e} {} {} 0 0", p + 1, q + 1);
                }
            }
        }
        for (p, e) in self.orbital_energies.iter().enumerate() {
            if let Some(e) = e {
                let _ = writeln!(out, "{e:e} {} 0 0 0", p + 1);
            }
        }
        let _ = writeln!(out, "{:e} 0 0 0 0", self.core_energy);
        out
    }
}

fn parse_value(field: &str, line: usize) -> Result<f64> {
    let normalized = field.replace(['D', 'd'], "e");
    normalized.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("non-numeric value field `{field}`"),
    })
}

fn parse_index(field: &str, line: usize) -> Result<usize> {
    field.parse::<usize>().map_err(|_| Error::Parse {
        line,
        message: format!("invalid orbital index `{field}`"),
    })
}

/// Header key/value pairs. Values are the comma/whitespace separated tokens
/// following `KEY=` up to the next key.
fn parse_header(text: &str) -> Vec<(String, Vec<String>)> {
    let mut entries: Vec<(String, Vec<String>)> = Vec::new();
    for token in text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
    {
        if token.starts_with('&') {
            continue;
        }
        if let Some((key, rest)) = token.split_once('=') {
            let mut values = Vec::new();
            if !rest.is_empty() {
                values.push(rest.to_string());
            }
            entries.push((key.trim().to_ascii_uppercase(), values));
        } else if let Some((_, values)) = entries.last_mut() {
            values.push(token.to_string());
        }
    }
    entries
}

fn header_scalar(entries: &[(String, Vec<String>)], key: &str, line: usize) -> Result<Option<i64>> {
    match entries.iter().rev().find(|(k, _)| k == key) {
        None => Ok(None),
        Some((_, values)) => {
            let raw = values.first().ok_or_else(|| Error::Parse {
                line,
                message: format!("header key {key} has no value"),
            })?;
            raw.parse::<i64>().map(Some).map_err(|_| Error::Parse {
                line,
                message: format!("header key {key} has non-integer value `{raw}`"),
            })
        }
    }
}

/// Parses FCIDUMP text into an [`IntegralTable`].
pub fn parse_fcidump(text: &str) -> Result<IntegralTable> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let mut header = String::new();
    let mut header_end = None;
    let mut first_line = 1;
    for (lineno, line) in lines.by_ref() {
        if header.is_empty() && line.trim().is_empty() {
            continue;
        }
        if header.is_empty() {
            first_line = lineno;
        }
        let upper = line.to_ascii_uppercase();
        if let Some(pos) = upper.find("&END") {
            header.push_str(&line[..pos]);
            header_end = Some(lineno);
            break;
        }
        let trimmed = line.trim_end();
        if let Some(stripped) = trimmed.strip_suffix('/') {
            header.push_str(stripped);
            header_end = Some(lineno);
            break;
        }
        header.push_str(line);
        header.push('\n');
    }
    let header_end = header_end.ok_or_else(|| Error::Parse {
        line: first_line,
        message: "header is not terminated by &END or /".into(),
    })?;
    if !header.to_ascii_uppercase().contains("&FCI") {
        return Err(Error::Parse {
            line: first_line,
            message: "header does not start with &FCI".into(),
        });
    }

    let entries = parse_header(&header);
    let norb = header_scalar(&entries, "NORB", header_end)?.ok_or_else(|| Error::Parse {
        line: header_end,
        message: "header is missing NORB".into(),
    })?;
    let nelec = header_scalar(&entries, "NELEC", header_end)?.ok_or_else(|| Error::Parse {
        line: header_end,
        message: "header is missing NELEC".into(),
    })?;
    let ms2 = header_scalar(&entries, "MS2", header_end)?.unwrap_or(0);
    if norb < 1 || nelec < 1 {
        return Err(Error::Parse {
            line: header_end,
            message: format!("NORB={norb} and NELEC={nelec} must be positive"),
        });
    }

    let mut table = IntegralTable::new(norb as usize, nelec as usize, ms2 as i32)?;
    if let Some((_, values)) = entries.iter().find(|(k, _)| k == "ORBSYM") {
        table.orbsym = values
            .iter()
            .map(|v| {
                v.parse::<i64>().map_err(|_| Error::Parse {
                    line: header_end,
                    message: format!("ORBSYM entry `{v}` is not an integer"),
                })
            })
            .collect::<Result<_>>()?;
    }
    table.isym = header_scalar(&entries, "ISYM", header_end)?;

    let n = table.n_orbitals;
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() < 5 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected `value i j k l`, found {} fields", fields.len()),
            });
        }
        let value = parse_value(fields[0], lineno)?;
        let mut idx = [0usize; 4];
        for (slot, field) in idx.iter_mut().zip(&fields[1..5]) {
            *slot = parse_index(field, lineno)?;
            if *slot > n {
                return Err(Error::IndexOutOfRange {
                    index: *slot,
                    n_orbitals: n,
                    line: Some(lineno),
                });
            }
        }
        match idx {
            [0, 0, 0, 0] => table.core_energy = value,
            [i, 0, 0, 0] => table.orbital_energies[i - 1] = Some(value),
            [i, j, 0, 0] if i > 0 && j > 0 => table.set_one(i, j, value)?,
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => table.set_two(i, j, k, l, value)?,
            _ => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("unrecognized index pattern {idx:?}"),
                })
            }
        }
    }
    Ok(table)
}
