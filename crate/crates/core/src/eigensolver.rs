//! CI Hamiltonian assembly and lowest-eigenpair solvers.

use std::collections::HashSet;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::determinant::{hamming_distance, to_key, Determinant};
use crate::error::{Error, Result};
use crate::fcidump::IntegralTable;
use crate::slater_condon::matrix_element;

/// Off-diagonal elements with magnitude at or below this are not stored.
pub const STRUCTURAL_ZERO: f64 = 1e-15;
pub const DEFAULT_DENSE_CUTOFF: usize = 2000;
const PRECONDITIONER_FLOOR: f64 = 1e-8;

/// Symmetric matrix in compressed-row form; both triangles are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHamiltonian {
    dimension: usize,
    row_offsets: Vec<usize>,
    columns: Vec<usize>,
    values: Vec<f64>,
    diagonal: Vec<f64>,
}

impl SparseHamiltonian {
    /// Builds from symmetric triplets. Only `i <= j` entries are read; the lower
    /// triangle is mirrored. Every diagonal entry is stored, even when zero.
    pub fn from_upper_triplets(dimension: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dimension];
        let mut diagonal = vec![0.0; dimension];
        for &(i, j, v) in triplets {
            if i >= dimension || j >= dimension {
                return Err(Error::Shape {
                    expected: dimension,
                    found: i.max(j) + 1,
                });
            }
            if i == j {
                diagonal[i] = v;
            } else if i < j {
                rows[i].push((j, v));
                rows[j].push((i, v));
            }
        }
        for (i, d) in diagonal.iter().enumerate() {
            rows[i].push((i, *d));
        }
        let mut row_offsets = Vec::with_capacity(dimension + 1);
        let mut columns = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|&(j, _)| j);
            for (j, v) in row {
                columns.push(j);
                values.push(v);
            }
            row_offsets.push(columns.len());
        }
        Ok(Self {
            dimension,
            row_offsets,
            columns,
            values,
            diagonal,
        })
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Shape {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let mut triplets = Vec::new();
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                if i == j || m[(i, j)] != 0.0 {
                    triplets.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_upper_triplets(m.nrows(), &triplets)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.columns[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// Stored value at `(i, j)`, zero if absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.columns[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dimension);
        let row = |i: usize| -> f64 { self.row(i).map(|(j, v)| v * x[j]).sum() };
        if self.dimension >= 512 {
            (0..self.dimension).into_par_iter().map(row).collect()
        } else {
            (0..self.dimension).map(row).collect()
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dimension, self.dimension);
        for i in 0..self.dimension {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// `i j value` per stored entry, 1-based.
    pub fn to_coordinate_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.dimension {
            for (j, v) in self.row(i) {
                let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
            }
        }
        out
    }
}

/// Hamiltonian over `dets` (order preserved). Rows are assembled in parallel.
pub fn build_hamiltonian(dets: &[Determinant], table: &IntegralTable) -> Result<SparseHamiltonian> {
    if dets.is_empty() {
        return Err(Error::Precondition("determinant list is empty".into()));
    }
    let n = table.n_orbitals();
    let (na, nb) = (dets[0].n_alpha(), dets[0].n_beta());
    let mut seen = HashSet::with_capacity(dets.len());
    for d in dets {
        if !seen.insert(to_key(d, n)) {
            return Err(Error::Precondition(format!("duplicate determinant {d:?}")));
        }
        if d.n_alpha() != na || d.n_beta() != nb {
            return Err(Error::Precondition(
                "determinants have non-uniform electron counts".into(),
            ));
        }
    }
    let rows: Vec<Result<Vec<(usize, usize, f64)>>> = (0..dets.len())
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::new();
            row.push((i, i, matrix_element(&dets[i], &dets[i], table)?));
            for j in i + 1..dets.len() {
                if hamming_distance(&dets[i], &dets[j]) > 4 {
                    continue;
                }
                let v = matrix_element(&dets[i], &dets[j], table)?;
                if v.abs() > STRUCTURAL_ZERO {
                    row.push((i, j, v));
                }
            }
            Ok(row)
        })
        .collect();
    let mut triplets = Vec::new();
    for row in rows {
        triplets.extend(row?);
    }
    SparseHamiltonian::from_upper_triplets(dets.len(), &triplets)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DavidsonOptions {
    /// Convergence threshold on the residual norm `|Hx - Ex|`.
    pub tol: f64,
    pub max_subspace: usize,
    pub max_iter: usize,
}

impl Default for DavidsonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_subspace: 20,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub energy: f64,
    pub vector: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Flips the vector so its largest-magnitude component is positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    for &x in v.iter() {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    if best < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Orthonormalizes `t` against `basis` (two Gram-Schmidt passes). Returns the
/// norm before the final normalization.
fn orthonormalize(t: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, t);
            axpy(-c, b, t);
        }
    }
    let nrm = norm(t);
    if nrm > 0.0 {
        for x in t.iter_mut() {
            *x /= nrm;
        }
    }
    nrm
}

/// Lowest eigenpair of `h` by the Davidson method with diagonal preconditioning.
pub fn davidson_lowest(h: &SparseHamiltonian, guess: &[f64], opts: &DavidsonOptions) -> Result<Eigenpair> {
    let n = h.dimension();
    if n == 0 {
        return Err(Error::Domain("matrix has dimension 0".into()));
    }
    if guess.len() != n {
        return Err(Error::Shape {
            expected: n,
            found: guess.len(),
        });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let max_subspace = opts.max_subspace.max(2);

    let mut v0 = guess.to_vec();
    if orthonormalize(&mut v0, &[]) == 0.0 {
        return Err(Error::Domain("initial guess is the zero vector".into()));
    }
    let mut basis = vec![v0];
    let mut images = vec![h.matvec(&basis[0])];
    let mut best_residual = f64::INFINITY;

    for _ in 0..opts.max_iter {
        let k = basis.len();
        let projected = DMatrix::from_fn(k, k, |i, j| dot(&basis[i], &images[j]));
        let projected = (&projected + projected.transpose()) * 0.5;
        let eig = SymmetricEigen::new(projected);
        let (lowest, theta) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty subspace");
        let y = eig.eigenvectors.column(lowest);

        let mut x = vec![0.0; n];
        let mut hx = vec![0.0; n];
        for (i, &c) in y.iter().enumerate() {
            axpy(c, &basis[i], &mut x);
            axpy(c, &images[i], &mut hx);
        }
        let residual: Vec<f64> = hx.iter().zip(&x).map(|(a, b)| a - theta * b).collect();
        let rnorm = norm(&residual);
        best_residual = best_residual.min(rnorm);
        // a Ritz pair from a subspace spanning the whole space is exact
        if rnorm <= opts.tol || k == n {
            let scale = norm(&x);
            x.iter_mut().for_each(|c| *c /= scale);
            fix_sign(&mut x);
            return Ok(Eigenpair {
                energy: theta,
                vector: x,
            });
        }

        let mut t: Vec<f64> = residual
            .iter()
            .zip(h.diagonal())
            .map(|(r, d)| {
                let mut denom = d - theta;
                if denom.abs() < PRECONDITIONER_FLOOR {
                    denom = PRECONDITIONER_FLOOR.copysign(denom);
                }
                -r / denom
            })
            .collect();

        if basis.len() >= max_subspace.min(n) {
            let scale = norm(&x);
            x.iter_mut().for_each(|c| *c /= scale);
            hx.iter_mut().for_each(|c| *c /= scale);
            basis = vec![x];
            images = vec![hx];
        }
        if orthonormalize(&mut t, &basis) < 1e-14 {
            // preconditioned direction collapsed into the subspace; fall back to the residual
            t = residual;
            if orthonormalize(&mut t, &basis) < 1e-14 {
                return Err(Error::NotConverged {
                    iterations: opts.max_iter,
                    residual: best_residual,
                });
            }
        }
        images.push(h.matvec(&t));
        basis.push(t);
    }
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        residual: best_residual,
    })
}

/// Unit vector on the smallest diagonal element.
pub fn default_guess(h: &SparseHamiltonian) -> Vec<f64> {
    let mut g = vec![0.0; h.dimension()];
    if let Some((i, _)) = h.diagonal().iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)) {
        g[i] = 1.0;
    }
    g
}

/// Exact lowest eigenpair by full symmetric eigendecomposition.
pub fn dense_lowest(h: &SparseHamiltonian, cutoff: usize) -> Result<Eigenpair> {
    let n = h.dimension();
    if n == 0 {
        return Err(Error::Domain("matrix has dimension 0".into()));
    }
    if n > cutoff {
        return Err(Error::Refused(format!(
            "dimension {n} exceeds the dense cutoff {cutoff}"
        )));
    }
    dense_lowest_matrix(h.to_dense())
}

pub fn dense_lowest_matrix(m: DMatrix<f64>) -> Result<Eigenpair> {
    if m.nrows() == 0 {
        return Err(Error::Domain("matrix has dimension 0".into()));
    }
    let eig = SymmetricEigen::new(m);
    let (lowest, energy) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty matrix");
    let mut vector: Vec<f64> = eig.eigenvectors.column(lowest).iter().copied().collect();
    let scale = norm(&vector);
    vector.iter_mut().for_each(|c| *c /= scale);
    fix_sign(&mut vector);
    Ok(Eigenpair { energy, vector })
}

/// CI expansion over an ordered determinant list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavefunctionState {
    pub determinants: Vec<Determinant>,
    pub coefficients: Vec<f64>,
    pub energy: f64,
}

impl WavefunctionState {
    pub fn len(&self) -> usize {
        self.determinants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.determinants.is_empty()
    }

    pub fn norm_squared(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Davidson,
    Dense,
}

/// Builds the Hamiltonian over `dets` and solves for the ground state.
pub fn diagonalize(
    dets: &[Determinant],
    table: &IntegralTable,
    guess: Option<&[f64]>,
    solver: SolverKind,
    opts: &DavidsonOptions,
) -> Result<WavefunctionState> {
    let h = build_hamiltonian(dets, table)?;
    let pair = match solver {
        SolverKind::Dense => dense_lowest(&h, usize::MAX)?,
        SolverKind::Davidson => {
            let fallback;
            let guess = match guess {
                Some(g) if g.iter().any(|&c| c != 0.0) => g,
                _ => {
                    fallback = default_guess(&h);
                    &fallback
                }
            };
            davidson_lowest(&h, guess, opts)?
        }
    };
    Ok(WavefunctionState {
        determinants: dets.to_vec(),
        coefficients: pair.vector,
        energy: pair.energy,
    })
}
