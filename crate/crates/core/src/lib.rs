//! Selected configuration interaction driven by a restricted Boltzmann machine.
//!
//! The solver starts from the CISD space of the Hartree-Fock determinant and
//! repeatedly trains an RBM on the current determinants, samples new ones from
//! it, keeps those connected to the current set, diagonalizes, and prunes
//! negligible determinants into a permanent taboo list.

pub mod cli;
pub mod determinant;
pub mod diagnostics;
pub mod eigensolver;
pub mod error;
pub mod fcidump;
pub mod rbm;
pub mod selection;
pub mod slater_condon;

pub use determinant::{Determinant, DeterminantKey, TabooList};
pub use eigensolver::{SparseHamiltonian, WavefunctionState};
pub use error::{Error, Result};
pub use fcidump::{parse_fcidump, IntegralTable};
pub use rbm::{RbmModel, TrainConfig};
pub use selection::{run_selection, ConvergenceReport, IterationRecord, LoopConfig};
