//! The RBM-guided selection loop.
//!
//! Starting from the CISD space of the Hartree-Fock determinant, every iteration
//! trains the RBM on the current determinants, samples candidates from it, drops
//! duplicates, tabooed keys and candidates beyond a double excitation of the
//! current set, diagonalizes, and moves determinants with `|c_i|^2 <= prune_threshold`
//! into the taboo list. The loop stops once the energy changes by less than
//! `stability_threshold` between consecutive iterations.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::determinant::{
    connectivity_filter, generate_cisd, hf_reference, sort_by_key, to_key, Determinant, DeterminantKey, TabooList,
};
use crate::diagnostics::occupancy_distribution;
use crate::eigensolver::{diagonalize, DavidsonOptions, SolverKind, WavefunctionState};
use crate::error::{Error, Result};
use crate::fcidump::IntegralTable;
use crate::rbm::{sample_determinants, train, RbmModel, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub max_iterations: usize,
    /// Applied to squared coefficients: determinant `i` survives iff `|c_i|^2 > prune_threshold`.
    pub prune_threshold: f64,
    /// Hartree.
    pub stability_threshold: f64,
    pub train: TrainConfig,
    /// Defaults to the number of visible units.
    pub n_hidden: Option<usize>,
    pub beta: f64,
    /// Samples per iteration = `sample_multiplier * |dets|`, capped at `sample_cap`.
    pub sample_multiplier: usize,
    pub sample_cap: usize,
    pub reinit_weights: bool,
    pub keep_reference: bool,
    pub seed: u64,
    pub solver: SolverKind,
    pub davidson_tol: f64,
    /// Keep per-iteration determinant sets in the report.
    pub keep_snapshots: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            prune_threshold: 1e-10,
            stability_threshold: 1e-6,
            train: TrainConfig::default(),
            n_hidden: None,
            beta: 1.0,
            sample_multiplier: 10,
            sample_cap: 100_000,
            reinit_weights: false,
            keep_reference: true,
            seed: 0,
            solver: SolverKind::Davidson,
            davidson_tol: 1e-9,
            keep_snapshots: false,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.prune_threshold >= 0.0) {
            return Err(Error::Config(format!(
                "prune_threshold must be non-negative, got {}",
                self.prune_threshold
            )));
        }
        if !(self.stability_threshold > 0.0) {
            return Err(Error::Config(format!(
                "stability_threshold must be positive, got {}",
                self.stability_threshold
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if self.sample_multiplier == 0 || self.sample_cap == 0 {
            return Err(Error::Config("sample budget must be at least 1".into()));
        }
        if self.n_hidden == Some(0) {
            return Err(Error::Config("n_hidden must be at least 1".into()));
        }
        if !(self.davidson_tol > 0.0) {
            return Err(Error::Config("davidson_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Ground-state energy of the kept set after pruning.
    pub energy: f64,
    /// Ground-state energy over the full diagonalized set, before pruning.
    pub energy_pre_prune: f64,
    pub delta_energy: f64,
    pub n_dets_in: usize,
    pub n_generated: usize,
    pub n_duplicates_removed: usize,
    pub n_taboo_hits: usize,
    pub n_disconnected_removed: usize,
    pub n_after_diag: usize,
    pub n_pruned: usize,
    pub n_kept: usize,
    /// Raw occupation frequencies of the kept set, alpha orbitals then beta.
    pub raw_occupancy: Vec<f64>,
    /// Coefficient-weighted occupation frequencies of the kept set, alpha then beta.
    pub weighted_occupancy: Vec<f64>,
    pub wall_seconds: f64,
}

/// Determinant sets seen by one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSnapshot {
    pub iteration: usize,
    pub diagonalized: Vec<Determinant>,
    pub pruned: Vec<Determinant>,
    pub kept: Vec<Determinant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    DiagonalizationFailed { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n_orbitals: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub reference: Determinant,
    pub final_state: WavefunctionState,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub termination: Termination,
    pub taboo_size: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<IterationSnapshot>,
}

impl ConvergenceReport {
    pub fn energy(&self) -> f64 {
        self.final_state.energy
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

pub fn converged(e_new: f64, e_old: f64, stability_threshold: f64) -> bool {
    (e_new - e_old).abs() < stability_threshold
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pruned {
    pub kept: Vec<Determinant>,
    pub kept_coefficients: Vec<f64>,
    pub pruned: Vec<Determinant>,
    /// Keys that entered the taboo list in this call.
    pub tabooed: Vec<DeterminantKey>,
}

/// Keeps determinant `i` iff `|c_i|^2 > threshold`; the rest go to `taboo`.
/// `protect` (the reference) is kept regardless of its weight.
pub fn prune(
    state: &WavefunctionState,
    threshold: f64,
    taboo: &mut TabooList,
    protect: Option<&Determinant>,
    n_orbitals: usize,
) -> Pruned {
    let mut out = Pruned {
        kept: Vec::new(),
        kept_coefficients: Vec::new(),
        pruned: Vec::new(),
        tabooed: Vec::new(),
    };
    for (det, &c) in state.determinants.iter().zip(&state.coefficients) {
        if c * c > threshold || protect == Some(det) {
            out.kept.push(*det);
            out.kept_coefficients.push(c);
        } else {
            out.pruned.push(*det);
            if taboo.insert(det) {
                out.tabooed.push(to_key(det, n_orbitals));
            }
        }
    }
    out
}

fn guess_for(dets: &[Determinant], previous: &HashMap<DeterminantKey, f64>, n_orbitals: usize) -> Vec<f64> {
    dets.iter()
        .map(|d| previous.get(&to_key(d, n_orbitals)).copied().unwrap_or(0.0))
        .collect()
}

fn coefficient_map(state: &WavefunctionState, n_orbitals: usize) -> HashMap<DeterminantKey, f64> {
    state
        .determinants
        .iter()
        .zip(&state.coefficients)
        .map(|(d, &c)| (to_key(d, n_orbitals), c))
        .collect()
}

/// Runs the selection loop to convergence or `max_iterations`.
pub fn run_selection(table: &IntegralTable, config: &LoopConfig) -> Result<ConvergenceReport> {
    run_selection_with(table, config, |_, _| {})
}

/// Like [`run_selection`], calling `observe` after every iteration.
pub fn run_selection_with<F>(table: &IntegralTable, config: &LoopConfig, mut observe: F) -> Result<ConvergenceReport>
where
    F: FnMut(&IterationRecord, &IterationSnapshot),
{
    config.validate()?;
    let n_orbitals = table.n_orbitals();
    let (n_alpha, n_beta) = (table.n_alpha(), table.n_beta());
    let reference = hf_reference(n_alpha, n_beta, n_orbitals)?;
    let n_visible = 2 * n_orbitals;
    let n_hidden = config.n_hidden.unwrap_or(n_visible);
    let davidson = DavidsonOptions {
        tol: config.davidson_tol,
        ..DavidsonOptions::default()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dets = generate_cisd(&reference, n_orbitals);
    let mut previous = HashMap::from([(to_key(&reference, n_orbitals), 1.0)]);
    let mut taboo = TabooList::new(n_orbitals);
    let mut model: Option<RbmModel> = None;
    let mut energy = 0.0;
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut final_state: Option<WavefunctionState> = None;
    let mut termination = Termination::MaxIterations;
    let mut failure: Option<Error> = None;

    for iteration in 1..=config.max_iterations {
        let started = Instant::now();

        let base = match model.take() {
            Some(m) if !config.reinit_weights => m,
            _ => RbmModel::random(n_visible, n_hidden, config.beta, &mut rng)?,
        };
        let train_config = TrainConfig {
            seed: rng.gen(),
            ..config.train
        };
        let trained = train(&base, &dets, n_orbitals, &train_config)?;

        let budget = (config.sample_multiplier.saturating_mul(dets.len())).min(config.sample_cap);
        let samples = sample_determinants(&trained, &dets, budget, n_alpha, n_beta, config.train.gibbs_k, &mut rng)?;
        model = Some(trained);

        let current: BTreeMap<DeterminantKey, Determinant> = dets.iter().map(|d| (to_key(d, n_orbitals), *d)).collect();
        let mut fresh: BTreeMap<DeterminantKey, Determinant> = BTreeMap::new();
        for s in &samples {
            let key = to_key(s, n_orbitals);
            if !current.contains_key(&key) {
                fresh.insert(key, *s);
            }
        }
        let n_duplicates_removed = samples.len() - fresh.len();
        let before_taboo = fresh.len();
        fresh.retain(|k, _| !taboo.contains_key(k));
        let n_taboo_hits = before_taboo - fresh.len();
        let candidates: Vec<Determinant> = fresh.into_values().collect();
        let connected = connectivity_filter(&candidates, &dets);
        let n_disconnected_removed = candidates.len() - connected.len();

        let mut expanded = dets.clone();
        expanded.extend(connected);
        sort_by_key(&mut expanded, n_orbitals);

        let guess = guess_for(&expanded, &previous, n_orbitals);
        let state = match diagonalize(&expanded, table, Some(&guess), config.solver, &davidson) {
            Ok(s) => s,
            Err(e) => {
                termination = Termination::DiagonalizationFailed { message: e.to_string() };
                failure = Some(e);
                break;
            }
        };
        let energy_pre_prune = state.energy;

        let protect = config.keep_reference.then_some(&reference);
        let pruned = prune(&state, config.prune_threshold, &mut taboo, protect, n_orbitals);
        if pruned.kept.is_empty() {
            return Err(Error::Config(format!(
                "every determinant was pruned at iteration {iteration}; prune_threshold {} is too aggressive",
                config.prune_threshold
            )));
        }
        let kept_state = if pruned.pruned.is_empty() {
            state
        } else {
            let warm = coefficient_map(&state, n_orbitals);
            let guess = guess_for(&pruned.kept, &warm, n_orbitals);
            match diagonalize(&pruned.kept, table, Some(&guess), config.solver, &davidson) {
                Ok(s) => s,
                Err(e) => {
                    termination = Termination::DiagonalizationFailed { message: e.to_string() };
                    failure = Some(e);
                    break;
                }
            }
        };

        let raw = occupancy_distribution(&kept_state, n_orbitals, false)?;
        let weighted = occupancy_distribution(&kept_state, n_orbitals, true)?;
        let record = IterationRecord {
            iteration,
            energy: kept_state.energy,
            energy_pre_prune,
            delta_energy: kept_state.energy - energy,
            n_dets_in: dets.len(),
            n_generated: samples.len(),
            n_duplicates_removed,
            n_taboo_hits,
            n_disconnected_removed,
            n_after_diag: expanded.len(),
            n_pruned: pruned.pruned.len(),
            n_kept: pruned.kept.len(),
            raw_occupancy: raw.concatenated(),
            weighted_occupancy: weighted.concatenated(),
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        let snapshot = IterationSnapshot {
            iteration,
            diagonalized: expanded,
            pruned: pruned.pruned,
            kept: pruned.kept.clone(),
        };
        observe(&record, &snapshot);
        if config.keep_snapshots {
            snapshots.push(snapshot);
        }

        let done = converged(kept_state.energy, energy, config.stability_threshold);
        energy = kept_state.energy;
        previous = coefficient_map(&kept_state, n_orbitals);
        dets = pruned.kept;
        records.push(record);
        final_state = Some(kept_state);
        if done {
            termination = Termination::Converged;
            break;
        }
    }

    let final_state = match (final_state, failure) {
        (Some(s), _) => s,
        // the very first diagonalization failed; there is nothing to report
        (None, Some(e)) => return Err(e),
        (None, None) => unreachable!("max_iterations is at least 1"),
    };
    Ok(ConvergenceReport {
        n_orbitals,
        n_alpha,
        n_beta,
        reference,
        final_state,
        converged: termination == Termination::Converged,
        termination,
        records,
        taboo_size: taboo.len(),
        snapshots,
    })
}
