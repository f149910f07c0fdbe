//! Determinant generation from a trained model.
//!
//! Each sample runs a Gibbs chain from a seed determinant, then fills each spin
//! channel by drawing exactly the required number of distinct orbitals, without
//! replacement, with probability proportional to the final visible activation
//! probabilities. The electron count is therefore exact by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{encode_determinant, RbmModel};
use crate::determinant::Determinant;
use crate::error::{Error, Result};

/// Draws `k` distinct indices; index `i` enters with probability proportional to
/// `weights[i]` among those not yet drawn (successive sampling). Uses exponential
/// race keys: index `i` gets `E_i / w_i` with `E_i ~ Exp(1)`, and the `k` smallest
/// keys win. Non-positive or non-finite weights count as zero; zero-weight
/// indices are only drawn once positive ones run out, uniformly among themselves.
pub fn weighted_sample_without_replacement<R: Rng + ?Sized>(
    weights: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if k > weights.len() {
        return Err(Error::Domain(format!(
            "cannot draw {k} distinct items from {}",
            weights.len()
        )));
    }
    let mut keys: Vec<(f64, f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let e = -(1.0 - rng.gen::<f64>()).ln();
            let tie = rng.gen::<f64>();
            let key = if w > 0.0 && w.is_finite() { e / w } else { f64::INFINITY };
            (key, tie, i)
        })
        .collect();
    keys.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut picked: Vec<usize> = keys[..k].iter().map(|&(_, _, i)| i).collect();
    picked.sort_unstable();
    Ok(picked)
}

fn bits(indices: &[usize]) -> u64 {
    indices.iter().fold(0u64, |acc, &i| acc | 1 << i)
}

/// Generates `n_samples` determinants with exactly `n_alpha` / `n_beta` electrons.
///
/// Chains are independent: chain `s` uses a ChaCha stream seeded from one draw of
/// `rng` and numbered `s`, so output is reproducible and independent of thread count.
/// The result may contain duplicates.
pub fn sample_determinants<R: Rng + ?Sized>(
    model: &RbmModel,
    seeds: &[Determinant],
    n_samples: usize,
    n_alpha: usize,
    n_beta: usize,
    gibbs_k: usize,
    rng: &mut R,
) -> Result<Vec<Determinant>> {
    if seeds.is_empty() {
        return Err(Error::Domain("no seed determinants".into()));
    }
    if n_samples == 0 || gibbs_k == 0 {
        return Err(Error::Domain("n_samples and gibbs_k must be at least 1".into()));
    }
    if model.n_visible() % 2 != 0 {
        return Err(Error::Shape {
            expected: model.n_visible() + 1,
            found: model.n_visible(),
        });
    }
    let n_orbitals = model.n_visible() / 2;
    if n_alpha > n_orbitals || n_beta > n_orbitals {
        return Err(Error::Capacity(format!(
            "{n_alpha} alpha / {n_beta} beta electrons do not fit in {n_orbitals} orbitals"
        )));
    }
    let base: u64 = rng.gen();
    (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let mut chain_rng = ChaCha8Rng::seed_from_u64(base);
            chain_rng.set_stream(s as u64);
            let seed = &seeds[chain_rng.gen_range(0..seeds.len())];
            let v0 = encode_determinant(seed, n_orbitals);
            let (_, probs) = model.gibbs_run(&v0, gibbs_k, &mut chain_rng);
            let alpha = weighted_sample_without_replacement(&probs[..n_orbitals], n_alpha, &mut chain_rng)?;
            let beta = weighted_sample_without_replacement(&probs[n_orbitals..], n_beta, &mut chain_rng)?;
            Ok(Determinant::new(bits(&alpha), bits(&beta)))
        })
        .collect()
}
