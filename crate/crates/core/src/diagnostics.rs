//! Orbital occupancy, Gelman-Rubin, FCI size estimates and correlation accounting.

use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::eigensolver::WavefunctionState;
use crate::error::{Error, Result};

/// Per-orbital occupation frequency for each spin channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyDistribution {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub weighted: bool,
}

impl OccupancyDistribution {
    /// Alpha plus beta, orbital by orbital.
    pub fn total(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.beta).map(|(a, b)| a + b).collect()
    }

    /// Alpha entries followed by beta entries.
    pub fn concatenated(&self) -> Vec<f64> {
        self.alpha.iter().chain(&self.beta).copied().collect()
    }

    pub fn n_orbitals(&self) -> usize {
        self.alpha.len()
    }
}

/// Raw frequencies count determinants; weighted ones sum `|c_i|^2` over the
/// determinants occupying each orbital.
pub fn occupancy_distribution(
    state: &WavefunctionState,
    n_orbitals: usize,
    weighted: bool,
) -> Result<OccupancyDistribution> {
    if state.is_empty() {
        return Err(Error::Domain("occupancy of an empty state".into()));
    }
    if state.coefficients.len() != state.determinants.len() {
        return Err(Error::Shape {
            expected: state.determinants.len(),
            found: state.coefficients.len(),
        });
    }
    if weighted {
        let norm = state.norm_squared();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::Domain(format!(
                "weighted occupancy needs normalized coefficients, got norm^2 = {norm}"
            )));
        }
    }
    let mut alpha = vec![0.0; n_orbitals];
    let mut beta = vec![0.0; n_orbitals];
    for (det, &c) in state.determinants.iter().zip(&state.coefficients) {
        let w = if weighted { c * c } else { 1.0 };
        for p in det.alpha_orbitals() {
            alpha[p] += w;
        }
        for p in det.beta_orbitals() {
            beta[p] += w;
        }
    }
    if !weighted {
        let n = state.len() as f64;
        alpha.iter_mut().chain(beta.iter_mut()).for_each(|x| *x /= n);
    }
    Ok(OccupancyDistribution { alpha, beta, weighted })
}

/// CSV with one row per (spin, orbital) for the alpha, beta and summed channels.
/// Orbital indices are 1-based.
pub fn occupancy_csv(raw: &OccupancyDistribution, weighted: &OccupancyDistribution) -> Result<String> {
    if raw.n_orbitals() != weighted.n_orbitals() {
        return Err(Error::Shape {
            expected: raw.n_orbitals(),
            found: weighted.n_orbitals(),
        });
    }
    let mut out = String::from("spin,orbital_index,raw_frequency,weighted_frequency\n");
    let channels = [
        ("alpha", raw.alpha.clone(), weighted.alpha.clone()),
        ("beta", raw.beta.clone(), weighted.beta.clone()),
        ("total", raw.total(), weighted.total()),
    ];
    for (spin, r, w) in channels {
        for (p, (x, y)) in r.iter().zip(&w).enumerate() {
            writeln!(out, "{spin},{},{x:.12},{y:.12}", p + 1).expect("writing to a String");
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GelmanRubinReport {
    pub n_chains: usize,
    pub chain_length: usize,
    pub chain_means: Vec<f64>,
    pub grand_mean: f64,
    pub between_variance: f64,
    pub within_variance: f64,
    pub statistic: f64,
}

/// Potential scale reduction `R = sqrt(((L-1)/L W + B/L) / W)` for `J` chains of length `L`.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> Result<GelmanRubinReport> {
    let j = chains.len();
    if j < 2 {
        return Err(Error::Domain(format!("Gelman-Rubin needs at least 2 chains, got {j}")));
    }
    let l = chains[0].len();
    if l < 2 {
        return Err(Error::Domain(format!(
            "Gelman-Rubin needs chains of length >= 2, got {l}"
        )));
    }
    if let Some(c) = chains.iter().find(|c| c.len() != l) {
        return Err(Error::Shape {
            expected: l,
            found: c.len(),
        });
    }
    if chains.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Domain("chains contain non-finite values".into()));
    }
    let (jf, lf) = (j as f64, l as f64);
    let chain_means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / lf).collect();
    let grand_mean = chain_means.iter().sum::<f64>() / jf;
    let between_variance = lf / (jf - 1.0) * chain_means.iter().map(|m| (m - grand_mean).powi(2)).sum::<f64>();
    let within_variance = chains
        .iter()
        .zip(&chain_means)
        .map(|(c, m)| c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (lf - 1.0))
        .sum::<f64>()
        / jf;
    if within_variance == 0.0 {
        return Err(Error::Degenerate(
            "within-chain variance W is zero (every chain is constant); R is undefined".into(),
        ));
    }
    let statistic = (((lf - 1.0) / lf * within_variance + between_variance / lf) / within_variance).sqrt();
    Ok(GelmanRubinReport {
        n_chains: j,
        chain_length: l,
        chain_means,
        grand_mean,
        between_variance,
        within_variance,
        statistic,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentwiseGelmanRubin {
    /// `None` where every chain is constant in that component.
    pub statistics: Vec<Option<f64>>,
    pub max_statistic: f64,
    pub argmax: usize,
    pub n_degenerate: usize,
}

/// Applies [`gelman_rubin`] to each component of vector-valued chains.
/// `chains[j][t]` is the vector of chain `j` at step `t`. Components with zero
/// within-chain variance are skipped; an error is returned if all are.
pub fn gelman_rubin_componentwise(chains: &[Vec<Vec<f64>>]) -> Result<ComponentwiseGelmanRubin> {
    if chains.len() < 2 {
        return Err(Error::Domain(format!(
            "Gelman-Rubin needs at least 2 chains, got {}",
            chains.len()
        )));
    }
    let dim = chains
        .first()
        .and_then(|c| c.first())
        .map(Vec::len)
        .ok_or_else(|| Error::Domain("empty chain".into()))?;
    for step in chains.iter().flatten() {
        if step.len() != dim {
            return Err(Error::Shape {
                expected: dim,
                found: step.len(),
            });
        }
    }
    let mut statistics = Vec::with_capacity(dim);
    for k in 0..dim {
        let scalar: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|v| v[k]).collect()).collect();
        match gelman_rubin(&scalar) {
            Ok(r) => statistics.push(Some(r.statistic)),
            Err(Error::Degenerate(_)) => statistics.push(None),
            Err(e) => return Err(e),
        }
    }
    let n_degenerate = statistics.iter().filter(|s| s.is_none()).count();
    let (argmax, max_statistic) = statistics
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|r| (i, r)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::Degenerate("every component has zero within-chain variance".into()))?;
    Ok(ComponentwiseGelmanRubin {
        statistics,
        max_statistic,
        argmax,
        n_degenerate,
    })
}

fn binomial(n: usize, k: usize) -> BigUint {
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by i + 1
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `C(n_orbitals, n_electrons / 2)^2`, the closed-shell FCI space size, exact.
pub fn estimate_fci_size(n_orbitals: usize, n_electrons: usize) -> Result<BigUint> {
    if n_electrons % 2 != 0 {
        return Err(Error::Domain(format!(
            "{n_electrons} electrons: the estimate assumes a closed shell (even electron count)"
        )));
    }
    let per_spin = n_electrons / 2;
    if per_spin > n_orbitals {
        return Err(Error::Capacity(format!(
            "{per_spin} electrons per spin do not fit in {n_orbitals} orbitals"
        )));
    }
    let c = binomial(n_orbitals, per_spin);
    Ok(&c * &c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationAccounting {
    /// `100 (E_method - E_hf) / (E_fci - E_hf)`.
    pub correlation_percent: f64,
    /// `100 E_method / E_fci`.
    pub total_energy_percent: f64,
    /// `E_method` lies below `E_fci`.
    pub non_variational: bool,
}

pub fn correlation_fraction(e_hf: f64, e_method: f64, e_fci: f64) -> Result<CorrelationAccounting> {
    if !(e_hf.is_finite() && e_method.is_finite() && e_fci.is_finite()) {
        return Err(Error::Domain("energies must be finite".into()));
    }
    if e_fci == e_hf {
        return Err(Error::Domain("E_fci equals E_hf: zero correlation energy".into()));
    }
    if e_fci > e_hf {
        return Err(Error::Domain(format!(
            "E_fci ({e_fci}) lies above E_hf ({e_hf}); correlation energy must be negative"
        )));
    }
    Ok(CorrelationAccounting {
        correlation_percent: 100.0 * (e_method - e_hf) / (e_fci - e_hf),
        total_energy_percent: 100.0 * e_method / e_fci,
        non_variational: e_method < e_fci,
    })
}
