//! Exact enumeration for small models.

use super::{sigmoid, RbmGradient, RbmModel};
use crate::error::{Error, Result};

/// Largest `n_visible + n_hidden` accepted by the enumeration routines.
pub const ENUMERATION_LIMIT: usize = 24;

fn check_size(model: &RbmModel) -> Result<()> {
    let total = model.n_visible() + model.n_hidden();
    if total > ENUMERATION_LIMIT {
        return Err(Error::Refused(format!(
            "exact enumeration needs n_visible + n_hidden <= {ENUMERATION_LIMIT}, got {total}"
        )));
    }
    Ok(())
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub(crate) fn pattern(index: usize, len: usize) -> Vec<u8> {
    (0..len).map(|i| (index >> i & 1) as u8).collect()
}

/// `log Σ_h exp(-β E(v,h))` by summing over every hidden pattern.
fn log_unnormalized(model: &RbmModel, v: &[u8], scratch: &mut Vec<f64>) -> f64 {
    let nh = model.n_hidden();
    let beta = model.beta();
    let visible: f64 = v.iter().zip(model.visible_bias()).map(|(&vi, a)| vi as f64 * a).sum();
    let activation: Vec<f64> = (0..nh).map(|j| model.hidden_activation(v, j)).collect();
    scratch.clear();
    for hidx in 0..1usize << nh {
        let mut neg_energy = visible;
        for (j, x) in activation.iter().enumerate() {
            if hidx >> j & 1 == 1 {
                neg_energy += x;
            }
        }
        scratch.push(beta * neg_energy);
    }
    log_sum_exp(scratch)
}

/// Exact `p(v)` for every visible pattern; entry `k` is the pattern whose bit
/// `i` is `v_i`.
pub fn exact_distribution(model: &RbmModel) -> Result<Vec<f64>> {
    check_size(model)?;
    let nv = model.n_visible();
    let mut scratch = Vec::with_capacity(1 << model.n_hidden());
    let logs: Vec<f64> = (0..1usize << nv)
        .map(|k| log_unnormalized(model, &pattern(k, nv), &mut scratch))
        .collect();
    let log_z = log_sum_exp(&logs);
    Ok(logs.iter().map(|l| (l - log_z).exp()).collect())
}

fn pattern_index(v: &[u8]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | ((b != 0) as usize) << i)
}

/// Mean exact log-probability of `data` under the model.
pub fn exact_log_likelihood(model: &RbmModel, data: &[Vec<u8>]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Domain("empty data set".into()));
    }
    let p = exact_distribution(model)?;
    let mut total = 0.0;
    for v in data {
        if v.len() != model.n_visible() {
            return Err(Error::Shape {
                expected: model.n_visible(),
                found: v.len(),
            });
        }
        total += p[pattern_index(v)].ln();
    }
    Ok(total / data.len() as f64)
}

/// Exact gradient of [`exact_log_likelihood`] with respect to every parameter.
pub fn exact_gradient(model: &RbmModel, data: &[Vec<u8>]) -> Result<RbmGradient> {
    if data.is_empty() {
        return Err(Error::Domain("empty data set".into()));
    }
    let (nv, nh, beta) = (model.n_visible(), model.n_hidden(), model.beta());
    let p = exact_distribution(model)?;
    let mut g = RbmGradient::zeros(nv, nh);

    let accumulate = |v: &[u8], weight: f64, g: &mut RbmGradient| {
        let ph: Vec<f64> = (0..nh).map(|j| sigmoid(beta * model.hidden_activation(v, j))).collect();
        for i in 0..nv {
            if v[i] != 0 {
                g.visible_bias[i] += weight;
                for j in 0..nh {
                    g.weights[i * nh + j] += weight * ph[j];
                }
            }
        }
        for j in 0..nh {
            g.hidden_bias[j] += weight * ph[j];
        }
    };

    let inv = 1.0 / data.len() as f64;
    for v in data {
        if v.len() != nv {
            return Err(Error::Shape {
                expected: nv,
                found: v.len(),
            });
        }
        accumulate(v, beta * inv, &mut g);
    }
    for (k, &pk) in p.iter().enumerate() {
        accumulate(&pattern(k, nv), -beta * pk, &mut g);
    }
    Ok(g)
}
