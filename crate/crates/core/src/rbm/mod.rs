//! Restricted Boltzmann machine over determinant occupation patterns.
//!
//! Energy `E(v,h) = -a·v - b·h - vᵀWh`; the inverse temperature `beta` scales
//! every activation, so `p(h_j = 1 | v) = σ(β(b_j + Σ_i v_i w_ij))` and
//! `p(v_i = 1 | h) = σ(β(a_i + Σ_j h_j w_ij))`.
//!
//! Visible units encode a determinant as its alpha occupations followed by its
//! beta occupations, matching the spin-orbital ordering used for phases.

mod exact;
mod sampler;

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::determinant::Determinant;
use crate::error::{Error, Result};

pub use exact::{exact_distribution, exact_gradient, exact_log_likelihood, ENUMERATION_LIMIT};
pub use sampler::{sample_determinants, weighted_sample_without_replacement};

const CHECKPOINT_MAGIC: &str = "rbmci-rbm v1";

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbmModel {
    n_visible: usize,
    n_hidden: usize,
    /// Row-major `n_visible × n_hidden`.
    weights: Vec<f64>,
    visible_bias: Vec<f64>,
    hidden_bias: Vec<f64>,
    beta: f64,
}

/// Parameter-shaped update or gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmGradient {
    pub weights: Vec<f64>,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
}

impl RbmGradient {
    fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            weights: vec![0.0; n_visible * n_hidden],
            visible_bias: vec![0.0; n_visible],
            hidden_bias: vec![0.0; n_hidden],
        }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.flat().zip(other.flat()).map(|(a, b)| a * b).sum()
    }

    pub fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .chain(&self.visible_bias)
            .chain(&self.hidden_bias)
            .copied()
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "inverse temperature must be positive, got {beta}"
        )))
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape { expected, found })
    }
}

impl RbmModel {
    /// All parameters zero.
    pub fn zeros(n_visible: usize, n_hidden: usize, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self {
            n_visible,
            n_hidden,
            weights: vec![0.0; n_visible * n_hidden],
            visible_bias: vec![0.0; n_visible],
            hidden_bias: vec![0.0; n_hidden],
            beta,
        })
    }

    /// Weights i.i.d. uniform in [-0.01, 0.01], biases zero.
    pub fn random<R: Rng + ?Sized>(n_visible: usize, n_hidden: usize, beta: f64, rng: &mut R) -> Result<Self> {
        let mut model = Self::zeros(n_visible, n_hidden, beta)?;
        for w in &mut model.weights {
            *w = rng.gen_range(-0.01..=0.01);
        }
        Ok(model)
    }

    pub fn from_parts(weights: Vec<f64>, visible_bias: Vec<f64>, hidden_bias: Vec<f64>, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let (n_visible, n_hidden) = (visible_bias.len(), hidden_bias.len());
        check_len(n_visible * n_hidden, weights.len())?;
        if weights
            .iter()
            .chain(&visible_bias)
            .chain(&hidden_bias)
            .any(|x| !x.is_finite())
        {
            return Err(Error::Domain("RBM parameters must be finite".into()));
        }
        Ok(Self {
            n_visible,
            n_hidden,
            weights,
            visible_bias,
            hidden_bias,
            beta,
        })
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn set_beta(&mut self, beta: f64) -> Result<()> {
        check_beta(beta)?;
        self.beta = beta;
        Ok(())
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n_hidden + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn visible_bias(&self) -> &[f64] {
        &self.visible_bias
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.hidden_bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn visible_bias_mut(&mut self) -> &mut [f64] {
        &mut self.visible_bias
    }

    pub fn hidden_bias_mut(&mut self) -> &mut [f64] {
        &mut self.hidden_bias
    }

    pub fn energy(&self, v: &[u8], h: &[u8]) -> Result<f64> {
        check_len(self.n_visible, v.len())?;
        check_len(self.n_hidden, h.len())?;
        let mut e = 0.0;
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0 {
                e -= self.visible_bias[i];
                for (j, &hj) in h.iter().enumerate() {
                    if hj != 0 {
                        e -= self.weight(i, j);
                    }
                }
            }
        }
        for (j, &hj) in h.iter().enumerate() {
            if hj != 0 {
                e -= self.hidden_bias[j];
            }
        }
        Ok(e)
    }

    fn hidden_activation(&self, v: &[u8], j: usize) -> f64 {
        let mut x = self.hidden_bias[j];
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0 {
                x += self.weight(i, j);
            }
        }
        x
    }

    fn visible_activation_from(&self, h: &[f64], i: usize) -> f64 {
        let row = &self.weights[i * self.n_hidden..(i + 1) * self.n_hidden];
        self.visible_bias[i] + row.iter().zip(h).map(|(w, hj)| w * hj).sum::<f64>()
    }

    pub fn hidden_probabilities(&self, v: &[u8]) -> Result<Vec<f64>> {
        check_len(self.n_visible, v.len())?;
        Ok((0..self.n_hidden)
            .map(|j| sigmoid(self.beta * self.hidden_activation(v, j)))
            .collect())
    }

    pub fn visible_probabilities(&self, h: &[u8]) -> Result<Vec<f64>> {
        check_len(self.n_hidden, h.len())?;
        let hf: Vec<f64> = h.iter().map(|&x| x as f64).collect();
        Ok((0..self.n_visible)
            .map(|i| sigmoid(self.beta * self.visible_activation_from(&hf, i)))
            .collect())
    }

    /// One alternation: sample `h ~ p(h|v)`, then `v ~ p(v|h)`. Returns the
    /// visible probabilities the new `v` was drawn from.
    fn gibbs_step<R: Rng + ?Sized>(&self, v: &mut [u8], h: &mut [u8], rng: &mut R) -> Vec<f64> {
        for (j, hj) in h.iter_mut().enumerate() {
            let p = sigmoid(self.beta * self.hidden_activation(v, j));
            *hj = u8::from(rng.gen::<f64>() < p);
        }
        let probs = self.visible_probabilities(h).expect("hidden length matches");
        for (vi, &p) in v.iter_mut().zip(&probs) {
            *vi = u8::from(rng.gen::<f64>() < p);
        }
        probs
    }

    /// `k` alternations from `v0`; returns the final visible vector and the
    /// probabilities it was sampled from.
    pub(crate) fn gibbs_run<R: Rng + ?Sized>(&self, v0: &[u8], k: usize, rng: &mut R) -> (Vec<u8>, Vec<f64>) {
        let mut v = v0.to_vec();
        let mut h = vec![0u8; self.n_hidden];
        let mut probs = vec![0.5; self.n_visible];
        for _ in 0..k {
            probs = self.gibbs_step(&mut v, &mut h, rng);
        }
        (v, probs)
    }

    pub fn gibbs_chain<R: Rng + ?Sized>(&self, v0: &[u8], k: usize, rng: &mut R) -> Result<Vec<u8>> {
        check_len(self.n_visible, v0.len())?;
        if k == 0 {
            return Err(Error::Domain("Gibbs chain length must be at least 1".into()));
        }
        Ok(self.gibbs_run(v0, k, rng).0)
    }

    /// CD-k estimate of the log-likelihood ascent direction, averaged over `batch`:
    /// `<v hᵀ>_data - <v hᵀ>_recon` with hidden statistics taken as `p(h|v)`.
    pub fn cd_direction<R: Rng + ?Sized>(&self, batch: &[Vec<u8>], k: usize, rng: &mut R) -> Result<RbmGradient> {
        if batch.is_empty() {
            return Err(Error::Domain("contrastive-divergence batch is empty".into()));
        }
        if k == 0 {
            return Err(Error::Domain("Gibbs steps must be at least 1".into()));
        }
        let (nv, nh) = (self.n_visible, self.n_hidden);
        let mut g = RbmGradient::zeros(nv, nh);
        for v0 in batch {
            check_len(nv, v0.len())?;
            let ph0 = self.hidden_probabilities(v0)?;
            let (vk, _) = self.gibbs_run(v0, k, rng);
            let phk = self.hidden_probabilities(&vk)?;
            for i in 0..nv {
                let (d, r) = (v0[i] as f64, vk[i] as f64);
                g.visible_bias[i] += d - r;
                for j in 0..nh {
                    g.weights[i * nh + j] += d * ph0[j] - r * phk[j];
                }
            }
            for j in 0..nh {
                g.hidden_bias[j] += ph0[j] - phk[j];
            }
        }
        let scale = 1.0 / batch.len() as f64;
        g.weights.iter_mut().for_each(|x| *x *= scale);
        g.visible_bias.iter_mut().for_each(|x| *x *= scale);
        g.hidden_bias.iter_mut().for_each(|x| *x *= scale);
        Ok(g)
    }

    /// One contrastive-divergence update with learning rate `epsilon`.
    pub fn cd_update<R: Rng + ?Sized>(&mut self, batch: &[Vec<u8>], k: usize, epsilon: f64, rng: &mut R) -> Result<()> {
        let g = self.cd_direction(batch, k, rng)?;
        self.apply(&g, epsilon);
        Ok(())
    }

    pub fn apply(&mut self, g: &RbmGradient, epsilon: f64) {
        for (w, d) in self.weights.iter_mut().zip(&g.weights) {
            *w += epsilon * d;
        }
        for (a, d) in self.visible_bias.iter_mut().zip(&g.visible_bias) {
            *a += epsilon * d;
        }
        for (b, d) in self.hidden_bias.iter_mut().zip(&g.hidden_bias) {
            *b += epsilon * d;
        }
    }

    /// Plain-text checkpoint: magic line, `n_visible n_hidden beta`, then the
    /// weights row-major, the visible biases and the hidden biases, one line each.
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{CHECKPOINT_MAGIC}");
        let _ = writeln!(out, "{} {} {:e}", self.n_visible, self.n_hidden, self.beta);
        for block in [&self.weights, &self.visible_bias, &self.hidden_bias] {
            let line: Vec<String> = block.iter().map(|x| format!("{x:e}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, message: &str| Error::Parse {
            line,
            message: message.to_string(),
        };
        match lines.next() {
            Some((_, l)) if l.trim() == CHECKPOINT_MAGIC => {}
            _ => return Err(bad(1, "missing checkpoint header")),
        }
        let (lineno, dims) = lines.next().ok_or_else(|| bad(2, "missing dimensions"))?;
        let dims: Vec<&str> = dims.split_whitespace().collect();
        if dims.len() != 3 {
            return Err(bad(lineno + 1, "expected `n_visible n_hidden beta`"));
        }
        let nv: usize = dims[0].parse().map_err(|_| bad(lineno + 1, "invalid n_visible"))?;
        let nh: usize = dims[1].parse().map_err(|_| bad(lineno + 1, "invalid n_hidden"))?;
        let beta: f64 = dims[2].parse().map_err(|_| bad(lineno + 1, "invalid beta"))?;
        let mut blocks = Vec::new();
        for expected in [nv * nh, nv, nh] {
            let (lineno, line) = lines.next().unwrap_or((blocks.len() + 2, ""));
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(lineno + 1, "non-numeric parameter"))?;
            if values.len() != expected {
                return Err(bad(
                    lineno + 1,
                    &format!("expected {expected} values, found {}", values.len()),
                ));
            }
            blocks.push(values);
        }
        let hidden = blocks.pop().unwrap();
        let visible = blocks.pop().unwrap();
        let weights = blocks.pop().unwrap();
        Self::from_parts(weights, visible, hidden, beta)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_checkpoint())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&std::fs::read_to_string(path)?)
    }
}

/// Contrastive-divergence training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub gibbs_k: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2,
            batch_size: 16,
            gibbs_k: 10,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.gibbs_k == 0 {
            return Err(Error::Config(
                "epochs, batch_size and gibbs_k must all be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Visible-layer encoding: alpha occupations of orbitals 1..n, then beta.
pub fn encode_determinant(det: &Determinant, n_orbitals: usize) -> Vec<u8> {
    let mut v = Vec::with_capacity(2 * n_orbitals);
    v.extend((0..n_orbitals).map(|p| (det.alpha >> p & 1) as u8));
    v.extend((0..n_orbitals).map(|p| (det.beta >> p & 1) as u8));
    v
}

pub fn decode_determinant(v: &[u8]) -> Result<Determinant> {
    if v.len() % 2 != 0 || v.len() > 128 {
        return Err(Error::Shape {
            expected: v.len() + v.len() % 2,
            found: v.len(),
        });
    }
    let n = v.len() / 2;
    let bits = |slice: &[u8]| {
        slice
            .iter()
            .enumerate()
            .fold(0u64, |acc, (p, &b)| acc | ((b != 0) as u64) << p)
    };
    Ok(Determinant::new(bits(&v[..n]), bits(&v[n..])))
}

/// Trains on `vectors` for `config.epochs` epochs of shuffled mini-batches.
pub fn train_vectors(model: &RbmModel, vectors: &[Vec<u8>], config: &TrainConfig) -> Result<RbmModel> {
    config.validate()?;
    if vectors.is_empty() {
        return Err(Error::Domain("cannot train on an empty data set".into()));
    }
    let mut model = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    let mut batch = Vec::with_capacity(config.batch_size);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| vectors[i].clone()));
            model.cd_update(&batch, config.gibbs_k, config.learning_rate, &mut rng)?;
        }
    }
    Ok(model)
}

/// Trains on the (unweighted) encodings of `dets`.
pub fn train(model: &RbmModel, dets: &[Determinant], n_orbitals: usize, config: &TrainConfig) -> Result<RbmModel> {
    if dets.is_empty() {
        return Err(Error::Domain("cannot train on an empty determinant list".into()));
    }
    let vectors: Vec<Vec<u8>> = dets.iter().map(|d| encode_determinant(d, n_orbitals)).collect();
    check_len(model.n_visible(), vectors[0].len())?;
    train_vectors(model, &vectors, config)
}
