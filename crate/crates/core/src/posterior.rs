//! Canonical-game posterior: the logistic-normal (softmax-Gaussian) law of the
//! market maker's posterior weights under the symmetric ansatz, its Monte Carlo
//! moments, and a Gauss–Hermite oracle for the binary case.
//!
//! Conditional on the true signal `t`, the whitened log-likelihoods are
//! `Z + ᾱ² e_t` with `Z = ᾱ·Q·ξ`, `ξ ~ N(0, I)`, so `Cov(Z) = ᾱ² Q`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::numeric::{fill_standard_normal, map_blocks, softmax_into, substream, CompensatedSum, MeanVar, StreamDomain};
use crate::quadrature::{gauss_hermite, normal_expectation, Rule};

pub const DEFAULT_SAMPLES: usize = 200_000;
pub const MIN_SAMPLES: usize = 10_000;
const BLOCK: usize = 4096;

/// One draw of the posterior weights on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    pub q: Vec<f64>,
    pub true_index: usize,
}

fn check_args(alpha_eff: f64, signals: usize, true_index: usize) -> Result<()> {
    if !(alpha_eff >= 0.0 && alpha_eff.is_finite()) {
        return Err(Error::Posterior(format!("alpha_eff must be finite and nonnegative, got {alpha_eff}")));
    }
    if signals < 2 {
        return Err(Error::Posterior(format!("need at least 2 signals, got {signals}")));
    }
    if true_index >= signals {
        return Err(Error::Posterior(format!("true index {true_index} out of range for {signals} signals")));
    }
    Ok(())
}

/// Whitened logits `ᾱ·Q·ξ + ᾱ² e_t` written into `out`.
fn canonical_logits(alpha_eff: f64, true_index: usize, noise: &[f64], out: &mut [f64]) {
    let mean = noise.iter().sum::<f64>() / noise.len() as f64;
    for (o, &x) in out.iter_mut().zip(noise) {
        *o = alpha_eff * (x - mean);
    }
    out[true_index] += alpha_eff * alpha_eff;
}

/// Posterior weights for one standard-normal noise vector.
pub fn sample_posterior(alpha_eff: f64, signals: usize, true_index: usize, noise: &[f64]) -> Result<PosteriorSample> {
    check_args(alpha_eff, signals, true_index)?;
    if noise.len() != signals {
        return Err(Error::Posterior(format!("noise vector has length {}, expected {signals}", noise.len())));
    }
    let mut logits = vec![0.0; signals];
    canonical_logits(alpha_eff, true_index, noise, &mut logits);
    let mut q = vec![0.0; signals];
    softmax_into(&logits, &mut q);
    Ok(PosteriorSample { q, true_index })
}

/// A frozen matrix of standard-normal draws (common random numbers).
///
/// Samples are generated in fixed-size blocks, each from its own counter-based
/// substream of the seed, so the bank is identical regardless of thread count.
#[derive(Debug, Clone)]
pub struct NoiseBank {
    seed: u64,
    signals: usize,
    n_samples: usize,
    data: Vec<f64>,
}

impl NoiseBank {
    pub fn generate(seed: u64, signals: usize, n_samples: usize) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::Posterior("number of samples must be positive".into()));
        }
        if signals < 2 {
            return Err(Error::Posterior(format!("need at least 2 signals, got {signals}")));
        }
        let n_blocks = n_samples.div_ceil(BLOCK);
        let blocks = map_blocks(n_blocks, |b| {
            let rows = BLOCK.min(n_samples - b * BLOCK);
            let mut buf = vec![0.0; rows * signals];
            fill_standard_normal(&mut substream(seed, StreamDomain::PosteriorNoise, b as u64), &mut buf);
            buf
        });
        let data = blocks.concat();
        Ok(Self { seed, signals, n_samples, data })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn signals(&self) -> usize {
        self.signals
    }

    pub fn len(&self) -> usize {
        self.n_samples
    }

    pub fn is_empty(&self) -> bool {
        self.n_samples == 0
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        &self.data[k * self.signals..(k + 1) * self.signals]
    }
}

/// Monte Carlo moments of the posterior conditional on the true signal.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates {
    pub alpha_eff: f64,
    pub signals: usize,
    pub true_index: usize,
    /// `E[q_j | s_t]`.
    pub m1: Vec<f64>,
    /// `E[diag(q) − q qᵀ | s_t]`.
    pub cbar: DMatrix<f64>,
    /// `(Q · cbar · Q)_{tt}`, which equals `E[q_t (1 − q_t)]`.
    pub qcq_diag: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Standard error of `m1[true_index]`.
    pub std_err_m1: f64,
    /// Standard error of `qcq_diag`.
    pub std_err_qcq: f64,
    /// Standard error of each `m1[j]`.
    pub std_err_each: Vec<f64>,
}

struct BlockAcc {
    q: Vec<MeanVar>,
    qq: Vec<CompensatedSum>,
    qcq: MeanVar,
}

impl BlockAcc {
    fn new(i: usize) -> Self {
        Self { q: vec![MeanVar::default(); i], qq: vec![CompensatedSum::new(); i * i], qcq: MeanVar::default() }
    }

    fn merge(&mut self, other: &BlockAcc) {
        self.q.iter_mut().zip(&other.q).for_each(|(a, b)| a.merge(b));
        self.qq.iter_mut().zip(&other.qq).for_each(|(a, b)| a.merge(b));
        self.qcq.merge(&other.qcq);
    }
}

/// Moments at `alpha_eff` using a pre-generated noise bank (CRN).
pub fn moments_from_bank(alpha_eff: f64, true_index: usize, bank: &NoiseBank) -> Result<MomentEstimates> {
    let i = bank.signals();
    check_args(alpha_eff, i, true_index)?;
    let n = bank.len();
    let n_blocks = n.div_ceil(BLOCK);
    let partials = map_blocks(n_blocks, |b| {
        let mut acc = BlockAcc::new(i);
        let mut logits = vec![0.0; i];
        let mut q = vec![0.0; i];
        for k in b * BLOCK..(b * BLOCK + BLOCK).min(n) {
            canonical_logits(alpha_eff, true_index, bank.sample(k), &mut logits);
            softmax_into(&logits, &mut q);
            for a in 0..i {
                acc.q[a].push(q[a]);
                for c in a..i {
                    acc.qq[a * i + c].add(q[a] * q[c]);
                }
            }
            let qt = q[true_index];
            acc.qcq.push(qt * (1.0 - qt));
        }
        acc
    });
    let mut total = BlockAcc::new(i);
    for p in &partials {
        total.merge(p);
    }
    let nf = n as f64;
    let m1: Vec<f64> = total.q.iter().map(MeanVar::mean).collect();
    let mut cbar = DMatrix::zeros(i, i);
    for a in 0..i {
        for c in a..i {
            let eqq = total.qq[a * i + c].value() / nf;
            let v = if a == c { m1[a] - eqq } else { -eqq };
            cbar[(a, c)] = v;
            cbar[(c, a)] = v;
        }
    }
    Ok(MomentEstimates {
        alpha_eff,
        signals: i,
        true_index,
        std_err_m1: total.q[true_index].std_err(),
        std_err_each: total.q.iter().map(MeanVar::std_err).collect(),
        m1,
        cbar,
        qcq_diag: total.qcq.mean(),
        std_err_qcq: total.qcq.std_err(),
        n_samples: n,
        seed: bank.seed(),
    })
}

/// Monte Carlo moments with a fresh noise bank drawn from `seed`.
pub fn posterior_moments(
    alpha_eff: f64,
    signals: usize,
    true_index: usize,
    n_samples: usize,
    seed: u64,
) -> Result<MomentEstimates> {
    check_args(alpha_eff, signals, true_index)?;
    if n_samples < MIN_SAMPLES {
        return Err(Error::Posterior(format!("need at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    let bank = NoiseBank::generate(seed, signals, n_samples)?;
    moments_from_bank(alpha_eff, true_index, &bank)
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Gauss–Hermite evaluator of the binary logit-normal moments
/// `φ₁ = E[σ(Z)]`, `φ₂ = E[σ(Z)(1 − σ(Z))]` for `Z ~ N(α², 2α²)`.
#[derive(Debug, Clone)]
pub struct BinaryOracle {
    rule: Rule,
}

impl BinaryOracle {
    pub fn new(n_nodes: usize) -> Result<Self> {
        if n_nodes < 64 {
            return Err(Error::Posterior(format!("binary quadrature needs at least 64 nodes, got {n_nodes}")));
        }
        Ok(Self { rule: gauss_hermite(n_nodes)? })
    }

    pub fn moments(&self, alpha: f64) -> (f64, f64) {
        let a2 = alpha * alpha;
        if a2 == 0.0 {
            return (0.5, 0.25);
        }
        let phi1 = normal_expectation(&self.rule, a2, 2.0 * a2, logistic);
        let phi2 = normal_expectation(&self.rule, a2, 2.0 * a2, |z| {
            let p = logistic(z);
            p * (1.0 - p)
        });
        (phi1, phi2)
    }

    /// `1 − φ₁(α) − α² φ₂(α)`.
    pub fn phi(&self, alpha: f64) -> f64 {
        let (p1, p2) = self.moments(alpha);
        1.0 - p1 - alpha * alpha * p2
    }
}

pub fn binary_moments_quadrature(alpha: f64, n_nodes: usize) -> Result<(f64, f64)> {
    Ok(BinaryOracle::new(n_nodes)?.moments(alpha))
}
