//! Cumulative order-flow paths, pathwise Young integrals and the market
//! maker's pathwise posterior.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{ensure_len, Error, Result};
use crate::market_model::{weighted_inner_product, NoiseProfile, PayoffFamily, StateGrid};
use crate::numeric::{fill_standard_normal, softmax_into, substream, StreamDomain};

/// Paths per parallel work unit.
pub const PATH_BLOCK: usize = 256;

/// One simulated order-flow path on the state grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    increments: Vec<f64>,
    cumulative: Vec<f64>,
    seed: u64,
    drift_profile: Option<usize>,
}

impl Path {
    /// Builds a path from its increments; `cumulative` starts at zero.
    pub fn from_increments(increments: Vec<f64>, seed: u64, drift_profile: Option<usize>) -> Self {
        let mut cumulative = Vec::with_capacity(increments.len() + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for d in &increments {
            acc += d;
            cumulative.push(acc);
        }
        Self { increments, cumulative, seed, drift_profile }
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn drift_profile(&self) -> Option<usize> {
        self.drift_profile
    }

    pub fn with_drift_profile(mut self, signal: usize) -> Self {
        self.drift_profile = Some(signal);
        self
    }
}

/// Standard-normal grid noise for a path seed.
pub fn path_normals(seed: u64, len: usize) -> Vec<f64> {
    let mut xi = vec![0.0; len];
    fill_standard_normal(&mut substream(seed, StreamDomain::PathNoise, 0), &mut xi);
    xi
}

/// Seed of path `index` under a master seed.
pub fn path_seed(master: u64, index: u64) -> u64 {
    let mut rng = substream(master, StreamDomain::PathNoise, index.wrapping_add(1));
    rand_core::RngCore::next_u64(&mut rng)
}

/// Increments `W(x_j)·h + σ(x_j)·√h·ξ_j` for given normals.
pub fn simulate_with_normals(w: &[f64], noise: &NoiseProfile, grid: &StateGrid, xi: &[f64], seed: u64) -> Result<Path> {
    let n = grid.len();
    ensure_len(n, w.len())?;
    ensure_len(n, noise.len())?;
    ensure_len(n - 1, xi.len())?;
    let h = grid.step();
    let sh = h.sqrt();
    let sigma = noise.sigma();
    let increments = (0..n - 1).map(|j| w[j] * h + sigma[j] * sh * xi[j]).collect();
    Ok(Path::from_increments(increments, seed, None))
}

pub fn simulate_order_flow(w: &[f64], noise: &NoiseProfile, grid: &StateGrid, seed: u64) -> Result<Path> {
    let xi = path_normals(seed, grid.len().saturating_sub(1));
    simulate_with_normals(w, noise, grid, &xi, seed)
}

/// Left-point Riemann sum `Σ_j f(x_j)·ΔY_j`.
pub fn young_integral(f: &[f64], path: &Path) -> Result<f64> {
    ensure_len(path.increments.len() + 1, f.len())?;
    Ok(f.iter().zip(&path.increments).map(|(a, b)| a * b).sum())
}

fn check_belief(belief: &[Vec<f64>], n: usize) -> Result<()> {
    if belief.is_empty() {
        return Err(Error::OrderFlow("belief has no rows".into()));
    }
    for row in belief {
        ensure_len(n, row.len())?;
    }
    Ok(())
}

/// `Π_mm[i] = Σ_j W̃(x_j, s_i)/σ_j² · ΔY_j`.
pub fn pi_mm(path: &Path, belief: &[Vec<f64>], noise: &NoiseProfile, grid: &StateGrid) -> Result<Vec<f64>> {
    Ok(BeliefStatistic::new(belief, noise, grid)?.pi_mm(path.increments()))
}

/// `Π_insider[i] = ⟨W, W̃(·, s_i)⟩_σ`.
pub fn pi_insider(w: &[f64], belief: &[Vec<f64>], noise: &NoiseProfile, grid: &StateGrid) -> Result<Vec<f64>> {
    check_belief(belief, grid.len())?;
    belief.iter().map(|row| weighted_inner_product(w, row, noise, grid)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPosterior {
    pub pi1: Vec<f64>,
    pub log_likelihoods: Vec<f64>,
    pub pi_mm: Vec<f64>,
}

/// Precomputed pathwise statistic for a fixed belief: the Riemann weights
/// `W̃(x_j, s_i)/σ_j²` and the halved self-norms.
#[derive(Debug, Clone)]
pub struct BeliefStatistic {
    weights: Vec<Vec<f64>>,
    half_norms: Vec<f64>,
}

impl BeliefStatistic {
    pub fn new(belief: &[Vec<f64>], noise: &NoiseProfile, grid: &StateGrid) -> Result<Self> {
        let n = grid.len();
        check_belief(belief, n)?;
        ensure_len(n, noise.len())?;
        let precision = noise.precision();
        let weights = belief
            .iter()
            .map(|row| row[..n - 1].iter().zip(&precision).map(|(b, p)| b * p).collect())
            .collect();
        let half_norms = belief
            .iter()
            .map(|row| weighted_inner_product(row, row, noise, grid).map(|v| 0.5 * v))
            .collect::<Result<_>>()?;
        Ok(Self { weights, half_norms })
    }

    pub fn signals(&self) -> usize {
        self.weights.len()
    }

    pub fn pi_mm(&self, increments: &[f64]) -> Vec<f64> {
        self.weights.iter().map(|w| w.iter().zip(increments).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn posterior(&self, increments: &[f64]) -> Result<PathPosterior> {
        ensure_len(self.weights[0].len(), increments.len())?;
        let pi_mm = self.pi_mm(increments);
        let log_likelihoods: Vec<f64> = pi_mm.iter().zip(&self.half_norms).map(|(p, h)| p - h).collect();
        if log_likelihoods.iter().any(|l| !l.is_finite()) {
            return Err(Error::OrderFlow(format!("non-finite log-likelihood {log_likelihoods:?}")));
        }
        let mut pi1 = vec![0.0; log_likelihoods.len()];
        softmax_into(&log_likelihoods, &mut pi1);
        Ok(PathPosterior { pi1, log_likelihoods, pi_mm })
    }
}

/// Posterior over signals given one path under the uniform prior.
pub fn pathwise_posterior(path: &Path, belief: &[Vec<f64>], noise: &NoiseProfile, grid: &StateGrid) -> Result<PathPosterior> {
    ensure_len(grid.len() - 1, path.increments.len())?;
    BeliefStatistic::new(belief, noise, grid)?.posterior(path.increments())
}

/// Arrow–Debreu prices `P(x_j) = Σ_i π_i η(x_j, s_i)`.
pub fn price_schedule(posterior: &PathPosterior, family: &PayoffFamily, grid: &StateGrid) -> Result<Vec<f64>> {
    ensure_len(family.signals(), posterior.pi1.len())?;
    let n = grid.len();
    let mut p = vec![0.0; n];
    for (pi, row) in posterior.pi1.iter().zip(family.rows()) {
        ensure_len(n, row.len())?;
        for (pj, e) in p.iter_mut().zip(row) {
            *pj += pi * e;
        }
    }
    Ok(p)
}

/// Path-level Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathMc {
    pub n_paths: usize,
    pub seed: u64,
}

impl PathMc {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self { n_paths, seed }
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::OrderFlow(format!("need at least two paths, got {}", self.n_paths)));
        }
        Ok(())
    }

    /// Paths split into blocks, processed in parallel and returned in block order.
    pub fn map_blocks<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(core::ops::Range<usize>) -> T + Sync + Send,
    {
        let blocks = self.n_paths.div_ceil(PATH_BLOCK);
        crate::numeric::map_blocks(blocks, |b| {
            let start = b * PATH_BLOCK;
            f(start..(start + PATH_BLOCK).min(self.n_paths))
        })
    }
}
