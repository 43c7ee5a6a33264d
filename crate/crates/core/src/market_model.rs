//! Economic primitives: the state grid, noise-trading intensity and the
//! signal-contingent payoff densities, together with the noise-weighted inner
//! product `⟨f, g⟩_σ = ∫ f g / σ² dx` everything downstream is built on.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{ensure_len, Error, Result};

/// Uniform grid over the state index interval with composite trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrid {
    x_min: f64,
    x_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl StateGrid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::Model("grid bounds must be finite".into()));
        }
        if x_min >= x_max {
            return Err(Error::Model(format!("grid requires x_min < x_max, got [{x_min}, {x_max}]")));
        }
        if n < 3 {
            return Err(Error::Model(format!("grid requires at least 3 nodes, got {n}")));
        }
        let h = (x_max - x_min) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|j| x_min + j as f64 * h).collect();
        nodes[n - 1] = x_max;
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        Ok(Self { x_min, x_max, nodes, weights })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn step(&self) -> f64 {
        (self.x_max - self.x_min) / (self.len() - 1) as f64
    }

    pub fn span(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Trapezoid integral of a grid function.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        ensure_len(self.len(), f.len())?;
        Ok(self.weights.iter().zip(f).map(|(w, v)| w * v).sum())
    }

    /// Index of the node closest to `x` (clamped to the grid).
    pub fn nearest_index(&self, x: f64) -> usize {
        let t = ((x - self.x_min) / self.step()).round();
        (t.max(0.0) as usize).min(self.len() - 1)
    }

    /// Samples `f` at every node.
    pub fn tabulate(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }
}

/// Noise-trading intensity σ(x) at each grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProfile {
    sigma: Vec<f64>,
}

impl NoiseProfile {
    pub fn new(sigma: Vec<f64>) -> Result<Self> {
        if let Some((j, s)) = sigma.iter().enumerate().find(|(_, s)| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::Model(format!("noise intensity must be positive and finite, sigma[{j}] = {s}")));
        }
        Ok(Self { sigma })
    }

    pub fn constant(grid: &StateGrid, sigma: f64) -> Result<Self> {
        Self::new(vec![sigma; grid.len()])
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// σ(x) multiplied by a positive constant.
    pub fn scaled(&self, gamma: f64) -> Result<Self> {
        Self::new(self.sigma.iter().map(|s| s * gamma).collect())
    }

    /// 1/σ² at each node.
    pub fn precision(&self) -> Vec<f64> {
        self.sigma.iter().map(|s| 1.0 / (s * s)).collect()
    }
}

/// `Σ_j w_j f_j g_j / σ_j²`.
pub fn weighted_inner_product(f: &[f64], g: &[f64], noise: &NoiseProfile, grid: &StateGrid) -> Result<f64> {
    let n = grid.len();
    ensure_len(n, f.len())?;
    ensure_len(n, g.len())?;
    ensure_len(n, noise.len())?;
    let mut total = 0.0;
    for j in 0..n {
        let s = noise.sigma[j];
        total += grid.weights[j] * f[j] * g[j] / (s * s);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    GaussianMeanShift,
    GaussianVariance,
    SkewNormal,
    Tabulated,
}

/// Skew-normal density with location ξ, scale ω and shape a:
/// `2/ω · φ((x−ξ)/ω) · Φ(a(x−ξ)/ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewNormal {
    pub location: f64,
    pub scale: f64,
    pub shape: f64,
}

impl SkewNormal {
    /// Location and scale chosen so the (untruncated) law has the given mean
    /// and standard deviation; `δ = a/√(1+a²)`.
    pub fn moment_matched(mean: f64, sd: f64, shape: f64) -> Self {
        let delta = shape / (1.0 + shape * shape).sqrt();
        let scale = sd / (1.0 - 2.0 * delta * delta / PI).sqrt();
        let location = mean - scale * delta * (2.0 / PI).sqrt();
        Self { location, scale, shape }
    }

    pub fn density(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        2.0 / self.scale * std_normal_pdf(z) * std_normal_cdf(self.shape * z)
    }
}

/// Parameters for [`make_payoff_family`].
#[derive(Debug, Clone, PartialEq)]
pub enum FamilySpec {
    /// Common standard deviation, one mean per signal.
    GaussianMeanShift { means: Vec<f64>, sd: f64 },
    /// Common mean, one standard deviation per signal.
    GaussianVariance { mean: f64, sds: Vec<f64> },
    SkewNormal { params: Vec<SkewNormal> },
    /// Raw density values on the grid, one row per signal.
    Tabulated { labels: Vec<String>, rows: Vec<Vec<f64>> },
}

/// Signal-contingent payoff densities η(x_j, s_i), one row per signal.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffFamily {
    labels: Vec<String>,
    eta: Vec<Vec<f64>>,
    kind: FamilyKind,
}

impl PayoffFamily {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.eta
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.eta[i]
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    /// Number of signals I.
    pub fn signals(&self) -> usize {
        self.eta.len()
    }

    /// Prior-mean density `(1/I) Σ_i η(·, s_i)`.
    pub fn prior_mean_density(&self) -> Vec<f64> {
        let n = self.eta[0].len();
        let inv = 1.0 / self.signals() as f64;
        (0..n).map(|j| inv * self.eta.iter().map(|r| r[j]).sum::<f64>()).collect()
    }

    /// Same densities in a different signal order.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            labels: order.iter().map(|&i| self.labels[i].clone()).collect(),
            eta: order.iter().map(|&i| self.eta[i].clone()).collect(),
            kind: self.kind,
        }
    }
}

fn default_labels(count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("s{i}")).collect()
}

fn check_location(mu: f64, grid: &StateGrid) -> Result<()> {
    let mid = 0.5 * (grid.x_min() + grid.x_max());
    if !mu.is_finite() || (mu - mid).abs() > grid.span() {
        return Err(Error::Model(format!("location {mu} lies far outside the grid")));
    }
    Ok(())
}

fn check_scale(s: f64) -> Result<()> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::Model(format!("scale parameter must be positive, got {s}")));
    }
    Ok(())
}

/// Builds the payoff family on `grid`. Parametric densities are truncated to
/// the grid interval and renormalized by their trapezoid integral.
pub fn make_payoff_family(spec: &FamilySpec, grid: &StateGrid) -> Result<PayoffFamily> {
    let (kind, labels, raw): (FamilyKind, Vec<String>, Vec<Vec<f64>>) = match spec {
        FamilySpec::GaussianMeanShift { means, sd } => {
            check_scale(*sd)?;
            for &m in means {
                check_location(m, grid)?;
            }
            let rows = means
                .iter()
                .map(|&m| grid.tabulate(|x| std_normal_pdf((x - m) / sd) / sd))
                .collect();
            (FamilyKind::GaussianMeanShift, default_labels(means.len()), rows)
        }
        FamilySpec::GaussianVariance { mean, sds } => {
            check_location(*mean, grid)?;
            for &s in sds {
                check_scale(s)?;
            }
            let rows = sds
                .iter()
                .map(|&s| grid.tabulate(|x| std_normal_pdf((x - mean) / s) / s))
                .collect();
            (FamilyKind::GaussianVariance, default_labels(sds.len()), rows)
        }
        FamilySpec::SkewNormal { params } => {
            for p in params {
                check_location(p.location, grid)?;
                check_scale(p.scale)?;
                if !p.shape.is_finite() {
                    return Err(Error::Model("skew-normal shape must be finite".into()));
                }
            }
            let rows = params.iter().map(|p| grid.tabulate(|x| p.density(x))).collect();
            (FamilyKind::SkewNormal, default_labels(params.len()), rows)
        }
        FamilySpec::Tabulated { labels, rows } => {
            if labels.len() != rows.len() {
                return Err(Error::Model(format!(
                    "tabulated family has {} labels for {} rows",
                    labels.len(),
                    rows.len()
                )));
            }
            for (i, row) in rows.iter().enumerate() {
                ensure_len(grid.len(), row.len())?;
                if let Some((j, v)) = row.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
                    return Err(Error::Model(format!("tabulated density row {i} has invalid entry {v} at node {j}")));
                }
            }
            (FamilyKind::Tabulated, labels.clone(), rows.clone())
        }
    };
    if raw.len() < 2 {
        return Err(Error::Model(format!("payoff family needs at least 2 signals, got {}", raw.len())));
    }
    let mut eta = Vec::with_capacity(raw.len());
    for (i, mut row) in raw.into_iter().enumerate() {
        let mass = grid.integrate(&row)?;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Model(format!("density row {i} has no mass on the grid")));
        }
        row.iter_mut().for_each(|v| *v /= mass);
        eta.push(row);
    }
    Ok(PayoffFamily { labels, eta, kind })
}

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}
