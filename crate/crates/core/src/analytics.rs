//! Equilibrium price-impact kernels, information efficiency and the
//! invariance experiment.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand_distr::{Distribution, Uniform};

use crate::equilibrium::{from_solution, solve_canonical, Equilibrium, McConfig, SolverConfig};
use crate::error::{ensure_len, Error, Result};
use crate::info_kernel::CanonicalKernel;
use crate::market_model::{PayoffFamily, StateGrid};
use crate::numeric::{substream, MeanVar, StreamDomain};
use crate::objective::Market;
use crate::orderflow::{path_normals, path_seed, BeliefStatistic, PathMc};
use crate::posterior::posterior_moments;

/// Default number of evenly spaced indices per axis of a coarse impact grid.
pub const DEFAULT_SUBGRID: usize = 21;

/// Law of the order flow under which impact is averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImpactLaw {
    /// Signal drawn uniformly per path.
    Equilibrium,
    /// Signal fixed.
    Conditional(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactEstimate {
    pub x_index: usize,
    pub y_index: usize,
    pub lambda: f64,
    pub std_err: f64,
    pub n_paths: usize,
    /// Smallest per-path covariance, scaled like `lambda`.
    pub min_sample: f64,
}

/// Λ on a rectangular sub-grid of state indices, stored row-major in x.
#[derive(Debug, Clone)]
pub struct ImpactGrid {
    pub x_indices: Vec<usize>,
    pub y_indices: Vec<usize>,
    pub estimates: Vec<ImpactEstimate>,
}

impl ImpactGrid {
    pub fn get(&self, a: usize, b: usize) -> &ImpactEstimate {
        &self.estimates[a * self.y_indices.len() + b]
    }
}

/// `count` evenly spaced indices covering `0..n`.
pub fn default_subgrid(n: usize, count: usize) -> Vec<usize> {
    if count >= n {
        return (0..n).collect();
    }
    let mut out: Vec<usize> = (0..count).map(|k| (k * (n - 1) + (count - 1) / 2) / (count - 1)).collect();
    out.dedup();
    out
}

/// `Λ_{x,y} = E[Cov_π(η(x,·), W*(y,·))] / σ²(y)` for every pair of sub-grid indices.
pub fn impact_kernel(
    x_indices: &[usize],
    y_indices: &[usize],
    eq: &Equilibrium,
    market: Market<'_>,
    mc: PathMc,
    law: ImpactLaw,
) -> Result<ImpactGrid> {
    let grid = market.grid;
    let n = grid.len();
    let signals = market.family.signals();
    if eq.demand.len() != signals {
        return Err(Error::Analytics(format!("equilibrium has {} signals, family has {signals}", eq.demand.len())));
    }
    if mc.n_paths < 2 {
        return Err(Error::Analytics(format!("need at least two paths, got {}", mc.n_paths)));
    }
    for &i in x_indices.iter().chain(y_indices) {
        if i >= n {
            return Err(Error::Analytics(format!("grid index {i} out of range for {n} nodes")));
        }
    }
    if let ImpactLaw::Conditional(s) = law {
        if s >= signals {
            return Err(Error::Analytics(format!("signal index {s} out of range for {signals} signals")));
        }
    }
    let stat = BeliefStatistic::new(&eq.demand, market.noise, grid)?;
    let eta_x: Vec<Vec<f64>> = x_indices.iter().map(|&x| market.family.rows().iter().map(|r| r[x]).collect()).collect();
    let w_y: Vec<Vec<f64>> = y_indices.iter().map(|&y| eq.demand.iter().map(|r| r[y]).collect()).collect();
    let scale: Vec<f64> = y_indices.iter().map(|&y| 1.0 / market.noise.sigma()[y].powi(2)).collect();
    let pairs = x_indices.len() * y_indices.len();
    let h = grid.step();
    let sh = libm::sqrt(h);
    let sigma = market.noise.sigma();
    let draw = Uniform::new(0, signals).map_err(|e| Error::Analytics(format!("{e}")))?;

    let parts = mc.map_blocks(|range| -> Result<(Vec<MeanVar>, Vec<f64>)> {
        let mut acc = vec![MeanVar::default(); pairs];
        let mut mins = vec![f64::INFINITY; pairs];
        for p in range {
            let s = match law {
                ImpactLaw::Equilibrium => draw.sample(&mut substream(mc.seed, StreamDomain::SignalDraw, p as u64)),
                ImpactLaw::Conditional(s) => s,
            };
            let xi = path_normals(path_seed(mc.seed, p as u64), n - 1);
            let w = &eq.demand[s];
            let inc: Vec<f64> = (0..n - 1).map(|j| w[j] * h + sigma[j] * sh * xi[j]).collect();
            let pi = stat.posterior(&inc)?.pi1;
            let mean_w: Vec<f64> = w_y.iter().map(|wy| dot(&pi, wy)).collect();
            for (a, ex) in eta_x.iter().enumerate() {
                let mean_e = dot(&pi, ex);
                for (b, wy) in w_y.iter().enumerate() {
                    let cross: f64 = pi.iter().zip(ex.iter().zip(wy)).map(|(q, (e, v))| q * e * v).sum();
                    let v = (cross - mean_e * mean_w[b]) * scale[b];
                    let k = a * w_y.len() + b;
                    acc[k].push(v);
                    mins[k] = mins[k].min(v);
                }
            }
        }
        Ok((acc, mins))
    });
    let mut total = vec![MeanVar::default(); pairs];
    let mut mins = vec![f64::INFINITY; pairs];
    for part in parts {
        let (acc, m) = part?;
        for k in 0..pairs {
            total[k].merge(&acc[k]);
            mins[k] = mins[k].min(m[k]);
        }
    }
    let mut estimates = Vec::with_capacity(pairs);
    for (a, &x) in x_indices.iter().enumerate() {
        for (b, &y) in y_indices.iter().enumerate() {
            let k = a * y_indices.len() + b;
            estimates.push(ImpactEstimate {
                x_index: x,
                y_index: y,
                lambda: total[k].mean(),
                std_err: total[k].std_err(),
                n_paths: mc.n_paths,
                min_sample: mins[k],
            });
        }
    }
    Ok(ImpactGrid { x_indices: x_indices.to_vec(), y_indices: y_indices.to_vec(), estimates })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cross_price_impact(
    x_index: usize,
    y_index: usize,
    eq: &Equilibrium,
    market: Market<'_>,
    mc: PathMc,
    law: ImpactLaw,
) -> Result<ImpactEstimate> {
    Ok(impact_kernel(&[x_index], &[y_index], eq, market, mc, law)?.estimates[0])
}

/// Minimum number of sub-grid panels over the support of each trade.
pub const MIN_PANELS: usize = 9;

/// Double trapezoid sum `Σ_a Σ_b φ₁(x_a) φ₂(y_b) Λ_{ab} w_a w_b` on the sub-grid.
pub fn derivative_cross_impact(phi1: &[f64], phi2: &[f64], impact: &ImpactGrid, grid: &StateGrid) -> Result<f64> {
    let n = grid.len();
    ensure_len(n, phi1.len())?;
    ensure_len(n, phi2.len())?;
    if phi1.iter().all(|&v| v == 0.0) || phi2.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let xs = grid.nodes();
    check_cover(phi1, &impact.x_indices, xs)?;
    check_cover(phi2, &impact.y_indices, xs)?;
    let wx = subgrid_weights(&impact.x_indices, xs);
    let wy = subgrid_weights(&impact.y_indices, xs);
    let mut total = 0.0;
    for (a, &x) in impact.x_indices.iter().enumerate() {
        for (b, &y) in impact.y_indices.iter().enumerate() {
            total += phi1[x] * phi2[y] * impact.get(a, b).lambda * wx[a] * wy[b];
        }
    }
    Ok(total)
}

fn subgrid_weights(idx: &[usize], xs: &[f64]) -> Vec<f64> {
    let m = idx.len();
    let mut w = vec![0.0; m];
    for k in 0..m.saturating_sub(1) {
        let d = xs[idx[k + 1]] - xs[idx[k]];
        w[k] += 0.5 * d;
        w[k + 1] += 0.5 * d;
    }
    w
}

fn check_cover(phi: &[f64], idx: &[usize], xs: &[f64]) -> Result<()> {
    if idx.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Analytics("impact sub-grid indices must be strictly increasing".into()));
    }
    let first = phi.iter().position(|&v| v != 0.0).unwrap_or(0);
    let last = phi.iter().rposition(|&v| v != 0.0).unwrap_or(0);
    if idx.first().is_none_or(|&i| i > first) || idx.last().is_none_or(|&i| i < last) {
        return Err(Error::Analytics(format!(
            "impact sub-grid does not cover the trade support [{}, {}]",
            xs[first], xs[last]
        )));
    }
    let inside = idx.iter().filter(|&&i| i >= first && i <= last).count();
    if inside < MIN_PANELS + 1 {
        return Err(Error::Analytics(format!(
            "impact sub-grid too coarse: {} panels over the trade support, need {MIN_PANELS}",
            inside.saturating_sub(1)
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyRow {
    pub signals: usize,
    pub alpha_eff_star: f64,
    pub ie: f64,
    pub std_err: f64,
}

impl EfficiencyRow {
    /// `ie ∈ (1/I, 1)`, the expected range for a positive trading scale.
    pub fn in_open_range(&self) -> bool {
        self.ie > 1.0 / self.signals as f64 && self.ie < 1.0
    }
}

/// Expected posterior weight on the true signal at trading scale `alpha_eff_star`.
pub fn information_efficiency(signals: usize, alpha_eff_star: f64, mc: McConfig) -> Result<EfficiencyRow> {
    information_efficiency_at(signals, alpha_eff_star, 0, mc)
}

pub fn information_efficiency_at(signals: usize, alpha_eff_star: f64, true_index: usize, mc: McConfig) -> Result<EfficiencyRow> {
    if !(alpha_eff_star >= 0.0) {
        return Err(Error::Analytics(format!("trading scale must be nonnegative, got {alpha_eff_star}")));
    }
    let m = posterior_moments(alpha_eff_star, signals, true_index, mc.n_samples, mc.seed)?;
    Ok(EfficiencyRow { signals, alpha_eff_star, ie: m.m1[true_index], std_err: m.std_err_m1 })
}

/// A difference of efficiency values with its combined standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Difference {
    pub value: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone)]
pub struct EfficiencySweep {
    pub rows: Vec<EfficiencyRow>,
    pub first_differences: Vec<Difference>,
    pub second_differences: Vec<Difference>,
}

impl EfficiencySweep {
    /// Every first difference is negative by more than `k` standard errors.
    pub fn strictly_decreasing(&self, k: f64) -> bool {
        self.first_differences.iter().all(|d| d.value < -k * d.std_err)
    }

    pub fn convex(&self, k: f64) -> bool {
        self.second_differences.iter().all(|d| d.value >= -k * d.std_err)
    }
}

/// Solves the canonical equilibrium for each `I` and reports its efficiency.
/// Every entry uses the same master seed, so each row equals a standalone run.
pub fn efficiency_sweep(signal_counts: &[usize], mc: McConfig, solver: &SolverConfig) -> Result<EfficiencySweep> {
    let mut rows = Vec::with_capacity(signal_counts.len());
    for &i in signal_counts {
        if i < 2 {
            return Err(Error::Analytics(format!("efficiency sweep needs I >= 2, got {i}")));
        }
        let sol = solve_canonical(i, mc, solver)?;
        rows.push(information_efficiency(i, sol.alpha_eff_star, mc)?);
    }
    let first: Vec<Difference> = rows
        .windows(2)
        .map(|w| Difference { value: w[1].ie - w[0].ie, std_err: libm::hypot(w[0].std_err, w[1].std_err) })
        .collect();
    let second = rows
        .windows(3)
        .map(|w| Difference {
            value: w[2].ie - 2.0 * w[1].ie + w[0].ie,
            std_err: libm::sqrt(w[0].std_err.powi(2) + 4.0 * w[1].std_err.powi(2) + w[2].std_err.powi(2)),
        })
        .collect();
    Ok(EfficiencySweep { rows, first_differences: first, second_differences: second })
}

/// One side of the invariance experiment.
#[derive(Debug, Clone)]
pub struct InvarianceSide {
    pub equilibrium: Equilibrium,
    pub efficiency: EfficiencyRow,
}

#[derive(Debug, Clone)]
pub struct InvarianceReport {
    pub a: InvarianceSide,
    pub b: InvarianceSide,
}

impl InvarianceReport {
    pub fn alpha_eff_gap(&self) -> f64 {
        (self.a.equilibrium.alpha_eff_star - self.b.equilibrium.alpha_eff_star).abs()
    }

    pub fn ie_gap(&self) -> f64 {
        (self.a.efficiency.ie - self.b.efficiency.ie).abs()
    }

    pub fn ie_std_err(&self) -> f64 {
        libm::hypot(self.a.efficiency.std_err, self.b.efficiency.std_err)
    }

    /// `α*_a / α*_b`, which should equal `√(c_b/c_a)`.
    pub fn physical_ratio(&self) -> f64 {
        self.a.equilibrium.alpha_star / self.b.equilibrium.alpha_star
    }
}

/// Solves two specifications end to end under the same seeds.
pub fn invariance_experiment(
    a: (&CanonicalKernel, &PayoffFamily),
    b: (&CanonicalKernel, &PayoffFamily),
    mc: McConfig,
    solver: &SolverConfig,
) -> Result<InvarianceReport> {
    let i = a.0.signals();
    if b.0.signals() != i {
        return Err(Error::Analytics(format!("specifications differ in I: {i} vs {}", b.0.signals())));
    }
    for k in [a.0, b.0] {
        if !k.exchangeable() {
            return Err(Error::NotExchangeable { deviation: k.exchange_deviation(), signals: k.signals() });
        }
        if k.c() <= k.rank_tol() {
            return Err(Error::DegenerateKernel { c: k.c() });
        }
    }
    let side = |(kernel, family): (&CanonicalKernel, &PayoffFamily)| -> Result<InvarianceSide> {
        let sol = solve_canonical(i, mc, solver)?;
        let equilibrium = from_solution(&sol, kernel, family)?;
        let efficiency = information_efficiency(i, sol.alpha_eff_star, mc)?;
        Ok(InvarianceSide { equilibrium, efficiency })
    };
    Ok(InvarianceReport { a: side(a)?, b: side(b)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subgrid_spans_ends() {
        let s = default_subgrid(401, 21);
        assert_eq!(s.len(), 21);
        assert_eq!((s[0], s[20]), (0, 400));
        assert_eq!(s[1], 20);
        assert_eq!(default_subgrid(5, 21), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn zero_scale_efficiency_is_prior_weight() {
        for i in [2, 3, 5] {
            let row = information_efficiency(i, 0.0, McConfig::new(10_000, 4)).unwrap();
            assert!((row.ie - 1.0 / i as f64).abs() < 1e-14);
        }
        assert!(information_efficiency(2, -1.0, McConfig::new(10_000, 4)).is_err());
    }

    #[test]
    fn subgrid_weights_are_trapezoid() {
        let grid = StateGrid::new(0.0, 1.0, 11).unwrap();
        let w = subgrid_weights(&[0, 5, 10], grid.nodes());
        assert!((w[0] - 0.25).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15 && (w[2] - 0.25).abs() < 1e-15);
    }
}
