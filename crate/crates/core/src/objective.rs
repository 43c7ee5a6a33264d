//! Insider's expected utility, the three-term first-order decomposition and
//! the zero price impact subspace.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{ensure_len, Error, Result};
use crate::market_model::{weighted_inner_product, NoiseProfile, PayoffFamily, StateGrid};
use crate::numeric::MeanVar;
use crate::orderflow::{path_normals, path_seed, pi_insider, BeliefStatistic, PathMc};
use crate::quadrature::legendre_with_derivative;

/// Residual norm below which a dictionary direction is treated as spanned.
pub const SPAN_TOL: f64 = 1e-8;

/// Squared cosine to the belief span below which a direction counts as orthogonal.
pub const NULL_TOL: f64 = 1e-12;

/// Problem data shared by every objective evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Market<'a> {
    pub family: &'a PayoffFamily,
    pub noise: &'a NoiseProfile,
    pub grid: &'a StateGrid,
}

impl<'a> Market<'a> {
    pub fn new(family: &'a PayoffFamily, noise: &'a NoiseProfile, grid: &'a StateGrid) -> Result<Self> {
        let n = grid.len();
        ensure_len(n, noise.len())?;
        for row in family.rows() {
            ensure_len(n, row.len())?;
        }
        Ok(Self { family, noise, grid })
    }

    /// `g_u = ∫ η(x, s_u) f(x) dx`.
    pub fn payoff_pairings(&self, f: &[f64]) -> Result<Vec<f64>> {
        ensure_len(self.grid.len(), f.len())?;
        self.family
            .rows()
            .iter()
            .map(|row| {
                let prod: Vec<f64> = row.iter().zip(f).map(|(a, b)| a * b).collect();
                self.grid.integrate(&prod)
            })
            .collect()
    }
}

fn check_signal(s_index: usize, signals: usize) -> Result<()> {
    if s_index >= signals {
        return Err(Error::Objective(format!("signal index {s_index} out of range for {signals} signals")));
    }
    Ok(())
}

fn realized_utility(pi: &[f64], g: &[f64], s_index: usize) -> f64 {
    g[s_index] - pi.iter().zip(g).map(|(p, x)| p * x).sum::<f64>()
}

fn shifted(increments: &[f64], v: &[f64], scale: f64) -> Vec<f64> {
    increments.iter().zip(v).map(|(d, x)| d + scale * x).collect()
}

/// Monte Carlo estimate of `E[∫(η(x,s) − P(x,ω)) W(x) dx]` with its standard error.
pub fn expected_utility(w: &[f64], belief: &[Vec<f64>], s_index: usize, market: Market<'_>, mc: PathMc) -> Result<(f64, f64)> {
    mc.check()?;
    let grid = market.grid;
    check_signal(s_index, market.family.signals())?;
    let stat = BeliefStatistic::new(belief, market.noise, grid)?;
    ensure_len(market.family.signals(), stat.signals())?;
    let g = market.payoff_pairings(w)?;
    if w.iter().all(|&x| x == 0.0) {
        return Ok((0.0, 0.0));
    }
    let n = grid.len();
    let parts = mc.map_blocks(|range| -> Result<MeanVar> {
        let mut acc = MeanVar::default();
        for p in range {
            let xi = path_normals(path_seed(mc.seed, p as u64), n - 1);
            let inc = drift_increments(w, market, &xi);
            let post = stat.posterior(&inc)?;
            acc.push(realized_utility(&post.pi1, &g, s_index));
        }
        Ok(acc)
    });
    let mut total = MeanVar::default();
    for part in parts {
        total.merge(&part?);
    }
    Ok((total.mean(), total.std_err()))
}

fn drift_increments(w: &[f64], market: Market<'_>, xi: &[f64]) -> Vec<f64> {
    let h = market.grid.step();
    let sh = h.sqrt();
    let sigma = market.noise.sigma();
    xi.iter().enumerate().map(|(j, x)| w[j] * h + sigma[j] * sh * x).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocReport {
    pub direction_id: String,
    pub payoff_term: f64,
    pub ad_term: f64,
    pub impact_term: f64,
    pub fd_total: f64,
    /// `fd_total − (payoff_term − ad_term − impact_term)`.
    pub residual: f64,
    /// Combined standard error of the Monte Carlo terms.
    pub std_err: f64,
    pub std_err_fd: f64,
    pub epsilon: f64,
    pub n_paths: usize,
}

impl FocReport {
    pub fn closes(&self, k: f64) -> bool {
        self.residual.abs() <= k * self.std_err
    }
}

/// Finite-difference step `1e-3·‖W‖∞/‖v‖∞`, floored at `1e-4`.
pub fn fd_step(w: &[f64], v: &[f64]) -> Result<f64> {
    let wn = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let vn = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if vn == 0.0 {
        if wn == 0.0 {
            return Err(Error::Objective("finite-difference step underflows: W and v are both zero".into()));
        }
        return Ok(1e-4);
    }
    Ok((1e-3 * wn / vn).max(1e-4))
}

/// Payoff, Arrow–Debreu and price-impact terms of the directional derivative
/// of J along `v`, checked against a central finite difference under common
/// random numbers.
pub fn foc_terms(
    w: &[f64],
    belief: &[Vec<f64>],
    s_index: usize,
    v: &[f64],
    direction_id: &str,
    market: Market<'_>,
    mc: PathMc,
) -> Result<FocReport> {
    mc.check()?;
    let grid = market.grid;
    let n = grid.len();
    check_signal(s_index, market.family.signals())?;
    ensure_len(n, v.len())?;
    let stat = BeliefStatistic::new(belief, market.noise, grid)?;
    ensure_len(market.family.signals(), stat.signals())?;
    let eps = fd_step(w, v)?;
    let gw = market.payoff_pairings(w)?;
    let gv = market.payoff_pairings(v)?;
    let piv = pi_insider(v, belief, market.noise, grid)?;
    let h = grid.step();

    let parts = mc.map_blocks(|range| -> Result<[MeanVar; 3]> {
        let mut acc = [MeanVar::default(), MeanVar::default(), MeanVar::default()];
        for p in range {
            let xi = path_normals(path_seed(mc.seed, p as u64), n - 1);
            let inc = drift_increments(w, market, &xi);
            let pi = stat.posterior(&inc)?.pi1;
            let ad: f64 = pi.iter().zip(&gv).map(|(a, b)| a * b).sum();
            let mean_g: f64 = pi.iter().zip(&gw).map(|(a, b)| a * b).sum();
            let mean_v: f64 = pi.iter().zip(&piv).map(|(a, b)| a * b).sum();
            let cross: f64 = pi.iter().zip(gw.iter().zip(&piv)).map(|(a, (b, c))| a * b * c).sum();
            let impact = cross - mean_g * mean_v;

            let g_plus: Vec<f64> = gw.iter().zip(&gv).map(|(a, b)| a + eps * b).collect();
            let g_minus: Vec<f64> = gw.iter().zip(&gv).map(|(a, b)| a - eps * b).collect();
            let pi_plus = stat.posterior(&shifted(&inc, v, eps * h))?.pi1;
            let pi_minus = stat.posterior(&shifted(&inc, v, -eps * h))?.pi1;
            let fd = (realized_utility(&pi_plus, &g_plus, s_index) - realized_utility(&pi_minus, &g_minus, s_index)) / (2.0 * eps);
            acc[0].push(ad);
            acc[1].push(impact);
            acc[2].push(fd);
        }
        Ok(acc)
    });
    let mut total = [MeanVar::default(), MeanVar::default(), MeanVar::default()];
    for part in parts {
        let part = part?;
        for (t, p) in total.iter_mut().zip(&part) {
            t.merge(p);
        }
    }
    let payoff_term = gv[s_index];
    let (ad_term, impact_term, fd_total) = (total[0].mean(), total[1].mean(), total[2].mean());
    let std_err = (total[0].std_err().powi(2) + total[1].std_err().powi(2) + total[2].std_err().powi(2)).sqrt();
    Ok(FocReport {
        direction_id: direction_id.into(),
        payoff_term,
        ad_term,
        impact_term,
        fd_total,
        residual: fd_total - (payoff_term - ad_term - impact_term),
        std_err,
        std_err_fd: total[2].std_err(),
        epsilon: eps,
        n_paths: mc.n_paths,
    })
}

/// The first `size` Legendre polynomials mapped onto the grid interval.
pub fn legendre_dictionary(grid: &StateGrid, size: usize) -> Vec<Vec<f64>> {
    let (a, b) = (grid.x_min(), grid.x_max());
    (0..size)
        .map(|k| grid.tabulate(|x| legendre_with_derivative(k, (2.0 * x - a - b) / (b - a)).0))
        .collect()
}

/// Orthonormal (σ-weighted) directions inside the span of a trial dictionary
/// that are orthogonal to every belief row.
pub fn zero_impact_basis_with(
    belief: &[Vec<f64>],
    dictionary: &[Vec<f64>],
    noise: &NoiseProfile,
    grid: &StateGrid,
) -> Result<Vec<Vec<f64>>> {
    if dictionary.is_empty() {
        return Err(Error::Objective("zero-impact dictionary is empty".into()));
    }
    for f in belief.iter().chain(dictionary) {
        ensure_len(grid.len(), f.len())?;
    }
    let ip = |f: &[f64], g: &[f64]| weighted_inner_product(f, g, noise, grid);
    let span_b = gram_schmidt(belief, &ip)?;
    let span_d = gram_schmidt(dictionary, &ip)?;
    let m = span_d.len();
    let mut overlap = DMatrix::<f64>::zeros(span_b.len(), m);
    for (i, e) in span_b.iter().enumerate() {
        for (k, d) in span_d.iter().enumerate() {
            overlap[(i, k)] = ip(e, d)?;
        }
    }
    // squared cosines between dictionary directions and the belief span
    let eig = SymmetricEigen::new(overlap.transpose() * &overlap);
    let mut out = Vec::new();
    for k in 0..m {
        if eig.eigenvalues[k] > NULL_TOL {
            continue;
        }
        let coef = eig.eigenvectors.column(k);
        let mut f = vec![0.0; grid.len()];
        for (c, d) in coef.iter().zip(&span_d) {
            for (fj, dj) in f.iter_mut().zip(d) {
                *fj += c * dj;
            }
        }
        for e in &span_b {
            let c = ip(&f, e)?;
            for (fj, ej) in f.iter_mut().zip(e) {
                *fj -= c * ej;
            }
        }
        let norm = ip(&f, &f)?.sqrt();
        if norm > SPAN_TOL {
            out.push(f.into_iter().map(|x| x / norm).collect());
        }
    }
    Ok(out)
}

fn gram_schmidt(rows: &[Vec<f64>], ip: &impl Fn(&[f64], &[f64]) -> Result<f64>) -> Result<Vec<Vec<f64>>> {
    let mut span: Vec<Vec<f64>> = Vec::new();
    for f in rows {
        let norm0 = ip(f, f)?.sqrt();
        if norm0 == 0.0 {
            continue;
        }
        let mut r: Vec<f64> = f.iter().map(|x| x / norm0).collect();
        for _ in 0..2 {
            for e in &span {
                let c = ip(&r, e)?;
                for (rj, ej) in r.iter_mut().zip(e) {
                    *rj -= c * ej;
                }
            }
        }
        let norm = ip(&r, &r)?.sqrt();
        if norm > SPAN_TOL {
            span.push(r.into_iter().map(|x| x / norm).collect());
        }
    }
    Ok(span)
}

/// Zero-impact directions from the first `2I` Legendre functions.
pub fn zero_impact_basis(belief: &[Vec<f64>], noise: &NoiseProfile, grid: &StateGrid) -> Result<Vec<Vec<f64>>> {
    let dict = legendre_dictionary(grid, 2 * belief.len());
    zero_impact_basis_with(belief, &dict, noise, grid)
}

/// A zero-impact direction whose payoff pairing with some signal is not
/// negligible: a position with no price impact but nonzero expected payoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViabilityViolation {
    pub direction: usize,
    pub signal: usize,
    pub pairing: f64,
}

pub fn viability_violations(basis: &[Vec<f64>], market: Market<'_>, tol: f64) -> Result<Vec<ViabilityViolation>> {
    let mut out = Vec::new();
    for (d, v) in basis.iter().enumerate() {
        for (s, g) in market.payoff_pairings(v)?.into_iter().enumerate() {
            if g.abs() > tol {
                out.push(ViabilityViolation { direction: d, signal: s, pairing: g });
            }
        }
    }
    Ok(out)
}

/// Centered payoff directions `η(·, s_u) − m̄`, one per signal.
pub fn centered_payoff_directions(family: &PayoffFamily) -> Vec<Vec<f64>> {
    let mean = family.prior_mean_density();
    family
        .rows()
        .iter()
        .map(|row| row.iter().zip(&mean).map(|(a, b)| a - b).collect())
        .collect()
}
