//! Scalar equilibrium: evaluation of Φ(ᾱ), bracketing and bisection under a
//! frozen noise bank, synthesis of the equilibrium demand surface, and the
//! single-asset Kyle benchmark.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::info_kernel::CanonicalKernel;
use crate::market_model::PayoffFamily;
use crate::posterior::{moments_from_bank, MomentEstimates, NoiseBank, DEFAULT_SAMPLES, MIN_SAMPLES};

/// Tolerance on `‖Q L⁺ K L⁺ Q − Q‖_max` beyond which the demand map is refused.
pub const WHITENING_TOL: f64 = 1e-6;

/// `Φ(ᾱ) = 1 − E[q_t] − ᾱ² (Q C̄ Q)_{tt}`; `Φ(0) = 1 − 1/I`.
pub fn phi(alpha_eff: f64, moments: &MomentEstimates) -> Result<f64> {
    if alpha_eff != moments.alpha_eff {
        return Err(Error::Solver(format!(
            "moments were computed at alpha {} but Phi requested at {alpha_eff}",
            moments.alpha_eff
        )));
    }
    Ok(1.0 - moments.m1[moments.true_index] - alpha_eff * alpha_eff * moments.qcq_diag)
}

/// Monte Carlo settings for the canonical posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_samples: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self { n_samples, seed }
    }

    pub fn with_seed(seed: u64) -> Self {
        Self { n_samples: DEFAULT_SAMPLES, seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub phi_tol: f64,
    pub bracket_cap: f64,
    pub bisect_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { phi_tol: 1e-4, bracket_cap: (1u64 << 20) as f64, bisect_tol: 1e-6, max_iter: 200 }
    }
}

/// Φ̂ as a deterministic function of ᾱ: every evaluation reuses one noise bank.
#[derive(Debug, Clone)]
pub struct PhiEvaluator {
    bank: NoiseBank,
}

impl PhiEvaluator {
    pub fn new(signals: usize, mc: McConfig) -> Result<Self> {
        if mc.n_samples < MIN_SAMPLES {
            return Err(Error::Solver(format!("need at least {MIN_SAMPLES} posterior samples, got {}", mc.n_samples)));
        }
        Ok(Self { bank: NoiseBank::generate(mc.seed, signals, mc.n_samples)? })
    }

    pub fn signals(&self) -> usize {
        self.bank.signals()
    }

    pub fn bank(&self) -> &NoiseBank {
        &self.bank
    }

    pub fn moments(&self, alpha_eff: f64) -> Result<MomentEstimates> {
        moments_from_bank(alpha_eff, 0, &self.bank)
    }

    pub fn eval(&self, alpha_eff: f64) -> Result<f64> {
        phi(alpha_eff, &self.moments(alpha_eff)?)
    }
}

/// Root of Φ̂ in whitened units together with its certification data.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSolution {
    pub signals: usize,
    pub alpha_eff_star: f64,
    pub phi_residual: f64,
    /// Final bisection bracket `[lo, hi]` with Φ̂(lo) > 0 > Φ̂(hi).
    pub bracket: (f64, f64),
    /// Every sign change seen while scanning; only the first is certified.
    pub brackets: Vec<(f64, f64)>,
    pub iterations: usize,
    pub n_samples: usize,
    pub seed: u64,
}

/// Extra doublings scanned past the first negative value to detect further
/// sign changes.
const EXTRA_SCAN: usize = 2;

/// Solves Φ̂(ᾱ) = 0 in the canonical game with `signals` pseudo-securities.
pub fn solve_canonical(signals: usize, mc: McConfig, solver: &SolverConfig) -> Result<AlphaSolution> {
    let eval = PhiEvaluator::new(signals, mc)?;
    solve_with(&eval, solver)
}

pub fn solve_with(eval: &PhiEvaluator, solver: &SolverConfig) -> Result<AlphaSolution> {
    let phi0 = eval.eval(0.0)?;
    if phi0 <= 0.0 {
        return Err(Error::Solver(format!("Phi(0) = {phi0} is not positive")));
    }
    // doubling scan
    let mut scan: Vec<(f64, f64)> = Vec::new();
    scan.push((0.0, phi0));
    let mut a = 1.0;
    let mut first_negative = None;
    while a <= solver.bracket_cap {
        let v = eval.eval(a)?;
        scan.push((a, v));
        if v < 0.0 {
            first_negative = Some(scan.len() - 1);
            break;
        }
        a *= 2.0;
    }
    let hi_pos = first_negative.ok_or(Error::NoSignChange { cap: solver.bracket_cap })?;
    for _ in 0..EXTRA_SCAN {
        a *= 2.0;
        if a > solver.bracket_cap {
            break;
        }
        scan.push((a, eval.eval(a)?));
    }
    let brackets: Vec<(f64, f64)> = scan
        .windows(2)
        .filter(|w| (w[0].1 > 0.0) != (w[1].1 > 0.0))
        .map(|w| (w[0].0, w[1].0))
        .collect();

    let (mut lo, mut phi_lo) = scan[hi_pos - 1];
    let (mut hi, mut phi_hi) = scan[hi_pos];
    let mut iterations = 0;
    loop {
        let mid = 0.5 * (lo + hi);
        let v = eval.eval(mid)?;
        iterations += 1;
        if v > 0.0 {
            lo = mid;
            phi_lo = v;
        } else {
            hi = mid;
            phi_hi = v;
        }
        let (best, best_phi) = if phi_lo.abs() <= phi_hi.abs() { (lo, phi_lo) } else { (hi, phi_hi) };
        if hi - lo < solver.bisect_tol && best_phi.abs() < solver.phi_tol {
            return Ok(AlphaSolution {
                signals: eval.signals(),
                alpha_eff_star: best,
                phi_residual: best_phi,
                bracket: (lo, hi),
                brackets,
                iterations,
                n_samples: eval.bank().len(),
                seed: eval.bank().seed(),
            });
        }
        if iterations >= solver.max_iter || hi - lo < f64::EPSILON * hi {
            return Err(Error::Solver(format!(
                "bisection stalled at [{lo}, {hi}] with |Phi| = {}",
                best_phi.abs()
            )));
        }
    }
}

/// Solved equilibrium mapped back to the physical game.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub signals: usize,
    /// ᾱ*, the whitened trading scale.
    pub alpha_eff_star: f64,
    /// α* = ᾱ*/√c.
    pub alpha_star: f64,
    pub c: f64,
    /// Column i is θ*(s_i) = ᾱ* Q e_i.
    pub theta_star: DMatrix<f64>,
    /// Column i is β*(s_i) = ᾱ* L⁺ Q e_i, the payoff-density coefficients of W*(·, s_i).
    pub beta_star: DMatrix<f64>,
    /// Row i is W*(x_j, s_i).
    pub demand: Vec<Vec<f64>>,
    pub phi_residual: f64,
    pub brackets: Vec<(f64, f64)>,
    pub n_samples: usize,
    pub seed: u64,
}

/// Demand coefficients and surface for a given whitened scale.
///
/// The coefficients `β*(s_i) = ᾱ L⁺ Q e_i` make the noise-weighted Gram of the
/// demand rows equal to `ᾱ² Q`, so the market maker's sufficient statistic has
/// exactly the canonical law.
pub fn equilibrium_demand(
    alpha_eff: f64,
    kernel: &CanonicalKernel,
    family: &PayoffFamily,
) -> Result<(DMatrix<f64>, Vec<Vec<f64>>)> {
    let i = kernel.signals();
    if family.signals() != i {
        return Err(Error::Solver(format!("kernel has {i} signals, family has {}", family.signals())));
    }
    let defect = kernel.whitening_defect();
    if defect > WHITENING_TOL {
        return Err(Error::Solver(format!("square root of the kernel loses rank on centered directions (defect {defect:e})")));
    }
    let beta = kernel.sqrt_pinv() * kernel.centering() * alpha_eff;
    let n = family.row(0).len();
    let demand = (0..i)
        .map(|s| {
            let mut w = alloc::vec![0.0; n];
            for u in 0..i {
                let b = beta[(u, s)];
                for (wj, eta) in w.iter_mut().zip(family.row(u)) {
                    *wj += b * eta;
                }
            }
            w
        })
        .collect();
    Ok((beta, demand))
}

/// Full pipeline: kernel checks, canonical root, physical rescaling, demand.
pub fn solve_equilibrium(
    kernel: &CanonicalKernel,
    family: &PayoffFamily,
    mc: McConfig,
    solver: &SolverConfig,
) -> Result<Equilibrium> {
    let i = kernel.signals();
    if i >= 3 && !kernel.exchangeable() {
        return Err(Error::NotExchangeable { deviation: kernel.exchange_deviation(), signals: i });
    }
    if kernel.c() <= kernel.rank_tol() {
        return Err(Error::DegenerateKernel { c: kernel.c() });
    }
    let sol = solve_canonical(i, mc, solver)?;
    from_solution(&sol, kernel, family)
}

/// Builds the physical equilibrium from an already solved canonical root.
pub fn from_solution(sol: &AlphaSolution, kernel: &CanonicalKernel, family: &PayoffFamily) -> Result<Equilibrium> {
    if sol.signals != kernel.signals() {
        return Err(Error::Solver("solution and kernel disagree on the number of signals".into()));
    }
    let (beta_star, demand) = equilibrium_demand(sol.alpha_eff_star, kernel, family)?;
    Ok(Equilibrium {
        signals: sol.signals,
        alpha_eff_star: sol.alpha_eff_star,
        alpha_star: sol.alpha_eff_star / kernel.c().sqrt(),
        c: kernel.c(),
        theta_star: kernel.centering() * sol.alpha_eff_star,
        beta_star,
        demand,
        phi_residual: sol.phi_residual,
        brackets: sol.brackets.clone(),
        n_samples: sol.n_samples,
        seed: sol.seed,
    })
}

/// Single-asset linear equilibrium: `β = σ_ε/σ_v`, `λ = σ_v/(2σ_ε)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KyleBenchmark {
    pub sigma_v: f64,
    pub sigma_eps: f64,
    pub beta: f64,
    pub lambda: f64,
}

pub fn kyle_single_asset(sigma_v: f64, sigma_eps: f64) -> Result<KyleBenchmark> {
    if !(sigma_v > 0.0 && sigma_eps > 0.0 && sigma_v.is_finite() && sigma_eps.is_finite()) {
        return Err(Error::Solver(format!("Kyle benchmark needs positive inputs, got ({sigma_v}, {sigma_eps})")));
    }
    Ok(KyleBenchmark { sigma_v, sigma_eps, beta: sigma_eps / sigma_v, lambda: sigma_v / (2.0 * sigma_eps) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::posterior_moments;

    #[test]
    fn phi_at_zero() {
        for i in 2..7 {
            let m = posterior_moments(0.0, i, 0, 10_000, 1).unwrap();
            let v = phi(0.0, &m).unwrap();
            assert!((v - (1.0 - 1.0 / i as f64)).abs() < 1e-14);
        }
    }

    #[test]
    fn phi_rejects_mismatched_alpha() {
        let m = posterior_moments(1.0, 2, 0, 10_000, 1).unwrap();
        assert!(phi(1.5, &m).is_err());
    }

    #[test]
    fn kyle_values() {
        let k = kyle_single_asset(1.0, 1.0).unwrap();
        assert_eq!((k.beta, k.lambda), (1.0, 0.5));
        let k = kyle_single_asset(2.0, 1.0).unwrap();
        assert_eq!((k.beta, k.lambda), (0.5, 1.0));
        assert!(kyle_single_asset(0.0, 1.0).is_err());
        assert!(kyle_single_asset(1.0, -2.0).is_err());
    }

    #[test]
    fn binary_identity_kernel_coefficients() {
        let kernel = CanonicalKernel::identity(2).unwrap();
        let grid = crate::market_model::StateGrid::new(-5.0, 5.0, 101).unwrap();
        let fam = crate::market_model::make_payoff_family(
            &crate::market_model::FamilySpec::GaussianMeanShift { means: alloc::vec![1.0, -1.0], sd: 1.0 },
            &grid,
        )
        .unwrap();
        let (beta, _) = equilibrium_demand(1.3, &kernel, &fam).unwrap();
        assert!((beta[(0, 0)] - 0.65).abs() < 1e-14);
        assert!((beta[(1, 0)] + 0.65).abs() < 1e-14);
    }
}
