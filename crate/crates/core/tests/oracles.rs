//! Independent reference values computed outside the library and frozen here.

use adkyle_core::market_model::{
    make_payoff_family, std_normal_pdf, weighted_inner_product, FamilySpec, NoiseProfile, StateGrid,
};
use adkyle_core::orderflow::{young_integral, Path};
use adkyle_core::posterior::BinaryOracle;
use adkyle_core::quadrature::gauss_hermite;

// ⟨η₁, η₂⟩ and ⟨η₁, η₁⟩ for the ±1 mean-shift pair truncated to [−5, 5],
// composite Simpson on 10⁵ panels with analytic densities.
const GRAM_12: f64 = 0.10378344835704613;
const GRAM_11: f64 = 0.28211265958950815;

// Root of 1 − φ₁(α) − α²φ₂(α) for the binary logit-normal moments.
const BINARY_ROOT: f64 = 1.4142135623730956;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = f(a) + f(b);
    for k in 1..panels {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn fine_simpson_gram_is_frozen() {
    let eta = |m: f64| move |x: f64| std_normal_pdf(x - m);
    let z1 = simpson(eta(1.0), -5.0, 5.0, 100_000);
    let z2 = simpson(eta(-1.0), -5.0, 5.0, 100_000);
    let k12 = simpson(|x| eta(1.0)(x) * eta(-1.0)(x), -5.0, 5.0, 100_000) / (z1 * z2);
    let k11 = simpson(|x| eta(1.0)(x).powi(2), -5.0, 5.0, 100_000) / (z1 * z1);
    assert!((k12 - GRAM_12).abs() < 1e-12, "{k12}");
    assert!((k11 - GRAM_11).abs() < 1e-12, "{k11}");
}

#[test]
fn trapezoid_gram_matches_fine_oracle() {
    let grid = StateGrid::new(-5.0, 5.0, 401).unwrap();
    let noise = NoiseProfile::constant(&grid, 1.0).unwrap();
    let fam = make_payoff_family(&FamilySpec::GaussianMeanShift { means: vec![1.0, -1.0], sd: 1.0 }, &grid).unwrap();
    let k12 = weighted_inner_product(fam.row(0), fam.row(1), &noise, &grid).unwrap();
    let k11 = weighted_inner_product(fam.row(0), fam.row(0), &noise, &grid).unwrap();
    assert!(((k12 - GRAM_12) / GRAM_12).abs() < 1e-6);
    assert!(((k11 - GRAM_11) / GRAM_11).abs() < 1e-6);
}

#[test]
fn binary_root_from_dense_scan() {
    let oracle = BinaryOracle::new(200).unwrap();
    let step = 1e-4;
    let mut crossings = Vec::new();
    let mut prev = oracle.phi(0.0);
    for k in 1..=50_000 {
        let a = k as f64 * step;
        let cur = oracle.phi(a);
        if prev > 0.0 && cur <= 0.0 {
            crossings.push(a);
        }
        prev = cur;
    }
    assert_eq!(crossings.len(), 1, "{crossings:?}");
    let (mut lo, mut hi) = (crossings[0] - step, crossings[0]);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if oracle.phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((0.5 * (lo + hi) - BINARY_ROOT).abs() < 1e-12);
    // a coarser rule agrees, so the root is not a quadrature artifact
    let coarse = BinaryOracle::new(96).unwrap();
    assert!(coarse.phi(BINARY_ROOT - 1e-6) > 0.0 && coarse.phi(BINARY_ROOT + 1e-6) < 0.0);
}

#[test]
fn hermite_weights_sum_to_sqrt_pi() {
    for n in [64, 200, 300] {
        let rule = gauss_hermite(n).unwrap();
        let total: f64 = rule.weights.iter().sum();
        assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-13, "n = {n}: {total}");
    }
}

fn riemann_error(upper: f64, n: usize) -> f64 {
    let grid = StateGrid::new(0.0, upper, n).unwrap();
    let omega = grid.tabulate(f64::sin);
    let increments = omega.windows(2).map(|w| w[1] - w[0]).collect();
    let path = Path::from_increments(increments, 0, None);
    let f = grid.tabulate(f64::cos);
    let exact = 0.5 * upper + 0.25 * (2.0 * upper).sin();
    (young_integral(&f, &path).unwrap() - exact).abs()
}

// Left-point error of Σ cos(x_j)Δsin_j is −(h/2)[cos²]_a^b + O(h²).
#[test]
fn riemann_sum_converges_at_first_order() {
    let ratio = riemann_error(std::f64::consts::FRAC_PI_2, 401) / riemann_error(std::f64::consts::FRAC_PI_2, 801);
    assert!((1.6..=2.4).contains(&ratio), "{ratio}");
}

// On [0, π] the boundary term cancels and the error drops to second order.
#[test]
fn riemann_sum_over_full_period_is_second_order() {
    let pi = std::f64::consts::PI;
    let ratio = riemann_error(pi, 401) / riemann_error(pi, 801);
    assert!((3.2..=4.8).contains(&ratio), "{ratio}");
    assert!(riemann_error(pi, 401) < 2e-5);
}

#[test]
fn unit_drift_integral_telescopes() {
    let grid = StateGrid::new(-1.0, 2.0, 31).unwrap();
    let omega = grid.tabulate(|x| x.exp());
    let path = Path::from_increments(omega.windows(2).map(|w| w[1] - w[0]).collect(), 0, None);
    let ones = vec![1.0; grid.len()];
    let total = young_integral(&ones, &path).unwrap();
    assert!((total - path.cumulative()[grid.len() - 1]).abs() < 1e-14);
}
