use adkyle_core::equilibrium::equilibrium_demand;
use adkyle_core::info_kernel::{CanonicalKernel, KernelOptions};
use adkyle_core::market_model::{make_payoff_family, FamilySpec, NoiseProfile, PayoffFamily, StateGrid};
use adkyle_core::objective::{expected_utility, foc_terms, zero_impact_basis, Market};
use adkyle_core::orderflow::{
    path_normals, path_seed, pathwise_posterior, pi_insider, price_schedule, simulate_order_flow,
    simulate_with_normals, BeliefStatistic, Path, PathMc,
};
use adkyle_core::posterior::sample_posterior;

fn setup(family: FamilySpec, sigma: f64) -> (StateGrid, NoiseProfile, PayoffFamily) {
    let grid = StateGrid::new(-5.0, 5.0, 401).unwrap();
    let noise = NoiseProfile::constant(&grid, sigma).unwrap();
    let fam = make_payoff_family(&family, &grid).unwrap();
    (grid, noise, fam)
}

fn mean_shift() -> FamilySpec {
    FamilySpec::GaussianMeanShift { means: vec![1.0, -1.0], sd: 1.0 }
}

#[test]
fn belief_orthogonal_perturbation_leaves_posterior_unchanged() {
    let (grid, _, fam) = setup(mean_shift(), 1.0);
    let noise = NoiseProfile::new(grid.tabulate(|x| 0.8 + 0.1 * x.sin())).unwrap();
    let stat = BeliefStatistic::new(fam.rows(), &noise, &grid).unwrap();
    let path = simulate_order_flow(fam.row(0), &noise, &grid, 17).unwrap();
    let n = grid.len() - 1;
    // weights b_i(x_j)/σ_j² that define the statistic, orthonormalized
    let precision = noise.precision();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for row in fam.rows() {
        let mut v: Vec<f64> = (0..n).map(|j| row[j] * precision[j]).collect();
        for e in &basis {
            let c: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(e).for_each(|(a, b)| *a -= c * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        basis.push(v.into_iter().map(|a| a / norm).collect());
    }
    let mut delta = path_normals(99, n);
    for e in &basis {
        let c: f64 = delta.iter().zip(e).map(|(a, b)| a * b).sum();
        delta.iter_mut().zip(e).for_each(|(a, b)| *a -= c * b);
    }
    let moved: Vec<f64> = path.increments().iter().zip(&delta).map(|(a, b)| a + 0.5 * b).collect();
    let p0 = stat.posterior(path.increments()).unwrap();
    let p1 = stat.posterior(&moved).unwrap();
    for (a, b) in p0.pi1.iter().zip(&p1.pi1) {
        assert!((a - b).abs() < 1e-10);
    }
    let bumped = Path::from_increments(moved, 0, None);
    assert_ne!(bumped.cumulative(), path.cumulative());
}

#[test]
fn orthogonal_drift_has_no_insider_projection() {
    let (grid, noise, fam) = setup(mean_shift(), 1.0);
    for v in zero_impact_basis(fam.rows(), &noise, &grid).unwrap() {
        let proj = pi_insider(&v, fam.rows(), &noise, &grid).unwrap();
        assert!(proj.iter().all(|p| p.abs() < 1e-10), "{proj:?}");
    }
}

#[test]
fn zero_impact_directions_do_not_move_prices() {
    let (grid, noise, fam) = setup(mean_shift(), 1.0);
    let kernel = CanonicalKernel::build(&fam, &noise, &grid, KernelOptions::default()).unwrap();
    let (_, demand) = equilibrium_demand(1.4, &kernel, &fam).unwrap();
    let basis = zero_impact_basis(&demand, &noise, &grid).unwrap();
    assert!(!basis.is_empty());
    let market = Market::new(&fam, &noise, &grid).unwrap();
    let mc = PathMc::new(2000, 5);
    for (k, v) in basis.iter().enumerate() {
        let r = foc_terms(&demand[0], &demand, 0, v, &format!("z{k}"), market, mc).unwrap();
        assert!(r.impact_term.abs() < 1e-12, "{r:?}");
        // the left-point statistic sees the boundary nodes the trapezoid rule halves:
        // a bias of order (h/2)·|b·v| at the ends, far above the common-noise error
        let ends: f64 = demand.iter().map(|b| (b[0] * v[0]).abs() + (b[grid.len() - 1] * v[grid.len() - 1]).abs()).sum();
        assert!(r.residual.abs() <= grid.step() * ends + 3.0 * r.std_err, "{r:?}");
        // adding the direction to the drift moves each log-likelihood only by the
        // boundary half-weights that separate the two discretizations
        let shifted: Vec<f64> = demand[0].iter().zip(v).map(|(a, b)| a + 3.0 * b).collect();
        let stat = BeliefStatistic::new(&demand, &noise, &grid).unwrap();
        let last = grid.len() - 1;
        let predicted: Vec<f64> = demand.iter().map(|b| 1.5 * grid.step() * (b[0] * v[0] - b[last] * v[last])).collect();
        for p in 0..20 {
            let seed = path_seed(5, p);
            let xi = path_normals(seed, grid.len() - 1);
            let base = simulate_with_normals(&demand[0], &noise, &grid, &xi, seed).unwrap();
            let moved = simulate_with_normals(&shifted, &noise, &grid, &xi, seed).unwrap();
            let (a, b) = (stat.posterior(base.increments()).unwrap(), stat.posterior(moved.increments()).unwrap());
            for ((la, lb), d) in a.log_likelihoods.iter().zip(&b.log_likelihoods).zip(&predicted) {
                assert!((lb - la - d).abs() < 1e-12, "{} vs {d}", lb - la);
            }
        }
    }
}

#[test]
fn strong_drift_and_small_noise_concentrate_the_posterior() {
    let (grid, noise, fam) = setup(mean_shift(), 1.0);
    let quiet = noise.scaled(0.01).unwrap();
    for p in 0..10 {
        let path = simulate_order_flow(fam.row(0), &quiet, &grid, path_seed(3, p)).unwrap();
        let post = pathwise_posterior(&path, fam.rows(), &quiet, &grid).unwrap();
        assert!(post.pi1[0] > 0.99, "{:?}", post.pi1);
    }
}

#[test]
fn concentrated_posterior_prices_at_the_true_density() {
    let (grid, noise, fam) = setup(mean_shift(), 1.0);
    let quiet = noise.scaled(0.01).unwrap();
    let path = simulate_order_flow(fam.row(1), &quiet, &grid, 8).unwrap();
    let post = pathwise_posterior(&path, fam.rows(), &quiet, &grid).unwrap();
    let price = price_schedule(&post, &fam, &grid).unwrap();
    let err = price.iter().zip(fam.row(1)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-12, "{err}");
    assert!((grid.integrate(&price).unwrap() - 1.0).abs() < 1e-8);
}

#[test]
fn pathwise_and_canonical_routes_agree_on_variance_family() {
    let (grid, noise, fam) = setup(FamilySpec::GaussianVariance { mean: 0.0, sds: vec![1.4, 0.7] }, 0.7);
    let kernel = CanonicalKernel::build(&fam, &noise, &grid, KernelOptions::default()).unwrap();
    let alpha = 1.1;
    let (_, demand) = equilibrium_demand(alpha, &kernel, &fam).unwrap();
    let n = grid.len();
    let h = grid.step();
    let mut worst = 0.0f64;
    for p in 0..50 {
        let t = (p % 2) as usize;
        let seed = path_seed(11, p);
        let xi = path_normals(seed, n - 1);
        let path = simulate_with_normals(&demand[t], &noise, &grid, &xi, seed).unwrap();
        let via_path = pathwise_posterior(&path, &demand, &noise, &grid).unwrap().pi1;
        let z: Vec<f64> = demand
            .iter()
            .map(|w| (0..n - 1).map(|j| w[j] * h.sqrt() * xi[j] / noise.sigma()[j]).sum::<f64>() / alpha)
            .collect();
        let q = sample_posterior(alpha, 2, t, &z).unwrap().q;
        worst = via_path.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    // the left-point statistic and the trapezoid kernel differ only in endpoint terms
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn utility_is_antisymmetric_in_the_binary_game() {
    let (grid, noise, fam) = setup(mean_shift(), 1.0);
    let kernel = CanonicalKernel::build(&fam, &noise, &grid, KernelOptions::default()).unwrap();
    let (_, demand) = equilibrium_demand(1.4, &kernel, &fam).unwrap();
    let market = Market::new(&fam, &noise, &grid).unwrap();
    let mc = PathMc::new(4000, 21);
    let (j0, se0) = expected_utility(&demand[0], &demand, 0, market, mc).unwrap();
    let (j1, se1) = expected_utility(&demand[1], &demand, 1, market, mc).unwrap();
    assert!(j0 > 0.0 && j1 > 0.0);
    // mirror-image games: equal value up to Monte Carlo error
    assert!((j0 - j1).abs() <= 3.0 * (se0 * se0 + se1 * se1).sqrt());
}
