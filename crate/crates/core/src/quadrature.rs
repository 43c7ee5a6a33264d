//! Gaussian quadrature rules and Legendre polynomials.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Nodes and weights of a one-dimensional quadrature rule.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss–Hermite rule for `∫ e^{-t²} f(t) dt` (physicists' weight).
///
/// Nodes are the eigenvalues of the symmetric Jacobi matrix of the Hermite
/// recurrence; weights come from the first eigenvector components.
pub fn gauss_hermite(n: usize) -> Result<Rule> {
    if n == 0 {
        return Err(Error::Posterior("Gauss-Hermite rule needs at least one node".into()));
    }
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // symmetrize to remove eigen-solver asymmetry
    for k in 0..n / 2 {
        let (lo, hi) = (pairs[k], pairs[n - 1 - k]);
        let t = 0.5 * (hi.0 - lo.0);
        let w = 0.5 * (hi.1 + lo.1);
        pairs[k] = (-t, w);
        pairs[n - 1 - k] = (t, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    let (nodes, weights) = pairs.into_iter().unzip();
    Ok(Rule { nodes, weights })
}

/// Expectation `E[f(Y)]` for `Y ~ N(mean, var)` under a Gauss–Hermite rule.
pub fn normal_expectation(rule: &Rule, mean: f64, var: f64, f: impl Fn(f64) -> f64) -> f64 {
    let scale = (2.0 * var.max(0.0)).sqrt();
    let total: f64 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&t, &w)| w * f(mean + scale * t))
        .sum();
    total / PI.sqrt()
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<Rule> {
    if n == 0 {
        return Err(Error::Model("Gauss-Legendre rule needs at least one node".into()));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, z);
            pp = dp;
            let z1 = z;
            z = z1 - p / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    Ok(Rule { nodes, weights })
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]` split into equal panels.
pub fn integrate_panels(rule: &Rule, a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let width = (b - a) / panels as f64;
    let half = 0.5 * width;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * width;
        let panel: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&t, &w)| w * f(mid + half * t))
            .sum();
        total += half * panel;
    }
    total
}

/// Legendre polynomial `P_n(t)` and its derivative.
pub fn legendre_with_derivative(n: usize, t: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = t;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = if (1.0 - t * t).abs() < 1e-300 {
        // endpoint limit
        let nf = n as f64;
        t.powi(n as i32 + 1) * nf * (nf + 1.0) / 2.0
    } else {
        n as f64 * (t * p1 - p0) / (t * t - 1.0)
    };
    (p1, dp)
}
