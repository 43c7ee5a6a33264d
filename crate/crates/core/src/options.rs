//! Breeden–Litzenberger translation between demand surfaces and option
//! strips, and sign signatures of demand profiles.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{ensure_len, Error, Result};
use crate::market_model::{PayoffFamily, StateGrid};

/// Bond, underlying and strike densities replicating a smooth payoff.
///
/// Put strikes are the nodes `(x̲, K₀]`, call strikes `[K₀, x̄)`; the outer
/// boundary nodes carry no option weight.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionStrip {
    pub k0: f64,
    pub k0_index: usize,
    pub bond: f64,
    pub underlying: f64,
    pub put_strikes: Vec<f64>,
    pub put_density: Vec<f64>,
    pub call_strikes: Vec<f64>,
    pub call_density: Vec<f64>,
    /// Requested reference strike when it had to be moved onto a node.
    pub snapped_from: Option<f64>,
}

/// First derivative by central differences, second-order one-sided at the ends.
pub fn first_derivative(w: &[f64], h: f64) -> Vec<f64> {
    let n = w.len();
    let mut d = vec![0.0; n];
    for j in 1..n - 1 {
        d[j] = (w[j + 1] - w[j - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * h);
    d[n - 1] = (3.0 * w[n - 1] - 4.0 * w[n - 2] + w[n - 3]) / (2.0 * h);
    d
}

/// Second derivative by central differences on interior nodes; zero at the ends.
pub fn second_derivative(w: &[f64], h: f64) -> Vec<f64> {
    let n = w.len();
    let mut d = vec![0.0; n];
    for j in 1..n - 1 {
        d[j] = (w[j + 1] - 2.0 * w[j] + w[j - 1]) / (h * h);
    }
    d
}

pub fn bl_decompose(w: &[f64], k0: f64, grid: &StateGrid) -> Result<OptionStrip> {
    let n = grid.len();
    if n < 5 {
        return Err(Error::Options(format!("grid of {n} nodes is too short for the difference stencil")));
    }
    ensure_len(n, w.len())?;
    if !(k0 > grid.x_min() && k0 < grid.x_max()) {
        return Err(Error::Options(format!("reference strike {k0} is not inside ({}, {})", grid.x_min(), grid.x_max())));
    }
    let k = grid.nearest_index(k0).clamp(1, n - 2);
    let xs = grid.nodes();
    let h = grid.step();
    // rounding noise in a computed mean is not worth reporting
    let snapped_from = ((xs[k] - k0).abs() > 1e-9 * h).then_some(k0);
    let d1 = first_derivative(w, h);
    let d2 = second_derivative(w, h);
    let underlying = d1[k];
    Ok(OptionStrip {
        k0: xs[k],
        k0_index: k,
        bond: w[k] - xs[k] * underlying,
        underlying,
        put_strikes: xs[1..=k].to_vec(),
        put_density: d2[1..=k].to_vec(),
        call_strikes: xs[k..n - 1].to_vec(),
        call_density: d2[k..n - 1].to_vec(),
        snapped_from,
    })
}

/// `bond + underlying·x + ∫ put(K)(K−x)₊ dK + ∫ call(K)(x−K)₊ dK` with
/// trapezoid weights on `[x̲, K₀]` and `[K₀, x̄]`.
pub fn bl_reconstruct(strip: &OptionStrip, grid: &StateGrid) -> Result<Vec<f64>> {
    let n = grid.len();
    let k = strip.k0_index;
    let xs = grid.nodes();
    if k == 0 || k >= n - 1 || xs[k] != strip.k0 || strip.put_density.len() != k || strip.call_density.len() != n - 1 - k {
        return Err(Error::Options("option strip does not match the grid".into()));
    }
    let h = grid.step();
    // put weights for nodes 1..=k, call weights for nodes k..n-1
    let weight = |j: usize, last: usize| if j == last { 0.5 * h } else { h };
    Ok(xs
        .iter()
        .map(|&x| {
            let mut v = strip.bond + strip.underlying * x;
            for (m, (&kk, &g)) in strip.put_strikes.iter().zip(&strip.put_density).enumerate() {
                if kk > x {
                    v += weight(m + 1, k) * g * (kk - x);
                }
            }
            for (m, (&kk, &g)) in strip.call_strikes.iter().zip(&strip.call_density).enumerate() {
                if kk < x {
                    v += weight(k + m, k) * g * (x - kk);
                }
            }
            v
        })
        .collect())
}

/// `∫ x m̄(x) dx` for the prior mixture density.
pub fn prior_mean(family: &PayoffFamily, grid: &StateGrid) -> Result<f64> {
    let m = family.prior_mean_density();
    let xm: Vec<f64> = grid.nodes().iter().zip(&m).map(|(x, d)| x * d).collect();
    grid.integrate(&xm)
}

/// Standard deviation of the prior mixture density.
pub fn prior_sd(family: &PayoffFamily, grid: &StateGrid) -> Result<f64> {
    let mu = prior_mean(family, grid)?;
    let m = family.prior_mean_density();
    let v: Vec<f64> = grid.nodes().iter().zip(&m).map(|(x, d)| (x - mu) * (x - mu) * d).collect();
    Ok(grid.integrate(&v)?.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignatureClass {
    Bullish,
    Bearish,
    LongVol,
    ShortVol,
    RightSkew,
    LeftSkew,
    Flat,
    Unclassified,
}

impl SignatureClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Bullish => "bullish",
            Self::Bearish => "bearish",
            Self::LongVol => "long-vol",
            Self::ShortVol => "short-vol",
            Self::RightSkew => "right-skew",
            Self::LeftSkew => "left-skew",
            Self::Flat => "flat",
            Self::Unclassified => "unclassified",
        }
    }
}

/// Signs of a demand profile at `μ + k·s̄` for `k = −2, −1, 0, 1, 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Signature {
    pub probes: [f64; 5],
    pub values: [f64; 5],
    pub signs: [i8; 5],
    pub class: SignatureClass,
}

/// Relative size below which a probe value counts as zero.
pub const TIE_TOL: f64 = 1e-9;

pub fn demand_signature(w: &[f64], mu: f64, sbar: f64, grid: &StateGrid) -> Result<Signature> {
    ensure_len(grid.len(), w.len())?;
    if !(sbar > 0.0) {
        return Err(Error::Options(format!("probe spread must be positive, got {sbar}")));
    }
    let probes = [mu - 2.0 * sbar, mu - sbar, mu, mu + sbar, mu + 2.0 * sbar];
    if probes[0] < grid.x_min() || probes[4] > grid.x_max() {
        return Err(Error::Options(format!(
            "signature probes [{}, {}] leave the grid [{}, {}]",
            probes[0],
            probes[4],
            grid.x_min(),
            grid.x_max()
        )));
    }
    let scale = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut values = [0.0; 5];
    let mut signs = [0i8; 5];
    for k in 0..5 {
        values[k] = interpolate(w, probes[k], grid);
        signs[k] = if values[k].abs() <= TIE_TOL * scale {
            0
        } else if values[k] > 0.0 {
            1
        } else {
            -1
        };
    }
    Ok(Signature { probes, values, signs, class: classify(signs) })
}

fn interpolate(w: &[f64], x: f64, grid: &StateGrid) -> f64 {
    let h = grid.step();
    let t = (x - grid.x_min()) / h;
    let j = (t.floor() as usize).min(grid.len() - 2);
    let f = t - j as f64;
    w[j] * (1.0 - f) + w[j + 1] * f
}

/// Outer probes decide direction or volatility; inner probes separate vertical
/// spreads (monotone) from ratio spreads (sign reversal inside).
fn classify(s: [i8; 5]) -> SignatureClass {
    let [l2, l1, c, r1, r2] = s;
    match (l2, r2) {
        (0, 0) if s.iter().all(|&v| v == 0) => SignatureClass::Flat,
        (-1, 1) => match (l1, r1) {
            (-1, 1) => SignatureClass::Bullish,
            (1, -1) => SignatureClass::RightSkew,
            _ => SignatureClass::Unclassified,
        },
        (1, -1) => match (l1, r1) {
            (1, -1) => SignatureClass::Bearish,
            (-1, 1) => SignatureClass::LeftSkew,
            _ => SignatureClass::Unclassified,
        },
        (1, 1) if c < 0 => SignatureClass::LongVol,
        (-1, -1) if c > 0 => SignatureClass::ShortVol,
        _ => SignatureClass::Unclassified,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> StateGrid {
        StateGrid::new(-5.0, 5.0, 401).unwrap()
    }

    #[test]
    fn quadratic_strip() {
        let g = grid();
        let w = g.tabulate(|x| x * x);
        let strip = bl_decompose(&w, 0.0, &g).unwrap();
        assert!(strip.bond.abs() < 1e-12 && strip.underlying.abs() < 1e-12);
        assert!(strip.put_density.iter().chain(&strip.call_density).all(|d| (d - 2.0).abs() < 1e-9));
        assert!(strip.snapped_from.is_none());
        let back = bl_reconstruct(&strip, &g).unwrap();
        let err = back.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn affine_strip_is_exact() {
        let g = grid();
        let w = g.tabulate(|x| 0.3 - 1.7 * x);
        let strip = bl_decompose(&w, 0.4, &g).unwrap();
        assert!(strip.put_density.iter().chain(&strip.call_density).all(|d| d.abs() < 1e-9));
        assert!((strip.underlying + 1.7).abs() < 1e-12);
        assert!((strip.bond - 0.3).abs() < 1e-12);
        let back = bl_reconstruct(&strip, &g).unwrap();
        assert!(back.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn off_node_strike_snaps() {
        let g = grid();
        let w = g.tabulate(|x| x.sin());
        let strip = bl_decompose(&w, 0.013, &g).unwrap();
        assert_eq!(strip.snapped_from, Some(0.013));
        assert_eq!(strip.k0, g.nodes()[strip.k0_index]);
        assert!(bl_decompose(&w, 5.0, &g).is_err());
        let short = StateGrid::new(0.0, 1.0, 4).unwrap();
        assert!(bl_decompose(&[0.0; 4], 0.5, &short).is_err());
    }

    #[test]
    fn signature_classes() {
        let g = grid();
        let straddle = g.tabulate(|x| x * x - 1.0);
        assert_eq!(demand_signature(&straddle, 0.0, 1.5, &g).unwrap().class, SignatureClass::LongVol);
        let fly = g.tabulate(|x| 1.0 - x * x);
        assert_eq!(demand_signature(&fly, 0.0, 1.5, &g).unwrap().class, SignatureClass::ShortVol);
        let zero = vec![0.0; g.len()];
        assert_eq!(demand_signature(&zero, 0.0, 1.0, &g).unwrap().class, SignatureClass::Flat);
        let bull = g.tabulate(|x| x.tanh());
        assert_eq!(demand_signature(&bull, 0.0, 1.0, &g).unwrap().class, SignatureClass::Bullish);
        let ratio = g.tabulate(|x| x * (x * x - 2.0));
        assert_eq!(demand_signature(&ratio, 0.0, 1.0, &g).unwrap().class, SignatureClass::RightSkew);
        assert!(demand_signature(&bull, 0.0, 3.0, &g).is_err());
    }
}
