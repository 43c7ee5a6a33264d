//! Information-intensity kernel: the Gram matrix of payoff densities under the
//! noise-weighted inner product, its centering projection, square root and
//! pseudo-inverse, and the exchangeability scale `c` with `QKQ = c·Q`.

use alloc::format;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::market_model::{weighted_inner_product, NoiseProfile, PayoffFamily, StateGrid};

pub const DEFAULT_RANK_TOL: f64 = 1e-10;
pub const DEFAULT_EXCHANGE_TOL: f64 = 1e-6;

/// `K[i][j] = ⟨η(·, s_i), η(·, s_j)⟩_σ`.
pub fn gram_matrix(family: &PayoffFamily, noise: &NoiseProfile, grid: &StateGrid) -> Result<DMatrix<f64>> {
    let i = family.signals();
    let mut k = DMatrix::zeros(i, i);
    for a in 0..i {
        for b in a..i {
            let v = weighted_inner_product(family.row(a), family.row(b), noise, grid)?;
            k[(a, b)] = v;
            k[(b, a)] = v;
        }
    }
    Ok(k)
}

/// `Q = I − (1/I) ē ēᵀ`.
pub fn centering_matrix(signals: usize) -> Result<DMatrix<f64>> {
    if signals < 2 {
        return Err(Error::Kernel(format!("centering needs at least 2 signals, got {signals}")));
    }
    let inv = 1.0 / signals as f64;
    Ok(DMatrix::from_fn(signals, signals, |a, b| if a == b { 1.0 - inv } else { -inv }))
}

/// Scale `c = tr(QKQ)/tr(Q)` and whether `QKQ = c·Q` holds to `tol`
/// (relative Frobenius deviation). Returns the deviation as the third value.
pub fn exchangeability_scale(k: &DMatrix<f64>, q: &DMatrix<f64>, rank_tol: f64, tol: f64) -> Result<(f64, bool, f64)> {
    let m = q * k * q;
    let c = m.trace() / q.trace();
    let reference = (k.trace() / k.nrows() as f64).abs();
    if !(c > rank_tol * reference) || !c.is_finite() {
        return Err(Error::DegenerateKernel { c });
    }
    let deviation = (&m - q * c).norm() / (c * q.norm());
    Ok((c, deviation < tol, deviation))
}

fn check_symmetric(k: &DMatrix<f64>) -> Result<()> {
    if !k.is_square() {
        return Err(Error::Kernel("Gram matrix must be square".into()));
    }
    let scale = k.amax().max(1.0);
    let asym = (k - k.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::Kernel(format!("Gram matrix is not symmetric (max asymmetry {asym:e})")));
    }
    Ok(())
}

/// Positive square root `L` of `K` and its Moore–Penrose pseudo-inverse.
/// Eigenvalues at or below `rank_tol · λ_max` are treated as zero.
pub fn sqrt_and_pinv(k: &DMatrix<f64>, rank_tol: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_symmetric(k)?;
    let sym = (k + k.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lambda_max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if let Some(&low) = eig.eigenvalues.iter().find(|&&l| l < -1e-10 * lambda_max.max(f64::MIN_POSITIVE)) {
        return Err(Error::Kernel(format!("Gram matrix is not positive semidefinite (eigenvalue {low:e})")));
    }
    let cutoff = rank_tol * lambda_max;
    let root = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()));
    let inv_root = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| if l > cutoff && l > 0.0 { 1.0 / l.sqrt() } else { 0.0 }),
    );
    let u = &eig.eigenvectors;
    let l = u * DMatrix::from_diagonal(&root) * u.transpose();
    let l_pinv = u * DMatrix::from_diagonal(&inv_root) * u.transpose();
    Ok(((&l + l.transpose()) * 0.5, (&l_pinv + l_pinv.transpose()) * 0.5))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOptions {
    pub rank_tol: f64,
    pub exchange_tol: f64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { rank_tol: DEFAULT_RANK_TOL, exchange_tol: DEFAULT_EXCHANGE_TOL }
    }
}

/// Everything needed to map the physical game onto the whitened canonical game.
#[derive(Debug, Clone)]
pub struct CanonicalKernel {
    gram: DMatrix<f64>,
    centering: DMatrix<f64>,
    c: f64,
    sqrt: DMatrix<f64>,
    sqrt_pinv: DMatrix<f64>,
    exchangeable: bool,
    exchange_deviation: f64,
    rank_tol: f64,
}

impl CanonicalKernel {
    pub fn build(family: &PayoffFamily, noise: &NoiseProfile, grid: &StateGrid, options: KernelOptions) -> Result<Self> {
        Self::from_gram(gram_matrix(family, noise, grid)?, options)
    }

    pub fn from_gram(gram: DMatrix<f64>, options: KernelOptions) -> Result<Self> {
        check_symmetric(&gram)?;
        let centering = centering_matrix(gram.nrows())?;
        let (sqrt, sqrt_pinv) = sqrt_and_pinv(&gram, options.rank_tol)?;
        let (c, exchangeable, exchange_deviation) =
            exchangeability_scale(&gram, &centering, options.rank_tol, options.exchange_tol)?;
        Ok(Self { gram, centering, c, sqrt, sqrt_pinv, exchangeable, exchange_deviation, rank_tol: options.rank_tol })
    }

    /// The already-whitened kernel `K = I` with `c = 1`.
    pub fn identity(signals: usize) -> Result<Self> {
        Self::from_gram(DMatrix::identity(signals, signals), KernelOptions::default())
    }

    pub fn signals(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn centering(&self) -> &DMatrix<f64> {
        &self.centering
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn sqrt(&self) -> &DMatrix<f64> {
        &self.sqrt
    }

    pub fn sqrt_pinv(&self) -> &DMatrix<f64> {
        &self.sqrt_pinv
    }

    /// `QKQ = c·Q` within tolerance.
    pub fn exchangeable(&self) -> bool {
        self.exchangeable
    }

    pub fn exchange_deviation(&self) -> f64 {
        self.exchange_deviation
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// Relative deviation of `K ē` from the `ē` direction. Zero means the
    /// kernel commutes with `Q`, which is what makes the symmetric ansatz an
    /// exact best response in the original (unwhitened) game.
    pub fn mean_misalignment(&self) -> f64 {
        let i = self.signals();
        let ones = DVector::from_element(i, 1.0);
        let ke = &self.gram * &ones;
        let along = ke.sum() / i as f64;
        let residual = &ke - &ones * along;
        residual.norm() / ke.norm().max(f64::MIN_POSITIVE)
    }

    /// `‖Q L⁺ K L⁺ Q − Q‖_max`: how far the whitened image of the centered
    /// directions is from an isometry. Nonzero when `L` loses rank on `range(Q)`.
    pub fn whitening_defect(&self) -> f64 {
        let q = &self.centering;
        let w = q * &self.sqrt_pinv * &self.gram * &self.sqrt_pinv * q;
        (w - q).amax()
    }
}
