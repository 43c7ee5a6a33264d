//! Small numerical utilities shared by the Monte Carlo modules: compensated
//! accumulation, counter-based random substreams and deterministic
//! block-parallel mapping.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.carry += (self.sum - t) + value;
        } else {
            self.carry += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Sum of a slice with compensation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Running mean / variance accumulator over per-sample scalars.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanVar {
    n: u64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl MeanVar {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum.add(x);
        self.sum_sq.add(x * x);
    }

    pub fn merge(&mut self, other: &MeanVar) {
        self.n += other.n;
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum.value() / self.n as f64
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let m = self.mean();
        ((self.sum_sq.value() - n * m * m) / (n - 1.0)).max(0.0)
    }

    /// Standard error of the mean.
    pub fn std_err(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Domain tags keep the random streams of unrelated consumers disjoint even
/// when they share a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamDomain {
    PosteriorNoise = 0x5041_5354_4552_494f,
    PathNoise = 0x5041_5448_4e4f_4953,
    SignalDraw = 0x5349_474e_414c_5f44,
    Auxiliary = 0x4155_5849_4c49_4152,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based substream: the same `(seed, domain, index)` always yields the
/// same generator, independent of scheduling.
pub fn substream(seed: u64, domain: StreamDomain, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = seed ^ (domain as u64);
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Fill `out` with i.i.d. standard normal draws from `rng`.
pub fn fill_standard_normal(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

/// Map `f` over `0..count`, in parallel when the `std` feature is enabled.
/// The output order always matches the index order, so downstream merges
/// are deterministic.
pub fn map_blocks<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "std")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "std"))]
    {
        (0..count).map(f).collect()
    }
}

/// Numerically stable softmax of `logits` into `out`; returns log-sum-exp.
pub fn softmax_into(logits: &[f64], out: &mut [f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    max + total.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(1e16);
        for _ in 0..1000 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.value(), 1000.0);
    }

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let mut a = [0.0; 8];
        let mut b = [0.0; 8];
        let mut c = [0.0; 8];
        fill_standard_normal(&mut substream(7, StreamDomain::PathNoise, 3), &mut a);
        fill_standard_normal(&mut substream(7, StreamDomain::PathNoise, 3), &mut b);
        fill_standard_normal(&mut substream(7, StreamDomain::PathNoise, 4), &mut c);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn softmax_handles_large_logits() {
        let mut out = [0.0; 3];
        softmax_into(&[1000.0, 1000.0, -1000.0], &mut out);
        assert!((out[0] - 0.5).abs() < 1e-15);
        assert_eq!(out[2], 0.0);
    }

    #[test]
    fn mean_var_matches_direct_formula() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        let mut mv = MeanVar::default();
        xs.iter().for_each(|&x| mv.push(x));
        assert!((mv.mean() - 3.5).abs() < 1e-15);
        assert!((mv.variance() - 7.0).abs() < 1e-12);
    }
}
