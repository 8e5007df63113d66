//! Monte Carlo bookkeeping: seed substreams, deterministic pairwise
//! reduction, and the (mean, stderr, n) result container.
//!
//! Every ensemble maps sample index `j` to the substream seed
//! `substream_seed(master, tag, j)`; per-sample work is pure, so the indexed
//! collection followed by a sequential pairwise reduction is bit-reproducible
//! for a fixed master seed regardless of the rayon worker count.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derive the seed for sample `index` of the ensemble named `tag`.
/// Distinct tags give disjoint substreams under one master seed.
pub fn substream_seed(master: u64, tag: &str, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ fnv1a(tag.as_bytes())).wrapping_add(index))
}

/// Sum with a fixed pairwise (tree) association order, independent of how the
/// values were produced.
pub fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    if values.len() <= 16 {
        let mut acc = Complex64::new(0.0, 0.0);
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_sum_real(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum_real(&values[..mid]) + pairwise_sum_real(&values[mid..])
}

/// Evaluate `f(j, seed_j)` for `j = 0..n` in parallel, preserving index order.
pub fn par_map_seeded<T, F>(master: u64, tag: &str, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|j| f(j, substream_seed(master, tag, j as u64)))
        .collect()
}

/// Complex Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnsembleEstimate {
    pub mean: Complex64,
    /// Sample standard deviation of the samples divided by sqrt(n).
    pub stderr: f64,
    pub n_samples: usize,
}

impl EnsembleEstimate {
    pub fn from_samples(samples: &[Complex64]) -> Self {
        assert!(samples.len() >= 2, "need at least two samples");
        let n = samples.len();
        let mean = pairwise_sum(samples) / n as f64;
        let sq: Vec<f64> = samples.iter().map(|z| (z - mean).norm_sqr()).collect();
        let var = pairwise_sum_real(&sq) / (n as f64 - 1.0);
        EnsembleEstimate {
            mean,
            stderr: (var / n as f64).sqrt(),
            n_samples: n,
        }
    }

    /// Exact (zero-variance) value, e.g. a deterministic solve.
    pub fn exact(value: Complex64, n: usize) -> Self {
        EnsembleEstimate { mean: value, stderr: 0.0, n_samples: n }
    }

    /// Sample standard deviation recovered from the stored standard error.
    pub fn sample_std(&self) -> f64 {
        self.stderr * (self.n_samples as f64).sqrt()
    }

    /// Variance blow-up flag: sample spread exceeding ten times the mean
    /// modulus signals an exponential-moment failure; callers report it
    /// rather than silently accepting the estimate.
    pub fn variance_blowup(&self) -> bool {
        self.sample_std() > 10.0 * self.mean.norm()
    }

    /// |self - other| in units of the combined standard error.
    pub fn sigma_distance(&self, other: &EnsembleEstimate) -> f64 {
        let combined = (self.stderr.powi(2) + other.stderr.powi(2)).sqrt();
        (self.mean - other.mean).norm() / combined.max(1e-300)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn substreams_are_deterministic_and_distinct() {
        let a = substream_seed(42, "fk", 7);
        assert_eq!(a, substream_seed(42, "fk", 7));
        assert_ne!(a, substream_seed(42, "fk", 8));
        assert_ne!(a, substream_seed(42, "pde", 7));
        assert_ne!(a, substream_seed(43, "fk", 7));
    }

    #[test]
    fn pairwise_matches_naive_on_benign_data() {
        let xs: Vec<Complex64> = (0..1000)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64).cos()))
            .collect();
        let naive: Complex64 = xs.iter().sum();
        let tree = pairwise_sum(&xs);
        assert!((naive - tree).norm() < 1e-10);
    }

    #[test]
    fn estimate_statistics() {
        let samples: Vec<Complex64> =
            (0..4).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let est = EnsembleEstimate::from_samples(&samples);
        assert_relative_eq!(est.mean.re, 1.5);
        // sample variance of {0,1,2,3} = 5/3
        assert_relative_eq!(est.stderr, (5.0 / 3.0_f64 / 4.0).sqrt(), max_relative = 1e-14);
        assert_eq!(est.n_samples, 4);
        assert!(!est.variance_blowup());
    }

    #[test]
    fn par_map_order_is_stable() {
        let a = par_map_seeded(9, "t", 257, |j, s| (j, s));
        let b = par_map_seeded(9, "t", 257, |j, s| (j, s));
        assert_eq!(a, b);
        for (j, (idx, _)) in a.iter().enumerate() {
            assert_eq!(j, *idx);
        }
    }
}
