//! Seed derivation and fixed-draw-count sampling.
//!
//! Every stochastic subsystem (range sensing, odometry, detector, box jitter,
//! packet drops) owns an independent `ChaCha8Rng` whose seed is derived from
//! the master seed with [`derive_seed`]. Adding draws in one subsystem never
//! perturbs another, and per-call draw counts are fixed: Gaussian variates come
//! from a single uniform via the inverse normal CDF instead of rejection
//! sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Subsystem tags mixed into derived seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Sensing,
    Odometry,
    Detector,
    Jitter,
    Drop,
}

impl Stream {
    fn salt(self) -> u64 {
        match self {
            Stream::Sensing => 0x53454e53,
            Stream::Odometry => 0x4f444f4d,
            Stream::Detector => 0x44455443,
            Stream::Jitter => 0x4a495454,
            Stream::Drop => 0x44524f50,
        }
    }
}

/// SplitMix64 finalizer; full-period mixing of a 64-bit state.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Derive an independent stream seed for `stream` in round `round`.
pub fn derive_seed(master: u64, stream: Stream, round: u64) -> u64 {
    splitmix64(splitmix64(master ^ stream.salt()).wrapping_add(round))
}

/// Seeded generator for one subsystem stream.
pub fn stream_rng(master: u64, stream: Stream, round: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, round))
}

/// Standard-normal variate from one uniform draw (inverse CDF).
///
/// Acklam's rational approximation; absolute error < 1.2e-8 over (0, 1),
/// which is far below every noise sigma in the simulator.
pub fn normal_from_uniform(u: f64) -> f64 {
    // Clamp away from 0/1 so the tails stay finite.
    let p = u.clamp(1e-300, 1.0 - 1e-16);

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -((((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0))
    }
}

/// One Gaussian sample with the given sigma; consumes exactly one draw.
pub fn sample_gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    let u: f64 = rng.gen();
    normal_from_uniform(u) * sigma
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_cdf_known_quantiles() {
        assert!(normal_from_uniform(0.5).abs() < 1e-9);
        assert!((normal_from_uniform(0.975) - 1.959964).abs() < 1e-5);
        assert!((normal_from_uniform(0.158655) - (-1.0)).abs() < 1e-4);
        assert!((normal_from_uniform(0.841345) - 1.0).abs() < 1e-4);
        // Deep tail stays finite and ordered.
        assert!(normal_from_uniform(1e-12) < normal_from_uniform(1e-6));
        assert!(normal_from_uniform(0.0).is_finite());
    }

    #[test]
    fn inverse_cdf_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let samples: Vec<f64> = (0..n).map(|_| sample_gaussian(&mut rng, 1.0)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn derived_streams_are_independent_and_stable() {
        let a = derive_seed(42, Stream::Sensing, 0);
        let b = derive_seed(42, Stream::Detector, 0);
        let c = derive_seed(42, Stream::Sensing, 1);
        assert_ne!(a, b);
        assert_ne!(a, c);
        // Stability: same inputs, same seed across runs.
        assert_eq!(a, derive_seed(42, Stream::Sensing, 0));
    }

    #[test]
    fn stream_rng_reproducible() {
        let mut r1 = stream_rng(9, Stream::Odometry, 2);
        let mut r2 = stream_rng(9, Stream::Odometry, 2);
        let v1: [u64; 4] = [r1.gen(), r1.gen(), r1.gen(), r1.gen()];
        let v2: [u64; 4] = [r2.gen(), r2.gen(), r2.gen(), r2.gen()];
        assert_eq!(v1, v2);
    }
}
