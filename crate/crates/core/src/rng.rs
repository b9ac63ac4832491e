//! Seeded randomness.
//!
//! Every stochastic routine in the crate draws from [`SeededRng`], a ChaCha8
//! stream keyed by a `u64`. ChaCha output is specified bit-for-bit, so a seed
//! reproduces the same draws on every platform.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::matrix::{dot, Matrix};

#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream, so that adding draws to one consumer does not
    /// shift the draws seen by another.
    pub fn fork(&mut self, stream: u64) -> SeededRng {
        let base: u64 = self.inner.random();
        SeededRng::new(base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn normal(&mut self, mean: f64, std_dev: f64) -> f64 {
        mean + std_dev * self.standard_normal()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random()
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn int_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        self.inner.random_range(lo..=hi)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}

/// Matrix of i.i.d. `N(mean, variance)` draws, filled in row-major order.
pub fn gaussian_matrix(
    rng: &mut SeededRng,
    rows: usize,
    cols: usize,
    mean: f64,
    variance: f64,
) -> Result<Matrix> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return invalid(format!("variance must be finite and >= 0, got {variance}"));
    }
    if !mean.is_finite() {
        return invalid("mean must be finite");
    }
    let sd = variance.sqrt();
    Ok(Matrix::from_fn(rows, cols, |_, _| rng.normal(mean, sd)))
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix by modified
/// Gram-Schmidt (two passes), with the sign of each column fixed by the
/// corresponding R diagonal.
pub fn random_orthogonal(rng: &mut SeededRng, n: usize) -> Matrix {
    let g = Matrix::from_fn(n, n, |_, _| rng.standard_normal());
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = g.column(j);
        let original_norm = dot(&v, &v).sqrt();
        for _ in 0..2 {
            for qk in &q {
                let p = dot(qk, &v);
                for (vi, qi) in v.iter_mut().zip(qk) {
                    *vi -= p * qi;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        debug_assert!(norm > 1e-10 * original_norm);
        for vi in &mut v {
            *vi /= norm;
        }
        q.push(v);
    }
    Matrix::from_fn(n, n, |i, j| q[j][i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let a = gaussian_matrix(&mut SeededRng::new(11), 5, 7, 0.0, 1.0).unwrap();
        let b = gaussian_matrix(&mut SeededRng::new(11), 5, 7, 0.0, 1.0).unwrap();
        assert_eq!(a, b);
        let c = gaussian_matrix(&mut SeededRng::new(12), 5, 7, 0.0, 1.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_variance_is_constant() {
        let m = gaussian_matrix(&mut SeededRng::new(0), 4, 4, 2.5, 0.0).unwrap();
        assert!(m.as_slice().iter().all(|&x| x == 2.5));
    }

    #[test]
    fn negative_variance_rejected() {
        assert!(gaussian_matrix(&mut SeededRng::new(0), 2, 2, 0.0, -1.0).is_err());
    }

    #[test]
    fn large_draw_matches_moments() {
        let variance = 1e-5;
        let m = gaussian_matrix(&mut SeededRng::new(2024), 1000, 1000, 0.0, variance).unwrap();
        let n = 1e6;
        let mean = m.sum() / n;
        let var = m.as_slice().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // 3 sigma for the sample mean is 3 * sqrt(var / n) ~ 9.5e-6.
        assert!(mean.abs() < 3.0 * (variance / n).sqrt(), "mean {mean}");
        assert!((0.9e-5..=1.1e-5).contains(&var), "variance {var}");
    }

    #[test]
    fn orthogonal_matrix_is_orthogonal() {
        let q = random_orthogonal(&mut SeededRng::new(3), 6);
        let qtq = q.t_matmul(&q);
        assert!(qtq.max_abs_diff(&Matrix::identity(6)) < 1e-13);
    }
}
