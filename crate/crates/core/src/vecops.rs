//! Small dense-vector kernels shared by the solvers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

#[cfg(test)]
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Deterministic pseudo-random unit vector.
pub fn random_unit_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    loop {
        let mut v = gaussian_vector(n, &mut rng);
        let nv = norm(&v);
        if nv > 0.0 && nv.is_finite() {
            scale(1.0 / nv, &mut v);
            return v;
        }
    }
}

/// Two passes of modified Gram-Schmidt of `w` against the columns in
/// `basis`. Returns the accumulated projection coefficients.
pub fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) -> Vec<f64> {
    let mut coeffs = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (c, u) in coeffs.iter_mut().zip(basis) {
            let h = dot(u, w);
            axpy(-h, u, w);
            *c += h;
        }
    }
    coeffs
}
