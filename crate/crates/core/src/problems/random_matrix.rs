//! GOE sampling, the semicircle gap constant and orthogonal rotations of
//! diagonal instances.

use nalgebra::{DMatrix, DVector};

use super::ProblemError;
use crate::crs::CrsProblem;
use crate::operators::SymmetricOperator;
use crate::vecops;

/// Largest entry of `|V^T V - I|` accepted by [`rotate_instance`].
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// `(W + W^T) / 2` with standard Gaussian `W`, scaled by `1 / sqrt(2n)` so
/// that the spectrum fills `[-1, 1]` as `n` grows.
pub fn sample_goe(n: usize, seed: u64) -> Result<DMatrix<f64>, ProblemError> {
    if n < 2 {
        return Err(ProblemError::InvalidSpec(format!("GOE sample needs n >= 2, got {n}")));
    }
    let mut rng = vecops::rng(seed);
    let w = DMatrix::from_vec(n, n, vecops::gaussian_vector(n * n, &mut rng));
    let scale = 1.0 / (2.0 * n as f64).sqrt();
    Ok(DMatrix::from_fn(n, n, |i, j| 0.5 * (w[(i, j)] + w[(j, i)]) * scale))
}

/// `(3 pi / (4 sqrt 2))^{2/3} (1 - (m + 1) / n)^{2/3}`: the semicircle
/// prediction for `max_{i > m} |lambda_i - mu_1|` of a scaled GOE matrix.
pub fn semicircle_gap_bound(n: usize, m: usize) -> Result<f64, ProblemError> {
    if n == 0 || m + 1 > n {
        return Err(ProblemError::InvalidSpec(format!("need m + 1 <= n, got m = {m}, n = {n}")));
    }
    let c = 3.0 * std::f64::consts::PI / (4.0 * std::f64::consts::SQRT_2);
    let tail = 1.0 - (m + 1) as f64 / n as f64;
    Ok(c.powf(2.0 / 3.0) * tail.max(0.0).powf(2.0 / 3.0))
}

/// Product of `n` Householder reflectors built from seeded Gaussian vectors.
pub fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = vecops::rng(seed);
    let mut q = DMatrix::<f64>::identity(n, n);
    for _ in 0..n {
        let v = DVector::from_vec(vecops::gaussian_vector(n, &mut rng));
        let vv = v.norm_squared();
        if vv == 0.0 {
            continue;
        }
        let qv = &q * &v;
        q.ger(-2.0 / vv, &qv, &v, 1.0);
    }
    q
}

/// Maps a diagonal problem `(diag(lambda), b, rho)` to the dense problem
/// `(V diag(lambda) V^T, V b, rho)`. If `y` solves the former then `V y`
/// solves the latter.
pub fn rotate_instance(diag: &CrsProblem<'_>, v: &DMatrix<f64>) -> Result<CrsProblem<'static>, ProblemError> {
    let lambda = diag
        .op
        .as_diagonal()
        .ok_or_else(|| ProblemError::InvalidSpec("rotate_instance needs a diagonal problem".into()))?;
    let n = lambda.len();
    if v.nrows() != n || v.ncols() != n {
        return Err(ProblemError::InvalidSpec(format!(
            "rotation is {}x{} but the problem has dimension {n}",
            v.nrows(),
            v.ncols()
        )));
    }
    let deviation = (v.transpose() * v - DMatrix::<f64>::identity(n, n)).amax();
    if !(deviation <= ORTHOGONALITY_TOL) {
        return Err(ProblemError::NotOrthogonal { deviation });
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| v[(i, j)] * lambda[j]);
    let mut a = scaled * v.transpose();
    // exact symmetry for the operator check
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = s;
            a[(j, i)] = s;
        }
    }
    let b = v * DVector::from_column_slice(&diag.b);
    Ok(CrsProblem::new(SymmetricOperator::dense(a)?, b.as_slice().to_vec(), diag.rho)?)
}
