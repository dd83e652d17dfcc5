//! Lanczos tridiagonalization and the shifted partial eigensolver.
//!
//! The m algebraically smallest eigenpairs of `A` are the m largest of
//! `B = beta I - A` once `beta >= ||A||`, and the largest eigenpairs are the
//! ones a Krylov space picks up first. All basis vectors are fully
//! reorthogonalized; the optional thick restart keeps the best Ritz vectors
//! and continues from the Lanczos residual direction.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{spectral_upper_bound, OperatorError, SymTridiagonal, SymmetricOperator};
use crate::vecops;

/// Relative size of `beta_j` below which the recurrence is treated as an
/// invariant subspace.
const BREAKDOWN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenConfig {
    /// Krylov dimension per cycle; `None` means `max(2m, 20)`.
    pub krylov_dim: Option<usize>,
    /// Thick restarts allowed after the first cycle.
    pub restarts: usize,
    pub seed: u64,
    /// Power-iteration steps used to pick the shift.
    pub power_iters: usize,
    /// Ritz residual tolerance, relative to the shift.
    pub tol: f64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            krylov_dim: None,
            restarts: 0,
            seed: 0,
            power_iters: 20,
            tol: 1e-8,
        }
    }
}

impl EigenConfig {
    pub fn krylov_dim_for(&self, m: usize) -> usize {
        self.krylov_dim.unwrap_or_else(|| (2 * m).max(20))
    }
}

/// `B U = U T + beta_k u_{k+1} e_k^T` with `U` orthonormal.
#[derive(Debug, Clone)]
pub struct TridiagonalFactor {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Columns `u_1 .. u_k`.
    pub basis: Vec<Vec<f64>>,
    pub residual_beta: f64,
    /// `u_{k+1}`; absent after a breakdown.
    pub next: Option<Vec<f64>>,
}

impl TridiagonalFactor {
    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn tridiagonal(&self) -> SymTridiagonal {
        SymTridiagonal::new(self.alpha.clone(), self.beta.clone())
    }

    pub fn ritz_values(&self) -> Result<Vec<f64>, OperatorError> {
        self.tridiagonal().eigenvalues()
    }
}

/// Estimates of the m smallest eigenpairs of `A`.
#[derive(Debug, Clone)]
pub struct PartialSpectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub beta_shift: f64,
    /// Lanczos residual estimates `||A v - lambda v||`.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub krylov_dim: usize,
    pub restarts_used: usize,
}

impl PartialSpectrum {
    pub fn m(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Wraps externally known (for instance exact) eigenpairs.
    pub fn from_exact(eigenvalues: Vec<f64>, eigenvectors: Vec<Vec<f64>>) -> Self {
        let m = eigenvalues.len();
        Self {
            eigenvalues,
            eigenvectors,
            beta_shift: 0.0,
            residuals: vec![0.0; m],
            converged: true,
            krylov_dim: 0,
            restarts_used: 0,
        }
    }
}

struct Expansion {
    basis: Vec<Vec<f64>>,
    h: DMatrix<f64>,
    residual_beta: f64,
    next: Option<Vec<f64>>,
    tridiagonal: bool,
}

/// Grows an orthonormal Krylov basis up to `k` columns.
///
/// `kept` holds locked Ritz pairs `(theta_i, y_i)` from a previous cycle and
/// `couplings[i] = y_i^T B start`. When the recurrence breaks down before
/// `min_dim` columns exist, a fresh random direction is appended with zero
/// coupling.
#[allow(clippy::too_many_arguments)]
fn expand(
    apply: &mut dyn FnMut(&[f64], &mut [f64]),
    n: usize,
    kept: Vec<(f64, Vec<f64>)>,
    start: Vec<f64>,
    couplings: &[f64],
    k: usize,
    min_dim: usize,
    refill_seed: u64,
) -> Expansion {
    let l = kept.len();
    let mut h = DMatrix::zeros(k, k);
    let mut basis = Vec::with_capacity(k + 1);
    let mut scale: f64 = 0.0;
    for (i, (theta, y)) in kept.into_iter().enumerate() {
        h[(i, i)] = theta;
        scale = scale.max(theta.abs());
        basis.push(y);
    }
    for (i, c) in couplings.iter().enumerate() {
        h[(i, l)] = *c;
        h[(l, i)] = *c;
    }

    let mut v = start;
    let mut w = vec![0.0; n];
    let mut prev_beta = 0.0;
    let mut residual_beta = 0.0;
    let mut next = None;
    let mut dim = l;
    let mut refills = 0u64;
    for j in l..k {
        basis.push(v);
        dim = j + 1;
        apply(&basis[j], &mut w);
        let coeffs = vecops::orthogonalize(&basis, &mut w);
        h[(j, j)] = coeffs[j];
        let beta = vecops::norm(&w);
        scale = scale.max(coeffs[j].abs() + prev_beta + beta);
        if j + 1 == k {
            residual_beta = beta;
            if beta > 0.0 {
                vecops::scale(1.0 / beta, &mut w);
                next = Some(w);
            }
            break;
        }
        if beta <= BREAKDOWN_TOL * scale {
            if dim >= min_dim {
                break;
            }
            refills += 1;
            let mut fresh = vecops::random_unit_vector(n, refill_seed.wrapping_add(refills));
            vecops::orthogonalize(&basis, &mut fresh);
            let nf = vecops::norm(&fresh);
            if nf <= 1e-8 {
                break;
            }
            vecops::scale(1.0 / nf, &mut fresh);
            v = fresh;
            prev_beta = 0.0;
            continue;
        }
        h[(j + 1, j)] = beta;
        h[(j, j + 1)] = beta;
        prev_beta = beta;
        v = w.iter().map(|x| x / beta).collect();
    }
    Expansion {
        h: h.view((0, 0), (dim, dim)).into_owned(),
        basis,
        residual_beta,
        next,
        tridiagonal: l == 0,
    }
}

/// Plain Lanczos on `op` itself, stopping early at a lucky breakdown.
pub fn lanczos_tridiagonalize(
    op: &SymmetricOperator<'_>,
    u1: &[f64],
    k: usize,
) -> Result<TridiagonalFactor, OperatorError> {
    let n = op.dim();
    if u1.len() != n {
        return Err(OperatorError::DimensionMismatch {
            expected: n,
            got: u1.len(),
        });
    }
    if k == 0 || k > n {
        return Err(OperatorError::InvalidArgument(format!(
            "Krylov dimension must lie in 1..={n}, got {k}"
        )));
    }
    if (vecops::norm(u1) - 1.0).abs() > 1e-10 {
        return Err(OperatorError::InvalidArgument("starting vector must have unit norm".into()));
    }
    let mut apply = |x: &[f64], y: &mut [f64]| op.apply_into(x, y);
    let exp = expand(&mut apply, n, Vec::new(), u1.to_vec(), &[], k, 0, 0);
    let dim = exp.basis.len();
    Ok(TridiagonalFactor {
        alpha: (0..dim).map(|i| exp.h[(i, i)]).collect(),
        beta: (1..dim).map(|i| exp.h[(i, i - 1)]).collect(),
        basis: exp.basis,
        residual_beta: exp.residual_beta,
        next: exp.next,
    })
}

/// The m algebraically smallest eigenpairs of `A`, via Ritz pairs of
/// `beta I - A`. Requires `m < n`.
pub fn smallest_eigenpairs(
    op: &SymmetricOperator<'_>,
    m: usize,
    cfg: &EigenConfig,
) -> Result<PartialSpectrum, OperatorError> {
    if m >= op.dim() {
        return Err(OperatorError::InvalidArgument(format!(
            "requested {m} eigenpairs of a {}-dimensional operator; need m < n",
            op.dim()
        )));
    }
    let beta = spectral_upper_bound(op, cfg.power_iters.max(1), shift_seed(cfg.seed))?;
    smallest_eigenpairs_shifted(op, m, cfg, beta)
}

pub(crate) fn shift_seed(seed: u64) -> u64 {
    seed ^ 0x05ee_d0f5_b1f7
}

/// Core of [`smallest_eigenpairs`] with the shift supplied by the caller;
/// also accepts `m == n`.
pub(crate) fn smallest_eigenpairs_shifted(
    op: &SymmetricOperator<'_>,
    m: usize,
    cfg: &EigenConfig,
    beta: f64,
) -> Result<PartialSpectrum, OperatorError> {
    let n = op.dim();
    if m == 0 || m > n {
        return Err(OperatorError::InvalidArgument(format!(
            "eigenpair count must lie in 1..={n}, got {m}"
        )));
    }
    let k = cfg.krylov_dim_for(m).clamp(m, n);
    let mut apply = |x: &[f64], y: &mut [f64]| {
        op.apply_into(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = beta * xi - *yi;
        }
    };

    let mut kept: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut couplings: Vec<f64> = Vec::new();
    let mut start = vecops::random_unit_vector(n, cfg.seed);
    let mut cycle = 0;
    loop {
        let exp = expand(
            &mut apply,
            n,
            std::mem::take(&mut kept),
            start,
            &couplings,
            k,
            m,
            cfg.seed.wrapping_mul(31).wrapping_add(cycle as u64),
        );
        let dim = exp.basis.len();
        let (theta, s) = if exp.tridiagonal {
            let t = SymTridiagonal::new(
                (0..dim).map(|i| exp.h[(i, i)]).collect(),
                (1..dim).map(|i| exp.h[(i, i - 1)]).collect(),
            );
            t.eigen()?
        } else {
            let eig = SymmetricEigen::new(exp.h.clone());
            let mut order: Vec<usize> = (0..dim).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect::<Vec<_>>();
            let vecs = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
            (vals, vecs)
        };
        // wanted: the largest Ritz values of B, best first
        let wanted: Vec<usize> = (0..dim).rev().take(m).collect();
        let residual = |idx: usize| (exp.residual_beta * s[(dim - 1, idx)]).abs();
        let converged =
            wanted.len() == m && wanted.iter().all(|&i| residual(i) <= cfg.tol * beta);
        let ritz_vector = |idx: usize| {
            let mut z = vec![0.0; n];
            for (j, u) in exp.basis.iter().enumerate() {
                vecops::axpy(s[(j, idx)], u, &mut z);
            }
            let nz = vecops::norm(&z);
            vecops::scale(1.0 / nz, &mut z);
            z
        };

        let finished = converged || cycle >= cfg.restarts || exp.next.is_none();
        if finished {
            return Ok(PartialSpectrum {
                eigenvalues: wanted.iter().map(|&i| beta - theta[i]).collect(),
                eigenvectors: wanted.iter().map(|&i| ritz_vector(i)).collect(),
                beta_shift: beta,
                residuals: wanted.iter().map(|&i| residual(i)).collect(),
                converged,
                krylov_dim: k,
                restarts_used: cycle,
            });
        }

        let keep = (m + (k - m) / 2).min(k - 1).min(dim);
        let keep_idx: Vec<usize> = (0..dim).rev().take(keep).collect();
        couplings = keep_idx
            .iter()
            .map(|&i| exp.residual_beta * s[(dim - 1, i)])
            .collect();
        kept = keep_idx.iter().map(|&i| (theta[i], ritz_vector(i))).collect();
        start = exp.next.expect("checked above");
        cycle += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = vecops::rng(seed);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        (&g + g.transpose()) * 0.5
    }

    fn assert_orthonormal(vs: &[Vec<f64>], tol: f64) {
        for (i, a) in vs.iter().enumerate() {
            for (j, b) in vs.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((vecops::dot(a, b) - target).abs() <= tol);
            }
        }
    }

    #[test]
    fn diagonal_with_unit_start_breaks_down_immediately() {
        let op = SymmetricOperator::diagonal(vec![4.0, 1.0, 2.0]);
        let f = lanczos_tridiagonalize(&op, &[1.0, 0.0, 0.0], 3).unwrap();
        assert_eq!(f.k(), 1);
        assert_eq!(f.alpha, vec![4.0]);
        assert_eq!(f.residual_beta, 0.0);
        assert!(f.next.is_none());
    }

    #[test]
    fn tridiagonal_input_is_reproduced() {
        let n = 8;
        let diag: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| 0.5 + 0.1 * i as f64).collect();
        let t = SymTridiagonal::new(diag.clone(), off.clone());
        let op = SymmetricOperator::dense(t.to_dense()).unwrap();
        let mut e1 = vec![0.0; n];
        e1[0] = 1.0;
        let f = lanczos_tridiagonalize(&op, &e1, n).unwrap();
        for i in 0..n {
            assert!((f.alpha[i] - diag[i]).abs() < 1e-13);
        }
        for i in 0..n - 1 {
            assert!((f.beta[i] - off[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn lanczos_relation_and_orthogonality() {
        let n = 60;
        let a = random_symmetric(n, 2);
        let op = SymmetricOperator::dense(a.clone()).unwrap();
        let u1 = vecops::random_unit_vector(n, 3);
        let f = lanczos_tridiagonalize(&op, &u1, 25).unwrap();
        assert_eq!(f.k(), 25);
        assert_orthonormal(&f.basis, 1e-10);
        let t = f.tridiagonal().to_dense();
        let u = DMatrix::from_fn(n, 25, |r, c| f.basis[c][r]);
        let mut resid = &a * &u - &u * &t;
        let next = f.next.clone().unwrap();
        for r in 0..n {
            resid[(r, 24)] -= f.residual_beta * next[r];
        }
        assert!(resid.norm() <= 1e-10 * t.norm());
    }

    #[test]
    fn extremal_ritz_values_match_dense_oracle() {
        let n = 100;
        let a = random_symmetric(n, 7);
        let exact = crate::operators::dense_eigenvalues(&a, 2000).unwrap();
        let op = SymmetricOperator::dense(a).unwrap();
        let u1 = vecops::random_unit_vector(n, 1);
        let f = lanczos_tridiagonalize(&op, &u1, 30).unwrap();
        let ritz = f.ritz_values().unwrap();
        // extremal eigenvalues of a random symmetric matrix are well separated
        let spread = exact[n - 1] - exact[0];
        assert!((ritz[0] - exact[0]).abs() < 1e-6 * spread.max(1.0) * 10.0, "{} vs {}", ritz[0], exact[0]);
        assert!((ritz[29] - exact[n - 1]).abs() < 1e-5);
    }

    #[test]
    fn evenly_spaced_grid_smallest_three() {
        let n = 100;
        let d: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
        let op = SymmetricOperator::diagonal(d);
        let cfg = EigenConfig {
            restarts: 30,
            ..EigenConfig::default()
        };
        assert_eq!(cfg.krylov_dim_for(3), 20);
        let spec = smallest_eigenpairs(&op, 3, &cfg).unwrap();
        assert!(spec.converged);
        let expect = [-1.0, -1.0 + 2.0 / 99.0, -1.0 + 4.0 / 99.0];
        for (got, want) in spec.eigenvalues.iter().zip(expect) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        assert_orthonormal(&spec.eigenvectors, 1e-8);
    }

    #[test]
    fn nearly_full_spectrum_matches_oracle() {
        let n = 50;
        let a = random_symmetric(n, 13);
        let exact = crate::operators::dense_eigenvalues(&a, 2000).unwrap();
        let op = SymmetricOperator::dense(a.clone()).unwrap();
        let cfg = EigenConfig {
            krylov_dim: Some(n),
            ..EigenConfig::default()
        };
        let spec = smallest_eigenpairs(&op, n - 1, &cfg).unwrap();
        for (got, want) in spec.eigenvalues.iter().zip(&exact) {
            assert!((got - want).abs() < 1e-8);
        }
        for (lam, v) in spec.eigenvalues.iter().zip(&spec.eigenvectors) {
            let av = op.matvec(v).unwrap();
            let r: f64 = av.iter().zip(v).map(|(x, y)| (x - lam * y).powi(2)).sum::<f64>().sqrt();
            assert!(r < 1e-8);
        }
        assert!(smallest_eigenpairs(&op, n, &cfg).is_err());
    }

    #[test]
    fn restart_improves_convergence() {
        let n = 400;
        let d: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let op = SymmetricOperator::diagonal(d.clone());
        let plain = smallest_eigenpairs(&op, 4, &EigenConfig::default()).unwrap();
        let restarted = smallest_eigenpairs(
            &op,
            4,
            &EigenConfig {
                restarts: 100,
                ..EigenConfig::default()
            },
        )
        .unwrap();
        assert!(restarted.converged);
        assert!(restarted.restarts_used > 0);
        let err = |s: &PartialSpectrum| (s.eigenvalues[3] - d[3]).abs();
        assert!(err(&restarted) <= err(&plain));
        assert!(err(&restarted) < 1e-9);
    }
}
