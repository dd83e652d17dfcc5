//! Conjugate gradients for the shifted system `(A + sigma I) x = -b`.

use super::{OperatorError, SymmetricOperator};
use crate::vecops;

/// State handed to a monitor after every CG step (and once at `x = 0`).
#[derive(Debug, Clone, Copy)]
pub struct CgIterate<'s> {
    pub iteration: usize,
    pub x: &'s [f64],
    /// Recursively updated `(A + sigma I) x + b`.
    pub residual: &'s [f64],
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    /// `A x`, obtained from the closing true-residual check.
    pub ax: Vec<f64>,
    /// True residual norm `||(A + sigma I) x + b||`.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub matvecs: u64,
}

pub fn solve_shifted_system(
    op: &SymmetricOperator<'_>,
    sigma: f64,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgSolution, OperatorError> {
    solve_shifted_system_monitored(op, sigma, b, tol, max_iter, &mut |_| {})
}

/// CG from `x = 0`, stopping when `||r|| <= tol ||b||`.
///
/// Non-positive curvature along a search direction is reported as
/// [`OperatorError::NotPositiveDefinite`]. Hitting `max_iter` is not an
/// error; the result carries `converged = false`.
pub fn solve_shifted_system_monitored(
    op: &SymmetricOperator<'_>,
    sigma: f64,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    monitor: &mut dyn FnMut(&CgIterate<'_>),
) -> Result<CgSolution, OperatorError> {
    let (solution, curvature) = shifted_cg(op, sigma, b, tol, max_iter, monitor)?;
    match curvature {
        Some(curvature) => Err(OperatorError::NotPositiveDefinite { sigma, curvature }),
        None => Ok(solution),
    }
}

/// CG that stops at a non-positive curvature direction instead of failing,
/// returning the iterate reached so far and the offending curvature.
pub(crate) fn shifted_cg(
    op: &SymmetricOperator<'_>,
    sigma: f64,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    monitor: &mut dyn FnMut(&CgIterate<'_>),
) -> Result<(CgSolution, Option<f64>), OperatorError> {
    let n = op.dim();
    if b.len() != n {
        return Err(OperatorError::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if !sigma.is_finite() || !(tol > 0.0) {
        return Err(OperatorError::InvalidArgument(format!(
            "need finite sigma and positive tolerance, got sigma = {sigma}, tol = {tol}"
        )));
    }
    let start = op.matvec_count();
    let bnorm = vecops::norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        monitor(&CgIterate {
            iteration: 0,
            x: &x,
            residual: b,
        });
        let solution = CgSolution {
            ax: vec![0.0; n],
            x,
            residual_norm: 0.0,
            iterations: 0,
            converged: true,
            matvecs: 0,
        };
        return Ok((solution, None));
    }
    let target = tol * bnorm;
    let mut r = b.to_vec();
    let mut ax = vec![0.0; n];
    let mut iterations = 0;
    let mut restarted = false;
    let mut bad_curvature = None;
    monitor(&CgIterate {
        iteration: 0,
        x: &x,
        residual: &r,
    });

    loop {
        let mut rr = vecops::dot(&r, &r);
        let mut p: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut mp = vec![0.0; n];
        while rr.sqrt() > target && iterations < max_iter && bad_curvature.is_none() {
            op.apply_into(&p, &mut mp);
            vecops::axpy(sigma, &p, &mut mp);
            let curvature = vecops::dot(&p, &mp);
            if !(curvature > 0.0) {
                bad_curvature = Some(curvature);
                break;
            }
            let alpha = rr / curvature;
            vecops::axpy(alpha, &p, &mut x);
            vecops::axpy(alpha, &mp, &mut r);
            iterations += 1;
            monitor(&CgIterate {
                iteration: iterations,
                x: &x,
                residual: &r,
            });
            let rr_new = vecops::dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = -ri + beta * *pi;
            }
        }

        op.apply_into(&x, &mut ax);
        for i in 0..n {
            r[i] = ax[i] + sigma * x[i] + b[i];
        }
        let true_norm = vecops::norm(&r);
        // one restart from the current iterate if the recursion drifted
        if true_norm > 10.0 * target && !restarted && iterations < max_iter && bad_curvature.is_none() {
            restarted = true;
            continue;
        }
        let solution = CgSolution {
            x,
            ax,
            residual_norm: true_norm,
            iterations,
            converged: true_norm <= 10.0 * target && bad_curvature.is_none(),
            matvecs: op.matvec_count() - start,
        };
        return Ok((solution, bad_curvature));
    }
}
