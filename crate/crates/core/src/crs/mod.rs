//! The cubic regularization subproblem
//!
//! ```text
//! min_x  f(x) = b^T x + 1/2 x^T A x + rho/3 ||x||^3
//! ```
//!
//! and its solvers: the approximate secular equation method, a dense exact
//! oracle, a Krylov-subspace baseline and gradient descent.

mod asem;
mod diagnostics;
mod exact;
mod gd;
mod krylov;
mod oracle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operators::{OperatorError, SymmetricOperator};
use crate::secular::SecularError;
use crate::vecops;

pub use asem::{solve_asem, solve_asem_doubling, AsemConfig, EigenSource};
pub use diagnostics::{bound_check, BoundCheck};
pub use exact::{solve_exact, solve_exact_with_cap, EXACT_ROOT_TOL};
pub use gd::{solve_gd, GdConfig, GdStep};
pub use krylov::{solve_krylov, KrylovConfig};
pub use oracle::{full_spectrum, FullSpectrum};

/// Optimality certificate tolerances shared by all solvers.
pub const CERT_RESIDUAL_TOL: f64 = 1e-6;
pub const CERT_SIGMA_TOL: f64 = 1e-6;
pub const CERT_CURVATURE_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrsError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Secular(#[from] SecularError),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

impl CrsError {
    pub fn is_hard_case(&self) -> bool {
        matches!(self, CrsError::Secular(SecularError::HardCase { .. }))
    }
}

/// `(A, b, rho)`.
#[derive(Debug)]
pub struct CrsProblem<'a> {
    pub op: SymmetricOperator<'a>,
    pub b: Vec<f64>,
    pub rho: f64,
}

impl<'a> CrsProblem<'a> {
    pub fn new(op: SymmetricOperator<'a>, b: Vec<f64>, rho: f64) -> Result<Self, CrsError> {
        if b.len() != op.dim() {
            return Err(CrsError::InvalidProblem(format!(
                "b has length {} but the operator has dimension {}",
                b.len(),
                op.dim()
            )));
        }
        if op.dim() == 0 {
            return Err(CrsError::InvalidProblem("empty problem".into()));
        }
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(CrsError::InvalidProblem(format!("rho must be positive and finite, got {rho}")));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(CrsError::InvalidProblem("b has non-finite entries".into()));
        }
        Ok(Self { op, b, rho })
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn b_norm(&self) -> f64 {
        vecops::norm(&self.b)
    }

    fn check_len(&self, x: &[f64]) -> Result<(), CrsError> {
        if x.len() != self.dim() {
            return Err(CrsError::Operator(OperatorError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            }));
        }
        Ok(())
    }

    /// `f(x)`; one matvec.
    pub fn objective(&self, x: &[f64]) -> Result<f64, CrsError> {
        self.check_len(x)?;
        let ax = self.op.matvec(x)?;
        Ok(model_value(&self.b, self.rho, x, &ax))
    }

    /// `b + A x + rho ||x|| x`; one matvec.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, CrsError> {
        self.check_len(x)?;
        let ax = self.op.matvec(x)?;
        Ok(gradient_from_ax(&self.b, self.rho, x, &ax))
    }
}

/// `f(x)` given `A x`.
pub fn model_value(b: &[f64], rho: f64, x: &[f64], ax: &[f64]) -> f64 {
    let nx = vecops::norm(x);
    vecops::dot(b, x) + 0.5 * vecops::dot(x, ax) + rho / 3.0 * nx * nx * nx
}

/// `grad f(x)` given `A x`.
pub fn gradient_from_ax(b: &[f64], rho: f64, x: &[f64], ax: &[f64]) -> Vec<f64> {
    let s = rho * vecops::norm(x);
    b.iter()
        .zip(ax)
        .zip(x)
        .map(|((bi, ai), xi)| bi + ai + s * xi)
        .collect()
}

/// Matvec counts by solver phase; the fields sum to the total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatvecBreakdown {
    /// Power iteration for the spectral shift.
    pub shift: u64,
    /// Eigenpair estimation (or oracle materialization).
    pub eigen: u64,
    /// Trace estimation and `b^T A b`.
    pub model: u64,
    /// Iterations of the final linear solve, including its residual check.
    pub cg: u64,
    pub other: u64,
}

impl MatvecBreakdown {
    pub fn total(&self) -> u64 {
        self.shift + self.eigen + self.model + self.cg + self.other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub budget_matvecs: u64,
    pub grad_norm: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveFlags {
    /// The optimality certificate holds (see [`SolveReport::certificate`]).
    pub converged: bool,
    pub eigen_converged: bool,
    pub linear_solve_converged: bool,
    /// `c_1^2` is tiny relative to `||b||^2` though above the hard-case cut.
    pub hard_case_suspected: bool,
    pub trace_estimated: bool,
    pub mu_clamped: bool,
    /// The shift left `A + sigma I` indefinite along some CG direction.
    pub indefinite_shift: bool,
    pub diverged: bool,
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: String,
    pub x: Vec<f64>,
    /// Shift from the root finder (or `rho ||x||` for solvers without one).
    pub sigma: f64,
    pub grad_norm: f64,
    pub objective: f64,
    pub matvecs: u64,
    pub matvec_breakdown: MatvecBreakdown,
    pub inner_iterations: usize,
    pub trajectory: Vec<TrajectoryPoint>,
    pub flags: SolveFlags,
    /// `|sigma - rho ||x|||`.
    pub sigma_consistency_gap: f64,
    /// `||(A + sigma I) x + b||`.
    pub residual_norm: f64,
    /// Estimate of the smallest eigenvalue of `A`, when the solver has one.
    pub lambda1_estimate: Option<f64>,
    pub mu: Option<f64>,
    pub b_norm: f64,
}

impl SolveReport {
    /// Residual, shift-consistency and curvature parts of the optimality
    /// certificate.
    pub fn certificate(&self) -> bool {
        let residual_ok = self.residual_norm <= CERT_RESIDUAL_TOL * self.b_norm;
        let sigma_ok = self.sigma_consistency_gap <= CERT_SIGMA_TOL * self.sigma.max(1.0);
        let curvature_ok = self
            .lambda1_estimate
            .is_none_or(|l| l + self.sigma >= -CERT_CURVATURE_TOL);
        residual_ok && sigma_ok && curvature_ok
    }

    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("budget_matvecs,grad_norm,objective\n");
        for p in &self.trajectory {
            out.push_str(&format!("{},{:e},{:e}\n", p.budget_matvecs, p.grad_norm, p.objective));
        }
        out
    }
}

/// Fields shared by the report builders of the individual solvers.
pub(crate) struct Finish<'s> {
    pub solver: &'s str,
    pub x: Vec<f64>,
    pub ax: &'s [f64],
    pub sigma: f64,
    pub breakdown: MatvecBreakdown,
    pub inner_iterations: usize,
    pub trajectory: Vec<TrajectoryPoint>,
    pub flags: SolveFlags,
    pub lambda1_estimate: Option<f64>,
    pub mu: Option<f64>,
}

impl CrsProblem<'_> {
    pub(crate) fn finish(&self, f: Finish<'_>) -> SolveReport {
        let grad = gradient_from_ax(&self.b, self.rho, &f.x, f.ax);
        let objective = model_value(&self.b, self.rho, &f.x, f.ax);
        let residual: Vec<f64> = f
            .ax
            .iter()
            .zip(&f.x)
            .zip(&self.b)
            .map(|((a, x), b)| a + f.sigma * x + b)
            .collect();
        let xnorm = vecops::norm(&f.x);
        let mut report = SolveReport {
            solver: f.solver.to_string(),
            grad_norm: vecops::norm(&grad),
            objective,
            matvecs: f.breakdown.total(),
            matvec_breakdown: f.breakdown,
            inner_iterations: f.inner_iterations,
            trajectory: f.trajectory,
            flags: f.flags,
            sigma_consistency_gap: (f.sigma - self.rho * xnorm).abs(),
            residual_norm: vecops::norm(&residual),
            lambda1_estimate: f.lambda1_estimate,
            mu: f.mu,
            b_norm: self.b_norm(),
            sigma: f.sigma,
            x: f.x,
        };
        report.flags.converged = report.flags.converged && report.certificate();
        report
    }
}

/// Minimizer of the model along `-b / ||b||`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyPoint {
    pub x: Vec<f64>,
    /// Step length `r` with `x = -r b / ||b||`.
    pub radius: f64,
    pub model_value: f64,
    pub matvecs: u64,
}

/// Closed-form Cauchy point; costs one matvec for `b^T A b`.
pub fn cauchy_point(p: &CrsProblem<'_>) -> Result<CauchyPoint, CrsError> {
    let n = p.dim();
    let bn = p.b_norm();
    if bn == 0.0 {
        return Ok(CauchyPoint {
            x: vec![0.0; n],
            radius: 0.0,
            model_value: 0.0,
            matvecs: 0,
        });
    }
    let ab = p.op.matvec(&p.b)?;
    let q = vecops::dot(&p.b, &ab) / (bn * bn);
    let radius = cauchy_radius(bn, q, p.rho);
    let x = p.b.iter().map(|v| -radius * v / bn).collect();
    Ok(CauchyPoint {
        x,
        radius,
        model_value: cauchy_model_value(bn, q, p.rho, radius),
        matvecs: 1,
    })
}

/// Positive root of `-||b|| + q z + rho z^2`.
pub(crate) fn cauchy_radius(b_norm: f64, q: f64, rho: f64) -> f64 {
    let disc = (q * q + 4.0 * rho * b_norm).sqrt();
    if q >= 0.0 {
        2.0 * b_norm / (q + disc)
    } else {
        (disc - q) / (2.0 * rho)
    }
}

pub(crate) fn cauchy_model_value(b_norm: f64, q: f64, rho: f64, z: f64) -> f64 {
    -z * b_norm + 0.5 * z * z * q + rho / 3.0 * z * z * z
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn objective_and_gradient_examples() {
        let p = CrsProblem::new(SymmetricOperator::diagonal(vec![0.0]), vec![-1.0], 1.0).unwrap();
        assert_eq!(p.objective(&[0.0]).unwrap(), 0.0);
        assert_eq!(p.gradient(&[0.0]).unwrap(), vec![-1.0]);
        assert_relative_eq!(p.objective(&[1.0]).unwrap(), -2.0 / 3.0, max_relative = 1e-15);
        assert_eq!(p.gradient(&[1.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let n = 12;
        let mut rng = vecops::rng(4);
        let d: Vec<f64> = vecops::gaussian_vector(n, &mut rng);
        let b = vecops::gaussian_vector(n, &mut rng);
        let p = CrsProblem::new(SymmetricOperator::diagonal(d), b, 0.7).unwrap();
        let x = vecops::gaussian_vector(n, &mut rng);
        let g = p.gradient(&x).unwrap();
        let h = 1e-6;
        for i in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (p.objective(&xp).unwrap() - p.objective(&xm).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0));
        }
    }

    #[test]
    fn rejects_bad_problems() {
        assert!(CrsProblem::new(SymmetricOperator::diagonal(vec![1.0]), vec![1.0, 2.0], 1.0).is_err());
        assert!(CrsProblem::new(SymmetricOperator::diagonal(vec![1.0]), vec![1.0], 0.0).is_err());
        assert!(CrsProblem::new(SymmetricOperator::diagonal(vec![1.0]), vec![f64::NAN], 1.0).is_err());
    }

    #[test]
    fn cauchy_examples() {
        let p = CrsProblem::new(SymmetricOperator::diagonal(vec![0.0, 0.0]), vec![-1.0, 0.0], 1.0).unwrap();
        let c = cauchy_point(&p).unwrap();
        assert_relative_eq!(c.radius, 1.0, max_relative = 1e-15);
        assert_relative_eq!(c.x[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(c.model_value, -2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(p.objective(&c.x).unwrap(), -2.0 / 3.0, max_relative = 1e-15);

        let p = CrsProblem::new(SymmetricOperator::diagonal(vec![1.0, 1.0]), vec![-1.0, 0.0], 1e-12).unwrap();
        assert!((cauchy_point(&p).unwrap().radius - 1.0).abs() < 1e-10);

        let p = CrsProblem::new(SymmetricOperator::diagonal(vec![1.0]), vec![0.0], 1.0).unwrap();
        let c = cauchy_point(&p).unwrap();
        assert_eq!((c.x[0], c.matvecs), (0.0, 0));
    }

    #[test]
    fn cauchy_radius_is_stationary_for_negative_curvature() {
        for q in [-3.0, -0.5, 0.0, 0.5, 3.0] {
            let z = cauchy_radius(0.7, q, 0.2);
            assert!(z > 0.0);
            assert!((-0.7 + q * z + 0.2 * z * z).abs() < 1e-12);
        }
    }
}
