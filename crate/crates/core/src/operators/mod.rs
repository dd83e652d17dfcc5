//! Matrix-free symmetric linear algebra.
//!
//! Everything downstream sees the Hessian only through
//! [`SymmetricOperator::apply_into`]. Each application bumps an atomic
//! counter so the solvers can report (and be compared on) their exact
//! matrix-vector product budget.

mod cg;
mod dense;
mod lanczos;
mod tridiagonal;

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DMatrix;
use rand::Rng;
use thiserror::Error;

use crate::vecops;

pub use cg::{solve_shifted_system, solve_shifted_system_monitored, CgIterate, CgSolution};
pub use dense::{
    dense_eigendecomposition, dense_eigendecomposition_capped, dense_eigenvalues, DenseEigen,
    DEFAULT_ORACLE_CAP,
};
pub use lanczos::{
    lanczos_tridiagonalize, smallest_eigenpairs, EigenConfig, PartialSpectrum, TridiagonalFactor,
};
pub(crate) use cg::shifted_cg;
pub(crate) use lanczos::{shift_seed, smallest_eigenpairs_shifted};
pub use tridiagonal::SymTridiagonal;

/// Safety factor applied to the power-iteration norm estimate.
pub const SHIFT_SAFETY_FACTOR: f64 = 1.1;
/// Absolute floor added to the shift so a zero operator still gets `beta > 0`.
pub const SHIFT_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("dimension mismatch: operator has dimension {expected}, got vector of length {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("dimension {n} exceeds the dense oracle cap {cap}")]
    OracleCapExceeded { n: usize, cap: usize },
    #[error(
        "non-positive curvature p'(A + sigma I)p = {curvature:e} at sigma = {sigma}; \
         sigma does not exceed -lambda_1"
    )]
    NotPositiveDefinite { sigma: f64, curvature: f64 },
    #[error("tridiagonal eigensolver failed to converge")]
    EigenFailure,
}

/// Boxed matrix-free action `y <- A x`.
pub type MatvecFn<'a> = Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync + 'a>;

enum Action<'a> {
    Diagonal(Vec<f64>),
    Dense(DMatrix<f64>),
    Function(MatvecFn<'a>),
}

/// A symmetric linear map known only through its action on vectors.
pub struct SymmetricOperator<'a> {
    dim: usize,
    action: Action<'a>,
    trace_hint: Option<f64>,
    matvecs: AtomicU64,
}

impl std::fmt::Debug for SymmetricOperator<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.action {
            Action::Diagonal(_) => "diagonal",
            Action::Dense(_) => "dense",
            Action::Function(_) => "function",
        };
        f.debug_struct("SymmetricOperator")
            .field("dim", &self.dim)
            .field("kind", &kind)
            .field("trace_hint", &self.trace_hint)
            .field("matvecs", &self.matvec_count())
            .finish()
    }
}

impl<'a> SymmetricOperator<'a> {
    pub fn diagonal(entries: Vec<f64>) -> Self {
        let trace = entries.iter().sum();
        Self {
            dim: entries.len(),
            action: Action::Diagonal(entries),
            trace_hint: Some(trace),
            matvecs: AtomicU64::new(0),
        }
    }

    /// Wraps a dense matrix; rejects matrices that are not symmetric to
    /// `1e-10` relative to their largest entry.
    pub fn dense(matrix: DMatrix<f64>) -> Result<Self, OperatorError> {
        if !matrix.is_square() {
            return Err(OperatorError::InvalidArgument(format!(
                "dense operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        dense::check_symmetric(&matrix, 1e-10)?;
        Ok(Self {
            dim: matrix.nrows(),
            trace_hint: Some(matrix.trace()),
            action: Action::Dense(matrix),
            matvecs: AtomicU64::new(0),
        })
    }

    pub fn from_fn<F>(dim: usize, apply: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'a,
    {
        Self {
            dim,
            action: Action::Function(Box::new(apply)),
            trace_hint: None,
            matvecs: AtomicU64::new(0),
        }
    }

    pub fn with_trace(mut self, trace: f64) -> Self {
        self.trace_hint = Some(trace);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trace_hint(&self) -> Option<f64> {
        self.trace_hint
    }

    pub fn matvec_count(&self) -> u64 {
        self.matvecs.load(Ordering::Relaxed)
    }

    pub fn reset_matvec_count(&self) {
        self.matvecs.store(0, Ordering::Relaxed);
    }

    pub fn as_diagonal(&self) -> Option<&[f64]> {
        match &self.action {
            Action::Diagonal(d) => Some(d),
            _ => None,
        }
    }

    pub fn as_dense(&self) -> Option<&DMatrix<f64>> {
        match &self.action {
            Action::Dense(m) => Some(m),
            _ => None,
        }
    }

    /// `y <- A x`. Lengths are only checked in debug builds; use
    /// [`SymmetricOperator::matvec`] for a checked call.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        self.matvecs.fetch_add(1, Ordering::Relaxed);
        match &self.action {
            Action::Diagonal(d) => {
                for ((yi, di), xi) in y.iter_mut().zip(d).zip(x) {
                    *yi = di * xi;
                }
            }
            Action::Dense(m) => {
                y.fill(0.0);
                for (j, xj) in x.iter().enumerate() {
                    if *xj != 0.0 {
                        vecops::axpy(*xj, m.column(j).as_slice(), y);
                    }
                }
            }
            Action::Function(f) => f(x, y),
        }
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, OperatorError> {
        if v.len() != self.dim {
            return Err(OperatorError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        let mut y = vec![0.0; self.dim];
        self.apply_into(v, &mut y);
        Ok(y)
    }

    /// Dense copy of the operator. Function-backed operators are
    /// materialized column by column, which costs `n` counted matvecs.
    pub fn to_dense(&self, cap: usize) -> Result<DMatrix<f64>, OperatorError> {
        if self.dim > cap {
            return Err(OperatorError::OracleCapExceeded { n: self.dim, cap });
        }
        Ok(match &self.action {
            Action::Diagonal(d) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
            Action::Dense(m) => m.clone(),
            Action::Function(_) => {
                let n = self.dim;
                let mut out = DMatrix::zeros(n, n);
                let mut e = vec![0.0; n];
                let mut col = vec![0.0; n];
                for j in 0..n {
                    e[j] = 1.0;
                    self.apply_into(&e, &mut col);
                    e[j] = 0.0;
                    out.column_mut(j).copy_from_slice(&col);
                }
                // symmetrize away roundoff from the user's closure
                let t = out.transpose();
                (out + t) * 0.5
            }
        })
    }
}

/// Power-iteration estimate `beta >= ||A||_2` used as the spectral shift.
///
/// The estimate is the largest `||A v||` seen over `iters` normalized
/// iterates, inflated by [`SHIFT_SAFETY_FACTOR`] plus [`SHIFT_FLOOR`].
pub fn spectral_upper_bound(
    op: &SymmetricOperator<'_>,
    iters: usize,
    seed: u64,
) -> Result<f64, OperatorError> {
    if iters == 0 {
        return Err(OperatorError::InvalidArgument(
            "power iteration needs at least one step".into(),
        ));
    }
    let n = op.dim();
    let mut v = vecops::random_unit_vector(n, seed);
    let mut w = vec![0.0; n];
    let mut best: f64 = 0.0;
    for _ in 0..iters {
        op.apply_into(&v, &mut w);
        let nw = vecops::norm(&w);
        best = best.max(nw);
        if nw == 0.0 || !nw.is_finite() {
            break;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
    }
    Ok(SHIFT_SAFETY_FACTOR * best + SHIFT_FLOOR)
}

/// Hutchinson trace estimate with Rademacher probes; costs `probes` matvecs.
pub fn hutchinson_trace(op: &SymmetricOperator<'_>, probes: usize, seed: u64) -> f64 {
    let n = op.dim();
    if probes == 0 {
        return 0.0;
    }
    let mut rng = vecops::rng(seed);
    let mut z = vec![0.0; n];
    let mut az = vec![0.0; n];
    let mut acc = 0.0;
    for _ in 0..probes {
        for zi in z.iter_mut() {
            *zi = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        op.apply_into(&z, &mut az);
        acc += vecops::dot(&z, &az);
    }
    acc / probes as f64
}
