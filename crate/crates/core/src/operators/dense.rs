//! Dense symmetric eigendecomposition, used as the ground-truth oracle.

use nalgebra::{DMatrix, SymmetricEigen};

use super::OperatorError;

/// Largest dimension the dense oracle accepts by default.
pub const DEFAULT_ORACLE_CAP: usize = 2000;

/// Full spectrum `A = V diag(values) V^T`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct DenseEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub(super) fn check_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> Result<(), OperatorError> {
    let n = m.nrows();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if worst > rel_tol * scale {
        return Err(OperatorError::NotSymmetric { asymmetry: worst });
    }
    Ok(())
}

fn validate(matrix: &DMatrix<f64>, cap: usize) -> Result<(), OperatorError> {
    if !matrix.is_square() {
        return Err(OperatorError::InvalidArgument("matrix must be square".into()));
    }
    if matrix.nrows() > cap {
        return Err(OperatorError::OracleCapExceeded {
            n: matrix.nrows(),
            cap,
        });
    }
    check_symmetric(matrix, 1e-10)
}

pub fn dense_eigendecomposition(matrix: &DMatrix<f64>) -> Result<DenseEigen, OperatorError> {
    dense_eigendecomposition_capped(matrix, DEFAULT_ORACLE_CAP)
}

pub fn dense_eigendecomposition_capped(
    matrix: &DMatrix<f64>,
    cap: usize,
) -> Result<DenseEigen, OperatorError> {
    validate(matrix, cap)?;
    let n = matrix.nrows();
    let eig = SymmetricEigen::new(matrix.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(DenseEigen { values, vectors })
}

/// Ascending eigenvalues only; skips eigenvector accumulation.
pub fn dense_eigenvalues(matrix: &DMatrix<f64>, cap: usize) -> Result<Vec<f64>, OperatorError> {
    validate(matrix, cap)?;
    let mut vals: Vec<f64> = matrix.clone().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}
