//! Full eigendecompositions used by the exact solver and oracle-fed ASEM.

use nalgebra::{DMatrix, DVector};

use crate::operators::{dense_eigendecomposition_capped, OperatorError, SymmetricOperator};

#[derive(Debug, Clone)]
enum Basis {
    /// Eigenvector `i` is the unit vector `e_{perm[i]}`.
    Permutation(Vec<usize>),
    Dense(DMatrix<f64>),
}

/// `A = V diag(values) V^T` with ascending values.
#[derive(Debug, Clone)]
pub struct FullSpectrum {
    pub values: Vec<f64>,
    basis: Basis,
}

/// Full spectrum of `op`. Diagonal operators are sorted directly and cost
/// no matvecs; function-backed operators are materialized (n matvecs) and
/// must fit under `cap`.
pub fn full_spectrum(op: &SymmetricOperator<'_>, cap: usize) -> Result<FullSpectrum, OperatorError> {
    if let Some(d) = op.as_diagonal() {
        let mut perm: Vec<usize> = (0..d.len()).collect();
        perm.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        return Ok(FullSpectrum {
            values: perm.iter().map(|&i| d[i]).collect(),
            basis: Basis::Permutation(perm),
        });
    }
    let eig = match op.as_dense() {
        Some(m) => dense_eigendecomposition_capped(m, cap)?,
        None => dense_eigendecomposition_capped(&op.to_dense(cap)?, cap)?,
    };
    Ok(FullSpectrum {
        values: eig.values,
        basis: Basis::Dense(eig.vectors),
    })
}

impl FullSpectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `c_i = -b^T v_i` for every eigenvector.
    pub fn coefficients(&self, b: &[f64]) -> Vec<f64> {
        match &self.basis {
            Basis::Permutation(perm) => perm.iter().map(|&i| -b[i]).collect(),
            Basis::Dense(v) => (v.transpose() * DVector::from_column_slice(b))
                .iter()
                .map(|c| -c)
                .collect(),
        }
    }

    /// `sum_i w_i v_i`.
    pub fn synthesize(&self, weights: &[f64]) -> Vec<f64> {
        match &self.basis {
            Basis::Permutation(perm) => {
                let mut x = vec![0.0; perm.len()];
                for (w, &i) in weights.iter().zip(perm) {
                    x[i] = *w;
                }
                x
            }
            Basis::Dense(v) => (v * DVector::from_column_slice(weights)).as_slice().to_vec(),
        }
    }

    /// Eigenvector `i` as a dense vector.
    pub fn vector(&self, i: usize) -> Vec<f64> {
        match &self.basis {
            Basis::Permutation(perm) => {
                let mut e = vec![0.0; perm.len()];
                e[perm[i]] = 1.0;
                e
            }
            Basis::Dense(v) => v.column(i).as_slice().to_vec(),
        }
    }
}
