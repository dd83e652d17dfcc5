use nalgebra::DMatrix;

use super::OperatorError;

const MAX_SWEEPS: usize = 60;

/// Symmetric tridiagonal matrix stored by its diagonal and off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(
            diag.is_empty() && off.is_empty() || off.len() + 1 == diag.len(),
            "off-diagonal must have length n - 1"
        );
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>, OperatorError> {
        let (vals, _) = self.ql_implicit(None)?;
        Ok(vals)
    }

    /// Ascending eigenvalues and the matching orthonormal eigenvectors
    /// (as columns).
    pub fn eigen(&self) -> Result<(Vec<f64>, DMatrix<f64>), OperatorError> {
        let n = self.dim();
        let (vals, vecs) = self.ql_implicit(Some(DMatrix::identity(n, n)))?;
        Ok((vals, vecs.expect("vectors requested")))
    }

    /// Ascending eigenvalues and the first component of each eigenvector,
    /// in `O(n^2)` work.
    pub fn eigen_first_row(&self) -> Result<(Vec<f64>, Vec<f64>), OperatorError> {
        let n = self.dim();
        let mut e1 = DMatrix::zeros(1, n);
        if n > 0 {
            e1[(0, 0)] = 1.0;
        }
        let (vals, row) = self.ql_implicit(Some(e1))?;
        Ok((vals, row.expect("row requested").row(0).iter().copied().collect()))
    }

    /// Solves `(T + sigma I) y = rhs` by Gaussian elimination without
    /// pivoting; intended for positive definite shifts.
    pub fn solve_shifted(&self, sigma: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(rhs.len(), n, "right-hand side length");
        let mut c = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut denom = self.diag[0] + sigma;
        y[0] = rhs[0] / denom;
        for i in 1..n {
            c[i - 1] = self.off[i - 1] / denom;
            denom = self.diag[i] + sigma - self.off[i - 1] * c[i - 1];
            y[i] = (rhs[i] - self.off[i - 1] * y[i - 1]) / denom;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            y[i] -= c[i] * y[i + 1];
        }
        y
    }

    // Implicit-shift QL with Wilkinson-style shifts. The column rotations
    // are accumulated into the rows of `z` when it is given (the identity
    // for full eigenvectors, `e_1^T` for first components only).
    fn ql_implicit(&self, mut z: Option<DMatrix<f64>>) -> Result<(Vec<f64>, Option<DMatrix<f64>>), OperatorError> {
        let n = self.dim();
        let mut d = self.diag.clone();
        let mut e = vec![0.0; n];
        e[..n.saturating_sub(1)].copy_from_slice(&self.off);

        for l in 0..n {
            let mut sweeps = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                sweeps += 1;
                if sweeps > MAX_SWEEPS {
                    return Err(OperatorError::EigenFailure);
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = g.hypot(1.0);
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut deflated = false;
                let mut i = m;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    r = f.hypot(g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        deflated = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    if let Some(z) = z.as_mut() {
                        for k in 0..z.nrows() {
                            let f = z[(k, i + 1)];
                            z[(k, i + 1)] = s * z[(k, i)] + c * f;
                            z[(k, i)] = c * z[(k, i)] - s * f;
                        }
                    }
                }
                if deflated {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        let vals = order.iter().map(|&i| d[i]).collect();
        let vecs = z.map(|z| DMatrix::from_fn(z.nrows(), n, |r, c| z[(r, order[c])]));
        Ok((vals, vecs))
    }
}
