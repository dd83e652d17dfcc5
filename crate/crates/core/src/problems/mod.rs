//! Instance generation: synthetic eigenvalue distributions, condition-number
//! calibrated instances, GOE matrices, rotations of diagonal problems and
//! smooth test functions for the ARC loop.

mod functions;
mod random_matrix;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crs::{CrsError, CrsProblem};
use crate::operators::{OperatorError, SymmetricOperator};
use crate::vecops;

pub use functions::{test_problem, TestProblem, TestProblemKind};
pub use random_matrix::{random_orthogonal, rotate_instance, sample_goe, semicircle_gap_bound};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("{case} spectrum needs n divisible by {divisor}, got n = {n}")]
    Divisibility { case: &'static str, n: usize, divisor: usize },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("infeasible specification: {0}")]
    Infeasible(String),
    #[error("matrix is not orthogonal (max deviation {deviation:e})")]
    NotOrthogonal { deviation: f64 },
    #[error("unknown test problem `{0}`")]
    UnknownProblem(String),
    #[error(transparent)]
    Crs(#[from] CrsError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Eigenvalue layouts on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "case", content = "values")]
pub enum SpectrumCase {
    /// All `n` values evenly spaced on `[-1, 1]`.
    EvenlySpaced,
    /// Half on `[-1, -0.8]`, half on `[0.8, 1]`.
    Separated,
    /// The smallest `n/50` on `[-1, 0.8]`, the rest on `[0.8, 1]`.
    RightCentered,
    /// The smallest `49n/50` on `[-1, 0.8]`, the rest on `[0.8, 1]`.
    LeftCentered,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    #[serde(flatten)]
    pub case: SpectrumCase,
    /// Ignored for explicit spectra.
    #[serde(default)]
    pub n: usize,
}

/// `k` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..k)
            .map(|i| if i == k - 1 { b } else { a + (b - a) * i as f64 / (k - 1) as f64 })
            .collect(),
    }
}

/// Ascending eigenvalues for the given layout. Neighbouring groups share
/// the endpoint `0.8`, so it can appear twice.
pub fn gen_spectrum(spec: &SpectrumSpec) -> Result<Vec<f64>, ProblemError> {
    let n = spec.n;
    let need = |case: &'static str, divisor: usize| {
        if n == 0 || !n.is_multiple_of(divisor) {
            Err(ProblemError::Divisibility { case, n, divisor })
        } else {
            Ok(())
        }
    };
    let values = match &spec.case {
        SpectrumCase::EvenlySpaced => {
            if n < 2 {
                return Err(ProblemError::InvalidSpec(format!("evenly spaced spectrum needs n >= 2, got {n}")));
            }
            linspace(-1.0, 1.0, n)
        }
        SpectrumCase::Separated => {
            need("separated", 2)?;
            let mut v = linspace(-1.0, -0.8, n / 2);
            v.extend(linspace(0.8, 1.0, n / 2));
            v
        }
        SpectrumCase::RightCentered => {
            need("right-centered", 50)?;
            let mut v = linspace(-1.0, 0.8, n / 50);
            v.extend(linspace(0.8, 1.0, n - n / 50));
            v
        }
        SpectrumCase::LeftCentered => {
            need("left-centered", 50)?;
            let mut v = linspace(-1.0, 0.8, 49 * n / 50);
            v.extend(linspace(0.8, 1.0, n / 50));
            v
        }
        SpectrumCase::Explicit(v) => {
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                return Err(ProblemError::InvalidSpec("explicit spectrum must be non-empty and finite".into()));
            }
            let mut v = v.clone();
            v.sort_by(f64::total_cmp);
            v
        }
    };
    Ok(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "values")]
pub enum BDirection {
    AllOnes,
    /// `b` proportional to the eigenvalue vector.
    EigenvalueProportional,
    /// Standard Gaussian direction drawn from the instance seed.
    Random,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum RhoRule {
    Fixed(f64),
    /// Choose `sigma* = (lambda_n - kappa lambda_1) / (kappa - 1)` so that
    /// `(lambda_n + sigma*) / (lambda_1 + sigma*) = kappa`, then
    /// `rho = sigma* / ||(A + sigma* I)^{-1} b||`.
    ConditionNumber(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub spectrum: SpectrumSpec,
    pub b_direction: BDirection,
    pub b_norm: f64,
    pub rho_rule: RhoRule,
    #[serde(default)]
    pub seed: u64,
}

/// A diagonal CRS instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalInstance {
    pub eigenvalues: Vec<f64>,
    pub b: Vec<f64>,
    pub rho: f64,
    /// Exact root when it is known by construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_star: Option<f64>,
}

impl DiagonalInstance {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn problem(&self) -> Result<CrsProblem<'static>, CrsError> {
        CrsProblem::new(SymmetricOperator::diagonal(self.eigenvalues.clone()), self.b.clone(), self.rho)
    }
}

pub fn gen_instance(spec: &InstanceSpec) -> Result<DiagonalInstance, ProblemError> {
    let eigenvalues = gen_spectrum(&spec.spectrum)?;
    let n = eigenvalues.len();
    if !(spec.b_norm >= 0.0) || !spec.b_norm.is_finite() {
        return Err(ProblemError::InvalidSpec(format!("b_norm must be finite and non-negative, got {}", spec.b_norm)));
    }
    let direction = match &spec.b_direction {
        BDirection::AllOnes => vec![1.0; n],
        BDirection::EigenvalueProportional => eigenvalues.clone(),
        BDirection::Random => vecops::gaussian_vector(n, &mut vecops::rng(spec.seed)),
        BDirection::Explicit(v) => {
            if v.len() != n {
                return Err(ProblemError::InvalidSpec(format!(
                    "explicit b has length {} but the spectrum has {n} values",
                    v.len()
                )));
            }
            v.clone()
        }
    };
    let dn = vecops::norm(&direction);
    let b: Vec<f64> = if spec.b_norm == 0.0 {
        vec![0.0; n]
    } else if dn > 0.0 && dn.is_finite() {
        direction.iter().map(|v| v * spec.b_norm / dn).collect()
    } else {
        return Err(ProblemError::InvalidSpec("b direction is zero or non-finite".into()));
    };

    let (rho, sigma_star) = match spec.rho_rule {
        RhoRule::Fixed(rho) => {
            if !(rho > 0.0) || !rho.is_finite() {
                return Err(ProblemError::InvalidSpec(format!("rho must be positive, got {rho}")));
            }
            (rho, None)
        }
        RhoRule::ConditionNumber(kappa) => {
            if !(kappa > 1.0) || !kappa.is_finite() {
                return Err(ProblemError::InvalidSpec(format!("kappa must exceed 1, got {kappa}")));
            }
            let l1 = eigenvalues[0];
            let ln = eigenvalues[n - 1];
            let sigma = (ln - kappa * l1) / (kappa - 1.0);
            if !(l1 + sigma > 0.0) || !(sigma > 0.0) {
                return Err(ProblemError::Infeasible(format!(
                    "kappa = {kappa} gives sigma* = {sigma}, which does not exceed max(-lambda_1, 0)"
                )));
            }
            let xnorm = b
                .iter()
                .zip(&eigenvalues)
                .map(|(bi, l)| (bi / (l + sigma)).powi(2))
                .sum::<f64>()
                .sqrt();
            if xnorm == 0.0 {
                return Err(ProblemError::Infeasible("the condition-number rule needs b != 0".into()));
            }
            (sigma / xnorm, Some(sigma))
        }
    };
    Ok(DiagonalInstance {
        eigenvalues,
        b,
        rho,
        sigma_star,
    })
}

/// On-disk instance format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InstanceFile {
    Diagonal { eigenvalues: Vec<f64>, b: Vec<f64>, rho: f64 },
    Dense { matrix: Vec<Vec<f64>>, b: Vec<f64>, rho: f64 },
}

impl From<&DiagonalInstance> for InstanceFile {
    fn from(d: &DiagonalInstance) -> Self {
        InstanceFile::Diagonal {
            eigenvalues: d.eigenvalues.clone(),
            b: d.b.clone(),
            rho: d.rho,
        }
    }
}

impl InstanceFile {
    pub fn from_dense(matrix: &DMatrix<f64>, b: Vec<f64>, rho: f64) -> Self {
        let rows = matrix.row_iter().map(|r| r.iter().copied().collect()).collect();
        InstanceFile::Dense { matrix: rows, b, rho }
    }

    pub fn dim(&self) -> usize {
        match self {
            InstanceFile::Diagonal { eigenvalues, .. } => eigenvalues.len(),
            InstanceFile::Dense { matrix, .. } => matrix.len(),
        }
    }

    pub fn problem(&self) -> Result<CrsProblem<'static>, ProblemError> {
        match self {
            InstanceFile::Diagonal { eigenvalues, b, rho } => Ok(CrsProblem::new(
                SymmetricOperator::diagonal(eigenvalues.clone()),
                b.clone(),
                *rho,
            )?),
            InstanceFile::Dense { matrix, b, rho } => {
                let n = matrix.len();
                if matrix.iter().any(|r| r.len() != n) {
                    return Err(ProblemError::InvalidSpec("dense matrix must be square".into()));
                }
                let m = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
                Ok(CrsProblem::new(SymmetricOperator::dense(m)?, b.clone(), *rho)?)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(case: SpectrumCase, n: usize) -> SpectrumSpec {
        SpectrumSpec { case, n }
    }

    #[test]
    fn spectrum_examples() {
        assert_eq!(gen_spectrum(&spec(SpectrumCase::EvenlySpaced, 3)).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(gen_spectrum(&spec(SpectrumCase::Separated, 4)).unwrap(), vec![-1.0, -0.8, 0.8, 1.0]);
        let v = gen_spectrum(&spec(SpectrumCase::RightCentered, 100)).unwrap();
        assert_eq!(v.len(), 100);
        assert_eq!((v[0], v[1]), (-1.0, 0.8));
        assert!(v[2..].iter().all(|x| (0.8..=1.0).contains(x)));
        assert_eq!((v[2], v[99]), (0.8, 1.0));
        let v = gen_spectrum(&spec(SpectrumCase::LeftCentered, 100)).unwrap();
        assert_eq!((v[0], v[97], v[98], v[99]), (-1.0, 0.8, 0.8, 1.0));
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn divisibility_is_checked() {
        assert!(matches!(
            gen_spectrum(&spec(SpectrumCase::Separated, 5)),
            Err(ProblemError::Divisibility { divisor: 2, .. })
        ));
        assert!(gen_spectrum(&spec(SpectrumCase::RightCentered, 120)).is_err());
        assert!(gen_spectrum(&spec(SpectrumCase::EvenlySpaced, 1)).is_err());
    }

    #[test]
    fn exp1_instance() {
        let inst = gen_instance(&InstanceSpec {
            spectrum: spec(SpectrumCase::EvenlySpaced, 5000),
            b_direction: BDirection::AllOnes,
            b_norm: 0.1,
            rho_rule: RhoRule::Fixed(0.1),
            seed: 0,
        })
        .unwrap();
        assert_eq!(inst.n(), 5000);
        assert_relative_eq!(vecops::norm(&inst.b), 0.1, max_relative = 1e-12);
    }

    #[test]
    fn condition_number_rule() {
        let inst = gen_instance(&InstanceSpec {
            spectrum: spec(SpectrumCase::EvenlySpaced, 5000),
            b_direction: BDirection::AllOnes,
            b_norm: 0.1,
            rho_rule: RhoRule::ConditionNumber(1e3),
            seed: 0,
        })
        .unwrap();
        let s = inst.sigma_star.unwrap();
        assert_relative_eq!(s, 1001.0 / 999.0, max_relative = 1e-14);
        assert_relative_eq!((1.0 + s) / (-1.0 + s), 1e3, max_relative = 1e-10);
        // the exact solver recovers the constructed root
        let r = crate::crs::solve_exact(&inst.problem().unwrap()).unwrap();
        assert_relative_eq!(r.sigma, s, max_relative = 1e-10);

        let bad = InstanceSpec {
            spectrum: spec(SpectrumCase::Explicit(vec![1.0, 2.0]), 0),
            b_direction: BDirection::AllOnes,
            b_norm: 1.0,
            rho_rule: RhoRule::ConditionNumber(10.0),
            seed: 0,
        };
        assert!(matches!(gen_instance(&bad), Err(ProblemError::Infeasible(_))));
    }

    #[test]
    fn proportional_and_random_directions() {
        let mk = |d: BDirection, seed| {
            gen_instance(&InstanceSpec {
                spectrum: spec(SpectrumCase::EvenlySpaced, 11),
                b_direction: d,
                b_norm: 0.1,
                rho_rule: RhoRule::Fixed(1.0),
                seed,
            })
            .unwrap()
        };
        let p = mk(BDirection::EigenvalueProportional, 0);
        assert_relative_eq!(vecops::norm(&p.b), 0.1, max_relative = 1e-14);
        assert_relative_eq!(p.b[0] / p.eigenvalues[0], p.b[10] / p.eigenvalues[10], max_relative = 1e-14);
        assert_eq!(mk(BDirection::Random, 3), mk(BDirection::Random, 3));
        assert_ne!(mk(BDirection::Random, 3), mk(BDirection::Random, 4));
    }

    #[test]
    fn instance_file_round_trip() {
        let file = InstanceFile::Diagonal {
            eigenvalues: vec![-1.0, 2.0],
            b: vec![0.5, 0.5],
            rho: 0.3,
        };
        let text = serde_json::to_string(&file).unwrap();
        assert!(text.contains("\"kind\":\"diagonal\""));
        assert_eq!(serde_json::from_str::<InstanceFile>(&text).unwrap(), file);
        let dense: InstanceFile =
            serde_json::from_str(r#"{"kind":"dense","matrix":[[0,1],[1,0]],"b":[1,0],"rho":1}"#).unwrap();
        let p = dense.problem().unwrap();
        assert_eq!(p.op.matvec(&[1.0, 0.0]).unwrap(), vec![0.0, 1.0]);
        let spec: SpectrumSpec = serde_json::from_str(r#"{"case":"explicit","values":[3,1,2]}"#).unwrap();
        assert_eq!(gen_spectrum(&spec).unwrap(), vec![1.0, 2.0, 3.0]);
    }
}
