//! Smooth test functions with analytic gradients and Hessian-vector products.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{linspace, ProblemError};
use crate::arc::SmoothObjective;
use crate::vecops;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestProblemKind {
    /// `sum_i 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2`.
    ChainedRosenbrock,
    /// `1/4 sum_i (x_i^2 - 1)^2 + 1/2 sum_i (x_i - x_{i+1})^2`.
    TridiagQuartic,
    /// `1/2 sum_i d_i x_i^2` with `d` evenly spaced on `[1, 10]`.
    ConvexQuadratic,
    /// `g^T x + 1/2 x^T D x + 1/3 ||x||^3` with `D` evenly spaced on
    /// `[-1, 1]` and `g = 0.1 / sqrt(n)` in every entry.
    NonconvexQuadraticCubic,
}

impl TestProblemKind {
    pub const ALL: [TestProblemKind; 4] = [
        TestProblemKind::ChainedRosenbrock,
        TestProblemKind::TridiagQuartic,
        TestProblemKind::ConvexQuadratic,
        TestProblemKind::NonconvexQuadraticCubic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestProblemKind::ChainedRosenbrock => "ChainedRosenbrock",
            TestProblemKind::TridiagQuartic => "TridiagQuartic",
            TestProblemKind::ConvexQuadratic => "ConvexQuadratic",
            TestProblemKind::NonconvexQuadraticCubic => "NonconvexQuadraticCubic",
        }
    }
}

impl FromStr for TestProblemKind {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.name().to_lowercase() == key)
            .ok_or_else(|| ProblemError::UnknownProblem(s.to_string()))
    }
}

impl std::fmt::Display for TestProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestProblem {
    pub kind: TestProblemKind,
    n: usize,
    /// Diagonal of the quadratic part (quadratic problems only).
    diag: Vec<f64>,
    /// Linear term (cubic problem only).
    linear: Vec<f64>,
}

pub fn test_problem(kind: TestProblemKind, n: usize) -> Result<TestProblem, ProblemError> {
    if n < 2 {
        return Err(ProblemError::InvalidSpec(format!("test problems need n >= 2, got {n}")));
    }
    let (diag, linear) = match kind {
        TestProblemKind::ConvexQuadratic => (linspace(1.0, 10.0, n), Vec::new()),
        TestProblemKind::NonconvexQuadraticCubic => (linspace(-1.0, 1.0, n), vec![0.1 / (n as f64).sqrt(); n]),
        _ => (Vec::new(), Vec::new()),
    };
    Ok(TestProblem { kind, n, diag, linear })
}

impl TestProblem {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn x0(&self) -> Vec<f64> {
        match self.kind {
            TestProblemKind::ChainedRosenbrock => (1..=self.n).map(|i| i as f64 / (self.n + 1) as f64).collect(),
            TestProblemKind::TridiagQuartic => (0..self.n).map(|i| 0.5 + 0.1 * ((i + 1) as f64).sin()).collect(),
            TestProblemKind::ConvexQuadratic => vec![1.0; self.n],
            TestProblemKind::NonconvexQuadraticCubic => vec![0.0; self.n],
        }
    }

    /// Global minimum value when known in closed form.
    pub fn known_minimum(&self) -> Option<f64> {
        match self.kind {
            TestProblemKind::NonconvexQuadraticCubic => None,
            _ => Some(0.0),
        }
    }
}

impl SmoothObjective for TestProblem {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self.kind {
            TestProblemKind::ChainedRosenbrock => x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum(),
            TestProblemKind::TridiagQuartic => {
                let quartic: f64 = x.iter().map(|v| (v * v - 1.0).powi(2)).sum();
                let coupling: f64 = x.windows(2).map(|w| (w[0] - w[1]).powi(2)).sum();
                0.25 * quartic + 0.5 * coupling
            }
            TestProblemKind::ConvexQuadratic => 0.5 * x.iter().zip(&self.diag).map(|(v, d)| d * v * v).sum::<f64>(),
            TestProblemKind::NonconvexQuadraticCubic => {
                let xn = vecops::norm(x);
                vecops::dot(&self.linear, x)
                    + 0.5 * x.iter().zip(&self.diag).map(|(v, d)| d * v * v).sum::<f64>()
                    + xn * xn * xn / 3.0
            }
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        match self.kind {
            TestProblemKind::ChainedRosenbrock => {
                let mut g = vec![0.0; n];
                for i in 0..n - 1 {
                    let r = x[i + 1] - x[i] * x[i];
                    g[i] += -400.0 * x[i] * r - 2.0 * (1.0 - x[i]);
                    g[i + 1] += 200.0 * r;
                }
                g
            }
            TestProblemKind::TridiagQuartic => {
                let mut g: Vec<f64> = x.iter().map(|v| v * (v * v - 1.0)).collect();
                for i in 0..n - 1 {
                    let d = x[i] - x[i + 1];
                    g[i] += d;
                    g[i + 1] -= d;
                }
                g
            }
            TestProblemKind::ConvexQuadratic => x.iter().zip(&self.diag).map(|(v, d)| d * v).collect(),
            TestProblemKind::NonconvexQuadraticCubic => {
                let xn = vecops::norm(x);
                (0..n).map(|i| self.linear[i] + self.diag[i] * x[i] + xn * x[i]).collect()
            }
        }
    }

    fn hessian_vec(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let n = self.n;
        match self.kind {
            TestProblemKind::ChainedRosenbrock => {
                out.fill(0.0);
                for i in 0..n - 1 {
                    let hii = 1200.0 * x[i] * x[i] - 400.0 * x[i + 1] + 2.0;
                    let hij = -400.0 * x[i];
                    out[i] += hii * v[i] + hij * v[i + 1];
                    out[i + 1] += hij * v[i] + 200.0 * v[i + 1];
                }
            }
            TestProblemKind::TridiagQuartic => {
                for i in 0..n {
                    out[i] = (3.0 * x[i] * x[i] - 1.0) * v[i];
                }
                for i in 0..n - 1 {
                    let d = v[i] - v[i + 1];
                    out[i] += d;
                    out[i + 1] -= d;
                }
            }
            TestProblemKind::ConvexQuadratic => {
                for i in 0..n {
                    out[i] = self.diag[i] * v[i];
                }
            }
            TestProblemKind::NonconvexQuadraticCubic => {
                // D + ||x|| I + x x^T / ||x||
                let xn = vecops::norm(x);
                let proj = if xn > 0.0 { vecops::dot(x, v) / xn } else { 0.0 };
                for i in 0..n {
                    out[i] = (self.diag[i] + xn) * v[i] + proj * x[i];
                }
            }
        }
    }

    fn hessian_trace(&self, x: &[f64]) -> Option<f64> {
        let n = self.n;
        Some(match self.kind {
            TestProblemKind::ChainedRosenbrock => (0..n - 1)
                .map(|i| 1200.0 * x[i] * x[i] - 400.0 * x[i + 1] + 2.0 + 200.0)
                .sum(),
            TestProblemKind::TridiagQuartic => {
                x.iter().map(|v| 3.0 * v * v - 1.0).sum::<f64>() + 2.0 * (n - 1) as f64
            }
            TestProblemKind::ConvexQuadratic => self.diag.iter().sum(),
            TestProblemKind::NonconvexQuadraticCubic => {
                self.diag.iter().sum::<f64>() + (n + 1) as f64 * vecops::norm(x)
            }
        })
    }
}
