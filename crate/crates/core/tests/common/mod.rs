//! Randomized checks shared by the property and acceptance targets. Each
//! check recomputes its reference values directly from the diagonal data
//! rather than through the library's own solvers.
#![allow(dead_code)]

use asem::operators::{lanczos_tridiagonalize, smallest_eigenpairs, solve_shifted_system, EigenConfig, SymmetricOperator};
use asem::secular::{find_root, solution_gap_bound, ModelOrder, RootConfig, SecularModel};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const TRIALS: u32 = 1000;

/// A small diagonal instance with a non-negligible `c_1`.
#[derive(Debug, Clone)]
pub struct DiagCase {
    /// Ascending.
    pub eigs: Vec<f64>,
    pub b: Vec<f64>,
    pub rho: f64,
}

impl DiagCase {
    pub fn n(&self) -> usize {
        self.eigs.len()
    }

    pub fn b_norm(&self) -> f64 {
        self.b.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn coeffs_sq(&self) -> Vec<f64> {
        self.b.iter().map(|v| v * v).collect()
    }

    pub fn exact_model(&self) -> SecularModel {
        SecularModel::exact(self.eigs.clone(), self.coeffs_sq(), self.rho, self.b_norm()).unwrap()
    }

    /// Truncated model on the first `m` eigenvalues with a surrogate
    /// computed here: `mu_1` for the first order, `mu_2` (so `T = 0`) for
    /// the second; both clamped at `lambda_m`.
    pub fn truncated(&self, m: usize, order: ModelOrder) -> SecularModel {
        let c2 = self.coeffs_sq();
        let lm = self.eigs[m - 1];
        let hidden_mass: f64 = c2[m..].iter().sum();
        let mu = match order {
            ModelOrder::SecondOrder if hidden_mass > 0.0 => {
                self.eigs[m..].iter().zip(&c2[m..]).map(|(l, c)| l * c).sum::<f64>() / hidden_mass
            }
            _ => self.eigs[m..].iter().sum::<f64>() / (self.n() - m) as f64,
        }
        .max(lm);
        let known = self.eigs[..m].to_vec();
        let kc = c2[..m].to_vec();
        match order {
            ModelOrder::SecondOrder => {
                let moment: f64 = self.eigs[m..].iter().zip(&c2[m..]).map(|(l, c)| l * c).sum();
                let t = moment - mu * hidden_mass;
                SecularModel::second_order(known, kc, self.b_norm(), mu, t, self.rho).unwrap()
            }
            _ => SecularModel::first_order(known, kc, self.b_norm(), mu, self.rho).unwrap(),
        }
    }
}

/// `n` in `2..=40`, eigenvalues in `[-5, 5]`, `|b_i|` in `[1e-3, 1]`, `rho`
/// log-uniform in `[1e-2, 10]`.
pub fn diag_case() -> impl Strategy<Value = DiagCase> {
    (2usize..=40)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec((1e-3f64..1.0, any::<bool>()), n),
                -2.0f64..1.0,
            )
        })
        .prop_map(|(mut eigs, b, log_rho)| {
            eigs.sort_by(f64::total_cmp);
            DiagCase {
                eigs,
                b: b.into_iter().map(|(v, neg)| if neg { -v } else { v }).collect(),
                rho: 10f64.powf(log_rho),
            }
        })
}

/// Instance plus a truncation level `1 <= m < n`.
pub fn truncated_case() -> impl Strategy<Value = (DiagCase, usize)> {
    diag_case().prop_flat_map(|c| {
        let n = c.n();
        (Just(c), 1..n)
    })
}

fn orders() -> [ModelOrder; 2] {
    [ModelOrder::Exact, ModelOrder::FirstOrder]
}

/// Exact and first-order secular functions strictly decrease right of
/// `max(-lambda_1, 0)`; checked on 100 probe pairs.
pub fn check_monotone(c: &DiagCase, m: usize, probes: &[(f64, f64)]) -> Result<(), TestCaseError> {
    for order in orders() {
        let model = if order == ModelOrder::Exact {
            c.exact_model()
        } else {
            c.truncated(m, order)
        };
        let lo = (-model.lambda1()).max(0.0);
        let scale = 2.0 * model.b1().max(1e-3);
        for &(u, v) in probes {
            let s1 = lo + scale * u.min(v) + 1e-9 * (1.0 + lo);
            let s2 = lo + scale * u.max(v) + 1e-6 * (1.0 + lo + scale);
            let (w1, w2) = (model.eval(s1).unwrap(), model.eval(s2).unwrap());
            prop_assert!(w2 < w1, "{order:?}: w({s2}) = {w2} >= w({s1}) = {w1}");
        }
    }
    Ok(())
}

/// `w(lo+) > 0` and `w(B_1) <= 0` for all three orders.
pub fn check_bracket(c: &DiagCase, m: usize) -> Result<(), TestCaseError> {
    let models = [
        c.exact_model(),
        c.truncated(m, ModelOrder::FirstOrder),
        c.truncated(m, ModelOrder::SecondOrder),
    ];
    for model in models {
        let l1 = model.lambda1();
        let b1 = (-l1 + (l1 * l1 + 4.0 * model.rho * c.b_norm()).sqrt()) / 2.0;
        let lo = (-l1).max(0.0) + 1e-9 * l1.abs().max(1e-3);
        prop_assert!(model.eval(lo).unwrap() > 0.0, "{:?}: w(lo+) <= 0", model.order);
        prop_assert!(
            model.eval(b1).unwrap() <= 1e-12 * (b1 / model.rho).powi(2),
            "{:?}: w(B1) = {} > 0",
            model.order,
            model.eval(b1).unwrap()
        );
    }
    Ok(())
}

fn solution(c: &DiagCase, sigma: f64) -> Vec<f64> {
    c.eigs.iter().zip(&c.b).map(|(l, b)| -b / (l + sigma)).collect()
}

/// `||x(sigma_1) - x(sigma*)|| <= max_i |1/(l_i + sigma_1) - 1/(l_i + sigma*)| ||b||`.
pub fn check_solution_gap(c: &DiagCase, m: usize) -> Result<(), TestCaseError> {
    let cfg = RootConfig {
        tol: 1e-13,
        ..RootConfig::default()
    };
    let exact = find_root(&c.exact_model(), &cfg).unwrap().sigma;
    let approx = find_root(&c.truncated(m, ModelOrder::FirstOrder), &cfg).unwrap().sigma;
    let (xe, xa) = (solution(c, exact), solution(c, approx));
    let gap = xe.iter().zip(&xa).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let bound = solution_gap_bound(&c.eigs, approx, exact, c.b_norm());
    let manual = c
        .eigs
        .iter()
        .map(|l| (1.0 / (l + approx) - 1.0 / (l + exact)).abs())
        .fold(0.0, f64::max)
        * c.b_norm();
    prop_assert!((bound - manual).abs() <= 1e-12 * manual.max(1e-300));
    prop_assert!(gap <= bound * (1.0 + 1e-10) + 1e-300, "gap {gap} > bound {bound}");
    Ok(())
}

/// Orthonormal Lanczos basis and the three-term relation, plus orthonormal
/// Ritz vectors from the restarted eigensolver.
pub fn check_lanczos(c: &DiagCase, k_frac: f64, seed: u64) -> Result<(), TestCaseError> {
    let n = c.n();
    let op = SymmetricOperator::diagonal(c.eigs.clone());
    let mut u1: Vec<f64> = c.b.clone();
    let nb = c.b_norm();
    u1.iter_mut().for_each(|v| *v /= nb);
    let k = ((k_frac * n as f64).ceil() as usize).clamp(1, n);
    let f = lanczos_tridiagonalize(&op, &u1, k).unwrap();
    let dim = f.basis.len();
    let scale = c.eigs.iter().fold(1.0f64, |a, l| a.max(l.abs()));
    for i in 0..dim {
        for j in 0..=i {
            let d: f64 = f.basis[i].iter().zip(&f.basis[j]).map(|(a, b)| a * b).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            prop_assert!((d - target).abs() <= 1e-10, "U^T U [{i},{j}] = {d}");
        }
    }
    // A u_j = beta_{j-1} u_{j-1} + alpha_j u_j + beta_j u_{j+1}
    for j in 0..dim {
        for r in 0..n {
            let mut rhs = f.alpha[j] * f.basis[j][r];
            if j > 0 {
                rhs += f.beta[j - 1] * f.basis[j - 1][r];
            }
            if j + 1 < dim {
                rhs += f.beta[j] * f.basis[j + 1][r];
            } else if let Some(next) = &f.next {
                rhs += f.residual_beta * next[r];
            }
            let lhs = c.eigs[r] * f.basis[j][r];
            prop_assert!((lhs - rhs).abs() <= 1e-9 * scale, "three-term relation off by {}", lhs - rhs);
        }
    }

    if n >= 3 {
        let m = (n / 3).max(1);
        let cfg = EigenConfig {
            restarts: 3,
            seed,
            ..EigenConfig::default()
        };
        let ps = smallest_eigenpairs(&op, m, &cfg).unwrap();
        for i in 0..ps.m() {
            for j in 0..=i {
                let d: f64 = ps.eigenvectors[i].iter().zip(&ps.eigenvectors[j]).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((d - target).abs() <= 1e-9, "Ritz vectors [{i},{j}] inner product {d}");
            }
        }
    }
    Ok(())
}

/// CG on `diag(d) + sigma I` matches `-b_i / (d_i + sigma)`.
pub fn check_cg(c: &DiagCase, margin: f64) -> Result<(), TestCaseError> {
    let sigma = -c.eigs[0] + margin;
    let op = SymmetricOperator::diagonal(c.eigs.clone());
    let sol = solve_shifted_system(&op, sigma, &c.b, 1e-12, 10 * c.n() + 100).unwrap();
    prop_assert!(sol.converged);
    let expect = solution(c, sigma);
    let norm = expect.iter().map(|v| v * v).sum::<f64>().sqrt();
    let err = sol.x.iter().zip(&expect).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    // residual <= 1e-12 ||b|| bounds the error by 1e-12 ||b|| / margin
    prop_assert!(err <= 2e-12 * c.b_norm() / margin + 1e-14 * norm, "CG error {err}");
    Ok(())
}

pub fn probe_pairs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 100)
}
