//! Exact and truncated secular equations for the cubic regularization
//! subproblem.
//!
//! With `A = V diag(lambda) V^T` and `c_i = -b^T v_i`, the optimal shift
//! `sigma = rho ||x||` is the unique root right of the pole `-lambda_1` of
//!
//! ```text
//! w(sigma) = sum_i c_i^2 / (lambda_i + sigma)^2 - sigma^2 / rho^2.
//! ```
//!
//! When only `lambda_1..lambda_m` are known, the hidden eigenvalues are
//! collapsed onto a single surrogate `mu` (first order), optionally with a
//! correction for the first moment of the hidden mass (second order).

mod bounds;
mod root;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bounds::{solution_gap_bound, theorem_bound, BoundReport};
pub use root::{find_root, RootBracket, RootConfig, RootInfo, RootMethod};

/// Hidden mass below `MU2_THRESHOLD * ||b||^2` leaves `mu_2` undefined.
pub const MU2_THRESHOLD: f64 = 1e-14;
/// `c_1^2 < HARD_CASE_THRESHOLD * ||b||^2` is treated as the hard case.
pub const HARD_CASE_THRESHOLD: f64 = 1e-16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SecularError {
    #[error(
        "hard case suspected: c_1^2 = {c1_sq:e} is negligible against ||b||^2 = {b_norm_sq:e}; \
         perturb b by about 1e-8 * ||b|| along the leading eigenvector and retry"
    )]
    HardCase { c1_sq: f64, b_norm_sq: f64 },
    #[error("sigma = {sigma} lies at or left of the pole {pole}")]
    Domain { sigma: f64, pole: f64 },
    #[error("mu_2 is undefined: the hidden mass ||b||^2 - sum c_i^2 = {residual_mass:e} is negligible; use the first-order model")]
    Mu2Undefined { residual_mass: f64 },
    #[error("missing input: {0}")]
    MissingInput(&'static str),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),
    #[error("theorem bound undefined: lambda_m equals lambda_1")]
    BoundUndefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelOrder {
    Exact,
    FirstOrder,
    SecondOrder,
}

/// How the surrogate for the hidden eigenvalues is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum MuRule {
    /// Mean for first order, weighted mean for second order.
    #[default]
    Auto,
    /// `mu_1 = (tr A - sum lambda_i) / (n - m)`.
    Mean,
    /// `mu_2 = (b^T A b - sum c_i^2 lambda_i) / (||b||^2 - sum c_i^2)`.
    Weighted,
    /// `mu = lambda_m`.
    LargestKnown,
    Fixed(f64),
}

/// One of the three secular functions, immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecularModel {
    pub order: ModelOrder,
    /// Ascending.
    pub known_eigs: Vec<f64>,
    pub coeffs_sq: Vec<f64>,
    /// `||b||^2 - sum_{i<=m} c_i^2`, clamped at zero.
    pub residual_mass: f64,
    pub mu: f64,
    /// `sum_{i>m} c_i^2 (lambda_i - mu)`; only used by the second order.
    pub second_order_term: Option<f64>,
    pub rho: f64,
    pub b_norm: f64,
}

/// Side information produced while building a model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub mu_clamped: bool,
    pub residual_mass_clamped: bool,
    /// `mu` before clamping.
    pub raw_mu: f64,
}

/// Scalars `build_model` may need besides the partial spectrum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModelInputs {
    /// Dimension of the full problem.
    pub n: usize,
    pub trace: Option<f64>,
    /// `b^T A b`.
    pub b_quad: Option<f64>,
}

/// `B_1 = (-lambda_1 + sqrt(lambda_1^2 + 4 rho ||b||)) / 2`, an upper bound on
/// the exact root. Evaluated in the cancellation-free form when
/// `lambda_1 > 0`.
pub fn sigma_upper_bound(lambda1: f64, rho: f64, b_norm: f64) -> f64 {
    if b_norm == 0.0 {
        return (-lambda1).max(0.0);
    }
    let disc = (lambda1 * lambda1 + 4.0 * rho * b_norm).sqrt();
    if lambda1 > 0.0 {
        2.0 * rho * b_norm / (lambda1 + disc)
    } else {
        (disc - lambda1) / 2.0
    }
}

pub fn mu_mean(trace: f64, known_eigs: &[f64], n: usize) -> Result<f64, SecularError> {
    let m = known_eigs.len();
    if n <= m {
        return Err(SecularError::InvalidModel(format!(
            "mu_1 needs hidden eigenvalues, got m = {m}, n = {n}"
        )));
    }
    Ok((trace - known_eigs.iter().sum::<f64>()) / (n - m) as f64)
}

pub fn mu_weighted(
    b_quad: f64,
    known_eigs: &[f64],
    coeffs_sq: &[f64],
    b_norm: f64,
) -> Result<f64, SecularError> {
    let hidden = b_norm * b_norm - coeffs_sq.iter().sum::<f64>();
    if hidden <= MU2_THRESHOLD * b_norm * b_norm {
        return Err(SecularError::Mu2Undefined {
            residual_mass: hidden,
        });
    }
    let known: f64 = known_eigs.iter().zip(coeffs_sq).map(|(l, c)| l * c).sum();
    Ok((b_quad - known) / hidden)
}

fn validate_common(known_eigs: &[f64], coeffs_sq: &[f64], rho: f64, b_norm: f64) -> Result<(), SecularError> {
    if known_eigs.is_empty() || known_eigs.len() != coeffs_sq.len() {
        return Err(SecularError::InvalidModel(format!(
            "need matching non-empty eigenvalue and coefficient lists, got {} and {}",
            known_eigs.len(),
            coeffs_sq.len()
        )));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(SecularError::InvalidModel(format!("rho must be positive, got {rho}")));
    }
    if !(b_norm >= 0.0) || !b_norm.is_finite() {
        return Err(SecularError::InvalidModel(format!("||b|| must be finite and non-negative, got {b_norm}")));
    }
    if known_eigs.windows(2).any(|w| w[0] > w[1]) {
        return Err(SecularError::InvalidModel("eigenvalues must be ascending".into()));
    }
    if known_eigs.iter().chain(coeffs_sq).any(|v| !v.is_finite()) || coeffs_sq.iter().any(|c| *c < 0.0) {
        return Err(SecularError::InvalidModel("non-finite eigenvalue or negative c_i^2".into()));
    }
    Ok(())
}

impl SecularModel {
    /// The exact secular function from a full spectrum.
    pub fn exact(eigs: Vec<f64>, coeffs_sq: Vec<f64>, rho: f64, b_norm: f64) -> Result<Self, SecularError> {
        validate_common(&eigs, &coeffs_sq, rho, b_norm)?;
        let mu = *eigs.last().expect("validated non-empty");
        Ok(Self {
            order: ModelOrder::Exact,
            known_eigs: eigs,
            coeffs_sq,
            residual_mass: 0.0,
            mu,
            second_order_term: None,
            rho,
            b_norm,
        })
    }

    /// First-order model with an explicit `mu`; the hidden mass is derived
    /// from `||b||` and clamped at zero.
    pub fn first_order(
        known_eigs: Vec<f64>,
        coeffs_sq: Vec<f64>,
        b_norm: f64,
        mu: f64,
        rho: f64,
    ) -> Result<Self, SecularError> {
        validate_common(&known_eigs, &coeffs_sq, rho, b_norm)?;
        Self::check_mu(&known_eigs, mu)?;
        let residual_mass = (b_norm * b_norm - coeffs_sq.iter().sum::<f64>()).max(0.0);
        Ok(Self {
            order: ModelOrder::FirstOrder,
            known_eigs,
            coeffs_sq,
            residual_mass,
            mu,
            second_order_term: None,
            rho,
            b_norm,
        })
    }

    pub fn second_order(
        known_eigs: Vec<f64>,
        coeffs_sq: Vec<f64>,
        b_norm: f64,
        mu: f64,
        second_order_term: f64,
        rho: f64,
    ) -> Result<Self, SecularError> {
        let mut model = Self::first_order(known_eigs, coeffs_sq, b_norm, mu, rho)?;
        if !second_order_term.is_finite() {
            return Err(SecularError::InvalidModel("second-order term must be finite".into()));
        }
        model.order = ModelOrder::SecondOrder;
        model.second_order_term = Some(second_order_term);
        Ok(model)
    }

    fn check_mu(known_eigs: &[f64], mu: f64) -> Result<(), SecularError> {
        let lm = *known_eigs.last().expect("validated non-empty");
        if !mu.is_finite() || mu < lm - 1e-12 * lm.abs().max(1.0) {
            return Err(SecularError::InvalidModel(format!(
                "mu = {mu} must be finite and at least lambda_m = {lm}"
            )));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.known_eigs.len()
    }

    pub fn lambda1(&self) -> f64 {
        self.known_eigs[0]
    }

    /// Location of the leftmost pole, `-lambda_1`.
    pub fn pole(&self) -> f64 {
        -self.lambda1()
    }

    pub fn b1(&self) -> f64 {
        sigma_upper_bound(self.lambda1(), self.rho, self.b_norm)
    }

    fn check_domain(&self, sigma: f64) -> Result<(), SecularError> {
        if !(sigma > self.pole()) || !sigma.is_finite() {
            return Err(SecularError::Domain {
                sigma,
                pole: self.pole(),
            });
        }
        Ok(())
    }

    /// `sum c_i^2/(lambda_i+sigma)^2 + R/(mu+sigma)^2 - 2T/(mu+sigma)^3`, the
    /// positive part of the secular function, and its derivative.
    fn mass(&self, sigma: f64) -> (f64, f64) {
        let mut s = 0.0;
        let mut ds = 0.0;
        for (l, c) in self.known_eigs.iter().zip(&self.coeffs_sq) {
            let inv = 1.0 / (l + sigma);
            let t = c * inv * inv;
            s += t;
            ds -= 2.0 * t * inv;
        }
        if self.order != ModelOrder::Exact {
            let inv = 1.0 / (self.mu + sigma);
            let t = self.residual_mass * inv * inv;
            s += t;
            ds -= 2.0 * t * inv;
            if let Some(tt) = self.second_order_term {
                let cube = inv * inv * inv;
                s -= 2.0 * tt * cube;
                ds += 6.0 * tt * cube * inv;
            }
        }
        (s, ds)
    }

    /// `w(sigma)`, `w_1(sigma; mu)` or `w_2(sigma; mu)` depending on the order.
    pub fn eval(&self, sigma: f64) -> Result<f64, SecularError> {
        self.check_domain(sigma)?;
        let (s, _) = self.mass(sigma);
        Ok(s - sigma * sigma / (self.rho * self.rho))
    }

    /// Value and derivative of [`SecularModel::eval`].
    pub fn eval_with_derivative(&self, sigma: f64) -> Result<(f64, f64), SecularError> {
        self.check_domain(sigma)?;
        let (s, ds) = self.mass(sigma);
        let r2 = self.rho * self.rho;
        Ok((s - sigma * sigma / r2, ds - 2.0 * sigma / r2))
    }

    /// `sqrt(sum c_i^2/(lambda_i+sigma)^2 + R/(mu+sigma)^2) - sigma/rho`,
    /// convex right of the pole with the same root as `w_1`.
    pub fn eval_sqrt_form(&self, sigma: f64) -> Result<f64, SecularError> {
        self.eval_sqrt_form_with_derivative(sigma).map(|(v, _)| v)
    }

    pub fn eval_sqrt_form_with_derivative(&self, sigma: f64) -> Result<(f64, f64), SecularError> {
        if self.order == ModelOrder::SecondOrder {
            return Err(SecularError::InvalidModel(
                "the square-root form applies to exact and first-order models only".into(),
            ));
        }
        self.check_domain(sigma)?;
        let (s, ds) = self.mass(sigma);
        let root = s.sqrt();
        let d = if root > 0.0 { ds / (2.0 * root) } else { 0.0 };
        Ok((root - sigma / self.rho, d - 1.0 / self.rho))
    }
}

/// A model together with what happened while building it.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub model: SecularModel,
    pub diagnostics: ModelDiagnostics,
}

/// Builds the requested secular model from known eigenvalues and
/// `c_i = -b^T v_i`.
///
/// When every eigenvalue is known (`m == n`) the model is exact whatever
/// order was asked for. A rule-produced `mu` below `lambda_m` is clamped to
/// `lambda_m`. The second order takes `T = (b^T A b - sum c_i^2 lambda_i) -
/// mu R`, which vanishes at `mu = mu_2`.
pub fn build_model(
    known_eigs: &[f64],
    coeffs: &[f64],
    b_norm: f64,
    rho: f64,
    order: ModelOrder,
    rule: MuRule,
    inputs: &ModelInputs,
) -> Result<BuiltModel, SecularError> {
    let coeffs_sq: Vec<f64> = coeffs.iter().map(|c| c * c).collect();
    validate_common(known_eigs, &coeffs_sq, rho, b_norm)?;
    let m = known_eigs.len();
    if inputs.n < m {
        return Err(SecularError::InvalidModel(format!(
            "problem dimension {} is smaller than the {m} known eigenvalues",
            inputs.n
        )));
    }
    let b2 = b_norm * b_norm;
    let known_mass: f64 = coeffs_sq.iter().sum();
    let mut diagnostics = ModelDiagnostics {
        residual_mass_clamped: known_mass > b2,
        ..ModelDiagnostics::default()
    };
    if order == ModelOrder::Exact || inputs.n == m {
        let model = SecularModel::exact(known_eigs.to_vec(), coeffs_sq, rho, b_norm)?;
        diagnostics.raw_mu = model.mu;
        return Ok(BuiltModel { model, diagnostics });
    }

    let residual_mass = (b2 - known_mass).max(0.0);
    if order == ModelOrder::SecondOrder && residual_mass <= MU2_THRESHOLD * b2 {
        return Err(SecularError::Mu2Undefined { residual_mass });
    }
    let rule = match (rule, order) {
        (MuRule::Auto, ModelOrder::SecondOrder) => MuRule::Weighted,
        (MuRule::Auto, _) => MuRule::Mean,
        (r, _) => r,
    };
    let lm = known_eigs[m - 1];
    let raw_mu = match rule {
        MuRule::Mean => mu_mean(
            inputs.trace.ok_or(SecularError::MissingInput("trace of A for mu_1"))?,
            known_eigs,
            inputs.n,
        )?,
        MuRule::Weighted => mu_weighted(
            inputs.b_quad.ok_or(SecularError::MissingInput("b^T A b for mu_2"))?,
            known_eigs,
            &coeffs_sq,
            b_norm,
        )?,
        MuRule::LargestKnown => lm,
        MuRule::Fixed(v) => v,
        MuRule::Auto => unreachable!("resolved above"),
    };
    if !raw_mu.is_finite() {
        return Err(SecularError::InvalidModel(format!("mu evaluated to {raw_mu}")));
    }
    diagnostics.raw_mu = raw_mu;
    let mu = if raw_mu < lm {
        diagnostics.mu_clamped = true;
        lm
    } else {
        raw_mu
    };
    let model = match order {
        ModelOrder::FirstOrder => SecularModel::first_order(known_eigs.to_vec(), coeffs_sq, b_norm, mu, rho)?,
        ModelOrder::SecondOrder => {
            let b_quad = inputs
                .b_quad
                .ok_or(SecularError::MissingInput("b^T A b for the second-order model"))?;
            let known_moment: f64 = known_eigs.iter().zip(&coeffs_sq).map(|(l, c)| l * c).sum();
            let term = if rule == MuRule::Weighted && !diagnostics.mu_clamped {
                0.0
            } else {
                (b_quad - known_moment) - mu * residual_mass
            };
            SecularModel::second_order(known_eigs.to_vec(), coeffs_sq, b_norm, mu, term, rho)?
        }
        ModelOrder::Exact => unreachable!("handled above"),
    };
    Ok(BuiltModel { model, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn b1_examples() {
        assert_relative_eq!(sigma_upper_bound(-1.0, 0.1, 0.1), (1.0 + 1.04f64.sqrt()) / 2.0, max_relative = 1e-15);
        assert!((sigma_upper_bound(-1.0, 0.1, 0.1) - 1.0099).abs() < 1e-4);
        assert_eq!(sigma_upper_bound(-2.0, 1.0, 0.0), 2.0);
        assert_eq!(sigma_upper_bound(3.0, 1.0, 0.0), 0.0);
        assert_relative_eq!(sigma_upper_bound(0.0, 1.0, 1.0), 1.0, max_relative = 1e-15);
        // stable branch agrees with the textbook form where both are accurate
        let l: f64 = 2.0;
        assert_relative_eq!(
            sigma_upper_bound(l, 0.5, 3.0),
            (-l + (l * l + 6.0f64).sqrt()) / 2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn mu_examples() {
        assert_eq!(mu_mean(11.0, &[1.0, 2.0], 4).unwrap(), 4.0);
        // hidden c_3^2 = 1 at 3 and c_4^2 = 4 at 5; known c_1^2 = 1 at 1, c_2^2 = 0 at 2
        let b_quad = 1.0 * 1.0 + 1.0 * 3.0 + 4.0 * 5.0;
        let mu2 = mu_weighted(b_quad, &[1.0, 2.0], &[1.0, 0.0], 6f64.sqrt()).unwrap();
        assert_relative_eq!(mu2, 4.6, max_relative = 1e-14);
        assert!(matches!(
            mu_weighted(1.0, &[1.0], &[1.0], 1.0),
            Err(SecularError::Mu2Undefined { .. })
        ));
    }

    #[test]
    fn unit_root_evaluations() {
        let model = SecularModel::exact(vec![0.0], vec![1.0], 1.0, 1.0).unwrap();
        assert_eq!(model.eval(1.0).unwrap(), 0.0);
        assert_eq!(model.eval_sqrt_form(1.0).unwrap(), 0.0);
        assert!(matches!(model.eval(0.0), Err(SecularError::Domain { .. })));
        assert!(matches!(model.eval(-1.0), Err(SecularError::Domain { .. })));
    }

    #[test]
    fn full_first_order_matches_exact_bitwise() {
        let eigs = vec![-0.7, -0.1, 0.3, 0.9];
        let c2 = vec![0.04, 0.01, 0.09, 0.16];
        let bn = c2.iter().sum::<f64>().sqrt();
        let exact = SecularModel::exact(eigs.clone(), c2.clone(), 0.3, bn).unwrap();
        let mut first = SecularModel::first_order(eigs, c2, bn, 0.9, 0.3).unwrap();
        first.residual_mass = 0.0;
        for s in [0.71, 0.8, 1.3, 4.0] {
            assert_eq!(exact.eval(s).unwrap().to_bits(), first.eval(s).unwrap().to_bits());
        }
    }

    #[test]
    fn second_order_with_zero_term_matches_first_order() {
        let first = SecularModel::first_order(vec![-1.0, -0.5], vec![0.01, 0.02], 0.3, 0.4, 0.5).unwrap();
        let second = SecularModel::second_order(vec![-1.0, -0.5], vec![0.01, 0.02], 0.3, 0.4, 0.0, 0.5).unwrap();
        for s in [1.01, 1.5, 3.0] {
            assert_eq!(first.eval(s).unwrap().to_bits(), second.eval(s).unwrap().to_bits());
        }
        assert!(second.eval_sqrt_form(1.5).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let model = SecularModel::second_order(vec![-1.0, -0.2], vec![0.02, 0.05], 0.4, 0.3, 0.01, 0.2).unwrap();
        let fo = SecularModel::first_order(vec![-1.0, -0.2], vec![0.02, 0.05], 0.4, 0.3, 0.2).unwrap();
        for s in [1.1, 1.6, 2.5] {
            let h = 1e-6;
            let (_, d) = model.eval_with_derivative(s).unwrap();
            let fd = (model.eval(s + h).unwrap() - model.eval(s - h).unwrap()) / (2.0 * h);
            assert_relative_eq!(d, fd, max_relative = 1e-6);
            let (_, d) = fo.eval_sqrt_form_with_derivative(s).unwrap();
            let fd = (fo.eval_sqrt_form(s + h).unwrap() - fo.eval_sqrt_form(s - h).unwrap()) / (2.0 * h);
            assert_relative_eq!(d, fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn build_model_rules() {
        let inputs = ModelInputs {
            n: 4,
            trace: Some(11.0),
            b_quad: Some(24.0),
        };
        let bn = 6f64.sqrt();
        let built = build_model(&[1.0, 2.0], &[-1.0, 0.0], bn, 1.0, ModelOrder::FirstOrder, MuRule::Auto, &inputs).unwrap();
        assert_eq!(built.model.mu, 4.0);
        assert_relative_eq!(built.model.residual_mass, 5.0, max_relative = 1e-14);
        let built = build_model(&[1.0, 2.0], &[1.0, 0.0], bn, 1.0, ModelOrder::SecondOrder, MuRule::Auto, &inputs).unwrap();
        assert_relative_eq!(built.model.mu, 4.6, max_relative = 1e-14);
        assert_eq!(built.model.second_order_term, Some(0.0));
        // a fixed mu away from mu_2 carries the first hidden moment
        let built = build_model(&[1.0, 2.0], &[1.0, 0.0], bn, 1.0, ModelOrder::SecondOrder, MuRule::Fixed(4.0), &inputs).unwrap();
        assert_relative_eq!(built.model.second_order_term.unwrap(), 23.0 - 20.0, max_relative = 1e-12);

        let clamped = build_model(&[1.0, 2.0], &[1.0, 0.0], bn, 1.0, ModelOrder::FirstOrder, MuRule::Fixed(0.5), &inputs).unwrap();
        assert!(clamped.diagnostics.mu_clamped);
        assert_eq!(clamped.model.mu, 2.0);

        let full = ModelInputs { n: 2, ..inputs };
        let built = build_model(&[1.0, 2.0], &[1.0, 1.0], 2f64.sqrt(), 1.0, ModelOrder::FirstOrder, MuRule::Auto, &full).unwrap();
        assert_eq!(built.model.order, ModelOrder::Exact);
        assert_eq!(built.model.residual_mass, 0.0);

        let no_trace = ModelInputs { trace: None, ..inputs };
        assert!(matches!(
            build_model(&[1.0, 2.0], &[1.0, 0.0], bn, 1.0, ModelOrder::FirstOrder, MuRule::Mean, &no_trace),
            Err(SecularError::MissingInput(_))
        ));
        assert!(matches!(
            build_model(&[1.0, 2.0], &[1.0, 1.0], 2f64.sqrt(), 1.0, ModelOrder::SecondOrder, MuRule::Auto, &inputs),
            Err(SecularError::Mu2Undefined { .. })
        ));
    }

    #[test]
    fn model_serializes_with_listed_fields() {
        let model = SecularModel::first_order(vec![-1.0], vec![0.25], 1.0, 0.5, 2.0).unwrap();
        let v = serde_json::to_value(&model).unwrap();
        for key in ["order", "known_eigs", "coeffs_sq", "residual_mass", "mu", "second_order_term", "rho", "b_norm"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["order"], "first_order");
    }
}
