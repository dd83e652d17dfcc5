//! Oracle-side comparison of a truncated secular root with the exact one.

use serde::{Deserialize, Serialize};

use super::{full_spectrum, CrsError, CrsProblem, EXACT_ROOT_TOL};
use crate::secular::{
    build_model, find_root, theorem_bound, BoundReport, ModelInputs, ModelOrder, MuRule, RootConfig, RootMethod,
    SecularModel,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub m: usize,
    pub order: ModelOrder,
    pub mu: f64,
    pub mu_clamped: bool,
    pub sigma_truncated: f64,
    pub sigma_exact: f64,
    /// `|sigma_truncated - sigma_exact|`.
    pub observed_gap: f64,
    pub bound: BoundReport,
    /// `observed_gap <= gap_cap`, allowing for the two root tolerances.
    pub holds: bool,
}

/// Builds the truncated model from the exact `m` smallest eigenpairs, finds
/// both roots to `1e-14` and evaluates the a-priori cap. Requires a full
/// eigendecomposition (`cap` as in [`full_spectrum`]).
pub fn bound_check(
    p: &CrsProblem<'_>,
    m: usize,
    order: ModelOrder,
    rule: MuRule,
    cap: usize,
) -> Result<BoundCheck, CrsError> {
    let n = p.dim();
    if m == 0 || m >= n {
        return Err(CrsError::InvalidConfig(format!("bound check needs 1 <= m < n = {n}, got {m}")));
    }
    if order == ModelOrder::Exact {
        return Err(CrsError::InvalidConfig("bound check needs a truncated order".into()));
    }
    let spectrum = full_spectrum(&p.op, cap)?;
    let coeffs = spectrum.coefficients(&p.b);
    let b_norm = p.b_norm();
    let root_cfg = RootConfig {
        tol: EXACT_ROOT_TOL,
        method: RootMethod::Bisection,
    };
    let coeffs_sq: Vec<f64> = coeffs.iter().map(|c| c * c).collect();
    let exact = SecularModel::exact(spectrum.values.clone(), coeffs_sq.clone(), p.rho, b_norm)?;
    let sigma_exact = find_root(&exact, &root_cfg)?.sigma;

    let inputs = ModelInputs {
        n,
        trace: Some(spectrum.values.iter().sum()),
        b_quad: Some(spectrum.values.iter().zip(&coeffs_sq).map(|(l, c)| l * c).sum()),
    };
    let built = build_model(&spectrum.values[..m], &coeffs[..m], b_norm, p.rho, order, rule, &inputs)?;
    let sigma_truncated = find_root(&built.model, &root_cfg)?.sigma;
    let bound = theorem_bound(&built.model, &spectrum.values, order)?;
    let observed_gap = (sigma_truncated - sigma_exact).abs();
    let slack = 2.0 * EXACT_ROOT_TOL * (1.0 + sigma_exact);
    Ok(BoundCheck {
        m,
        order,
        mu: built.model.mu,
        mu_clamped: built.diagnostics.mu_clamped,
        sigma_truncated,
        sigma_exact,
        observed_gap,
        holds: observed_gap <= bound.gap_cap + slack,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::SymmetricOperator;

    fn case1(n: usize) -> CrsProblem<'static> {
        let d: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
        let b = vec![0.1 / (n as f64).sqrt(); n];
        CrsProblem::new(SymmetricOperator::diagonal(d), b, 0.1).unwrap()
    }

    #[test]
    fn first_and_second_order_bounds_hold() {
        let p = case1(500);
        for m in [5, 50, 250] {
            for order in [ModelOrder::FirstOrder, ModelOrder::SecondOrder] {
                let c = bound_check(&p, m, order, MuRule::Auto, 2000).unwrap();
                assert!(c.holds, "m={m} {order:?}: {} > {}", c.observed_gap, c.bound.gap_cap);
            }
        }
    }

    #[test]
    fn rejects_bad_m() {
        let p = case1(10);
        assert!(bound_check(&p, 10, ModelOrder::FirstOrder, MuRule::Auto, 100).is_err());
        assert!(bound_check(&p, 0, ModelOrder::FirstOrder, MuRule::Auto, 100).is_err());
    }
}
