//! A-priori error bounds for truncated roots. These need the full spectrum
//! and are meant for diagnostics and tests, not for the solve path.

use serde::{Deserialize, Serialize};

use super::{sigma_upper_bound, ModelOrder, SecularError, SecularModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Upper bound on the constant `C_m`.
    pub cm_cap: f64,
    /// `cm_cap * max_{i>m} |lambda_i - mu|` (first order) or
    /// `cm_cap * max_{i>m} (lambda_i - mu)^2` (second order).
    pub gap_cap: f64,
    /// `max_{i>m} |lambda_i - mu|`.
    pub lambda_spread: f64,
}

/// Cap on `|sigma_m - sigma*|` for a truncated model, given the ascending
/// full spectrum of `A`.
///
/// `C_m <= (k ||b||^2 / (lambda_m - lambda_1)^(k+1)) * min{(lambda_n + B_1)^3 /
/// (2 ||b||^2), rho^2 / (2 B_1)}` with `k = 2` for the first order and
/// `k = 3` for the second. With `b = 0` the cap is zero.
pub fn theorem_bound(
    model: &SecularModel,
    full_spectrum: &[f64],
    order: ModelOrder,
) -> Result<BoundReport, SecularError> {
    let m = model.m();
    let n = full_spectrum.len();
    if order == ModelOrder::Exact {
        return Err(SecularError::InvalidModel("bounds apply to truncated orders only".into()));
    }
    if m > n || n == 0 {
        return Err(SecularError::InvalidModel(format!(
            "full spectrum of length {n} cannot contain {m} known eigenvalues"
        )));
    }
    let l1 = full_spectrum[0];
    let lm = full_spectrum[m - 1];
    let ln = full_spectrum[n - 1];
    if lm <= l1 {
        return Err(SecularError::BoundUndefined);
    }
    let mu = model.mu;
    let hidden = &full_spectrum[m..];
    let lambda_spread = hidden.iter().map(|l| (l - mu).abs()).fold(0.0, f64::max);
    let b2 = model.b_norm * model.b_norm;
    if b2 == 0.0 {
        return Ok(BoundReport {
            cm_cap: 0.0,
            gap_cap: 0.0,
            lambda_spread,
        });
    }
    let b1 = sigma_upper_bound(l1, model.rho, model.b_norm);
    let inner = ((ln + b1).powi(3) / (2.0 * b2)).min(model.rho * model.rho / (2.0 * b1));
    let gap = lm - l1;
    let (cm_cap, spread) = match order {
        ModelOrder::FirstOrder => (2.0 * b2 / gap.powi(3) * inner, lambda_spread),
        _ => (3.0 * b2 / gap.powi(4) * inner, lambda_spread * lambda_spread),
    };
    Ok(BoundReport {
        cm_cap,
        gap_cap: cm_cap * spread,
        lambda_spread,
    })
}

/// `max_i |1/(lambda_i + sigma_approx) - 1/(lambda_i + sigma_exact)| * ||b||`,
/// which bounds `||x(sigma_approx) - x(sigma_exact)||`.
pub fn solution_gap_bound(full_spectrum: &[f64], sigma_approx: f64, sigma_exact: f64, b_norm: f64) -> f64 {
    full_spectrum
        .iter()
        .map(|l| (1.0 / (l + sigma_approx) - 1.0 / (l + sigma_exact)).abs())
        .fold(0.0, f64::max)
        * b_norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_on_all_hidden_eigenvalues_gives_zero_gap() {
        let model = SecularModel::first_order(vec![-1.0, 0.0], vec![0.1, 0.1], 1.0, 1.0, 0.5).unwrap();
        let r = theorem_bound(&model, &[-1.0, 0.0, 1.0], ModelOrder::FirstOrder).unwrap();
        assert_eq!(r.lambda_spread, 0.0);
        assert_eq!(r.gap_cap, 0.0);
        assert!(r.cm_cap > 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        let model = SecularModel::first_order(vec![-1.0, -1.0], vec![0.1, 0.1], 1.0, 1.0, 0.5).unwrap();
        assert!(matches!(
            theorem_bound(&model, &[-1.0, -1.0, 1.0], ModelOrder::FirstOrder),
            Err(SecularError::BoundUndefined)
        ));
        let zero_b = SecularModel::first_order(vec![-1.0, 0.0], vec![0.0, 0.0], 0.0, 1.0, 0.5).unwrap();
        let r = theorem_bound(&zero_b, &[-1.0, 0.0, 2.0], ModelOrder::SecondOrder).unwrap();
        assert_eq!((r.cm_cap, r.gap_cap), (0.0, 0.0));
        assert_eq!(r.lambda_spread, 1.0);
    }

    #[test]
    fn cap_formula_by_hand() {
        // lambda = (-1, 0, 2), m = 2, mu = 1, rho = 1, ||b|| = 1: B_1 = (1 + sqrt 5)/2
        let model = SecularModel::second_order(vec![-1.0, 0.0], vec![0.3, 0.3], 1.0, 1.0, 0.0, 1.0).unwrap();
        let b1 = (1.0 + 5f64.sqrt()) / 2.0;
        let inner = ((2.0 + b1).powi(3) / 2.0).min(1.0 / (2.0 * b1));
        let r1 = theorem_bound(&model, &[-1.0, 0.0, 2.0], ModelOrder::FirstOrder).unwrap();
        assert!((r1.cm_cap - 2.0 * inner).abs() < 1e-15);
        assert!((r1.gap_cap - 2.0 * inner).abs() < 1e-15);
        let r2 = theorem_bound(&model, &[-1.0, 0.0, 2.0], ModelOrder::SecondOrder).unwrap();
        assert!((r2.cm_cap - 3.0 * inner).abs() < 1e-15);
    }

    #[test]
    fn solution_gap_uses_absolute_values() {
        let g = solution_gap_bound(&[0.0, 1.0], 2.0, 1.0, 2.0);
        assert!((g - (1.0 - 0.5) * 2.0).abs() < 1e-15);
        assert_eq!(g, solution_gap_bound(&[0.0, 1.0], 1.0, 2.0, 2.0));
    }
}
