//! Bracketed root finding right of the pole.

use serde::{Deserialize, Serialize};

use super::{ModelOrder, SecularError, SecularModel, HARD_CASE_THRESHOLD};

const MAX_OFFSET_HALVINGS: usize = 60;
const MAX_EXPANSIONS: usize = 200;
const MAX_ITERATIONS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RootMethod {
    #[default]
    Bisection,
    /// Newton on the convex square-root form (or on `w` itself for the
    /// second order), falling back to bisection whenever a step leaves the
    /// current bracket.
    SafeguardedNewton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RootConfig {
    /// Final bracket width relative to `max(1, B_1)`.
    pub tol: f64,
    pub method: RootMethod,
}

impl Default for RootConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            method: RootMethod::Bisection,
        }
    }
}

/// Initial sign bracket: `w(lo) > 0 >= w(hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootBracket {
    pub lo: f64,
    pub hi: f64,
    #[serde(rename = "B1")]
    pub b1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootInfo {
    pub sigma: f64,
    pub iterations: usize,
    pub bracket: RootBracket,
    pub final_width: f64,
}

/// Squared coefficients attached to the smallest eigenvalue, counting
/// numerically repeated copies of it.
fn leading_mass(model: &SecularModel) -> f64 {
    let l1 = model.lambda1();
    let tie = 1e-12 * l1.abs().max(1.0);
    model
        .known_eigs
        .iter()
        .zip(&model.coeffs_sq)
        .take_while(|(l, _)| **l - l1 <= tie)
        .map(|(_, c)| c)
        .sum()
}

fn initial_bracket(model: &SecularModel) -> Result<RootBracket, SecularError> {
    let l1 = model.lambda1();
    let b1 = model.b1();
    let base = (-l1).max(0.0);
    let mut offset = (1e-12 * l1.abs()).max(1e-14);
    let mut lo = base + offset;
    let mut found = false;
    for _ in 0..=MAX_OFFSET_HALVINGS {
        lo = base + offset;
        if lo > model.pole() && model.eval(lo)? > 0.0 {
            found = true;
            break;
        }
        offset *= 0.5;
    }
    if !found {
        // with lambda_1 > 0 the function is finite and positive at zero
        if l1 > 0.0 && model.eval(0.0)? > 0.0 {
            lo = 0.0;
        } else {
            return Err(SecularError::Degenerate(format!(
                "secular function is not positive just right of the pole at {}",
                model.pole()
            )));
        }
    }
    let mut hi = b1.max(lo);
    let mut step = (hi - lo).max(f64::EPSILON * lo.abs().max(1.0));
    let mut expansions = 0;
    while model.eval(hi)? > 0.0 {
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            return Err(SecularError::Degenerate("failed to bracket the root from the right".into()));
        }
        step *= 2.0;
        hi = lo + step;
    }
    Ok(RootBracket { lo, hi, b1 })
}

/// Root of the model's secular function in `(max(-lambda_1, 0), B_1]`.
///
/// The final bracket width is at most `tol * max(1, B_1)`. A negligible
/// `c_1` is reported as [`SecularError::HardCase`]; the caller decides
/// whether to perturb `b`.
pub fn find_root(model: &SecularModel, cfg: &RootConfig) -> Result<RootInfo, SecularError> {
    if !(cfg.tol > 0.0) {
        return Err(SecularError::InvalidModel(format!("root tolerance must be positive, got {}", cfg.tol)));
    }
    let l1 = model.lambda1();
    let b2 = model.b_norm * model.b_norm;
    if model.b_norm == 0.0 {
        if l1 >= 0.0 {
            let bracket = RootBracket { lo: 0.0, hi: 0.0, b1: 0.0 };
            return Ok(RootInfo {
                sigma: 0.0,
                iterations: 0,
                bracket,
                final_width: 0.0,
            });
        }
        return Err(SecularError::HardCase { c1_sq: 0.0, b_norm_sq: 0.0 });
    }
    let c1_sq = leading_mass(model);
    if c1_sq < HARD_CASE_THRESHOLD * b2 && l1 <= 0.0 {
        return Err(SecularError::HardCase { c1_sq, b_norm_sq: b2 });
    }

    let bracket = initial_bracket(model)?;
    let width_tol = cfg.tol * bracket.b1.max(1.0);
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    let mut iterations = 0;
    let newton = cfg.method == RootMethod::SafeguardedNewton;
    let use_sqrt = model.order != ModelOrder::SecondOrder;
    let mut x = lo;
    while hi - lo > width_tol && iterations < MAX_ITERATIONS {
        iterations += 1;
        if !newton {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if model.eval(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            continue;
        }
        let (f, df) = if use_sqrt {
            model.eval_sqrt_form_with_derivative(x)?
        } else {
            model.eval_with_derivative(x)?
        };
        if f == 0.0 {
            lo = x;
            hi = x;
            break;
        }
        if f > 0.0 {
            lo = lo.max(x);
        } else {
            hi = hi.min(x);
        }
        let mut next = x - f / df;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        } else if (next - x).abs() < 0.5 * width_tol {
            // step onto the far side of the root to close the bracket
            let nudged = if f > 0.0 { next + 0.5 * width_tol } else { next - 0.5 * width_tol };
            next = if nudged > lo && nudged < hi { nudged } else { 0.5 * (lo + hi) };
        }
        if next <= lo || next >= hi {
            break;
        }
        x = next;
    }
    Ok(RootInfo {
        sigma: 0.5 * (lo + hi),
        iterations,
        bracket,
        final_width: hi - lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn both_methods(model: &SecularModel) -> [RootInfo; 2] {
        [RootMethod::Bisection, RootMethod::SafeguardedNewton].map(|method| {
            find_root(model, &RootConfig { tol: 1e-13, method }).unwrap()
        })
    }

    #[test]
    fn scalar_roots() {
        let m = SecularModel::exact(vec![0.0], vec![1.0], 1.0, 1.0).unwrap();
        for info in both_methods(&m) {
            assert!((info.sigma - 1.0).abs() < 1e-12);
            assert!(info.final_width <= 1e-13);
        }
        let m = SecularModel::exact(vec![1.0], vec![1.0], 1.0, 1.0).unwrap();
        for info in both_methods(&m) {
            assert!((info.sigma - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
            assert!((info.sigma - 0.6180340).abs() < 1e-7);
        }
    }

    #[test]
    fn newton_is_faster_than_bisection() {
        let eigs: Vec<f64> = (0..200).map(|i| -1.0 + 2.0 * i as f64 / 199.0).collect();
        let c2 = vec![0.01 / 200.0; 200];
        let m = SecularModel::exact(eigs, c2, 0.1, 0.1).unwrap();
        let [bis, newt] = both_methods(&m);
        assert!((bis.sigma - newt.sigma).abs() < 1e-12);
        assert!(newt.iterations < bis.iterations);
        assert!(bis.sigma > 1.0 && bis.sigma <= bis.bracket.b1);
    }

    #[test]
    fn hard_case_and_zero_b() {
        let m = SecularModel::exact(vec![-1.0, 1.0], vec![0.0, 1.0], 1.0, 1.0).unwrap();
        let err = find_root(&m, &RootConfig::default()).unwrap_err();
        assert!(matches!(err, SecularError::HardCase { .. }));
        assert!(err.to_string().contains("perturb b"));

        // repeated smallest eigenvalue: the mass on the second copy keeps the pole
        let m = SecularModel::exact(vec![-1.0, -1.0, 1.0], vec![0.0, 0.5, 0.5], 1.0, 1.0).unwrap();
        assert!(find_root(&m, &RootConfig::default()).is_ok());

        let m = SecularModel::exact(vec![0.5, 1.0], vec![0.0, 0.0], 1.0, 0.0).unwrap();
        assert_eq!(find_root(&m, &RootConfig::default()).unwrap().sigma, 0.0);
    }

    #[test]
    fn positive_definite_tiny_b() {
        // root sits well below the default pole offset scale
        let m = SecularModel::exact(vec![2.0, 3.0], vec![1e-30, 1e-30], 1.0, 2e-15f64.sqrt() * 1e-8).unwrap();
        let info = find_root(&m, &RootConfig::default()).unwrap();
        let w = m.eval(info.sigma).unwrap();
        assert!(info.sigma >= 0.0 && w.abs() < 1e-20, "{info:?} {w}");
    }

    #[test]
    fn second_order_with_negative_term_expands_bracket() {
        // a strongly negative T lifts w_2 above zero at B_1
        let m = SecularModel::second_order(vec![-1.0], vec![0.01], 0.2, 5.0, -2e4, 0.1).unwrap();
        let b1 = m.b1();
        assert!(m.eval(b1).unwrap() > 0.0);
        for info in both_methods(&m) {
            assert!(info.sigma > b1);
            assert_relative_eq!(m.eval(info.sigma).unwrap(), 0.0, epsilon = 1e-9);
        }
    }
}
