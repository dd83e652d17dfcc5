//! Gradient descent on the model from `x = 0`.

use serde::{Deserialize, Serialize};

use super::{gradient_from_ax, model_value, CrsError, CrsProblem, Finish, MatvecBreakdown, SolveFlags, SolveReport, TrajectoryPoint};
use crate::operators::spectral_upper_bound;
use crate::secular::sigma_upper_bound;
use crate::vecops;

/// Consecutive objective increases that count as divergence.
const DIVERGENCE_STREAK: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum GdStep {
    /// `eta = 1 / (4 (beta + rho B_1))` with `beta` from power iteration and
    /// `B_1` evaluated at the lower bound `lambda_1 >= -beta`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdConfig {
    pub max_iters: usize,
    pub step: GdStep,
    /// Stop once `||grad f|| <= grad_tol`.
    pub grad_tol: f64,
    pub budget: Option<u64>,
    pub power_iters: usize,
    pub seed: u64,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            step: GdStep::Auto,
            grad_tol: 0.0,
            budget: None,
            power_iters: 20,
            seed: 0,
        }
    }
}

/// Runs `x <- x - eta grad f(x)` from the origin, one matvec per step.
pub fn solve_gd(p: &CrsProblem<'_>, cfg: &GdConfig) -> Result<SolveReport, CrsError> {
    let n = p.dim();
    let b_norm = p.b_norm();
    let start = p.op.matvec_count();
    let mut bd = MatvecBreakdown::default();
    let eta = match cfg.step {
        GdStep::Fixed(eta) if eta > 0.0 && eta.is_finite() => eta,
        GdStep::Fixed(eta) => {
            return Err(CrsError::InvalidConfig(format!("step size must be positive, got {eta}")));
        }
        GdStep::Auto => {
            let beta = spectral_upper_bound(&p.op, cfg.power_iters.max(1), cfg.seed)?;
            bd.shift = p.op.matvec_count() - start;
            1.0 / (4.0 * (beta + p.rho * sigma_upper_bound(-beta, p.rho, b_norm)))
        }
    };

    let mut x = vec![0.0; n];
    let mut ax = vec![0.0; n];
    let mut trajectory = Vec::new();
    let mut flags = SolveFlags {
        eigen_converged: true,
        linear_solve_converged: true,
        ..SolveFlags::default()
    };
    let mut iterations = 0;
    let mut prev_f = 0.0;
    let mut streak = 0;
    loop {
        let g = gradient_from_ax(&p.b, p.rho, &x, &ax);
        let gn = vecops::norm(&g);
        let f = model_value(&p.b, p.rho, &x, &ax);
        trajectory.push(TrajectoryPoint {
            budget_matvecs: p.op.matvec_count() - start,
            grad_norm: gn,
            objective: f,
        });
        if !f.is_finite() || !gn.is_finite() {
            flags.diverged = true;
            break;
        }
        if iterations > 0 {
            streak = if f > prev_f { streak + 1 } else { 0 };
            if streak >= DIVERGENCE_STREAK {
                flags.diverged = true;
                break;
            }
        }
        prev_f = f;
        if gn <= cfg.grad_tol || iterations >= cfg.max_iters {
            break;
        }
        if cfg.budget.is_some_and(|budget| p.op.matvec_count() - start >= budget) {
            flags.budget_exhausted = true;
            break;
        }
        vecops::axpy(-eta, &g, &mut x);
        p.op.apply_into(&x, &mut ax);
        bd.other += 1;
        iterations += 1;
    }

    let sigma = p.rho * vecops::norm(&x);
    flags.converged = !flags.diverged;
    Ok(p.finish(Finish {
        solver: "gd",
        x,
        ax: &ax,
        sigma,
        breakdown: bd,
        inner_iterations: iterations,
        trajectory,
        flags,
        lambda1_estimate: None,
        mu: None,
    }))
}
