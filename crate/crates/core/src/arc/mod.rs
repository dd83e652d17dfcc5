//! Adaptive regularization with cubics: an outer loop that minimizes a
//! smooth function through repeated cubic subproblem solves, adjusting the
//! regularization weight by the ratio of actual to predicted decrease.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crs::{
    cauchy_point, solve_asem, solve_exact, solve_gd, solve_krylov, AsemConfig, CrsError, CrsProblem, EigenSource,
    GdConfig, KrylovConfig,
};
use crate::operators::{smallest_eigenpairs, EigenConfig, OperatorError, SymmetricOperator};
use crate::vecops;

/// Predicted decreases below this fraction of `max(1, |f|)` count as no
/// decrease at all.
pub const MODEL_DECREASE_GUARD: f64 = 1e-14;

/// A twice-differentiable function given by value, gradient and
/// Hessian-vector products.
pub trait SmoothObjective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Writes `H(x) v` into `out`.
    fn hessian_vec(&self, x: &[f64], v: &[f64], out: &mut [f64]);
    /// Exact `tr H(x)` if cheaply available.
    fn hessian_trace(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

#[derive(Debug, Error)]
pub enum ArcError {
    #[error("invalid ARC configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite objective or gradient at iteration {iteration} ({value})")]
    NonFinite { iteration: usize, value: f64 },
    #[error("starting point has dimension {got}, objective has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("subproblem solve failed at iteration {iteration}: {source}")]
    Subsolver {
        iteration: usize,
        #[source]
        source: CrsError,
    },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Thick restarts given to the Lanczos phase of [`Subsolver::asem`]. A
/// single cycle often leaves the smallest Ritz value of a widely spread
/// Hessian too high, and the resulting shift fails to make `H + sigma I`
/// positive definite.
pub const ARC_LANCZOS_RESTARTS: usize = 20;

/// Subproblem solver used at every ARC iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Subsolver {
    /// The Cauchy point alone.
    Cauchy,
    Gd(GdConfig),
    Krylov(KrylovConfig),
    Asem(AsemConfig),
    /// Full eigendecomposition of the Hessian (small problems only).
    Exact,
}

impl Subsolver {
    pub fn asem(m: usize) -> Self {
        Subsolver::Asem(AsemConfig {
            m,
            eigen: EigenSource::Lanczos(EigenConfig {
                restarts: ARC_LANCZOS_RESTARTS,
                ..EigenConfig::default()
            }),
            ..AsemConfig::default()
        })
    }

    pub fn label(&self) -> String {
        match self {
            Subsolver::Cauchy => "cauchy".into(),
            Subsolver::Gd(_) => "gd".into(),
            Subsolver::Krylov(c) => format!("krylov(k={})", c.k),
            Subsolver::Asem(c) => format!("asem(m={})", c.m),
            Subsolver::Exact => "exact".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArcConfig {
    /// Growth factors of `rho`, `gamma2 >= gamma1 > 1`.
    pub gamma1: f64,
    pub gamma2: f64,
    /// Acceptance thresholds, `1 > eta2 >= eta1 > 0`.
    pub eta1: f64,
    pub eta2: f64,
    pub rho0: f64,
    pub rho_min: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub subsolver: Subsolver,
    /// Seed for the final smallest-eigenvalue estimate.
    pub seed: u64,
}

impl Default for ArcConfig {
    fn default() -> Self {
        Self {
            gamma1: 2.0,
            gamma2: 2.0,
            eta1: 0.1,
            eta2: 0.9,
            rho0: 1e3,
            rho_min: 1e-8,
            max_iters: 200,
            grad_tol: 1e-6,
            subsolver: Subsolver::asem(1),
            seed: 0,
        }
    }
}

impl ArcConfig {
    pub fn new(subsolver: Subsolver) -> Self {
        Self {
            subsolver,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ArcError> {
        let bad = |msg: String| Err(ArcError::InvalidConfig(msg));
        if !(self.gamma1 > 1.0 && self.gamma2 >= self.gamma1 && self.gamma2.is_finite()) {
            return bad(format!("need gamma2 >= gamma1 > 1, got {} and {}", self.gamma1, self.gamma2));
        }
        if !(self.eta1 > 0.0 && self.eta2 >= self.eta1 && self.eta2 < 1.0) {
            return bad(format!("need 1 > eta2 >= eta1 > 0, got {} and {}", self.eta1, self.eta2));
        }
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return bad(format!("rho0 must be positive, got {}", self.rho0));
        }
        if !(self.rho_min > 0.0 && self.rho_min <= self.rho0) {
            return bad(format!("need 0 < rho_min <= rho0, got {}", self.rho_min));
        }
        if !(self.grad_tol >= 0.0) {
            return bad(format!("grad_tol must be non-negative, got {}", self.grad_tol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Subsolver,
    /// The Cauchy point had the lower model value.
    Cauchy,
    /// The subsolver reported a hard case.
    CauchyFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    VerySuccessful,
    Successful,
    Unsuccessful,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcIteration {
    pub iter: usize,
    pub rho: f64,
    /// `NaN` when the predicted decrease was too small or the trial value
    /// not finite.
    pub kappa: f64,
    pub accepted: bool,
    pub branch: Branch,
    pub rho_next: f64,
    /// Objective and gradient norm at the iterate the step started from.
    pub f: f64,
    pub grad_norm: f64,
    pub f_trial: f64,
    pub step: StepKind,
    pub step_norm: f64,
    pub model_value: f64,
    pub cauchy_model_value: f64,
    /// Hessian-vector products spent on this iteration.
    pub matvecs: u64,
    pub subsolver_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinEigEstimate {
    pub value: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcReport {
    pub subsolver: String,
    pub x_out: Vec<f64>,
    pub f_out: f64,
    pub grad_norm_out: f64,
    pub min_hess_eig_estimate: Option<MinEigEstimate>,
    pub iterations: usize,
    pub converged: bool,
    /// A non-finite gradient or regularization weight stopped the run.
    pub diverged: bool,
    pub total_matvecs: u64,
    pub log: Vec<ArcIteration>,
}

impl ArcReport {
    pub fn iteration_csv(&self) -> String {
        let mut out = String::from("iter,rho,kappa,accepted,f,grad_norm,matvecs\n");
        for it in &self.log {
            out.push_str(&format!(
                "{},{:e},{:e},{},{:e},{:e},{}\n",
                it.iter, it.rho, it.kappa, it.accepted, it.f, it.grad_norm, it.matvecs
            ));
        }
        out
    }
}

fn hessian_operator<'a>(obj: &'a dyn SmoothObjective, x: &[f64]) -> SymmetricOperator<'a> {
    let xc = x.to_vec();
    let trace = obj.hessian_trace(x);
    let op = SymmetricOperator::from_fn(obj.dim(), move |v, out| obj.hessian_vec(&xc, v, out));
    match trace {
        Some(t) => op.with_trace(t),
        None => op,
    }
}

struct Trial {
    step: Vec<f64>,
    model: f64,
    kind: StepKind,
    converged: bool,
}

fn subproblem_step(p: &CrsProblem<'_>, sub: &Subsolver, iteration: usize) -> Result<(Trial, f64), ArcError> {
    let wrap = |source| ArcError::Subsolver { iteration, source };
    let cp = cauchy_point(p).map_err(wrap)?;
    let solved = match sub {
        Subsolver::Cauchy => None,
        Subsolver::Gd(c) => Some(solve_gd(p, c)),
        Subsolver::Krylov(c) => Some(solve_krylov(p, &KrylovConfig { k: c.k.min(p.dim()), ..c.clone() })),
        Subsolver::Asem(c) => Some(solve_asem(p, &AsemConfig { m: c.m.min(p.dim()), ..c.clone() })),
        Subsolver::Exact => Some(solve_exact(p)),
    };
    let cauchy = |kind| Trial {
        model: cp.model_value,
        step: cp.x.clone(),
        kind,
        converged: true,
    };
    let trial = match solved {
        None => cauchy(StepKind::Cauchy),
        Some(Err(e)) if e.is_hard_case() => cauchy(StepKind::CauchyFallback),
        Some(Err(e)) => return Err(wrap(e)),
        Some(Ok(r)) => {
            // keep the subsolver step only if its model value is strictly lower
            if cp.model_value <= r.objective || !r.objective.is_finite() {
                Trial {
                    converged: r.flags.converged,
                    ..cauchy(StepKind::Cauchy)
                }
            } else {
                Trial {
                    model: r.objective,
                    converged: r.flags.converged,
                    step: r.x,
                    kind: StepKind::Subsolver,
                }
            }
        }
    };
    Ok((trial, cp.model_value))
}

/// Minimizes `obj` from `x0`. Each iteration solves the cubic model at the
/// current point with the configured subsolver, keeps the Cauchy point when
/// that has the lower model value, and accepts the step iff
/// `kappa = (f(x) - f(x + s)) / (-m(s)) >= eta1`. `rho` is divided by
/// `gamma1` on very successful steps (down to `rho_min`), kept on
/// successful ones and multiplied by `gamma2` otherwise.
pub fn arc_minimize(obj: &dyn SmoothObjective, x0: &[f64], cfg: &ArcConfig) -> Result<ArcReport, ArcError> {
    cfg.validate()?;
    let n = obj.dim();
    if x0.len() != n {
        return Err(ArcError::DimensionMismatch { expected: n, got: x0.len() });
    }
    let mut x = x0.to_vec();
    let mut f = obj.value(&x);
    if !f.is_finite() {
        return Err(ArcError::NonFinite { iteration: 0, value: f });
    }
    let mut g = obj.gradient(&x);
    let mut gn = vecops::norm(&g);
    let mut rho = cfg.rho0;
    let mut log = Vec::new();
    let mut total_matvecs = 0;
    let mut iterations = 0;

    if !gn.is_finite() {
        return Err(ArcError::NonFinite { iteration: 0, value: gn });
    }
    let mut diverged = false;
    while gn > cfg.grad_tol && iterations < cfg.max_iters {
        let op = hessian_operator(obj, &x);
        let p = CrsProblem::new(op, g.clone(), rho).map_err(|source| ArcError::Subsolver {
            iteration: iterations,
            source,
        })?;
        let (trial, cauchy_model) = subproblem_step(&p, &cfg.subsolver, iterations)?;
        let matvecs = p.op.matvec_count();
        total_matvecs += matvecs;

        let x_trial: Vec<f64> = x.iter().zip(&trial.step).map(|(a, s)| a + s).collect();
        let f_trial = obj.value(&x_trial);
        let decrease = -trial.model;
        let kappa = if decrease < MODEL_DECREASE_GUARD * f.abs().max(1.0) || !f_trial.is_finite() {
            f64::NAN
        } else {
            (f - f_trial) / decrease
        };
        let accepted = kappa >= cfg.eta1;
        let (branch, rho_next) = if kappa >= cfg.eta2 {
            (Branch::VerySuccessful, (rho / cfg.gamma1).max(cfg.rho_min))
        } else if accepted {
            (Branch::Successful, rho)
        } else {
            (Branch::Unsuccessful, cfg.gamma2 * rho)
        };
        log.push(ArcIteration {
            iter: iterations,
            rho,
            kappa,
            accepted,
            branch,
            rho_next,
            f,
            grad_norm: gn,
            f_trial,
            step: trial.kind,
            step_norm: vecops::norm(&trial.step),
            model_value: trial.model,
            cauchy_model_value: cauchy_model,
            matvecs,
            subsolver_converged: trial.converged,
        });
        if accepted {
            x = x_trial;
            f = f_trial;
            g = obj.gradient(&x);
            gn = vecops::norm(&g);
        }
        rho = rho_next;
        iterations += 1;
        if !gn.is_finite() || !rho.is_finite() {
            diverged = true;
            break;
        }
    }

    let min_eig = min_hessian_eig(obj, &x, 1e-8, cfg.seed).ok();
    Ok(ArcReport {
        subsolver: cfg.subsolver.label(),
        converged: !diverged && gn <= cfg.grad_tol,
        diverged,
        x_out: x,
        f_out: f,
        grad_norm_out: gn,
        min_hess_eig_estimate: min_eig,
        iterations,
        total_matvecs,
        log,
    })
}

/// Smallest Hessian eigenvalue at `x` by shifted Lanczos with `m = 1`.
/// Thick restarts continue until the Ritz residual drops below `tol`
/// relative to the shift or the restart allowance runs out, in which case
/// the estimate is returned unconverged.
pub fn min_hessian_eig(obj: &dyn SmoothObjective, x: &[f64], tol: f64, seed: u64) -> Result<MinEigEstimate, ArcError> {
    let op = hessian_operator(obj, x);
    let spectrum = smallest_eigenpairs(
        &op,
        1,
        &EigenConfig {
            restarts: 200,
            tol,
            seed,
            ..EigenConfig::default()
        },
    )?;
    Ok(MinEigEstimate {
        value: spectrum.eigenvalues[0],
        converged: spectrum.converged,
    })
}
