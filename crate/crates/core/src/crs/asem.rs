//! The approximate secular equation method.
//!
//! 1. estimate the m smallest eigenpairs of `A` (shifted Lanczos, or an
//!    exact oracle for experiments);
//! 2. solve the truncated secular equation for `sigma`;
//! 3. solve `(A + sigma I) x = -b` by conjugate gradients.

use serde::{Deserialize, Serialize};

use super::{full_spectrum, CrsError, CrsProblem, Finish, MatvecBreakdown, SolveFlags, SolveReport, TrajectoryPoint};
use crate::operators::{
    hutchinson_trace, shift_seed, shifted_cg, smallest_eigenpairs_shifted, spectral_upper_bound, EigenConfig,
    DEFAULT_ORACLE_CAP,
};
use crate::secular::{build_model, find_root, ModelInputs, ModelOrder, MuRule, RootConfig};
use crate::vecops;

/// `c_1^2 / ||b||^2` below which the report warns about a near hard case.
const HARD_CASE_WARNING: f64 = 1e-10;

/// Where the m smallest eigenpairs come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EigenSource {
    Lanczos(EigenConfig),
    /// Exact eigenpairs from a full decomposition (diagonal, or dense up to
    /// the oracle cap). Intended for experiments that isolate the secular
    /// approximation from eigensolver error.
    Oracle,
}

impl Default for EigenSource {
    fn default() -> Self {
        EigenSource::Lanczos(EigenConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AsemConfig {
    /// Number of known eigenpairs.
    pub m: usize,
    pub order: ModelOrder,
    pub mu_rule: MuRule,
    pub eigen: EigenSource,
    pub root: RootConfig,
    /// Relative residual target of the final linear solve.
    pub cg_tol: f64,
    /// CG iteration cap; `None` means `10 n + 100`.
    pub cg_max_iter: Option<usize>,
    /// Total matvec budget; CG stops early to respect it.
    pub budget: Option<u64>,
    /// Rademacher probes when the trace has to be estimated.
    pub trace_probes: usize,
    pub seed: u64,
    pub oracle_cap: usize,
}

impl Default for AsemConfig {
    fn default() -> Self {
        Self {
            m: 10,
            order: ModelOrder::FirstOrder,
            mu_rule: MuRule::Auto,
            eigen: EigenSource::default(),
            root: RootConfig::default(),
            cg_tol: 1e-10,
            cg_max_iter: None,
            budget: None,
            trace_probes: 30,
            seed: 0,
            oracle_cap: DEFAULT_ORACLE_CAP,
        }
    }
}

struct KnownPart {
    eigs: Vec<f64>,
    coeffs: Vec<f64>,
    converged: bool,
}

fn known_part(p: &CrsProblem<'_>, m: usize, cfg: &AsemConfig, bd: &mut MatvecBreakdown) -> Result<KnownPart, CrsError> {
    let n = p.dim();
    let op = &p.op;
    match &cfg.eigen {
        EigenSource::Oracle => {
            let c0 = op.matvec_count();
            let spec = full_spectrum(op, cfg.oracle_cap)?;
            bd.eigen += op.matvec_count() - c0;
            let mut coeffs = spec.coefficients(&p.b);
            coeffs.truncate(m);
            Ok(KnownPart {
                eigs: spec.values[..m].to_vec(),
                coeffs,
                converged: true,
            })
        }
        EigenSource::Lanczos(ec) => {
            let c0 = op.matvec_count();
            let beta = spectral_upper_bound(op, ec.power_iters.max(1), shift_seed(ec.seed))?;
            let c1 = op.matvec_count();
            bd.shift += c1 - c0;
            let mut ec = ec.clone();
            if m == n {
                ec.krylov_dim = Some(n);
            }
            let spec = smallest_eigenpairs_shifted(op, m, &ec, beta)?;
            bd.eigen += op.matvec_count() - c1;
            let coeffs = spec.eigenvectors.iter().map(|v| -vecops::dot(&p.b, v)).collect();
            Ok(KnownPart {
                eigs: spec.eigenvalues,
                coeffs,
                converged: spec.converged,
            })
        }
    }
}

/// Runs the three ASEM steps and reports the result with a matvec
/// breakdown. With `m >= n` every eigenvalue is known and the exact secular
/// equation is used.
pub fn solve_asem(p: &CrsProblem<'_>, cfg: &AsemConfig) -> Result<SolveReport, CrsError> {
    let n = p.dim();
    if cfg.m == 0 {
        return Err(CrsError::InvalidConfig("m must be at least 1".into()));
    }
    if !(cfg.cg_tol > 0.0) {
        return Err(CrsError::InvalidConfig(format!("cg_tol must be positive, got {}", cfg.cg_tol)));
    }
    let m = if cfg.order == ModelOrder::Exact { n } else { cfg.m.min(n) };
    let op = &p.op;
    let start = op.matvec_count();
    let b_norm = p.b_norm();
    let mut bd = MatvecBreakdown::default();
    let mut flags = SolveFlags::default();

    let known = known_part(p, m, cfg, &mut bd)?;
    let m = known.eigs.len();
    flags.eigen_converged = known.converged;

    let exact = m == n;
    let order = if exact { ModelOrder::Exact } else { cfg.order };
    let rule = match (cfg.mu_rule, order) {
        (MuRule::Auto, ModelOrder::SecondOrder) => MuRule::Weighted,
        (MuRule::Auto, _) => MuRule::Mean,
        (r, _) => r,
    };
    let c0 = op.matvec_count();
    let mut inputs = ModelInputs {
        n,
        ..ModelInputs::default()
    };
    if !exact && rule == MuRule::Mean {
        inputs.trace = Some(match op.trace_hint() {
            Some(t) => t,
            None => {
                flags.trace_estimated = true;
                hutchinson_trace(op, cfg.trace_probes.max(1), cfg.seed ^ 0x7ace)
            }
        });
    }
    if !exact && (order == ModelOrder::SecondOrder || rule == MuRule::Weighted) {
        let ab = op.matvec(&p.b)?;
        inputs.b_quad = Some(vecops::dot(&p.b, &ab));
    }
    bd.model += op.matvec_count() - c0;

    let built = build_model(&known.eigs, &known.coeffs, b_norm, p.rho, order, rule, &inputs)?;
    flags.mu_clamped = built.diagnostics.mu_clamped;
    let c1_sq = known.coeffs[0] * known.coeffs[0];
    flags.hard_case_suspected = b_norm > 0.0 && c1_sq < HARD_CASE_WARNING * b_norm * b_norm;
    let root = find_root(&built.model, &cfg.root)?;
    let sigma = root.sigma;

    let used = op.matvec_count() - start;
    let mut max_iter = cfg.cg_max_iter.unwrap_or(10 * n + 100);
    if let Some(budget) = cfg.budget {
        // keep one matvec for the closing residual check
        let room = budget.saturating_sub(used + 1) as usize;
        if room < max_iter {
            max_iter = room;
            flags.budget_exhausted = true;
        }
    }
    let mut trajectory = Vec::new();
    let rho = p.rho;
    let b = &p.b;
    let mut monitor = |it: &crate::operators::CgIterate<'_>| {
        let xn = vecops::norm(it.x);
        let mut g2 = 0.0;
        let mut xax = 0.0;
        let mut bx = 0.0;
        for i in 0..n {
            let g = it.residual[i] - sigma * it.x[i] + rho * xn * it.x[i];
            g2 += g * g;
            xax += it.x[i] * (it.residual[i] - b[i] - sigma * it.x[i]);
            bx += b[i] * it.x[i];
        }
        trajectory.push(TrajectoryPoint {
            budget_matvecs: used + it.iteration as u64,
            grad_norm: g2.sqrt(),
            objective: bx + 0.5 * xax + rho / 3.0 * xn * xn * xn,
        });
    };
    let (sol, curvature) = shifted_cg(op, sigma, b, cfg.cg_tol, max_iter, &mut monitor)?;
    bd.cg += sol.matvecs;
    flags.indefinite_shift = curvature.is_some();
    flags.linear_solve_converged = sol.converged;
    if sol.converged {
        flags.budget_exhausted = false;
    }
    flags.converged = flags.eigen_converged && sol.converged;

    let mut report = p.finish(Finish {
        solver: "asem",
        x: sol.x,
        ax: &sol.ax,
        sigma,
        breakdown: bd,
        inner_iterations: sol.iterations,
        trajectory,
        flags,
        lambda1_estimate: Some(known.eigs[0]),
        mu: (!exact).then_some(built.model.mu),
    });
    debug_assert_eq!(report.matvecs, op.matvec_count() - start);
    report.trajectory.push(TrajectoryPoint {
        budget_matvecs: report.matvecs,
        grad_norm: report.grad_norm,
        objective: report.objective,
    });
    Ok(report)
}

/// Reruns ASEM with `m` doubled until the gradient norm reaches `grad_tol`
/// or `m` reaches `m_max`. Matvecs and trajectory budgets accumulate across
/// attempts.
pub fn solve_asem_doubling(
    p: &CrsProblem<'_>,
    cfg: &AsemConfig,
    m_max: usize,
    grad_tol: f64,
) -> Result<SolveReport, CrsError> {
    let mut cfg = cfg.clone();
    let cap = m_max.min(p.dim()).max(1);
    cfg.m = cfg.m.clamp(1, cap);
    let mut spent = MatvecBreakdown::default();
    let mut history = Vec::new();
    loop {
        let mut report = solve_asem(p, &cfg)?;
        let offset = spent.total();
        for pt in report.trajectory.iter_mut() {
            pt.budget_matvecs += offset;
        }
        let b = report.matvec_breakdown;
        spent.shift += b.shift;
        spent.eigen += b.eigen;
        spent.model += b.model;
        spent.cg += b.cg;
        spent.other += b.other;
        history.append(&mut report.trajectory);
        if report.grad_norm <= grad_tol || cfg.m >= cap {
            report.matvec_breakdown = spent;
            report.matvecs = spent.total();
            report.trajectory = history;
            return Ok(report);
        }
        cfg.m = (cfg.m * 2).min(cap);
    }
}
