//! Budget-matched solver comparisons over families of instances.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::crs::{
    bound_check, cauchy_point, solve_asem, solve_exact, solve_gd, solve_krylov, AsemConfig, CrsProblem, EigenSource,
    GdConfig, KrylovConfig, SolveReport, TrajectoryPoint,
};
use crate::operators::{EigenConfig, DEFAULT_ORACLE_CAP};
use crate::problems::{
    gen_instance, BDirection, InstanceFile, InstanceSpec, RhoRule, SpectrumCase, SpectrumSpec,
};
use crate::secular::{ModelOrder, MuRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Exp1,
    Exp2,
    Exp3,
    Exp4,
    Exp6,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum InstanceSource {
    Generate { spec: InstanceSpec },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceEntry {
    pub label: String,
    #[serde(flatten)]
    pub source: InstanceSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SolverChoice {
    Asem(AsemConfig),
    Krylov(KrylovConfig),
    Gd(GdConfig),
    Exact,
    Cauchy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverEntry {
    /// Defaults to a description of the solver parameters.
    #[serde(default)]
    pub label: Option<String>,
    pub solver: SolverChoice,
}

impl SolverEntry {
    pub fn new(solver: SolverChoice) -> Self {
        Self { label: None, solver }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| match &self.solver {
            SolverChoice::Asem(c) => format!("asem-m{}", c.m),
            SolverChoice::Krylov(c) => format!("krylov-k{}", c.k),
            SolverChoice::Gd(_) => "gd".into(),
            SolverChoice::Exact => "exact".into(),
            SolverChoice::Cauchy => "cauchy".into(),
        })
    }

    /// Semicolon-separated parameter summary for the CSV `params` column.
    pub fn params(&self) -> String {
        match &self.solver {
            SolverChoice::Asem(c) => {
                let eigen = match &c.eigen {
                    EigenSource::Oracle => "oracle".to_string(),
                    EigenSource::Lanczos(e) => format!(
                        "lanczos(k={};restarts={})",
                        e.krylov_dim.map_or("auto".into(), |k| k.to_string()),
                        e.restarts
                    ),
                };
                format!("m={};order={};mu={};eigen={eigen}", c.m, order_name(c.order), mu_name(c.mu_rule))
            }
            SolverChoice::Krylov(c) => format!("k={}", c.k),
            SolverChoice::Gd(c) => match c.step {
                crate::crs::GdStep::Auto => format!("step=auto;max_iters={}", c.max_iters),
                crate::crs::GdStep::Fixed(s) => format!("step={s};max_iters={}", c.max_iters),
            },
            SolverChoice::Exact | SolverChoice::Cauchy => String::new(),
        }
    }
}

pub fn order_name(o: ModelOrder) -> &'static str {
    match o {
        ModelOrder::Exact => "exact",
        ModelOrder::FirstOrder => "1",
        ModelOrder::SecondOrder => "2",
    }
}

pub fn mu_name(r: MuRule) -> String {
    match r {
        MuRule::Auto => "auto".into(),
        MuRule::Mean => "mu1".into(),
        MuRule::Weighted => "mu2".into(),
        MuRule::LargestKnown => "lambda_m".into(),
        MuRule::Fixed(v) => format!("const:{v}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub instances: Vec<InstanceEntry>,
    pub solvers: Vec<SolverEntry>,
    /// Shared matvec budget per solve.
    pub budget: u64,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `None` uses the available parallelism.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.solvers.is_empty() {
            return Err(CliError::Usage("experiment needs at least one solver".into()));
        }
        if self.instances.is_empty() {
            return Err(CliError::Usage("experiment needs at least one instance".into()));
        }
        if self.budget == 0 {
            return Err(CliError::Usage("budget must be positive".into()));
        }
        Ok(())
    }
}

/// `m` values used by the presets: `{10, 20, 50, 100, 200, 500, 1000}`
/// restricted to `m < n`.
pub fn m_grid(n: usize) -> Vec<usize> {
    [10, 20, 50, 100, 200, 500, 1000].into_iter().filter(|&m| m < n).collect()
}

fn spec(case: SpectrumCase, n: usize, dir: BDirection, b_norm: f64, rho: RhoRule, seed: u64) -> InstanceSpec {
    InstanceSpec {
        spectrum: SpectrumSpec { case, n },
        b_direction: dir,
        b_norm,
        rho_rule: rho,
        seed,
    }
}

fn generated(label: &str, spec: InstanceSpec) -> InstanceEntry {
    InstanceEntry {
        label: label.into(),
        source: InstanceSource::Generate { spec },
    }
}

fn asem(m: usize, order: ModelOrder, mu: MuRule, seed: u64) -> AsemConfig {
    AsemConfig {
        m,
        order,
        mu_rule: mu,
        eigen: EigenSource::Lanczos(EigenConfig {
            seed,
            ..EigenConfig::default()
        }),
        seed,
        ..AsemConfig::default()
    }
}

/// Built-in experiment definitions at dimension `n` (the published runs
/// use `n = 5000`).
pub fn preset(id: ExperimentId, n: usize, seed: u64, budget: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let fixed = RhoRule::Fixed(0.1);
    let ones = BDirection::AllOnes;
    let first = ModelOrder::FirstOrder;
    let grid = m_grid(n);
    let asem_grid = |order, mu| -> Vec<SolverEntry> {
        grid.iter()
            .map(|&m| SolverEntry::new(SolverChoice::Asem(asem(m, order, mu, seed))))
            .collect()
    };
    let (instances, solvers) = match id {
        ExperimentId::Exp1 => {
            let cases = [
                ("case1-evenly-spaced", SpectrumCase::EvenlySpaced),
                ("case2-separated", SpectrumCase::Separated),
                ("case3-right-centered", SpectrumCase::RightCentered),
                ("case4-left-centered", SpectrumCase::LeftCentered),
            ];
            let inst = cases
                .into_iter()
                .map(|(l, c)| generated(l, spec(c, n, ones.clone(), 0.1, fixed, seed)))
                .collect();
            (inst, asem_grid(first, MuRule::Mean))
        }
        ExperimentId::Exp2 => {
            let inst = vec![generated(
                "case1-b-proportional",
                spec(SpectrumCase::EvenlySpaced, n, BDirection::EigenvalueProportional, 0.1, fixed, seed),
            )];
            let mut solvers = Vec::new();
            for (tag, order, mu) in [
                ("mu1", first, MuRule::Mean),
                ("mu2", ModelOrder::SecondOrder, MuRule::Weighted),
                ("lambda_m", first, MuRule::LargestKnown),
                ("mu1e6", first, MuRule::Fixed(1e6)),
            ] {
                for &m in &grid {
                    solvers.push(SolverEntry {
                        label: Some(format!("asem-{tag}-m{m}")),
                        solver: SolverChoice::Asem(asem(m, order, mu, seed)),
                    });
                }
            }
            (inst, solvers)
        }
        ExperimentId::Exp3 => {
            let inst = vec![generated(
                "case1",
                spec(SpectrumCase::EvenlySpaced, n, ones, 0.1, fixed, seed),
            )];
            let mut solvers = Vec::new();
            for &m in &grid {
                let mut lanczos = asem(m, first, MuRule::Mean, seed);
                lanczos.eigen = EigenSource::Lanczos(EigenConfig {
                    krylov_dim: Some(m),
                    restarts: 0,
                    seed,
                    ..EigenConfig::default()
                });
                solvers.push(SolverEntry {
                    label: Some(format!("asem-lanczos-m{m}")),
                    solver: SolverChoice::Asem(lanczos),
                });
                let oracle = AsemConfig {
                    eigen: EigenSource::Oracle,
                    ..asem(m, first, MuRule::Mean, seed)
                };
                solvers.push(SolverEntry {
                    label: Some(format!("asem-oracle-m{m}")),
                    solver: SolverChoice::Asem(oracle),
                });
            }
            (inst, solvers)
        }
        ExperimentId::Exp4 => {
            let inst = [("kappa1e3", 1e3), ("kappa1e6", 1e6)]
                .into_iter()
                .map(|(l, k)| {
                    generated(l, spec(SpectrumCase::EvenlySpaced, n, ones.clone(), 0.1, RhoRule::ConditionNumber(k), seed))
                })
                .collect();
            let mut solvers = asem_grid(first, MuRule::Mean);
            for &k in &grid {
                solvers.push(SolverEntry::new(SolverChoice::Krylov(KrylovConfig {
                    k,
                    ..KrylovConfig::default()
                })));
            }
            solvers.push(SolverEntry::new(SolverChoice::Gd(GdConfig {
                max_iters: usize::MAX,
                seed,
                ..GdConfig::default()
            })));
            (inst, solvers)
        }
        ExperimentId::Exp6 => {
            let inst = [1.0, 0.5, 0.2, 0.1, 0.05, 0.01]
                .into_iter()
                .map(|bn| generated(&format!("bnorm{bn}"), spec(SpectrumCase::EvenlySpaced, n, ones.clone(), bn, fixed, seed)))
                .collect();
            let mut solvers = asem_grid(first, MuRule::Mean);
            solvers.push(SolverEntry::new(SolverChoice::Gd(GdConfig {
                max_iters: usize::MAX,
                seed,
                ..GdConfig::default()
            })));
            (inst, solvers)
        }
        ExperimentId::Custom => {
            return Err(CliError::Usage("the custom experiment needs a --config file".into()));
        }
    };
    Ok(ExperimentConfig {
        experiment: id,
        instances,
        solvers,
        budget: budget.unwrap_or(4 * n as u64),
        seed,
        threads: None,
    })
}

/// One (instance, solver) result.
#[derive(Debug, Clone)]
pub struct Cell {
    pub instance: String,
    pub solver: String,
    pub params: String,
    pub outcome: Result<SolveReport, String>,
    pub wall_time_ms: f64,
    pub bound: Option<BoundRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub m: usize,
    pub order: ModelOrder,
    pub mu: f64,
    pub gap_cap: f64,
    pub observed_gap: f64,
    pub oracle_truncated_gap: f64,
}

fn load_instance(entry: &InstanceEntry) -> Result<InstanceFile, CliError> {
    match &entry.source {
        InstanceSource::Generate { spec } => Ok(InstanceFile::from(&gen_instance(spec)?)),
        InstanceSource::File { path } => super::read_json(path),
    }
}

/// Applies the shared budget to a solver configuration.
fn run_solver(p: &CrsProblem<'_>, choice: &SolverChoice, budget: u64) -> Result<SolveReport, String> {
    let n = p.dim();
    let out = match choice {
        SolverChoice::Asem(c) => solve_asem(
            p,
            &AsemConfig {
                budget: Some(c.budget.map_or(budget, |b| b.min(budget))),
                ..c.clone()
            },
        ),
        SolverChoice::Krylov(c) => {
            let cap = (budget.saturating_sub(1) as usize).max(1).min(n);
            solve_krylov(p, &KrylovConfig { k: c.k.min(cap), ..c.clone() })
        }
        SolverChoice::Gd(c) => solve_gd(
            p,
            &GdConfig {
                budget: Some(c.budget.map_or(budget, |b| b.min(budget))),
                ..c.clone()
            },
        ),
        SolverChoice::Exact => solve_exact(p),
        SolverChoice::Cauchy => return cauchy_report(p).map_err(|e| e.to_string()),
    };
    out.map_err(|e| e.to_string())
}

fn cauchy_report(p: &CrsProblem<'_>) -> Result<SolveReport, crate::crs::CrsError> {
    let cp = cauchy_point(p)?;
    let grad = p.gradient(&cp.x)?;
    let gn = crate::vecops::norm(&grad);
    let matvecs = p.op.matvec_count();
    Ok(SolveReport {
        solver: "cauchy".into(),
        sigma: p.rho * crate::vecops::norm(&cp.x),
        grad_norm: gn,
        objective: cp.model_value,
        matvecs,
        matvec_breakdown: crate::crs::MatvecBreakdown {
            other: matvecs,
            ..Default::default()
        },
        inner_iterations: 0,
        trajectory: vec![TrajectoryPoint {
            budget_matvecs: matvecs,
            grad_norm: gn,
            objective: cp.model_value,
        }],
        flags: Default::default(),
        sigma_consistency_gap: 0.0,
        residual_norm: f64::NAN,
        lambda1_estimate: None,
        mu: None,
        b_norm: p.b_norm(),
        x: cp.x,
    })
}

/// Runs every (instance, solver) cell, in parallel when allowed. Cells are
/// returned in (instance, solver) order regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<Cell>, CliError> {
    cfg.validate()?;
    let files: Vec<InstanceFile> = cfg.instances.iter().map(load_instance).collect::<Result<_, _>>()?;
    // exact roots for the bound diagnostics, one per diagonal instance
    let sigma_star: Vec<Option<f64>> = files
        .iter()
        .map(|f| match f {
            InstanceFile::Diagonal { .. } => f.problem().ok().and_then(|p| solve_exact(&p).ok()).map(|r| r.sigma),
            InstanceFile::Dense { .. } => None,
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..files.len())
        .flat_map(|i| (0..cfg.solvers.len()).map(move |j| (i, j)))
        .collect();
    let threads = cfg
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |t| t.get()))
        .clamp(1, jobs.len().max(1));
    let next = Mutex::new(0usize);
    let results = Mutex::new(BTreeMap::new());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let k = {
                    let mut g = next.lock().unwrap();
                    if *g >= jobs.len() {
                        return;
                    }
                    *g += 1;
                    *g - 1
                };
                let (i, j) = jobs[k];
                let cell = run_cell(cfg, &cfg.instances[i], &files[i], sigma_star[i], &cfg.solvers[j]);
                results.lock().unwrap().insert(k, cell);
            });
        }
    });
    Ok(results.into_inner().unwrap().into_values().collect())
}

fn run_cell(
    cfg: &ExperimentConfig,
    entry: &InstanceEntry,
    file: &InstanceFile,
    sigma_star: Option<f64>,
    solver: &SolverEntry,
) -> Cell {
    let start = Instant::now();
    let outcome = file
        .problem()
        .map_err(|e| e.to_string())
        .and_then(|p| run_solver(&p, &solver.solver, cfg.budget));
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    let bound = match (&solver.solver, &outcome, sigma_star) {
        (SolverChoice::Asem(c), Ok(r), Some(s)) if c.m < file.dim() && r.mu.is_some() => {
            let p = file.problem().ok();
            p.and_then(|p| {
                let order = c.order;
                let chk = bound_check(&p, c.m, order, MuRule::Fixed(r.mu?), DEFAULT_ORACLE_CAP).ok()?;
                Some(BoundRow {
                    m: c.m,
                    order,
                    mu: chk.mu,
                    gap_cap: chk.bound.gap_cap,
                    observed_gap: (r.sigma - s).abs(),
                    oracle_truncated_gap: chk.observed_gap,
                })
            })
        }
        _ => None,
    };
    Cell {
        instance: entry.label.clone(),
        solver: solver.label(),
        params: solver.params(),
        outcome,
        wall_time_ms,
        bound,
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

pub fn summary_csv(cells: &[Cell]) -> String {
    let mut out =
        String::from("instance,solver,params,final_grad_norm,final_objective,matvecs,wall_time_ms,status\n");
    for c in cells {
        let (g, f, mv, status) = match &c.outcome {
            Ok(r) => (format!("{:e}", r.grad_norm), format!("{:e}", r.objective), r.matvecs.to_string(), "ok".to_string()),
            Err(e) => (String::new(), String::new(), String::new(), format!("error: {}", e.replace([',', '\n'], ";"))),
        };
        out.push_str(&format!(
            "{},{},{},{g},{f},{mv},{:.3},{status}\n",
            c.instance, c.solver, c.params, c.wall_time_ms
        ));
    }
    out
}

pub fn bounds_csv(cells: &[Cell]) -> String {
    let mut out = String::from("instance,solver,m,order,mu,gap_cap,observed_gap,oracle_truncated_gap\n");
    for c in cells {
        if let Some(b) = &c.bound {
            out.push_str(&format!(
                "{},{},{},{},{:e},{:e},{:e},{:e}\n",
                c.instance,
                c.solver,
                b.m,
                order_name(b.order),
                b.mu,
                b.gap_cap,
                b.observed_gap,
                b.oracle_truncated_gap
            ));
        }
    }
    out
}

/// Writes `summary.csv`, `bounds.csv` and one trajectory CSV per
/// successful cell into `dir`.
pub fn write_outputs(dir: &Path, cells: &[Cell]) -> Result<(), CliError> {
    super::create_dir(dir)?;
    super::write_text(&dir.join("summary.csv"), &summary_csv(cells))?;
    super::write_text(&dir.join("bounds.csv"), &bounds_csv(cells))?;
    for c in cells {
        if let Ok(r) = &c.outcome {
            let name = format!("{}__{}.csv", sanitize(&c.instance), sanitize(&c.solver));
            super::write_text(&dir.join(name), &r.trajectory_csv())?;
        }
    }
    Ok(())
}
