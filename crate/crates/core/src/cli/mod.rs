//! Command-line front end: instance generation, single solves, budget-matched
//! comparisons, ARC runs and bound checks.
//!
//! Exit codes: 0 ok, 1 numerical failure, 2 usage, 3 flagged
//! non-convergence, 4 hard case, 5 divergence.

pub mod compare;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::arc::{arc_minimize, ArcConfig, ArcError, ArcReport, Subsolver};
use crate::crs::{
    bound_check, solve_asem, solve_exact, solve_gd, solve_krylov, AsemConfig, CrsError, EigenSource, GdConfig, GdStep,
    KrylovConfig, SolveReport,
};
use crate::operators::{EigenConfig, DEFAULT_ORACLE_CAP};
use crate::problems::{
    gen_instance, random_orthogonal, rotate_instance, test_problem, InstanceFile, InstanceSpec, ProblemError,
    TestProblemKind,
};
use crate::secular::{ModelOrder, MuRule};
use compare::{preset, run_experiment, write_outputs, ExperimentConfig, ExperimentId};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Crs(#[from] CrsError),
    #[error(transparent)]
    Arc(#[from] ArcError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        fn crs_code(e: &CrsError) -> u8 {
            match e {
                e if e.is_hard_case() => 4,
                CrsError::InvalidConfig(_) | CrsError::InvalidProblem(_) => 2,
                _ => 1,
            }
        }
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Json { .. } => 2,
            CliError::Problem(ProblemError::Crs(e)) | CliError::Crs(e) => crs_code(e),
            CliError::Problem(_) => 2,
            CliError::Arc(ArcError::InvalidConfig(_) | ArcError::DimensionMismatch { .. }) => 2,
            CliError::Arc(ArcError::NonFinite { .. }) => 5,
            CliError::Arc(ArcError::Subsolver { source, .. }) => crs_code(source),
            CliError::Arc(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "asem", version, about = "Cubic-regularization subproblem solvers and experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance file from an instance spec.
    Gen(GenArgs),
    /// Solve one instance and write the report and trajectory.
    Solve(SolveArgs),
    /// Run a budget-matched comparison from a config file or preset.
    Compare(CompareArgs),
    /// Run ARC on a native test problem.
    Arc(ArcArgs),
    /// Compare a truncated root with the exact one and the a-priori cap.
    BoundCheck(BoundCheckArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Instance spec JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file (`.json`) or directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the seed in the spec.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Rotate by a random orthogonal matrix and write a dense instance.
    #[arg(long)]
    pub rotate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverName {
    Exact,
    Asem,
    Krylov,
    Gd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EigenName {
    Lanczos,
    Oracle,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value = "asem")]
    pub solver: SolverName,
    /// Known eigenpairs for ASEM.
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    /// Krylov dimension: subspace size for the Krylov solver, Lanczos
    /// dimension per cycle for ASEM.
    #[arg(long)]
    pub k: Option<usize>,
    /// Secular model order (1 or 2).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub order: u8,
    /// mu1, mu2, lambda_m, auto or const:<float>.
    #[arg(long, default_value = "auto", value_parser = parse_mu)]
    pub mu: MuRule,
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "lanczos")]
    pub eigen: EigenName,
    /// Thick Lanczos restarts for ASEM.
    #[arg(long, default_value_t = 0)]
    pub restarts: usize,
    /// Gradient-descent iterations.
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    /// Fixed gradient-descent step (automatic when absent).
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance file.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Experiment config JSON.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<ExperimentId>,
    /// Problem dimension for presets.
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArcSolverName {
    Cauchy,
    Gd,
    Krylov,
    Asem,
    Exact,
}

#[derive(Debug, Args)]
pub struct ArcArgs {
    /// ChainedRosenbrock, TridiagQuartic, ConvexQuadratic or
    /// NonconvexQuadraticCubic.
    #[arg(long)]
    pub problem: String,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "asem")]
    pub solver: ArcSolverName,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// ARC config JSON; command-line solver flags are ignored when given.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run the subsolver sweep CP, GD, Krylov(k), ASEM(1), ASEM(10).
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoundCheckArgs {
    /// Instance file.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub order: u8,
    #[arg(long, default_value = "auto", value_parser = parse_mu)]
    pub mu: MuRule,
}

pub fn parse_mu(s: &str) -> Result<MuRule, String> {
    match s {
        "auto" => Ok(MuRule::Auto),
        "mu1" => Ok(MuRule::Mean),
        "mu2" => Ok(MuRule::Weighted),
        "lambda_m" => Ok(MuRule::LargestKnown),
        _ => match s.strip_prefix("const:") {
            Some(v) => v
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(MuRule::Fixed)
                .ok_or_else(|| format!("invalid constant in `{s}`")),
            None => Err(format!("unknown mu mode `{s}`; expected mu1, mu2, lambda_m, auto or const:<float>")),
        },
    }
}

fn order_of(o: u8) -> ModelOrder {
    if o == 2 {
        ModelOrder::SecondOrder
    } else {
        ModelOrder::FirstOrder
    }
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    write_text(path, &text)
}

pub(crate) fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

impl SolverArgs {
    pub fn asem_config(&self) -> AsemConfig {
        AsemConfig {
            m: self.m,
            order: order_of(self.order),
            mu_rule: self.mu,
            eigen: match self.eigen {
                EigenName::Oracle => EigenSource::Oracle,
                EigenName::Lanczos => EigenSource::Lanczos(EigenConfig {
                    krylov_dim: self.k,
                    restarts: self.restarts,
                    seed: self.seed,
                    ..EigenConfig::default()
                }),
            },
            budget: self.budget,
            seed: self.seed,
            ..AsemConfig::default()
        }
    }

    pub fn gd_config(&self) -> GdConfig {
        GdConfig {
            max_iters: self.iters,
            step: self.step.map_or(GdStep::Auto, GdStep::Fixed),
            budget: self.budget,
            seed: self.seed,
            ..GdConfig::default()
        }
    }
}

/// Warnings that make `solve` exit with code 3.
fn warning_flags(r: &SolveReport) -> Vec<&'static str> {
    let f = &r.flags;
    let mut out = Vec::new();
    if !f.eigen_converged {
        out.push("eigenpairs not converged");
    }
    if !f.linear_solve_converged {
        out.push("linear solve not converged");
    }
    if f.indefinite_shift {
        out.push("shift left A + sigma I indefinite");
    }
    if f.budget_exhausted {
        out.push("matvec budget exhausted");
    }
    if f.hard_case_suspected {
        out.push("near hard case");
    }
    out
}

fn cmd_gen(a: &GenArgs) -> Result<u8, CliError> {
    let mut spec: InstanceSpec = read_json(&a.config)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let inst = gen_instance(&spec)?;
    let file = if a.rotate {
        let v = random_orthogonal(inst.n(), spec.seed);
        let dense = rotate_instance(&inst.problem()?, &v)?;
        let matrix = dense.op.as_dense().expect("rotation yields a dense operator").clone();
        InstanceFile::from_dense(&matrix, dense.b.clone(), dense.rho)
    } else {
        InstanceFile::from(&inst)
    };
    let path = if a.out.extension().is_some_and(|e| e == "json") {
        if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
            create_dir(parent)?;
        }
        a.out.clone()
    } else {
        create_dir(&a.out)?;
        a.out.join("instance.json")
    };
    write_json(&path, &file)?;
    let (lo, hi) = (inst.eigenvalues[0], inst.eigenvalues[inst.n() - 1]);
    println!(
        "n={} lambda=[{lo}, {hi}] b_norm={:e} rho={:e}{} -> {}",
        inst.n(),
        crate::vecops::norm(&inst.b),
        inst.rho,
        inst.sigma_star.map_or(String::new(), |s| format!(" sigma*={s:e}")),
        path.display()
    );
    Ok(0)
}

fn cmd_solve(a: &SolveArgs) -> Result<u8, CliError> {
    let file: InstanceFile = read_json(&a.config)?;
    let p = file.problem()?;
    let s = &a.solver;
    let report = match s.solver {
        SolverName::Exact => solve_exact(&p)?,
        SolverName::Asem => solve_asem(&p, &s.asem_config())?,
        SolverName::Krylov => solve_krylov(
            &p,
            &KrylovConfig {
                k: s.k.unwrap_or(20).min(p.dim()),
                ..KrylovConfig::default()
            },
        )?,
        SolverName::Gd => solve_gd(&p, &s.gd_config())?,
    };
    create_dir(&a.out)?;
    write_json(&a.out.join("report.json"), &report)?;
    write_text(&a.out.join("trajectory.csv"), &report.trajectory_csv())?;
    println!(
        "solver={} sigma={:e} grad_norm={:e} objective={:e} matvecs={} converged={}",
        report.solver, report.sigma, report.grad_norm, report.objective, report.matvecs, report.flags.converged
    );
    if report.flags.diverged {
        eprintln!("diverged");
        return Ok(5);
    }
    let warnings = warning_flags(&report);
    if !warnings.is_empty() {
        eprintln!("flagged: {}", warnings.join(", "));
        return Ok(3);
    }
    Ok(0)
}

fn cmd_compare(a: &CompareArgs) -> Result<u8, CliError> {
    let mut cfg: ExperimentConfig = match (&a.config, a.preset) {
        (Some(path), _) => read_json(path)?,
        (None, Some(id)) => preset(id, a.n, a.seed.unwrap_or(0), a.budget)?,
        (None, None) => return Err(CliError::Usage("compare needs --config or --preset".into())),
    };
    if let Some(b) = a.budget {
        cfg.budget = b;
    }
    if a.threads.is_some() {
        cfg.threads = a.threads;
    }
    let cells = run_experiment(&cfg)?;
    write_outputs(&a.out, &cells)?;
    let failed = cells.iter().filter(|c| c.outcome.is_err()).count();
    println!("{:<24} {:<28} {:>14} {:>10}", "instance", "solver", "grad_norm", "matvecs");
    for c in &cells {
        match &c.outcome {
            Ok(r) => println!("{:<24} {:<28} {:>14.6e} {:>10}", c.instance, c.solver, r.grad_norm, r.matvecs),
            Err(e) => println!("{:<24} {:<28} error: {e}", c.instance, c.solver),
        }
    }
    println!("{} cells, {failed} errors, outputs in {}", cells.len(), a.out.display());
    Ok(0)
}

fn arc_subsolver(name: ArcSolverName, m: usize, k: usize, seed: u64) -> Subsolver {
    match name {
        ArcSolverName::Cauchy => Subsolver::Cauchy,
        ArcSolverName::Gd => Subsolver::Gd(GdConfig { seed, ..GdConfig::default() }),
        ArcSolverName::Krylov => Subsolver::Krylov(KrylovConfig { k, ..KrylovConfig::default() }),
        ArcSolverName::Asem => match Subsolver::asem(m) {
            Subsolver::Asem(c) => Subsolver::Asem(AsemConfig { seed, ..c }),
            other => other,
        },
        ArcSolverName::Exact => Subsolver::Exact,
    }
}

fn arc_row(problem: &str, r: &ArcReport, ms: f64) -> String {
    let lam = r
        .min_hess_eig_estimate
        .as_ref()
        .map_or("n/a".to_string(), |e| format!("{:.6e}{}", e.value, if e.converged { "" } else { "*" }));
    format!(
        "{:<24} {:<16} {:>14.6e} {:>12.4e} {:>14} {:>6} {:>10.1}",
        problem, r.subsolver, r.f_out, r.grad_norm_out, lam, r.iterations, ms
    )
}

fn cmd_arc(a: &ArcArgs) -> Result<u8, CliError> {
    let kind: TestProblemKind = a.problem.parse()?;
    let obj = test_problem(kind, a.n)?;
    let base: ArcConfig = match &a.config {
        Some(path) => read_json(path)?,
        None => ArcConfig {
            seed: a.seed,
            ..ArcConfig::default()
        },
    };
    let mut configs = Vec::new();
    if a.sweep {
        for (name, m) in [
            (ArcSolverName::Cauchy, 1),
            (ArcSolverName::Gd, 1),
            (ArcSolverName::Krylov, 1),
            (ArcSolverName::Asem, 1),
            (ArcSolverName::Asem, 10),
        ] {
            configs.push(arc_subsolver(name, m, a.k, a.seed));
        }
    } else if a.config.is_some() {
        configs.push(base.subsolver.clone());
    } else {
        configs.push(arc_subsolver(a.solver, a.m, a.k, a.seed));
    }
    create_dir(&a.out)?;
    println!(
        "{:<24} {:<16} {:>14} {:>12} {:>14} {:>6} {:>10}",
        "problem", "subsolver", "f(x_out)", "grad_norm", "lambda_1", "iter", "time_ms"
    );
    let mut code = 0;
    for sub in configs {
        let cfg = ArcConfig {
            subsolver: sub,
            max_iters: a.max_iters.unwrap_or(base.max_iters),
            grad_tol: a.grad_tol.unwrap_or(base.grad_tol),
            ..base.clone()
        };
        let start = Instant::now();
        let report = arc_minimize(&obj, &obj.x0(), &cfg)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        let stem = compare_stem(&report.subsolver);
        let log_path = a.out.join(format!("arc_{stem}.csv"));
        write_json(&a.out.join(format!("arc_{stem}.json")), &report)?;
        write_text(&log_path, &report.iteration_csv())?;
        println!("{}", arc_row(kind.name(), &report, ms));
        if report.diverged {
            eprintln!("{}: diverged, log at {}", report.subsolver, log_path.display());
            code = code.max(5);
        } else if !report.converged {
            code = code.max(3);
        }
    }
    Ok(code)
}

fn compare_stem(label: &str) -> String {
    label
        .chars()
        .filter_map(|c| match c {
            c if c.is_ascii_alphanumeric() => Some(c),
            '=' => Some('-'),
            _ => None,
        })
        .collect()
}

fn cmd_bound_check(a: &BoundCheckArgs) -> Result<u8, CliError> {
    let file: InstanceFile = read_json(&a.config)?;
    let p = file.problem()?;
    let chk = bound_check(&p, a.m, order_of(a.order), a.mu, DEFAULT_ORACLE_CAP)?;
    println!("{}", serde_json::to_string_pretty(&chk).expect("bound report serializes"));
    Ok(if chk.holds { 0 } else { 3 })
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Arc(a) => cmd_arc(a),
        Command::BoundCheck(a) => cmd_bound_check(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Entry point of the `asem` binary. Argument errors exit with code 2.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(run(cli))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_modes_parse() {
        assert_eq!(parse_mu("mu1").unwrap(), MuRule::Mean);
        assert_eq!(parse_mu("mu2").unwrap(), MuRule::Weighted);
        assert_eq!(parse_mu("lambda_m").unwrap(), MuRule::LargestKnown);
        assert_eq!(parse_mu("const:1e6").unwrap(), MuRule::Fixed(1e6));
        assert!(parse_mu("const:x").is_err());
        assert!(parse_mu("median").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        let hard = CrsError::Secular(crate::secular::SecularError::HardCase {
            c1_sq: 0.0,
            b_norm_sq: 1.0,
        });
        assert_eq!(CliError::Crs(hard).exit_code(), 4);
        let div = ProblemError::Divisibility {
            case: "separated",
            n: 5,
            divisor: 2,
        };
        assert_eq!(CliError::Problem(div).exit_code(), 2);
        assert_eq!(CliError::Arc(ArcError::NonFinite { iteration: 0, value: f64::NAN }).exit_code(), 5);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
