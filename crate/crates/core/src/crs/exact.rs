use super::{full_spectrum, CrsError, CrsProblem, Finish, MatvecBreakdown, SolveFlags, SolveReport, TrajectoryPoint};
use crate::operators::DEFAULT_ORACLE_CAP;
use crate::secular::{find_root, RootConfig, RootMethod, SecularModel};

/// Root tolerance of the exact oracle.
pub const EXACT_ROOT_TOL: f64 = 1e-14;

/// Exact solution from a full eigendecomposition; see
/// [`solve_exact_with_cap`].
pub fn solve_exact(p: &CrsProblem<'_>) -> Result<SolveReport, CrsError> {
    solve_exact_with_cap(p, DEFAULT_ORACLE_CAP)
}

/// Diagonalizes `A` (any size if diagonal, at most `cap` otherwise), finds
/// the exact secular root by bisection to `1e-14` and assembles
/// `x = sum_i c_i / (lambda_i + sigma) v_i`. One extra matvec verifies the
/// result.
pub fn solve_exact_with_cap(p: &CrsProblem<'_>, cap: usize) -> Result<SolveReport, CrsError> {
    let start = p.op.matvec_count();
    let spectrum = full_spectrum(&p.op, cap)?;
    let eigen = p.op.matvec_count() - start;
    let coeffs = spectrum.coefficients(&p.b);
    let b_norm = p.b_norm();
    let model = SecularModel::exact(
        spectrum.values.clone(),
        coeffs.iter().map(|c| c * c).collect(),
        p.rho,
        b_norm,
    )?;
    let root = find_root(
        &model,
        &RootConfig {
            tol: EXACT_ROOT_TOL,
            method: RootMethod::Bisection,
        },
    )?;
    let sigma = root.sigma;
    let x = if b_norm == 0.0 {
        vec![0.0; p.dim()]
    } else {
        let weights: Vec<f64> = coeffs
            .iter()
            .zip(&spectrum.values)
            .map(|(c, l)| c / (l + sigma))
            .collect();
        spectrum.synthesize(&weights)
    };
    let ax = p.op.matvec(&x)?;
    let breakdown = MatvecBreakdown {
        eigen,
        other: 1,
        ..MatvecBreakdown::default()
    };
    let mut report = p.finish(Finish {
        solver: "exact",
        x,
        ax: &ax,
        sigma,
        breakdown,
        inner_iterations: root.iterations,
        trajectory: Vec::new(),
        flags: SolveFlags {
            converged: true,
            eigen_converged: true,
            linear_solve_converged: true,
            ..SolveFlags::default()
        },
        lambda1_estimate: Some(spectrum.values[0]),
        mu: None,
    });
    report.trajectory.push(TrajectoryPoint {
        budget_matvecs: report.matvecs,
        grad_norm: report.grad_norm,
        objective: report.objective,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::SymmetricOperator;
    use crate::vecops;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn scalar_example() {
        let p = CrsProblem::new(SymmetricOperator::diagonal(vec![0.0]), vec![-1.0], 1.0).unwrap();
        let r = solve_exact(&p).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-13 && (r.sigma - 1.0).abs() < 1e-13);
        assert!(r.flags.converged);
    }

    #[test]
    fn two_dimensional_closed_form() {
        let p = CrsProblem::new(SymmetricOperator::diagonal(vec![1.0, 1.0]), vec![-1.0, 0.0], 1.0).unwrap();
        let r = solve_exact(&p).unwrap();
        let s = (5f64.sqrt() - 1.0) / 2.0;
        assert_relative_eq!(r.sigma, s, max_relative = 1e-13);
        assert_relative_eq!(r.x[0], 1.0 / (1.0 + s), max_relative = 1e-13);
        assert_eq!(r.x[1], 0.0);
    }

    #[test]
    fn random_diagonal_is_optimal() {
        let n = 1000;
        let mut rng = vecops::rng(21);
        let d = vecops::gaussian_vector(n, &mut rng);
        let b = vecops::gaussian_vector(n, &mut rng);
        let p = CrsProblem::new(SymmetricOperator::diagonal(d), b, 0.5).unwrap();
        let r = solve_exact(&p).unwrap();
        assert!(r.grad_norm <= 1e-10, "{}", r.grad_norm);
        assert!(r.flags.converged);
        assert_eq!(r.matvecs, p.op.matvec_count());
    }

    #[test]
    fn dense_matches_diagonal_after_rotation() {
        // a Givens rotation of a diagonal problem
        let (c, s) = (0.6, 0.8);
        let v = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-0.5, 2.0]));
        let a = &v * lam * v.transpose();
        let y_b = [0.3, -0.4];
        let b = &v * nalgebra::DVector::from_row_slice(&y_b);
        let dense = CrsProblem::new(SymmetricOperator::dense(a).unwrap(), b.as_slice().to_vec(), 2.0).unwrap();
        let diag = CrsProblem::new(SymmetricOperator::diagonal(vec![-0.5, 2.0]), y_b.to_vec(), 2.0).unwrap();
        let rd = solve_exact(&dense).unwrap();
        let ry = solve_exact(&diag).unwrap();
        let vy = &v * nalgebra::DVector::from_row_slice(&ry.x);
        assert!((vy - nalgebra::DVector::from_row_slice(&rd.x)).norm() < 1e-12);
    }

    #[test]
    fn zero_b_and_hard_case() {
        let p = CrsProblem::new(SymmetricOperator::diagonal(vec![1.0, 2.0]), vec![0.0, 0.0], 1.0).unwrap();
        let r = solve_exact(&p).unwrap();
        assert_eq!((r.sigma, r.x.clone()), (0.0, vec![0.0, 0.0]));
        let p = CrsProblem::new(SymmetricOperator::diagonal(vec![-1.0, 2.0]), vec![0.0, 1.0], 1.0).unwrap();
        assert!(solve_exact(&p).unwrap_err().is_hard_case());
    }
}
