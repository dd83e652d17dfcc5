mod common;

use asem::arc::{arc_minimize, ArcConfig, Branch, Subsolver};
use asem::crs::{cauchy_point, solve_exact, CrsProblem};
use asem::operators::{lanczos_tridiagonalize, SymmetricOperator};
use asem::problems::{test_problem, TestProblemKind};
use asem::secular::{find_root, ModelOrder, RootConfig, RootMethod};
use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(TRIALS))]

    #[test]
    fn secular_functions_decrease((c, m) in truncated_case(), probes in probe_pairs()) {
        check_monotone(&c, m, &probes)?;
    }

    #[test]
    fn bracket_is_sign_valid((c, m) in truncated_case()) {
        check_bracket(&c, m)?;
    }

    #[test]
    fn solution_gap_is_bounded((c, m) in truncated_case()) {
        check_solution_gap(&c, m)?;
    }

    #[test]
    fn lanczos_basis_is_orthonormal(c in diag_case(), k_frac in 0.1f64..1.0, seed in any::<u64>()) {
        check_lanczos(&c, k_frac, seed)?;
    }

    #[test]
    fn cg_matches_closed_form(c in diag_case(), log_margin in -1.0f64..1.0) {
        check_cg(&c, 10f64.powf(log_margin))?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn root_lies_in_bracket_for_both_methods((c, m) in truncated_case()) {
        for model in [c.exact_model(), c.truncated(m, ModelOrder::FirstOrder)] {
            let mut roots = Vec::new();
            for method in [RootMethod::Bisection, RootMethod::SafeguardedNewton] {
                let r = find_root(&model, &RootConfig { tol: 1e-12, method }).unwrap();
                let lo = (-model.lambda1()).max(0.0);
                prop_assert!(r.sigma > lo && r.sigma <= r.bracket.b1 * (1.0 + 1e-12));
                prop_assert!(r.final_width <= 1e-12 * r.bracket.b1.max(1.0));
                roots.push(r.sigma);
            }
            prop_assert!((roots[0] - roots[1]).abs() <= 4e-12 * model.b1().max(1.0));
        }
    }

    #[test]
    fn exact_solution_is_the_global_minimizer(c in diag_case(), dirs in prop::collection::vec(-1.0f64..1.0, 40)) {
        let p = CrsProblem::new(SymmetricOperator::diagonal(c.eigs.clone()), c.b.clone(), c.rho).unwrap();
        let r = solve_exact(&p).unwrap();
        let f = p.objective(&r.x).unwrap();
        for t in [1e-3, 1e-1, 1.0] {
            let y: Vec<f64> = r.x.iter().zip(&dirs).map(|(x, d)| x + t * d).collect();
            prop_assert!(p.objective(&y).unwrap() >= f - 1e-12 * (1.0 + f.abs()));
        }
        let cp = cauchy_point(&p).unwrap();
        prop_assert!(cp.model_value <= 0.0 && f <= cp.model_value + 1e-12 * (1.0 + f.abs()));
    }

    #[test]
    fn extremal_ritz_values_tighten_with_k(c in diag_case()) {
        let n = c.n();
        let op = SymmetricOperator::diagonal(c.eigs.clone());
        let nb = c.b_norm();
        let u1: Vec<f64> = c.b.iter().map(|v| v / nb).collect();
        let mut prev: Option<(f64, f64)> = None;
        for k in 1..=n {
            let f = lanczos_tridiagonalize(&op, &u1, k).unwrap();
            let ritz = f.ritz_values().unwrap();
            let (lo, hi) = (ritz[0], ritz[ritz.len() - 1]);
            let tol = 1e-10 * c.eigs.iter().fold(1.0f64, |a, l| a.max(l.abs()));
            prop_assert!(lo >= c.eigs[0] - tol && hi <= c.eigs[n - 1] + tol);
            if let Some((plo, phi)) = prev {
                prop_assert!(lo <= plo + tol && hi >= phi - tol, "k={k}: [{lo}, {hi}] vs [{plo}, {phi}]");
            }
            prev = Some((lo, hi));
            if f.basis.len() < k {
                break;
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn arc_log_respects_update_rules(kind_ix in 0usize..4, n in 4usize..40, seed in any::<u64>()) {
        let kind = TestProblemKind::ALL[kind_ix];
        let obj = test_problem(kind, n).unwrap();
        let cfg = ArcConfig { max_iters: 60, subsolver: Subsolver::asem(1), seed, ..ArcConfig::default() };
        let r = arc_minimize(&obj, &obj.x0(), &cfg).unwrap();
        let mut last_f = f64::INFINITY;
        for it in &r.log {
            prop_assert_eq!(it.accepted, it.kappa >= cfg.eta1);
            let expect = match it.branch {
                Branch::VerySuccessful => (it.rho / cfg.gamma1).max(cfg.rho_min),
                Branch::Successful => it.rho,
                Branch::Unsuccessful => cfg.gamma2 * it.rho,
            };
            prop_assert_eq!(it.rho_next, expect);
            prop_assert!(it.model_value <= it.cauchy_model_value);
            prop_assert!(it.f <= last_f);
            last_f = it.f;
        }
    }
}
