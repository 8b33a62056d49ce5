use super::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scalar_box_problem() -> NlpProblem {
    NlpProblem::new(
        1,
        vec![0.0],
        vec![10.0],
        Box::new(|z, grad| {
            if let Some(g) = grad {
                g[0] = 2.0 * (z[0] - 3.0);
            }
            (z[0] - 3.0).powi(2)
        }),
    )
}

fn circle_problem() -> NlpProblem {
    let mut p = NlpProblem::new(
        2,
        vec![-10.0, -10.0],
        vec![10.0, 10.0],
        Box::new(|z, grad| {
            if let Some(g) = grad {
                g[0] = 1.0;
                g[1] = 1.0;
            }
            z[0] + z[1]
        }),
    );
    let mut pattern = SparsityPattern::default();
    pattern.push(0, 0);
    pattern.push(0, 1);
    p.equalities = ConstraintBlock {
        count: 1,
        pattern,
        eval: Box::new(|z, vals, jac| {
            vals[0] = z[0] * z[0] + z[1] * z[1] - 1.0;
            if let Some(j) = jac {
                j[0] = 2.0 * z[0];
                j[1] = 2.0 * z[1];
            }
        }),
        scale: vec![1.0],
    };
    p
}

#[test]
fn box_quadratic_converges() {
    for inner in [InnerSolver::GaussNewton, InnerSolver::ProjectedLbfgs] {
        let p = scalar_box_problem();
        let opts = SolverOptions {
            inner,
            ..SolverOptions::default()
        };
        let (z, report) = solve(&p, &[0.0], &opts);
        assert!(report.status.is_converged(), "{inner:?}: {report:?}");
        assert!((z[0] - 3.0).abs() < 1e-6, "{inner:?}: z = {}", z[0]);
    }
}

#[test]
fn circle_lagrange_point() {
    let target = -(2.0f64).sqrt() / 2.0;
    for inner in [InnerSolver::GaussNewton, InnerSolver::ProjectedLbfgs] {
        let p = circle_problem();
        let opts = SolverOptions {
            inner,
            max_iterations: 20_000,
            max_inner: 2_000,
            ..SolverOptions::default()
        };
        let (z, report) = solve(&p, &[0.3, -0.2], &opts);
        assert!(report.status.is_converged(), "{inner:?}: {report:?}");
        assert!(
            (z[0] - target).abs() < 1e-4 && (z[1] - target).abs() < 1e-4,
            "{inner:?}: z = {z:?}"
        );
    }
}

fn random_convex_qp(seed: u64) -> (NlpProblem, Vec<f64>) {
    let n = 20;
    let me = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m_mat = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = &m_mat.transpose() * &m_mat + DMatrix::<f64>::identity(n, n);
    let c = DVector::<f64>::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let a = DMatrix::<f64>::from_fn(me, n, |_, _| rng.random_range(-1.0..1.0));
    let b = DVector::<f64>::from_fn(me, |_, _| rng.random_range(-0.5..0.5));

    // KKT oracle: [Q A^T; A 0] [x; nu] = [-c; b].
    let dim = n + me;
    let mut kkt = DMatrix::<f64>::zeros(dim, dim);
    kkt.view_mut((0, 0), (n, n)).copy_from(&q);
    kkt.view_mut((0, n), (n, me)).copy_from(&a.transpose());
    kkt.view_mut((n, 0), (me, n)).copy_from(&a);
    let mut rhs = DVector::<f64>::zeros(dim);
    rhs.rows_mut(0, n).copy_from(&(-&c));
    rhs.rows_mut(n, me).copy_from(&b);
    let sol = kkt.lu().solve(&rhs).expect("KKT system solvable");
    let x_star: Vec<f64> = sol.rows(0, n).iter().cloned().collect();

    let mut pattern = SparsityPattern::default();
    for r in 0..me {
        for col in 0..n {
            pattern.push(r, col);
        }
    }
    let (qc, cc, ac, bc) = (q.clone(), c.clone(), a.clone(), b.clone());
    let mut p = NlpProblem::new(
        n,
        vec![-100.0; n],
        vec![100.0; n],
        Box::new(move |z, grad| {
            let zv = DVector::from_column_slice(z);
            let qz = &qc * &zv;
            if let Some(g) = grad {
                for i in 0..z.len() {
                    g[i] = qz[i] + cc[i];
                }
            }
            0.5 * zv.dot(&qz) + cc.dot(&zv)
        }),
    );
    p.equalities = ConstraintBlock {
        count: me,
        pattern,
        eval: Box::new(move |z, vals, jac| {
            let zv = DVector::from_column_slice(z);
            let az = &ac * &zv;
            for r in 0..vals.len() {
                vals[r] = az[r] - bc[r];
            }
            if let Some(j) = jac {
                let mut k = 0;
                for r in 0..ac.nrows() {
                    for col in 0..ac.ncols() {
                        j[k] = ac[(r, col)];
                        k += 1;
                    }
                }
            }
        }),
        scale: vec![1.0; me],
    };
    (p, x_star)
}

#[test]
fn convex_qp_matches_kkt_oracle() {
    for seed in 0..5u64 {
        let (p, x_star) = random_convex_qp(seed);
        // Tight tolerances so the solution itself is 1e-6 accurate.
        let opts = SolverOptions {
            feas_tol: 1e-9,
            opt_tol: 1e-7,
            max_iterations: 100_000,
            max_inner: 5_000,
            ..SolverOptions::default()
        };
        let (z, report) = solve(&p, &vec![0.0; 20], &opts);
        assert!(report.status.is_converged(), "seed {seed}: {report:?}");
        let err = z
            .iter()
            .zip(&x_star)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-6, "seed {seed}: max err {err}");
    }
}

#[test]
fn convex_qp_lbfgs_also_solves() {
    let (p, x_star) = random_convex_qp(42);
    let opts = SolverOptions {
        inner: InnerSolver::ProjectedLbfgs,
        max_iterations: 200_000,
        max_inner: 20_000,
        ..SolverOptions::default()
    };
    let (z, report) = solve(&p, &vec![0.0; 20], &opts);
    assert!(report.status.is_converged(), "{report:?}");
    let err = z
        .iter()
        .zip(&x_star)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(err < 1e-5, "max err {err}");
}

#[test]
fn inequality_via_slack() {
    // min (x - 2)^2 subject to x <= 1.
    let mut p = NlpProblem::new(
        1,
        vec![-10.0],
        vec![10.0],
        Box::new(|z, grad| {
            if let Some(g) = grad {
                g[0] = 2.0 * (z[0] - 2.0);
            }
            (z[0] - 2.0).powi(2)
        }),
    );
    let mut pattern = SparsityPattern::default();
    pattern.push(0, 0);
    p.inequalities = ConstraintBlock {
        count: 1,
        pattern,
        eval: Box::new(|z, vals, jac| {
            vals[0] = z[0] - 1.0;
            if let Some(j) = jac {
                j[0] = 1.0;
            }
        }),
        scale: vec![1.0],
    };
    let (z, report) = solve(&p, &[0.0], &SolverOptions::default());
    assert!(report.status.is_converged(), "{report:?}");
    assert!((z[0] - 1.0).abs() < 1e-5, "z = {}", z[0]);
}

#[test]
fn reports_are_deterministic() {
    let run = || {
        let (p, _) = random_convex_qp(7);
        solve(&p, &vec![0.1; 20], &SolverOptions::default())
    };
    let (z1, r1) = run();
    let (z2, r2) = run();
    assert_eq!(z1, z2);
    assert_eq!(r1.status, r2.status);
    assert_eq!(r1.iterations, r2.iterations);
    assert_eq!(r1.outer_iterations, r2.outer_iterations);
    assert_eq!(r1.objective.to_bits(), r2.objective.to_bits());
    assert_eq!(r1.max_violation.to_bits(), r2.max_violation.to_bits());
    assert_eq!(r1.stationarity.to_bits(), r2.stationarity.to_bits());
}

#[test]
fn violation_matches_reevaluation() {
    let (p, _) = random_convex_qp(3);
    let (z, report) = solve(&p, &vec![0.0; 20], &SolverOptions::default());
    let mut vals = vec![0.0; p.equalities.count];
    (p.equalities.eval)(&z, &mut vals, None);
    let max_violation = vals.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    assert!((max_violation - report.max_violation).abs() < 1e-12);
}

#[test]
fn non_finite_evaluator_is_flagged() {
    let mut p = NlpProblem::new(
        1,
        vec![-10.0],
        vec![10.0],
        Box::new(|z, grad| {
            if let Some(g) = grad {
                g[0] = 1.0;
            }
            z[0]
        }),
    );
    let mut pattern = SparsityPattern::default();
    pattern.push(0, 0);
    p.equalities = ConstraintBlock {
        count: 1,
        pattern,
        eval: Box::new(|_z, vals, jac| {
            vals[0] = f64::NAN;
            if let Some(j) = jac {
                j[0] = 1.0;
            }
        }),
        scale: vec![1.0],
    };
    let (_, report) = solve(&p, &[0.5], &SolverOptions::default());
    assert_eq!(report.status, SolveStatus::NumericalFailure);
    assert!(report.failure_detail.is_some());
}

#[test]
fn derivative_check_clean_linear_objective() {
    let p = NlpProblem::new(
        3,
        vec![-1.0; 3],
        vec![1.0; 3],
        Box::new(|z, grad| {
            if let Some(g) = grad {
                g.copy_from_slice(&[1.0, -2.0, 0.5]);
            }
            z[0] - 2.0 * z[1] + 0.5 * z[2]
        }),
    );
    let check = check_derivatives(&p, &[0.1, 0.2, 0.3]);
    assert!(check.objective_max_rel <= 1e-10, "{check:?}");
}

#[test]
fn derivative_check_flags_corruption() {
    let mut p = circle_problem();
    // Corrupt one Jacobian entry.
    p.equalities.eval = Box::new(|z, vals, jac| {
        vals[0] = z[0] * z[0] + z[1] * z[1] - 1.0;
        if let Some(j) = jac {
            j[0] = 2.0 * z[0] + 0.7; // wrong
            j[1] = 2.0 * z[1];
        }
    });
    let check = check_derivatives(&p, &[0.4, 0.3]);
    assert!(check.equality_max_rel >= 1e-2, "{check:?}");
    let worst = check.worst.expect("worst entry identified");
    assert_eq!(worst, ("equality", 0, 0));
}

#[test]
fn derivative_check_flags_pattern_hole() {
    let mut p = circle_problem();
    // Drop a declared entry while the function still depends on z1.
    p.equalities.pattern = SparsityPattern {
        entries: vec![(0, 0)],
    };
    p.equalities.eval = Box::new(|z, vals, jac| {
        vals[0] = z[0] * z[0] + z[1] * z[1] - 1.0;
        if let Some(j) = jac {
            j[0] = 2.0 * z[0];
        }
    });
    let check = check_derivatives(&p, &[0.4, 0.3]);
    assert!(check.pattern_violation.is_some());
}

