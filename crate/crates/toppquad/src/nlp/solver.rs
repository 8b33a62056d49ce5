//! Augmented-Lagrangian outer loop with scaled evaluation workspace.

use std::time::Instant;

use super::{bfgs, lbfgs, newton, InnerSolver, NlpProblem, SolveReport, SolveStatus, SolverOptions};

/// Scaled, slack-extended view of a problem. All inner iterations run on
/// `x_hat` with `x = x_scale * x_hat`; inequalities `g(x) <= 0` become
/// equalities `g(x) + s = 0` with `s >= 0` appended to the variable vector.
pub(crate) struct Extended<'a> {
    pub p: &'a NlpProblem,
    pub n_orig: usize,
    pub m_e: usize,
    pub m_i: usize,
    /// Total variables including slacks.
    pub n: usize,
    /// Total equality rows after slack conversion.
    pub m: usize,
    /// Scaled bounds.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Variable scales (slacks have scale 1).
    pub xs: Vec<f64>,
    /// Constraint scales, equalities then inequalities.
    pub cs: Vec<f64>,
    /// Combined scaled-Jacobian pattern: equality entries, inequality
    /// entries, then slack identity entries.
    pub pattern: Vec<(usize, usize)>,
    // Work buffers.
    x_unscaled: Vec<f64>,
    val_e: Vec<f64>,
    val_i: Vec<f64>,
    jac_e: Vec<f64>,
    jac_i: Vec<f64>,
    grad_raw: Vec<f64>,
    /// Scaled constraint values after `eval_constraints`.
    pub c: Vec<f64>,
    /// Scaled Jacobian values aligned with `pattern`.
    pub jac: Vec<f64>,
    /// Scaled objective-only gradient from the last `phi_grad` call; used by
    /// the Gauss-Newton inner solver to build a secant curvature estimate.
    pub g_obj: Vec<f64>,
    pub eval_error: Option<String>,
}

impl<'a> Extended<'a> {
    pub fn new(p: &'a NlpProblem) -> Self {
        let n_orig = p.n;
        let m_e = p.equalities.count;
        let m_i = p.inequalities.count;
        let n = n_orig + m_i;
        let m = m_e + m_i;
        assert_eq!(p.x_scale.len(), n_orig);
        let mut xs = p.x_scale.clone();
        xs.extend(std::iter::repeat(1.0).take(m_i));
        let mut cs: Vec<f64> = if p.equalities.scale.is_empty() {
            vec![1.0; m_e]
        } else {
            assert_eq!(p.equalities.scale.len(), m_e);
            p.equalities.scale.clone()
        };
        if p.inequalities.scale.is_empty() {
            cs.extend(std::iter::repeat(1.0).take(m_i));
        } else {
            assert_eq!(p.inequalities.scale.len(), m_i);
            cs.extend_from_slice(&p.inequalities.scale);
        }

        let mut lower: Vec<f64> = p
            .lower
            .iter()
            .zip(&p.x_scale)
            .map(|(&l, &s)| l / s)
            .collect();
        let mut upper: Vec<f64> = p
            .upper
            .iter()
            .zip(&p.x_scale)
            .map(|(&u, &s)| u / s)
            .collect();
        lower.extend(std::iter::repeat(0.0).take(m_i));
        upper.extend(std::iter::repeat(f64::INFINITY).take(m_i));

        let mut pattern: Vec<(usize, usize)> = p.equalities.pattern.entries.clone();
        pattern.extend(
            p.inequalities
                .pattern
                .entries
                .iter()
                .map(|&(r, c)| (r + m_e, c)),
        );
        pattern.extend((0..m_i).map(|k| (m_e + k, n_orig + k)));

        Self {
            p,
            n_orig,
            m_e,
            m_i,
            n,
            m,
            lower,
            upper,
            xs,
            cs,
            pattern,
            x_unscaled: vec![0.0; n_orig],
            val_e: vec![0.0; m_e],
            val_i: vec![0.0; m_i],
            jac_e: vec![0.0; p.equalities.pattern.nnz()],
            jac_i: vec![0.0; p.inequalities.pattern.nnz()],
            grad_raw: vec![0.0; n_orig],
            c: vec![0.0; m],
            jac: vec![0.0; 0],
            g_obj: vec![0.0; n],
            eval_error: None,
        }
    }

    fn unscale(&mut self, x_hat: &[f64]) {
        for i in 0..self.n_orig {
            self.x_unscaled[i] = x_hat[i] * self.xs[i];
        }
    }

    /// Objective value and optionally its scaled gradient. `None` on a
    /// non-finite evaluation.
    pub fn eval_objective(&mut self, x_hat: &[f64], grad: Option<&mut [f64]>) -> Option<f64> {
        self.unscale(x_hat);
        match grad {
            None => {
                let f = (self.p.objective)(&self.x_unscaled, None);
                if !f.is_finite() {
                    self.eval_error = Some("objective returned a non-finite value".into());
                    return None;
                }
                Some(f)
            }
            Some(g) => {
                self.grad_raw.iter_mut().for_each(|v| *v = 0.0);
                let f = (self.p.objective)(&self.x_unscaled, Some(&mut self.grad_raw));
                if !f.is_finite() {
                    self.eval_error = Some("objective returned a non-finite value".into());
                    return None;
                }
                for i in 0..self.n_orig {
                    let gi = self.grad_raw[i] * self.xs[i];
                    if !gi.is_finite() {
                        self.eval_error =
                            Some(format!("objective gradient entry {i} is non-finite"));
                        return None;
                    }
                    g[i] = gi;
                }
                g[self.n_orig..].iter_mut().for_each(|v| *v = 0.0);
                Some(f)
            }
        }
    }

    /// Scaled constraint values into `self.c`; `true` on success.
    pub fn eval_constraints(&mut self, x_hat: &[f64], with_jacobian: bool) -> bool {
        self.unscale(x_hat);
        if self.m_e > 0 {
            let jac = with_jacobian.then_some(&mut self.jac_e[..]);
            (self.p.equalities.eval)(&self.x_unscaled, &mut self.val_e, jac);
        }
        if self.m_i > 0 {
            let jac = with_jacobian.then_some(&mut self.jac_i[..]);
            (self.p.inequalities.eval)(&self.x_unscaled, &mut self.val_i, jac);
        }
        for (k, &v) in self.val_e.iter().enumerate() {
            if !v.is_finite() {
                self.eval_error = Some(format!("equality constraint {k} is non-finite"));
                return false;
            }
            self.c[k] = v / self.cs[k];
        }
        for (k, &v) in self.val_i.iter().enumerate() {
            if !v.is_finite() {
                self.eval_error = Some(format!("inequality constraint {k} is non-finite"));
                return false;
            }
            // Slack variable lives at n_orig + k in scaled coordinates.
            self.c[self.m_e + k] = (v + x_hat[self.n_orig + k]) / self.cs[self.m_e + k];
        }
        if with_jacobian {
            if self.jac.len() != self.pattern.len() {
                self.jac = vec![0.0; self.pattern.len()];
            }
            let ne = self.jac_e.len();
            let ni = self.jac_i.len();
            for (k, &(r, col)) in self.pattern.iter().enumerate() {
                let raw = if k < ne {
                    self.jac_e[k]
                } else if k < ne + ni {
                    self.jac_i[k - ne]
                } else {
                    1.0 // slack identity
                };
                if !raw.is_finite() {
                    self.eval_error = Some(format!(
                        "jacobian entry ({r}, {col}) is non-finite"
                    ));
                    return false;
                }
                self.jac[k] = raw * self.xs[col] / self.cs[r];
            }
        }
        true
    }

    /// Augmented-Lagrangian value at `x_hat` (constraints already scaled).
    pub fn phi(&mut self, x_hat: &[f64], lambda: &[f64], rho: f64) -> Option<f64> {
        let f = self.eval_objective(x_hat, None)?;
        if !self.eval_constraints(x_hat, false) {
            return None;
        }
        let mut acc = f;
        for (k, &ck) in self.c.iter().enumerate() {
            acc += lambda[k] * ck + 0.5 * rho * ck * ck;
        }
        acc.is_finite().then_some(acc)
    }

    /// Value and gradient of the augmented Lagrangian; refreshes `self.c`
    /// and `self.jac`.
    pub fn phi_grad(
        &mut self,
        x_hat: &[f64],
        lambda: &[f64],
        rho: f64,
        grad: &mut [f64],
    ) -> Option<f64> {
        let f = self.eval_objective(x_hat, Some(grad))?;
        self.g_obj.copy_from_slice(grad);
        if !self.eval_constraints(x_hat, true) {
            return None;
        }
        let mut acc = f;
        for (k, &ck) in self.c.iter().enumerate() {
            acc += lambda[k] * ck + 0.5 * rho * ck * ck;
        }
        for (k, &(r, col)) in self.pattern.iter().enumerate() {
            grad[col] += self.jac[k] * (lambda[r] + rho * self.c[r]);
        }
        acc.is_finite().then_some(acc)
    }

    pub fn project(&self, x: &mut [f64]) {
        for i in 0..self.n {
            x[i] = x[i].clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Infinity norm of the projected gradient step `P(x - g) - x`.
    pub fn projected_gradient_norm(&self, x: &[f64], g: &[f64]) -> f64 {
        let mut acc = 0.0f64;
        for i in 0..self.n {
            let t = (x[i] - g[i]).clamp(self.lower[i], self.upper[i]) - x[i];
            acc = acc.max(t.abs());
        }
        acc
    }
}

pub(crate) struct InnerOutcome {
    pub iterations: usize,
    pub projected_gradient: f64,
    /// False when the subproblem stalled before reaching its tolerance.
    #[allow(dead_code)]
    pub reached_tol: bool,
}

pub(crate) enum InnerError {
    Evaluation,
}

/// Concrete inner strategy after `Auto` resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum InnerKind {
    Lbfgs,
    GaussNewtonBanded(usize),
    DenseBfgs,
}

fn jacobian_bandwidth(pattern: &[(usize, usize)], m: usize) -> usize {
    // Bandwidth of J^T J equals the widest column span of any constraint row.
    let mut min_col = vec![usize::MAX; m];
    let mut max_col = vec![0usize; m];
    for &(r, c) in pattern {
        min_col[r] = min_col[r].min(c);
        max_col[r] = max_col[r].max(c);
    }
    (0..m)
        .filter(|&r| min_col[r] != usize::MAX)
        .map(|r| max_col[r] - min_col[r])
        .max()
        .unwrap_or(0)
}

fn resolve_inner(ext: &Extended, options: &SolverOptions) -> InnerKind {
    match options.inner {
        InnerSolver::ProjectedLbfgs => InnerKind::Lbfgs,
        InnerSolver::GaussNewton => {
            let bw = jacobian_bandwidth(&ext.pattern, ext.m);
            if ext.m > 0 && bw <= 128 && bw < ext.n {
                InnerKind::GaussNewtonBanded(bw)
            } else if ext.n <= 600 {
                InnerKind::DenseBfgs
            } else {
                InnerKind::Lbfgs
            }
        }
        InnerSolver::Auto => {
            // Banded Gauss-Newton pays off when constraint curvature
            // dominates and the normal equations stay cheap to factor; full
            // BFGS handles small objective-dominated problems; L-BFGS takes
            // the large unstructured remainder.
            let constraint_dominated = 2 * ext.m >= ext.n;
            let bw = jacobian_bandwidth(&ext.pattern, ext.m);
            if constraint_dominated && ext.m > 0 && bw <= 128 && bw < ext.n {
                InnerKind::GaussNewtonBanded(bw)
            } else if ext.n <= 400 {
                InnerKind::DenseBfgs
            } else {
                InnerKind::Lbfgs
            }
        }
    }
}

/// Solve the program from `z0`. Deterministic: identical inputs and options
/// produce identical iterates and reports (wall time aside).
pub fn solve(problem: &NlpProblem, z0: &[f64], options: &SolverOptions) -> (Vec<f64>, SolveReport) {
    let start = Instant::now();
    assert_eq!(z0.len(), problem.n);
    let mut ext = Extended::new(problem);
    let kind = resolve_inner(&ext, options);

    // Scale and project the start point; seed slacks to satisfy g + s = 0
    // where the sign allows.
    let mut x: Vec<f64> = (0..problem.n).map(|i| z0[i] / ext.xs[i]).collect();
    x.extend(std::iter::repeat(0.0).take(ext.m_i));
    ext.project(&mut x);
    if ext.m_i > 0 {
        if ext.eval_constraints(&x, false) {
            for k in 0..ext.m_i {
                let g_scaled = ext.c[ext.m_e + k] - x[ext.n_orig + k] / ext.cs[ext.m_e + k];
                x[ext.n_orig + k] = (-g_scaled * ext.cs[ext.m_e + k]).max(0.0);
            }
        }
    }

    let mut lambda = vec![0.0; ext.m];
    let mut rho = options.penalty_init;
    let mut omega = 1e-2_f64.max(options.opt_tol);
    let mut sigma = 1e-4; // LM damping, carried across subproblems
    let mut bfgs_state = match kind {
        InnerKind::DenseBfgs => Some(bfgs::BfgsState::new(ext.n)),
        _ => None,
    };
    let mut total_iters = 0usize;
    let mut outer_count = 0usize;
    let mut status = SolveStatus::MaxIterations;
    #[allow(unused_assignments)]
    let mut last_pg = f64::INFINITY;
    let mut theta_prev = f64::INFINITY;
    let mut stalls_at_cap = 0usize;

    for outer in 0..options.max_outer {
        outer_count = outer + 1;
        let budget = options
            .max_inner
            .min(options.max_iterations.saturating_sub(total_iters));
        if budget == 0 {
            status = SolveStatus::MaxIterations;
            break;
        }
        let res = match kind {
            InnerKind::Lbfgs => lbfgs::minimize(
                &mut ext,
                &lambda,
                rho,
                &mut x,
                omega,
                budget,
                options.lbfgs_memory,
                options.verbosity,
            ),
            InnerKind::GaussNewtonBanded(bw) => newton::minimize(
                &mut ext,
                &lambda,
                rho,
                &mut x,
                omega,
                budget,
                bw,
                &mut sigma,
                options.verbosity,
            ),
            InnerKind::DenseBfgs => bfgs::minimize(
                &mut ext,
                &lambda,
                rho,
                &mut x,
                omega,
                budget,
                bfgs_state.as_mut().expect("state allocated for this kind"),
                options.verbosity,
            ),
        };
        let outcome = match res {
            Ok(o) => o,
            Err(InnerError::Evaluation) => {
                status = SolveStatus::NumericalFailure;
                break;
            }
        };
        total_iters += outcome.iterations;
        last_pg = outcome.projected_gradient;

        if !ext.eval_constraints(&x, false) {
            status = SolveStatus::NumericalFailure;
            break;
        }
        let theta = ext.c.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if options.verbosity >= 1 {
            eprintln!(
                "outer {outer:3}  feas {theta:9.3e}  pg {last_pg:9.3e}  rho {rho:8.2e}  inner {}",
                outcome.iterations
            );
        }

        // The inner exit gradient is the Lagrangian stationarity at the
        // first-order multiplier estimate lambda + rho c.
        if theta <= options.feas_tol && last_pg <= options.opt_tol {
            for k in 0..ext.m {
                lambda[k] += rho * ext.c[k];
            }
            status = SolveStatus::Converged;
            break;
        }

        // Safeguarded schedule: update multipliers every pass; raise the
        // penalty only when feasibility fails to halve.
        for k in 0..ext.m {
            lambda[k] = (lambda[k] + rho * ext.c[k]).clamp(-1e10, 1e10);
        }
        if theta > options.feas_tol && theta > 0.5 * theta_prev {
            if rho >= options.penalty_max {
                stalls_at_cap += 1;
                if stalls_at_cap >= 3 {
                    status = SolveStatus::InfeasibleStationary;
                    break;
                }
            } else {
                rho = (rho * options.penalty_factor).min(options.penalty_max);
                // The model Hessian scale follows the penalty.
                sigma *= options.penalty_factor;
            }
        }
        theta_prev = theta;
        omega = (omega * 0.3).max(options.opt_tol * 0.3);
        if total_iters >= options.max_iterations {
            status = SolveStatus::MaxIterations;
            break;
        }
    }

    // Final diagnostics from a fresh evaluation at the final point.
    let (objective, max_violation, stationarity, failure_detail) = {
        if status == SolveStatus::NumericalFailure {
            (f64::NAN, f64::NAN, f64::NAN, ext.eval_error.clone())
        } else {
            let mut grad = vec![0.0; ext.n];
            let f = ext.eval_objective(&x, Some(&mut grad));
            let ok = ext.eval_constraints(&x, true);
            match (f, ok) {
                (Some(f), true) => {
                    let theta = ext.c.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
                    for (k, &(r, col)) in ext.pattern.iter().enumerate() {
                        grad[col] += ext.jac[k] * lambda[r];
                    }
                    let pg = ext.projected_gradient_norm(&x, &grad);
                    (f, theta, pg, None)
                }
                _ => (f64::NAN, f64::NAN, f64::NAN, ext.eval_error.clone()),
            }
        }
    };
    if status == SolveStatus::Converged
        && !(max_violation <= options.feas_tol && stationarity <= options.opt_tol * 1.01)
    {
        // Guard the advertised invariant against bookkeeping drift.
        status = SolveStatus::MaxIterations;
    }
    if failure_detail.is_some() && status != SolveStatus::NumericalFailure {
        status = SolveStatus::NumericalFailure;
    }

    let z: Vec<f64> = (0..problem.n).map(|i| x[i] * ext.xs[i]).collect();
    let report = SolveReport {
        status,
        iterations: total_iters,
        outer_iterations: outer_count,
        objective,
        max_violation,
        stationarity,
        wall_time: start.elapsed(),
        failure_detail,
    };
    (z, report)
}
