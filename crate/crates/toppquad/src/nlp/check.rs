//! Finite-difference verification of user-supplied derivatives.

use super::NlpProblem;

/// Per-block worst relative errors of analytic derivatives against central
/// finite differences.
#[derive(Debug, Clone)]
pub struct DerivativeCheck {
    pub objective_max_rel: f64,
    pub equality_max_rel: f64,
    pub inequality_max_rel: f64,
    /// Entry achieving the worst error: (block, row, col) with block one of
    /// "objective", "equality", "inequality".
    pub worst: Option<(&'static str, usize, usize)>,
    /// A finite-difference nonzero found outside the declared sparsity
    /// pattern: (row, col, magnitude).
    pub pattern_violation: Option<(usize, usize, f64)>,
}

impl DerivativeCheck {
    pub fn max_rel(&self) -> f64 {
        self.objective_max_rel
            .max(self.equality_max_rel)
            .max(self.inequality_max_rel)
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Compare analytic first derivatives against central finite differences at
/// an interior point `z` (the check perturbs coordinates in both directions,
/// so evaluators must be defined in a neighborhood of `z`).
pub fn check_derivatives(problem: &NlpProblem, z: &[f64]) -> DerivativeCheck {
    let n = problem.n;
    assert_eq!(z.len(), n);
    let m_e = problem.equalities.count;
    let m_i = problem.inequalities.count;

    // Analytic values.
    let mut grad = vec![0.0; n];
    (problem.objective)(z, Some(&mut grad));
    let mut ce = vec![0.0; m_e];
    let mut je = vec![0.0; problem.equalities.pattern.nnz()];
    if m_e > 0 {
        (problem.equalities.eval)(z, &mut ce, Some(&mut je));
    }
    let mut ci = vec![0.0; m_i];
    let mut ji = vec![0.0; problem.inequalities.pattern.nnz()];
    if m_i > 0 {
        (problem.inequalities.eval)(z, &mut ci, Some(&mut ji));
    }
    // Dense views of the sparse blocks keyed by (row, col); duplicate
    // pattern entries accumulate.
    use std::collections::HashMap;
    let mut eq_dense: HashMap<(usize, usize), f64> = HashMap::new();
    for (k, &(r, c)) in problem.equalities.pattern.entries.iter().enumerate() {
        *eq_dense.entry((r, c)).or_insert(0.0) += je[k];
    }
    let mut ineq_dense: HashMap<(usize, usize), f64> = HashMap::new();
    for (k, &(r, c)) in problem.inequalities.pattern.entries.iter().enumerate() {
        *ineq_dense.entry((r, c)).or_insert(0.0) += ji[k];
    }

    let mut out = DerivativeCheck {
        objective_max_rel: 0.0,
        equality_max_rel: 0.0,
        inequality_max_rel: 0.0,
        worst: None,
        pattern_violation: None,
    };

    let mut zp = z.to_vec();
    let mut ce_p = vec![0.0; m_e];
    let mut ce_m = vec![0.0; m_e];
    let mut ci_p = vec![0.0; m_i];
    let mut ci_m = vec![0.0; m_i];
    for col in 0..n {
        let h = 6e-6 * z[col].abs().max(1.0);
        zp[col] = z[col] + h;
        let f_p = (problem.objective)(&zp, None);
        if m_e > 0 {
            (problem.equalities.eval)(&zp, &mut ce_p, None);
        }
        if m_i > 0 {
            (problem.inequalities.eval)(&zp, &mut ci_p, None);
        }
        zp[col] = z[col] - h;
        let f_m = (problem.objective)(&zp, None);
        if m_e > 0 {
            (problem.equalities.eval)(&zp, &mut ce_m, None);
        }
        if m_i > 0 {
            (problem.inequalities.eval)(&zp, &mut ci_m, None);
        }
        zp[col] = z[col];

        let fd = (f_p - f_m) / (2.0 * h);
        let e = rel_err(grad[col], fd);
        if e > out.objective_max_rel {
            out.objective_max_rel = e;
            if e >= out.max_rel() {
                out.worst = Some(("objective", 0, col));
            }
        }
        for r in 0..m_e {
            let fd = (ce_p[r] - ce_m[r]) / (2.0 * h);
            let analytic = eq_dense.get(&(r, col)).copied();
            match analytic {
                Some(a) => {
                    let e = rel_err(a, fd);
                    if e > out.equality_max_rel {
                        out.equality_max_rel = e;
                        out.worst = Some(("equality", r, col));
                    }
                }
                None => {
                    if fd.abs() > 1e-6 && out.pattern_violation.is_none() {
                        out.pattern_violation = Some((r, col, fd.abs()));
                    }
                }
            }
        }
        for r in 0..m_i {
            let fd = (ci_p[r] - ci_m[r]) / (2.0 * h);
            let analytic = ineq_dense.get(&(r, col)).copied();
            match analytic {
                Some(a) => {
                    let e = rel_err(a, fd);
                    if e > out.inequality_max_rel {
                        out.inequality_max_rel = e;
                        out.worst = Some(("inequality", r, col));
                    }
                }
                None => {
                    if fd.abs() > 1e-6 && out.pattern_violation.is_none() {
                        out.pattern_violation = Some((r, col, fd.abs()));
                    }
                }
            }
        }
    }
    out
}
