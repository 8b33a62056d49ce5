//! Damped Gauss-Newton inner minimizer for the augmented-Lagrangian
//! subproblem, using either a banded or dense normal-equations factor.
//!
//! The model Hessian is `rho J^T J + D + sigma I` restricted to the free
//! variables, where `D` is a diagonal secant estimate of the objective
//! curvature and `sigma` is a Levenberg-Marquardt damping parameter adapted
//! on line-search behavior. Active-set variables (bound-pinned with a
//! gradient pushing outward) take no step.

use super::bandchol::BandMatrix;
use super::solver::{Extended, InnerError, InnerOutcome};

const ARMIJO_C1: f64 = 1e-4;
const SIGMA_MIN: f64 = 1e-10;
const SIGMA_MAX: f64 = 1e14;

#[allow(clippy::too_many_arguments)]
pub(crate) fn minimize(
    ext: &mut Extended,
    lambda: &[f64],
    rho: f64,
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    bandwidth: usize,
    sigma: &mut f64,
    verbosity: u8,
) -> Result<InnerOutcome, InnerError> {
    let n = ext.n;
    let mut grad = vec![0.0; n];
    let mut phi = ext
        .phi_grad(x, lambda, rho, &mut grad)
        .ok_or(InnerError::Evaluation)?;
    let mut pg = ext.projected_gradient_norm(x, &grad);
    let mut iterations = 0usize;

    let mut band = BandMatrix::zeros(n, bandwidth);
    // Row-major CSR of the scaled Jacobian pattern (fixed across iterations).
    let mut row_entries: Vec<Vec<(usize, usize)>> = vec![Vec::new(); ext.m];
    for (k, &(r, c)) in ext.pattern.iter().enumerate() {
        row_entries[r].push((c, k));
    }

    let mut free = vec![usize::MAX; n];
    let mut free_list: Vec<usize> = Vec::with_capacity(n);
    let mut step = vec![0.0; n];
    let mut x_trial = vec![0.0; n];
    // Diagonal secant of the objective-only Hessian.
    let mut d_obj = vec![0.0; n];
    let mut g_obj_prev = ext.g_obj.clone();
    let mut x_prev = x.to_vec();

    while iterations < max_iter {
        if pg <= tol {
            return Ok(InnerOutcome {
                iterations,
                projected_gradient: pg,
                reached_tol: true,
            });
        }
        iterations += 1;

        // Active set: pinned variables and bound-active variables whose
        // gradient pushes outward.
        free_list.clear();
        for i in 0..n {
            let at_lower = x[i] - ext.lower[i] <= 1e-12 * (1.0 + x[i].abs());
            let at_upper = ext.upper[i] - x[i] <= 1e-12 * (1.0 + x[i].abs());
            let fixed = ext.lower[i] == ext.upper[i];
            let active = fixed || (at_lower && grad[i] >= 0.0) || (at_upper && grad[i] <= 0.0);
            if active {
                free[i] = usize::MAX;
            } else {
                free[i] = free_list.len();
                free_list.push(i);
            }
        }
        let nf = free_list.len();
        if nf == 0 {
            // Entirely pinned; nothing to do at this multiplier/penalty.
            return Ok(InnerOutcome {
                iterations,
                projected_gradient: pg,
                reached_tol: pg <= tol,
            });
        }

        // Try steps with increasing damping until one passes the
        // sufficient-decrease test.
        let mut accepted = false;
        let mut ls_shrunk = false;
        for _damping_round in 0..12 {
            let solved = {
                let b = &mut band;
                b.reset();
                // H = rho J^T J + D + sigma I on the free block.
                for entries in &row_entries {
                    for a in 0..entries.len() {
                        let (ca, ka) = entries[a];
                        let fa = free[ca];
                        if fa == usize::MAX {
                            continue;
                        }
                        let va = ext.jac[ka];
                        for &(cb, kb) in entries.iter().take(a + 1) {
                            let fb = free[cb];
                            if fb == usize::MAX {
                                continue;
                            }
                            b.add(fa.max(fb), fa.min(fb), rho * va * ext.jac[kb]);
                        }
                    }
                }
                // Trim the band to the free count.
                b.n = nf;
                for (f, &i) in free_list.iter().enumerate() {
                    b.add_diag(f, *sigma + d_obj[i]);
                }
                if b.cholesky_in_place() {
                    let mut rhs: Vec<f64> = free_list.iter().map(|&i| -grad[i]).collect();
                    b.solve_in_place(&mut rhs);
                    step.iter_mut().for_each(|v| *v = 0.0);
                    for (f, &i) in free_list.iter().enumerate() {
                        step[i] = rhs[f];
                    }
                    true
                } else {
                    false
                }
            };
            if !solved {
                *sigma = (*sigma * 10.0).min(SIGMA_MAX);
                continue;
            }

            // Projected backtracking line search.
            let mut t = 1.0f64;
            for _ in 0..30 {
                for i in 0..n {
                    x_trial[i] =
                        (x[i] + t * step[i]).clamp(ext.lower[i], ext.upper[i]);
                }
                let mut dir_deriv = 0.0;
                for i in 0..n {
                    dir_deriv += grad[i] * (x_trial[i] - x[i]);
                }
                if dir_deriv > 0.0 {
                    // Projection turned the step uphill; shrink.
                    t *= 0.5;
                    continue;
                }
                match ext.phi(&x_trial, lambda, rho) {
                    Some(phi_trial) if phi_trial <= phi + ARMIJO_C1 * dir_deriv => {
                        x.copy_from_slice(&x_trial);
                        phi = phi_trial;
                        accepted = true;
                        ls_shrunk = t < 1.0;
                        break;
                    }
                    Some(_) => t *= 0.5,
                    None => {
                        // Evaluation failed inside the trial region: treat
                        // like an overlong step unless it persists at the
                        // current point.
                        if t < 1e-12 {
                            return Err(InnerError::Evaluation);
                        }
                        ext.eval_error = None;
                        t *= 0.25;
                    }
                }
                if t < 1e-14 {
                    break;
                }
            }
            if accepted {
                break;
            }
            *sigma = (*sigma * 10.0).min(SIGMA_MAX);
        }
        band.n = n;
        if !accepted {
            // No decrease found at maximal damping: stalled.
            return Ok(InnerOutcome {
                iterations,
                projected_gradient: pg,
                reached_tol: false,
            });
        }
        // Damping adaptation.
        if ls_shrunk {
            *sigma = (*sigma * 4.0).min(SIGMA_MAX);
        } else {
            *sigma = (*sigma * 0.33).max(SIGMA_MIN);
        }

        phi = ext
            .phi_grad(x, lambda, rho, &mut grad)
            .ok_or(InnerError::Evaluation)?;
        pg = ext.projected_gradient_norm(x, &grad);
        // Secant update of the objective curvature diagonal.
        for i in 0..n {
            let s = x[i] - x_prev[i];
            if s.abs() > 1e-11 * (1.0 + x[i].abs()) {
                let est = (ext.g_obj[i] - g_obj_prev[i]) / s;
                if est.is_finite() {
                    d_obj[i] = est.clamp(0.0, 1e12);
                }
            }
        }
        x_prev.copy_from_slice(x);
        g_obj_prev.copy_from_slice(&ext.g_obj);
        if verbosity >= 2 {
            eprintln!("    gn iter {iterations:4}  phi {phi:.6e}  pg {pg:.3e}  sigma {sigma:.1e}");
        }
    }

    Ok(InnerOutcome {
        iterations,
        projected_gradient: pg,
        reached_tol: pg <= tol,
    })
}
