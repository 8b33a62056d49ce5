//! Projected L-BFGS inner minimizer for the augmented-Lagrangian
//! subproblem: two-loop recursion on the free variables with a projected
//! backtracking line search.

use super::solver::{Extended, InnerError, InnerOutcome};

const ARMIJO_C1: f64 = 1e-4;

#[allow(clippy::too_many_arguments)]
pub(crate) fn minimize(
    ext: &mut Extended,
    lambda: &[f64],
    rho: f64,
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    memory: usize,
    verbosity: u8,
) -> Result<InnerOutcome, InnerError> {
    let n = ext.n;
    let mut grad = vec![0.0; n];
    let mut phi = ext
        .phi_grad(x, lambda, rho, &mut grad)
        .ok_or(InnerError::Evaluation)?;
    let mut pg = ext.projected_gradient_norm(x, &grad);

    let mut s_mem: Vec<Vec<f64>> = Vec::new();
    let mut y_mem: Vec<Vec<f64>> = Vec::new();
    let mut rho_mem: Vec<f64> = Vec::new();
    let mut gamma = 1.0f64;

    let mut dir = vec![0.0; n];
    let mut x_trial = vec![0.0; n];
    let mut grad_new = vec![0.0; n];
    let mut iterations = 0usize;

    while iterations < max_iter {
        if pg <= tol {
            return Ok(InnerOutcome {
                iterations,
                projected_gradient: pg,
                reached_tol: true,
            });
        }
        iterations += 1;

        // Two-loop recursion.
        dir.copy_from_slice(&grad);
        let k = s_mem.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            let mut si_dot = 0.0;
            for j in 0..n {
                si_dot += s_mem[i][j] * dir[j];
            }
            alpha[i] = rho_mem[i] * si_dot;
            for j in 0..n {
                dir[j] -= alpha[i] * y_mem[i][j];
            }
        }
        for d in dir.iter_mut() {
            *d *= gamma;
        }
        for i in 0..k {
            let mut yi_dot = 0.0;
            for j in 0..n {
                yi_dot += y_mem[i][j] * dir[j];
            }
            let beta = rho_mem[i] * yi_dot;
            for j in 0..n {
                dir[j] += s_mem[i][j] * (alpha[i] - beta);
            }
        }
        for d in dir.iter_mut() {
            *d = -*d;
        }
        // Do not step into active bounds.
        for i in 0..n {
            let at_lower = x[i] - ext.lower[i] <= 1e-12 * (1.0 + x[i].abs());
            let at_upper = ext.upper[i] - x[i] <= 1e-12 * (1.0 + x[i].abs());
            if (at_lower && dir[i] < 0.0) || (at_upper && dir[i] > 0.0) {
                dir[i] = 0.0;
            }
        }
        let descent: f64 = dir.iter().zip(grad.iter()).map(|(d, g)| d * g).sum();
        if !(descent < 0.0) {
            // Memory no longer useful; restart with steepest descent.
            s_mem.clear();
            y_mem.clear();
            rho_mem.clear();
            gamma = 1.0;
            for i in 0..n {
                dir[i] = -grad[i];
                let at_lower = x[i] - ext.lower[i] <= 1e-12 * (1.0 + x[i].abs());
                let at_upper = ext.upper[i] - x[i] <= 1e-12 * (1.0 + x[i].abs());
                if (at_lower && dir[i] < 0.0) || (at_upper && dir[i] > 0.0) {
                    dir[i] = 0.0;
                }
            }
        }

        // Projected backtracking.
        let mut t = 1.0f64;
        let mut accepted = false;
        for _ in 0..40 {
            for i in 0..n {
                x_trial[i] = (x[i] + t * dir[i]).clamp(ext.lower[i], ext.upper[i]);
            }
            let mut dir_deriv = 0.0;
            for i in 0..n {
                dir_deriv += grad[i] * (x_trial[i] - x[i]);
            }
            if dir_deriv >= 0.0 {
                t *= 0.5;
                if t < 1e-16 {
                    break;
                }
                continue;
            }
            match ext.phi(&x_trial, lambda, rho) {
                Some(phi_trial) if phi_trial <= phi + ARMIJO_C1 * dir_deriv => {
                    accepted = true;
                    break;
                }
                Some(_) => t *= 0.5,
                None => {
                    if t < 1e-12 {
                        return Err(InnerError::Evaluation);
                    }
                    ext.eval_error = None;
                    t *= 0.25;
                }
            }
            if t < 1e-16 {
                break;
            }
        }
        if !accepted {
            return Ok(InnerOutcome {
                iterations,
                projected_gradient: pg,
                reached_tol: false,
            });
        }

        let phi_new = ext
            .phi_grad(&x_trial, lambda, rho, &mut grad_new)
            .ok_or(InnerError::Evaluation)?;
        // Curvature pair from the projected displacement.
        let mut s_vec = vec![0.0; n];
        let mut y_vec = vec![0.0; n];
        let mut sy = 0.0;
        let mut yy = 0.0;
        for i in 0..n {
            s_vec[i] = x_trial[i] - x[i];
            y_vec[i] = grad_new[i] - grad[i];
            sy += s_vec[i] * y_vec[i];
            yy += y_vec[i] * y_vec[i];
        }
        if sy > 1e-10 * yy.sqrt() * s_vec.iter().map(|v| v * v).sum::<f64>().sqrt() && sy > 0.0 {
            if s_mem.len() == memory {
                s_mem.remove(0);
                y_mem.remove(0);
                rho_mem.remove(0);
            }
            gamma = sy / yy;
            rho_mem.push(1.0 / sy);
            s_mem.push(s_vec);
            y_mem.push(y_vec);
        }
        x.copy_from_slice(&x_trial);
        grad.copy_from_slice(&grad_new);
        phi = phi_new;
        pg = ext.projected_gradient_norm(x, &grad);
        if verbosity >= 2 {
            eprintln!("    lbfgs iter {iterations:5}  phi {phi:.9e}  pg {pg:.3e}");
        }
    }

    Ok(InnerOutcome {
        iterations,
        projected_gradient: pg,
        reached_tol: pg <= tol,
    })
}
