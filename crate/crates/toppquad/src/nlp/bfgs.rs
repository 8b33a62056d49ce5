//! Dense BFGS inner minimizer for small subproblems.
//!
//! Maintains a full quasi-Newton approximation of the augmented-Lagrangian
//! Hessian; converges superlinearly, which the high-accuracy oracle checks
//! rely on. Only sensible for modest variable counts.

use super::solver::{Extended, InnerError, InnerOutcome};
use nalgebra::{DMatrix, DVector};

const ARMIJO_C1: f64 = 1e-4;

pub(crate) struct BfgsState {
    pub b: DMatrix<f64>,
    pub scaled: bool,
    /// Penalty value the matrix was learned at; a penalty change rescales
    /// the true Hessian, so the approximation restarts.
    pub rho: f64,
}

impl BfgsState {
    pub fn new(n: usize) -> Self {
        Self {
            b: DMatrix::identity(n, n),
            scaled: false,
            rho: f64::NAN,
        }
    }
}

pub(crate) fn minimize(
    ext: &mut Extended,
    lambda: &[f64],
    rho: f64,
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    state: &mut BfgsState,
    verbosity: u8,
) -> Result<InnerOutcome, InnerError> {
    let n = ext.n;
    if state.rho != rho {
        state.b = DMatrix::identity(n, n);
        state.scaled = false;
        state.rho = rho;
    }
    let mut grad = vec![0.0; n];
    let mut phi = ext
        .phi_grad(x, lambda, rho, &mut grad)
        .ok_or(InnerError::Evaluation)?;
    let mut pg = ext.projected_gradient_norm(x, &grad);
    let mut iterations = 0usize;
    let mut x_trial = vec![0.0; n];
    let mut grad_new = vec![0.0; n];
    let mut sigma = 0.0f64;

    while iterations < max_iter {
        if pg <= tol {
            return Ok(InnerOutcome {
                iterations,
                projected_gradient: pg,
                reached_tol: true,
            });
        }
        iterations += 1;

        // Free variables: not pinned, not at an active bound with an
        // outward gradient.
        let mut free_list = Vec::with_capacity(n);
        let mut free = vec![usize::MAX; n];
        for i in 0..n {
            let at_lower = x[i] - ext.lower[i] <= 1e-12 * (1.0 + x[i].abs());
            let at_upper = ext.upper[i] - x[i] <= 1e-12 * (1.0 + x[i].abs());
            let fixed = ext.lower[i] == ext.upper[i];
            if !(fixed || (at_lower && grad[i] >= 0.0) || (at_upper && grad[i] <= 0.0)) {
                free[i] = free_list.len();
                free_list.push(i);
            }
        }
        let nf = free_list.len();
        if nf == 0 {
            return Ok(InnerOutcome {
                iterations,
                projected_gradient: pg,
                reached_tol: pg <= tol,
            });
        }

        let mut accepted = false;
        let mut step = vec![0.0; n];
        for _round in 0..10 {
            let mut h = DMatrix::<f64>::zeros(nf, nf);
            for (a, &i) in free_list.iter().enumerate() {
                for (b_idx, &j) in free_list.iter().enumerate() {
                    h[(a, b_idx)] = state.b[(i, j)];
                }
                h[(a, a)] += sigma;
            }
            let rhs = DVector::from_iterator(nf, free_list.iter().map(|&i| -grad[i]));
            let solved = match h.cholesky() {
                Some(ch) => {
                    let sol = ch.solve(&rhs);
                    step.iter_mut().for_each(|v| *v = 0.0);
                    for (f, &i) in free_list.iter().enumerate() {
                        step[i] = sol[f];
                    }
                    true
                }
                None => false,
            };
            if !solved {
                sigma = sigma.max(1e-8) * 10.0;
                continue;
            }
            let mut t = 1.0f64;
            for _ in 0..40 {
                for i in 0..n {
                    x_trial[i] = (x[i] + t * step[i]).clamp(ext.lower[i], ext.upper[i]);
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
            if accepted {
                if t >= 1.0 {
                    sigma *= 0.1;
                }
                break;
            }
            sigma = sigma.max(1e-8) * 10.0;
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
        // BFGS update from the projected displacement.
        let s = DVector::from_iterator(n, (0..n).map(|i| x_trial[i] - x[i]));
        let y = DVector::from_iterator(n, (0..n).map(|i| grad_new[i] - grad[i]));
        let sy = s.dot(&y);
        if sy > 1e-10 * s.norm() * y.norm() {
            if !state.scaled {
                let yy = y.dot(&y);
                state.b = DMatrix::identity(n, n) * (yy / sy);
                state.scaled = true;
            }
            let bs = &state.b * &s;
            let sbs = s.dot(&bs);
            if sbs > 0.0 {
                state.b -= &bs * bs.transpose() / sbs;
            }
            state.b += &y * y.transpose() / sy;
        }
        x.copy_from_slice(&x_trial);
        grad.copy_from_slice(&grad_new);
        phi = phi_new;
        pg = ext.projected_gradient_norm(x, &grad);
        if verbosity >= 2 {
            eprintln!("    bfgs iter {iterations:4}  phi {phi:.9e}  pg {pg:.3e}");
        }
    }

    Ok(InnerOutcome {
        iterations,
        projected_gradient: pg,
        reached_tol: pg <= tol,
    })
}
