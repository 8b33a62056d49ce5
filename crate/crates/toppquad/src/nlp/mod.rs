//! Generic smooth constrained optimization with analytic sparse first
//! derivatives.
//!
//! Problems take the form
//!
//! ```text
//! min f(z)   s.t.  c_eq(z) = 0,  c_ineq(z) <= 0,  lo <= z <= hi
//! ```
//!
//! and are solved with an augmented-Lagrangian outer loop around a
//! bound-constrained inner minimizer. Inequalities are converted to
//! equalities with non-negative slacks. Second derivatives are never
//! required: the inner minimizer is either a projected quasi-Newton
//! (L-BFGS) iteration or a damped Gauss-Newton step that exploits the
//! declared Jacobian sparsity.

mod bandchol;
mod bfgs;
pub mod check;
mod lbfgs;
mod newton;
mod solver;
#[cfg(test)]
mod tests;

pub use check::{check_derivatives, DerivativeCheck};
pub use solver::solve;

use std::time::Duration;

/// Jacobian sparsity in coordinate form; `entries[k] = (row, col)` and the
/// evaluator writes the k-th value in the same order.
#[derive(Debug, Clone, Default)]
pub struct SparsityPattern {
    pub entries: Vec<(usize, usize)>,
}

impl SparsityPattern {
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn push(&mut self, row: usize, col: usize) -> usize {
        self.entries.push((row, col));
        self.entries.len() - 1
    }
}

/// Objective evaluator: returns `f(z)` and, when a slot is supplied, fills
/// the dense gradient.
pub type ObjectiveEval = Box<dyn Fn(&[f64], Option<&mut [f64]>) -> f64 + Send + Sync>;

/// Constraint evaluator: fills `values` and, when a slot is supplied, the
/// Jacobian values aligned with the declared pattern.
pub type ConstraintEval = Box<dyn Fn(&[f64], &mut [f64], Option<&mut [f64]>) + Send + Sync>;

/// A block of constraints sharing one evaluator.
pub struct ConstraintBlock {
    pub count: usize,
    pub pattern: SparsityPattern,
    pub eval: ConstraintEval,
    /// Characteristic magnitude per constraint; residuals are divided by
    /// these before tolerance checks.
    pub scale: Vec<f64>,
}

impl ConstraintBlock {
    pub fn empty() -> Self {
        Self {
            count: 0,
            pattern: SparsityPattern::default(),
            eval: Box::new(|_, _, _| {}),
            scale: Vec::new(),
        }
    }
}

/// A smooth constrained program with box bounds and analytic sparse first
/// derivatives.
pub struct NlpProblem {
    pub n: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub objective: ObjectiveEval,
    pub equalities: ConstraintBlock,
    /// Inequalities in the form `g(z) <= 0`.
    pub inequalities: ConstraintBlock,
    /// Characteristic magnitude per variable (used to precondition the
    /// iteration); defaults to 1.
    pub x_scale: Vec<f64>,
}

impl NlpProblem {
    /// Bound-constrained problem skeleton with unit scaling.
    pub fn new(n: usize, lower: Vec<f64>, upper: Vec<f64>, objective: ObjectiveEval) -> Self {
        assert_eq!(lower.len(), n);
        assert_eq!(upper.len(), n);
        Self {
            n,
            lower,
            upper,
            objective,
            equalities: ConstraintBlock::empty(),
            inequalities: ConstraintBlock::empty(),
            x_scale: vec![1.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    /// KKT conditions hold to the requested tolerances.
    Converged,
    /// Iteration budget exhausted before the tolerances were met.
    MaxIterations,
    /// The penalty grew to its cap without reaching feasibility; the point
    /// is stationary for the infeasibility measure.
    InfeasibleStationary,
    /// An evaluator returned a non-finite value.
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_converged(self) -> bool {
        self == SolveStatus::Converged
    }
}

/// Diagnostics of one solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Total inner iterations across all outer passes.
    pub iterations: usize,
    pub outer_iterations: usize,
    pub objective: f64,
    /// Largest scaled constraint violation at the final point.
    pub max_violation: f64,
    /// Projected-gradient norm of the Lagrangian in scaled coordinates.
    pub stationarity: f64,
    pub wall_time: Duration,
    /// Index of the offending constraint or variable on numerical failure.
    pub failure_detail: Option<String>,
}

/// Inner minimizer selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum InnerSolver {
    /// Pick per problem: damped Gauss-Newton when the Jacobian is banded or
    /// the problem is small, projected L-BFGS otherwise.
    Auto,
    /// Projected-gradient L-BFGS iteration.
    ProjectedLbfgs,
    /// Damped Gauss-Newton with a banded or dense normal-equations factor.
    GaussNewton,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    /// Total inner-iteration budget.
    pub max_iterations: usize,
    pub max_outer: usize,
    /// Per-subproblem inner iteration cap.
    pub max_inner: usize,
    pub penalty_init: f64,
    pub penalty_factor: f64,
    pub penalty_max: f64,
    pub inner: InnerSolver,
    pub lbfgs_memory: usize,
    /// 0 silent, 1 outer-loop lines, 2 inner detail.
    pub verbosity: u8,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-6,
            opt_tol: 1e-4,
            max_iterations: 3000,
            max_outer: 40,
            max_inner: 400,
            penalty_init: 10.0,
            penalty_factor: 10.0,
            penalty_max: 1e12,
            inner: InnerSolver::Auto,
            lbfgs_memory: 15,
            verbosity: 0,
        }
    }
}
