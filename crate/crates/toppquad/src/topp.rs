//! Time-optimal path parameterization under full rigid-body dynamics.
//!
//! The program decides per-node values of `(h, h', q, w, alpha, u)` on the
//! path grid and minimizes the traversal-time quadrature subject to:
//! forward-Euler integration of `h` and `w`; the node-wise translational and
//! rotational dynamics relating the profile to motor thrusts through the
//! attitude; a normalized forward-Euler quaternion update per interval; a
//! unit-norm constraint per node; box bounds on thrusts and (optionally)
//! square speed. The geometric path itself never changes.

use std::sync::Arc;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use thiserror::Error;

use crate::nlp::{
    self, ConstraintBlock, NlpProblem, SolveReport, SolverOptions, SparsityPattern,
};
use crate::path::{build_grid, GeometricPath, PathGrid};
use crate::quad::{skew, MotorThrusts, QuadParams};
use crate::reparam::{
    traversal_time_h, RotationProfile, SpeedProfile, ToppDecisionState, H_INTERIOR_FLOOR,
};

/// Square-speed floor inside the objective only; keeps the quadrature
/// differentiable at pinned-zero endpoints.
const OBJECTIVE_H_FLOOR: f64 = 1e-15;

/// Endpoint handling for the profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BoundaryMode {
    /// `h`, `w` pinned to zero and `q` pinned to the guess attitude at both
    /// ends.
    #[serde(rename = "rest-to-rest")]
    RestToRest,
    /// All endpoint variables free.
    #[serde(rename = "free-ends")]
    FreeEnds,
}

#[derive(Debug, Clone)]
pub struct ToppOptions {
    /// Grid interval count.
    pub n_grid: usize,
    /// Optional speed cap, enforced as `h_i <= v_max^2 / |gamma'_i|^2`.
    pub v_max: Option<f64>,
    /// Extend motor bounds to `[-u_max, u_max]`.
    pub bidirectional: bool,
    pub boundary: BoundaryMode,
    pub solver: SolverOptions,
}

impl Default for ToppOptions {
    fn default() -> Self {
        Self {
            n_grid: 300,
            v_max: None,
            bidirectional: false,
            boundary: BoundaryMode::RestToRest,
            solver: SolverOptions::default(),
        }
    }
}

impl ToppOptions {
    fn validate(&self) {
        assert!(self.n_grid >= 10, "grid too coarse: N = {}", self.n_grid);
        if let Some(v) = self.v_max {
            assert!(v > 0.0, "v_max must be positive, got {v}");
        }
    }

    fn u_lower(&self, params: &QuadParams) -> f64 {
        if self.bidirectional {
            -params.u_max
        } else {
            params.u_min
        }
    }
}

/// Solved profile bundle.
#[derive(Debug, Clone)]
pub struct ToppSolution {
    pub grid: PathGrid,
    pub speed: SpeedProfile,
    pub rotation: RotationProfile,
    pub thrusts: Vec<MotorThrusts>,
    pub total_time: f64,
    pub report: SolveReport,
}

impl ToppSolution {
    pub fn decision_state(&self) -> ToppDecisionState {
        ToppDecisionState {
            h: self.speed.h.clone(),
            hp: self.speed.hp.clone(),
            q: self.rotation.q.clone(),
            w: self.rotation.w.clone(),
            alpha: self.rotation.alpha.clone(),
            u: self.thrusts.iter().map(|t| t.0).collect(),
        }
    }

    pub fn max_motor_thrust(&self) -> f64 {
        self.thrusts
            .iter()
            .map(|t| t.max())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_motor_thrust(&self) -> f64 {
        self.thrusts
            .iter()
            .map(|t| t.min())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Error)]
pub enum ToppError {
    #[error("guess has {guess} nodes but the grid has {grid}")]
    GridMismatch { guess: usize, grid: usize },
    #[error("solver did not converge: {status:?} (feas {feas:.2e}, stationarity {stat:.2e})")]
    NotConverged {
        status: nlp::SolveStatus,
        feas: f64,
        stat: f64,
        report: SolveReport,
    },
    #[error("converged to a profile slower than the guess: {time:.4} s > {guess_time:.4} s * 1.01")]
    SlowerThanGuess {
        time: f64,
        guess_time: f64,
        solution: Box<ToppSolution>,
    },
    #[error(transparent)]
    Reparam(#[from] crate::reparam::ReparamError),
}

/// Variable layout: 16 values per node in the order
/// `(h, h', q[4], w[3], alpha[3], u[4])`.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub nodes: usize,
}

impl Layout {
    pub const STRIDE: usize = 16;

    pub fn new(nodes: usize) -> Self {
        Self { nodes }
    }

    pub fn n_vars(&self) -> usize {
        Self::STRIDE * self.nodes
    }

    #[inline]
    pub fn h(&self, i: usize) -> usize {
        Self::STRIDE * i
    }

    #[inline]
    pub fn hp(&self, i: usize) -> usize {
        Self::STRIDE * i + 1
    }

    #[inline]
    pub fn q(&self, i: usize) -> usize {
        Self::STRIDE * i + 2
    }

    #[inline]
    pub fn w(&self, i: usize) -> usize {
        Self::STRIDE * i + 6
    }

    #[inline]
    pub fn alpha(&self, i: usize) -> usize {
        Self::STRIDE * i + 9
    }

    #[inline]
    pub fn u(&self, i: usize) -> usize {
        Self::STRIDE * i + 12
    }
}

pub fn decision_to_vec(state: &ToppDecisionState) -> Vec<f64> {
    let n = state.node_count();
    let lay = Layout::new(n);
    let mut z = vec![0.0; lay.n_vars()];
    for i in 0..n {
        z[lay.h(i)] = state.h[i];
        z[lay.hp(i)] = state.hp[i];
        for k in 0..4 {
            z[lay.q(i) + k] = state.q[i][k];
            z[lay.u(i) + k] = state.u[i][k];
        }
        for k in 0..3 {
            z[lay.w(i) + k] = state.w[i][k];
            z[lay.alpha(i) + k] = state.alpha[i][k];
        }
    }
    z
}

pub fn vec_to_decision(nodes: usize, z: &[f64]) -> ToppDecisionState {
    let lay = Layout::new(nodes);
    assert_eq!(z.len(), lay.n_vars());
    let mut state = ToppDecisionState {
        h: vec![0.0; nodes],
        hp: vec![0.0; nodes],
        q: vec![Vector4::zeros(); nodes],
        w: vec![Vector3::zeros(); nodes],
        alpha: vec![Vector3::zeros(); nodes],
        u: vec![Vector4::zeros(); nodes],
    };
    for i in 0..nodes {
        state.h[i] = z[lay.h(i)];
        state.hp[i] = z[lay.hp(i)];
        for k in 0..4 {
            state.q[i][k] = z[lay.q(i) + k];
            state.u[i][k] = z[lay.u(i) + k];
        }
        for k in 0..3 {
            state.w[i][k] = z[lay.w(i) + k];
            state.alpha[i][k] = z[lay.alpha(i) + k];
        }
    }
    state
}

/// Constraint row bookkeeping: one contiguous block per family.
#[derive(Debug, Clone, Copy)]
struct Rows {
    n: usize, // intervals
}

impl Rows {
    fn h_euler(&self, i: usize) -> usize {
        i
    }

    fn w_euler(&self, i: usize, k: usize) -> usize {
        self.n + 3 * i + k
    }

    fn quat(&self, i: usize, k: usize) -> usize {
        4 * self.n + 4 * i + k
    }

    fn translational(&self, i: usize, k: usize) -> usize {
        8 * self.n + 3 * i + k
    }

    fn rotational(&self, i: usize, k: usize) -> usize {
        8 * self.n + 3 * (self.n + 1) + 3 * i + k
    }

    fn norm(&self, i: usize) -> usize {
        8 * self.n + 6 * (self.n + 1) + i
    }

    fn count(&self) -> usize {
        8 * self.n + 7 * (self.n + 1)
    }
}

/// Body z-axis of the (not necessarily unit) quaternion in polynomial form,
/// plus its Jacobian with respect to the quaternion components.
#[inline]
fn body_z(q: &Vector4<f64>) -> (Vector3<f64>, [[f64; 4]; 3]) {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let zvec = Vector3::new(
        2.0 * (x * z + w * y),
        2.0 * (y * z - w * x),
        w * w - x * x - y * y + z * z,
    );
    let dz = [
        [2.0 * y, 2.0 * z, 2.0 * w, 2.0 * x],
        [-2.0 * x, -2.0 * w, 2.0 * z, 2.0 * y],
        [2.0 * w, -2.0 * x, -2.0 * y, 2.0 * z],
    ];
    (zvec, dz)
}

/// Quaternion kinematics product `Omega(w) q` and its Jacobian columns with
/// respect to `w`.
#[inline]
fn omega_q(w: &Vector3<f64>, q: &Vector4<f64>) -> (Vector4<f64>, [Vector4<f64>; 3]) {
    let qv = Vector3::new(q[1], q[2], q[3]);
    let qw = q[0];
    let head = -w.dot(&qv);
    let tail = qw * w + qv.cross(w);
    let val = Vector4::new(head, tail.x, tail.y, tail.z);
    let mut cols = [Vector4::zeros(); 3];
    for m in 0..3 {
        let em = Vector3::ith(m, 1.0);
        let t = qw * em + qv.cross(&em);
        cols[m] = Vector4::new(-qv[m], t.x, t.y, t.z);
    }
    (val, cols)
}

/// Everything the evaluators capture.
struct ProgramData {
    nodes: usize,
    ds: f64,
    gamma_p: Vec<Vector3<f64>>,
    gamma_pp: Vec<Vector3<f64>>,
    mass: f64,
    gravity: Vector3<f64>,
    inertia: Matrix3<f64>,
    /// First row of the allocation matrix (collective thrust).
    f_thrust: Vector4<f64>,
    /// Rows 2..4 of the allocation matrix (torques).
    f_torque: [Vector4<f64>; 3],
}

impl ProgramData {
    fn new(grid: &PathGrid, params: &QuadParams) -> Self {
        let nodes = grid.node_count();
        Self {
            nodes,
            ds: grid.ds(),
            gamma_p: (0..nodes).map(|i| grid.gamma_p(i)).collect(),
            gamma_pp: (0..nodes).map(|i| grid.gamma_pp(i)).collect(),
            mass: params.mass,
            gravity: params.gravity,
            inertia: params.inertia,
            f_thrust: params.allocation.row(0).transpose(),
            f_torque: [
                params.allocation.row(1).transpose(),
                params.allocation.row(2).transpose(),
                params.allocation.row(3).transpose(),
            ],
        }
    }

    fn rows(&self) -> Rows {
        Rows { n: self.nodes - 1 }
    }

    /// Jacobian pattern in exactly the order `eval` writes values.
    fn build_pattern(&self) -> SparsityPattern {
        let lay = Layout::new(self.nodes);
        let rows = self.rows();
        let n = self.nodes - 1;
        let mut pat = SparsityPattern::default();
        for i in 0..n {
            let r = rows.h_euler(i);
            pat.push(r, lay.h(i + 1));
            pat.push(r, lay.h(i));
            pat.push(r, lay.hp(i));
        }
        for i in 0..n {
            for k in 0..3 {
                let r = rows.w_euler(i, k);
                pat.push(r, lay.w(i + 1) + k);
                pat.push(r, lay.w(i) + k);
                pat.push(r, lay.alpha(i) + k);
            }
        }
        for i in 0..n {
            for k in 0..4 {
                let r = rows.quat(i, k);
                pat.push(r, lay.q(i + 1) + k);
                for l in 0..4 {
                    pat.push(r, lay.q(i) + l);
                }
                for m in 0..3 {
                    pat.push(r, lay.w(i) + m);
                }
            }
        }
        for i in 0..=n {
            for k in 0..3 {
                let r = rows.translational(i, k);
                pat.push(r, lay.h(i));
                pat.push(r, lay.hp(i));
                for l in 0..4 {
                    pat.push(r, lay.q(i) + l);
                }
                for j in 0..4 {
                    pat.push(r, lay.u(i) + j);
                }
            }
        }
        for i in 0..=n {
            for k in 0..3 {
                let r = rows.rotational(i, k);
                pat.push(r, lay.h(i));
                pat.push(r, lay.hp(i));
                for m in 0..3 {
                    pat.push(r, lay.w(i) + m);
                }
                for m in 0..3 {
                    pat.push(r, lay.alpha(i) + m);
                }
                for j in 0..4 {
                    pat.push(r, lay.u(i) + j);
                }
            }
        }
        for i in 0..=n {
            let r = rows.norm(i);
            for l in 0..4 {
                pat.push(r, lay.q(i) + l);
            }
        }
        pat
    }

    fn eval(&self, z: &[f64], vals: &mut [f64], mut jac: Option<&mut [f64]>) {
        let lay = Layout::new(self.nodes);
        let rows = self.rows();
        let n = self.nodes - 1;
        let ds = self.ds;
        let mut kj = 0usize;
        let mut put = |jac: &mut Option<&mut [f64]>, v: f64| {
            if let Some(j) = jac.as_deref_mut() {
                j[kj] = v;
                kj += 1;
            }
        };

        for i in 0..n {
            vals[rows.h_euler(i)] = z[lay.h(i + 1)] - z[lay.h(i)] - ds * z[lay.hp(i)];
            put(&mut jac, 1.0);
            put(&mut jac, -1.0);
            put(&mut jac, -ds);
        }
        for i in 0..n {
            for k in 0..3 {
                vals[rows.w_euler(i, k)] =
                    z[lay.w(i + 1) + k] - z[lay.w(i) + k] - ds * z[lay.alpha(i) + k];
                put(&mut jac, 1.0);
                put(&mut jac, -1.0);
                put(&mut jac, -ds);
            }
        }
        for i in 0..n {
            let q = Vector4::new(
                z[lay.q(i)],
                z[lay.q(i) + 1],
                z[lay.q(i) + 2],
                z[lay.q(i) + 3],
            );
            let qn = Vector4::new(
                z[lay.q(i + 1)],
                z[lay.q(i + 1) + 1],
                z[lay.q(i + 1) + 2],
                z[lay.q(i + 1) + 3],
            );
            let w = Vector3::new(z[lay.w(i)], z[lay.w(i) + 1], z[lay.w(i) + 2]);
            let kappa = (1.0 + ds * ds / 4.0 * w.norm_squared()).sqrt();
            let dkappa = w * (ds * ds / 4.0 / kappa);
            let (oq, doq) = omega_q(&w, &q);
            let a_mat = Matrix4::identity() + crate::quad::omega_matrix(&w) * (ds / 2.0);
            for k in 0..4 {
                vals[rows.quat(i, k)] = kappa * qn[k] - q[k] - ds / 2.0 * oq[k];
                put(&mut jac, kappa);
                for l in 0..4 {
                    put(&mut jac, -a_mat[(k, l)]);
                }
                for m in 0..3 {
                    put(&mut jac, dkappa[m] * qn[k] - ds / 2.0 * doq[m][k]);
                }
            }
        }
        for i in 0..=n {
            let q = Vector4::new(
                z[lay.q(i)],
                z[lay.q(i) + 1],
                z[lay.q(i) + 2],
                z[lay.q(i) + 3],
            );
            let u = Vector4::new(
                z[lay.u(i)],
                z[lay.u(i) + 1],
                z[lay.u(i) + 2],
                z[lay.u(i) + 3],
            );
            let (zvec, dz) = body_z(&q);
            let c_u = self.f_thrust.dot(&u);
            let h = z[lay.h(i)];
            let hp = z[lay.hp(i)];
            let gp = self.gamma_p[i];
            let gpp = self.gamma_pp[i];
            for k in 0..3 {
                vals[rows.translational(i, k)] = self.mass
                    * (0.5 * gp[k] * hp + gpp[k] * h - self.gravity[k])
                    - zvec[k] * c_u;
                put(&mut jac, self.mass * gpp[k]);
                put(&mut jac, 0.5 * self.mass * gp[k]);
                for l in 0..4 {
                    put(&mut jac, -c_u * dz[k][l]);
                }
                for j in 0..4 {
                    put(&mut jac, -zvec[k] * self.f_thrust[j]);
                }
            }
        }
        for i in 0..=n {
            let w = Vector3::new(z[lay.w(i)], z[lay.w(i) + 1], z[lay.w(i) + 2]);
            let a = Vector3::new(
                z[lay.alpha(i)],
                z[lay.alpha(i) + 1],
                z[lay.alpha(i) + 2],
            );
            let u = Vector4::new(
                z[lay.u(i)],
                z[lay.u(i) + 1],
                z[lay.u(i) + 2],
                z[lay.u(i) + 3],
            );
            let h = z[lay.h(i)];
            let hp = z[lay.hp(i)];
            let jw = self.inertia * w;
            let ja = self.inertia * a;
            let gyro = w.cross(&jw);
            // d(w x Jw)/dw = [w x] J - [Jw x].
            let dgyro = skew(&w) * self.inertia - skew(&jw);
            for k in 0..3 {
                let torque_k = self.f_torque[k].dot(&u);
                vals[rows.rotational(i, k)] =
                    0.5 * hp * jw[k] + h * ja[k] + h * gyro[k] - torque_k;
                put(&mut jac, ja[k] + gyro[k]);
                put(&mut jac, 0.5 * jw[k]);
                for m in 0..3 {
                    put(
                        &mut jac,
                        0.5 * hp * self.inertia[(k, m)] + h * dgyro[(k, m)],
                    );
                }
                for m in 0..3 {
                    put(&mut jac, h * self.inertia[(k, m)]);
                }
                for j in 0..4 {
                    put(&mut jac, -self.f_torque[k][j]);
                }
            }
        }
        for i in 0..=n {
            let base = lay.q(i);
            let mut norm2 = 0.0;
            for l in 0..4 {
                norm2 += z[base + l] * z[base + l];
            }
            vals[rows.norm(i)] = norm2 - 1.0;
            for l in 0..4 {
                put(&mut jac, 2.0 * z[base + l]);
            }
        }
    }
}

/// Traversal-time quadrature with the differentiability floor; the gradient
/// only touches `h` entries.
fn objective_eval(nodes: usize, ds: f64, z: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let lay = Layout::new(nodes);
    let mut t = 0.0;
    match grad {
        None => {
            for i in 0..nodes - 1 {
                let a = z[lay.h(i)].max(OBJECTIVE_H_FLOOR).sqrt();
                let b = z[lay.h(i + 1)].max(OBJECTIVE_H_FLOOR).sqrt();
                t += 2.0 * ds / (a + b);
            }
        }
        Some(g) => {
            for i in 0..nodes - 1 {
                let ha = z[lay.h(i)];
                let hb = z[lay.h(i + 1)];
                let a = ha.max(OBJECTIVE_H_FLOOR).sqrt();
                let b = hb.max(OBJECTIVE_H_FLOOR).sqrt();
                let denom = a + b;
                t += 2.0 * ds / denom;
                let common = -ds / (denom * denom);
                if ha > OBJECTIVE_H_FLOOR {
                    g[lay.h(i)] += common / a;
                }
                if hb > OBJECTIVE_H_FLOOR {
                    g[lay.h(i + 1)] += common / b;
                }
            }
        }
    }
    t
}

/// Constraint-family normalization shared by the solver and the validator:
/// translational rows by the hover force, rotational rows by the peak torque
/// each axis can produce, quaternion-norm rows by 0.1 (the scaled tolerance
/// then corresponds to a tighter raw norm error).
fn family_scales(params: &QuadParams) -> (f64, [f64; 3], f64) {
    let trans = params.mass * params.gravity.norm();
    let mut rot = [0.0; 3];
    for k in 0..3 {
        let row = params.allocation.row(k + 1);
        rot[k] = row.iter().map(|v| v.abs()).sum::<f64>() * params.u_max;
    }
    (trans, rot, 0.1)
}

/// Assemble the nonlinear program over the decision bundle.
///
/// The guess supplies the endpoint attitudes pinned in rest-to-rest mode.
pub fn assemble(
    grid: &PathGrid,
    params: &QuadParams,
    guess: &ToppDecisionState,
    opts: &ToppOptions,
) -> NlpProblem {
    opts.validate();
    assert_eq!(
        guess.node_count(),
        grid.node_count(),
        "guess/grid node mismatch"
    );
    let data = Arc::new(ProgramData::new(grid, params));
    let nodes = data.nodes;
    let lay = Layout::new(nodes);
    let n_vars = lay.n_vars();

    let mut lower = vec![f64::NEG_INFINITY; n_vars];
    let mut upper = vec![f64::INFINITY; n_vars];
    let u_lo = opts.u_lower(params);
    for i in 0..nodes {
        let h_cap = match opts.v_max {
            Some(v) => {
                let g2 = grid.gamma_p(i).norm_squared();
                if g2 > 1e-12 {
                    v * v / g2
                } else {
                    f64::INFINITY
                }
            }
            None => f64::INFINITY,
        };
        lower[lay.h(i)] = H_INTERIOR_FLOOR;
        upper[lay.h(i)] = h_cap;
        for k in 0..4 {
            lower[lay.q(i) + k] = -2.0;
            upper[lay.q(i) + k] = 2.0;
            lower[lay.u(i) + k] = u_lo;
            upper[lay.u(i) + k] = params.u_max;
        }
    }
    if opts.boundary == BoundaryMode::RestToRest {
        for &i in &[0, nodes - 1] {
            lower[lay.h(i)] = 0.0;
            upper[lay.h(i)] = 0.0;
            for k in 0..3 {
                lower[lay.w(i) + k] = 0.0;
                upper[lay.w(i) + k] = 0.0;
            }
            for k in 0..4 {
                lower[lay.q(i) + k] = guess.q[i][k];
                upper[lay.q(i) + k] = guess.q[i][k];
            }
        }
    }

    let mut x_scale = vec![1.0; n_vars];
    for i in 0..nodes {
        for k in 0..4 {
            x_scale[lay.u(i) + k] = params.u_max;
        }
    }
    let rows = data.rows();
    let (s_trans, s_rot, s_norm) = family_scales(params);
    let mut c_scale = vec![1.0; rows.count()];
    let n = nodes - 1;
    for i in 0..=n {
        for k in 0..3 {
            c_scale[rows.translational(i, k)] = s_trans;
            c_scale[rows.rotational(i, k)] = s_rot[k];
        }
        c_scale[rows.norm(i)] = s_norm;
    }

    let pattern = data.build_pattern();
    let eval_data = data.clone();
    let obj_data = data;
    let mut problem = NlpProblem::new(
        n_vars,
        lower,
        upper,
        Box::new(move |z, grad| objective_eval(obj_data.nodes, obj_data.ds, z, grad)),
    );
    problem.x_scale = x_scale;
    problem.equalities = ConstraintBlock {
        count: rows.count(),
        pattern,
        eval: Box::new(move |z, vals, jac| eval_data.eval(z, vals, jac)),
        scale: c_scale,
    };
    problem
}

/// Solve the time-optimal parameterization from a guess bundle.
///
/// Failure is either solver non-convergence or a converged profile more than
/// 1% slower than the guess it started from.
pub fn solve(
    path: &Arc<GeometricPath>,
    params: &QuadParams,
    opts: &ToppOptions,
    guess: &ToppDecisionState,
) -> Result<ToppSolution, ToppError> {
    let grid = build_grid(path.clone(), opts.n_grid);
    solve_on_grid(grid, params, opts, guess)
}

pub fn solve_on_grid(
    grid: PathGrid,
    params: &QuadParams,
    opts: &ToppOptions,
    guess: &ToppDecisionState,
) -> Result<ToppSolution, ToppError> {
    if guess.node_count() != grid.node_count() {
        return Err(ToppError::GridMismatch {
            guess: guess.node_count(),
            grid: grid.node_count(),
        });
    }
    let guess_time = traversal_time_h(&guess.h, grid.ds())?;
    let problem = assemble(&grid, params, guess, opts);
    let z0 = decision_to_vec(guess);
    let (z, report) = nlp::solve(&problem, &z0, &opts.solver);

    let state = vec_to_decision(grid.node_count(), &z);
    if !report.status.is_converged() {
        return Err(ToppError::NotConverged {
            status: report.status,
            feas: report.max_violation,
            stat: report.stationarity,
            report,
        });
    }
    let total_time = traversal_time_h(&state.h, grid.ds())?;
    let solution = ToppSolution {
        grid,
        speed: SpeedProfile {
            h: state.h.clone(),
            hp: state.hp.clone(),
        },
        rotation: RotationProfile {
            q: state.q.clone(),
            w: state.w.clone(),
            alpha: state.alpha.clone(),
        },
        thrusts: state.u.iter().map(|u| MotorThrusts(*u)).collect(),
        total_time,
        report,
    };
    if total_time > guess_time * 1.01 {
        return Err(ToppError::SlowerThanGuess {
            time: total_time,
            guess_time,
            solution: Box::new(solution),
        });
    }
    Ok(solution)
}

/// Residuals of one constraint family, normalized by the family scale.
#[derive(Debug, Clone)]
pub struct FamilyResidual {
    pub family: &'static str,
    pub max_residual: f64,
    pub tolerance: f64,
}

/// Independent re-evaluation of every constraint family at a solution.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub families: Vec<FamilyResidual>,
    /// Worst raw thrust-bound violation in newtons.
    pub thrust_violation: f64,
    pub pass: bool,
}

impl ValidationReport {
    pub fn family(&self, name: &str) -> Option<&FamilyResidual> {
        self.families.iter().find(|f| f.family == name)
    }

    pub fn max_dynamics_residual(&self) -> f64 {
        self.families
            .iter()
            .filter(|f| f.family != "quat-norm")
            .map(|f| f.max_residual)
            .fold(0.0, f64::max)
    }
}

/// Re-evaluate the discretized dynamics at a decision bundle and report the
/// worst normalized residual per family. PASS requires every dynamics family
/// at or below 1e-5 (normalized), quaternion norms within 1e-7, and thrust
/// bounds violated by at most 1e-6 N.
pub fn validate_state(
    state: &ToppDecisionState,
    grid: &PathGrid,
    params: &QuadParams,
    opts: &ToppOptions,
) -> ValidationReport {
    let nodes = grid.node_count();
    assert_eq!(state.node_count(), nodes);
    let n = nodes - 1;
    let ds = grid.ds();
    let (s_trans, s_rot, _) = family_scales(params);

    let mut r_h = 0.0f64;
    let mut r_w = 0.0f64;
    let mut r_q = 0.0f64;
    let mut r_trans = 0.0f64;
    let mut r_rot = 0.0f64;
    let mut r_norm = 0.0f64;

    for i in 0..n {
        r_h = r_h.max((state.h[i + 1] - state.h[i] - ds * state.hp[i]).abs());
        let w_res = state.w[i + 1] - state.w[i] - ds * state.alpha[i];
        r_w = r_w.max(w_res.abs().max());
        // Raw update residual: kappa q_{i+1} - (I + ds/2 Omega) q_i.
        let kappa = (1.0 + ds * ds / 4.0 * state.w[i].norm_squared()).sqrt();
        let stepped = crate::reparam::quat_step(&state.q[i], &state.w[i], ds);
        for k in 0..4 {
            r_q = r_q.max(((state.q[i + 1][k] - stepped[k]) * kappa).abs());
        }
    }
    for i in 0..=n {
        let (zvec, _) = body_z(&state.q[i]);
        let c_u = params.allocation.row(0).transpose().dot(&state.u[i]);
        let trans = params.mass
            * (0.5 * grid.gamma_p(i) * state.hp[i] + grid.gamma_pp(i) * state.h[i]
                - params.gravity)
            - zvec * c_u;
        r_trans = r_trans.max(trans.abs().max() / s_trans);

        let w = state.w[i];
        let jw = params.inertia * w;
        let torque_needed = params.inertia
            * (0.5 * w * state.hp[i] + state.alpha[i] * state.h[i])
            + w.cross(&jw) * state.h[i];
        for k in 0..3 {
            let tk = params.allocation.row(k + 1).transpose().dot(&state.u[i]);
            r_rot = r_rot.max((torque_needed[k] - tk).abs() / s_rot[k]);
        }
        r_norm = r_norm.max((state.q[i].norm() - 1.0).abs());
    }
    let u_lo = opts.u_lower(params);
    let mut thrust_violation = 0.0f64;
    for u in &state.u {
        for j in 0..4 {
            thrust_violation = thrust_violation.max(u_lo - u[j]).max(u[j] - params.u_max);
        }
    }
    thrust_violation = thrust_violation.max(0.0);

    let families = vec![
        FamilyResidual {
            family: "h-euler",
            max_residual: r_h,
            tolerance: 1e-5,
        },
        FamilyResidual {
            family: "w-euler",
            max_residual: r_w,
            tolerance: 1e-5,
        },
        FamilyResidual {
            family: "quat-update",
            max_residual: r_q,
            tolerance: 1e-5,
        },
        FamilyResidual {
            family: "translational",
            max_residual: r_trans,
            tolerance: 1e-5,
        },
        FamilyResidual {
            family: "rotational",
            max_residual: r_rot,
            tolerance: 1e-5,
        },
        FamilyResidual {
            family: "quat-norm",
            max_residual: r_norm,
            tolerance: 1e-7,
        },
    ];
    let pass =
        families.iter().all(|f| f.max_residual <= f.tolerance) && thrust_violation <= 1e-6;
    ValidationReport {
        families,
        thrust_violation,
        pass,
    }
}

pub fn validate_solution(
    sol: &ToppSolution,
    params: &QuadParams,
    opts: &ToppOptions,
) -> ValidationReport {
    validate_state(&sol.decision_state(), &sol.grid, params, opts)
}
