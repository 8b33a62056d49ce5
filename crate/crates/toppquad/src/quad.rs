//! Quadrotor rigid-body model: dynamics, control allocation, and the
//! differential-flatness map.
//!
//! State evolves as
//!
//! ```text
//! p_dot = v
//! v_dot = R e3 c/m + g
//! q_dot = 1/2 Omega(w) q        (body rates, body-to-world quaternion)
//! w_dot = J^-1 (tau - w x J w)
//! ```
//!
//! with the collective thrust `c` and body torque `tau` linear in the four
//! motor thrusts through the allocation matrix `F`.

use nalgebra::{Matrix3, Matrix4, Quaternion, UnitQuaternion, Vector3, Vector4};
use thiserror::Error;

use crate::STANDARD_GRAVITY;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("mass must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("inertia matrix is not symmetric positive definite")]
    BadInertia,
    #[error("allocation matrix is singular or near-singular")]
    SingularAllocation,
    #[error("thrust bounds must satisfy u_min < u_max componentwise")]
    BadThrustBounds,
    #[error("flatness singularity: required thrust magnitude {0:.3e} N is too small (free fall)")]
    FreeFallSingularity(f64),
    #[error("flatness singularity: body z-axis is parallel to the yaw reference direction")]
    YawSingularity,
}

/// Per-motor thrusts [N].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorThrusts(pub Vector4<f64>);

impl MotorThrusts {
    pub fn new(u1: f64, u2: f64, u3: f64, u4: f64) -> Self {
        Self(Vector4::new(u1, u2, u3, u4))
    }

    pub fn max(&self) -> f64 {
        self.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Largest bound violation in newtons (0 when inside `[u_min, u_max]`).
    pub fn bound_violation(&self, params: &QuadParams) -> f64 {
        self.0
            .iter()
            .map(|&u| (params.u_min - u).max(u - params.u_max).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Full rigid-body state.
///
/// `attitude` maps body coordinates to world coordinates; `body_rate` is
/// expressed in the body frame.
#[derive(Debug, Clone, Copy)]
pub struct RigidState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub attitude: UnitQuaternion<f64>,
    pub body_rate: Vector3<f64>,
}

impl RigidState {
    pub fn hover_at(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            attitude: UnitQuaternion::identity(),
            body_rate: Vector3::zeros(),
        }
    }
}

/// Time derivative of a [`RigidState`]; the attitude slot holds the raw
/// quaternion derivative (not unit-norm).
#[derive(Debug, Clone, Copy)]
pub struct RigidStateDerivative {
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    pub attitude_dot: Quaternion<f64>,
    pub body_rate_dot: Vector3<f64>,
}

/// Physical parameters of the vehicle.
#[derive(Debug, Clone)]
pub struct QuadParams {
    /// Mass [kg].
    pub mass: f64,
    /// Inertia tensor in the body frame [kg m^2].
    pub inertia: Matrix3<f64>,
    /// Allocation matrix mapping motor thrusts to `(c, tau)` [N, N m].
    pub allocation: Matrix4<f64>,
    /// Lower per-motor thrust bound [N].
    pub u_min: f64,
    /// Upper per-motor thrust bound [N].
    pub u_max: f64,
    /// Gravity vector in world coordinates [m/s^2].
    pub gravity: Vector3<f64>,
    inertia_inv: Matrix3<f64>,
    allocation_inv: Matrix4<f64>,
}

impl QuadParams {
    pub fn new(
        mass: f64,
        inertia: Matrix3<f64>,
        allocation: Matrix4<f64>,
        u_min: f64,
        u_max: f64,
        gravity: Vector3<f64>,
    ) -> Result<Self, ModelError> {
        if !(mass > 0.0) {
            return Err(ModelError::NonPositiveMass(mass));
        }
        if (inertia - inertia.transpose()).abs().max() > 1e-12 * inertia.abs().max() {
            return Err(ModelError::BadInertia);
        }
        let chol = inertia.cholesky().ok_or(ModelError::BadInertia)?;
        let inertia_inv = chol.inverse();
        let allocation_inv = allocation
            .try_inverse()
            .ok_or(ModelError::SingularAllocation)?;
        // Reject numerically useless inverses.
        let residual = (allocation * allocation_inv - Matrix4::identity()).abs().max();
        if !residual.is_finite() || residual > 1e-6 {
            return Err(ModelError::SingularAllocation);
        }
        if !(u_min < u_max) {
            return Err(ModelError::BadThrustBounds);
        }
        Ok(Self {
            mass,
            inertia,
            allocation,
            u_min,
            u_max,
            gravity,
            inertia_inv,
            allocation_inv,
        })
    }

    /// X-configuration allocation matrix.
    ///
    /// Motors sit at 45/135/225/315 degrees (x forward, y left, z up), arm
    /// length `arm` from the center, with alternating rotor spin directions.
    /// `kappa` is the rotor drag-torque-to-thrust ratio [m].
    pub fn x_allocation(arm: f64, kappa: f64) -> Matrix4<f64> {
        let a = arm / f64::sqrt(2.0);
        Matrix4::new(
            1.0, 1.0, 1.0, 1.0, //
            a, a, -a, -a, //
            -a, a, a, -a, //
            -kappa, kappa, -kappa, kappa,
        )
    }

    /// Representative CrazyFlie 2.0 parameters: 32 g vehicle, per-motor
    /// thrust in [0, 0.14375] N.
    ///
    /// Arm length, drag-torque ratio and inertia are nominal values for the
    /// platform; see `configs/crazyflie.toml` for the editable copy.
    pub fn crazyflie() -> Self {
        let inertia = Matrix3::from_diagonal(&Vector3::new(1.43e-5, 1.43e-5, 2.89e-5));
        let allocation = Self::x_allocation(0.046, 0.006);
        Self::new(
            0.032,
            inertia,
            allocation,
            0.0,
            0.14375,
            Vector3::new(0.0, 0.0, -STANDARD_GRAVITY),
        )
        .expect("builtin parameters are valid")
    }

    pub fn inertia_inv(&self) -> &Matrix3<f64> {
        &self.inertia_inv
    }

    /// Collective thrust that balances gravity.
    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity.norm()
    }

    /// Motor thrusts that balance gravity with zero torque.
    pub fn hover_motor_thrusts(&self) -> MotorThrusts {
        self.invert_allocation(self.hover_thrust(), Vector3::zeros())
    }

    /// Map motor thrusts to collective thrust and body torque.
    pub fn allocate_wrench(&self, u: &MotorThrusts) -> (f64, Vector3<f64>) {
        let w = self.allocation * u.0;
        (w[0], Vector3::new(w[1], w[2], w[3]))
    }

    /// Map a `(c, tau)` wrench back to motor thrusts.
    pub fn invert_allocation(&self, thrust: f64, torque: Vector3<f64>) -> MotorThrusts {
        let w = Vector4::new(thrust, torque.x, torque.y, torque.z);
        MotorThrusts(self.allocation_inv * w)
    }
}

/// Antisymmetric cross-product matrix: `skew(w) * x == w.cross(x)`.
pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -w.z, w.y, //
        w.z, 0.0, -w.x, //
        -w.y, w.x, 0.0,
    )
}

/// Quaternion kinematics matrix for body rates: `q_dot = 1/2 Omega(w) q`
/// in scalar-first components.
pub fn omega_matrix(w: &Vector3<f64>) -> Matrix4<f64> {
    Matrix4::new(
        0.0, -w.x, -w.y, -w.z, //
        w.x, 0.0, w.z, -w.y, //
        w.y, -w.z, 0.0, w.x, //
        w.z, w.y, -w.x, 0.0,
    )
}

/// Continuous-time rigid-body dynamics.
pub fn dynamics_rhs(
    state: &RigidState,
    u: &MotorThrusts,
    params: &QuadParams,
) -> RigidStateDerivative {
    let (c, tau) = params.allocate_wrench(u);
    let body_z = state.attitude * Vector3::z();
    let acceleration = body_z * (c / params.mass) + params.gravity;

    let w = state.body_rate;
    let q = state.attitude.quaternion();
    // q_dot = 1/2 q (x) (0, w), identical to 1/2 Omega(w) q.
    let attitude_dot = q * Quaternion::from_parts(0.0, w) * 0.5;

    let j_w = params.inertia * w;
    let body_rate_dot = params.inertia_inv * (tau - w.cross(&j_w));

    RigidStateDerivative {
        velocity: state.velocity,
        acceleration,
        attitude_dot,
        body_rate_dot,
    }
}

/// Flat outputs of the quadrotor: position derivatives through snap plus yaw
/// and its first two derivatives.
#[derive(Debug, Clone, Copy)]
pub struct FlatOutputs {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    pub jerk: Vector3<f64>,
    pub snap: Vector3<f64>,
    pub yaw: f64,
    pub yaw_rate: f64,
    pub yaw_accel: f64,
}

impl FlatOutputs {
    pub fn hover_at(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            acceleration: Vector3::zeros(),
            jerk: Vector3::zeros(),
            snap: Vector3::zeros(),
            yaw: 0.0,
            yaw_rate: 0.0,
            yaw_accel: 0.0,
        }
    }
}

/// Minimum thrust-vector norm below which the flatness map is treated as
/// singular (free fall).
const FLATNESS_THRUST_EPS: f64 = 1e-9;

/// Recover the full state and motor thrusts from flat outputs.
///
/// Body z is aligned with `m (a - g)`; the heading comes from the projected
/// intermediate frame at the given yaw; body rates and thrusts follow from
/// jerk and snap.
pub fn flat_to_state(
    flat: &FlatOutputs,
    params: &QuadParams,
) -> Result<(RigidState, MotorThrusts), ModelError> {
    let f_vec = flat.acceleration - params.gravity;
    let f_norm = f_vec.norm();
    if f_norm * params.mass < FLATNESS_THRUST_EPS {
        return Err(ModelError::FreeFallSingularity(f_norm * params.mass));
    }
    let c = params.mass * f_norm;
    let b3 = f_vec / f_norm;

    let (sin_yaw, cos_yaw) = flat.yaw.sin_cos();
    let x_c = Vector3::new(cos_yaw, sin_yaw, 0.0);
    let y_c = Vector3::new(-sin_yaw, cos_yaw, 0.0);
    let b3_x_xc = b3.cross(&x_c);
    let b3_x_xc_norm = b3_x_xc.norm();
    if b3_x_xc_norm < 1e-9 {
        return Err(ModelError::YawSingularity);
    }
    let b2 = b3_x_xc / b3_x_xc_norm;
    let b1 = b2.cross(&b3);
    let rot = Matrix3::from_columns(&[b1, b2, b3]);
    let attitude = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(rot));

    // Body rates from jerk: m j = c_dot b3 + c (w2 b1 - w1 b2).
    let j = flat.jerk;
    let c_dot = params.mass * j.dot(&b3);
    let w1 = -params.mass * j.dot(&b2) / c;
    let w2 = params.mass * j.dot(&b1) / c;
    // Heading constraint b2 . x_c = 0 differentiated gives w3.
    let a_h = b1.dot(&x_c);
    let b_h = b3.dot(&x_c);
    let c_h = b2.dot(&y_c);
    if a_h.abs() < 1e-9 {
        return Err(ModelError::YawSingularity);
    }
    let w3 = (w1 * b_h + flat.yaw_rate * c_h) / a_h;
    let w = Vector3::new(w1, w2, w3);

    // Body-rate derivatives from snap.
    let s = flat.snap;
    let w1_dot = (-params.mass * s.dot(&b2) - 2.0 * c_dot * w1 + c * w2 * w3) / c;
    let w2_dot = (params.mass * s.dot(&b1) - 2.0 * c_dot * w2 - c * w1 * w3) / c;
    // Differentiate w3 A = w1 B + yaw_rate C.
    let b1_dot = b2 * w3 - b3 * w2;
    let b2_dot = b1 * (-w3) + b3 * w1;
    let b3_dot = b1 * w2 - b2 * w1;
    let a_dot = b1_dot.dot(&x_c) + flat.yaw_rate * b1.dot(&y_c);
    let b_dot = b3_dot.dot(&x_c) + flat.yaw_rate * b3.dot(&y_c);
    let c_dot_h = b2_dot.dot(&y_c) - flat.yaw_rate * b2.dot(&x_c);
    let w3_dot = (w1_dot * b_h + w1 * b_dot + flat.yaw_accel * c_h + flat.yaw_rate * c_dot_h
        - w3 * a_dot)
        / a_h;
    let w_dot = Vector3::new(w1_dot, w2_dot, w3_dot);

    let tau = params.inertia * w_dot + w.cross(&(params.inertia * w));
    let thrusts = params.invert_allocation(c, tau);

    Ok((
        RigidState {
            position: flat.position,
            velocity: flat.velocity,
            attitude,
            body_rate: w,
        },
        thrusts,
    ))
}

/// RK4 step of the rigid-body dynamics with quaternion renormalization.
pub fn rk4_step(
    state: &RigidState,
    u: &MotorThrusts,
    params: &QuadParams,
    dt: f64,
) -> RigidState {
    let add = |s: &RigidState, d: &RigidStateDerivative, h: f64| -> RigidState {
        let q = s.attitude.quaternion() + d.attitude_dot * h;
        RigidState {
            position: s.position + d.velocity * h,
            velocity: s.velocity + d.acceleration * h,
            attitude: UnitQuaternion::from_quaternion(q),
            body_rate: s.body_rate + d.body_rate_dot * h,
        }
    };
    // Keep the unnormalized quaternion through the stages so the classical
    // RK4 combination applies to the raw ODE; normalize once at the end.
    let raw_add = |s: &RigidState, d: &RigidStateDerivative, h: f64| -> (RigidState, Quaternion<f64>) {
        let q = s.attitude.quaternion() + d.attitude_dot * h;
        (
            RigidState {
                position: s.position + d.velocity * h,
                velocity: s.velocity + d.acceleration * h,
                attitude: UnitQuaternion::new_unchecked(q.normalize()),
                body_rate: s.body_rate + d.body_rate_dot * h,
            },
            q,
        )
    };
    let k1 = dynamics_rhs(state, u, params);
    let (s2, _) = raw_add(state, &k1, dt / 2.0);
    let k2 = dynamics_rhs(&s2, u, params);
    let (s3, _) = raw_add(state, &k2, dt / 2.0);
    let k3 = dynamics_rhs(&s3, u, params);
    let (s4, _) = raw_add(state, &k3, dt);
    let k4 = dynamics_rhs(&s4, u, params);

    let combined = RigidStateDerivative {
        velocity: (k1.velocity + k2.velocity * 2.0 + k3.velocity * 2.0 + k4.velocity) / 6.0,
        acceleration: (k1.acceleration + k2.acceleration * 2.0 + k3.acceleration * 2.0
            + k4.acceleration)
            / 6.0,
        attitude_dot: (k1.attitude_dot + k2.attitude_dot * 2.0 + k3.attitude_dot * 2.0
            + k4.attitude_dot)
            / 6.0,
        body_rate_dot: (k1.body_rate_dot + k2.body_rate_dot * 2.0 + k3.body_rate_dot * 2.0
            + k4.body_rate_dot)
            / 6.0,
    };
    add(state, &combined, dt)
}
