//! Square-speed-profile machinery.
//!
//! A time parameterization of a geometric path is encoded by the square
//! speed profile `h(s) = (ds/dt)^2` and its spatial derivative `h' = dh/ds`.
//! Traversal time is the quadrature
//!
//! ```text
//! T = sum_i 2 ds / (sqrt(h_i) + sqrt(h_{i+1}))
//! ```
//!
//! which is the exact time integral of a profile that is piecewise linear in
//! `s`. Rotational state rides along as per-node quaternions, body rates in
//! s-units, and their spatial derivatives.

use nalgebra::{UnitQuaternion, Vector3, Vector4};
use thiserror::Error;

use crate::path::{GeometricPath, PathGrid};
use crate::quad::{flat_to_state, FlatOutputs, ModelError, QuadParams};

/// Interior square-speed floor used by the optimizers; keeps `1/sqrt(h)`
/// differentiable without materially changing traversal time.
pub const H_INTERIOR_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ReparamError {
    #[error("interval {0} has zero speed at both endpoints")]
    DegenerateInterval(usize),
    #[error("negative square speed {value:.3e} at node {node}")]
    NegativeSquareSpeed { node: usize, value: f64 },
    #[error("flatness singularity at grid node {node}: {source}")]
    FlatnessSingularity {
        node: usize,
        #[source]
        source: ModelError,
    },
    #[error("sample set too sparse: {0}")]
    SparseSamples(String),
    #[error(transparent)]
    Path(#[from] crate::path::PathError),
}

/// Square speed profile sampled on the grid nodes.
#[derive(Debug, Clone)]
pub struct SpeedProfile {
    /// `h_i = (ds/dt)^2` at each node.
    pub h: Vec<f64>,
    /// `h'_i = dh/ds` at each node.
    pub hp: Vec<f64>,
}

/// Rotational variables sampled on the grid nodes.
#[derive(Debug, Clone)]
pub struct RotationProfile {
    /// Unit quaternions, scalar-first components.
    pub q: Vec<Vector4<f64>>,
    /// Body rates in s-units: `w(s) = w(t) / sqrt(h)`.
    pub w: Vec<Vector3<f64>>,
    /// `alpha(s) = dw/ds`.
    pub alpha: Vec<Vector3<f64>>,
}

/// Full decision-variable bundle of the rigid-body program: per-node
/// `(h, h', q, w, alpha, u)`.
#[derive(Debug, Clone)]
pub struct ToppDecisionState {
    pub h: Vec<f64>,
    pub hp: Vec<f64>,
    pub q: Vec<Vector4<f64>>,
    pub w: Vec<Vector3<f64>>,
    pub alpha: Vec<Vector3<f64>>,
    pub u: Vec<Vector4<f64>>,
}

impl ToppDecisionState {
    pub fn node_count(&self) -> usize {
        self.h.len()
    }

    pub fn is_consistent(&self) -> bool {
        let n = self.h.len();
        self.hp.len() == n
            && self.q.len() == n
            && self.w.len() == n
            && self.alpha.len() == n
            && self.u.len() == n
    }

    /// Traversal time of the profile carried by this bundle.
    pub fn traversal_time(&self, grid: &PathGrid) -> Result<f64, ReparamError> {
        traversal_time_h(&self.h, grid.ds())
    }
}

pub fn quat_vec_from_unit(q: &UnitQuaternion<f64>) -> Vector4<f64> {
    let qq = q.quaternion();
    Vector4::new(qq.w, qq.i, qq.j, qq.k)
}

pub fn unit_from_quat_vec(v: &Vector4<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(v[0], v[1], v[2], v[3]))
}

/// Normalized forward-Euler quaternion update over one grid interval: an
/// Euler step of the kinematics followed by projection back to unit norm.
pub fn quat_step(q: &Vector4<f64>, w: &Vector3<f64>, ds: f64) -> Vector4<f64> {
    let omega = crate::quad::omega_matrix(w);
    let stepped = q + omega * q * (ds / 2.0);
    let kappa = (1.0 + ds * ds / 4.0 * w.norm_squared()).sqrt();
    stepped / kappa
}

/// Exact traversal time of a piecewise-linear square-speed profile.
pub fn traversal_time_h(h: &[f64], ds: f64) -> Result<f64, ReparamError> {
    for (i, &hi) in h.iter().enumerate() {
        if hi < 0.0 {
            return Err(ReparamError::NegativeSquareSpeed { node: i, value: hi });
        }
    }
    let mut t = 0.0;
    for i in 0..h.len() - 1 {
        let denom = h[i].sqrt() + h[i + 1].sqrt();
        if denom == 0.0 {
            return Err(ReparamError::DegenerateInterval(i));
        }
        t += 2.0 * ds / denom;
    }
    Ok(t)
}

/// Traversal time of a [`SpeedProfile`] over a grid.
pub fn traversal_time(speed: &SpeedProfile, grid: &PathGrid) -> Result<f64, ReparamError> {
    assert_eq!(speed.h.len(), grid.node_count());
    traversal_time_h(&speed.h, grid.ds())
}

/// Cumulative time at each grid node; `t_0 = 0` and `t_N` equals the
/// traversal time.
pub fn time_map(speed: &SpeedProfile, grid: &PathGrid) -> Result<Vec<f64>, ReparamError> {
    assert_eq!(speed.h.len(), grid.node_count());
    time_map_h(&speed.h, grid.ds())
}

pub fn time_map_h(h: &[f64], ds: f64) -> Result<Vec<f64>, ReparamError> {
    let mut t = Vec::with_capacity(h.len());
    t.push(0.0);
    for i in 0..h.len() - 1 {
        if h[i] < 0.0 {
            return Err(ReparamError::NegativeSquareSpeed {
                node: i,
                value: h[i],
            });
        }
        let denom = h[i].sqrt() + h[i + 1].sqrt();
        if denom == 0.0 {
            return Err(ReparamError::DegenerateInterval(i));
        }
        let last = *t.last().unwrap();
        t.push(last + 2.0 * ds / denom);
    }
    Ok(t)
}

/// Flat outputs of the seed at a given `s` (the seed's own time axis).
pub fn seed_flat_outputs(path: &GeometricPath, s: f64) -> FlatOutputs {
    FlatOutputs {
        position: path.gamma(s),
        velocity: path.gamma_deriv(s, 1),
        acceleration: path.gamma_deriv(s, 2),
        jerk: path.gamma_deriv(s, 3),
        snap: path.gamma_deriv(s, 4),
        yaw: path.yaw(s, 0),
        yaw_rate: path.yaw(s, 1),
        yaw_accel: path.yaw(s, 2),
    }
}

/// Make quaternion signs continuous in place: flip each quaternion so its
/// dot product with the previous one is non-negative.
pub fn enforce_sign_continuity(q: &mut [Vector4<f64>]) {
    for i in 1..q.len() {
        if q[i - 1].dot(&q[i]) < 0.0 {
            q[i] = -q[i];
        }
    }
}

/// Build the full decision bundle from the seed trajectory underlying the
/// grid: `h = 1`, `h' = 0` (`s` is seed time), rotational variables and
/// thrusts from the flatness map, `alpha` by central differences.
pub fn initial_guess_from_seed(
    grid: &PathGrid,
    params: &QuadParams,
) -> Result<ToppDecisionState, ReparamError> {
    let path = grid.path();
    let n = grid.node_count();
    let mut q = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    for i in 0..n {
        let flat = seed_flat_outputs(path, grid.s()[i]);
        let (state, thrusts) = flat_to_state(&flat, params)
            .map_err(|source| ReparamError::FlatnessSingularity { node: i, source })?;
        q.push(quat_vec_from_unit(&state.attitude));
        // h = 1 makes s-rates equal time rates.
        w.push(state.body_rate);
        u.push(thrusts.0);
    }
    enforce_sign_continuity(&mut q);
    let alpha = central_differences(&w, grid.ds());
    Ok(ToppDecisionState {
        h: vec![1.0; n],
        hp: vec![0.0; n],
        q,
        w,
        alpha,
        u,
    })
}

/// Time-stamped state samples for guess construction when only partial data
/// is available (e.g. recorded odometry).
#[derive(Debug, Clone)]
pub struct StateSamples {
    pub times: Vec<f64>,
    pub positions: Vec<Vector3<f64>>,
    pub velocities: Option<Vec<Vector3<f64>>>,
}

/// Guess built from state samples, together with the path fitted through
/// them.
pub struct StateGuess {
    pub path: std::sync::Arc<GeometricPath>,
    pub grid: PathGrid,
    pub guess: ToppDecisionState,
}

/// Build a decision bundle from position/velocity samples alone.
///
/// The path is a clamped cubic interpolant of the samples with `s` equal to
/// sample time, so `h = 1, h' = 0`. Attitudes come from the flatness map of
/// the fitted accelerations (identity where that map is singular), body
/// rates from finite differences of the attitude sequence. The unknown
/// rotational inputs are filled with their hover values: `alpha = 0` and
/// `u = m g / 4` per motor.
pub fn initial_guess_from_states(
    samples: &StateSamples,
    n_grid: usize,
    params: &QuadParams,
) -> Result<StateGuess, ReparamError> {
    if samples.times.len() < 2 {
        return Err(ReparamError::SparseSamples(format!(
            "need at least 2 samples, got {}",
            samples.times.len()
        )));
    }
    if samples.times.len() != samples.positions.len() {
        return Err(ReparamError::SparseSamples(
            "times and positions must have equal length".into(),
        ));
    }
    let (v0, v1) = match &samples.velocities {
        Some(v) => (v[0], *v.last().unwrap()),
        None => {
            // One-sided difference estimates of the end velocities.
            let n = samples.times.len();
            let d0 = (samples.positions[1] - samples.positions[0])
                / (samples.times[1] - samples.times[0]);
            let d1 = (samples.positions[n - 1] - samples.positions[n - 2])
                / (samples.times[n - 1] - samples.times[n - 2]);
            (d0, d1)
        }
    };
    // Shift times so the path parameter starts at zero.
    let t0 = samples.times[0];
    let times: Vec<f64> = samples.times.iter().map(|t| t - t0).collect();
    let poly =
        crate::path::interpolate_cubic_clamped(&times, &samples.positions, v0, v1)?;
    let path = std::sync::Arc::new(crate::path::to_geometric(poly));
    let grid = crate::path::build_grid(path.clone(), n_grid);

    let n = grid.node_count();
    let mut q = Vec::with_capacity(n);
    for i in 0..n {
        let flat = FlatOutputs {
            position: grid.gamma(i),
            velocity: grid.gamma_p(i),
            acceleration: grid.gamma_pp(i),
            ..FlatOutputs::hover_at(Vector3::zeros())
        };
        let qi = match flat_to_state(&flat, params) {
            Ok((state, _)) => quat_vec_from_unit(&state.attitude),
            Err(_) => Vector4::new(1.0, 0.0, 0.0, 0.0),
        };
        q.push(qi);
    }
    enforce_sign_continuity(&mut q);
    let w = body_rates_from_quaternions(&q, grid.ds());
    let hover = params.hover_motor_thrusts().0;
    let guess = ToppDecisionState {
        h: vec![1.0; n],
        hp: vec![0.0; n],
        q,
        w,
        alpha: vec![Vector3::zeros(); n],
        u: vec![hover; n],
    };
    Ok(StateGuess { path, grid, guess })
}

/// Central differences with one-sided stencils at the ends.
pub fn central_differences(values: &[Vector3<f64>], ds: f64) -> Vec<Vector3<f64>> {
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let d = if i == 0 {
            (values[1] - values[0]) / ds
        } else if i == n - 1 {
            (values[n - 1] - values[n - 2]) / ds
        } else {
            (values[i + 1] - values[i - 1]) / (2.0 * ds)
        };
        out.push(d);
    }
    out
}

/// Estimate body rates in s-units from a sign-continuous quaternion
/// sequence via the kinematics `q' = 1/2 Omega(w) q`.
pub fn body_rates_from_quaternions(q: &[Vector4<f64>], ds: f64) -> Vec<Vector3<f64>> {
    let n = q.len();
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let (qa, qb, span) = if i == 0 {
            (&q[0], &q[1], ds)
        } else if i == n - 1 {
            (&q[n - 2], &q[n - 1], ds)
        } else {
            (&q[i - 1], &q[i + 1], 2.0 * ds)
        };
        let dq = (qb - qa) / span;
        // w = 2 * Im(conj(q) * dq) for unit q.
        let qi = &q[i];
        let wx = 2.0 * (qi[0] * dq[1] - qi[1] * dq[0] - qi[2] * dq[3] + qi[3] * dq[2]);
        let wy = 2.0 * (qi[0] * dq[2] + qi[1] * dq[3] - qi[2] * dq[0] - qi[3] * dq[1]);
        let wz = 2.0 * (qi[0] * dq[3] - qi[1] * dq[2] + qi[2] * dq[1] - qi[3] * dq[0]);
        w.push(Vector3::new(wx, wy, wz));
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{build_grid, fit_min_derivative, to_geometric, MinimizeOrder, WaypointSet};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn line_grid(length: f64, n: usize) -> PathGrid {
        let wps = WaypointSet::new(vec![
            nalgebra::Vector3::zeros(),
            nalgebra::Vector3::new(length, 0.0, 0.0),
        ])
        .unwrap();
        let seed = fit_min_derivative(&wps, MinimizeOrder::Snap, 1.0).unwrap();
        build_grid(Arc::new(to_geometric(seed)), n)
    }

    #[test]
    fn constant_h_gives_exact_time() {
        // Dyadic node count keeps every quadrature term exactly
        // representable, so the constant-speed identity holds bitwise.
        let grid = line_grid(10.0, 128);
        let speed = SpeedProfile {
            h: vec![4.0; 129],
            hp: vec![0.0; 129],
        };
        let t = traversal_time(&speed, &grid).unwrap();
        assert_eq!(t, 5.0);
        // Non-dyadic grids agree to rounding.
        let grid = line_grid(10.0, 100);
        let speed = SpeedProfile {
            h: vec![4.0; 101],
            hp: vec![0.0; 101],
        };
        let t = traversal_time(&speed, &grid).unwrap();
        assert_relative_eq!(t, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn unit_h_recovers_seed_duration() {
        let grid = line_grid(7.0, 140);
        let speed = SpeedProfile {
            h: vec![1.0; 141],
            hp: vec![0.0; 141],
        };
        let t = traversal_time(&speed, &grid).unwrap();
        assert_relative_eq!(t, grid.s_end(), epsilon = 1e-9);
    }

    #[test]
    fn linear_ramp_matches_closed_form() {
        // h(s) = s on [0, 1]: integral of 1/sqrt(s) = 2.
        let n = 1000;
        let ds = 1.0 / n as f64;
        let h: Vec<f64> = (0..=n).map(|i| i as f64 * ds).collect();
        let t = traversal_time_h(&h, ds).unwrap();
        assert!((t - 2.0).abs() / 2.0 < 0.005, "t = {t}");
    }

    #[test]
    fn degenerate_interval_is_an_error() {
        let h = vec![0.0, 0.0, 1.0];
        assert!(matches!(
            traversal_time_h(&h, 0.1),
            Err(ReparamError::DegenerateInterval(0))
        ));
    }

    #[test]
    fn time_map_constant_profile() {
        let grid = line_grid(6.0, 60);
        let c = 9.0;
        let speed = SpeedProfile {
            h: vec![c; 61],
            hp: vec![0.0; 61],
        };
        let t = time_map(&speed, &grid).unwrap();
        for (i, &ti) in t.iter().enumerate() {
            assert_relative_eq!(ti, grid.s()[i] / c.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn time_map_agrees_with_fine_quadrature() {
        // Smooth positive profile; compare against a much finer trapezoid
        // integration of 1/sqrt(h).
        let n = 200;
        let ds = 2.0 / n as f64;
        let hf = |s: f64| 1.5 + (1.3 * s).sin().powi(2);
        let h: Vec<f64> = (0..=n).map(|i| hf(i as f64 * ds)).collect();
        let t = time_map_h(&h, ds).unwrap();
        let fine = 200_000;
        let fds = 2.0 / fine as f64;
        let mut acc = 0.0;
        for i in 0..fine {
            let s0 = i as f64 * fds;
            acc += 0.5 * (1.0 / hf(s0).sqrt() + 1.0 / hf(s0 + fds).sqrt()) * fds;
        }
        assert!((t.last().unwrap() - acc).abs() / acc < 1e-3);
    }

    proptest! {
        #[test]
        fn dilation_scales_time_exactly(k in 0.1f64..10.0, seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 40;
            let ds = 0.05;
            let h: Vec<f64> = (0..=n).map(|_| rng.random_range(0.05..9.0)).collect();
            let t0 = traversal_time_h(&h, ds).unwrap();
            let scaled: Vec<f64> = h.iter().map(|&x| k * k * x).collect();
            let t1 = traversal_time_h(&scaled, ds).unwrap();
            prop_assert!((t1 - t0 / k).abs() <= 1e-12 * t0.max(1.0));
        }

        #[test]
        fn time_map_strictly_increasing(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 30;
            let h: Vec<f64> = (0..=n).map(|_| rng.random_range(0.01..5.0)).collect();
            let t = time_map_h(&h, 0.1).unwrap();
            for w in t.windows(2) {
                prop_assert!(w[1] > w[0]);
            }
        }
    }

    #[test]
    fn quat_step_zero_rate_is_identity() {
        let q = Vector4::new(0.8, 0.1, -0.5, 0.3).normalize();
        let out = quat_step(&q, &Vector3::zeros(), 0.025);
        assert_relative_eq!(out, q, epsilon = 1e-15);
    }

    #[test]
    fn quat_step_preserves_unit_norm() {
        let q = Vector4::new(1.0, 0.0, 0.0, 0.0);
        let w = Vector3::new(3.0, -2.0, 1.0);
        let out = quat_step(&q, &w, 0.025);
        assert_relative_eq!(out.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn seed_guess_is_hoverlike_for_slow_seed() {
        // A slow straight seed barely accelerates: thrusts stay near hover.
        let grid = line_grid(5.0, 100);
        let params = QuadParams::crazyflie();
        let guess = initial_guess_from_seed(&grid, &params).unwrap();
        let hover = params.hover_thrust() / 4.0;
        for u in &guess.u {
            for j in 0..4 {
                assert!((u[j] - hover).abs() < 0.25 * hover);
            }
        }
        assert!(guess.h.iter().all(|&h| h == 1.0));
        assert!(guess.hp.iter().all(|&hp| hp == 0.0));
    }

    #[test]
    fn seed_guess_thrusts_within_bounds_at_v1() {
        // Nominal 1 m/s seeds keep the guess inside the box on random
        // 4-waypoint paths in the 10 m cube.
        let params = QuadParams::crazyflie();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let wps = loop {
                let pts: Vec<nalgebra::Vector3<f64>> = (0..4)
                    .map(|_| {
                        nalgebra::Vector3::new(
                            rng.random_range(0.0..10.0),
                            rng.random_range(0.0..10.0),
                            rng.random_range(0.0..10.0),
                        )
                    })
                    .collect();
                if let Ok(w) = WaypointSet::new(pts) {
                    break w;
                }
            };
            let seed = fit_min_derivative(&wps, MinimizeOrder::Snap, 1.0).unwrap();
            let grid = build_grid(Arc::new(to_geometric(seed)), 300);
            let guess = initial_guess_from_seed(&grid, &params).unwrap();
            for u in &guess.u {
                for j in 0..4 {
                    assert!(
                        u[j] > params.u_min && u[j] < params.u_max,
                        "guess thrust {} outside ({}, {})",
                        u[j],
                        params.u_min,
                        params.u_max
                    );
                }
            }
        }
    }

    #[test]
    fn seed_guess_quaternions_sign_continuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let pts: Vec<nalgebra::Vector3<f64>> = (0..4)
            .map(|_| {
                nalgebra::Vector3::new(
                    rng.random_range(0.0..10.0),
                    rng.random_range(0.0..10.0),
                    rng.random_range(0.0..10.0),
                )
            })
            .collect();
        let wps = WaypointSet::new(pts).unwrap();
        let seed = fit_min_derivative(&wps, MinimizeOrder::Snap, 3.0).unwrap();
        let grid = build_grid(Arc::new(to_geometric(seed)), 200);
        let guess = initial_guess_from_seed(&grid, &QuadParams::crazyflie()).unwrap();
        for i in 1..guess.q.len() {
            assert!(guess.q[i - 1].dot(&guess.q[i]) >= 0.0);
        }
    }

    #[test]
    fn state_guess_stationary_is_hover() {
        let params = QuadParams::crazyflie();
        let n = 50;
        let samples = StateSamples {
            times: (0..=n).map(|i| i as f64 * 0.1).collect(),
            positions: vec![Vector3::new(1.0, 2.0, 3.0); n + 1],
            velocities: Some(vec![Vector3::zeros(); n + 1]),
        };
        let out = initial_guess_from_states(&samples, 40, &params).unwrap();
        let hover = params.hover_thrust() / 4.0;
        for i in 0..out.guess.h.len() {
            assert_eq!(out.guess.h[i], 1.0);
            assert_relative_eq!(out.guess.q[i][0], 1.0, epsilon = 1e-9);
            assert_relative_eq!(out.guess.w[i].norm(), 0.0, epsilon = 1e-9);
            assert_eq!(out.guess.alpha[i], Vector3::zeros());
            for j in 0..4 {
                assert_relative_eq!(out.guess.u[i][j], hover, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn state_guess_cross_checks_against_seed_guess() {
        // Sample a smooth slow seed densely; the state-based guess must
        // agree with the seed-based one on everything it can estimate.
        let params = QuadParams::crazyflie();
        let wps = WaypointSet::new(vec![
            Vector3::zeros(),
            Vector3::new(2.0, 1.0, 0.5),
            Vector3::new(4.0, 0.0, 1.0),
        ])
        .unwrap();
        let seed = fit_min_derivative(&wps, MinimizeOrder::Snap, 0.8).unwrap();
        let path = Arc::new(to_geometric(seed));
        let n = 150;
        let grid = build_grid(path.clone(), n);
        let seed_guess = initial_guess_from_seed(&grid, &params).unwrap();

        let times: Vec<f64> = (0..=400)
            .map(|i| path.s_end() * i as f64 / 400.0)
            .collect();
        let samples = StateSamples {
            positions: times.iter().map(|&t| path.gamma(t)).collect(),
            velocities: Some(times.iter().map(|&t| path.gamma_deriv(t, 1)).collect()),
            times,
        };
        let state_guess = initial_guess_from_states(&samples, n, &params).unwrap();

        let mut max_q = 0.0f64;
        let mut max_w = 0.0f64;
        for i in 0..=n {
            max_q = max_q.max((state_guess.guess.q[i] - seed_guess.q[i]).norm());
            max_w = max_w.max((state_guess.guess.w[i] - seed_guess.w[i]).norm());
        }
        // Finite-difference level agreement for the estimated states.
        assert!(max_q < 2e-3, "max quaternion deviation {max_q}");
        assert!(max_w < 5e-2, "max body-rate deviation {max_w}");
        // The hover fill is exact by construction.
        let hover = params.hover_motor_thrusts().0;
        assert!(state_guess.guess.alpha.iter().all(|a| a.norm() == 0.0));
        assert!(state_guess.guess.u.iter().all(|u| (u - hover).norm() == 0.0));
        // On this slow seed the hover fill is also close to the seed's
        // actual inputs.
        for i in 0..=n {
            assert!((seed_guess.u[i] - hover).norm() < 0.3 * hover.norm());
        }
    }
}
