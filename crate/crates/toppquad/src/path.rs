//! Waypoint seed trajectories and geometric paths.
//!
//! Seeds are piecewise polynomials minimizing the integrated squared
//! acceleration, jerk, or snap through a waypoint list, with visit times
//! pre-assigned from inter-waypoint distance and a nominal velocity. A seed
//! doubles as the geometric path by identifying the path parameter `s` with
//! the seed's own time axis, which makes the square-speed initial guess
//! `h = 1` exact.

use std::fmt;
use std::path::Path as FsPath;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("need at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("waypoints {0} and {1} coincide")]
    DuplicateWaypoint(usize, usize),
    #[error("segment {0} has non-positive duration {1}")]
    BadSegmentTime(usize, f64),
    #[error("fit system is rank-deficient near segment {0}")]
    RankDeficient(usize),
    #[error("nominal velocity must be positive, got {0}")]
    BadNominalVelocity(f64),
    #[error("waypoint file {path}: {msg}")]
    WaypointFile { path: String, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Ordered 3-D waypoints with optional per-waypoint yaw.
#[derive(Debug, Clone)]
pub struct WaypointSet {
    positions: Vec<Vector3<f64>>,
    yaws: Option<Vec<f64>>,
}

impl WaypointSet {
    pub fn new(positions: Vec<Vector3<f64>>) -> Result<Self, PathError> {
        Self::with_optional_yaws(positions, None)
    }

    pub fn with_yaws(positions: Vec<Vector3<f64>>, yaws: Vec<f64>) -> Result<Self, PathError> {
        Self::with_optional_yaws(positions, Some(yaws))
    }

    fn with_optional_yaws(
        positions: Vec<Vector3<f64>>,
        yaws: Option<Vec<f64>>,
    ) -> Result<Self, PathError> {
        if positions.len() < 2 {
            return Err(PathError::TooFewWaypoints(positions.len()));
        }
        for i in 0..positions.len() - 1 {
            if (positions[i + 1] - positions[i]).norm() < 1e-9 {
                return Err(PathError::DuplicateWaypoint(i, i + 1));
            }
        }
        if let Some(ref y) = yaws {
            assert_eq!(y.len(), positions.len(), "one yaw per waypoint");
        }
        Ok(Self { positions, yaws })
    }

    /// Parse a waypoint CSV with columns `x,y,z[,yaw]`. Lines starting with
    /// `#` and a leading header row are skipped.
    pub fn from_csv(path: &FsPath) -> Result<Self, PathError> {
        let text = std::fs::read_to_string(path).map_err(|source| PathError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut positions = Vec::new();
        let mut yaws: Vec<f64> = Vec::new();
        let mut saw_yaw = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let nums: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
            let Some(nums) = nums else {
                if positions.is_empty() {
                    continue; // header row
                }
                return Err(PathError::WaypointFile {
                    path: path.display().to_string(),
                    msg: format!("line {}: expected numeric fields", lineno + 1),
                });
            };
            match nums.len() {
                3 => positions.push(Vector3::new(nums[0], nums[1], nums[2])),
                4 => {
                    positions.push(Vector3::new(nums[0], nums[1], nums[2]));
                    yaws.push(nums[3]);
                    saw_yaw = true;
                }
                n => {
                    return Err(PathError::WaypointFile {
                        path: path.display().to_string(),
                        msg: format!("line {}: expected 3 or 4 fields, got {n}", lineno + 1),
                    })
                }
            }
        }
        if saw_yaw && yaws.len() != positions.len() {
            return Err(PathError::WaypointFile {
                path: path.display().to_string(),
                msg: "yaw column must be present on every row or none".into(),
            });
        }
        Self::with_optional_yaws(positions, saw_yaw.then_some(yaws))
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn yaws(&self) -> Option<&[f64]> {
        self.yaws.as_deref()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Sum of straight-line inter-waypoint distances.
    pub fn chord_length(&self) -> f64 {
        self.positions
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .sum()
    }
}

/// Derivative order whose integrated squared norm the seed fit minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MinimizeOrder {
    #[serde(rename = "acceleration")]
    Acceleration,
    #[serde(rename = "jerk")]
    Jerk,
    #[serde(rename = "snap")]
    Snap,
}

impl MinimizeOrder {
    pub fn order(self) -> usize {
        match self {
            MinimizeOrder::Acceleration => 2,
            MinimizeOrder::Jerk => 3,
            MinimizeOrder::Snap => 4,
        }
    }
}

impl fmt::Display for MinimizeOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MinimizeOrder::Acceleration => write!(f, "min-acc"),
            MinimizeOrder::Jerk => write!(f, "min-jerk"),
            MinimizeOrder::Snap => write!(f, "min-snap"),
        }
    }
}

/// Piecewise polynomial curve in R^3 (optionally with a yaw channel),
/// parameterized by a global variable on `[0, s_end]`.
///
/// Coefficients are stored per segment in the normalized local variable
/// `tau = (s - knot_i) / h_i`, which keeps high-degree fits well conditioned.
#[derive(Debug, Clone)]
pub struct PiecewisePolynomialPath {
    /// Global knot values, length `segments + 1`, starting at 0.
    knots: Vec<f64>,
    /// Per segment: per axis coefficient vectors (ascending powers of tau).
    coeffs: Vec<[Vec<f64>; 3]>,
    yaw_coeffs: Option<Vec<Vec<f64>>>,
}

impl PiecewisePolynomialPath {
    pub fn s_end(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn segment_count(&self) -> usize {
        self.coeffs.len()
    }

    fn locate(&self, s: f64) -> (usize, f64, f64) {
        let n = self.segment_count();
        let mut seg = match self
            .knots
            .binary_search_by(|k| k.partial_cmp(&s).unwrap())
        {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        };
        if seg == n - 1 && s >= self.knots[n] {
            seg = n - 1;
        }
        let h = self.knots[seg + 1] - self.knots[seg];
        let tau = ((s - self.knots[seg]) / h).clamp(0.0, 1.0 + 1e-12);
        (seg, tau, h)
    }

    fn eval_poly(coeffs: &[f64], tau: f64, deriv: usize, h: f64) -> f64 {
        let mut acc = 0.0;
        for j in (deriv..coeffs.len()).rev() {
            let mut fall = 1.0;
            for d in 0..deriv {
                fall *= (j - d) as f64;
            }
            acc = acc * tau + coeffs[j] * fall;
        }
        acc / h.powi(deriv as i32)
    }

    /// Evaluate the curve or one of its derivatives with respect to the
    /// global parameter.
    pub fn eval(&self, s: f64, deriv: usize) -> Vector3<f64> {
        let (seg, tau, h) = self.locate(s);
        let c = &self.coeffs[seg];
        Vector3::new(
            Self::eval_poly(&c[0], tau, deriv, h),
            Self::eval_poly(&c[1], tau, deriv, h),
            Self::eval_poly(&c[2], tau, deriv, h),
        )
    }

    pub fn eval_yaw(&self, s: f64, deriv: usize) -> f64 {
        match &self.yaw_coeffs {
            None => 0.0,
            Some(yc) => {
                let (seg, tau, h) = self.locate(s);
                Self::eval_poly(&yc[seg], tau, deriv, h)
            }
        }
    }

    pub fn has_yaw(&self) -> bool {
        self.yaw_coeffs.is_some()
    }
}

fn falling(j: usize, d: usize) -> f64 {
    let mut f = 1.0;
    for k in 0..d {
        f *= (j - k) as f64;
    }
    f
}

/// One-axis minimum-derivative fit through values at given knots, solved as
/// the KKT system of the equality-constrained quadratic program.
///
/// Boundary derivative orders `1..order` are pinned to the supplied values
/// (typically zero for rest-to-rest); interior knots keep continuity of
/// derivative orders `1..order`.
struct AxisFit {
    kkt_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n_coeffs: usize,
    a_rows: usize,
    // Row index where interpolation values for each knot go in the rhs.
    interp_rows: Vec<(usize, usize)>, // (row, waypoint index)
    boundary_rows: Vec<(usize, usize, bool)>, // (row, deriv order, is_end)
    #[cfg(test)]
    constraint_matrix: DMatrix<f64>,
}

fn build_axis_fit(times: &[f64], order: usize) -> Result<AxisFit, PathError> {
    let m = times.len() - 1; // segments
    let deg = 2 * order - 1;
    let nc = deg + 1; // coefficients per segment
    let n = m * nc;

    let seg_h: Vec<f64> = (0..m).map(|i| times[i + 1] - times[i]).collect();
    for (i, &h) in seg_h.iter().enumerate() {
        if !(h > 0.0) || !h.is_finite() {
            return Err(PathError::BadSegmentTime(i, h));
        }
    }

    // Cost: integral of squared order-th derivative, block diagonal.
    let mut q = DMatrix::<f64>::zeros(n, n);
    for (i, &h) in seg_h.iter().enumerate() {
        let base = i * nc;
        let scale = 1.0 / h.powi(2 * order as i32 - 1);
        for a in order..nc {
            for b in order..nc {
                q[(base + a, base + b)] =
                    falling(a, order) * falling(b, order) / ((a + b - 2 * order + 1) as f64)
                        * scale;
            }
        }
    }

    // Equality constraints.
    let n_interp = 2 * m;
    let n_bc = 2 * (order - 1);
    let n_cont = (m - 1) * (order - 1);
    let me = n_interp + n_bc + n_cont;
    let mut a = DMatrix::<f64>::zeros(me, n);
    let mut row = 0;
    let mut interp_rows = Vec::new();
    // Interpolation at both ends of every segment.
    for i in 0..m {
        a[(row, i * nc)] = 1.0; // tau = 0
        interp_rows.push((row, i));
        row += 1;
        for j in 0..nc {
            a[(row, i * nc + j)] = 1.0; // tau = 1
        }
        interp_rows.push((row, i + 1));
        row += 1;
    }
    // Boundary derivatives 1..order at the path ends.
    let mut boundary_rows = Vec::new();
    for d in 1..order {
        a[(row, d)] = falling(d, d) / seg_h[0].powi(d as i32);
        boundary_rows.push((row, d, false));
        row += 1;
        let base = (m - 1) * nc;
        for j in d..nc {
            a[(row, base + j)] = falling(j, d) / seg_h[m - 1].powi(d as i32);
        }
        boundary_rows.push((row, d, true));
        row += 1;
    }
    // Interior continuity of derivatives 1..order.
    for i in 0..m - 1 {
        for d in 1..order {
            let base = i * nc;
            for j in d..nc {
                a[(row, base + j)] = falling(j, d) / seg_h[i].powi(d as i32);
            }
            a[(row, (i + 1) * nc + d)] = -falling(d, d) / seg_h[i + 1].powi(d as i32);
            row += 1;
        }
    }
    debug_assert_eq!(row, me);

    // KKT system [2Q A^T; A 0].
    let dim = n + me;
    let mut kkt = DMatrix::<f64>::zeros(dim, dim);
    kkt.view_mut((0, 0), (n, n)).copy_from(&(2.0 * &q));
    kkt.view_mut((0, n), (n, me)).copy_from(&a.transpose());
    kkt.view_mut((n, 0), (me, n)).copy_from(&a);
    let lu = kkt.lu();
    Ok(AxisFit {
        kkt_lu: lu,
        n_coeffs: n,
        a_rows: me,
        interp_rows,
        boundary_rows,
        #[cfg(test)]
        constraint_matrix: a,
    })
}

impl AxisFit {
    /// Solve for one axis given waypoint values and boundary derivative
    /// values (`orders 1..k` at start then end, normally zero).
    fn solve(
        &self,
        values: &[f64],
        start_derivs: &[f64],
        end_derivs: &[f64],
    ) -> Result<Vec<f64>, PathError> {
        let dim = self.n_coeffs + self.a_rows;
        let mut rhs = DVector::<f64>::zeros(dim);
        for &(row, wp) in &self.interp_rows {
            rhs[self.n_coeffs + row] = values[wp];
        }
        for &(row, d, is_end) in &self.boundary_rows {
            let v = if is_end {
                end_derivs.get(d - 1).copied().unwrap_or(0.0)
            } else {
                start_derivs.get(d - 1).copied().unwrap_or(0.0)
            };
            rhs[self.n_coeffs + row] = v;
        }
        let sol = self
            .kkt_lu
            .solve(&rhs)
            .ok_or(PathError::RankDeficient(0))?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(PathError::RankDeficient(0));
        }
        Ok(sol.rows(0, self.n_coeffs).iter().cloned().collect())
    }
}

/// Segment visit times proportional to Euclidean inter-waypoint distance at
/// the nominal velocity.
pub fn assign_times(waypoints: &WaypointSet, nominal_velocity: f64) -> Result<Vec<f64>, PathError> {
    if !(nominal_velocity > 0.0) {
        return Err(PathError::BadNominalVelocity(nominal_velocity));
    }
    let mut times = vec![0.0];
    for w in waypoints.positions().windows(2) {
        let dt = (w[1] - w[0]).norm() / nominal_velocity;
        times.push(times.last().unwrap() + dt);
    }
    Ok(times)
}

/// Fit a timed minimum-derivative trajectory through the waypoints,
/// rest-to-rest, with visit times assigned from `nominal_velocity`.
pub fn fit_min_derivative(
    waypoints: &WaypointSet,
    order: MinimizeOrder,
    nominal_velocity: f64,
) -> Result<PiecewisePolynomialPath, PathError> {
    let times = assign_times(waypoints, nominal_velocity)?;
    fit_min_derivative_with_times(waypoints, &times, order)
}

/// Same as [`fit_min_derivative`] with explicit visit times.
pub fn fit_min_derivative_with_times(
    waypoints: &WaypointSet,
    times: &[f64],
    order: MinimizeOrder,
) -> Result<PiecewisePolynomialPath, PathError> {
    assert_eq!(times.len(), waypoints.len(), "one visit time per waypoint");
    let k = order.order();
    let fit = build_axis_fit(times, k)?;
    let m = waypoints.len() - 1;
    let nc = 2 * k;

    let zeros = vec![0.0; k - 1];
    let mut per_axis: Vec<Vec<f64>> = Vec::with_capacity(3);
    for axis in 0..3 {
        let values: Vec<f64> = waypoints.positions().iter().map(|p| p[axis]).collect();
        per_axis.push(fit.solve(&values, &zeros, &zeros)?);
    }
    let yaw_coeffs = match waypoints.yaws() {
        None => None,
        Some(yaws) => {
            let sol = fit.solve(yaws, &zeros, &zeros)?;
            Some((0..m).map(|i| sol[i * nc..(i + 1) * nc].to_vec()).collect())
        }
    };

    let coeffs = (0..m)
        .map(|i| {
            [
                per_axis[0][i * nc..(i + 1) * nc].to_vec(),
                per_axis[1][i * nc..(i + 1) * nc].to_vec(),
                per_axis[2][i * nc..(i + 1) * nc].to_vec(),
            ]
        })
        .collect();
    Ok(PiecewisePolynomialPath {
        knots: times.to_vec(),
        coeffs,
        yaw_coeffs,
    })
}

/// Clamped cubic-spline interpolation through dense position samples, used
/// when the path comes from recorded states rather than waypoints.
pub fn interpolate_cubic_clamped(
    times: &[f64],
    positions: &[Vector3<f64>],
    v_start: Vector3<f64>,
    v_end: Vector3<f64>,
) -> Result<PiecewisePolynomialPath, PathError> {
    assert_eq!(times.len(), positions.len());
    if times.len() < 2 {
        return Err(PathError::TooFewWaypoints(times.len()));
    }
    let m = times.len() - 1;
    let h: Vec<f64> = (0..m).map(|i| times[i + 1] - times[i]).collect();
    for (i, &hi) in h.iter().enumerate() {
        if !(hi > 0.0) {
            return Err(PathError::BadSegmentTime(i, hi));
        }
    }

    // Solve for knot slopes with a tridiagonal system per axis (Hermite
    // C2 conditions, clamped ends).
    let n = times.len();
    let mut coeffs: Vec<[Vec<f64>; 3]> = vec![[vec![], vec![], vec![]]; m];
    for axis in 0..3 {
        let y: Vec<f64> = positions.iter().map(|p| p[axis]).collect();
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        diag[0] = 1.0;
        rhs[0] = v_start[axis];
        for i in 1..n - 1 {
            lower[i] = 1.0 / h[i - 1];
            diag[i] = 2.0 / h[i - 1] + 2.0 / h[i];
            upper[i] = 1.0 / h[i];
            rhs[i] = 3.0 * ((y[i] - y[i - 1]) / (h[i - 1] * h[i - 1])
                + (y[i + 1] - y[i]) / (h[i] * h[i]));
        }
        diag[n - 1] = 1.0;
        rhs[n - 1] = v_end[axis];
        // Thomas algorithm.
        for i in 1..n {
            let w = lower[i] / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut slope = vec![0.0; n];
        slope[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            slope[i] = (rhs[i] - upper[i] * slope[i + 1]) / diag[i];
        }
        for i in 0..m {
            // Cubic Hermite in normalized tau.
            let (p0, p1) = (y[i], y[i + 1]);
            let (m0, m1) = (slope[i] * h[i], slope[i + 1] * h[i]);
            coeffs[i][axis] = vec![
                p0,
                m0,
                -3.0 * p0 + 3.0 * p1 - 2.0 * m0 - m1,
                2.0 * p0 - 2.0 * p1 + m0 + m1,
            ];
        }
    }
    Ok(PiecewisePolynomialPath {
        knots: times.to_vec(),
        coeffs,
        yaw_coeffs: None,
    })
}

/// A geometric path `gamma(s)` with analytic derivatives, obtained by
/// identifying `s` with the seed trajectory's time axis.
#[derive(Debug, Clone)]
pub struct GeometricPath {
    poly: PiecewisePolynomialPath,
}

impl GeometricPath {
    pub fn s_end(&self) -> f64 {
        self.poly.s_end()
    }

    pub fn gamma(&self, s: f64) -> Vector3<f64> {
        self.poly.eval(s, 0)
    }

    /// `d^k gamma / d s^k`.
    pub fn gamma_deriv(&self, s: f64, k: usize) -> Vector3<f64> {
        self.poly.eval(s, k)
    }

    pub fn yaw(&self, s: f64, deriv: usize) -> f64 {
        self.poly.eval_yaw(s, deriv)
    }

    pub fn has_yaw(&self) -> bool {
        self.poly.has_yaw()
    }

    pub fn seed_poly(&self) -> &PiecewisePolynomialPath {
        &self.poly
    }

    /// Sample `gamma` uniformly and write `s,x,y,z` rows.
    pub fn export_sampled_csv(&self, path: &FsPath, samples: usize) -> Result<(), PathError> {
        use std::io::Write;
        let mut out = String::from("s,x,y,z\n");
        let n = samples.max(2);
        for i in 0..n {
            let s = self.s_end() * i as f64 / (n - 1) as f64;
            let p = self.gamma(s);
            out.push_str(&format!("{},{},{},{}\n", s, p.x, p.y, p.z));
        }
        let mut f = std::fs::File::create(path).map_err(|source| PathError::Io {
            path: path.display().to_string(),
            source,
        })?;
        f.write_all(out.as_bytes()).map_err(|source| PathError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Re-express a timed seed as a geometric path with `s := seed time`.
pub fn to_geometric(seed: PiecewisePolynomialPath) -> GeometricPath {
    GeometricPath { poly: seed }
}

/// Uniform grid over a geometric path with cached derivative triples.
#[derive(Debug, Clone)]
pub struct PathGrid {
    path: Arc<GeometricPath>,
    s: Vec<f64>,
    ds: f64,
    gamma: Vec<Vector3<f64>>,
    gamma_p: Vec<Vector3<f64>>,
    gamma_pp: Vec<Vector3<f64>>,
}

impl PathGrid {
    pub fn node_count(&self) -> usize {
        self.s.len()
    }

    /// Number of intervals `N` (nodes minus one).
    pub fn intervals(&self) -> usize {
        self.s.len() - 1
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn s_end(&self) -> f64 {
        *self.s.last().unwrap()
    }

    pub fn gamma(&self, i: usize) -> Vector3<f64> {
        self.gamma[i]
    }

    pub fn gamma_p(&self, i: usize) -> Vector3<f64> {
        self.gamma_p[i]
    }

    pub fn gamma_pp(&self, i: usize) -> Vector3<f64> {
        self.gamma_pp[i]
    }

    pub fn path(&self) -> &Arc<GeometricPath> {
        &self.path
    }
}

/// Sample the path on a uniform `N + 1`-node grid, caching `gamma` and its
/// first two derivatives at each node.
pub fn build_grid(path: Arc<GeometricPath>, n: usize) -> PathGrid {
    assert!(n >= 2, "grid needs at least 2 intervals");
    let s_end = path.s_end();
    let ds = s_end / n as f64;
    let mut s = Vec::with_capacity(n + 1);
    for i in 0..=n {
        s.push(if i == n { s_end } else { i as f64 * ds });
    }
    let gamma = s.iter().map(|&si| path.gamma(si)).collect();
    let gamma_p = s.iter().map(|&si| path.gamma_deriv(si, 1)).collect();
    let gamma_pp = s.iter().map(|&si| path.gamma_deriv(si, 2)).collect();
    PathGrid {
        path,
        s,
        ds,
        gamma,
        gamma_p,
        gamma_pp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_waypoints(rng: &mut impl Rng, count: usize, extent: f64) -> WaypointSet {
        loop {
            let pts: Vec<Vector3<f64>> = (0..count)
                .map(|_| {
                    Vector3::new(
                        rng.random_range(0.0..extent),
                        rng.random_range(0.0..extent),
                        rng.random_range(0.0..extent),
                    )
                })
                .collect();
            if let Ok(w) = WaypointSet::new(pts) {
                return w;
            }
        }
    }

    #[test]
    fn two_point_min_acc_is_straight_cubic() {
        let wps = WaypointSet::new(vec![Vector3::zeros(), Vector3::new(3.0, 0.0, 0.0)]).unwrap();
        let seed = fit_min_derivative(&wps, MinimizeOrder::Acceleration, 1.0).unwrap();
        // Segment time = distance / v = 3.
        assert_relative_eq!(seed.s_end(), 3.0, epsilon = 1e-12);
        // Straight line: y and z identically zero, endpoint velocities zero.
        for i in 0..=10 {
            let s = 3.0 * i as f64 / 10.0;
            let p = seed.eval(s, 0);
            assert_relative_eq!(p.y, 0.0, epsilon = 1e-9);
            assert_relative_eq!(p.z, 0.0, epsilon = 1e-9);
        }
        assert_relative_eq!(seed.eval(0.0, 1).norm(), 0.0, epsilon = 1e-9);
        assert_relative_eq!(seed.eval(3.0, 1).norm(), 0.0, epsilon = 1e-9);
        // Cubic: second derivative linear in s.
        let a0 = seed.eval(0.0, 2).x;
        let a1 = seed.eval(3.0, 2).x;
        let mid = seed.eval(1.5, 2).x;
        assert_relative_eq!(mid, 0.5 * (a0 + a1), epsilon = 1e-9);
    }

    #[test]
    fn min_snap_interpolates_and_keeps_jerk_continuity() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5 {
            let wps = random_waypoints(&mut rng, 4, 10.0);
            let seed = fit_min_derivative(&wps, MinimizeOrder::Snap, 2.0).unwrap();
            // Exact interpolation at knots.
            let times = seed.knots().to_vec();
            for (i, &t) in times.iter().enumerate() {
                assert_relative_eq!(seed.eval(t, 0), wps.positions()[i], epsilon = 1e-8);
            }
            // Continuity of derivatives 1..=3 at interior knots.
            for &t in &times[1..times.len() - 1] {
                for d in 1..=3 {
                    let left = seed.eval(t - 1e-12, d);
                    let right = seed.eval(t + 1e-12, d);
                    assert_relative_eq!(left, right, epsilon = 1e-6, max_relative = 1e-6);
                }
            }
        }
    }

    #[test]
    fn min_snap_cost_is_locally_optimal() {
        // Perturbing along feasible directions (nullspace of the constraints)
        // must not decrease the snap integral.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let wps = random_waypoints(&mut rng, 4, 8.0);
        let seed = fit_min_derivative(&wps, MinimizeOrder::Snap, 2.0).unwrap();
        let times = seed.knots().to_vec();

        let snap_cost = |p: &PiecewisePolynomialPath| -> f64 {
            // Exact Gram-matrix integral of the squared snap per segment.
            let mut acc = 0.0;
            for (seg, c) in p.coeffs.iter().enumerate() {
                let h = p.knots[seg + 1] - p.knots[seg];
                for axis in 0..3 {
                    let cf = &c[axis];
                    for a in 4..cf.len() {
                        for b in 4..cf.len() {
                            acc += cf[a] * cf[b] * falling(a, 4) * falling(b, 4)
                                / ((a + b - 7) as f64)
                                / h.powi(7);
                        }
                    }
                }
            }
            acc
        };
        let base_cost = snap_cost(&seed);

        // Feasible directions are the nullspace of the fit's constraint
        // matrix; perturbing along them preserves interpolation and
        // continuity, so the cost must not decrease at the optimum.
        let fit = build_axis_fit(&times, 4).unwrap();
        let a = fit.constraint_matrix.clone();
        let svd = a.clone().svd(false, true);
        let v_t = svd.v_t.unwrap();
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > 1e-9 * svd.singular_values[0])
            .count();
        let n_coeffs = fit.n_coeffs;
        assert!(rank < n_coeffs, "fit should have free directions");

        let nc = 8;
        for (trial, null_row) in (rank..v_t.nrows()).enumerate() {
            for eps in [1e-3, -1e-3] {
                let mut perturbed = seed.clone();
                let axis = trial % 3;
                for seg in 0..perturbed.coeffs.len() {
                    for j in 0..nc {
                        perturbed.coeffs[seg][axis][j] += eps * v_t[(null_row, seg * nc + j)];
                    }
                }
                for (i, &t) in times.iter().enumerate() {
                    assert_relative_eq!(
                        perturbed.eval(t, 0),
                        wps.positions()[i],
                        epsilon = 1e-7
                    );
                }
                assert!(
                    snap_cost(&perturbed) >= base_cost - 1e-9,
                    "perturbation decreased the snap cost"
                );
            }
        }
    }

    #[test]
    fn geometric_wrap_preserves_endpoints_and_speed() {
        let wps = WaypointSet::new(vec![Vector3::zeros(), Vector3::new(0.0, 4.0, 0.0)]).unwrap();
        let seed = fit_min_derivative(&wps, MinimizeOrder::Acceleration, 2.0).unwrap();
        let path = to_geometric(seed);
        assert_relative_eq!(path.gamma(0.0), Vector3::zeros(), epsilon = 1e-9);
        assert_relative_eq!(
            path.gamma(path.s_end()),
            Vector3::new(0.0, 4.0, 0.0),
            epsilon = 1e-9
        );
    }

    #[test]
    fn grid_spacing_and_cached_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let wps = random_waypoints(&mut rng, 4, 10.0);
        let seed = fit_min_derivative(&wps, MinimizeOrder::Snap, 1.0).unwrap();
        let path = Arc::new(to_geometric(seed));
        let grid = build_grid(path.clone(), 300);
        assert_eq!(grid.node_count(), 301);
        let ds = grid.ds();
        for i in 0..grid.intervals() {
            assert!((grid.s()[i + 1] - grid.s()[i] - ds).abs() < 1e-12 * grid.s_end().max(1.0));
        }
        // Cached first derivative matches a centered difference of gamma.
        for &i in &[37, 150, 222] {
            let s = grid.s()[i];
            let d = 1e-6;
            let fd = (path.gamma(s + d) - path.gamma(s - d)) / (2.0 * d);
            assert_relative_eq!(grid.gamma_p(i), fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn tiny_grid_has_three_nodes() {
        let wps = WaypointSet::new(vec![Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0)]).unwrap();
        let seed = fit_min_derivative(&wps, MinimizeOrder::Acceleration, 1.0).unwrap();
        let grid = build_grid(Arc::new(to_geometric(seed)), 2);
        assert_eq!(grid.s(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn n300_spacing_matches_expected() {
        // A path of duration ~7.5 seconds gridded at N=300 gives ds ~ 0.025.
        let wps = WaypointSet::new(vec![Vector3::zeros(), Vector3::new(7.5, 0.0, 0.0)]).unwrap();
        let seed = fit_min_derivative(&wps, MinimizeOrder::Snap, 1.0).unwrap();
        let grid = build_grid(Arc::new(to_geometric(seed)), 300);
        assert_relative_eq!(grid.ds(), 0.025, epsilon = 1e-12);
    }

    #[test]
    fn duplicate_waypoints_rejected() {
        let err = WaypointSet::new(vec![Vector3::zeros(), Vector3::zeros()]);
        assert!(matches!(err, Err(PathError::DuplicateWaypoint(0, 1))));
    }

    #[test]
    fn csv_roundtrip_with_yaw() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("wps.csv");
        std::fs::write(&file, "x,y,z,yaw\n0,0,0,0\n1,2,3,0.5\n# comment\n4,5,6,1.0\n").unwrap();
        let wps = WaypointSet::from_csv(&file).unwrap();
        assert_eq!(wps.len(), 3);
        assert_eq!(wps.yaws().unwrap()[1], 0.5);
        assert_relative_eq!(wps.positions()[2], Vector3::new(4.0, 5.0, 6.0));
    }

    #[test]
    fn cubic_interpolation_matches_samples() {
        let times: Vec<f64> = (0..20).map(|i| 0.25 * i as f64).collect();
        let pos: Vec<Vector3<f64>> = times
            .iter()
            .map(|&t| Vector3::new(t.sin(), 0.5 * t, (0.3 * t).cos()))
            .collect();
        let v0 = Vector3::new(1.0, 0.5, 0.0);
        let v1 = Vector3::new(times.last().unwrap().cos(), 0.5, -0.3 * (0.3 * times.last().unwrap()).sin());
        let spline = interpolate_cubic_clamped(&times, &pos, v0, v1).unwrap();
        for (i, &t) in times.iter().enumerate() {
            assert_relative_eq!(spline.eval(t, 0), pos[i], epsilon = 1e-10);
        }
        // Interior C2: second derivative agrees from both sides.
        for &t in &times[1..times.len() - 1] {
            let l = spline.eval(t - 1e-9, 2);
            let r = spline.eval(t + 1e-9, 2);
            assert_relative_eq!(l, r, epsilon = 1e-5);
        }
    }
}
