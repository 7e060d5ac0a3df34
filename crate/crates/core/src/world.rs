//! Single-target and single-agent models.
//!
//! Targets follow a near-constant-velocity model, agents move on a polar
//! lattice of admissible displacements, and a footprint-limited sensor
//! returns noisy range/bearing pairs whose noise grows with range.

use std::f64::consts::PI;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane (m).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    /// Chebyshev (max-norm) distance, the natural metric of square footprints.
    pub fn chebyshev(&self, other: &Position) -> f64 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }
}

/// Axis-aligned rectangle, used for the surveillance area and sensing footprints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Position,
    pub max: Position,
}

impl Rect {
    pub fn new(min: Position, max: Position) -> Self {
        Self { min, max }
    }

    /// Closed square of side `side` centred on `center`.
    pub fn square(center: Position, side: f64) -> Self {
        let h = side / 2.0;
        Self {
            min: Position::new(center.x - h, center.y - h),
            max: Position::new(center.x + h, center.y + h),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Position {
        Position::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    pub fn contains(&self, p: &Position) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }

    /// Overlap of two rectangles, if they share more than an edge or corner.
    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let min = Position::new(self.min.x.max(other.min.x), self.min.y.max(other.min.y));
        let max = Position::new(self.max.x.min(other.max.x), self.max.y.min(other.max.y));
        (min.x < max.x && min.y < max.y).then_some(Rect { min, max })
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Position {
        Position::new(
            self.min.x + rng.random::<f64>() * self.width(),
            self.min.y + rng.random::<f64>() * self.height(),
        )
    }
}

/// Target label: virtual targets mark search-map locations, true targets are physical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Virtual = 0,
    True = 1,
}

/// Single-target state `[px, vx, py, vy]` with its label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    pub px: f64,
    pub vx: f64,
    pub py: f64,
    pub vy: f64,
    pub label: Label,
}

impl KinematicState {
    pub fn target(px: f64, vx: f64, py: f64, vy: f64) -> Self {
        Self { px, vx, py, vy, label: Label::True }
    }

    /// Virtual targets are static, so their velocity is zero.
    pub fn virtual_at(p: Position) -> Self {
        Self { px: p.x, vx: 0.0, py: p.y, vy: 0.0, label: Label::Virtual }
    }

    pub fn position(&self) -> Position {
        Position::new(self.px, self.py)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.px, self.vx, self.py, self.vy]
    }

    pub fn from_array(v: [f64; 4], label: Label) -> Self {
        Self { px: v[0], vx: v[1], py: v[2], vy: v[3], label }
    }
}

type Mat4 = [[f64; 4]; 4];

/// Linear-Gaussian target motion: `x' = F x + w`, `w ~ N(0, Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel {
    transition: Mat4,
    process_noise: Mat4,
    noise_factor: Mat4,
    dt: f64,
    survival: f64,
}

impl MotionModel {
    pub fn new(transition: Mat4, process_noise: Mat4, dt: f64, survival: f64) -> Result<Self> {
        if !(survival > 0.0 && survival <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "survival",
                reason: format!("must lie in (0, 1], got {survival}"),
            });
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive, got {dt}"),
            });
        }
        for i in 0..4 {
            for j in 0..i {
                if (process_noise[i][j] - process_noise[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidParameter {
                        name: "process_noise",
                        reason: "covariance must be symmetric".into(),
                    });
                }
            }
        }
        let noise_factor = cholesky_psd(&process_noise).ok_or_else(|| Error::InvalidParameter {
            name: "process_noise",
            reason: "covariance must be positive semi-definite".into(),
        })?;
        Ok(Self { transition, process_noise, noise_factor, dt, survival })
    }

    /// Near-constant-velocity model with white-acceleration noise of unit intensity,
    /// scaled by `noise_scale` (1.0 gives the standard model).
    pub fn constant_velocity(dt: f64, survival: f64, noise_scale: f64) -> Result<Self> {
        let t = dt;
        let f = [
            [1.0, t, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, t],
            [0.0, 0.0, 0.0, 1.0],
        ];
        let q = noise_scale;
        let noise = [
            [q * t / 3.0, q * t / 2.0, 0.0, 0.0],
            [q * t / 2.0, q * t, 0.0, 0.0],
            [0.0, 0.0, q * t / 3.0, q * t / 2.0],
            [0.0, 0.0, q * t / 2.0, q * t],
        ];
        Self::new(f, noise, dt, survival)
    }

    pub fn transition(&self) -> &Mat4 {
        &self.transition
    }

    pub fn process_noise(&self) -> &Mat4 {
        &self.process_noise
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn survival(&self) -> f64 {
        self.survival
    }

    pub fn apply_transition(&self, x: &[f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (i, row) in self.transition.iter().enumerate() {
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 4] {
        let e: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let mut out = [0.0; 4];
        for (i, row) in self.noise_factor.iter().enumerate() {
            out[i] = row[..=i].iter().zip(&e).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Noisy one-step propagation of a true-target state vector.
    pub fn sample_next<R: Rng + ?Sized>(&self, x: &[f64; 4], rng: &mut R) -> [f64; 4] {
        let mean = self.apply_transition(x);
        let w = self.sample_noise(rng);
        std::array::from_fn(|i| mean[i] + w[i])
    }
}

/// Lower-triangular factor `L` with `L Lᵀ = A` for a positive semi-definite `A`.
fn cholesky_psd(a: &Mat4) -> Option<Mat4> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-12 * scale;
    let mut l = [[0.0; 4]; 4];
    for j in 0..4 {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if d < -tol {
            return None;
        }
        let d = d.max(0.0).sqrt();
        l[j][j] = d;
        for i in (j + 1)..4 {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = if d > tol.sqrt() {
                s / d
            } else if s.abs() <= tol {
                0.0
            } else {
                return None;
            };
        }
    }
    Some(l)
}

/// Propagates a target one step. Virtual targets are returned unchanged; true targets
/// move through the transition matrix, with process noise when a random source is given.
pub fn propagate_target(
    x: &KinematicState,
    model: &MotionModel,
    noise: Option<&mut dyn RngCore>,
) -> KinematicState {
    match x.label {
        Label::Virtual => *x,
        Label::True => {
            let v = x.as_array();
            let next = match noise {
                Some(rng) => model.sample_next(&v, rng),
                None => model.apply_transition(&v),
            };
            KinematicState::from_array(next, Label::True)
        }
    }
}

/// Range/bearing observation. Bearing is measured from the agent towards the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub range: f64,
    pub bearing: f64,
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Footprint-limited range/bearing sensor with range-dependent noise and Poisson clutter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModel {
    /// Side of the square sensing footprint (m).
    pub side: f64,
    pub pd_max: f64,
    pub range_noise_intercept: f64,
    pub range_noise_slope: f64,
    pub bearing_noise_intercept: f64,
    pub bearing_noise_slope: f64,
    /// Expected number of false alarms per scan.
    pub clutter_rate: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            side: 10.0,
            pd_max: 0.99,
            range_noise_intercept: 1.0,
            range_noise_slope: 5e-5,
            bearing_noise_intercept: PI / 180.0,
            bearing_noise_slope: 1e-5,
            clutter_rate: 10.0,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.pd_max > 0.0 && self.pd_max <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "pd_max",
                reason: format!("must lie in (0, 1], got {}", self.pd_max),
            });
        }
        if !(self.side > 0.0) {
            return Err(Error::InvalidParameter {
                name: "side",
                reason: format!("must be positive, got {}", self.side),
            });
        }
        let coeffs = [
            self.range_noise_intercept,
            self.range_noise_slope,
            self.bearing_noise_intercept,
            self.bearing_noise_slope,
            self.clutter_rate,
        ];
        if coeffs.iter().any(|c| !(*c >= 0.0)) {
            return Err(Error::InvalidParameter {
                name: "noise",
                reason: "noise coefficients and clutter rate must be non-negative".into(),
            });
        }
        Ok(())
    }

    pub fn footprint(&self, s: Position) -> Rect {
        Rect::square(s, self.side)
    }

    /// Range standard deviation `ζ0 + βζ·r²`.
    pub fn range_std(&self, range: f64) -> f64 {
        self.range_noise_intercept + self.range_noise_slope * range * range
    }

    /// Bearing standard deviation `φ0 + βφ·r`.
    pub fn bearing_std(&self, range: f64) -> f64 {
        self.bearing_noise_intercept + self.bearing_noise_slope * range
    }

    /// Detection probability of a true target at `p` seen from `s`.
    #[inline]
    pub fn detection_probability_at(&self, p: Position, s: Position) -> f64 {
        if in_sensing_range(p, s, self.side) {
            self.pd_max
        } else {
            0.0
        }
    }

    /// Noiseless measurement `h(x, s)`.
    pub fn noiseless(&self, p: Position, s: Position) -> Measurement {
        let dx = p.x - s.x;
        let dy = p.y - s.y;
        Measurement { range: (dx * dx + dy * dy).sqrt(), bearing: dy.atan2(dx) }
    }

    /// Clutter intensity `κ(z) = λc·f_c(z)`. Clutter is uniform in position over the
    /// footprint, so in range/bearing coordinates its density carries the Jacobian `r`.
    pub fn clutter_intensity(&self, z: &Measurement) -> f64 {
        let h = self.side / 2.0;
        let dx = z.range * z.bearing.cos();
        let dy = z.range * z.bearing.sin();
        if z.range < 0.0 || dx.abs() > h || dy.abs() > h {
            0.0
        } else {
            self.clutter_rate * z.range / (self.side * self.side)
        }
    }
}

/// Detection probability for a true target; virtual targets are rejected.
pub fn detection_probability(x: &KinematicState, s: Position, sensor: &SensorModel) -> Result<f64> {
    match x.label {
        Label::Virtual => Err(Error::VirtualTarget),
        Label::True => Ok(sensor.detection_probability_at(x.position(), s)),
    }
}

/// Closed-square sensing indicator: `max(|dx|, |dy|) ≤ a/2`.
#[inline]
pub fn in_sensing_range(p: Position, s: Position, side: f64) -> bool {
    (p.x - s.x).abs() <= side / 2.0 && (p.y - s.y).abs() <= side / 2.0
}

/// Generates a range/bearing measurement of `x` from agent position `s`.
pub fn measure(
    x: &KinematicState,
    s: Position,
    sensor: &SensorModel,
    noise: Option<&mut dyn RngCore>,
) -> Measurement {
    let z = sensor.noiseless(x.position(), s);
    match noise {
        None => z,
        Some(rng) => {
            let nr: f64 = rng.sample(StandardNormal);
            let nb: f64 = rng.sample(StandardNormal);
            Measurement {
                range: (z.range + sensor.range_std(z.range) * nr).max(0.0),
                bearing: wrap_angle(z.bearing + sensor.bearing_std(z.range) * nb),
            }
        }
    }
}

/// Gaussian measurement likelihood `g(z | x, s)` with the bearing residual wrapped.
pub fn likelihood(z: &Measurement, x: &KinematicState, s: Position, sensor: &SensorModel) -> f64 {
    let h = sensor.noiseless(x.position(), s);
    gaussian_range_bearing(z, &h, sensor.range_std(h.range), sensor.bearing_std(h.range))
}

#[inline]
pub(crate) fn gaussian_range_bearing(
    z: &Measurement,
    h: &Measurement,
    range_std: f64,
    bearing_std: f64,
) -> f64 {
    let dr = (z.range - h.range) / range_std;
    let db = wrap_angle(z.bearing - h.bearing) / bearing_std;
    (-0.5 * (dr * dr + db * db)).exp() / (2.0 * PI * range_std * bearing_std)
}

/// Polar lattice of agent displacements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlModel {
    pub radial_step: f64,
    pub radial_levels: u32,
    pub angular_divisions: u32,
}

impl Default for ControlModel {
    fn default() -> Self {
        Self { radial_step: 2.0, radial_levels: 2, angular_divisions: 8 }
    }
}

impl ControlModel {
    pub fn max_step(&self) -> f64 {
        self.radial_step * self.radial_levels as f64
    }
}

/// Enumerates the positions reachable in one step, stay action first, then ring by
/// ring counter-clockwise from east. Duplicate positions are dropped.
pub fn admissible_controls(s: Position, controls: &ControlModel) -> Vec<Position> {
    let n_theta = controls.angular_divisions.max(1);
    let dtheta = 2.0 * PI / n_theta as f64;
    let tol = 1e-9 * controls.radial_step.abs().max(1.0);
    let mut out: Vec<Position> = Vec::new();
    for l1 in 0..=controls.radial_levels {
        for l2 in 0..=n_theta {
            let r = l1 as f64 * controls.radial_step;
            let theta = l2 as f64 * dtheta;
            let p = Position::new(s.x + r * snap(theta.cos()), s.y + r * snap(theta.sin()));
            if !out.iter().any(|q| q.chebyshev(&p) <= tol) {
                out.push(p);
            }
        }
    }
    out
}

// Keeps axis-aligned headings exactly on the axes.
fn snap(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        0.0
    } else {
        v
    }
}

/// Admissible controls restricted to the surveillance area.
pub fn admissible_controls_within(s: Position, controls: &ControlModel, area: &Rect) -> Vec<Position> {
    let mut u = admissible_controls(s, controls);
    u.retain(|p| area.contains(p));
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn noiseless_propagation_applies_transition() {
        let m = MotionModel::constant_velocity(1.0, 0.99, 1.0).unwrap();
        let x = KinematicState::target(0.0, 1.0, 0.0, 1.0);
        let y = propagate_target(&x, &m, None);
        assert_eq!(y.as_array(), [1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn virtual_targets_are_static() {
        let m = MotionModel::constant_velocity(1.0, 0.99, 1.0).unwrap();
        let x = KinematicState::virtual_at(Position::new(5.0, 7.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = propagate_target(&x, &m, Some(&mut rng));
        assert_eq!(x, y);
    }

    #[test]
    fn noisy_propagation_mean_matches_transition() {
        let m = MotionModel::constant_velocity(1.0, 0.99, 1.0).unwrap();
        let x = KinematicState::target(0.0, 1.0, 0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let mut sum = [0.0; 4];
        for _ in 0..n {
            let y = propagate_target(&x, &m, Some(&mut rng)).as_array();
            for i in 0..4 {
                sum[i] += y[i];
            }
        }
        let q = m.process_noise();
        for i in 0..4 {
            let mean = sum[i] / n as f64;
            let tol = 4.0 * q[i][i].sqrt() / (n as f64).sqrt();
            assert!(close(mean, 1.0, tol), "component {i}: {mean}");
        }
    }

    #[test]
    fn rejects_bad_motion_parameters() {
        let m = MotionModel::constant_velocity(1.0, 0.99, 1.0).unwrap();
        assert!(MotionModel::new(*m.transition(), *m.process_noise(), 1.0, 0.0).is_err());
        let mut q = *m.process_noise();
        q[0][0] = -1.0;
        assert!(MotionModel::new(*m.transition(), q, 1.0, 0.5).is_err());
    }

    #[test]
    fn seventeen_controls_for_default_lattice() {
        let u = admissible_controls(Position::default(), &ControlModel::default());
        assert_eq!(u.len(), 17);
        assert_eq!(u[0], Position::default());
    }

    #[test]
    fn stay_only_without_radial_levels() {
        let c = ControlModel { radial_step: 2.0, radial_levels: 0, angular_divisions: 8 };
        assert_eq!(admissible_controls(Position::new(3.0, 4.0), &c), vec![Position::new(3.0, 4.0)]);
    }

    #[test]
    fn four_heading_ring() {
        let c = ControlModel { radial_step: 2.0, radial_levels: 1, angular_divisions: 4 };
        let u = admissible_controls(Position::default(), &c);
        let expected = [(0.0, 0.0), (2.0, 0.0), (0.0, 2.0), (-2.0, 0.0), (0.0, -2.0)];
        assert_eq!(u.len(), expected.len());
        for (p, (x, y)) in u.iter().zip(expected) {
            assert!(close(p.x, x, 1e-12) && close(p.y, y, 1e-12), "{p:?}");
        }
    }

    #[test]
    fn controls_leaving_the_area_are_removed() {
        let area = Rect::new(Position::new(0.0, 0.0), Position::new(100.0, 100.0));
        let u = admissible_controls_within(Position::new(0.0, 0.0), &ControlModel::default(), &area);
        assert!(u.iter().all(|p| area.contains(p)));
        // stay, two east, two north, and the two north-east diagonals
        assert_eq!(u.len(), 7);
    }

    #[test]
    fn detection_inside_and_outside_footprint() {
        let sm = SensorModel::default();
        let s = Position::new(50.0, 50.0);
        let at = KinematicState::target(50.0, 0.0, 50.0, 0.0);
        assert_eq!(detection_probability(&at, s, &sm).unwrap(), 0.99);
        let far = KinematicState::target(60.0, 0.0, 50.0, 0.0);
        assert_eq!(detection_probability(&far, s, &sm).unwrap(), 0.0);
        let far_y = KinematicState::target(50.0, 0.0, 40.0, 0.0);
        assert_eq!(detection_probability(&far_y, s, &sm).unwrap(), 0.0);
        let edge = KinematicState::target(55.0, 0.0, 50.0, 0.0);
        assert_eq!(detection_probability(&edge, s, &sm).unwrap(), 0.99);
        let v = KinematicState::virtual_at(s);
        assert!(matches!(detection_probability(&v, s, &sm), Err(Error::VirtualTarget)));
    }

    #[test]
    fn sensing_indicator_is_closed() {
        let s = Position::new(0.0, 0.0);
        assert!(in_sensing_range(s, s, 10.0));
        assert!(in_sensing_range(Position::new(5.0, 5.0), s, 10.0));
        assert!(!in_sensing_range(Position::new(10.0, 0.0), s, 10.0));
    }

    #[test]
    fn measurement_geometry_and_noise_levels() {
        let sm = SensorModel::default();
        let x = KinematicState::target(3.0, 0.0, 4.0, 0.0);
        let z = measure(&x, Position::default(), &sm, None);
        assert!(close(z.range, 5.0, 1e-12));
        assert!(close(z.bearing, 4.0f64.atan2(3.0), 1e-12));
        assert!(close(sm.range_std(100.0), 1.5, 1e-12));
        assert!(close(sm.bearing_std(100.0), PI / 180.0 + 1e-3, 1e-15));
    }

    #[test]
    fn likelihood_peak_symmetry_and_wrap() {
        let sm = SensorModel::default();
        let s = Position::default();
        let x = KinematicState::target(3.0, 0.0, 4.0, 0.0);
        let h = sm.noiseless(x.position(), s);
        let (sr, sb) = (sm.range_std(5.0), sm.bearing_std(5.0));
        let peak = likelihood(&h, &x, s, &sm);
        assert!(close(peak, 1.0 / (2.0 * PI * sr * sb), 1e-12));

        let plus = Measurement { range: h.range + 0.3, ..h };
        let minus = Measurement { range: h.range - 0.3, ..h };
        assert!(close(likelihood(&plus, &x, s, &sm), likelihood(&minus, &x, s, &sm), 1e-15));

        let wrapped = Measurement { range: h.range, bearing: h.bearing + 2.0 * PI - 0.01 };
        let direct = (-0.5 * (0.01 / sb).powi(2)).exp() / (2.0 * PI * sr * sb);
        assert!(close(likelihood(&wrapped, &x, s, &sm), direct, 1e-12 * direct.max(1.0)));
    }

    #[test]
    fn likelihood_integrates_to_one() {
        let sm = SensorModel::default();
        let s = Position::default();
        let x = KinematicState::target(30.0, 0.0, 40.0, 0.0);
        let h = sm.noiseless(x.position(), s);
        let (sr, sb) = (sm.range_std(h.range), sm.bearing_std(h.range));
        // midpoint rule over ±8σ in each coordinate
        let n = 400;
        let (r0, r1) = (h.range - 8.0 * sr, h.range + 8.0 * sr);
        let (b0, b1) = (h.bearing - 8.0 * sb, h.bearing + 8.0 * sb);
        let (dr, db) = ((r1 - r0) / n as f64, (b1 - b0) / n as f64);
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let z = Measurement {
                    range: r0 + (i as f64 + 0.5) * dr,
                    bearing: b0 + (j as f64 + 0.5) * db,
                };
                total += likelihood(&z, &x, s, &sm) * dr * db;
            }
        }
        assert!(close(total, 1.0, 1e-3), "{total}");
    }

    #[test]
    fn clutter_intensity_integrates_to_rate() {
        let sm = SensorModel::default();
        // integrate κ over a polar grid that covers the footprint
        let n = 600;
        let rmax = sm.side / 2.0 * 2f64.sqrt();
        let (dr, db) = (rmax / n as f64, 2.0 * PI / n as f64);
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let z = Measurement {
                    range: (i as f64 + 0.5) * dr,
                    bearing: -PI + (j as f64 + 0.5) * db,
                };
                total += sm.clutter_intensity(&z) * dr * db;
            }
        }
        assert!(close(total, sm.clutter_rate, 0.02), "{total}");
    }

    #[test]
    fn wrap_angle_range() {
        assert!(close(wrap_angle(3.0 * PI), PI, 1e-12));
        assert!(close(wrap_angle(-PI), PI, 1e-12));
        assert!(close(wrap_angle(0.5), 0.5, 1e-15));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn control_count_is_rings_times_headings_plus_one(
                step in 0.1f64..10.0, rings in 0u32..4, headings in 1u32..16,
                sx in -50.0f64..50.0, sy in -50.0f64..50.0,
            ) {
                let c = ControlModel { radial_step: step, radial_levels: rings, angular_divisions: headings };
                let u = admissible_controls(Position::new(sx, sy), &c);
                prop_assert_eq!(u.len() as u32, rings * headings + 1);
            }

            #[test]
            fn virtual_propagation_is_identity(px in -1e3f64..1e3, py in -1e3f64..1e3, seed in 0u64..1000) {
                let m = MotionModel::constant_velocity(1.0, 0.99, 1.0).unwrap();
                let x = KinematicState::virtual_at(Position::new(px, py));
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                prop_assert_eq!(propagate_target(&x, &m, Some(&mut rng)), x);
            }

            #[test]
            fn detection_is_binary(dx in -20.0f64..20.0, dy in -20.0f64..20.0) {
                let sm = SensorModel::default();
                let x = KinematicState::target(dx, 0.0, dy, 0.0);
                let pd = detection_probability(&x, Position::default(), &sm).unwrap();
                let inside = dx.abs() <= 5.0 && dy.abs() <= 5.0;
                prop_assert_eq!(pd, if inside { 0.99 } else { 0.0 });
            }
        }
    }
}
