//! Constant-curvature continuum-arm kinematics and its cable/gear drive.
//!
//! The arm is a fixed-length elastic backbone of length `L` bent into a
//! circular arc by three cables routed at distance `d` from the backbone,
//! 120 degrees apart. Its configuration is the q-parametrization
//! `(delta_x, delta_y)`: signed cable-length combinations, in metres. The
//! arc geometry follows from
//!
//! * curvature angle `gamma = sqrt(delta_x^2 + delta_y^2) / d`, in `[0, pi/2]`,
//! * bending direction `phi_bend = atan2(delta_y, delta_x)`, zero for a
//!   straight arm.
//!
//! The arm base hangs below the vehicle's center of buoyancy; the tip
//! carries the moving mass. Tip position and its Jacobian with respect to
//! `(delta_x, delta_y)` are what the vehicle dynamics consume.
//!
//! Drive train: two motor inputs `(omega_in_x, omega_in_y)` turn three
//! cable reels through a compound gear train (one fixed-axis reel, two
//! differential reels) arranged so that each motor commands exactly one of
//! `delta_x`, `delta_y`. All of it is kinematic: cables are ideal,
//! inextensible constraints with no tension, slack, or friction model.

use nalgebra::{Matrix3, Matrix3x2, Matrix4, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Curvature angle below which tip/Jacobian evaluation switches to series
/// expansions; the closed forms are 0/0 at gamma = 0.
pub const SERIES_THRESHOLD: f64 = 1e-4;

/// Errors from arm construction and workspace handling.
#[derive(Debug, Error, PartialEq)]
pub enum ArmError {
    /// Requested bend exceeds the quarter-turn workspace.
    #[error("curvature angle {gamma:.6} rad exceeds the pi/2 workspace limit")]
    WorkspaceExceeded { gamma: f64 },
    /// Spec fields violate a constructive invariant.
    #[error("invalid arm specification: {0}")]
    InvalidSpec(String),
}

/// Spur-gear tooth counts of the drive train, in the order
/// `(n_x, n_1, n_y, n_5p, n_yp, n_7p, n_8)`.
///
/// The three motor-to-reel paths must share one ratio `k`:
/// `k = n_x/n_1 = n_y/n_5p = n_yp/n_7p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToothCounts {
    pub n_x: u32,
    pub n_1: u32,
    pub n_y: u32,
    pub n_5p: u32,
    pub n_yp: u32,
    pub n_7p: u32,
    pub n_8: u32,
}

impl Default for ToothCounts {
    fn default() -> Self {
        // Equal tooth counts give unit drive ratio.
        Self { n_x: 20, n_1: 20, n_y: 20, n_5p: 20, n_yp: 20, n_7p: 20, n_8: 20 }
    }
}

/// Geometry and drive parameters of the continuum arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmSpec {
    /// Backbone length `L`, m.
    pub length: f64,
    /// Cable-to-backbone distance `d`, m.
    pub cable_offset: f64,
    /// Arm-base offset below the center of buoyancy (also the thrust moment
    /// arm), m.
    pub base_offset: f64,
    /// Gear drive ratio `k`; must equal the tooth-count ratios.
    pub gear_ratio: f64,
    /// Cable reel radius, m.
    pub reel_radius: f64,
    /// Spur-gear tooth counts; validated against `gear_ratio`.
    pub tooth_counts: ToothCounts,
    /// Sign of the `delta_y` response to its motor, +1 or -1. The winding
    /// direction of the differential reels admits either convention, so it
    /// is configuration rather than a hard-coded constant.
    pub dy_sign: f64,
    /// Motor speed saturation used by the inner control loop, rad/s.
    pub motor_speed_max: f64,
}

impl Default for ArmSpec {
    fn default() -> Self {
        Self {
            length: 0.3,
            cable_offset: 0.04,
            base_offset: 0.3,
            gear_ratio: 1.0,
            reel_radius: 0.005,
            tooth_counts: ToothCounts::default(),
            dy_sign: 1.0,
            motor_speed_max: 6.0,
        }
    }
}

impl ArmSpec {
    /// Validates the constructive invariants, returning the spec unchanged.
    pub fn validated(self) -> Result<Self, ArmError> {
        let mut violations = Vec::new();
        if !(self.length > 0.0) {
            violations.push("length must be > 0".to_string());
        }
        if !(self.cable_offset > 0.0) {
            violations.push("cable_offset must be > 0".to_string());
        }
        if !(self.base_offset > 0.0) {
            violations.push("base_offset must be > 0".to_string());
        }
        if !(self.reel_radius > 0.0) {
            violations.push("reel_radius must be > 0".to_string());
        }
        if !(self.motor_speed_max > 0.0) {
            violations.push("motor_speed_max must be > 0".to_string());
        }
        if self.dy_sign != 1.0 && self.dy_sign != -1.0 {
            violations.push("dy_sign must be +1 or -1".to_string());
        }
        let t = &self.tooth_counts;
        if t.n_1 == 0 || t.n_5p == 0 || t.n_7p == 0 || t.n_8 == 0 {
            violations.push("driven gears must have nonzero tooth counts".to_string());
        } else {
            let ratios = [
                f64::from(t.n_x) / f64::from(t.n_1),
                f64::from(t.n_y) / f64::from(t.n_5p),
                f64::from(t.n_yp) / f64::from(t.n_7p),
            ];
            for r in ratios {
                if (r - self.gear_ratio).abs() > 1e-12 {
                    violations.push(format!(
                        "gear_ratio {} does not match tooth-count ratio {}",
                        self.gear_ratio, r
                    ));
                    break;
                }
            }
        }
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(ArmError::InvalidSpec(violations.join("; ")))
        }
    }

    /// Largest `sqrt(delta_x^2 + delta_y^2)` inside the workspace, m.
    pub fn workspace_radius(&self) -> f64 {
        self.cable_offset * std::f64::consts::FRAC_PI_2
    }

    /// Largest achievable `|d(delta_x)/dt|` under motor saturation, m/s.
    pub fn max_rate_x(&self) -> f64 {
        self.gear_ratio * self.reel_radius * self.motor_speed_max
    }

    /// Largest achievable `|d(delta_y)/dt|` under motor saturation, m/s.
    pub fn max_rate_y(&self) -> f64 {
        3f64.sqrt() / 3.0 * self.gear_ratio * self.reel_radius * self.motor_speed_max
    }
}

/// Arm configuration: the q-parametrization with its derived arc form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmConfig {
    /// `(delta_x, delta_y)`, m.
    pub delta: Vector2<f64>,
    /// Curvature angle, rad, in `[0, pi/2]`.
    pub gamma: f64,
    /// Bending direction, rad, in `[0, 2*pi)`; zero for a straight arm.
    pub phi_bend: f64,
}

impl ArmConfig {
    /// Builds the configuration, rejecting bends beyond the workspace.
    pub fn new(delta: Vector2<f64>, cable_offset: f64) -> Result<Self, ArmError> {
        let (gamma, phi_bend) = q_to_arc(delta, cable_offset)?;
        Ok(Self { delta, gamma, phi_bend })
    }
}

/// Cable length deviations `(dl_1, dl_2, dl_3)` from the nominal length, m.
///
/// The three deviations always sum to zero: the cables wrap a fixed-length
/// backbone, so one reel pays out exactly what the other two take up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CableState {
    pub deviations: Vector3<f64>,
}

/// Converts the q-parametrization to arc coordinates `(gamma, phi_bend)`.
///
/// `phi_bend` is the planar angle of `(delta_x, delta_y)` folded into
/// `[0, 2*pi)`, and zero by convention when the arm is straight.
///
/// # Example
/// ```
/// use nalgebra::Vector2;
/// let (gamma, phi) = arcblimp::arm::q_to_arc(Vector2::new(0.02, 0.0), 0.04).unwrap();
/// assert!((gamma - 0.5).abs() < 1e-15 && phi == 0.0);
/// ```
pub fn q_to_arc(delta: Vector2<f64>, cable_offset: f64) -> Result<(f64, f64), ArmError> {
    let gamma = delta.norm() / cable_offset;
    // Tolerance admits states sitting exactly on the clamped boundary.
    if gamma > std::f64::consts::FRAC_PI_2 + 1e-12 {
        return Err(ArmError::WorkspaceExceeded { gamma });
    }
    let phi_bend = if delta == Vector2::zeros() {
        0.0
    } else {
        let raw = delta.y.atan2(delta.x);
        if raw < 0.0 { raw + 2.0 * std::f64::consts::PI } else { raw }
    };
    Ok((gamma, phi_bend))
}

/// Inverse of [`q_to_arc`].
pub fn arc_to_q(gamma: f64, phi_bend: f64, cable_offset: f64) -> Vector2<f64> {
    Vector2::new(
        cable_offset * gamma * phi_bend.cos(),
        cable_offset * gamma * phi_bend.sin(),
    )
}

/// `(1 - cos g) / g^2`, series-expanded near zero.
fn arc_a(gamma: f64) -> f64 {
    if gamma.abs() < SERIES_THRESHOLD {
        let g2 = gamma * gamma;
        0.5 - g2 / 24.0
    } else {
        (1.0 - gamma.cos()) / (gamma * gamma)
    }
}

/// `sin(g) / g`, series-expanded near zero.
fn arc_b(gamma: f64) -> f64 {
    if gamma.abs() < SERIES_THRESHOLD {
        let g2 = gamma * gamma;
        1.0 - g2 / 6.0
    } else {
        gamma.sin() / gamma
    }
}

/// `d/dg[(1 - cos g)/g^2] / g`; finite at zero. The closed form cancels
/// catastrophically for small `g`, so a series covers `|g| < 0.1`.
fn arc_a1(gamma: f64) -> f64 {
    if gamma.abs() < 0.1 {
        let g2 = gamma * gamma;
        -1.0 / 12.0 + g2 / 180.0 - g2 * g2 / 6720.0
    } else {
        (gamma * gamma.sin() - 2.0 * (1.0 - gamma.cos())) / gamma.powi(4)
    }
}

/// `d/dg[sin(g)/g] / g`; finite at zero, series for `|g| < 0.1`.
fn arc_b1(gamma: f64) -> f64 {
    if gamma.abs() < 0.1 {
        let g2 = gamma * gamma;
        -1.0 / 3.0 + g2 / 30.0 - g2 * g2 / 840.0
    } else {
        (gamma * gamma.cos() - gamma.sin()) / gamma.powi(3)
    }
}

/// Tip position of the bent arm relative to its base, m.
///
/// With `gamma = |delta|/d`, the arc places the tip at
/// `[(L/d) * delta_x * A(gamma), (L/d) * delta_y * A(gamma), L * B(gamma)]`
/// where `A(g) = (1 - cos g)/g^2` and `B(g) = sin(g)/g`. A straight arm
/// gives `(0, 0, L)`; z is positive because the arm hangs downward.
///
/// Below [`SERIES_THRESHOLD`] the 0/0 forms are replaced by their
/// second-order expansions `[L*dx/(2d), L*dy/(2d), L*(1 - gamma^2/6)]`,
/// continuous with the closed form to well under 1e-9 relative.
pub fn tip_from_q(delta: Vector2<f64>, length: f64, cable_offset: f64) -> Vector3<f64> {
    let gamma = delta.norm() / cable_offset;
    let a = arc_a(gamma);
    let b = arc_b(gamma);
    Vector3::new(
        length / cable_offset * delta.x * a,
        length / cable_offset * delta.y * a,
        length * b,
    )
}

/// Jacobian of [`tip_from_q`] with respect to `(delta_x, delta_y)`, 3x2.
///
/// Analytic, with the same series treatment near the straight configuration;
/// at `delta = 0` it is `[[L/(2d), 0], [0, L/(2d)], [0, 0]]`.
pub fn tip_jacobian(delta: Vector2<f64>, length: f64, cable_offset: f64) -> Matrix3x2<f64> {
    let d = cable_offset;
    let gamma = delta.norm() / d;
    let a = arc_a(gamma);
    let a1 = arc_a1(gamma);
    let b1 = arc_b1(gamma);
    let l_d = length / d;
    let l_d3 = length / (d * d * d);
    Matrix3x2::new(
        l_d * a + l_d3 * delta.x * delta.x * a1,
        l_d3 * delta.x * delta.y * a1,
        l_d3 * delta.x * delta.y * a1,
        l_d * a + l_d3 * delta.y * delta.y * a1,
        length / (d * d) * delta.x * b1,
        length / (d * d) * delta.y * b1,
    )
}

/// Cable length deviations produced by a configuration `delta`.
///
/// `dl_1 = -delta_x`, `dl_2 = delta_x/2 - (sqrt(3)/2) delta_y`, and the
/// third deviation is computed as `-(dl_1 + dl_2)`, algebraically equal to
/// `delta_x/2 + (sqrt(3)/2) delta_y`, so the zero-sum constraint holds
/// exactly in floating point and not merely to rounding.
pub fn cable_deviations(delta: Vector2<f64>) -> CableState {
    let dl1 = -delta.x;
    let dl2 = 0.5 * delta.x - 3f64.sqrt() / 2.0 * delta.y;
    let dl3 = -(dl1 + dl2);
    CableState { deviations: Vector3::new(dl1, dl2, dl3) }
}

/// Reel speeds `(w_I, w_II, w_III)` produced by motor speeds
/// `(omega_in_x, omega_in_y)` through the compound gear train.
///
/// Reel 1 is fixed-axis, reels 2 and 3 are differentials averaging two
/// bevel-gear inputs:
///
/// ```text
/// w_I   = -k * wx
/// w_II  = -(k/2) * (wx + wy)
/// w_III = -(k/2) * (wx - wy)
/// ```
///
/// Reel 1 is independent of `wy` by construction, which is what decouples
/// the two arm degrees of freedom.
pub fn reel_speeds(omega_in_x: f64, omega_in_y: f64, spec: &ArmSpec) -> (f64, f64, f64) {
    let k = spec.gear_ratio;
    (
        -k * omega_in_x,
        -0.5 * k * (omega_in_x + omega_in_y),
        -0.5 * k * (omega_in_x - omega_in_y),
    )
}

/// Configuration rates `(d(delta_x)/dt, d(delta_y)/dt)` produced by motor
/// speeds: `k * r_reel * wx` and `dy_sign * (sqrt(3)/3) * k * r_reel * wy`.
pub fn q_rates_from_motors(omega_in_x: f64, omega_in_y: f64, spec: &ArmSpec) -> Vector2<f64> {
    let kr = spec.gear_ratio * spec.reel_radius;
    Vector2::new(
        kr * omega_in_x,
        spec.dy_sign * 3f64.sqrt() / 3.0 * kr * omega_in_y,
    )
}

/// Exact inverse of [`q_rates_from_motors`].
pub fn motors_from_q_rates(q_rates: Vector2<f64>, spec: &ArmSpec) -> (f64, f64) {
    let kr = spec.gear_ratio * spec.reel_radius;
    (
        q_rates.x / kr,
        q_rates.y * 3.0 / (spec.dy_sign * 3f64.sqrt() * kr),
    )
}

/// Homogeneous transform from the arm base frame to the tip frame.
///
/// Rotation block `Rz(phi_bend) * Rx(gamma) * Rz(-phi_bend)`; translation
/// identical to [`tip_from_q`] at the equivalent `delta`. A straight arm
/// yields the identity rotation with translation `(0, 0, L)`.
pub fn se3_transform(gamma: f64, phi_bend: f64, length: f64, cable_offset: f64) -> Matrix4<f64> {
    let rz = Matrix3::new(
        phi_bend.cos(), -phi_bend.sin(), 0.0,
        phi_bend.sin(), phi_bend.cos(), 0.0,
        0.0, 0.0, 1.0,
    );
    let rx = Matrix3::new(
        1.0, 0.0, 0.0,
        0.0, gamma.cos(), -gamma.sin(),
        0.0, gamma.sin(), gamma.cos(),
    );
    let rotation = rz * rx * rz.transpose();
    let translation = tip_from_q(arc_to_q(gamma, phi_bend, cable_offset), length, cable_offset);
    let mut out = Matrix4::identity();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation);
    out.fixed_view_mut::<3, 1>(0, 3).copy_from(&translation);
    out
}

/// Clamps `delta` to the circular workspace `|delta| <= d*pi/2`.
///
/// Returns the clamped configuration and whether clamping occurred; the
/// controller may transiently request more than the workspace allows, so
/// this is a saturation, not an error.
pub fn clamp_to_workspace(delta: Vector2<f64>, cable_offset: f64) -> (Vector2<f64>, bool) {
    let radius = cable_offset * std::f64::consts::FRAC_PI_2;
    let norm = delta.norm();
    if norm <= radius {
        (delta, false)
    } else {
        (delta * (radius / norm), true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn spec() -> ArmSpec {
        ArmSpec::default().validated().unwrap()
    }

    #[test]
    fn arc_conversion_matches_hand_values() {
        let (gamma, phi) = q_to_arc(Vector2::new(0.02, 0.0), 0.04).unwrap();
        assert_abs_diff_eq!(gamma, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(phi, 0.0, epsilon = 1e-15);

        let (gamma, phi) = q_to_arc(Vector2::new(0.0, 0.04), 0.04).unwrap();
        assert_abs_diff_eq!(gamma, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(phi, FRAC_PI_2, epsilon = 1e-15);

        let (gamma, phi) = q_to_arc(Vector2::zeros(), 0.04).unwrap();
        assert_eq!((gamma, phi), (0.0, 0.0));
    }

    #[test]
    fn arc_conversion_rejects_beyond_workspace() {
        let err = q_to_arc(Vector2::new(0.07, 0.0), 0.04).unwrap_err();
        assert!(matches!(err, ArmError::WorkspaceExceeded { .. }));
    }

    #[test]
    fn tip_straight_arm_points_down_the_backbone() {
        let tip = tip_from_q(Vector2::zeros(), 0.3, 0.04);
        assert_abs_diff_eq!(tip, Vector3::new(0.0, 0.0, 0.3), epsilon = 1e-15);
    }

    #[test]
    fn tip_at_quarter_turn_matches_closed_form() {
        // gamma = pi/2 puts the tip at (2L/pi, 0, 2L/pi).
        let d = 0.04;
        let delta = Vector2::new(d * FRAC_PI_2, 0.0);
        let tip = tip_from_q(delta, 0.3, d);
        let expected = 2.0 * 0.3 / PI;
        assert_relative_eq!(tip.x, expected, max_relative = 1e-12);
        assert_abs_diff_eq!(tip.y, 0.0, epsilon = 1e-15);
        assert_relative_eq!(tip.z, expected, max_relative = 1e-12);
    }

    #[test]
    fn tip_series_branch_is_continuous_with_closed_form() {
        // Evaluate just above the series threshold with the closed form and
        // compare against the series expression used below it.
        let (length, d) = (0.3, 0.04);
        for frac in [0.5, 0.9, 0.99, 1.01, 2.0] {
            let gamma = SERIES_THRESHOLD * frac;
            let delta = Vector2::new(d * gamma / 2f64.sqrt(), d * gamma / 2f64.sqrt());
            let exact = {
                let g = delta.norm() / d;
                Vector3::new(
                    length * delta.x * (1.0 - g.cos()) / (d * g * g),
                    length * delta.y * (1.0 - g.cos()) / (d * g * g),
                    length * g.sin() / g,
                )
            };
            let tip = tip_from_q(delta, length, d);
            // The closed form evaluates (1 - cos g)/g^2 near g = 1e-4, where
            // the subtraction cancels to ~5e-9 and keeps only ~8 accurate
            // digits; the series branch is the more accurate side. Continuity
            // is therefore asserted at the closed form's own conditioning
            // limit, not tighter.
            assert_relative_eq!(tip.z, exact.z, max_relative = 1e-9);
            assert_relative_eq!(tip.x, exact.x, max_relative = 1e-7);
            assert_relative_eq!(tip.y, exact.y, max_relative = 1e-7);
        }
    }

    #[test]
    fn tip_chord_length_never_exceeds_backbone_length() {
        // |tip| = (2L/gamma) * sin(gamma/2) <= L.
        let (length, d) = (0.3, 0.04);
        for i in 0..=100 {
            let gamma = FRAC_PI_2 * f64::from(i) / 100.0;
            let delta = arc_to_q(gamma, 1.234, d);
            let chord = tip_from_q(delta, length, d).norm();
            assert!(chord <= length + 1e-12);
            if gamma > 1e-3 {
                let expected = 2.0 * length / gamma * (gamma / 2.0).sin();
                assert_relative_eq!(chord, expected, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn jacobian_at_zero_matches_series_limit() {
        let j = tip_jacobian(Vector2::zeros(), 0.3, 0.04);
        let l_2d = 0.3 / (2.0 * 0.04);
        assert_abs_diff_eq!(j[(0, 0)], l_2d, epsilon = 1e-12);
        assert_abs_diff_eq!(j[(1, 1)], l_2d, epsilon = 1e-12);
        for (r, c) in [(0, 1), (1, 0), (2, 0), (2, 1)] {
            assert_abs_diff_eq!(j[(r, c)], 0.0, epsilon = 1e-12);
        }
    }

    /// Central finite differences of `tip_from_q`, the independent oracle
    /// for the analytic Jacobian.
    fn jacobian_fd(delta: Vector2<f64>, length: f64, d: f64) -> Matrix3x2<f64> {
        let h = 1e-7;
        let mut out = Matrix3x2::zeros();
        for col in 0..2 {
            let mut dp = delta;
            let mut dm = delta;
            dp[col] += h;
            dm[col] -= h;
            let diff = (tip_from_q(dp, length, d) - tip_from_q(dm, length, d)) / (2.0 * h);
            out.set_column(col, &diff);
        }
        out
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (length, d) = (0.3, 0.04);
        let j = tip_jacobian(Vector2::new(0.02, 0.01), length, d);
        let fd = jacobian_fd(Vector2::new(0.02, 0.01), length, d);
        assert_relative_eq!(j, fd, max_relative = 1e-6);
    }

    #[test]
    fn jacobian_swap_symmetry() {
        // Swapping (dx, dy) swaps the first two rows and the two columns.
        let (length, d) = (0.3, 0.04);
        let j = tip_jacobian(Vector2::new(0.017, -0.031), length, d);
        let js = tip_jacobian(Vector2::new(-0.031, 0.017), length, d);
        assert_relative_eq!(j[(0, 0)], js[(1, 1)], max_relative = 1e-12);
        assert_relative_eq!(j[(1, 0)], js[(0, 1)], max_relative = 1e-12);
        assert_relative_eq!(j[(2, 0)], js[(2, 1)], max_relative = 1e-12);
    }

    #[test]
    fn cable_deviations_match_hand_values() {
        let c = cable_deviations(Vector2::new(0.02, 0.0));
        assert_abs_diff_eq!(
            c.deviations,
            Vector3::new(-0.02, 0.01, 0.01),
            epsilon = 1e-15
        );

        let c = cable_deviations(Vector2::new(0.0, 0.02));
        let s = 3f64.sqrt() / 2.0 * 0.02;
        assert_abs_diff_eq!(c.deviations, Vector3::new(0.0, -s, s), epsilon = 1e-15);
    }

    #[test]
    fn cable_deviations_sum_is_exactly_zero() {
        for (dx, dy) in [(0.0123, -0.0456), (1e-9, 2e-7), (-0.031, 0.017)] {
            let c = cable_deviations(Vector2::new(dx, dy));
            assert_eq!(c.deviations.sum(), 0.0);
        }
    }

    #[test]
    fn reel_speeds_match_drive_ratios() {
        let s = spec();
        assert_eq!(reel_speeds(1.0, 0.0, &s), (-1.0, -0.5, -0.5));
        assert_eq!(reel_speeds(0.0, 1.0, &s), (0.0, -0.5, 0.5));
        // Reel 1 never responds to the y motor.
        for wy in [-3.0, 0.5, 7.25] {
            assert_eq!(reel_speeds(2.0, wy, &s).0, -2.0);
        }
    }

    #[test]
    fn q_rates_match_drive_formulas() {
        let s = spec();
        let r = q_rates_from_motors(1.0, 0.0, &s);
        assert_abs_diff_eq!(r, Vector2::new(0.005, 0.0), epsilon = 1e-15);
        let r = q_rates_from_motors(0.0, 1.0, &s);
        assert_abs_diff_eq!(r.y.abs(), 3f64.sqrt() / 3.0 * 0.005, epsilon = 1e-15);
    }

    #[test]
    fn motor_rate_round_trip_is_identity() {
        let s = spec();
        for (wx, wy) in [(1.0, 0.0), (0.0, 1.0), (-2.5, 3.75), (0.125, -0.5)] {
            let rates = q_rates_from_motors(wx, wy, &s);
            let (bx, by) = motors_from_q_rates(rates, &s);
            assert_relative_eq!(bx, wx, max_relative = 1e-12, epsilon = 1e-12);
            assert_relative_eq!(by, wy, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn transform_straight_arm_is_pure_translation() {
        let t = se3_transform(0.0, 0.0, 0.3, 0.04);
        assert_abs_diff_eq!(
            t.fixed_view::<3, 3>(0, 0).into_owned(),
            Matrix3::identity(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            t.fixed_view::<3, 1>(0, 3).into_owned(),
            Vector3::new(0.0, 0.0, 0.3),
            epsilon = 1e-12
        );
    }

    #[test]
    fn transform_zero_bend_direction_is_x_rotation() {
        let gamma = 0.7;
        let t = se3_transform(gamma, 0.0, 0.3, 0.04);
        let rx = Matrix3::new(
            1.0, 0.0, 0.0,
            0.0, gamma.cos(), -gamma.sin(),
            0.0, gamma.sin(), gamma.cos(),
        );
        assert_abs_diff_eq!(t.fixed_view::<3, 3>(0, 0).into_owned(), rx, epsilon = 1e-12);
    }

    #[test]
    fn transform_translation_agrees_with_tip() {
        for (gamma, phi) in [(0.3, 0.0), (1.2, 2.0), (FRAC_PI_2, 4.5)] {
            let t = se3_transform(gamma, phi, 0.3, 0.04);
            let tip = tip_from_q(arc_to_q(gamma, phi, 0.04), 0.3, 0.04);
            assert_abs_diff_eq!(t.fixed_view::<3, 1>(0, 3).into_owned(), tip, epsilon = 1e-12);
        }
    }

    #[test]
    fn transform_rotation_stays_in_so3() {
        for (gamma, phi) in [(0.2, 1.0), (1.0, 3.0), (1.5, 5.9)] {
            let t = se3_transform(gamma, phi, 0.3, 0.04);
            let r = t.fixed_view::<3, 3>(0, 0).into_owned();
            assert_abs_diff_eq!(r.transpose() * r, Matrix3::identity(), epsilon = 1e-12);
            assert_relative_eq!(r.determinant(), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn workspace_clamp_preserves_direction() {
        let (clamped, saturated) = clamp_to_workspace(Vector2::new(0.1, 0.1), 0.04);
        assert!(saturated);
        assert_relative_eq!(clamped.norm(), 0.04 * FRAC_PI_2, max_relative = 1e-12);
        assert_relative_eq!(clamped.y / clamped.x, 1.0, max_relative = 1e-12);

        let inside = Vector2::new(0.01, -0.02);
        assert_eq!(clamp_to_workspace(inside, 0.04), (inside, false));
    }

    #[test]
    fn spec_validation_rejects_mismatched_gearing() {
        let bad = ArmSpec { gear_ratio: 2.0, ..ArmSpec::default() };
        assert!(matches!(bad.validated(), Err(ArmError::InvalidSpec(_))));
    }
}
