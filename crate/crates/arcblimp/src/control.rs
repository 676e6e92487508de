//! Dual-loop attitude control through the moving-mass arm.
//!
//! The outer loop turns attitude errors into an arm-deflection reference:
//! pitch error commands `delta_x`, roll error commands `delta_y`, and yaw
//! error (which the arm cannot act on directly) is converted into a bounded
//! roll setpoint, exploiting the roll-to-yaw coupling the deflected mass
//! creates (see [`ControlGains::outer_yaw`]). The inner loop is a PID on
//! the deflection itself, mapped through the cable drive's inverse rate law
//! into motor speed commands and saturated at the motor limit.
//!
//! Alongside the laws, the module carries their pitch-axis stability
//! analysis: a quadratic energy function over (pitch error, pitch error
//! rate, deflection), a decay bound on its derivative, the gain inequality
//! that eliminates the inertia-variation cross terms, and the resulting
//! ultimate bound on the pitch error under bounded disturbance. Everything
//! is evaluated numerically so a gain set can be checked before flight.
//!
//! Two comparison actuators close out the module: a three-propeller thrust
//! triple and a tail elevator, both driven by conventional PIDs. They exist
//! to benchmark the moving-mass mechanism in the analysis studies, not to
//! model those vehicles in detail.

use crate::arm::{clamp_to_workspace, motors_from_q_rates, ArmSpec};
use crate::dynamics::{wrap_angle, BodyState, VehicleParams};
use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest roll setpoint the yaw channel may request, rad. Roll is a means
/// here, not a goal: beyond about 20 degrees the small-angle decoupling the
/// outer loop relies on degrades, and the vehicle would trade more lift for
/// yaw authority than the slow lateral dynamics can use.
pub const ROLL_SETPOINT_LIMIT: f64 = 20.0 * std::f64::consts::PI / 180.0;


/// Default elevator effectiveness: pitch-moment coefficient per radian of
/// deflection, multiplied by scale*V^2 like every other aero moment.
/// Negative deflection raises the nose. The magnitude is a qualitative
/// calibration chosen so a full-down -45 degree deflection at the 0.8 m/s
/// study speed yields a steady pitch change around 1.5 degrees; it is
/// configuration, not an identified parameter.
pub const DEFAULT_ELEVATOR_EFFECTIVENESS: f64 = -0.02;

/// Errors from gain validation.
#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    /// One or more gain invariants are violated; all are listed.
    #[error("invalid control gains: {0}")]
    InvalidGains(String),
}

/// One axis of PID gains. Units depend on the loop: the outer attitude loop
/// produces meters of deflection per radian of error, the inner loop
/// produces deflection rate per meter of error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    /// Proportional gain.
    pub kp: f64,
    /// Integral gain.
    pub ki: f64,
    /// Derivative gain.
    pub kd: f64,
}

impl PidGains {
    /// Convenience constructor.
    pub fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self { kp, ki, kd }
    }
}

/// Full gain set for the dual-loop controller plus the parameters of its
/// stability analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlGains {
    /// Outer roll loop: roll error (rad) to `delta_y` (m).
    pub outer_roll: PidGains,
    /// Outer pitch loop: pitch error (rad) to `delta_x` (m).
    pub outer_pitch: PidGains,
    /// Outer yaw loop: yaw error (rad) to roll setpoint (rad).
    ///
    /// The yaw channel works through the roll channel, and the plant's
    /// roll-to-yaw coupling is dominated by gravity acting on the deflected
    /// mass: with the mass trimmed forward (nose held below its natural
    /// pitch), rolling swings the forward mass sideways and gravity drags
    /// the nose toward the low side, a direct-sign coupling that does not
    /// need airspeed. With the mass trimmed backward (nose held high) the
    /// same lever works in reverse, so configurations for mass-aft flight
    /// should negate these gains. The defaults are positive, for the
    /// mass-forward regime in which yaw regulation has authority.
    pub outer_yaw: PidGains,
    /// Inner loop on `delta_x`: deflection error (m) to rate (m/s).
    pub inner_x: PidGains,
    /// Inner loop on `delta_y`.
    pub inner_y: PidGains,
    /// Weight of the control-energy term in the stability analysis.
    pub lambda: f64,
    /// Young's-inequality split between error decay and disturbance
    /// amplification in the analysis.
    pub epsilon: f64,
    /// Assumed bound on the pitch disturbance torque, N m.
    pub rho_theta: f64,
    /// Pitch damping coefficient used by the analysis, N m s/rad. Defaults
    /// to the magnitude of the identified pitch rotational damping.
    pub d_theta: f64,
}

impl Default for ControlGains {
    /// Working defaults for the stock vehicle.
    ///
    /// The outer pitch/roll gains are sized to the actuator, not to the
    /// plant alone: the workspace disc is 63 mm across and the cable drive
    /// slews at 30 mm/s, so the proportional map is about 2 mm of
    /// deflection per degree of error (0.12 m/rad). That keeps commands
    /// inside the disc for errors up to the 30 degree range and keeps the
    /// commanded rate within what the motors can track, avoiding the
    /// relay-style limit cycle a hotter gain produces through the slew
    /// limit. Holding a 10 degree pitch offset takes about 36 mm of
    /// deflection (gravitational stiffness 0.54 N m/rad against
    /// 2.6 N m per meter of deflection), more than the proportional term
    /// supplies at small error, so the integral carries the trim; its gain
    /// sets the trim-capture time constant near ten seconds.
    ///
    /// The yaw gains are hotter than the roll/pitch ones because the yaw
    /// channel only shapes a roll setpoint that is clamped to a narrow
    /// band: large proportional and rate terms saturate the request
    /// quickly against the sideslip weathervane drift, which is what the
    /// indirect mechanism needs, and the clamp keeps the authority
    /// bounded regardless. All defaults pass `gain_condition` with the
    /// stock parameters, which a regression test enforces.
    fn default() -> Self {
        Self {
            outer_roll: PidGains::new(0.12, 0.04, 0.06),
            outer_pitch: PidGains::new(0.12, 0.04, 0.06),
            outer_yaw: PidGains::new(3.0, 0.1, 3.0),
            inner_x: PidGains::new(5.0, 0.0, 0.0),
            inner_y: PidGains::new(5.0, 0.0, 0.0),
            lambda: 0.1,
            epsilon: 0.1,
            rho_theta: 0.01,
            d_theta: 0.052,
        }
    }
}

impl ControlGains {
    /// Validates the invariants the stability analysis rests on, collecting
    /// every violation.
    pub fn validated(self) -> Result<Self, ControlError> {
        let mut violations = Vec::new();
        if !(self.outer_pitch.kp > 0.0) {
            violations.push("outer pitch kp must be > 0".to_string());
        }
        if !(self.outer_pitch.kd > 0.0) {
            violations.push("outer pitch kd must be > 0".to_string());
        }
        if !(self.lambda > 0.0) {
            violations.push("lambda must be > 0".to_string());
        }
        if !(self.epsilon > 0.0) {
            violations.push("epsilon must be > 0".to_string());
        }
        if !(self.rho_theta >= 0.0) {
            violations.push("rho_theta must be >= 0".to_string());
        }
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(ControlError::InvalidGains(violations.join("; ")))
        }
    }
}

/// Stateful dual-loop attitude controller. One instance per trajectory;
/// instances are independent, so scenarios can run concurrently.
#[derive(Debug, Clone)]
pub struct AttitudeController {
    /// Gain set, immutable over a run.
    pub gains: ControlGains,
    /// Constant thrust feedforward, N. The vehicle flies at fixed throttle;
    /// there is no speed loop.
    pub cruise_thrust: f64,
    outer_integral: Vector3<f64>,
    inner_integral: Vector2<f64>,
    last_inner_error: Option<Vector2<f64>>,
}

impl AttitudeController {
    /// Builds a controller after validating the gains.
    pub fn new(gains: ControlGains, cruise_thrust: f64) -> Result<Self, ControlError> {
        Ok(Self {
            gains: gains.validated()?,
            cruise_thrust,
            outer_integral: Vector3::zeros(),
            inner_integral: Vector2::zeros(),
            last_inner_error: None,
        })
    }

    /// Clears all integral and derivative memory.
    pub fn reset(&mut self) {
        self.outer_integral = Vector3::zeros();
        self.inner_integral = Vector2::zeros();
        self.last_inner_error = None;
    }

    /// Outer attitude law: attitude error to arm-deflection reference plus
    /// thrust feedforward.
    ///
    /// Errors are reference minus measurement. The pitch channel outputs
    /// `delta_x* = -(kp e + ki int(e) + kd de)`: a nose-high error pulls the
    /// mass backward, whose gravity moment raises the nose. The roll
    /// channel is symmetric with the opposite output sign because a
    /// positive `delta_y` rolls positive. The yaw channel has no direct
    /// actuator; its PID output becomes a bounded roll setpoint added to
    /// the roll reference. The commanded pair is clamped to the arm
    /// workspace disc, and every integrator holds while its output is
    /// saturated so the loop recovers from saturation without windup.
    ///
    /// `rates` are attitude rates (not body rates); with constant
    /// references the error rate is their negation.
    pub fn outer_attitude_law(
        &mut self,
        attitude: &Vector3<f64>,
        attitude_ref: &Vector3<f64>,
        rates: &Vector3<f64>,
        spec: &ArmSpec,
        dt: f64,
    ) -> (Vector2<f64>, f64) {
        let g = self.gains;

        // Yaw first: its output feeds the roll channel. The plant's
        // roll-to-yaw coupling changes sign with the longitudinal mass trim
        // (see the yaw-channel notes on `ControlGains::outer_yaw`), so the
        // yaw gains carry the sign; the defaults are for the mass-forward
        // regime where rolling right swings the forward-hung mass right and
        // gravity pulls the nose right.
        let yaw_error = wrap_angle(attitude_ref.z - attitude.z);
        let yaw_raw = g.outer_yaw.kp * yaw_error
            + g.outer_yaw.ki * self.outer_integral.z
            + g.outer_yaw.kd * (-rates.z);
        let roll_setpoint = yaw_raw.clamp(-ROLL_SETPOINT_LIMIT, ROLL_SETPOINT_LIMIT);
        let yaw_saturated = yaw_raw.abs() > ROLL_SETPOINT_LIMIT;

        let roll_error = (attitude_ref.x + roll_setpoint) - attitude.x;
        let pitch_error = attitude_ref.y - attitude.y;

        let dx_raw = -(g.outer_pitch.kp * pitch_error
            + g.outer_pitch.ki * self.outer_integral.y
            + g.outer_pitch.kd * (-rates.y));
        let dy_raw = g.outer_roll.kp * roll_error
            + g.outer_roll.ki * self.outer_integral.x
            + g.outer_roll.kd * (-rates.x);

        let (q_ref, disc_saturated) =
            clamp_to_workspace(Vector2::new(dx_raw, dy_raw), spec.cable_offset);

        // Conditional integration: the disc clamp couples both channels, so
        // it freezes both attitude integrators together.
        if !disc_saturated {
            self.outer_integral.x += roll_error * dt;
            self.outer_integral.y += pitch_error * dt;
        }
        if !yaw_saturated {
            self.outer_integral.z += yaw_error * dt;
        }

        (q_ref, self.cruise_thrust)
    }

    /// Inner arm law: deflection error to saturated motor speed commands
    /// `(omega_in_x, omega_in_y)`.
    ///
    /// A PID on the q-parametrization produces a deflection-rate demand,
    /// which the inverse cable-drive rate law converts to motor speeds; each
    /// motor saturates independently and holds its integrator while
    /// saturated. The drive is diagonal in (x, y), so a pure `delta_x`
    /// error never moves the y motor.
    pub fn inner_arm_law(
        &mut self,
        q: Vector2<f64>,
        q_ref: Vector2<f64>,
        spec: &ArmSpec,
        dt: f64,
    ) -> (f64, f64) {
        let g = self.gains;
        let error = q_ref - q;
        let error_rate = match self.last_inner_error {
            Some(last) if dt > 0.0 => (error - last) / dt,
            _ => Vector2::zeros(),
        };
        self.last_inner_error = Some(error);

        let rate_cmd = Vector2::new(
            g.inner_x.kp * error.x + g.inner_x.ki * self.inner_integral.x + g.inner_x.kd * error_rate.x,
            g.inner_y.kp * error.y + g.inner_y.ki * self.inner_integral.y + g.inner_y.kd * error_rate.y,
        );
        let (raw_x, raw_y) = motors_from_q_rates(rate_cmd, spec);
        let limit = spec.motor_speed_max;
        let omega_x = raw_x.clamp(-limit, limit);
        let omega_y = raw_y.clamp(-limit, limit);

        if raw_x.abs() <= limit {
            self.inner_integral.x += error.x * dt;
        }
        if raw_y.abs() <= limit {
            self.inner_integral.y += error.y * dt;
        }

        (omega_x, omega_y)
    }
}

/// Numerical report of the pitch-axis gain conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainConditionReport {
    /// Smallest admissible energy weight: the inertia-variation cross terms
    /// vanish only when `lambda` exceeds this.
    pub lambda_floor: f64,
    /// `lambda - lambda_floor`; positive means the cross-term condition
    /// holds.
    pub lambda_margin: f64,
    /// Total pitch damping (passive + control-derived + energy-weighted)
    /// minus half the disturbance bound; positive means the energy
    /// derivative is negative definite.
    pub damping_margin: f64,
    /// Ultimate bound on the pitch error under the assumed disturbance,
    /// rad. Zero in the disturbance-free case, where the error converges
    /// asymptotically instead.
    pub uub_radius: f64,
}

impl GainConditionReport {
    /// True when both margins are positive.
    pub fn satisfied(&self) -> bool {
        self.lambda_margin > 0.0 && self.damping_margin > 0.0
    }
}

/// Worst-case `|delta_x * d(delta_x)/dt|` reachable inside the workspace at
/// motor saturation: the envelope the cross-term gain condition must cover.
pub fn workspace_rate_envelope(spec: &ArmSpec) -> f64 {
    spec.workspace_radius() * spec.max_rate_x()
}

/// Evaluates the pitch-axis gain conditions for a gain set on a vehicle.
///
/// `deflection_rate_envelope` is the assumed bound on
/// `|delta_x * d(delta_x)/dt|`; [`workspace_rate_envelope`] supplies the
/// mechanical worst case. Negative margins are reported, never thrown, so
/// a tuning tool can show how far a bad gain set is from admissible.
pub fn gain_condition(
    gains: &ControlGains,
    params: &VehicleParams,
    deflection_rate_envelope: f64,
) -> GainConditionReport {
    let ma = params.moving_mass;
    let length = params.arm.length;
    let d = params.arm.cable_offset;
    let kp = gains.outer_pitch.kp;
    let kd = gains.outer_pitch.kd;

    let lambda_floor = ma * (length / d).powi(2) * deflection_rate_envelope / kp;
    let lambda_margin = gains.lambda - lambda_floor;
    let damping_margin = gains.d_theta
        + ma * params.gravity * length * kd / (2.0 * d)
        + gains.lambda * kd / 2.0
        - gains.rho_theta / 2.0;
    let uub_radius = gains.rho_theta.abs() / (gains.epsilon * gains.lambda * kp).sqrt();

    GainConditionReport {
        lambda_floor,
        lambda_margin,
        damping_margin,
        uub_radius,
    }
}

/// One sample of the pitch-axis energy function and its decay bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSample {
    /// Energy value: half the effective pitch inertia times the squared
    /// error rate, plus half kp times the squared error, plus a quarter
    /// lambda times the squared deflection. Nonnegative by construction.
    pub value: f64,
    /// Upper bound on the energy derivative under the assumed disturbance:
    /// `-a de^2 - b e^2 + rho^2/(2 epsilon)`.
    pub decay_bound: f64,
}

/// Evaluates the pitch-axis energy function at a state.
///
/// The analysis holds `delta_y` fixed and treats `delta_x` as the input.
/// The effective pitch inertia uses the small-deflection closure
/// `J_yy + ma (L^2 dx^2 / (4 d^2) + (h + L)^2)`, matching the model the
/// decay bound was derived for rather than the exact kinematics. The pitch
/// rate comes from the gimbal-free row of the attitude-rate map,
/// `cos(roll) w_y - sin(roll) w_z`.
pub fn lyapunov_diagnostics(
    state: &BodyState,
    pitch_ref: f64,
    gains: &ControlGains,
    params: &VehicleParams,
) -> LyapunovSample {
    let error = pitch_ref - state.attitude.y;
    let pitch_rate = state.attitude.x.cos() * state.omega.y - state.attitude.x.sin() * state.omega.z;
    let error_rate = -pitch_rate;
    let dx = state.q_arm.x;

    let length = params.arm.length;
    let d = params.arm.cable_offset;
    let ma = params.moving_mass;
    let hl = params.mount_depth() + length;
    let j_simplified =
        params.inertia[(1, 1)] + ma * (length * length * dx * dx / (4.0 * d * d) + hl * hl);

    let kp = gains.outer_pitch.kp;
    let kd = gains.outer_pitch.kd;
    let a = gains.d_theta + ma * params.gravity * length * kd / (2.0 * d) + gains.lambda * kd / 2.0
        - gains.epsilon / 2.0;
    let b = gains.lambda * kp / 2.0;

    LyapunovSample {
        value: 0.5 * j_simplified * error_rate * error_rate
            + 0.5 * kp * error * error
            + 0.25 * gains.lambda * dx * dx,
        decay_bound: -a * error_rate * error_rate - b * error * error
            + gains.rho_theta * gains.rho_theta / (2.0 * gains.epsilon),
    }
}

/// Thrust-triple comparison vehicle: two horizontal propellers offset
/// laterally plus one vertical propeller offset longitudinally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OmniConfig {
    /// Left propeller thrust limit, N (thrust is one-directional).
    pub left_max: f64,
    /// Right propeller thrust limit, N.
    pub right_max: f64,
    /// Vertical propeller thrust limit, N (drive is reversible).
    pub vertical_max: f64,
    /// Lateral offset of each horizontal propeller from the centerline, m.
    pub lateral_arm: f64,
    /// Longitudinal offset of the vertical propeller ahead of CB, m.
    pub vertical_arm: f64,
}

impl Default for OmniConfig {
    fn default() -> Self {
        Self {
            left_max: 0.2,
            right_max: 0.2,
            vertical_max: 0.2,
            lateral_arm: 0.15,
            vertical_arm: 0.2,
        }
    }
}

/// Tail elevator comparison actuator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElevatorConfig {
    /// Deflection saturation, rad; the surface travels symmetrically.
    pub deflection_max: f64,
    /// Pitch-moment coefficient per radian of deflection; negative raises
    /// the nose. See [`DEFAULT_ELEVATOR_EFFECTIVENESS`].
    pub effectiveness: f64,
}

impl Default for ElevatorConfig {
    fn default() -> Self {
        Self {
            deflection_max: 45f64.to_radians(),
            effectiveness: DEFAULT_ELEVATOR_EFFECTIVENESS,
        }
    }
}

/// Which comparison actuator a baseline vehicle carries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaselineActuator {
    /// Three-propeller thrust vehicle.
    OmniThrust(OmniConfig),
    /// Conventional tail elevator.
    Elevator(ElevatorConfig),
}

/// Output of one baseline control step: the body-frame wrench to apply and
/// the actuator values behind it (for logging and the power model).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineCommand {
    /// Body-frame force, N.
    pub force: Vector3<f64>,
    /// Body-frame torque, N m.
    pub torque: Vector3<f64>,
    /// (left, right, vertical) propeller thrusts, N; zero for the elevator.
    pub thrusts: Vector3<f64>,
    /// Elevator deflection, rad; zero for the thrust triple.
    pub deflection: f64,
}

/// Stateful PID wrapper around a comparison actuator.
#[derive(Debug, Clone)]
pub struct BaselineController {
    /// The actuator being driven.
    pub actuator: BaselineActuator,
    /// Pitch-error PID. For the thrust triple the output is a pitch moment
    /// demand (N m); for the elevator it is negated into deflection (rad).
    pub pitch: PidGains,
    /// Yaw-error PID producing a yaw moment demand, N m (thrust triple
    /// only; the elevator has no yaw authority).
    pub yaw: PidGains,
    pitch_integral: f64,
    yaw_integral: f64,
}

impl BaselineController {
    /// Builds a controller with the given actuator and PID gains.
    pub fn new(actuator: BaselineActuator, pitch: PidGains, yaw: PidGains) -> Self {
        Self {
            actuator,
            pitch,
            yaw,
            pitch_integral: 0.0,
            yaw_integral: 0.0,
        }
    }

    /// Clears integral memory.
    pub fn reset(&mut self) {
        self.pitch_integral = 0.0;
        self.yaw_integral = 0.0;
    }

    /// One control step: attitude errors to an actuator wrench.
    ///
    /// The thrust triple splits `cruise_thrust` across the horizontal pair,
    /// steers yaw differentially, and steers pitch with the vertical
    /// propeller; each thrust clamps to its limit with integrator hold. The
    /// elevator converts the pitch PID into a deflection and produces a
    /// pure pitch moment scaling with dynamic pressure, so it is powerless
    /// at rest.
    pub fn command(
        &mut self,
        attitude: &Vector3<f64>,
        attitude_ref: &Vector3<f64>,
        rates: &Vector3<f64>,
        airspeed: f64,
        aero_scale: f64,
        cruise_thrust: f64,
        dt: f64,
    ) -> BaselineCommand {
        let pitch_error = attitude_ref.y - attitude.y;
        let pitch_pid =
            self.pitch.kp * pitch_error + self.pitch.ki * self.pitch_integral + self.pitch.kd * (-rates.y);

        match self.actuator {
            BaselineActuator::OmniThrust(cfg) => {
                let yaw_error = wrap_angle(attitude_ref.z - attitude.z);
                let yaw_pid =
                    self.yaw.kp * yaw_error + self.yaw.ki * self.yaw_integral + self.yaw.kd * (-rates.z);

                // Moment demands to thrusts through the lever arms.
                let differential = yaw_pid / cfg.lateral_arm;
                let left_raw = 0.5 * cruise_thrust + 0.5 * differential;
                let right_raw = 0.5 * cruise_thrust - 0.5 * differential;
                let vertical_raw = pitch_pid / cfg.vertical_arm;

                let left = left_raw.clamp(0.0, cfg.left_max);
                let right = right_raw.clamp(0.0, cfg.right_max);
                let vertical = vertical_raw.clamp(-cfg.vertical_max, cfg.vertical_max);

                if left == left_raw && right == right_raw {
                    self.yaw_integral += yaw_error * dt;
                }
                if vertical == vertical_raw {
                    self.pitch_integral += pitch_error * dt;
                }

                BaselineCommand {
                    force: Vector3::new(left + right, 0.0, -vertical),
                    torque: Vector3::new(
                        0.0,
                        cfg.vertical_arm * vertical,
                        cfg.lateral_arm * (left - right),
                    ),
                    thrusts: Vector3::new(left, right, vertical),
                    deflection: 0.0,
                }
            }
            BaselineActuator::Elevator(cfg) => {
                let raw = -pitch_pid;
                let deflection = raw.clamp(-cfg.deflection_max, cfg.deflection_max);
                if deflection == raw {
                    self.pitch_integral += pitch_error * dt;
                }
                BaselineCommand {
                    force: Vector3::zeros(),
                    torque: Vector3::new(
                        0.0,
                        elevator_moment(deflection, airspeed, aero_scale, cfg.effectiveness),
                        0.0,
                    ),
                    thrusts: Vector3::zeros(),
                    deflection,
                }
            }
        }
    }
}

/// Pitch moment of an elevator deflection at a given airspeed:
/// `scale * V^2 * effectiveness * deflection`. Quadratic in speed, so the
/// surface is useless at rest, which is the mechanism the moving-mass
/// comparison hinges on.
pub fn elevator_moment(deflection: f64, airspeed: f64, aero_scale: f64, effectiveness: f64) -> f64 {
    aero_scale * airspeed * airspeed * effectiveness * deflection
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{
        derivative, euler_rate_matrix, rotation_from_euler, step, ActuationCommand, EnvSample,
        StillAir,
    };
    use crate::NEWTON_PER_GRAM_FORCE;
    use crate::arm::q_rates_from_motors;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn controller() -> AttitudeController {
        AttitudeController::new(ControlGains::default(), 8.0 * NEWTON_PER_GRAM_FORCE).unwrap()
    }

    #[test]
    fn zero_error_commands_zero_deflection_and_cruise_thrust() {
        let mut ctl = controller();
        let spec = ArmSpec::default();
        let (q_ref, thrust) = ctl.outer_attitude_law(
            &Vector3::zeros(),
            &Vector3::zeros(),
            &Vector3::zeros(),
            &spec,
            1e-3,
        );
        assert_eq!(q_ref, Vector2::zeros());
        assert_eq!(thrust, 8.0 * NEWTON_PER_GRAM_FORCE);
    }

    #[test]
    fn positive_pitch_error_pulls_mass_backward() {
        let mut ctl = controller();
        let spec = ArmSpec::default();
        let reference = Vector3::new(0.0, 0.1, 0.0);
        let (q_ref, _) =
            ctl.outer_attitude_law(&Vector3::zeros(), &reference, &Vector3::zeros(), &spec, 1e-3);
        assert!(q_ref.x < 0.0, "expected negative delta_x, got {}", q_ref.x);
    }

    #[test]
    fn saturated_output_clamps_to_workspace_and_holds_integral() {
        let mut ctl = controller();
        let spec = ArmSpec::default();
        let reference = Vector3::new(0.0, 1.0, 0.0);
        let (q_first, _) =
            ctl.outer_attitude_law(&Vector3::zeros(), &reference, &Vector3::zeros(), &spec, 1e-3);
        assert_abs_diff_eq!(q_first.norm(), spec.workspace_radius(), epsilon = 1e-12);
        // A second saturated call must produce the identical command: the
        // pitch integrator held, so nothing in the law changed.
        let (q_second, _) =
            ctl.outer_attitude_law(&Vector3::zeros(), &reference, &Vector3::zeros(), &spec, 1e-3);
        assert_eq!(q_first, q_second);
    }

    #[test]
    fn yaw_error_requests_bounded_roll() {
        let mut ctl = controller();
        let spec = ArmSpec::default();
        // Large positive yaw error: the roll setpoint must clamp at the
        // limit, with the default (mass-forward regime) direct sign: roll
        // toward the turn so gravity drags the nose along.
        let reference = Vector3::new(0.0, 0.0, 2.0);
        let (q_ref, _) =
            ctl.outer_attitude_law(&Vector3::zeros(), &reference, &Vector3::zeros(), &spec, 1e-3);
        // The roll channel sees roll_error = roll_setpoint, and outputs
        // +kp * error on delta_y; the setpoint is positive, so delta_y must
        // be positive, and sized by the clamped setpoint.
        let expected = ControlGains::default().outer_roll.kp * ROLL_SETPOINT_LIMIT;
        assert_abs_diff_eq!(q_ref.y, expected.min(spec.workspace_radius()), epsilon = 1e-9);
        assert!(q_ref.y > 0.0);
    }

    #[test]
    fn inner_law_is_quiet_at_the_reference() {
        let mut ctl = controller();
        let spec = ArmSpec::default();
        let q = Vector2::new(0.01, -0.02);
        let (wx, wy) = ctl.inner_arm_law(q, q, &spec, 1e-3);
        assert_eq!((wx, wy), (0.0, 0.0));
    }

    #[test]
    fn inner_law_keeps_axes_decoupled() {
        let mut ctl = controller();
        let spec = ArmSpec::default();
        let (_, wy) = ctl.inner_arm_law(Vector2::zeros(), Vector2::new(0.03, 0.0), &spec, 1e-3);
        assert_eq!(wy, 0.0);
    }

    /// Closed inner loop alone: a saturated step must approach the
    /// reference monotonically and stop there, since the proportional rate
    /// law cannot cross it.
    #[test]
    fn inner_step_under_saturation_is_monotone_without_overshoot() {
        let mut ctl = controller();
        let spec = ArmSpec::default();
        let reference = Vector2::new(0.05, 0.0);
        let dt = 1e-3;
        let mut q = Vector2::zeros();
        let mut previous = 0.0;
        let mut peak: f64 = 0.0;
        for _ in 0..4000 {
            let speeds = ctl.inner_arm_law(q, reference, &spec, dt);
            let rates = q_rates_from_motors(speeds.0, speeds.1, &spec);
            q += rates * dt;
            assert!(q.x >= previous - 1e-12, "deflection reversed before settling");
            previous = q.x;
            peak = peak.max(q.x);
        }
        assert!(peak <= reference.x * 1.10, "overshoot beyond 10%: {peak}");
        assert_abs_diff_eq!(q.x, reference.x, epsilon = 1e-4);
    }

    /// Independent hand evaluation of the cross-term floor: with the stock
    /// moving mass, L = 0.3, d = 0.04, kp = 1 and an envelope of
    /// 3.14e-4 m^2/s, the floor is 0.09221 * 56.25 * 3.14e-4.
    #[test]
    fn gain_condition_matches_hand_computed_floor() {
        let mut gains = ControlGains::default();
        gains.outer_pitch.kp = 1.0;
        let params = VehicleParams::default();
        let report = gain_condition(&gains, &params, 3.14e-4);
        assert_abs_diff_eq!(report.lambda_floor, 1.628659125e-3, epsilon = 1e-12);
    }

    #[test]
    fn doubling_kp_halves_the_floor() {
        let params = VehicleParams::default();
        let mut gains = ControlGains::default();
        let once = gain_condition(&gains, &params, 1e-3).lambda_floor;
        gains.outer_pitch.kp *= 2.0;
        let twice = gain_condition(&gains, &params, 1e-3).lambda_floor;
        assert_abs_diff_eq!(twice, 0.5 * once, epsilon = 1e-15);
    }

    #[test]
    fn zero_disturbance_gives_zero_ultimate_bound() {
        let mut gains = ControlGains::default();
        gains.rho_theta = 0.0;
        let report = gain_condition(&gains, &VehicleParams::default(), 1e-3);
        assert_eq!(report.uub_radius, 0.0);
    }

    /// The default gain set must be admissible on the stock vehicle with
    /// the mechanical worst-case envelope; the ultimate bound evaluates to
    /// rho / sqrt(epsilon lambda kp) = 0.01 / sqrt(1.2e-3) = sqrt(3)/6 rad.
    #[test]
    fn default_gains_pass_conditions_with_stock_vehicle() {
        let gains = ControlGains::default();
        let params = VehicleParams::default();
        let envelope = workspace_rate_envelope(&params.arm);
        let report = gain_condition(&gains, &params, envelope);
        assert!(report.satisfied(), "default gains inadmissible: {report:?}");
        assert_abs_diff_eq!(report.uub_radius, 3f64.sqrt() / 6.0, epsilon = 1e-12);
    }

    /// Hand-evaluated energy sample: roll zero, pitch error 0.1 rad, pitch
    /// rate -0.2 rad/s (error rate +0.2), deflection 0.02 m. The simplified
    /// inertia is 0.020 + 0.09221 (0.005625 + 0.36).
    #[test]
    fn lyapunov_value_matches_hand_computation() {
        let params = VehicleParams::default();
        let gains = ControlGains::default();
        let mut state = BodyState::at_rest();
        state.attitude.y = -0.1;
        state.omega.y = -0.2;
        state.q_arm.x = 0.02;
        let sample = lyapunov_diagnostics(&state, 0.0, &gains, &params);
        let j = 0.020 + 0.09221 * (0.005625 + 0.36);
        let expected = 0.5 * j * 0.04 + 0.5 * 0.12 * 0.01 + 0.25 * 0.1 * 0.0004;
        assert_abs_diff_eq!(sample.value, expected, epsilon = 1e-15);
        assert!(sample.value > 0.0);
    }

    #[test]
    fn lyapunov_vanishes_at_the_origin() {
        let sample = lyapunov_diagnostics(
            &BodyState::at_rest(),
            0.0,
            &ControlGains::default(),
            &VehicleParams::default(),
        );
        assert_eq!(sample.value, 0.0);
    }

    fn attitude_rates(state: &BodyState) -> Vector3<f64> {
        euler_rate_matrix(&state.attitude).unwrap() * state.omega
    }

    /// Pitch-axis gain set matching the stability analysis: the pitch loop
    /// active, `delta_y` held fixed (roll and yaw loops zeroed). The
    /// identified lateral moment biases make the vehicle turn slowly
    /// whatever the arm does, and the turn is not a pitch disturbance the
    /// analysis models, so pitch-axis tests isolate the axis exactly the
    /// way the analysis does.
    fn pitch_axis_gains() -> ControlGains {
        let mut gains = ControlGains::default();
        gains.outer_roll = PidGains::new(0.0, 0.0, 0.0);
        gains.outer_yaw = PidGains::new(0.0, 0.0, 0.0);
        gains
    }

    /// Neutrally ballasted vehicle at zero throttle: the float condition
    /// the pitch analysis is written for. With no airspeed there are no
    /// aerodynamic moments beyond rotational damping, and pitch is a pure
    /// pendulum driven by the moving mass.
    fn float_params() -> VehicleParams {
        let mut params = VehicleParams::default();
        params.buoyancy = params.total_mass() * params.gravity;
        params
    }

    /// Full closed-loop pitch step while floating: both loops at the
    /// integrator rate, still air, 10 degree reference. The error must fall
    /// below half a degree and stay there, and the energy function must be
    /// nonincreasing per sample once the transient has passed.
    #[test]
    fn pitch_step_settles_within_half_degree_and_energy_decays() {
        let params = float_params();
        let mut gains = pitch_axis_gains();
        gains.rho_theta = 0.0;
        let mut ctl = AttitudeController::new(gains, 0.0).unwrap();
        let reference = Vector3::new(0.0, 10f64.to_radians(), 0.0);
        let dt = 1e-3;
        let steps = 30_000;

        let mut state = BodyState::at_rest();
        let mut energies = Vec::with_capacity(steps);
        let mut tail_error: f64 = 0.0;
        for index in 0..steps {
            let rates = attitude_rates(&state);
            let (q_ref, thrust_cmd) =
                ctl.outer_attitude_law(&state.attitude, &reference, &rates, &params.arm, dt);
            let speeds = ctl.inner_arm_law(state.q_arm, q_ref, &params.arm, dt);
            let arm_rates = q_rates_from_motors(speeds.0, speeds.1, &params.arm);
            let cmd = ActuationCommand {
                thrust: thrust_cmd,
                arm_rates,
            };
            let (next, _) = step(&state, &cmd, &params, &StillAir, index as f64 * dt, dt).unwrap();
            state = next;
            energies.push(lyapunov_diagnostics(&state, reference.y, &gains, &params).value);
            if index >= 25_000 {
                tail_error = tail_error.max((reference.y - state.attitude.y).abs());
            }
        }

        let final_error = (reference.y - state.attitude.y).abs();
        assert!(
            final_error < 0.5f64.to_radians(),
            "pitch error after 30 s: {:.3} deg",
            final_error.to_degrees()
        );
        // Steady over the last five seconds, not just at the final sample.
        assert!(
            tail_error < 0.5f64.to_radians(),
            "late pitch error peaked at {:.3} deg",
            tail_error.to_degrees()
        );
        for k in 15_000..steps - 1 {
            assert!(
                energies[k + 1] <= energies[k] + 1e-6,
                "energy rose at step {k}: {} -> {}",
                energies[k],
                energies[k + 1]
            );
        }
    }

    /// Bounded sinusoidal pitch disturbance at the assumed amplitude: the
    /// late pitch error must respect the ultimate bound from the gain
    /// report (the bound is conservative, so only <= is asserted).
    #[test]
    fn sinusoidal_disturbance_respects_ultimate_bound() {
        let params = float_params();
        let gains = pitch_axis_gains();
        let mut ctl = AttitudeController::new(gains, 0.0).unwrap();
        let reference = Vector3::zeros();
        let dt = 1e-3;
        let steps = 30_000;
        let rho = gains.rho_theta;
        let disturbed = |_: &Vector3<f64>, time: f64| EnvSample {
            extra_torque: Vector3::new(0.0, rho * (2.0 * std::f64::consts::PI * 0.5 * time).sin(), 0.0),
            ..EnvSample::default()
        };

        let mut state = BodyState::at_rest();
        let mut late_error: f64 = 0.0;
        for index in 0..steps {
            let rates = attitude_rates(&state);
            let (q_ref, thrust_cmd) =
                ctl.outer_attitude_law(&state.attitude, &reference, &rates, &params.arm, dt);
            let speeds = ctl.inner_arm_law(state.q_arm, q_ref, &params.arm, dt);
            let arm_rates = q_rates_from_motors(speeds.0, speeds.1, &params.arm);
            let cmd = ActuationCommand {
                thrust: thrust_cmd,
                arm_rates,
            };
            let (next, _) = step(&state, &cmd, &params, &disturbed, index as f64 * dt, dt).unwrap();
            state = next;
            if index >= 15_000 {
                late_error = late_error.max((reference.y - state.attitude.y).abs());
            }
        }

        let bound = gain_condition(&gains, &params, workspace_rate_envelope(&params.arm)).uub_radius;
        assert!(
            late_error <= bound,
            "late pitch error {:.4} rad exceeds ultimate bound {:.4} rad",
            late_error,
            bound
        );
    }

    #[test]
    fn equal_horizontal_thrust_makes_no_yaw_moment() {
        let mut ctl = BaselineController::new(
            BaselineActuator::OmniThrust(OmniConfig::default()),
            PidGains::new(0.0, 0.0, 0.0),
            PidGains::new(0.0, 0.0, 0.0),
        );
        let cmd = ctl.command(
            &Vector3::zeros(),
            &Vector3::zeros(),
            &Vector3::zeros(),
            0.5,
            1.0,
            0.1,
            1e-3,
        );
        assert_eq!(cmd.thrusts.x, cmd.thrusts.y);
        assert_eq!(cmd.torque.z, 0.0);
    }

    #[test]
    fn elevator_is_powerless_at_rest() {
        assert_eq!(elevator_moment(0.5, 0.0, 1.2, -0.02), 0.0);
        let mut ctl = BaselineController::new(
            BaselineActuator::Elevator(ElevatorConfig::default()),
            PidGains::new(1.0, 0.0, 0.0),
            PidGains::new(0.0, 0.0, 0.0),
        );
        let cmd = ctl.command(
            &Vector3::zeros(),
            &Vector3::new(0.0, 0.3, 0.0),
            &Vector3::zeros(),
            0.0,
            1.2,
            0.0,
            1e-3,
        );
        assert_ne!(cmd.deflection, 0.0);
        assert_eq!(cmd.torque.y, 0.0);
    }

    #[test]
    fn elevator_moment_quadruples_when_speed_doubles() {
        let single = elevator_moment(-0.5, 0.4, 1.2, -0.02);
        let double = elevator_moment(-0.5, 0.8, 1.2, -0.02);
        assert_abs_diff_eq!(double, 4.0 * single, epsilon = 1e-15);
    }

    #[test]
    fn full_down_elevator_raises_the_nose() {
        let moment = elevator_moment(
            -45f64.to_radians(),
            0.8,
            crate::aero::DEFAULT_AERO_SCALE,
            DEFAULT_ELEVATOR_EFFECTIVENESS,
        );
        assert!(moment > 0.0, "expected nose-up moment, got {moment}");
    }

    #[test]
    fn invalid_gains_are_rejected_with_all_violations() {
        let mut gains = ControlGains::default();
        gains.outer_pitch.kp = 0.0;
        gains.lambda = -1.0;
        gains.epsilon = 0.0;
        let err = AttitudeController::new(gains, 0.0).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("kp"));
        assert!(message.contains("lambda"));
        assert!(message.contains("epsilon"));
    }

    /// A disturbance-free controlled run must keep the commanded deflection
    /// inside the workspace disc at every step; spot checks a trajectory
    /// in addition to the property test below.
    #[test]
    fn closed_loop_commands_stay_inside_workspace() {
        let params = VehicleParams::default();
        let mut ctl = controller();
        let reference = Vector3::new(0.2, -0.3, 1.0);
        let dt = 1e-3;
        let mut state = BodyState::at_rest();
        for index in 0..5_000 {
            let rates = attitude_rates(&state);
            let (q_ref, thrust_cmd) =
                ctl.outer_attitude_law(&state.attitude, &reference, &rates, &params.arm, dt);
            assert!(q_ref.norm() <= params.arm.workspace_radius() + 1e-12);
            let speeds = ctl.inner_arm_law(state.q_arm, q_ref, &params.arm, dt);
            let arm_rates = q_rates_from_motors(speeds.0, speeds.1, &params.arm);
            let cmd = ActuationCommand {
                thrust: thrust_cmd,
                arm_rates,
            };
            let (next, _) = step(&state, &cmd, &params, &StillAir, index as f64 * dt, dt).unwrap();
            state = next;
        }
    }

    /// The energy decay bound must be consistent with the measured energy
    /// derivative along a disturbance-free closed-loop trajectory: sampled
    /// dV/dt stays below the bound plus discretization slack.
    #[test]
    fn decay_bound_upper_bounds_measured_energy_rate() {
        let params = float_params();
        let mut gains = pitch_axis_gains();
        gains.rho_theta = 0.0;
        let mut ctl = AttitudeController::new(gains, 0.0).unwrap();
        let reference = Vector3::new(0.0, 5f64.to_radians(), 0.0);
        let dt = 1e-3;

        let mut state = BodyState::at_rest();
        let mut previous =
            lyapunov_diagnostics(&state, reference.y, &gains, &params);
        for index in 0..20_000 {
            let rates = attitude_rates(&state);
            let (q_ref, thrust_cmd) =
                ctl.outer_attitude_law(&state.attitude, &reference, &rates, &params.arm, dt);
            let speeds = ctl.inner_arm_law(state.q_arm, q_ref, &params.arm, dt);
            let arm_rates = q_rates_from_motors(speeds.0, speeds.1, &params.arm);
            let cmd = ActuationCommand {
                thrust: thrust_cmd,
                arm_rates,
            };
            let (next, _) = step(&state, &cmd, &params, &StillAir, index as f64 * dt, dt).unwrap();
            state = next;
            let sample = lyapunov_diagnostics(&state, reference.y, &gains, &params);
            if index >= 10_000 {
                let measured = (sample.value - previous.value) / dt;
                assert!(
                    measured <= sample.decay_bound.max(0.0) + 1e-3,
                    "measured energy rate {measured:.3e} above bound {:.3e} at step {index}",
                    sample.decay_bound
                );
            }
            previous = sample;
        }
    }

    proptest! {
        /// Proportional-plus-derivative output always opposes the pitch
        /// error when the error rate is zero and no integral has built up.
        #[test]
        fn deflection_sign_opposes_pitch_error(error in -0.8f64..0.8) {
            prop_assume!(error.abs() > 1e-9);
            let mut ctl = controller();
            let spec = ArmSpec::default();
            let reference = Vector3::new(0.0, error, 0.0);
            let (q_ref, _) = ctl.outer_attitude_law(
                &Vector3::zeros(),
                &reference,
                &Vector3::zeros(),
                &spec,
                1e-3,
            );
            prop_assert!(q_ref.x * error <= 0.0);
            prop_assert!(q_ref.x != 0.0);
        }

        /// The commanded deflection never leaves the workspace disc, no
        /// matter how large the attitude errors are.
        #[test]
        fn commanded_deflection_respects_workspace(
            roll in -3.0f64..3.0,
            pitch in -1.4f64..1.4,
            yaw in -3.0f64..3.0,
            rate in -2.0f64..2.0,
        ) {
            let mut ctl = controller();
            let spec = ArmSpec::default();
            let reference = Vector3::new(roll, pitch, yaw);
            let rates = Vector3::new(rate, -rate, rate);
            let (q_ref, _) = ctl.outer_attitude_law(
                &Vector3::zeros(),
                &reference,
                &rates,
                &spec,
                1e-3,
            );
            prop_assert!(q_ref.norm() <= spec.workspace_radius() + 1e-12);
        }
    }
}
