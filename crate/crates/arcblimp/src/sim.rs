//! Trajectory runner: closed-loop and scripted flights to a sampled log.
//!
//! [`run`] advances the vehicle with the fixed-step integrator while one of
//! the [`Actuation`] modes supplies commands each step: open-loop arm
//! scripts, the dual-loop attitude controller, the comparison vehicles
//! (thrust triple, tail elevator), or a scripted elevator. The result is a
//! [`TrajectoryLog`] of uniformly spaced [`LogRecord`] samples carrying
//! state, actuation, aerodynamic wrench, the control energy diagnostic, and
//! electrical energy counters, plus warning flags.
//!
//! Every ingredient is a pure function of position and time (wind included),
//! so a rerun of the same inputs reproduces the log bit for bit.

use crate::analysis::{AnalysisError, PowerDirective, PowerModel};
use crate::arm::{clamp_to_workspace, q_rates_from_motors};
use crate::aero::aero_wrench;
use crate::control::{
    elevator_moment, lyapunov_diagnostics, AttitudeController, BaselineActuator,
    BaselineController, ControlError, ControlGains, ElevatorConfig,
};
use crate::dynamics::{
    euler_rate_matrix, rotation_from_euler, step, ActuationCommand, BodyState, EnvSample,
    Environment, DynamicsError, VehicleParams, MAX_TIMESTEP,
};
use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Failure modes of a trajectory run.
#[derive(Debug, Error)]
pub enum SimError {
    /// The integrator (or the attitude-rate map the controller needs)
    /// failed at a specific simulation time.
    #[error("dynamics failure at t = {time:.6} s: {source}")]
    Dynamics {
        time: f64,
        #[source]
        source: DynamicsError,
    },
    /// Controller construction rejected its gains.
    #[error(transparent)]
    Control(#[from] ControlError),
    /// Power-model resolution failed.
    #[error(transparent)]
    Power(#[from] AnalysisError),
    /// The run settings violate a documented bound.
    #[error("invalid run settings: {0}")]
    InvalidSettings(String),
    /// A command signal or reference program is malformed.
    #[error("invalid input signal: {0}")]
    InvalidSignal(String),
}

// ---------------------------------------------------------------------------
// Command signals and reference programs
// ---------------------------------------------------------------------------

/// A scalar command signal evaluated at simulation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Signal {
    /// The same value at every time.
    Constant(f64),
    /// `amplitude * sin(2 pi (t - start) / period + phase)` inside the
    /// window `[start, end)`, zero outside it.
    Sinusoid {
        amplitude: f64,
        period: f64,
        start: f64,
        end: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Piecewise-linear interpolation through `(time, value)` knots sorted
    /// by strictly increasing time; the first and last values hold beyond
    /// the ends.
    Table(Vec<(f64, f64)>),
}

impl Signal {
    /// Value of the signal at time `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            Signal::Constant(v) => *v,
            Signal::Sinusoid {
                amplitude,
                period,
                start,
                end,
                phase,
            } => {
                if t >= *start && t < *end {
                    amplitude * (std::f64::consts::TAU * (t - start) / period + phase).sin()
                } else {
                    0.0
                }
            }
            Signal::Table(points) => {
                if t <= points[0].0 {
                    return points[0].1;
                }
                let last = points.len() - 1;
                if t >= points[last].0 {
                    return points[last].1;
                }
                let i = points.partition_point(|(time, _)| *time <= t) - 1;
                let (t0, v0) = points[i];
                let (t1, v1) = points[i + 1];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// Checks finiteness, window ordering, and knot ordering.
    pub fn validated(&self) -> Result<(), SimError> {
        match self {
            Signal::Constant(v) => {
                if !v.is_finite() {
                    return Err(SimError::InvalidSignal(format!(
                        "constant signal value {v} is not finite"
                    )));
                }
            }
            Signal::Sinusoid {
                amplitude,
                period,
                start,
                end,
                phase,
            } => {
                for (name, v) in [
                    ("amplitude", amplitude),
                    ("period", period),
                    ("start", start),
                    ("end", end),
                    ("phase", phase),
                ] {
                    if !v.is_finite() {
                        return Err(SimError::InvalidSignal(format!(
                            "sinusoid {name} {v} is not finite"
                        )));
                    }
                }
                if !(*period > 0.0) {
                    return Err(SimError::InvalidSignal(format!(
                        "sinusoid period {period} must be positive"
                    )));
                }
                if start > end {
                    return Err(SimError::InvalidSignal(format!(
                        "sinusoid window start {start} exceeds end {end}"
                    )));
                }
            }
            Signal::Table(points) => {
                if points.is_empty() {
                    return Err(SimError::InvalidSignal("table signal has no knots".into()));
                }
                for pair in points.windows(2) {
                    if !(pair[1].0 > pair[0].0) {
                        return Err(SimError::InvalidSignal(format!(
                            "table knot times must strictly increase, got {} then {}",
                            pair[0].0, pair[1].0
                        )));
                    }
                }
                if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                    return Err(SimError::InvalidSignal(
                        "table signal contains non-finite entries".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Open-loop actuation script: constant thrust plus arm-deflection
/// trajectories the inner loop tracks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptProgram {
    /// Propeller thrust, N, held for the whole run.
    pub thrust: f64,
    /// Commanded longitudinal cable deviation, m.
    pub delta_x: Signal,
    /// Commanded lateral cable deviation, m.
    pub delta_y: Signal,
}

/// Attitude reference `(roll, pitch, yaw)` over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceProgram {
    /// One setpoint for the whole run.
    Constant(Vector3<f64>),
    /// Step-and-hold waypoints: at time `t` the entry with the greatest
    /// time not exceeding `t` applies; the first entry applies before its
    /// own time. Angles step rather than interpolate so a yaw waypoint
    /// crossing the wrap cannot generate a spurious sweep.
    Table(Vec<(f64, Vector3<f64>)>),
}

impl ReferenceProgram {
    /// Reference attitude at time `t`.
    pub fn at(&self, t: f64) -> Vector3<f64> {
        match self {
            ReferenceProgram::Constant(v) => *v,
            ReferenceProgram::Table(points) => {
                let i = points.partition_point(|(time, _)| *time <= t);
                if i == 0 {
                    points[0].1
                } else {
                    points[i - 1].1
                }
            }
        }
    }

    /// Checks knot ordering and finiteness.
    pub fn validated(&self) -> Result<(), SimError> {
        match self {
            ReferenceProgram::Constant(v) => {
                if !v.iter().all(|c| c.is_finite()) {
                    return Err(SimError::InvalidSignal(
                        "constant reference contains non-finite entries".into(),
                    ));
                }
            }
            ReferenceProgram::Table(points) => {
                if points.is_empty() {
                    return Err(SimError::InvalidSignal("reference table has no knots".into()));
                }
                for pair in points.windows(2) {
                    if !(pair[1].0 > pair[0].0) {
                        return Err(SimError::InvalidSignal(format!(
                            "reference knot times must strictly increase, got {} then {}",
                            pair[0].0, pair[1].0
                        )));
                    }
                }
                if points
                    .iter()
                    .any(|(t, v)| !t.is_finite() || !v.iter().all(|c| c.is_finite()))
                {
                    return Err(SimError::InvalidSignal(
                        "reference table contains non-finite entries".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Claw events
// ---------------------------------------------------------------------------

/// What the gripper does at an event time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClawAction {
    /// Open the claw.
    Open,
    /// Close the claw in free air (logged, no dynamic effect).
    Close,
    /// Close the claw on an anchor: the vehicle perches and the run ends at
    /// the next logged sample so the log keeps its uniform spacing.
    Grasp,
}

/// One timed gripper event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClawEvent {
    /// Event time, s.
    pub time: f64,
    /// Action taken at that time.
    pub action: ClawAction,
}

pub(crate) fn validate_claw_events(events: &[ClawEvent]) -> Result<(), SimError> {
    for event in events {
        if !(event.time.is_finite() && event.time >= 0.0) {
            return Err(SimError::InvalidSettings(format!(
                "claw event time {} must be finite and nonnegative",
                event.time
            )));
        }
    }
    for pair in events.windows(2) {
        if pair[1].time < pair[0].time {
            return Err(SimError::InvalidSettings(format!(
                "claw events must be sorted by time, got {} after {}",
                pair[1].time, pair[0].time
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Actuation modes
// ---------------------------------------------------------------------------

/// How commands are produced each step.
#[derive(Debug, Clone)]
pub enum Actuation {
    /// Open-loop arm script: the inner loop tracks scripted deflections;
    /// thrust is constant. The attitude loops are off.
    Script {
        /// The scripted thrust and deflections.
        program: ScriptProgram,
        /// Controller whose inner loop tracks the script (outer loop unused).
        tracker: AttitudeController,
    },
    /// Dual-loop attitude control toward a reference program.
    ClosedLoop {
        /// The stateful controller.
        controller: AttitudeController,
        /// Attitude reference over time.
        reference: ReferenceProgram,
    },
    /// A comparison vehicle (thrust triple or tail elevator) under its own
    /// PID loops. Its propellers act through the extra body-frame wrench;
    /// the elevator vehicle keeps the stock propeller for propulsion.
    Baseline {
        /// The comparison controller.
        controller: BaselineController,
        /// Attitude reference over time.
        reference: ReferenceProgram,
        /// Cruise thrust, N: split across the horizontal pair for the
        /// thrust triple, sent to the stock propeller for the elevator.
        cruise_thrust: f64,
    },
    /// Scripted tail elevator: constant thrust, deflection from a signal,
    /// no feedback. The moving-mass arm stays parked.
    Elevator {
        /// Propeller thrust, N.
        thrust: f64,
        /// Scripted deflection, rad.
        deflection: Signal,
        /// Surface limits and effectiveness.
        config: ElevatorConfig,
    },
}

impl Actuation {
    /// Open-loop script under the default inner-loop gains.
    pub fn script(program: ScriptProgram) -> Self {
        let tracker = AttitudeController::new(ControlGains::default(), 0.0)
            .expect("default gains are valid");
        Actuation::Script { program, tracker }
    }

    /// Dual-loop controller toward a reference.
    pub fn closed_loop(
        gains: ControlGains,
        cruise_thrust: f64,
        reference: ReferenceProgram,
    ) -> Result<Self, ControlError> {
        Ok(Actuation::ClosedLoop {
            controller: AttitudeController::new(gains, cruise_thrust)?,
            reference,
        })
    }

    /// Gains used for the logged control-energy diagnostic.
    fn diagnostic_gains(&self) -> ControlGains {
        match self {
            Actuation::ClosedLoop { controller, .. } => controller.gains,
            Actuation::Script { tracker, .. } => tracker.gains,
            _ => ControlGains::default(),
        }
    }

    /// Pitch reference feeding the control-energy diagnostic at time `t`.
    fn reference_pitch(&self, t: f64) -> f64 {
        match self {
            Actuation::ClosedLoop { reference, .. } | Actuation::Baseline { reference, .. } => {
                reference.at(t).y
            }
            _ => 0.0,
        }
    }

    /// Validates the signals and programs this mode carries.
    fn validated(&self) -> Result<(), SimError> {
        match self {
            Actuation::Script { program, .. } => {
                if !program.thrust.is_finite() {
                    return Err(SimError::InvalidSignal(format!(
                        "script thrust {} is not finite",
                        program.thrust
                    )));
                }
                program.delta_x.validated()?;
                program.delta_y.validated()
            }
            Actuation::ClosedLoop { reference, .. } => reference.validated(),
            Actuation::Baseline {
                reference,
                cruise_thrust,
                ..
            } => {
                if !cruise_thrust.is_finite() {
                    return Err(SimError::InvalidSignal(format!(
                        "cruise thrust {cruise_thrust} is not finite"
                    )));
                }
                reference.validated()
            }
            Actuation::Elevator {
                thrust, deflection, ..
            } => {
                if !thrust.is_finite() {
                    return Err(SimError::InvalidSignal(format!(
                        "elevator-run thrust {thrust} is not finite"
                    )));
                }
                deflection.validated()
            }
        }
    }
}

/// Per-step actuation bookkeeping for the log and the power model.
struct StepInfo {
    /// Scalar thrust magnitude for the log's thrust column, N: the stock
    /// propeller's thrust, or the summed propeller magnitudes of the
    /// thrust triple.
    thrust_scalar: f64,
    /// `sum_i |F_i|^(3/2)` over active propellers, N^1.5.
    thrust_pow: f64,
    /// Arm-drive duty in [0, 1]: mean of the two motor-speed fractions.
    duty: f64,
    /// An actuator hit a limit this step (motor speed, workspace disc,
    /// propeller clamp, or surface stop).
    saturated: bool,
}

/// Margin for detecting that a clamped command sits on its limit.
const SATURATION_MARGIN: f64 = 1e-12;

fn motor_duty_and_saturation(speeds: (f64, f64), limit: f64) -> (f64, bool) {
    let duty = (speeds.0.abs() + speeds.1.abs()) / (2.0 * limit);
    let saturated = speeds.0.abs() >= limit - SATURATION_MARGIN
        || speeds.1.abs() >= limit - SATURATION_MARGIN;
    (duty, saturated)
}

impl Actuation {
    /// Produces the command for the step starting at `t`, plus any extra
    /// body-frame wrench (comparison propellers, elevator moment) and the
    /// bookkeeping the logger needs.
    fn command(
        &mut self,
        state: &BodyState,
        params: &VehicleParams,
        env_sample: &EnvSample,
        t: f64,
        dt: f64,
    ) -> Result<(ActuationCommand, Vector3<f64>, Vector3<f64>, StepInfo), SimError> {
        let spec = &params.arm;
        match self {
            Actuation::Script { program, tracker } => {
                let raw = Vector2::new(
                    program.delta_x.value_at(t),
                    program.delta_y.value_at(t),
                );
                let (q_ref, clamped) = clamp_to_workspace(raw, spec.cable_offset);
                let speeds = tracker.inner_arm_law(state.q_arm, q_ref, spec, dt);
                let (duty, motor_sat) = motor_duty_and_saturation(speeds, spec.motor_speed_max);
                let cmd = ActuationCommand {
                    thrust: program.thrust,
                    arm_rates: q_rates_from_motors(speeds.0, speeds.1, spec),
                };
                Ok((
                    cmd,
                    Vector3::zeros(),
                    Vector3::zeros(),
                    StepInfo {
                        thrust_scalar: program.thrust,
                        thrust_pow: program.thrust.abs().powf(1.5),
                        duty,
                        saturated: clamped || motor_sat,
                    },
                ))
            }
            Actuation::ClosedLoop {
                controller,
                reference,
            } => {
                let rates = euler_rate_matrix(&state.attitude)
                    .map_err(|source| SimError::Dynamics { time: t, source })?
                    * state.omega;
                let attitude_ref = reference.at(t);
                let (q_ref, thrust) =
                    controller.outer_attitude_law(&state.attitude, &attitude_ref, &rates, spec, dt);
                let outer_sat = q_ref.norm() >= spec.workspace_radius() - SATURATION_MARGIN;
                let speeds = controller.inner_arm_law(state.q_arm, q_ref, spec, dt);
                let (duty, motor_sat) = motor_duty_and_saturation(speeds, spec.motor_speed_max);
                let cmd = ActuationCommand {
                    thrust,
                    arm_rates: q_rates_from_motors(speeds.0, speeds.1, spec),
                };
                Ok((
                    cmd,
                    Vector3::zeros(),
                    Vector3::zeros(),
                    StepInfo {
                        thrust_scalar: thrust,
                        thrust_pow: thrust.abs().powf(1.5),
                        duty,
                        saturated: outer_sat || motor_sat,
                    },
                ))
            }
            Actuation::Baseline {
                controller,
                reference,
                cruise_thrust,
            } => {
                let rates = euler_rate_matrix(&state.attitude)
                    .map_err(|source| SimError::Dynamics { time: t, source })?
                    * state.omega;
                let attitude_ref = reference.at(t);
                let rotation = rotation_from_euler(&state.attitude);
                let airspeed =
                    (rotation.transpose() * (state.velocity - env_sample.wind)).norm();
                let out = controller.command(
                    &state.attitude,
                    &attitude_ref,
                    &rates,
                    airspeed,
                    params.aero.scale,
                    *cruise_thrust,
                    dt,
                );
                let (cmd_thrust, thrust_scalar, thrust_pow, saturated) = match controller.actuator
                {
                    BaselineActuator::OmniThrust(cfg) => {
                        let t3 = out.thrusts;
                        let saturated = t3.x <= SATURATION_MARGIN
                            || t3.x >= cfg.left_max - SATURATION_MARGIN
                            || t3.y <= SATURATION_MARGIN
                            || t3.y >= cfg.right_max - SATURATION_MARGIN
                            || t3.z.abs() >= cfg.vertical_max - SATURATION_MARGIN;
                        (
                            // Propulsion rides in the extra force; the stock
                            // propeller is absent on this vehicle.
                            0.0,
                            t3.x + t3.y + t3.z.abs(),
                            t3.x.abs().powf(1.5) + t3.y.abs().powf(1.5) + t3.z.abs().powf(1.5),
                            saturated,
                        )
                    }
                    BaselineActuator::Elevator(cfg) => (
                        *cruise_thrust,
                        *cruise_thrust,
                        cruise_thrust.abs().powf(1.5),
                        out.deflection.abs() >= cfg.deflection_max - SATURATION_MARGIN,
                    ),
                };
                let cmd = ActuationCommand {
                    thrust: cmd_thrust,
                    arm_rates: Vector2::zeros(),
                };
                Ok((
                    cmd,
                    out.force,
                    out.torque,
                    StepInfo {
                        thrust_scalar,
                        thrust_pow,
                        duty: 0.0,
                        saturated,
                    },
                ))
            }
            Actuation::Elevator {
                thrust,
                deflection,
                config,
            } => {
                let raw = deflection.value_at(t);
                let defl = raw.clamp(-config.deflection_max, config.deflection_max);
                let rotation = rotation_from_euler(&state.attitude);
                let airspeed =
                    (rotation.transpose() * (state.velocity - env_sample.wind)).norm();
                let moment =
                    elevator_moment(defl, airspeed, params.aero.scale, config.effectiveness);
                let cmd = ActuationCommand {
                    thrust: *thrust,
                    arm_rates: Vector2::zeros(),
                };
                Ok((
                    cmd,
                    Vector3::zeros(),
                    Vector3::new(0.0, moment, 0.0),
                    StepInfo {
                        thrust_scalar: *thrust,
                        thrust_pow: thrust.abs().powf(1.5),
                        duty: 0.0,
                        saturated: defl != raw,
                    },
                ))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Log structures
// ---------------------------------------------------------------------------

/// One logged sample. Field order is the column order of the tabular
/// export: time, position, attitude, velocity, rotation rate, arm
/// deviation, thrust, aerodynamic force and moment, the control energy
/// value, the electrical energy counters, then the boolean flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    /// Sample time, s.
    pub time: f64,
    /// Inertial position, m (z down).
    pub position: Vector3<f64>,
    /// Euler attitude (roll, pitch, yaw), rad.
    pub attitude: Vector3<f64>,
    /// Inertial velocity, m/s.
    pub velocity: Vector3<f64>,
    /// Body rotation rate, rad/s.
    pub omega: Vector3<f64>,
    /// Arm cable deviation (dx, dy), m.
    pub delta: Vector2<f64>,
    /// Propeller thrust magnitude, N (summed over propellers for the
    /// thrust-triple vehicle).
    pub thrust: f64,
    /// Body-frame aerodynamic force at this state, N.
    pub aero_force: Vector3<f64>,
    /// Body-frame aerodynamic moment at this state, N m.
    pub aero_moment: Vector3<f64>,
    /// Pitch-axis control energy diagnostic.
    pub lyapunov: f64,
    /// Electrical energy spent since the start, mWh.
    pub energy_mwh: f64,
    /// Instantaneous electrical power, W.
    pub power_w: f64,
    /// An actuator limit was active at this sample or since the previous
    /// one.
    pub saturated: bool,
    /// The claw is closed at this sample.
    pub claw_closed: bool,
    /// The aerodynamic model was evaluated outside its identified envelope
    /// at this sample or since the previous one.
    pub warning: bool,
}

/// A uniformly sampled trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    /// Spacing between records, s (`decimation * dt`).
    pub sample_interval: f64,
    /// The samples, in time order.
    pub records: Vec<LogRecord>,
}

impl TrajectoryLog {
    /// Number of records.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// True when the log holds no records (a zero-duration run).
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Logged time span, s; zero for fewer than two records.
    pub fn duration(&self) -> f64 {
        match self.records.len() {
            0 | 1 => 0.0,
            n => self.records[n - 1].time - self.records[0].time,
        }
    }

    /// Checks the uniform-spacing contract: positive interval and every
    /// consecutive time delta within a part in 1e6 of it.
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return Err(SimError::InvalidSettings(format!(
                "sample interval {} must be positive and finite",
                self.sample_interval
            )));
        }
        for pair in self.records.windows(2) {
            let delta = pair[1].time - pair[0].time;
            if (delta - self.sample_interval).abs() > 1e-6 * self.sample_interval {
                return Err(SimError::InvalidSettings(format!(
                    "record spacing {delta} at t = {} deviates from the sample interval {}",
                    pair[0].time, self.sample_interval
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// The runner
// ---------------------------------------------------------------------------

/// Duration, step size, and log decimation of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    /// Simulated span, s. Zero is allowed and produces an empty log: the
    /// run that never started, which exporters turn into a header-only
    /// file.
    pub duration: f64,
    /// Integrator step, s, in (0, [`MAX_TIMESTEP`]].
    pub dt: f64,
    /// Steps per logged record (>= 1).
    pub decimation: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            duration: 30.0,
            dt: 1e-3,
            decimation: 100,
        }
    }
}

impl RunSettings {
    /// Checks every bound, reporting the first violation.
    pub fn validated(self) -> Result<Self, SimError> {
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(SimError::InvalidSettings(format!(
                "duration {} must be finite and nonnegative",
                self.duration
            )));
        }
        if !(self.dt > 0.0 && self.dt <= MAX_TIMESTEP) {
            return Err(SimError::InvalidSettings(format!(
                "dt {} outside (0, {MAX_TIMESTEP}]",
                self.dt
            )));
        }
        if self.decimation == 0 {
            return Err(SimError::InvalidSettings(
                "decimation must be at least 1".into(),
            ));
        }
        Ok(self)
    }
}

/// Everything a finished run returns.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// The sampled trajectory.
    pub log: TrajectoryLog,
    /// The power model actually used (resolved if calibration was
    /// requested).
    pub power_model: PowerModel,
    /// The run ended early because the claw grasped an anchor.
    pub perched: bool,
}

/// Runs one trajectory: integrates the vehicle under the actuation mode
/// through the environment, logging every `decimation` steps.
///
/// The command produced at each step is held constant across that step
/// (zero-order hold). Electrical energy is integrated from the per-step
/// power history after the run, so a calibrated power directive reproduces
/// its target drain rate exactly: the calibration means range over the
/// same per-step samples the energy integral sums. Claw events apply in
/// time order; a grasp perches the vehicle and ends the run at the next
/// logged sample, keeping the record spacing uniform.
///
/// Reruns with equal inputs produce bit-identical logs: the integrator is
/// fixed-step, the environment is a pure function of position and time,
/// and no randomness is involved anywhere.
pub fn run(
    params: &VehicleParams,
    initial: BodyState,
    mut actuation: Actuation,
    env: &impl Environment,
    power: PowerDirective,
    settings: RunSettings,
    claw_events: &[ClawEvent],
) -> Result<RunOutcome, SimError> {
    let settings = settings.validated()?;
    actuation.validated()?;
    validate_claw_events(claw_events)?;

    let sample_interval = settings.decimation as f64 * settings.dt;
    if settings.duration == 0.0 {
        let power_model = match power {
            PowerDirective::Fixed(model) => model,
            PowerDirective::Calibrate { .. } => {
                return Err(SimError::InvalidSettings(
                    "cannot calibrate the power model on a zero-duration run".into(),
                ));
            }
        };
        return Ok(RunOutcome {
            log: TrajectoryLog {
                sample_interval,
                records: Vec::new(),
            },
            power_model,
            perched: false,
        });
    }

    let dt = settings.dt;
    let n_steps = (settings.duration / dt).round() as usize;
    let diag_gains = actuation.diagnostic_gains();

    let mut state = initial;
    let mut records = Vec::with_capacity(n_steps / settings.decimation + 2);
    let mut power_history: Vec<(f64, f64)> = Vec::with_capacity(n_steps + 1);
    let mut claw_closed = false;
    let mut perch_requested = false;
    let mut perched = false;
    let mut next_event = 0usize;
    let mut saturated_accum = false;
    let mut warning_accum = false;

    for k in 0..=n_steps {
        let t = k as f64 * dt;

        while next_event < claw_events.len() && claw_events[next_event].time <= t {
            match claw_events[next_event].action {
                ClawAction::Open => claw_closed = false,
                ClawAction::Close => claw_closed = true,
                ClawAction::Grasp => {
                    claw_closed = true;
                    perch_requested = true;
                }
            }
            next_event += 1;
        }

        let env_sample = env.sample(&state.position, t);
        let (cmd, extra_force, extra_torque, info) =
            actuation.command(&state, params, &env_sample, t, dt)?;
        power_history.push((info.thrust_pow, info.duty));
        saturated_accum |= info.saturated;

        let rotation = rotation_from_euler(&state.attitude);
        let v_air_body = rotation.transpose() * (state.velocity - env_sample.wind);
        let aero = aero_wrench(v_air_body, state.omega, &params.aero);
        warning_accum |= aero.validity_exceeded;

        if k % settings.decimation == 0 {
            let lyapunov = lyapunov_diagnostics(
                &state,
                actuation.reference_pitch(t),
                &diag_gains,
                params,
            )
            .value;
            records.push(LogRecord {
                time: t,
                position: state.position,
                attitude: state.attitude,
                velocity: state.velocity,
                omega: state.omega,
                delta: state.q_arm,
                thrust: info.thrust_scalar,
                aero_force: aero.force,
                aero_moment: aero.moment,
                lyapunov,
                // Filled by the energy post-pass below.
                energy_mwh: 0.0,
                power_w: 0.0,
                saturated: saturated_accum,
                claw_closed,
                warning: warning_accum,
            });
            saturated_accum = false;
            warning_accum = false;
            if perch_requested {
                perched = true;
                break;
            }
        }

        if k < n_steps {
            let wrapped = |position: &Vector3<f64>, time: f64| {
                let mut sample = env.sample(position, time);
                sample.extra_force += extra_force;
                sample.extra_torque += extra_torque;
                sample
            };
            let (next, flags) = step(&state, &cmd, params, &wrapped, t, dt)
                .map_err(|source| SimError::Dynamics { time: t, source })?;
            saturated_accum |= flags.workspace_saturated;
            state = next;
        }
    }

    // Energy post-pass. The last history entry is the command at the final
    // sample, never applied across a step, so the applied set (and the
    // calibration means) is everything before it: exactly the terms of the
    // left-endpoint energy integral.
    let applied = power_history.len() - 1;
    let (mean_pow, mean_duty) = if applied == 0 {
        (0.0, 0.0)
    } else {
        let sum = power_history[..applied]
            .iter()
            .fold((0.0, 0.0), |acc, (p, d)| (acc.0 + p, acc.1 + d));
        (sum.0 / applied as f64, sum.1 / applied as f64)
    };
    let power_model = power.resolve(mean_pow, mean_duty)?;

    let mut energy_joules = 0.0;
    let mut consumed = 0usize;
    for (index, record) in records.iter_mut().enumerate() {
        let k = index * settings.decimation;
        while consumed < k {
            let (pow, duty) = power_history[consumed];
            energy_joules += power_model.power(pow, duty) * dt;
            consumed += 1;
        }
        record.energy_mwh = energy_joules / 3.6;
        let (pow, duty) = power_history[k];
        record.power_w = power_model.power(pow, duty);
    }

    Ok(RunOutcome {
        log: TrajectoryLog {
            sample_interval,
            records,
        },
        power_model,
        perched,
    })
}
