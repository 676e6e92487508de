//! Scenario configuration and the named preset library.
//!
//! A scenario describes one simulation run end to end: vehicle parameters,
//! wind fields, controller mode, initial condition, timing, power
//! accounting, and claw schedule. Scenarios live in human-readable,
//! line-oriented sectioned text files (TOML), chosen so sweeps can be
//! hand-edited and diffed. Omitted vehicle values fall back to the
//! identified defaults; unknown keys are rejected so typos cannot silently
//! revert a field to its default.
//!
//! # Units in config files
//!
//! Bare keys are SI: meters, seconds, kilograms, newtons, radians where a
//! unit applies. Two suffixes mark the hardware-facing exceptions:
//! `*_gf` keys give propeller thrust in gram-force (the bench convention
//! for these vehicles), and `*_deg` keys give angles in degrees. Arm
//! deviations (`delta_x`, `delta_y`) are meters. Conversion happens once,
//! at the config boundary; everything past [`ScenarioConfig::execute`]
//! is SI.
//!
//! # Layout
//!
//! ```toml
//! title = "pitch step under crosswind"
//! duration = 20.0          # s
//! dt = 0.001               # s
//! decimation = 100         # log every 100th step
//!
//! [[wind]]
//! constant = { velocity = [0.0, 1.0, 0.0] }   # m/s, inertial
//!
//! [vehicle]                # omitted keys keep identified defaults
//! buoyancy = 1.905
//!
//! [controller.closed-loop]
//! thrust_gf = 3.5
//! reference_deg = { constant = [0.0, 10.0, 0.0] }   # roll, pitch, yaw
//! ```
//!
//! Controller modes: `script` (open-loop arm deflections), `closed-loop`
//! (dual-loop attitude control), `baseline-omni` (three-propeller
//! comparison vehicle), `baseline-elevator` (tail-surface comparison
//! vehicle under PID), and `elevator-script` (scripted tail surface).
//! Convention throughout the format: mode/variant tags are kebab-case,
//! field keys are snake_case.
//!
//! A [`ScenarioConfig`] is a plain value: a sweep runner may execute many
//! scenarios concurrently, one thread each; a single run is sequential and
//! owns its log.

use std::fs;
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aero::AeroModel;
use crate::analysis::PowerDirective;
use crate::arm::ArmSpec;
use crate::control::{
    AttitudeController, BaselineActuator, BaselineController, ControlError, ControlGains,
    ElevatorConfig, OmniConfig, PidGains,
};
use crate::dynamics::{
    static_trim, steady_cruise, BodyState, DynamicsError, EnvSample, VehicleParams, MAX_TIMESTEP,
};
use crate::sim::{
    run, validate_claw_events, Actuation, ClawEvent, ReferenceProgram, RunOutcome, RunSettings,
    ScriptProgram, Signal, SimError,
};
use crate::wind::{total_wind, WindField};
use crate::NEWTON_PER_GRAM_FORCE;

/// Everything that can go wrong between a config file and a finished run.
#[derive(Debug, Error)]
pub enum ScenarioError {
    /// The file could not be read.
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// The text is not a well-formed config; the message carries the line,
    /// column, and offending key.
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    /// The config parsed but violates invariants; one message per
    /// violation, each naming the field.
    #[error("invalid scenario: {}", .0.join("; "))]
    Validation(Vec<String>),
    /// Name not in [`PRESET_NAMES`].
    #[error("unknown preset `{name}`; available: {}", PRESET_NAMES.join(", "))]
    UnknownPreset { name: String },
    /// The configured initial equilibrium could not be solved.
    #[error("initial condition: {0}")]
    Trim(#[from] DynamicsError),
    /// Controller construction rejected the configured gains.
    #[error("controller: {0}")]
    Control(#[from] ControlError),
    /// The run itself failed.
    #[error(transparent)]
    Run(#[from] SimError),
}

/// How the vehicle starts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Level and motionless at the origin. Not an equilibrium unless the
    /// vehicle is neutrally buoyant with the arm parked.
    Rest,
    /// Unpowered equilibrium with the arm parked; a non-neutral vehicle
    /// settles into its steady glide.
    #[default]
    StaticTrim,
    /// Powered longitudinal equilibrium at the given thrust.
    Cruise { thrust_gf: f64 },
}

impl InitialCondition {
    fn violations(&self) -> Vec<String> {
        match self {
            InitialCondition::Cruise { thrust_gf } if !thrust_gf.is_finite() || *thrust_gf < 0.0 => {
                vec![format!(
                    "initial.cruise.thrust_gf: must be a finite non-negative thrust, got {thrust_gf}"
                )]
            }
            _ => Vec::new(),
        }
    }
}

/// Attitude reference in degrees, the readable config-side twin of
/// [`ReferenceProgram`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReferenceDegrees {
    /// Fixed `(roll, pitch, yaw)` target, deg.
    Constant([f64; 3]),
    /// Step-and-hold waypoints `(time s, (roll, pitch, yaw) deg)`,
    /// time-sorted. The first entry also applies before its time.
    Table(Vec<(f64, [f64; 3])>),
}

impl ReferenceDegrees {
    /// Converts to the radian program the controller consumes.
    pub fn to_radians(&self) -> ReferenceProgram {
        fn vec_rad(rpy: &[f64; 3]) -> Vector3<f64> {
            Vector3::new(rpy[0].to_radians(), rpy[1].to_radians(), rpy[2].to_radians())
        }
        match self {
            ReferenceDegrees::Constant(rpy) => ReferenceProgram::Constant(vec_rad(rpy)),
            ReferenceDegrees::Table(rows) => {
                ReferenceProgram::Table(rows.iter().map(|(t, rpy)| (*t, vec_rad(rpy))).collect())
            }
        }
    }
}

/// Rescales a signal's values (not its times) by a constant factor; used to
/// convert degree-valued config signals to radians.
fn scale_signal(signal: &Signal, factor: f64) -> Signal {
    match signal {
        Signal::Constant(v) => Signal::Constant(v * factor),
        Signal::Sinusoid { amplitude, period, start, end, phase } => Signal::Sinusoid {
            amplitude: amplitude * factor,
            period: *period,
            start: *start,
            end: *end,
            phase: *phase,
        },
        Signal::Table(rows) => Signal::Table(rows.iter().map(|(t, v)| (*t, v * factor)).collect()),
    }
}

fn gf_to_newton(thrust_gf: f64) -> f64 {
    thrust_gf * NEWTON_PER_GRAM_FORCE
}

/// Controller mode plus its gains and references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ControllerConfig {
    /// Open-loop arm script: thrust held constant, the inner loop tracks
    /// the commanded deflections, attitude loops off.
    Script {
        #[serde(default)]
        thrust_gf: f64,
        /// Commanded longitudinal deviation, m.
        delta_x: Signal,
        /// Commanded lateral deviation, m.
        delta_y: Signal,
        /// Only the inner-loop gains act in this mode.
        #[serde(default)]
        gains: ControlGains,
    },
    /// Dual-loop attitude control toward a reference.
    ClosedLoop {
        #[serde(default)]
        thrust_gf: f64,
        reference_deg: ReferenceDegrees,
        #[serde(default)]
        gains: ControlGains,
    },
    /// Comparison vehicle: three-propeller thrust triple under PID.
    BaselineOmni {
        #[serde(default)]
        cruise_thrust_gf: f64,
        reference_deg: ReferenceDegrees,
        /// Pitch PID, error rad to vertical-propeller thrust N.
        pitch: PidGains,
        /// Yaw PID, error rad to differential thrust N.
        yaw: PidGains,
        #[serde(default)]
        config: OmniConfig,
    },
    /// Comparison vehicle: tail elevator under pitch PID.
    BaselineElevator {
        #[serde(default)]
        cruise_thrust_gf: f64,
        reference_deg: ReferenceDegrees,
        /// Pitch PID, error rad to deflection rad.
        pitch: PidGains,
        #[serde(default)]
        config: ElevatorConfig,
    },
    /// Scripted tail elevator, no feedback; the arm stays parked.
    ElevatorScript {
        #[serde(default)]
        thrust_gf: f64,
        /// Commanded deflection, deg.
        deflection_deg: Signal,
        #[serde(default)]
        config: ElevatorConfig,
    },
}

fn pid_violations(label: &str, g: &PidGains, out: &mut Vec<String>) {
    if !(g.kp.is_finite() && g.ki.is_finite() && g.kd.is_finite()) {
        out.push(format!("{label}: gains must be finite, got ({}, {}, {})", g.kp, g.ki, g.kd));
    }
}

fn thrust_violations(label: &str, thrust_gf: f64, out: &mut Vec<String>) {
    if !thrust_gf.is_finite() {
        out.push(format!("{label}: must be a finite thrust in gram-force, got {thrust_gf}"));
    }
}

fn omni_violations(cfg: &OmniConfig, out: &mut Vec<String>) {
    for (name, v) in [
        ("left_max", cfg.left_max),
        ("right_max", cfg.right_max),
        ("vertical_max", cfg.vertical_max),
        ("lateral_arm", cfg.lateral_arm),
        ("vertical_arm", cfg.vertical_arm),
    ] {
        if !v.is_finite() || v <= 0.0 {
            out.push(format!("controller config.{name}: must be a finite positive number, got {v}"));
        }
    }
}

fn elevator_violations(cfg: &ElevatorConfig, out: &mut Vec<String>) {
    if !cfg.deflection_max.is_finite() || cfg.deflection_max <= 0.0 {
        out.push(format!(
            "controller config.deflection_max: must be a finite positive angle in rad, got {}",
            cfg.deflection_max
        ));
    }
    if !cfg.effectiveness.is_finite() {
        out.push(format!(
            "controller config.effectiveness: must be finite, got {}",
            cfg.effectiveness
        ));
    }
}

impl ControllerConfig {
    /// The dual-loop gain set, for modes that carry one.
    pub fn control_gains(&self) -> Option<ControlGains> {
        match self {
            ControllerConfig::Script { gains, .. } | ControllerConfig::ClosedLoop { gains, .. } => {
                Some(*gains)
            }
            _ => None,
        }
    }

    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            ControllerConfig::Script { thrust_gf, delta_x, delta_y, gains } => {
                thrust_violations("controller.script.thrust_gf", *thrust_gf, &mut out);
                if let Err(e) = delta_x.validated() {
                    out.push(format!("controller.script.delta_x: {e}"));
                }
                if let Err(e) = delta_y.validated() {
                    out.push(format!("controller.script.delta_y: {e}"));
                }
                if let Err(e) = (*gains).validated() {
                    out.push(format!("controller.script.gains: {e}"));
                }
            }
            ControllerConfig::ClosedLoop { thrust_gf, reference_deg, gains } => {
                thrust_violations("controller.closed-loop.thrust_gf", *thrust_gf, &mut out);
                if let Err(e) = reference_deg.to_radians().validated() {
                    out.push(format!("controller.closed-loop.reference_deg: {e}"));
                }
                if let Err(e) = (*gains).validated() {
                    out.push(format!("controller.closed-loop.gains: {e}"));
                }
            }
            ControllerConfig::BaselineOmni { cruise_thrust_gf, reference_deg, pitch, yaw, config } => {
                thrust_violations(
                    "controller.baseline-omni.cruise_thrust_gf",
                    *cruise_thrust_gf,
                    &mut out,
                );
                if let Err(e) = reference_deg.to_radians().validated() {
                    out.push(format!("controller.baseline-omni.reference_deg: {e}"));
                }
                pid_violations("controller.baseline-omni.pitch", pitch, &mut out);
                pid_violations("controller.baseline-omni.yaw", yaw, &mut out);
                omni_violations(config, &mut out);
            }
            ControllerConfig::BaselineElevator { cruise_thrust_gf, reference_deg, pitch, config } => {
                thrust_violations(
                    "controller.baseline-elevator.cruise_thrust_gf",
                    *cruise_thrust_gf,
                    &mut out,
                );
                if let Err(e) = reference_deg.to_radians().validated() {
                    out.push(format!("controller.baseline-elevator.reference_deg: {e}"));
                }
                pid_violations("controller.baseline-elevator.pitch", pitch, &mut out);
                elevator_violations(config, &mut out);
            }
            ControllerConfig::ElevatorScript { thrust_gf, deflection_deg, config } => {
                thrust_violations("controller.elevator-script.thrust_gf", *thrust_gf, &mut out);
                if let Err(e) = deflection_deg.validated() {
                    out.push(format!("controller.elevator-script.deflection_deg: {e}"));
                }
                elevator_violations(config, &mut out);
            }
        }
        out
    }

    /// Builds the runtime actuation, converting gram-force and degrees to
    /// SI at this boundary.
    fn build_actuation(&self) -> Result<Actuation, ScenarioError> {
        const RAD_PER_DEG: f64 = std::f64::consts::PI / 180.0;
        match self {
            ControllerConfig::Script { thrust_gf, delta_x, delta_y, gains } => {
                let tracker = AttitudeController::new(*gains, 0.0)?;
                Ok(Actuation::Script {
                    program: ScriptProgram {
                        thrust: gf_to_newton(*thrust_gf),
                        delta_x: delta_x.clone(),
                        delta_y: delta_y.clone(),
                    },
                    tracker,
                })
            }
            ControllerConfig::ClosedLoop { thrust_gf, reference_deg, gains } => Ok(
                Actuation::closed_loop(*gains, gf_to_newton(*thrust_gf), reference_deg.to_radians())?,
            ),
            ControllerConfig::BaselineOmni { cruise_thrust_gf, reference_deg, pitch, yaw, config } => {
                Ok(Actuation::Baseline {
                    controller: BaselineController::new(
                        BaselineActuator::OmniThrust(*config),
                        *pitch,
                        *yaw,
                    ),
                    reference: reference_deg.to_radians(),
                    cruise_thrust: gf_to_newton(*cruise_thrust_gf),
                })
            }
            ControllerConfig::BaselineElevator { cruise_thrust_gf, reference_deg, pitch, config } => {
                Ok(Actuation::Baseline {
                    // The elevator has no yaw surface; its yaw channel is a
                    // zero PID.
                    controller: BaselineController::new(
                        BaselineActuator::Elevator(*config),
                        *pitch,
                        PidGains::new(0.0, 0.0, 0.0),
                    ),
                    reference: reference_deg.to_radians(),
                    cruise_thrust: gf_to_newton(*cruise_thrust_gf),
                })
            }
            ControllerConfig::ElevatorScript { thrust_gf, deflection_deg, config } => {
                Ok(Actuation::Elevator {
                    thrust: gf_to_newton(*thrust_gf),
                    deflection: scale_signal(deflection_deg, RAD_PER_DEG),
                    config: *config,
                })
            }
        }
    }
}

fn power_violations(power: &PowerDirective, out: &mut Vec<String>) {
    match power {
        PowerDirective::Fixed(model) => {
            for (name, v) in [
                ("idle_w", model.idle_w),
                ("thrust_coeff", model.thrust_coeff),
                ("arm_coeff", model.arm_coeff),
            ] {
                if !v.is_finite() || v < 0.0 {
                    out.push(format!(
                        "power.fixed.{name}: must be a finite non-negative number, got {v}"
                    ));
                }
            }
            if !model.battery_volts.is_finite() || model.battery_volts <= 0.0 {
                out.push(format!(
                    "power.fixed.battery_volts: must be a finite positive voltage, got {}",
                    model.battery_volts
                ));
            }
        }
        PowerDirective::Calibrate { target_mah_per_min, idle_w, arm_coeff, battery_volts } => {
            if !target_mah_per_min.is_finite() || *target_mah_per_min <= 0.0 {
                out.push(format!(
                    "power.calibrate.target_mah_per_min: must be a finite positive rate, got {target_mah_per_min}"
                ));
            }
            for (name, v) in [("idle_w", *idle_w), ("arm_coeff", *arm_coeff)] {
                if !v.is_finite() || v < 0.0 {
                    out.push(format!(
                        "power.calibrate.{name}: must be a finite non-negative number, got {v}"
                    ));
                }
            }
            if !battery_volts.is_finite() || *battery_volts <= 0.0 {
                out.push(format!(
                    "power.calibrate.battery_volts: must be a finite positive voltage, got {battery_volts}"
                ));
            }
        }
    }
}

fn default_duration() -> f64 {
    RunSettings::default().duration
}

fn default_dt() -> f64 {
    RunSettings::default().dt
}

fn default_decimation() -> usize {
    RunSettings::default().decimation
}

/// One simulation run, fully described.
///
/// `duration = 0` is the one sanctioned edge case: the run produces an
/// empty (header-only on export) log instead of erroring, so sweeps can
/// carry placeholder rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// One-line human description.
    #[serde(default)]
    pub title: String,
    /// Free-form documentation: assumptions, provenance of invented
    /// numbers, calibration notes. Carried verbatim, never interpreted.
    #[serde(default)]
    pub notes: Vec<String>,
    /// Run length, s.
    #[serde(default = "default_duration")]
    pub duration: f64,
    /// Integrator step, s.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Log every `decimation`-th step.
    #[serde(default = "default_decimation")]
    pub decimation: usize,
    /// Recorded for randomized studies built on top of runs (repeatability
    /// batches, parameter dithers). The integrator itself is deterministic
    /// and does not consume it.
    #[serde(default)]
    pub seed: u64,
    /// How the vehicle starts.
    #[serde(default)]
    pub initial: InitialCondition,
    /// Vehicle parameters; omitted keys keep the identified defaults.
    #[serde(default)]
    pub vehicle: VehicleParams,
    /// Optional top-level arm section; when present it replaces
    /// `vehicle.arm`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<ArmSpec>,
    /// Optional top-level aero section; when present it replaces
    /// `vehicle.aero`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aero: Option<AeroModel>,
    /// Superposed wind fields; empty means still air.
    #[serde(default)]
    pub wind: Vec<WindField>,
    /// Battery-drain bookkeeping.
    #[serde(default)]
    pub power: PowerDirective,
    /// Scheduled claw events, time-sorted.
    #[serde(default)]
    pub claw: Vec<ClawEvent>,
    /// Controller mode; the only section a config must spell out.
    pub controller: ControllerConfig,
}

impl ScenarioConfig {
    /// Folds the optional top-level `[arm]`/`[aero]` sections into the
    /// vehicle, which is where the rest of the library reads them.
    fn resolved(mut self) -> Self {
        if let Some(arm) = self.arm.take() {
            self.vehicle.arm = arm;
        }
        if let Some(aero) = self.aero.take() {
            self.vehicle.aero = aero;
        }
        self
    }

    /// Checks every invariant and returns the config with overrides folded
    /// in, or the full list of violations.
    pub fn validated(self) -> Result<Self, ScenarioError> {
        let config = self.resolved();
        let mut violations = Vec::new();

        if let Err(e) = config.vehicle.clone().validated() {
            violations.push(format!("vehicle: {e}"));
        }
        if !config.duration.is_finite() || config.duration < 0.0 {
            violations.push(format!(
                "duration: must be a finite non-negative number of seconds, got {}",
                config.duration
            ));
        }
        if !config.dt.is_finite() || config.dt <= 0.0 || config.dt > MAX_TIMESTEP {
            violations.push(format!("dt: must lie in (0, {MAX_TIMESTEP}] s, got {}", config.dt));
        }
        if config.decimation == 0 {
            violations.push("decimation: must be at least 1".to_string());
        }
        for (i, field) in config.wind.iter().enumerate() {
            if let Err(e) = field.validate() {
                violations.push(format!("wind[{i}]: {e}"));
            }
        }
        violations.extend(config.initial.violations());
        violations.extend(config.controller.violations());
        power_violations(&config.power, &mut violations);
        if let Err(e) = validate_claw_events(&config.claw) {
            violations.push(format!("claw: {e}"));
        }

        if violations.is_empty() {
            Ok(config)
        } else {
            Err(ScenarioError::Validation(violations))
        }
    }

    /// The timing block as the runner consumes it.
    pub fn run_settings(&self) -> RunSettings {
        RunSettings { duration: self.duration, dt: self.dt, decimation: self.decimation }
    }

    /// Validates, solves the initial condition, builds the controller, and
    /// runs the scenario to completion.
    pub fn execute(&self) -> Result<RunOutcome, ScenarioError> {
        let config = self.clone().validated()?;
        let params = config
            .vehicle
            .clone()
            .validated()
            .expect("vehicle parameters were checked during validation");
        let parked = Vector2::zeros();
        let initial = match config.initial {
            InitialCondition::Rest => BodyState::at_rest(),
            InitialCondition::StaticTrim => static_trim(&params, parked)?,
            InitialCondition::Cruise { thrust_gf } => {
                steady_cruise(&params, parked, gf_to_newton(thrust_gf))?
            }
        };
        let actuation = config.controller.build_actuation()?;
        let fields = config.wind.clone();
        let env = move |position: &Vector3<f64>, time: f64| EnvSample {
            wind: total_wind(&fields, *position, time),
            ..EnvSample::default()
        };
        Ok(run(
            &params,
            initial,
            actuation,
            &env,
            config.power,
            config.run_settings(),
            &config.claw,
        )?)
    }
}

/// Parses and validates a scenario from config text.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let config: ScenarioConfig = toml::from_str(text)?;
    config.validated()
}

/// Reads, parses, and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_scenario(&text)
}

/// Runs a scenario to completion; convenience twin of
/// [`ScenarioConfig::execute`].
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutcome, ScenarioError> {
    config.execute()
}

/// Names of the built-in presets, in documentation order.
pub const PRESET_NAMES: [&str; 9] = [
    "fig13-float",
    "fig14-spiral",
    "fig15-yaw",
    "fig15-yaw-open",
    "fig16-outdoor",
    "fig20-endurance-mm",
    "fig20-endurance-omni",
    "fig21-mm",
    "fig21-elevator",
];

/// Raw config text of a built-in preset, exactly as shipped (headers and
/// all), or `None` for an unknown name.
pub fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "fig13-float" => Some(include_str!("../presets/fig13-float.toml")),
        "fig14-spiral" => Some(include_str!("../presets/fig14-spiral.toml")),
        "fig15-yaw" => Some(include_str!("../presets/fig15-yaw.toml")),
        "fig15-yaw-open" => Some(include_str!("../presets/fig15-yaw-open.toml")),
        "fig16-outdoor" => Some(include_str!("../presets/fig16-outdoor.toml")),
        "fig20-endurance-mm" => Some(include_str!("../presets/fig20-endurance-mm.toml")),
        "fig20-endurance-omni" => Some(include_str!("../presets/fig20-endurance-omni.toml")),
        "fig21-mm" => Some(include_str!("../presets/fig21-mm.toml")),
        "fig21-elevator" => Some(include_str!("../presets/fig21-elevator.toml")),
        _ => None,
    }
}

/// Parses and validates a built-in preset.
pub fn load_preset(name: &str) -> Result<ScenarioConfig, ScenarioError> {
    let text = preset_text(name)
        .ok_or_else(|| ScenarioError::UnknownPreset { name: name.to_string() })?;
    parse_scenario(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Minimal closed-loop scenario text used by several tests.
    fn small_config(extra: &str) -> String {
        format!(
            "duration = 2.0\n\
             {extra}\n\
             [controller.closed-loop]\n\
             thrust_gf = 3.0\n\
             reference_deg = {{ constant = [0.0, 1.0, 0.0] }}\n"
        )
    }

    fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
        assert_eq!(xs.len(), ys.len());
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        sxy / (sxx.sqrt() * syy.sqrt())
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let config = parse_scenario(&small_config("")).unwrap();
        assert_eq!(config.duration, 2.0);
        assert_eq!(config.dt, RunSettings::default().dt);
        assert_eq!(config.decimation, RunSettings::default().decimation);
        assert_eq!(config.initial, InitialCondition::StaticTrim);
        assert_eq!(config.vehicle.stationary_mass, VehicleParams::default().stationary_mass);
        assert!(config.wind.is_empty());
        assert_eq!(config.power, PowerDirective::default());
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let top = parse_scenario(&small_config("turbo = true")).unwrap_err();
        match top {
            ScenarioError::Parse(e) => assert!(e.to_string().contains("turbo"), "{e}"),
            other => panic!("expected parse error, got {other:?}"),
        }

        let nested = parse_scenario(&small_config("[vehicle]\nflux_capacitor = 1.0")).unwrap_err();
        match nested {
            ScenarioError::Parse(e) => {
                let msg = e.to_string();
                assert!(msg.contains("flux_capacitor"), "{msg}");
                assert!(msg.contains("line"), "location missing: {msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn validation_collects_every_violation_and_names_fields() {
        let text = "duration = 10.0\n\
                    dt = 0.0\n\
                    [vehicle]\n\
                    stationary_mass = 0.0\n\
                    [controller.closed-loop]\n\
                    thrust_gf = 3.0\n\
                    reference_deg = { constant = [0.0, 1.0, 0.0] }\n";
        let err = parse_scenario(text).unwrap_err();
        match err {
            ScenarioError::Validation(violations) => {
                assert!(violations.len() >= 2, "{violations:?}");
                assert!(violations.iter().any(|v| v.contains("stationary_mass")), "{violations:?}");
                assert!(violations.iter().any(|v| v.starts_with("dt:")), "{violations:?}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn zero_duration_yields_empty_log() {
        let mut config = parse_scenario(&small_config("")).unwrap();
        config.duration = 0.0;
        let outcome = config.execute().unwrap();
        assert!(outcome.log.is_empty());
        assert!(!outcome.perched);
    }

    #[test]
    fn top_level_arm_and_aero_sections_override_vehicle() {
        let text = "duration = 1.0\n\
                    [arm]\n\
                    length = 0.5\n\
                    [aero]\n\
                    scale = 2.0\n\
                    [controller.closed-loop]\n\
                    thrust_gf = 3.0\n\
                    reference_deg = { constant = [0.0, 1.0, 0.0] }\n";
        let config = parse_scenario(text).unwrap();
        assert_eq!(config.vehicle.arm.length, 0.5);
        assert_eq!(config.vehicle.aero.scale, 2.0);
        assert!(config.arm.is_none() && config.aero.is_none());
    }

    #[test]
    fn units_convert_at_the_config_boundary() {
        let text = "duration = 1.0\n\
                    [controller.script]\n\
                    thrust_gf = 100.0\n\
                    delta_x = { constant = 0.0 }\n\
                    delta_y = { constant = 0.0 }\n";
        let config = parse_scenario(text).unwrap();
        match config.controller.build_actuation().unwrap() {
            Actuation::Script { program, .. } => {
                assert_abs_diff_eq!(program.thrust, 0.980665, epsilon = 1e-12);
            }
            other => panic!("expected script actuation, got {other:?}"),
        }

        let reference = ReferenceDegrees::Constant([0.0, 10.0, 0.0]).to_radians();
        match reference {
            ReferenceProgram::Constant(rpy) => {
                assert_abs_diff_eq!(rpy.y, 10.0_f64.to_radians(), epsilon = 1e-15);
            }
            other => panic!("expected constant reference, got {other:?}"),
        }

        let deg = Signal::Table(vec![(0.0, 0.0), (5.0, -45.0)]);
        match scale_signal(&deg, std::f64::consts::PI / 180.0) {
            Signal::Table(rows) => {
                assert_abs_diff_eq!(rows[1].1, -std::f64::consts::FRAC_PI_4, epsilon = 1e-15);
            }
            other => panic!("expected table signal, got {other:?}"),
        }
    }

    #[test]
    fn unknown_preset_error_lists_the_roster() {
        let err = load_preset("fig99-warp").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("fig99-warp"), "{msg}");
        assert!(msg.contains("fig14-spiral"), "{msg}");
    }

    #[test]
    fn every_preset_has_a_documenting_header() {
        for name in PRESET_NAMES {
            let text = preset_text(name).unwrap();
            assert!(text.starts_with("# "), "{name} lacks a header comment");
            let config = parse_scenario(text).unwrap();
            assert!(!config.title.is_empty(), "{name} lacks a title");
        }
    }

    /// Shared exercise for the preset-completion tests: parse, validate,
    /// run, and check the log grid.
    fn run_preset(name: &str) -> RunOutcome {
        let config = load_preset(name).unwrap();
        let outcome = config.execute().unwrap();
        assert!(!outcome.log.is_empty(), "{name} produced an empty log");
        assert!(!outcome.perched, "{name} ended perched unexpectedly");
        let expected_records =
            (config.duration / (config.dt * config.decimation as f64)).round() as usize + 1;
        assert_eq!(outcome.log.len(), expected_records, "{name} log length");
        let last = outcome.log.records.last().unwrap();
        assert_abs_diff_eq!(last.time, config.duration, epsilon = 1e-9);
        outcome
    }

    #[test]
    fn preset_fig13_float_runs_and_decouples_axes() {
        let outcome = run_preset("fig13-float");
        let records = &outcome.log.records;

        // First half: delta_x drives; pitch must anti-correlate with the
        // achieved deflection while roll stays quiet. Second half: delta_y
        // drives; roll must follow with positive sign. The first second of
        // each window is skipped as transient.
        let x_window: Vec<_> =
            records.iter().filter(|r| r.time >= 1.0 && r.time < 15.5).collect();
        let y_window: Vec<_> =
            records.iter().filter(|r| r.time >= 17.0 && r.time < 31.5).collect();

        let dx: Vec<f64> = x_window.iter().map(|r| r.delta.x).collect();
        let pitch: Vec<f64> = x_window.iter().map(|r| r.attitude.y).collect();
        let corr_pitch = pearson(&dx, &pitch);
        assert!(corr_pitch < -0.7, "pitch should anti-track delta_x, corr = {corr_pitch:.3}");

        let dy: Vec<f64> = y_window.iter().map(|r| r.delta.y).collect();
        let roll: Vec<f64> = y_window.iter().map(|r| r.attitude.x).collect();
        let corr_roll = pearson(&dy, &roll);
        assert!(corr_roll > 0.7, "roll should track delta_y, corr = {corr_roll:.3}");

        // Cross-channel leakage stays small while the sinusoids run.
        let max_roll_leak =
            x_window.iter().map(|r| r.attitude.x.abs()).fold(0.0_f64, f64::max);
        assert!(
            max_roll_leak < 1.0_f64.to_radians(),
            "roll leaked {:.3} deg during the pitch window",
            max_roll_leak.to_degrees()
        );
    }

    #[test]
    fn preset_fig14_spiral_runs_inside_the_workspace() {
        let outcome = run_preset("fig14-spiral");
        let radius = VehicleParams::default().arm.workspace_radius();
        for r in &outcome.log.records {
            assert!(r.delta.norm() <= radius + 1e-9, "deflection left the workspace");
        }
        // The scripted triangle actually moves the arm through both axes.
        let max_dx = outcome.log.records.iter().map(|r| r.delta.x).fold(0.0_f64, f64::max);
        let max_dy = outcome.log.records.iter().map(|r| r.delta.y).fold(0.0_f64, f64::max);
        assert!(max_dx > 0.02 && max_dy > 0.015, "triangle not traced: {max_dx} {max_dy}");
    }

    #[test]
    fn preset_fig15_pair_is_deterministic_and_comparable() {
        let closed = run_preset("fig15-yaw");
        let open = run_preset("fig15-yaw-open");
        assert_eq!(closed.log.len(), open.log.len(), "paired runs must share the grid");

        // Byte-level determinism: a second execution reproduces the log
        // exactly.
        let again = load_preset("fig15-yaw").unwrap().execute().unwrap();
        assert_eq!(closed.log, again.log);
    }

    #[test]
    fn preset_fig16_outdoor_runs_through_the_gust() {
        let outcome = run_preset("fig16-outdoor");
        // The gust window must actually perturb the vehicle: compare yaw
        // rates before and during the pulse.
        let quiet = outcome
            .log
            .records
            .iter()
            .filter(|r| r.time >= 8.0 && r.time < 12.0)
            .map(|r| r.omega.norm())
            .fold(0.0_f64, f64::max);
        let gusty = outcome
            .log
            .records
            .iter()
            .filter(|r| r.time >= 12.0 && r.time < 14.5)
            .map(|r| r.omega.norm())
            .fold(0.0_f64, f64::max);
        assert!(gusty > quiet, "gust left no trace: quiet {quiet:.2e}, gusty {gusty:.2e}");
    }

    #[test]
    fn preset_fig20_pair_reproduces_the_drain_targets() {
        let mm = run_preset("fig20-endurance-mm");
        let omni = run_preset("fig20-endurance-omni");

        let mm_metrics = crate::analysis::trajectory_metrics(&mm.log).unwrap();
        let omni_metrics = crate::analysis::trajectory_metrics(&omni.log).unwrap();
        assert_abs_diff_eq!(mm_metrics.power_rate_mah_per_min, 5.6, epsilon = 1e-6);
        assert_abs_diff_eq!(omni_metrics.power_rate_mah_per_min, 12.5, epsilon = 1e-6);
        assert!(
            mm_metrics.specific_energy_mwh_per_m < 0.6 * omni_metrics.specific_energy_mwh_per_m,
            "specific-energy ordering lost: {} vs {}",
            mm_metrics.specific_energy_mwh_per_m,
            omni_metrics.specific_energy_mwh_per_m
        );
    }

    #[test]
    fn preset_fig21_pair_orders_pitch_authority() {
        let mm = run_preset("fig21-mm");
        let elevator = run_preset("fig21-elevator");

        let steady_shift = |outcome: &RunOutcome| {
            let records = &outcome.log.records;
            let before: Vec<f64> =
                records.iter().filter(|r| r.time < 5.0).map(|r| r.attitude.y).collect();
            let after: Vec<f64> = records
                .iter()
                .filter(|r| r.time >= outcome.log.duration() - 5.0)
                .map(|r| r.attitude.y)
                .collect();
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            mean(&after) - mean(&before)
        };

        let mm_shift = steady_shift(&mm);
        let elevator_shift = steady_shift(&elevator);
        // Both nose up (negative deflection, rearward mass); the moving
        // mass dominates by a wide margin.
        assert!(mm_shift > 0.0, "moving mass should raise the nose, got {mm_shift:.4}");
        assert!(
            elevator_shift > 0.0,
            "elevator should raise the nose, got {elevator_shift:.4}"
        );
        assert!(
            mm_shift >= 5.0 * elevator_shift,
            "authority ratio too small: {:.2} deg vs {:.2} deg",
            mm_shift.to_degrees(),
            elevator_shift.to_degrees()
        );
    }
}
