//! Simulation library for a buoyant gliding vehicle whose attitude is
//! actuated by a continuum-arm moving mass.
//!
//! The vehicle is a helium envelope with wings carrying a cable-driven
//! continuum arm below its center of buoyancy. Bending the arm relocates
//! the arm's tip mass, shifting the center of gravity relative to the
//! center of buoyancy; the resulting gravitational moment adjusts pitch
//! and roll, while aerodynamic coupling lets the roll angle regulate yaw.
//!
//! Module map:
//!
//! | Module     | Contents |
//! |------------|----------|
//! | [`arm`]    | Constant-curvature arm kinematics, cable map, gear train |
//! | [`aero`]   | Identified aerodynamic coefficient model and wrench |
//! | [`wind`]   | Deterministic wind fields for disturbance scenarios |
//! | [`dynamics`] | Rigid-body + moving-mass equations of motion, RK4 stepping, trim |
//! | [`control`]  | Dual-loop PID attitude control, stability diagnostics, baselines |
//! | [`analysis`] | Arm gain study, CumRMSE, trajectory/endurance metrics, repeatability |
//! | [`scenario`] | Config parsing/validation and named presets |
//! | [`sim`]      | Scenario execution loop and trajectory logging |
//! | [`export`]   | Tabular (CSV) and structured (JSON) log round-tripping |
//!
//! Frame conventions, used everywhere without restatement:
//!
//! * Inertial frame: z-axis points **down** (gravity acts along +z).
//! * Body frame: x forward, y starboard, z down, origin at the center of
//!   buoyancy (CB).
//! * Attitude: roll-pitch-yaw Euler angles, rotation `Rz(psi)*Ry(theta)*Rx(phi)`
//!   mapping body vectors to inertial vectors.
//! * SI units internally; gram-force inputs are converted at the config
//!   boundary (1 gf = 9.80665e-3 N).

pub mod aero;
pub mod analysis;
pub mod arm;
pub mod control;
pub mod dynamics;
pub mod export;
pub mod scenario;
pub mod sim;
pub mod wind;

/// Newtons per gram-force, the conversion used at every config boundary.
pub const NEWTON_PER_GRAM_FORCE: f64 = 9.80665e-3;
