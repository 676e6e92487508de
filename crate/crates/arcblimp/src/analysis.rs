//! Analytical comparisons and flight-log metrics.
//!
//! Three families of tools live here:
//!
//! * The moving-mass gain study: exact equilibrium constraint equations for
//!   a rigid-arm and a continuum-arm mechanism, their small-angle gains,
//!   and the linearization error sweep ([`equilibrium_exact`],
//!   [`linear_gains`], [`approximation_error_sweep`]).
//! * Error metrics over logged attitude series: the cumulative RMSE curve
//!   used to compare paired disturbance-rejection runs ([`cum_rmse`]).
//! * Endurance and repeatability metrics: path, speed, and curvature
//!   statistics with an electrical power model calibrated against battery
//!   drain ([`trajectory_metrics`], [`PowerModel`]), and per-waypoint
//!   attitude scatter with coverage ellipses ([`repeatability_stats`]).
//!
//! Everything operates on immutable inputs and returns plain values, so all
//! of it is freely concurrent.

use crate::sim::TrajectoryLog;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Failure modes of the analysis routines.
#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    /// The constraint equation has no attitude root inside the open
    /// interval the solver brackets; the input is outside the mechanism's
    /// operational range.
    #[error("no equilibrium attitude root for arm rotation {theta} rad")]
    NoRoot { theta: f64 },
    /// An input violates a documented domain bound.
    #[error("{what} = {value} outside [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    /// A series operation received no samples.
    #[error("empty series")]
    EmptySeries,
    /// The log's path is too short (or too sparsely sampled) for geometric
    /// metrics to mean anything.
    #[error("degenerate trajectory: {detail}")]
    DegenerateTrajectory { detail: &'static str },
    /// Scatter statistics need at least two runs.
    #[error("repeatability statistics need at least 2 runs, got {got}")]
    InsufficientRuns { got: usize },
    /// Runs disagree on the number of waypoints.
    #[error("run {run} has {got} waypoints, expected {expected}")]
    MismatchedWaypoints {
        run: usize,
        got: usize,
        expected: usize,
    },
    /// Power calibration cannot reach the requested drain rate with a
    /// nonnegative thrust coefficient.
    #[error("power calibration infeasible: {detail}")]
    CalibrationInfeasible { detail: String },
}

// ---------------------------------------------------------------------------
// Moving-mass gain study
// ---------------------------------------------------------------------------

/// Largest arm rotation the gain study covers, rad (60 degrees). Beyond
/// this the mechanism leaves its operational range and the constraint
/// equations are not validated.
pub const STUDY_ROTATION_MAX: f64 = std::f64::consts::FRAC_PI_3;

/// Which arm construction the equilibrium constraint describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArmKind {
    /// Rigid link with the joint actuator riding at the pivot.
    Rigid,
    /// Constant-curvature bending arm; the drive stays at the base, so no
    /// actuator mass moves with the tip.
    Continuum,
}

/// Geometry and masses of the design-study mechanism.
///
/// These are the comparison-study values, not the flight vehicle's: the
/// study explores how much attitude authority a tip mass buys per radian
/// of arm rotation for the two constructions, on a shared geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmStudyParams {
    /// Arm length, m.
    pub length: f64,
    /// Mount depth of the arm base below the body's rotation center, m.
    pub mount_depth: f64,
    /// Tip mass, kg.
    pub tip_mass: f64,
    /// Joint actuator mass, kg. The rigid construction carries this at the
    /// moving joint; the continuum construction leaves it at the base.
    pub joint_mass: f64,
}

impl Default for ArmStudyParams {
    fn default() -> Self {
        Self {
            length: 0.40,
            mount_depth: 0.30,
            tip_mass: 0.030,
            joint_mass: 0.015,
        }
    }
}

impl ArmStudyParams {
    /// Checks positivity of every length and mass.
    pub fn validated(self) -> Result<Self, AnalysisError> {
        let checks = [
            ("study arm length", self.length),
            ("study mount depth", self.mount_depth),
            ("study tip mass", self.tip_mass),
            ("study joint actuator mass", self.joint_mass),
        ];
        for (what, value) in checks {
            if !(value > 0.0 && value.is_finite()) {
                return Err(AnalysisError::OutOfRange {
                    what,
                    value,
                    min: f64::MIN_POSITIVE,
                    max: f64::MAX,
                });
            }
        }
        Ok(self)
    }

    /// Actuator-to-tip mass ratio.
    pub fn mass_ratio(&self) -> f64 {
        self.joint_mass / self.tip_mass
    }

    /// Depth-to-length ratio of the rigid construction.
    pub fn length_ratio_rigid(&self) -> f64 {
        self.mount_depth / self.length
    }

    /// Straight-line distance from base to tip of the bent arm: the chord
    /// of a circular arc of length `L` subtending `theta`. Even in `theta`
    /// and approaches `L` as the bend vanishes.
    pub fn chord(&self, theta: f64) -> f64 {
        if theta.abs() < 1e-6 {
            // Series of 2 sin(t/2)/t keeps the removable singularity smooth
            // to round-off: 1 - t^2/24 + t^4/1920.
            let t2 = theta * theta;
            self.length * (1.0 - t2 / 24.0 + t2 * t2 / 1920.0)
        } else {
            2.0 * self.length * (0.5 * theta).sin() / theta
        }
    }

    /// Depth-to-chord ratio of the continuum construction at a given bend.
    pub fn length_ratio_continuum(&self, theta: f64) -> f64 {
        self.mount_depth / self.chord(theta)
    }
}

/// Right-hand side of `cot(phi) = rhs` for the requested construction.
fn constraint_rhs(theta: f64, params: &ArmStudyParams, arm: ArmKind) -> f64 {
    let (sin_t, cos_t) = (theta.sin(), theta.cos());
    match arm {
        ArmKind::Rigid => {
            -cos_t / sin_t
                - (1.0 + params.mass_ratio()) * params.length_ratio_rigid() / sin_t
        }
        ArmKind::Continuum => {
            -cos_t / sin_t - params.length_ratio_continuum(theta) * theta / (sin_t * sin_t)
        }
    }
}

/// Solves `cot(phi) = rhs` for `phi` in the open interval (-89.9, 89.9)
/// degrees by bisection.
///
/// The cotangent is a strictly decreasing bijection on each half of that
/// interval, so one sign check picks the half and bisection cannot stall.
/// 200 halvings shrink the bracket below one ULP of the root, leaving the
/// residual limited only by the rounding of `cot` itself.
fn solve_cot(rhs: f64) -> Result<f64, AnalysisError> {
    const PHI_MAX: f64 = 89.9 * std::f64::consts::PI / 180.0;
    if !rhs.is_finite() || rhs == 0.0 {
        return Err(AnalysisError::NoRoot { theta: f64::NAN });
    }
    let (mut lo, mut hi) = if rhs > 0.0 {
        (1e-12, PHI_MAX)
    } else {
        (-PHI_MAX, -1e-12)
    };
    let f = |phi: f64| phi.cos() / phi.sin() - rhs;
    if f(lo) <= 0.0 || f(hi) >= 0.0 {
        return Err(AnalysisError::NoRoot { theta: f64::NAN });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Exact equilibrium attitude for an arm rotation.
///
/// Solves the static moment balance of the tip mass (plus, for the rigid
/// construction, the joint actuator mass) hanging from the rotated arm:
/// `cot(phi) = -cot(theta) - (1 + k_m) k_l csc(theta)` for the rigid arm
/// and `cot(phi) = -cot(theta) - k_l(theta) theta csc^2(theta)` for the
/// continuum arm, where `k_l` is the depth-to-length (respectively
/// depth-to-chord) ratio. The attitude swings opposite to the arm, so the
/// root is negative for positive `theta`. `theta = 0` returns the limit
/// value 0 directly.
pub fn equilibrium_exact(
    theta: f64,
    params: &ArmStudyParams,
    arm: ArmKind,
) -> Result<f64, AnalysisError> {
    let max = STUDY_ROTATION_MAX * (1.0 + 1e-12);
    if !(theta.is_finite() && theta.abs() <= max) {
        return Err(AnalysisError::OutOfRange {
            what: "arm rotation",
            value: theta,
            min: -STUDY_ROTATION_MAX,
            max: STUDY_ROTATION_MAX,
        });
    }
    if theta == 0.0 {
        return Ok(0.0);
    }
    solve_cot(constraint_rhs(theta, params, arm)).map_err(|_| AnalysisError::NoRoot { theta })
}

/// Small-angle attitude-per-rotation gains `(continuum, rigid)`.
///
/// Linearizing the constraint equations about zero gives
/// `phi = -K theta` with `K_cont = 1 / (1 + h/L)` (the chord tends to the
/// arm length as the bend vanishes) and
/// `K_rig = 1 / (1 + (1 + k_m) h/L)`. The continuum gain is strictly
/// larger whenever the joint actuator has any mass, because the continuum
/// construction leaves that mass at the base instead of hauling it along
/// the arm.
pub fn linear_gains(params: &ArmStudyParams) -> (f64, f64) {
    let k_cont = 1.0 / (1.0 + params.length_ratio_rigid());
    let k_rig = 1.0 / (1.0 + (1.0 + params.mass_ratio()) * params.length_ratio_rigid());
    (k_cont, k_rig)
}

/// Largest linearization error of each construction over the study range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// max |phi_exact - phi_linear| for the rigid constraint, rad.
    pub rigid_max: f64,
    /// max |phi_exact - phi_linear| for the continuum constraint, rad.
    pub continuum_max: f64,
}

/// Sweeps the arm rotation over the operational range and reports the
/// worst disagreement between the exact equilibrium and the small-angle
/// line `phi = -K theta`, per construction.
///
/// `n_points` are spaced evenly over the closed range; at least 10 are
/// required so the sweep cannot silently miss the large-rotation ends
/// where the error peaks.
pub fn approximation_error_sweep(
    params: &ArmStudyParams,
    n_points: usize,
) -> Result<SweepReport, AnalysisError> {
    approximation_error_sweep_over(params, n_points, STUDY_ROTATION_MAX)
}

/// [`approximation_error_sweep`] restricted to `|theta| <= half_range`.
pub fn approximation_error_sweep_over(
    params: &ArmStudyParams,
    n_points: usize,
    half_range: f64,
) -> Result<SweepReport, AnalysisError> {
    if n_points < 10 {
        return Err(AnalysisError::OutOfRange {
            what: "sweep point count",
            value: n_points as f64,
            min: 10.0,
            max: f64::MAX,
        });
    }
    if !(half_range > 0.0 && half_range <= STUDY_ROTATION_MAX * (1.0 + 1e-12)) {
        return Err(AnalysisError::OutOfRange {
            what: "sweep half range",
            value: half_range,
            min: 0.0,
            max: STUDY_ROTATION_MAX,
        });
    }
    let (k_cont, k_rig) = linear_gains(params);
    let mut report = SweepReport {
        rigid_max: 0.0,
        continuum_max: 0.0,
    };
    for i in 0..n_points {
        let theta = -half_range + 2.0 * half_range * i as f64 / (n_points - 1) as f64;
        let rigid = equilibrium_exact(theta, params, ArmKind::Rigid)?;
        let cont = equilibrium_exact(theta, params, ArmKind::Continuum)?;
        report.rigid_max = report.rigid_max.max((rigid + k_rig * theta).abs());
        report.continuum_max = report.continuum_max.max((cont + k_cont * theta).abs());
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Cumulative RMSE
// ---------------------------------------------------------------------------

/// Which accumulation the cumulative-error curve uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CumRmseKind {
    /// At index k, the sum over j <= k of RMSE over samples 0..=j: a "sum
    /// of RMSE over time". Grows linearly under constant error, which is
    /// the reading the comparison plots use.
    #[default]
    SumOfRunning,
    /// At index k, just the RMSE over samples 0..=k. Saturates under
    /// constant error; kept selectable because the name alone does not pin
    /// the accumulation down.
    Running,
}

/// Cumulative RMSE of a uniformly sampled series against a constant
/// reference, in the default [`CumRmseKind::SumOfRunning`] sense.
pub fn cum_rmse(series: &[f64], reference: f64) -> Result<Vec<f64>, AnalysisError> {
    cum_rmse_with(series, reference, CumRmseKind::SumOfRunning)
}

/// Cumulative RMSE with an explicit accumulation kind.
pub fn cum_rmse_with(
    series: &[f64],
    reference: f64,
    kind: CumRmseKind,
) -> Result<Vec<f64>, AnalysisError> {
    if series.is_empty() {
        return Err(AnalysisError::EmptySeries);
    }
    let mut out = Vec::with_capacity(series.len());
    let mut sum_sq = 0.0;
    let mut accumulated = 0.0;
    for (k, value) in series.iter().enumerate() {
        let error = value - reference;
        sum_sq += error * error;
        let running = (sum_sq / (k + 1) as f64).sqrt();
        match kind {
            CumRmseKind::SumOfRunning => {
                accumulated += running;
                out.push(accumulated);
            }
            CumRmseKind::Running => out.push(running),
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Electrical power model
// ---------------------------------------------------------------------------

/// Nominal battery voltage used to convert electrical energy to battery
/// drain, V. Two lithium-polymer cells in series.
pub const DEFAULT_BATTERY_VOLTS: f64 = 7.4;

/// Electrical power as a function of actuation effort.
///
/// `P = idle + c_T * sum_i F_i^(3/2) + c_M * duty`: propeller power follows
/// momentum theory's three-halves law in thrust, summed over propellers;
/// the cable-drive motors contribute proportionally to their speed duty
/// (0 = parked, 1 = both motors at full speed); the idle term covers the
/// controller board and receivers. The coefficients are representative of
/// the electronics stack and are config-overridable; endurance scenarios
/// replace `thrust_coeff` by calibration against a stated battery-drain
/// rate, after which only ratios between runs carry meaning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerModel {
    /// Constant electronics draw, W.
    pub idle_w: f64,
    /// Propeller coefficient, W per N^(3/2).
    pub thrust_coeff: f64,
    /// Arm-drive coefficient, W at full duty.
    pub arm_coeff: f64,
    /// Battery voltage for drain-rate conversions, V.
    pub battery_volts: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            idle_w: 0.8,
            thrust_coeff: 150.0,
            arm_coeff: 0.3,
            battery_volts: DEFAULT_BATTERY_VOLTS,
        }
    }
}

impl PowerModel {
    /// Instantaneous power, W, for a thrust term `sum_i F_i^(3/2)` (N^1.5)
    /// and an arm duty in [0, 1].
    pub fn power(&self, thrust_pow: f64, duty: f64) -> f64 {
        self.idle_w + self.thrust_coeff * thrust_pow + self.arm_coeff * duty
    }

    /// Mean power, W, that drains the battery at `mah_per_min`.
    pub fn drain_watts(&self, mah_per_min: f64) -> f64 {
        mah_per_min * 0.06 * self.battery_volts
    }
}

/// How a scenario obtains its power model: fixed coefficients, or a
/// thrust coefficient solved so the run's mean power matches a stated
/// battery-drain rate exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum PowerDirective {
    /// Use the given coefficients as-is.
    Fixed(PowerModel),
    /// Solve `thrust_coeff` from the run's mean actuation so the mean
    /// power equals `target_mah_per_min * 0.06 * battery_volts`.
    Calibrate {
        /// Battery drain to reproduce, mAh/min.
        target_mah_per_min: f64,
        /// Idle draw held fixed during calibration, W.
        #[serde(default = "default_idle_w")]
        idle_w: f64,
        /// Arm-drive coefficient held fixed during calibration, W.
        #[serde(default = "default_arm_coeff")]
        arm_coeff: f64,
        /// Battery voltage, V.
        #[serde(default = "default_battery_volts")]
        battery_volts: f64,
    },
}

fn default_idle_w() -> f64 {
    PowerModel::default().idle_w
}

fn default_arm_coeff() -> f64 {
    PowerModel::default().arm_coeff
}

fn default_battery_volts() -> f64 {
    DEFAULT_BATTERY_VOLTS
}

impl Default for PowerDirective {
    fn default() -> Self {
        PowerDirective::Fixed(PowerModel::default())
    }
}

impl PowerDirective {
    /// Resolves the directive into concrete coefficients given the run's
    /// mean thrust term and mean arm duty.
    pub fn resolve(&self, mean_thrust_pow: f64, mean_duty: f64) -> Result<PowerModel, AnalysisError> {
        match *self {
            PowerDirective::Fixed(model) => Ok(model),
            PowerDirective::Calibrate {
                target_mah_per_min,
                idle_w,
                arm_coeff,
                battery_volts,
            } => {
                let target_w = target_mah_per_min * 0.06 * battery_volts;
                let residual_w = target_w - idle_w - arm_coeff * mean_duty;
                if mean_thrust_pow <= 1e-12 {
                    return Err(AnalysisError::CalibrationInfeasible {
                        detail: format!(
                            "run has no thrust activity (mean thrust term {mean_thrust_pow:.3e} N^1.5)"
                        ),
                    });
                }
                if residual_w <= 0.0 {
                    return Err(AnalysisError::CalibrationInfeasible {
                        detail: format!(
                            "target {target_mah_per_min} mAh/min ({target_w:.3} W) does not exceed \
                             the fixed terms ({:.3} W)",
                            idle_w + arm_coeff * mean_duty
                        ),
                    });
                }
                Ok(PowerModel {
                    idle_w,
                    thrust_coeff: residual_w / mean_thrust_pow,
                    arm_coeff,
                    battery_volts,
                })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Trajectory metrics
// ---------------------------------------------------------------------------

/// Spacing between the three points of each discrete-curvature estimate,
/// s. Wide enough to suppress sampling noise on slow flights; narrower
/// logs use their own sample interval instead.
pub const CURVATURE_POINT_SPACING: f64 = 0.5;

/// A path shorter than this is treated as "did not move", m.
pub const DEGENERATE_PATH_LENGTH: f64 = 1e-6;

/// Endurance-comparison metrics of one logged flight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Logged duration, s.
    pub duration: f64,
    /// Polyline length of the flown path, m.
    pub path_length: f64,
    /// Sample standard deviation of the horizontal speed, m/s.
    pub horizontal_speed_std: f64,
    /// Sample standard deviation of the vertical speed, m/s.
    pub vertical_speed_std: f64,
    /// Mean of the discrete path curvature, 1/m.
    pub curvature_mean: f64,
    /// Sample standard deviation of the discrete path curvature, 1/m.
    pub curvature_std: f64,
    /// Battery drain rate implied by the logged energy, mAh/min.
    pub power_rate_mah_per_min: f64,
    /// Energy spent per meter of path, mWh/m.
    pub specific_energy_mwh_per_m: f64,
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    var.sqrt()
}

/// Curvature of the circle through three planar points (the Menger
/// curvature): `4 * area / (a b c)`. Zero for collinear points; `None`
/// when two points coincide and the circle is undefined.
fn menger_curvature(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> Option<f64> {
    let a = ((p1.0 - p0.0).powi(2) + (p1.1 - p0.1).powi(2)).sqrt();
    let b = ((p2.0 - p1.0).powi(2) + (p2.1 - p1.1).powi(2)).sqrt();
    let c = ((p2.0 - p0.0).powi(2) + (p2.1 - p0.1).powi(2)).sqrt();
    if a < 1e-9 || b < 1e-9 || c < 1e-9 {
        return None;
    }
    let twice_area =
        ((p1.0 - p0.0) * (p2.1 - p0.1) - (p2.0 - p0.0) * (p1.1 - p0.1)).abs();
    Some(2.0 * twice_area / (a * b * c))
}

/// Computes the endurance metrics of a logged flight.
///
/// Speeds are read from the logged inertial velocity: horizontal is the
/// magnitude in the ground plane, vertical is the signed downward
/// component. Curvature is estimated on the horizontal projection from
/// point triples [`CURVATURE_POINT_SPACING`] apart, each fit with its
/// circumscribed circle; three points on an exact circle recover its
/// radius exactly, so the estimator has zero bias on steady turns.
/// Energy figures come from the log's accumulated energy column and
/// [`DEFAULT_BATTERY_VOLTS`].
pub fn trajectory_metrics(log: &TrajectoryLog) -> Result<MetricsReport, AnalysisError> {
    let records = &log.records;
    if records.len() < 3 {
        return Err(AnalysisError::DegenerateTrajectory {
            detail: "metrics need at least 3 samples",
        });
    }
    let duration = records[records.len() - 1].time - records[0].time;

    let mut path_length = 0.0;
    for pair in records.windows(2) {
        path_length += (pair[1].position - pair[0].position).norm();
    }
    if path_length < DEGENERATE_PATH_LENGTH {
        return Err(AnalysisError::DegenerateTrajectory {
            detail: "path length below the degeneracy threshold",
        });
    }

    let horizontal: Vec<f64> = records
        .iter()
        .map(|r| (r.velocity.x * r.velocity.x + r.velocity.y * r.velocity.y).sqrt())
        .collect();
    let vertical: Vec<f64> = records.iter().map(|r| r.velocity.z).collect();

    let stride = ((CURVATURE_POINT_SPACING / log.sample_interval).round() as usize).max(1);
    let mut curvatures = Vec::new();
    let mut center = stride;
    while center + stride < records.len() {
        let p0 = records[center - stride].position;
        let p1 = records[center].position;
        let p2 = records[center + stride].position;
        if let Some(kappa) = menger_curvature((p0.x, p0.y), (p1.x, p1.y), (p2.x, p2.y)) {
            curvatures.push(kappa);
        }
        center += stride;
    }
    let curvature_mean = if curvatures.is_empty() {
        0.0
    } else {
        curvatures.iter().sum::<f64>() / curvatures.len() as f64
    };

    let energy_mwh = records[records.len() - 1].energy_mwh;
    let minutes = duration / 60.0;
    let power_rate = if minutes > 0.0 {
        energy_mwh / DEFAULT_BATTERY_VOLTS / minutes
    } else {
        0.0
    };

    Ok(MetricsReport {
        duration,
        path_length,
        horizontal_speed_std: sample_std(&horizontal),
        vertical_speed_std: sample_std(&vertical),
        curvature_mean,
        curvature_std: sample_std(&curvatures),
        power_rate_mah_per_min: power_rate,
        specific_energy_mwh_per_m: energy_mwh / path_length,
    })
}

// ---------------------------------------------------------------------------
// Repeatability statistics
// ---------------------------------------------------------------------------

/// Scale from one-standard-deviation axes to the plotted coverage ellipse.
///
/// The squared Mahalanobis radius of a bivariate normal is chi-square with
/// two degrees of freedom, whose 0.95 quantile is `-2 ln(0.05)`; the
/// square root is this factor. A literal two-sigma ellipse would cover
/// only 86.5% in two dimensions, so the "two-sigma-class" ellipse is drawn
/// at this radius to actually hold 95% of samples.
pub const ELLIPSE_COVERAGE_SCALE: f64 = 2.447746830680816;

/// Covariance ellipse of one waypoint's attitude scatter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageEllipse {
    /// Semi-axis along the principal scatter direction, rad.
    pub semi_major: f64,
    /// Semi-axis across it, rad.
    pub semi_minor: f64,
    /// Angle of the major axis from the pitch axis, rad, in (-pi/2, pi/2].
    pub orientation: f64,
}

/// Per-waypoint attitude statistics across repeated runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaypointStats {
    /// Mean pitch across runs, rad.
    pub mean_pitch: f64,
    /// Mean roll across runs, rad.
    pub mean_roll: f64,
    /// Sample standard deviation of pitch, rad.
    pub sigma_pitch: f64,
    /// Sample standard deviation of roll, rad.
    pub sigma_roll: f64,
    /// 95%-coverage ellipse of the (pitch, roll) scatter.
    pub ellipse: CoverageEllipse,
}

/// Attitude scatter statistics per waypoint over repeated runs.
///
/// `runs[r][w]` is the `(pitch, roll)` attitude run `r` reached at
/// waypoint `w`. Every run must visit the same waypoints. The ellipse axes
/// are the square roots of the covariance eigenvalues scaled by
/// [`ELLIPSE_COVERAGE_SCALE`]; identical runs produce zero deviations and
/// a degenerate (zero-axis) ellipse.
pub fn repeatability_stats(
    runs: &[Vec<(f64, f64)>],
) -> Result<Vec<WaypointStats>, AnalysisError> {
    if runs.len() < 2 {
        return Err(AnalysisError::InsufficientRuns { got: runs.len() });
    }
    let n_waypoints = runs[0].len();
    for (index, run) in runs.iter().enumerate() {
        if run.len() != n_waypoints {
            return Err(AnalysisError::MismatchedWaypoints {
                run: index,
                got: run.len(),
                expected: n_waypoints,
            });
        }
    }
    let n = runs.len() as f64;
    let mut out = Vec::with_capacity(n_waypoints);
    for w in 0..n_waypoints {
        let mean_pitch = runs.iter().map(|r| r[w].0).sum::<f64>() / n;
        let mean_roll = runs.iter().map(|r| r[w].1).sum::<f64>() / n;
        // Sample covariance of the (pitch, roll) pairs.
        let mut cov_pp = 0.0;
        let mut cov_rr = 0.0;
        let mut cov_pr = 0.0;
        for run in runs {
            let dp = run[w].0 - mean_pitch;
            let dr = run[w].1 - mean_roll;
            cov_pp += dp * dp;
            cov_rr += dr * dr;
            cov_pr += dp * dr;
        }
        cov_pp /= n - 1.0;
        cov_rr /= n - 1.0;
        cov_pr /= n - 1.0;

        // Eigen-decomposition of the symmetric 2x2 covariance in closed
        // form; the discriminant is nonnegative by symmetry.
        let half_trace = 0.5 * (cov_pp + cov_rr);
        let disc = (0.25 * (cov_pp - cov_rr) * (cov_pp - cov_rr) + cov_pr * cov_pr).sqrt();
        let lambda_major = (half_trace + disc).max(0.0);
        let lambda_minor = (half_trace - disc).max(0.0);
        let orientation = if disc < 1e-300 {
            0.0
        } else {
            let raw = 0.5 * (2.0 * cov_pr).atan2(cov_pp - cov_rr);
            // Normalize into (-pi/2, pi/2].
            if raw <= -std::f64::consts::FRAC_PI_2 {
                raw + std::f64::consts::PI
            } else if raw > std::f64::consts::FRAC_PI_2 {
                raw - std::f64::consts::PI
            } else {
                raw
            }
        };

        out.push(WaypointStats {
            mean_pitch,
            mean_roll,
            sigma_pitch: cov_pp.sqrt(),
            sigma_roll: cov_rr.sqrt(),
            ellipse: CoverageEllipse {
                semi_major: ELLIPSE_COVERAGE_SCALE * lambda_major.sqrt(),
                semi_minor: ELLIPSE_COVERAGE_SCALE * lambda_minor.sqrt(),
                orientation,
            },
        });
    }
    Ok(out)
}
