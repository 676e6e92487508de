//! Rigid-body motion of a buoyant vehicle carrying a movable internal mass.
//!
//! The vehicle is modelled as two mass lumps rigidly attached to a common
//! frame whose origin sits at the center of buoyancy (CB): a stationary lump
//! `m0` (envelope, wings, electronics) with fixed offset `r0` and a
//! distributed inertia `J` taken about CB, plus a movable lump `ma` (the
//! continuum arm and its payload) whose offset `ra` follows the arm
//! configuration. Buoyancy acts at CB, gravity at each lump, aerodynamic
//! loads come from [`crate::aero`], and the propeller pushes along body x
//! from the arm mount plate below CB.
//!
//! Frames: inertial z points down (gravity along +z), the body frame has x
//! forward, y starboard, z down, and attitude is roll-pitch-yaw so the
//! body-to-inertial rotation is `Rz(psi)*Ry(theta)*Rx(phi)`.
//!
//! The translational balance is written in the inertial frame and the
//! rotational balance about CB in the body frame. Collecting accelerations on
//! the left gives a symmetric 6x6 generalized mass matrix whose off-diagonal
//! blocks carry the CB-to-CG coupling; it is provably invertible for positive
//! masses, so each [`derivative`] call solves one dense 6x6 system.

use nalgebra::{Matrix3, Matrix6, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use thiserror::Error;

use crate::aero::{aero_wrench, AeroModel};
use crate::arm::{clamp_to_workspace, tip_from_q, tip_jacobian, ArmSpec};
use crate::NEWTON_PER_GRAM_FORCE;

/// Margin (rad) kept between |pitch| and the pi/2 singularity of the
/// Euler-rate map. The attitude domain of interest stays well inside
/// +-90 deg, so the guard only protects the secant from blowing up.
pub const GIMBAL_MARGIN: f64 = 1e-3;

/// Default integrator step. One millisecond resolves the fastest natural
/// mode of the stock vehicle (pendulum-like pitching near 3 rad/s) by three
/// orders of magnitude, which keeps 10 s energy drift near 1e-9 relative.
pub const DEFAULT_TIMESTEP: f64 = 1e-3;

/// Largest accepted integrator step. Beyond roughly 10 ms the classical
/// fourth-order scheme still converges on this system but the commanded
/// actuation is sampled too coarsely to trust closed-loop results.
pub const MAX_TIMESTEP: f64 = 1e-2;

/// Condition-number bound used by [`mass_matrix_checked`]. The generalized
/// mass matrix of any physically valid parameter set stays many orders of
/// magnitude below this; crossing it indicates corrupted inputs rather than
/// a stiff vehicle.
pub const MAX_MASS_MATRIX_CONDITION: f64 = 1e12;

const TRIM_DAMPING: f64 = 0.5;
const TRIM_PSEUDO_STEP: f64 = 0.05;
const TRIM_MAX_ITERATIONS: usize = 50_000;
const TRIM_TOLERANCE: f64 = 1e-8;
/// A floating equilibrium requires the buoyancy to carry nearly all of the
/// weight; a net load above this fraction of the buoyant force would only
/// balance aerodynamically at descent speeds outside the model's envelope.
const TRIM_FEASIBILITY_MARGIN: f64 = 0.1;

#[derive(Debug, Error)]
pub enum DynamicsError {
    /// The Euler-rate map loses rank as |pitch| approaches pi/2.
    #[error("pitch {pitch:.4} rad is within {margin:.0e} rad of the attitude-rate singularity at pi/2")]
    GimbalProximity { pitch: f64, margin: f64 },
    /// A derivative evaluation produced NaN or infinity.
    #[error("non-finite value produced while evaluating {context}")]
    NonFinite { context: &'static str },
    /// Step size outside (0, MAX_TIMESTEP].
    #[error("time step {dt} s outside (0, {max} s]")]
    InvalidTimestep { dt: f64, max: f64 },
    /// The 6x6 generalized mass matrix failed to solve or is too badly
    /// conditioned to trust. Theory guarantees invertibility for valid
    /// parameters, so this is a diagnostic for corrupted inputs.
    #[error("generalized mass matrix conditioning {condition:.3e} exceeds {bound:.3e}")]
    NumericalConditioning { condition: f64, bound: f64 },
    /// The damped march failed to reach an equilibrium.
    #[error("no equilibrium found: residual {residual:.3e} after {iterations} iterations")]
    NoTrimFound { residual: f64, iterations: usize },
    /// One or more parameter invariants are violated; the message lists all
    /// of them.
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
}

/// Mass, geometry, and force model of the vehicle.
///
/// The arm mount plate carries both the arm base and the propeller, so a
/// single depth below CB (stored in [`ArmSpec::base_offset`], exposed as
/// [`VehicleParams::mount_depth`]) serves as the arm-base offset and the
/// thrust moment arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Stationary mass `m0` in kg: envelope, wings, and fixed electronics.
    pub stationary_mass: f64,
    /// Moving mass `ma` in kg: the continuum arm with gripper and battery.
    pub moving_mass: f64,
    /// Body-frame offset of the stationary-mass lump from CB, m.
    pub stationary_offset: Vector3<f64>,
    /// Inertia of the stationary mass about CB, kg m^2.
    pub inertia: Matrix3<f64>,
    /// Buoyant lift in newtons (helium volume times air-helium density
    /// difference times g, stored pre-multiplied).
    pub buoyancy: f64,
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
    /// Aerodynamic force and moment model.
    pub aero: AeroModel,
    /// Continuum-arm geometry and drive parameters.
    pub arm: ArmSpec,
}

impl Default for VehicleParams {
    /// Prototype values: measured masses and buoyancy, CAD-derived inertia.
    fn default() -> Self {
        VehicleParams {
            stationary_mass: 0.10869,
            moving_mass: 0.09221,
            stationary_offset: Vector3::zeros(),
            inertia: Matrix3::from_diagonal(&Vector3::new(0.035, 0.020, 0.015)),
            buoyancy: 194.23 * NEWTON_PER_GRAM_FORCE,
            gravity: 9.81,
            aero: AeroModel::default(),
            arm: ArmSpec::default(),
        }
    }
}

impl VehicleParams {
    /// Total vehicle mass `m0 + ma` in kg.
    pub fn total_mass(&self) -> f64 {
        self.stationary_mass + self.moving_mass
    }

    /// Depth of the arm mount plate (and the propeller it carries) below CB.
    pub fn mount_depth(&self) -> f64 {
        self.arm.base_offset
    }

    /// Weight minus buoyancy, N. Positive means the vehicle sinks unaided.
    pub fn net_weight(&self) -> f64 {
        self.total_mass() * self.gravity - self.buoyancy
    }

    /// First moment of mass about CB for a given arm-mass offset, kg m.
    pub fn mass_moment(&self, ra: &Vector3<f64>) -> Vector3<f64> {
        self.stationary_mass * self.stationary_offset + self.moving_mass * ra
    }

    /// Body-frame offset of the moving mass: mount depth below CB plus the
    /// arm tip position for the given cable-deviation pair.
    pub fn arm_mass_offset(&self, q_arm: &Vector2<f64>) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.mount_depth())
            + tip_from_q(*q_arm, self.arm.length, self.arm.cable_offset)
    }

    /// Checks every parameter invariant and reports all violations at once,
    /// so a config file with several mistakes needs only one round trip.
    pub fn validated(self) -> Result<Self, DynamicsError> {
        let mut violations = Vec::new();
        if !(self.stationary_mass > 0.0) {
            violations.push(format!(
                "stationary_mass must be positive, got {}",
                self.stationary_mass
            ));
        }
        if !(self.moving_mass > 0.0) {
            violations.push(format!("moving_mass must be positive, got {}", self.moving_mass));
        }
        if !(self.buoyancy >= 0.0) {
            violations.push(format!("buoyancy must be nonnegative, got {}", self.buoyancy));
        }
        if !(self.gravity > 0.0) {
            violations.push(format!("gravity must be positive, got {}", self.gravity));
        }
        let asymmetry = (self.inertia - self.inertia.transpose()).norm();
        if !(asymmetry <= 1e-9) {
            violations.push(format!(
                "inertia tensor must be symmetric, asymmetry norm {asymmetry:.3e}"
            ));
        } else if nalgebra::Cholesky::new(self.inertia).is_none() {
            violations.push("inertia tensor must be positive definite".to_string());
        } else if self.stationary_mass > 0.0 {
            // The inertia is taken about CB, so by the parallel-axis rule it
            // must dominate the point-mass contribution of its own offset;
            // the remainder is the inertia about the stationary lump's CG,
            // which no real body can have negative. Mass-matrix
            // invertibility rests on this.
            let r0 = &self.stationary_offset;
            let shift = self.stationary_mass
                * (r0.norm_squared() * Matrix3::identity() - r0 * r0.transpose());
            let remainder = self.inertia - shift;
            if remainder.symmetric_eigenvalues().min() < -1e-9 {
                violations.push(
                    "inertia about CB must include the parallel-axis term of the \
                     stationary-mass offset"
                        .to_string(),
                );
            }
        }
        if !self.stationary_offset.iter().all(|c| c.is_finite()) {
            violations.push("stationary_offset must be finite".to_string());
        }
        if let Err(err) = self.arm.clone().validated() {
            violations.push(err.to_string());
        }
        if let Err(err) = self.aero.clone().validated() {
            violations.push(err.to_string());
        }
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(DynamicsError::InvalidParams(violations.join("; ")))
        }
    }
}

/// Integrated state of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    /// Inertial position of CB, m (z down).
    pub position: Vector3<f64>,
    /// Euler angles (roll, pitch, yaw), rad.
    pub attitude: Vector3<f64>,
    /// Inertial translational velocity of CB, m/s.
    pub velocity: Vector3<f64>,
    /// Body-frame angular velocity, rad/s.
    pub omega: Vector3<f64>,
    /// Arm cable-deviation pair (dx, dy), m.
    pub q_arm: Vector2<f64>,
}

impl BodyState {
    /// All-zero state: level attitude, straight arm, at the origin, at rest.
    pub fn at_rest() -> Self {
        BodyState {
            position: Vector3::zeros(),
            attitude: Vector3::zeros(),
            velocity: Vector3::zeros(),
            omega: Vector3::zeros(),
            q_arm: Vector2::zeros(),
        }
    }

    /// Euler advance by `dt` along `d`, used for integrator substages.
    fn advanced(&self, d: &StateDerivative, dt: f64) -> Self {
        BodyState {
            position: self.position + dt * d.dposition,
            attitude: self.attitude + dt * d.dattitude,
            velocity: self.velocity + dt * d.dvelocity,
            omega: self.omega + dt * d.domega,
            q_arm: self.q_arm + dt * d.dq_arm,
        }
    }
}

/// Commanded inputs held constant across one integrator step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuationCommand {
    /// Forward thrust along body x, N.
    pub thrust: f64,
    /// Arm cable-deviation rates (dx_dot, dy_dot), m/s.
    pub arm_rates: Vector2<f64>,
}

impl ActuationCommand {
    /// No thrust, arm held still.
    pub fn coast() -> Self {
        ActuationCommand {
            thrust: 0.0,
            arm_rates: Vector2::zeros(),
        }
    }
}

/// Time derivative of every [`BodyState`] field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub dposition: Vector3<f64>,
    pub dattitude: Vector3<f64>,
    pub dvelocity: Vector3<f64>,
    pub domega: Vector3<f64>,
    pub dq_arm: Vector2<f64>,
}

impl StateDerivative {
    fn is_finite(&self) -> bool {
        self.dposition.iter().all(|c| c.is_finite())
            && self.dattitude.iter().all(|c| c.is_finite())
            && self.dvelocity.iter().all(|c| c.is_finite())
            && self.domega.iter().all(|c| c.is_finite())
            && self.dq_arm.iter().all(|c| c.is_finite())
    }

    /// Classical fourth-order blend (k1 + 2 k2 + 2 k3 + k4) / 6.
    fn rk4_blend(k1: &Self, k2: &Self, k3: &Self, k4: &Self) -> Self {
        let w = 1.0 / 6.0;
        StateDerivative {
            dposition: w * (k1.dposition + 2.0 * k2.dposition + 2.0 * k3.dposition + k4.dposition),
            dattitude: w * (k1.dattitude + 2.0 * k2.dattitude + 2.0 * k3.dattitude + k4.dattitude),
            dvelocity: w * (k1.dvelocity + 2.0 * k2.dvelocity + 2.0 * k3.dvelocity + k4.dvelocity),
            domega: w * (k1.domega + 2.0 * k2.domega + 2.0 * k3.domega + k4.domega),
            dq_arm: w * (k1.dq_arm + 2.0 * k2.dq_arm + 2.0 * k3.dq_arm + k4.dq_arm),
        }
    }
}

/// Environmental inputs sampled at one position and time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnvSample {
    /// Inertial-frame wind velocity, m/s.
    pub wind: Vector3<f64>,
    /// Additional body-frame torque, N m. Used to inject calibrated
    /// disturbances when exercising the attitude controller, and by the
    /// comparison actuators (elevator, thrust triple) to apply their
    /// control moments.
    pub extra_torque: Vector3<f64>,
    /// Additional body-frame force, N. Zero for plain environments; the
    /// comparison actuators route their propeller forces through it.
    pub extra_force: Vector3<f64>,
}

/// Source of environmental samples along a trajectory. Implementations must
/// be pure functions of position and time so integrator substages can
/// resample without side effects.
pub trait Environment {
    fn sample(&self, position: &Vector3<f64>, time: f64) -> EnvSample;
}

/// Calm environment: no wind, no disturbance torque.
pub struct StillAir;

impl Environment for StillAir {
    fn sample(&self, _position: &Vector3<f64>, _time: f64) -> EnvSample {
        EnvSample::default()
    }
}

impl<F> Environment for F
where
    F: Fn(&Vector3<f64>, f64) -> EnvSample,
{
    fn sample(&self, position: &Vector3<f64>, time: f64) -> EnvSample {
        self(position, time)
    }
}

/// Warning flags raised while advancing one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepFlags {
    /// The integrated arm deviation left the reachable disc and was clamped.
    pub workspace_saturated: bool,
}

/// Body-to-inertial rotation for roll-pitch-yaw attitude:
/// `Rz(psi) * Ry(theta) * Rx(phi)`.
pub fn rotation_from_euler(attitude: &Vector3<f64>) -> Matrix3<f64> {
    let (sp, cp) = attitude.x.sin_cos();
    let (st, ct) = attitude.y.sin_cos();
    let (sy, cy) = attitude.z.sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cp, -sp, 0.0, sp, cp);
    let ry = Matrix3::new(ct, 0.0, st, 0.0, 1.0, 0.0, -st, 0.0, ct);
    let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
    rz * ry * rx
}

/// Map `P` from body angular velocity to Euler-angle rates, `deta = P w`.
///
/// Singular at |pitch| = pi/2; callers get an error once pitch comes within
/// [`GIMBAL_MARGIN`] of that, which the controller's attitude envelope never
/// approaches in normal operation.
pub fn euler_rate_matrix(attitude: &Vector3<f64>) -> Result<Matrix3<f64>, DynamicsError> {
    let (phi, theta) = (attitude.x, attitude.y);
    if theta.abs() >= FRAC_PI_2 - GIMBAL_MARGIN {
        return Err(DynamicsError::GimbalProximity {
            pitch: theta,
            margin: GIMBAL_MARGIN,
        });
    }
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let tt = st / ct;
    Ok(Matrix3::new(
        1.0,
        sp * tt,
        cp * tt,
        0.0,
        cp,
        -sp,
        0.0,
        sp / ct,
        cp / ct,
    ))
}

/// Rotational inertia of the whole vehicle about CB for a moving-mass offset
/// `ra`: the stationary inertia plus the point-mass contribution
/// `ma (|ra|^2 I - ra ra^T)`.
pub fn effective_inertia(inertia: &Matrix3<f64>, moving_mass: f64, ra: &Vector3<f64>) -> Matrix3<f64> {
    inertia + moving_mass * (ra.norm_squared() * Matrix3::identity() - ra * ra.transpose())
}

/// Generalized 6x6 mass matrix coupling inertial translational acceleration
/// and body angular acceleration.
///
/// Block layout, with `lg` the first mass moment and `J_eff` the effective
/// inertia:
///
/// ```text
/// [ (m0+ma) I      -R lg^x   ]
/// [ (R lg^x)^T      J_eff    ]
/// ```
///
/// The matrix is symmetric because the cross-product matrix is
/// antisymmetric, and positive definite for any positive masses, so the
/// acceleration solve in [`derivative`] cannot encounter a singular system
/// for valid parameters.
pub fn mass_matrix(params: &VehicleParams, rotation: &Matrix3<f64>, ra: &Vector3<f64>) -> Matrix6<f64> {
    let lg = params.mass_moment(ra);
    let j_eff = effective_inertia(&params.inertia, params.moving_mass, ra);
    let coupling = rotation * lg.cross_matrix();
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(params.total_mass() * Matrix3::identity()));
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-coupling));
    m.fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&(-coupling.transpose()));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&j_eff);
    m
}

/// [`mass_matrix`] plus a spectral condition-number diagnostic. The bound is
/// a corruption detector, not a tuning knob; see
/// [`MAX_MASS_MATRIX_CONDITION`].
pub fn mass_matrix_checked(
    params: &VehicleParams,
    rotation: &Matrix3<f64>,
    ra: &Vector3<f64>,
    bound: f64,
) -> Result<Matrix6<f64>, DynamicsError> {
    let m = mass_matrix(params, rotation, ra);
    let singular_values = m.svd(false, false).singular_values;
    let largest = singular_values.max();
    let smallest = singular_values.min();
    let condition = if smallest > 0.0 { largest / smallest } else { f64::INFINITY };
    if condition > bound {
        return Err(DynamicsError::NumericalConditioning { condition, bound });
    }
    Ok(m)
}

/// Time derivative of the full state under one command and one environment
/// sample.
///
/// Assembles the force and torque balance about CB and solves the 6x6
/// generalized mass system for the accelerations. The moving-mass rate
/// enters twice with the same shape, once in each balance: the tip velocity
/// `nu_a = Jacobian * q_rates` is rotated by the body spin, producing the
/// `-2 ma w x nu_a` force (expressed inertially through `R`) and the
/// `-2 ma ra x (w x nu_a)` torque.
pub fn derivative(
    state: &BodyState,
    cmd: &ActuationCommand,
    params: &VehicleParams,
    env: &EnvSample,
) -> Result<StateDerivative, DynamicsError> {
    let rotation = rotation_from_euler(&state.attitude);
    let rate_map = euler_rate_matrix(&state.attitude)?;
    let ra = params.arm_mass_offset(&state.q_arm);
    let j_eff = effective_inertia(&params.inertia, params.moving_mass, &ra);
    let lg = params.mass_moment(&ra);
    let mass = mass_matrix(params, &rotation, &ra);

    let v_air_body = rotation.transpose() * (state.velocity - env.wind);
    let wrench = aero_wrench(v_air_body, state.omega, &params.aero);

    let down = Vector3::z();
    let body_down = rotation.transpose() * down;

    // Force balance in the inertial frame. The first term is the transport
    // rate of the CB-to-CG momentum offset under body spin.
    let force = rotation * (state.omega.cross(&lg)).cross(&state.omega)
        + params.net_weight() * down
        + rotation * (wrench.force + env.extra_force);

    // Torque balance about CB in the body frame: gyroscopic transport of the
    // effective angular momentum, the hanging-mass gravity moment, the
    // aerodynamic moment, and any injected disturbance torque.
    let torque = (j_eff * state.omega).cross(&state.omega)
        + params.gravity * lg.cross(&body_down)
        + wrench.moment
        + env.extra_torque;

    let jacobian = tip_jacobian(state.q_arm, params.arm.length, params.arm.cable_offset);
    let nu_a = jacobian * cmd.arm_rates;
    let spin_coupling = state.omega.cross(&nu_a);
    let thrust_force = rotation.column(0) * cmd.thrust;
    let thrust_torque = Vector3::new(0.0, params.mount_depth() * cmd.thrust, 0.0);
    let mass_rate_force = -2.0 * params.moving_mass * (rotation * spin_coupling);
    let mass_rate_torque = -2.0 * params.moving_mass * ra.cross(&spin_coupling);

    let mut rhs = Vector6::zeros();
    rhs.fixed_rows_mut::<3>(0)
        .copy_from(&(force + thrust_force + mass_rate_force));
    rhs.fixed_rows_mut::<3>(3)
        .copy_from(&(torque + thrust_torque + mass_rate_torque));

    let solved = mass
        .lu()
        .solve(&rhs)
        .ok_or(DynamicsError::NumericalConditioning {
            condition: f64::INFINITY,
            bound: MAX_MASS_MATRIX_CONDITION,
        })?;

    let out = StateDerivative {
        dposition: state.velocity,
        dattitude: rate_map * state.omega,
        dvelocity: solved.fixed_rows::<3>(0).into_owned(),
        domega: solved.fixed_rows::<3>(3).into_owned(),
        dq_arm: cmd.arm_rates,
    };
    if !out.is_finite() {
        return Err(DynamicsError::NonFinite {
            context: "state derivative",
        });
    }
    Ok(out)
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(TAU);
    if wrapped > PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// Advances the state by one fixed step of the classical fourth-order
/// scheme.
///
/// The command is held constant across the step; the environment is
/// resampled at each substage position and time so spatially varying wind
/// retains full integrator accuracy. Yaw is wrapped into (-pi, pi] and the
/// arm deviation is clamped to its reachable disc afterwards, with the clamp
/// reported in [`StepFlags`] because a controller may legitimately request a
/// transient excursion.
pub fn step(
    state: &BodyState,
    cmd: &ActuationCommand,
    params: &VehicleParams,
    env: &impl Environment,
    time: f64,
    dt: f64,
) -> Result<(BodyState, StepFlags), DynamicsError> {
    if !(dt > 0.0 && dt <= MAX_TIMESTEP) {
        return Err(DynamicsError::InvalidTimestep {
            dt,
            max: MAX_TIMESTEP,
        });
    }
    let k1 = derivative(state, cmd, params, &env.sample(&state.position, time))?;
    let mid = state.advanced(&k1, 0.5 * dt);
    let k2 = derivative(&mid, cmd, params, &env.sample(&mid.position, time + 0.5 * dt))?;
    let mid = state.advanced(&k2, 0.5 * dt);
    let k3 = derivative(&mid, cmd, params, &env.sample(&mid.position, time + 0.5 * dt))?;
    let end = state.advanced(&k3, dt);
    let k4 = derivative(&end, cmd, params, &env.sample(&end.position, time + dt))?;

    let mut next = state.advanced(&StateDerivative::rk4_blend(&k1, &k2, &k3, &k4), dt);
    next.attitude.z = wrap_angle(next.attitude.z);
    let (clamped, saturated) = clamp_to_workspace(next.q_arm, params.arm.cable_offset);
    next.q_arm = clamped;
    Ok((
        next,
        StepFlags {
            workspace_saturated: saturated,
        },
    ))
}

/// Floating equilibrium with the arm frozen at `q_arm` and no thrust.
///
/// Fails fast when the net weight exceeds the feasibility margin, then runs
/// the damped march. The identified aerodynamic model carries small lateral
/// biases (nonzero side force and moments at zero sideslip), so a
/// non-neutral vehicle settles into a steady glide that may include a slow
/// turn; the march therefore judges convergence in the steady-motion sense,
/// see [`steady_residual`]. A neutrally buoyant vehicle comes to strict
/// rest.
pub fn static_trim(params: &VehicleParams, q_arm: Vector2<f64>) -> Result<BodyState, DynamicsError> {
    if params.net_weight().abs() > TRIM_FEASIBILITY_MARGIN * params.buoyancy {
        return Err(DynamicsError::NoTrimFound {
            residual: f64::INFINITY,
            iterations: 0,
        });
    }
    march_to_equilibrium(params, q_arm, 0.0, false)
}

/// Powered equilibrium in the vehicle's symmetry plane: constant thrust,
/// arm frozen at `q_arm`.
///
/// Because the identified model's lateral biases make unconstrained powered
/// flight settle into a slow spiral, this routine solves the longitudinal
/// problem instead: roll, yaw, and the lateral velocities are held on the
/// symmetry plane while pitch and the in-plane velocities relax. That is
/// the quantity of interest when calibrating the aerodynamic scale against
/// a cruise speed and when comparing steady pitch authority between
/// actuation schemes.
pub fn steady_cruise(
    params: &VehicleParams,
    q_arm: Vector2<f64>,
    thrust: f64,
) -> Result<BodyState, DynamicsError> {
    march_to_equilibrium(params, q_arm, thrust, true)
}

/// Residual that vanishes exactly on steady motions: body-frame translational
/// acceleration, angular acceleration, and roll/pitch rates. Yaw rate and
/// position drift are excluded because gravity and still air are symmetric
/// under heading and translation, so steady turns, glides, and cruises are
/// legitimate trim solutions. For a strict rest equilibrium this reduces to
/// the plain derivative norm.
pub fn steady_residual(state: &BodyState, d: &StateDerivative) -> f64 {
    let rotation = rotation_from_euler(&state.attitude);
    let nu = rotation.transpose() * state.velocity;
    let dnu = rotation.transpose() * d.dvelocity - state.omega.cross(&nu);
    dnu.norm() + d.domega.norm() + d.dattitude.xy().norm()
}

/// Damped fixed-point march on the derivative in yaw-reduced body
/// coordinates: body-frame velocity, rotation rate, and roll/pitch are
/// relaxed along their own rates with position and heading frozen. Gravity
/// and still air are symmetric under heading, so yaw is cyclic and the
/// reduced system is autonomous; its genuine fixed points are exactly the
/// steady motions (rest, glide, cruise, turn). Marching the inertial
/// velocity instead would orbit a steady turn forever and stall at a
/// step-size-dependent residual floor.
///
/// Two refinements keep the worst cases inside the iteration budget. An
/// exactly neutral unpowered vehicle approaches rest only algebraically
/// (quadratic drag has no linear slope at zero speed), so that case adds a
/// velocity relaxation toward the known rest solution, which does not move
/// the fixed point. In longitudinal mode the lateral states are projected
/// onto the symmetry plane every iteration and lateral residuals are
/// ignored, yielding the in-plane cruise despite the model's lateral biases.
fn march_to_equilibrium(
    params: &VehicleParams,
    q_arm: Vector2<f64>,
    thrust: f64,
    longitudinal: bool,
) -> Result<BodyState, DynamicsError> {
    let cmd = ActuationCommand {
        thrust,
        arm_rates: Vector2::zeros(),
    };
    let still = EnvSample::default();
    let mut state = BodyState::at_rest();
    let (clamped, _) = clamp_to_workspace(q_arm, params.arm.cable_offset);
    state.q_arm = clamped;
    let mut nu = Vector3::zeros();

    let gain = TRIM_DAMPING * TRIM_PSEUDO_STEP;
    // Rest is the exact solution for a neutral unpowered vehicle, so the
    // relaxation below is fixed-point preserving; 2 per pseudo-second
    // outpaces the algebraic drag tail by hundreds of e-folds.
    let relax_velocity = thrust == 0.0 && params.net_weight().abs() < 1e-12;
    let mut residual = f64::INFINITY;
    for iteration in 0..TRIM_MAX_ITERATIONS {
        let rotation = rotation_from_euler(&state.attitude);
        state.velocity = rotation * nu;
        let d = match derivative(&state, &cmd, params, &still) {
            Ok(d) => d,
            Err(_) => {
                return Err(DynamicsError::NoTrimFound {
                    residual,
                    iterations: iteration,
                })
            }
        };
        let dnu = rotation.transpose() * d.dvelocity - state.omega.cross(&nu);
        residual = if longitudinal {
            Vector2::new(dnu.x, dnu.z).norm() + d.domega.y.abs() + d.dattitude.y.abs()
        } else {
            dnu.norm() + d.domega.norm() + d.dattitude.xy().norm()
        };
        if residual < TRIM_TOLERANCE {
            return Ok(state);
        }
        nu += gain * dnu;
        state.omega += gain * d.domega;
        state.attitude.x += gain * d.dattitude.x;
        state.attitude.y += gain * d.dattitude.y;
        if relax_velocity {
            nu *= 1.0 - 2.0 * gain;
        }
        if longitudinal {
            nu.y = 0.0;
            state.omega.x = 0.0;
            state.omega.z = 0.0;
            state.attitude.x = 0.0;
        }
    }
    Err(DynamicsError::NoTrimFound {
        residual,
        iterations: TRIM_MAX_ITERATIONS,
    })
}

/// Total mechanical energy: kinetic energy of both mass lumps (the
/// stationary lump keeps its distributed inertia about CB) plus
/// gravitational and buoyant potential. With zero aerodynamics, zero thrust,
/// and a frozen arm this is an exact invariant of the equations of motion,
/// which makes it the reference oracle for integrator accuracy.
pub fn mechanical_energy(state: &BodyState, arm_rates: &Vector2<f64>, params: &VehicleParams) -> f64 {
    let rotation = rotation_from_euler(&state.attitude);
    let ra = params.arm_mass_offset(&state.q_arm);
    let jacobian = tip_jacobian(state.q_arm, params.arm.length, params.arm.cable_offset);
    let nu_a = jacobian * arm_rates;

    let spin = 0.5 * state.omega.dot(&(params.inertia * state.omega));
    let carrier = 0.5 * params.stationary_mass * state.velocity.norm_squared()
        + params.stationary_mass
            * state
                .velocity
                .dot(&(rotation * state.omega.cross(&params.stationary_offset)));
    let mover_velocity = state.velocity + rotation * (state.omega.cross(&ra) + nu_a);
    let mover = 0.5 * params.moving_mass * mover_velocity.norm_squared();

    // Inertial z points down, so potential energy decreases as z grows for
    // weight and increases for buoyancy.
    let stationary_z = (state.position + rotation * params.stationary_offset).z;
    let mover_z = (state.position + rotation * ra).z;
    let potential = -params.stationary_mass * params.gravity * stationary_z
        - params.moving_mass * params.gravity * mover_z
        + params.buoyancy * state.position.z;

    spin + carrier + mover + potential
}
