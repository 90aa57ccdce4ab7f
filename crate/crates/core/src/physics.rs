//! Wheel/ground plant and differential-drive kinematics.
//!
//! The two simulated wheels are the right and left motor sides. Each physics
//! step first solves the rigid-body no-slip accelerations of both sides, turns
//! them into per-wheel rolling targets `omega_ref`, and then advances each
//! wheel with the friction-limited update in [`step_wheel`]. While the
//! longitudinal force stays inside the friction cone the wheel follows the
//! rolling target exactly; when it saturates the residual torque spins the
//! wheel (slip). Chassis velocities always come from the wheel speeds.

use thiserror::Error;

use crate::geometry::{normalize_angle, Pose};
use crate::noise::{GaussianStream, Stream};
use crate::world::{sector_at, TerrainSample, World, WorldError};
use crate::GRAVITY;

/// Physics integration step (s).
pub const PHYSICS_DT: f64 = 0.005;

/// Wheel speed below which rolling resistance is scaled down linearly (rad/s).
const ROLLING_DEADBAND: f64 = 0.05;

#[derive(Debug, Error)]
pub enum PhysicsError {
    #[error("non-finite {quantity} in the plant update")]
    NonFinite { quantity: &'static str },
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
    #[error("viscous friction b must be positive for the first-order motor model")]
    ZeroFriction,
    #[error(transparent)]
    World(#[from] WorldError),
}

pub type Result<T> = std::result::Result<T, PhysicsError>;

#[derive(Debug, Clone, PartialEq)]
pub struct RobotParams {
    pub wheel_radius: f64,
    pub wheel_separation: f64,
    pub chassis_mass: f64,
    pub wheel_mass: f64,
    pub robot_mass: f64,
    pub wheel_count: u32,
    pub motor_inertia: f64,
    pub viscous_friction: f64,
    pub torque_constant: f64,
    /// Rotational inertia of one wheel side (kg·m²).
    pub wheel_inertia: f64,
    pub tau_max: f64,
    pub v_max: f64,
    pub omega_max: f64,
    /// Chassis footprint used for the yaw inertia (m).
    pub chassis_length: f64,
    pub chassis_width: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            wheel_radius: 0.165,
            wheel_separation: 0.555,
            chassis_mass: 65.0,
            wheel_mass: 2.5,
            robot_mass: 75.0,
            wheel_count: 4,
            motor_inertia: 2.22,
            viscous_friction: 0.75,
            torque_constant: 1.0,
            wheel_inertia: 2.22,
            tau_max: 400.0,
            v_max: 1.0,
            omega_max: 3.2,
            chassis_length: 0.99,
            chassis_width: 0.67,
        }
    }
}

impl RobotParams {
    /// Mass carried by each wheel, m_pw = (m_robot + m_pl) / nW.
    pub fn mass_per_wheel(&self, payload: f64) -> f64 {
        (self.robot_mass + payload) / self.wheel_count as f64
    }

    pub fn total_mass(&self, payload: f64) -> f64 {
        self.robot_mass + payload
    }

    /// Yaw inertia of the loaded chassis modelled as a uniform box.
    pub fn yaw_inertia(&self, payload: f64) -> f64 {
        self.total_mass(payload) * (self.chassis_length.powi(2) + self.chassis_width.powi(2)) / 12.0
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let positive = [
            ("wheel_radius", self.wheel_radius),
            ("wheel_separation", self.wheel_separation),
            ("chassis_mass", self.chassis_mass),
            ("wheel_mass", self.wheel_mass),
            ("robot_mass", self.robot_mass),
            ("motor_inertia", self.motor_inertia),
            ("wheel_inertia", self.wheel_inertia),
            ("tau_max", self.tau_max),
            ("v_max", self.v_max),
            ("omega_max", self.omega_max),
            ("chassis_length", self.chassis_length),
            ("chassis_width", self.chassis_width),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(1..=4).contains(&self.wheel_count) {
            return Err(format!("wheel_count must be in 1..=4, got {}", self.wheel_count));
        }
        if !(self.viscous_friction >= 0.0) {
            return Err("viscous_friction must be >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WheelState {
    pub omega: f64,
    /// Rolling-speed target for the end of the current step (rad/s).
    pub omega_ref: f64,
    pub lateral_accel: f64,
    pub applied_torque: f64,
    pub slope_torque_actual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RobotState {
    pub pose: Pose,
    pub right: WheelState,
    pub left: WheelState,
    pub v: f64,
    pub omega: f64,
    pub time: f64,
}

impl RobotState {
    pub fn at_rest(pose: Pose) -> Self {
        Self { pose: Pose { theta: normalize_angle(pose.theta), ..pose }, ..Default::default() }
    }
}

/// Wheel speeds (right, left) realising body velocities (v, ω).
pub fn inverse_kinematics(v: f64, omega: f64, params: &RobotParams) -> (f64, f64) {
    let r = params.wheel_radius;
    let half = 0.5 * params.wheel_separation * omega;
    ((v + half) / r, (v - half) / r)
}

/// Body velocities (v, ω) from wheel speeds (right, left).
pub fn forward_kinematics(omega_r: f64, omega_l: f64, params: &RobotParams) -> (f64, f64) {
    let r = params.wheel_radius;
    (0.5 * r * (omega_r + omega_l), r * (omega_r - omega_l) / params.wheel_separation)
}

/// Largest friction force a wheel can transmit, F_rmax = μ·m_pw·g.
pub fn max_friction(mu: f64, mass_per_wheel: f64) -> f64 {
    mu * mass_per_wheel * GRAVITY
}

/// First-order motor model (gain K_m = k_τ/b, time constant J/b).
pub fn motor_first_order(params: &RobotParams) -> Result<(f64, f64)> {
    let b = params.viscous_friction;
    if b == 0.0 {
        return Err(PhysicsError::ZeroFriction);
    }
    Ok((params.torque_constant / b, params.motor_inertia / b))
}

fn smooth_sign(omega: f64) -> f64 {
    (omega / ROLLING_DEADBAND).clamp(-1.0, 1.0)
}

/// Resistive torque from rolling resistance and gravity acting on one wheel.
/// `terrain.phi_deg` is the pitch along the direction of travel.
pub fn slope_torque_actual(terrain: &TerrainSample, omega: f64, params: &RobotParams, payload: f64) -> f64 {
    let m_pw = params.mass_per_wheel(payload);
    let phi = terrain.phi_deg.to_radians();
    let rolling = terrain.crr * m_pw * GRAVITY * phi.cos() * smooth_sign(omega);
    let gravity = m_pw * GRAVITY * phi.sin();
    params.wheel_radius * (rolling + gravity)
}

fn drive_torque(
    wheel: &WheelState,
    tau_cmd: f64,
    terrain: &TerrainSample,
    params: &RobotParams,
    payload: f64,
) -> (f64, f64) {
    let tau_m = tau_cmd.clamp(-params.tau_max, params.tau_max);
    let slope = slope_torque_actual(terrain, wheel.omega, params, payload);
    (tau_m, params.torque_constant * tau_m - slope)
}

fn finite(x: f64, quantity: &'static str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(PhysicsError::NonFinite { quantity })
    }
}

/// Advances one wheel by `dt`. Returns the new state with the clamped
/// longitudinal and lateral forces.
pub fn step_wheel(
    wheel: &WheelState,
    tau_cmd: f64,
    terrain: &TerrainSample,
    params: &RobotParams,
    payload: f64,
    dt: f64,
) -> Result<(WheelState, f64, f64)> {
    if !(dt > 0.0) {
        return Err(PhysicsError::BadStep(dt));
    }
    finite(tau_cmd, "torque command")?;
    let m_pw = params.mass_per_wheel(payload);
    let f_max = max_friction(terrain.mu, m_pw);
    let i_yy = params.wheel_inertia;
    let r = params.wheel_radius;

    let f_lat = (wheel.lateral_accel * m_pw).clamp(-f_max, f_max);

    let (tau_m, tau_eff) = drive_torque(wheel, tau_cmd, terrain, params, payload);
    let slope = params.torque_constant * tau_m - tau_eff;
    let ref_accel = (wheel.omega_ref - wheel.omega) / dt;
    let f_long = ((tau_eff - i_yy * ref_accel - terrain.cd * wheel.omega) / r).clamp(-f_max, f_max);
    let alpha = (tau_eff - r * f_long - terrain.cd * wheel.omega) / i_yy;
    let omega = finite(wheel.omega + alpha * dt, "wheel speed")?;

    let next = WheelState {
        omega,
        omega_ref: wheel.omega_ref,
        lateral_accel: wheel.lateral_accel,
        applied_torque: tau_m,
        slope_torque_actual: slope,
    };
    Ok((next, finite(f_long, "longitudinal force")?, finite(f_lat, "lateral force")?))
}

/// Rolling target for a wheel carrying half of the chassis on its own.
pub fn single_wheel_target(
    wheel: &WheelState,
    tau_cmd: f64,
    terrain: &TerrainSample,
    params: &RobotParams,
    payload: f64,
    dt: f64,
) -> f64 {
    let (_, tau_eff) = drive_torque(wheel, tau_cmd, terrain, params, payload);
    let r = params.wheel_radius;
    let inertia = params.wheel_inertia + 0.5 * params.total_mass(payload) * r * r;
    wheel.omega + dt * (tau_eff - terrain.cd * wheel.omega) / inertia
}

/// Ground force on one side that keeps it rolling when the chassis is also
/// pushed by `other_force` on the opposite side.
fn rolling_force_given_other(net_torque: f64, other_force: f64, params: &RobotParams, payload: f64) -> f64 {
    let m = params.total_mass(payload);
    let iz = params.yaw_inertia(payload);
    let h = 0.5 * params.wheel_separation;
    let r = params.wheel_radius;
    let i = params.wheel_inertia;
    // r·ω̇ = (F_a + F_b)/M ± h²(F_a − F_b)/I_z and I·ω̇ = net − r·F_a
    let own = 1.0 / m + h * h / iz + r * r / i;
    let cross = 1.0 / m - h * h / iz;
    (r * net_torque / i - cross * other_force) / own
}

/// Advances the robot by one physics step.
pub fn step_robot(
    state: &RobotState,
    tau_r: f64,
    tau_l: f64,
    world: &World,
    params: &RobotParams,
    dt: f64,
) -> Result<RobotState> {
    if !(dt > 0.0) {
        return Err(PhysicsError::BadStep(dt));
    }
    let payload = world.payload_mass;
    let sample = sector_at(world, state.pose.position())?;
    let terrain = sample.with_pitch(sample.pitch_rad(state.pose.theta), state.pose.theta);

    let r = params.wheel_radius;
    let h = 0.5 * params.wheel_separation;
    let i = params.wheel_inertia;
    let m = params.total_mass(payload);
    let iz = params.yaw_inertia(payload);
    let f_max = max_friction(terrain.mu, params.mass_per_wheel(payload));

    let (_, eff_r) = drive_torque(&state.right, tau_r, &terrain, params, payload);
    let (_, eff_l) = drive_torque(&state.left, tau_l, &terrain, params, payload);
    let net_r = eff_r - terrain.cd * state.right.omega;
    let net_l = eff_l - terrain.cd * state.left.omega;

    // coupled no-slip accelerations
    let v_dot = (net_r + net_l) / r / (m + 2.0 * i / (r * r));
    let w_dot = h * (net_r - net_l) / r / (iz + 2.0 * i * h * h / (r * r));
    let acc_r = (v_dot + h * w_dot) / r;
    let acc_l = (v_dot - h * w_dot) / r;
    let mut f_r = (net_r - i * acc_r) / r;
    let mut f_l = (net_l - i * acc_l) / r;

    // a saturated side stops transmitting extra force; re-solve the other one
    let clamped_r = f_r.abs() > f_max;
    let clamped_l = f_l.abs() > f_max;
    if clamped_r && !clamped_l {
        f_r = f_r.clamp(-f_max, f_max);
        f_l = rolling_force_given_other(net_l, f_r, params, payload);
    } else if clamped_l && !clamped_r {
        f_l = f_l.clamp(-f_max, f_max);
        f_r = rolling_force_given_other(net_r, f_l, params, payload);
    }

    let mut right = state.right;
    let mut left = state.left;
    right.omega_ref = state.right.omega + dt * (net_r - r * f_r) / i;
    left.omega_ref = state.left.omega + dt * (net_l - r * f_l) / i;

    let (mut right, _, _) = step_wheel(&right, tau_r, &terrain, params, payload, dt)?;
    let (mut left, _, _) = step_wheel(&left, tau_l, &terrain, params, payload, dt)?;

    let pose = Pose {
        x: state.pose.x + dt * state.v * state.pose.theta.cos(),
        y: state.pose.y + dt * state.v * state.pose.theta.sin(),
        theta: normalize_angle(state.pose.theta + dt * state.omega),
    };
    let (v, omega) = forward_kinematics(right.omega, left.omega, params);
    let lateral = omega * v;
    right.lateral_accel = lateral;
    left.lateral_accel = lateral;
    finite(pose.x, "pose")?;
    finite(pose.y, "pose")?;

    Ok(RobotState { pose, right, left, v, omega, time: state.time + dt })
}

/// Encoder pair with additive Gaussian noise on independent streams.
#[derive(Debug, Clone)]
pub struct EncoderModel {
    pub sigma: f64,
    pub enabled: bool,
    right: GaussianStream,
    left: GaussianStream,
}

impl EncoderModel {
    /// Default encoder noise (rad/s).
    pub const DEFAULT_SIGMA: f64 = 0.02;

    pub fn new(sigma: f64, enabled: bool, trial_seed: u64) -> Self {
        assert!(sigma >= 0.0, "encoder sigma must be non-negative");
        Self {
            sigma,
            enabled,
            right: GaussianStream::new(trial_seed, Stream::EncoderRight),
            left: GaussianStream::new(trial_seed, Stream::EncoderLeft),
        }
    }

    pub fn ideal() -> Self {
        Self::new(0.0, false, 0)
    }
}

/// Measured (right, left) wheel speeds.
pub fn measure_encoders(state: &RobotState, model: &mut EncoderModel) -> (f64, f64) {
    if !model.enabled {
        return (state.right.omega, state.left.omega);
    }
    let sigma = model.sigma;
    (state.right.omega + model.right.sample(sigma), state.left.omega + model.left.sample(sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{load_world, Disturbances};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn concrete() -> TerrainSample {
        TerrainSample::flat(2, 0.8, 0.01, 0.75)
    }

    fn flat_world(payload: f64) -> World {
        World::greenhouse()
            .with_disturbances(Disturbances { payload_mass: payload, slope: false, terrain_change: false })
            .unwrap()
    }

    #[test]
    fn kinematics_examples() {
        let p = RobotParams::default();
        assert_eq!(inverse_kinematics(0.0, 0.0, &p), (0.0, 0.0));
        let (wr, wl) = inverse_kinematics(0.165, 0.0, &p);
        assert_relative_eq!(wr, 1.0, epsilon = 1e-12);
        assert_relative_eq!(wl, 1.0, epsilon = 1e-12);
        // ω chosen so that ω·L_w/(2r) = 1
        let w = 2.0 * 0.165 / 0.555;
        let (wr, wl) = inverse_kinematics(0.0, w, &p);
        assert_relative_eq!(wr, 1.0, epsilon = 1e-12);
        assert_relative_eq!(wl, -1.0, epsilon = 1e-12);
        assert_relative_eq!(w, 0.5946, epsilon = 1e-4);
        let (v, om) = forward_kinematics(1.0, 1.0, &p);
        assert_relative_eq!(v, 0.165, epsilon = 1e-15);
        assert_eq!(om, 0.0);
    }

    #[test]
    fn friction_examples() {
        assert_eq!(max_friction(0.0, 18.75), 0.0);
        assert_relative_eq!(max_friction(0.8, 18.75), 147.15, epsilon = 1e-9);
        assert_relative_eq!(max_friction(0.2, 36.25), 71.1225, epsilon = 1e-9);
        let p = RobotParams::default();
        assert_eq!(p.mass_per_wheel(0.0), 18.75);
        assert_eq!(p.mass_per_wheel(70.0), 36.25);
    }

    #[test]
    fn motor_model_matches_table_values() {
        let p = RobotParams::default();
        let (km, tau) = motor_first_order(&p).unwrap();
        assert!((km - 1.333).abs() < 0.005);
        assert!((tau - 2.96).abs() < 0.01);
        let unit = RobotParams { torque_constant: 0.75, ..p.clone() };
        assert_eq!(motor_first_order(&unit).unwrap().0, 1.0);
        let heavy = RobotParams { motor_inertia: 4.44, ..p.clone() };
        let (km2, tau2) = motor_first_order(&heavy).unwrap();
        assert_eq!(km2, km);
        assert_relative_eq!(tau2, 2.0 * tau, epsilon = 1e-12);
        let zero = RobotParams { viscous_friction: 0.0, ..p };
        assert!(matches!(motor_first_order(&zero), Err(PhysicsError::ZeroFriction)));
    }

    #[test]
    fn wheel_rest_is_fixed_point() {
        let p = RobotParams::default();
        let w = WheelState::default();
        let (next, fl, flat) = step_wheel(&w, 0.0, &concrete(), &p, 0.0, PHYSICS_DT).unwrap();
        assert_eq!(next.omega, 0.0);
        assert_eq!((fl, flat), (0.0, 0.0));
    }

    #[test]
    fn lateral_force_clamps_exactly() {
        let p = RobotParams::default();
        let t = concrete();
        let f_max = max_friction(t.mu, p.mass_per_wheel(0.0));
        let w = WheelState { lateral_accel: 2.0 * f_max / p.mass_per_wheel(0.0), ..Default::default() };
        let (_, _, f_lat) = step_wheel(&w, 0.0, &t, &p, 0.0, PHYSICS_DT).unwrap();
        assert_eq!(f_lat, f_max);
    }

    #[test]
    fn non_finite_torque_is_an_error() {
        let p = RobotParams::default();
        let r = step_wheel(&WheelState::default(), f64::NAN, &concrete(), &p, 0.0, PHYSICS_DT);
        assert!(matches!(r, Err(PhysicsError::NonFinite { .. })));
    }

    fn run_single_wheel(tau: f64, dt: f64, duration: f64) -> f64 {
        let p = RobotParams::default();
        let t = concrete();
        let mut w = WheelState::default();
        let steps = (duration / dt).round() as usize;
        for _ in 0..steps {
            w.omega_ref = single_wheel_target(&w, tau, &t, &p, 0.0, dt);
            w = step_wheel(&w, tau, &t, &p, 0.0, dt).unwrap().0;
        }
        w.omega
    }

    #[test]
    fn constant_torque_converges_to_force_balance() {
        let tau = 2.0;
        let coarse = run_single_wheel(tau, PHYSICS_DT, 80.0);
        let fine = run_single_wheel(tau, PHYSICS_DT / 10.0, 80.0);
        assert!((coarse - fine).abs() <= 1e-3, "{coarse} vs {fine}");
        // α = 0 once τ − rolling resistance − C_D·ω = 0
        let p = RobotParams::default();
        let rolling = p.wheel_radius * 0.01 * p.mass_per_wheel(0.0) * GRAVITY;
        let fixed = (tau - rolling) / 0.75;
        assert!((coarse - fixed).abs() < 1e-3, "{coarse} vs {fixed}");
    }

    #[test]
    fn robot_rest_is_fixed_point() {
        let w = flat_world(0.0);
        let p = RobotParams::default();
        let s0 = RobotState::at_rest(Pose::new(5.0, 5.0, 0.3));
        let s1 = step_robot(&s0, 0.0, 0.0, &w, &p, PHYSICS_DT).unwrap();
        assert_eq!(s1.pose, s0.pose);
        assert_eq!((s1.v, s1.omega), (0.0, 0.0));
    }

    #[test]
    fn equal_torques_drive_straight() {
        let w = flat_world(0.0);
        let p = RobotParams::default();
        let mut s = RobotState::at_rest(Pose::new(2.0, 2.0, 0.0));
        for _ in 0..400 {
            s = step_robot(&s, 3.0, 3.0, &w, &p, PHYSICS_DT).unwrap();
        }
        assert_eq!(s.pose.theta, 0.0);
        assert_eq!(s.pose.y, 2.0);
        assert!(s.pose.x > 2.0);
        assert_eq!(s.right.omega, s.left.omega);
    }

    #[test]
    fn opposite_torques_rotate_in_place() {
        let w = flat_world(0.0);
        let p = RobotParams::default();
        let mut s = RobotState::at_rest(Pose::new(5.0, 5.0, 0.0));
        for _ in 0..400 {
            let prev = s;
            s = step_robot(&s, 5.0, -5.0, &w, &p, PHYSICS_DT).unwrap();
            assert!((s.pose.x - prev.pose.x).abs() <= 1e-6);
            assert!((s.pose.y - prev.pose.y).abs() <= 1e-6);
        }
        assert!(s.pose.theta > 0.0);
        assert_eq!(s.v, 0.0);
    }

    #[test]
    fn payload_reduces_travel() {
        let p = RobotParams::default();
        let mut dist = Vec::new();
        for payload in [0.0, 70.0] {
            let w = flat_world(payload);
            let mut s = RobotState::at_rest(Pose::new(2.0, 2.0, 0.0));
            for _ in 0..2000 {
                s = step_robot(&s, 4.0, 4.0, &w, &p, PHYSICS_DT).unwrap();
            }
            dist.push(s.pose.x - 2.0);
        }
        assert!(dist[1] <= dist[0], "{dist:?}");
    }

    #[test]
    fn slip_on_low_friction() {
        // huge torque on gravel: the force saturates and the wheel outruns rolling
        let p = RobotParams::default();
        let gravel = TerrainSample::flat(1, 0.2, 0.10, 1.25);
        let mut w = WheelState::default();
        w.omega_ref = single_wheel_target(&w, 400.0, &gravel, &p, 0.0, PHYSICS_DT);
        let (next, f_long, _) = step_wheel(&w, 400.0, &gravel, &p, 0.0, PHYSICS_DT).unwrap();
        assert_eq!(f_long, max_friction(0.2, p.mass_per_wheel(0.0)));
        assert!(next.omega > w.omega_ref);
    }

    #[test]
    fn encoder_noise_statistics() {
        let mut s = RobotState::at_rest(Pose::default());
        s.right.omega = 0.75;
        s.left.omega = -0.3;
        let mut ideal = EncoderModel::new(0.02, false, 7);
        assert_eq!(measure_encoders(&s, &mut ideal), (0.75, -0.3));

        let n = 100_000;
        let mut enc = EncoderModel::new(0.02, true, 7);
        let samples: Vec<f64> = (0..n).map(|_| measure_encoders(&s, &mut enc).0).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 0.75).abs() <= 3.0 * 0.02 / (n as f64).sqrt());
        assert!((var.sqrt() - 0.02).abs() <= 0.05 * 0.02);

        let mut a = EncoderModel::new(0.02, true, 99);
        let mut b = EncoderModel::new(0.02, true, 99);
        for _ in 0..100 {
            assert_eq!(measure_encoders(&s, &mut a), measure_encoders(&s, &mut b));
        }
    }

    #[test]
    fn slope_pitch_follows_heading() {
        let text = crate::world::DEFAULT_WORLD_TOML.replace("enabled = false", "enabled = true");
        let w = load_world(&text).unwrap();
        let dir = crate::Vec2::from_angle(w.slope.heading);
        let at = w.slope.origin + dir * 1.8;
        let s = sector_at(&w, at).unwrap();
        assert!((s.pitch_rad(w.slope.heading).to_degrees() - 4.0).abs() < 1e-9);
        assert!(s.pitch_rad(w.slope.heading + std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn wheel_forces_within_friction_cone(
            omega in -10.0f64..10.0,
            target in -10.0f64..10.0,
            lat in -50.0f64..50.0,
            tau in -400.0f64..400.0,
            sector in 0usize..3,
            phi in -4.0f64..4.0,
            payload in 0.0f64..70.0,
        ) {
            let coeffs = [(1, 0.2, 0.10, 1.25), (2, 0.8, 0.01, 0.75), (3, 0.5, 0.05, 1.0)][sector];
            let mut t = TerrainSample::flat(coeffs.0, coeffs.1, coeffs.2, coeffs.3);
            t.phi_deg = phi;
            let p = RobotParams::default();
            let w = WheelState { omega, omega_ref: target, lateral_accel: lat, ..Default::default() };
            let (next, f_long, f_lat) = step_wheel(&w, tau, &t, &p, payload, PHYSICS_DT).unwrap();
            let f_max = max_friction(t.mu, p.mass_per_wheel(payload));
            prop_assert!(f_long.abs() <= f_max);
            prop_assert!(f_lat.abs() <= f_max);
            prop_assert!(next.applied_torque.abs() <= p.tau_max);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1_000))]
        #[test]
        fn heading_stays_normalised(
            x in 1.0f64..19.0,
            y in 1.0f64..19.0,
            theta in -3.2f64..3.2,
            wr in -20.0f64..20.0,
            wl in -20.0f64..20.0,
            tr in -400.0f64..400.0,
            tl in -400.0f64..400.0,
        ) {
            let world = World::greenhouse()
                .with_disturbances(Disturbances { payload_mass: 35.0, slope: true, terrain_change: true })
                .unwrap();
            let p = RobotParams::default();
            let mut s = RobotState::at_rest(Pose::new(x, y, theta));
            s.right.omega = wr;
            s.left.omega = wl;
            let (v, om) = forward_kinematics(wr, wl, &p);
            s.v = v;
            s.omega = om;
            let next = step_robot(&s, tr, tl, &world, &p, PHYSICS_DT).unwrap();
            prop_assert!(next.pose.theta > -std::f64::consts::PI && next.pose.theta <= std::f64::consts::PI);
            let (v2, om2) = forward_kinematics(next.right.omega, next.left.omega, &p);
            prop_assert_eq!((v2, om2), (next.v, next.omega));
        }

        #[test]
        fn kinematics_round_trip(v in -2.0f64..2.0, w in -4.0f64..4.0) {
            let p = RobotParams::default();
            let (wr, wl) = inverse_kinematics(v, w, &p);
            let (v2, w2) = forward_kinematics(wr, wl, &p);
            prop_assert!((v - v2).abs() < 1e-12);
            prop_assert!((w - w2).abs() < 1e-12);
        }
    }
}
