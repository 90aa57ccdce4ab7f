//! Per-motor velocity loop: reference prefilter, PID with filtered derivative,
//! back-calculation anti-windup, torque saturation and slope feedforward.

use thiserror::Error;

use crate::physics::{self, RobotParams, WheelState};
use crate::world::TerrainSample;
use crate::GRAVITY;

/// Low-level control period (s).
pub const CONTROL_DT: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("slopes must differ for static-gain identification (got {0} deg twice)")]
    DegenerateSlopes(f64),
    #[error("slope torque did not change between experiments")]
    NoTorqueChange,
    #[error("steady state not reached within {0} s")]
    NotConverged(f64),
    #[error("plant error during identification: {0}")]
    Plant(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Derivative filter constant N.
    pub n_filter: f64,
    /// Back-calculation tracking constant; the correction is divided by it.
    pub kaw: f64,
    pub anti_windup: bool,
}

impl Default for PidGains {
    fn default() -> Self {
        Self { kp: 70.0, ki: 40.0, kd: 0.0, n_filter: 10.0, kaw: 70.0 / 40.0, anti_windup: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedforwardConfig {
    pub k_ff: f64,
    /// Identified static gain, if any.
    pub k_s: Option<f64>,
    pub enabled: bool,
    /// Payload assumed by the torque estimate (kg); the real payload is unmeasured.
    pub payload_estimate: f64,
}

impl Default for FeedforwardConfig {
    fn default() -> Self {
        Self { k_ff: 0.0, k_s: None, enabled: false, payload_estimate: 0.0 }
    }
}

impl FeedforwardConfig {
    /// Enabled feedforward with K_ff = −K_s / K_m.
    pub fn from_static_gain(k_s: f64, k_m: f64) -> Self {
        Self { k_ff: feedforward_gain(k_s, k_m), k_s: Some(k_s), enabled: true, payload_estimate: 0.0 }
    }
}

pub fn feedforward_gain(k_s: f64, k_m: f64) -> f64 {
    -k_s / k_m
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowLevelConfig {
    pub gains: PidGains,
    /// Reference filter time constant (s); 0 disables the filter.
    pub tau_f: f64,
    pub n_f: usize,
    pub tau_max: f64,
    pub feedforward: FeedforwardConfig,
}

impl Default for LowLevelConfig {
    fn default() -> Self {
        Self {
            gains: PidGains::default(),
            tau_f: 70.0 / 40.0,
            n_f: 1,
            tau_max: 400.0,
            feedforward: FeedforwardConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LowLevelState {
    pub integral: f64,
    pub deriv_state: f64,
    pub filter_state: Vec<f64>,
    pub prev_error: f64,
    pub last_tau_sat: f64,
    pub last_tau_unsat: f64,
}

impl LowLevelState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Cascade of `n_f` first-order lags, each discretised with a zero-order hold.
pub fn reference_filter_step(state: &mut LowLevelState, omega_ref: f64, tau_f: f64, n_f: usize, dt: f64) -> f64 {
    let n_f = n_f.max(1);
    if state.filter_state.len() != n_f {
        state.filter_state = vec![0.0; n_f];
    }
    if tau_f <= 0.0 {
        state.filter_state.iter_mut().for_each(|s| *s = omega_ref);
        return omega_ref;
    }
    let a = 1.0 - (-dt / tau_f).exp();
    let mut u = omega_ref;
    for y in state.filter_state.iter_mut() {
        *y += a * (u - *y);
        u = *y;
    }
    u
}

/// PID output for the current sample. The integral state itself is advanced
/// by [`antiwindup_update`].
pub fn pid_step(state: &mut LowLevelState, gains: &PidGains, omega_fil: f64, omega_meas: f64, dt: f64) -> f64 {
    let e = omega_fil - omega_meas;
    let integral = state.integral + gains.ki * dt * 0.5 * (e + state.prev_error);
    state.deriv_state = (state.deriv_state + gains.n_filter * (e - state.prev_error)) / (1.0 + gains.n_filter * dt);
    gains.kp * e + integral + gains.kd * state.deriv_state
}

/// Integrates İ = K_I·e + (τ_sat − τ_mff)/K_aw over `dt` (trapezoidal in e).
pub fn antiwindup_update(
    state: &mut LowLevelState,
    gains: &PidGains,
    tau_unsat: f64,
    tau_sat: f64,
    e: f64,
    dt: f64,
) -> f64 {
    let mut delta = gains.ki * dt * 0.5 * (e + state.prev_error);
    if gains.anti_windup && gains.kaw > 0.0 {
        delta += dt * (tau_sat - tau_unsat) / gains.kaw;
    }
    state.integral += delta;
    state.prev_error = e;
    state.last_tau_sat = tau_sat;
    state.last_tau_unsat = tau_unsat;
    state.integral
}

/// Estimated resistive torque on one wheel from the measurable terrain,
/// τ_slope = (F_Crr + F_g)·r − C_D·ω.
pub fn estimate_slope_torque(terrain: &TerrainSample, payload: f64, omega: f64, params: &RobotParams) -> f64 {
    let m_pw = params.mass_per_wheel(payload);
    let phi = terrain.phi_deg.to_radians();
    let f_crr = terrain.crr * m_pw * GRAVITY * phi.cos();
    let f_g = m_pw * GRAVITY * phi.sin();
    (f_crr + f_g) * params.wheel_radius - terrain.cd * omega
}

/// One full control step; returns the saturated motor torque.
pub fn low_level_step(
    state: &mut LowLevelState,
    config: &LowLevelConfig,
    omega_ref: f64,
    omega_meas: f64,
    terrain: &TerrainSample,
    params: &RobotParams,
    dt: f64,
) -> f64 {
    let omega_fil = reference_filter_step(state, omega_ref, config.tau_f, config.n_f, dt);
    let tau_pid = pid_step(state, &config.gains, omega_fil, omega_meas, dt);
    let ff = &config.feedforward;
    let tau_ff = if ff.enabled {
        ff.k_ff * estimate_slope_torque(terrain, ff.payload_estimate, omega_meas, params)
    } else {
        0.0
    };
    let tau_mff = tau_pid + tau_ff;
    let tau_out = tau_mff.clamp(-config.tau_max, config.tau_max);
    antiwindup_update(state, &config.gains, tau_mff, tau_out, omega_fil - omega_meas, dt);
    tau_out
}

/// Roots of the PI loop around K_m/(τ s + 1): τ s² + (1 + K_m K_P) s + K_m K_I.
/// Returned as (re, im) pairs, the slower root first.
pub fn closed_loop_poles(k_m: f64, tau_motor: f64, kp: f64, ki: f64) -> [(f64, f64); 2] {
    let a = tau_motor;
    let b = 1.0 + k_m * kp;
    let c = k_m * ki;
    let disc = b * b - 4.0 * a * c;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        // numerically stable pair
        let q = -0.5 * (b + b.signum() * sq);
        let r1 = q / a;
        let r2 = c / q;
        let (slow, fast) = if r1.abs() < r2.abs() { (r1, r2) } else { (r2, r1) };
        [(slow, 0.0), (fast, 0.0)]
    } else {
        let re = -b / (2.0 * a);
        let im = (-disc).sqrt() / (2.0 * a);
        [(re, im), (re, -im)]
    }
}

/// Static gain K_s = Δω / Δτ_slope_real from two steady-state experiments.
/// `run` maps a slope angle (deg) to the steady (ω, τ_slope_real).
pub fn identify_static_gain<F>(mut run: F, phi_1: f64, phi_2: f64) -> Result<f64, ControlError>
where
    F: FnMut(f64) -> Result<(f64, f64), ControlError>,
{
    if phi_1 == phi_2 {
        return Err(ControlError::DegenerateSlopes(phi_1));
    }
    let (w1, t1) = run(phi_1)?;
    let (w2, t2) = run(phi_2)?;
    let dt = t2 - t1;
    if dt == 0.0 {
        return Err(ControlError::NoTorqueChange);
    }
    Ok((w2 - w1) / dt)
}

/// Steady-state experiment on a single wheel driven by a constant torque.
///
/// The torque is the flat-ground value that holds `omega_target`; the slope
/// then shifts the equilibrium speed. Steady state is declared when the wheel
/// speed changes by less than 1e-9 rad/s over one second.
pub fn open_loop_slope_experiment(
    base: TerrainSample,
    omega_target: f64,
    payload: f64,
    params: &RobotParams,
    timeout: f64,
) -> impl FnMut(f64) -> Result<(f64, f64), ControlError> + '_ {
    move |phi_deg: f64| {
        let flat = TerrainSample { phi_deg: 0.0, ..base };
        let hold = WheelState { omega: omega_target, ..Default::default() };
        let tau = (physics::slope_torque_actual(&flat, omega_target, params, payload) + flat.cd * omega_target)
            / params.torque_constant;
        let terrain = TerrainSample { phi_deg, ..base };
        let dt = physics::PHYSICS_DT;
        let per_second = (1.0 / dt).round() as usize;
        let mut wheel = hold;
        let mut last = wheel.omega;
        let mut t = 0.0;
        while t < timeout {
            for _ in 0..per_second {
                wheel.omega_ref = physics::single_wheel_target(&wheel, tau, &terrain, params, payload, dt);
                wheel = physics::step_wheel(&wheel, tau, &terrain, params, payload, dt)
                    .map_err(|e| ControlError::Plant(e.to_string()))?
                    .0;
            }
            t += 1.0;
            if (wheel.omega - last).abs() < 1e-9 {
                let slope = physics::slope_torque_actual(&terrain, wheel.omega, params, payload);
                return Ok((wheel.omega, slope));
            }
            last = wheel.omega;
        }
        Err(ControlError::NotConverged(timeout))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sand() -> TerrainSample {
        TerrainSample::flat(3, 0.5, 0.05, 1.0)
    }

    #[test]
    fn filter_step_response() {
        let mut s = LowLevelState::new();
        let dt = 0.01;
        let mut y = 0.0;
        for _ in 0..175 {
            y = reference_filter_step(&mut s, 1.0, 1.75, 1, dt);
        }
        assert_relative_eq!(y, 1.0 - (-1.0f64).exp(), epsilon = 1e-12);
        let mut s = LowLevelState::new();
        assert_eq!(reference_filter_step(&mut s, 0.37, 0.0, 2, dt), 0.37);
    }

    #[test]
    fn pid_examples() {
        let g = PidGains { kp: 70.0, ki: 40.0, kd: 0.0, ..Default::default() };
        let mut s = LowLevelState::new();
        assert_eq!(pid_step(&mut s, &g, 0.0, 0.0, 0.01), 0.0);
        let mut s = LowLevelState::new();
        let tau = pid_step(&mut s, &g, 1.0, 0.0, 0.01);
        assert_relative_eq!(tau, 70.2, epsilon = 1e-12);
    }

    #[test]
    fn derivative_filter_backward_euler() {
        let g = PidGains { kp: 0.0, ki: 0.0, kd: 1.0, n_filter: 5.0, ..Default::default() };
        let mut s = LowLevelState::new();
        let dt = 0.01;
        let d1 = pid_step(&mut s, &g, 1.0, 0.0, dt);
        antiwindup_update(&mut s, &g, d1, d1, 1.0, dt);
        assert_relative_eq!(d1, 5.0 / 1.05, epsilon = 1e-12);
        let d2 = pid_step(&mut s, &g, 1.0, 0.0, dt);
        assert_relative_eq!(d2, d1 / 1.05, epsilon = 1e-12);
    }

    #[test]
    fn antiwindup_examples() {
        let g = PidGains::default();
        let mut s = LowLevelState::new();
        antiwindup_update(&mut s, &g, 10.0, 10.0, 0.5, 0.01);
        assert_relative_eq!(s.integral, 40.0 * 0.01 * 0.25, epsilon = 1e-15);
        let mut s = LowLevelState::new();
        antiwindup_update(&mut s, &g, 3.0, 3.0, 0.0, 0.01);
        assert_eq!(s.integral, 0.0);
    }

    fn saturated_run(anti_windup: bool, steps: usize) -> Vec<f64> {
        let config = LowLevelConfig {
            gains: PidGains { anti_windup, ..Default::default() },
            tau_f: 0.0,
            tau_max: 5.0,
            ..Default::default()
        };
        let mut s = LowLevelState::new();
        let p = RobotParams::default();
        (0..steps)
            .map(|_| {
                low_level_step(&mut s, &config, 10.0, 0.0, &sand(), &p, 0.01);
                s.integral
            })
            .collect()
    }

    #[test]
    fn antiwindup_slows_integral_growth() {
        let with = saturated_run(true, 500);
        let without = saturated_run(false, 500);
        for k in 1..500 {
            assert!(with[k].abs() < without[k].abs());
        }
    }

    #[test]
    fn antiwindup_keeps_integral_bounded() {
        let short = saturated_run(true, 1000);
        let long = saturated_run(true, 10_000);
        let max_short = short.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let max_long = long.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(max_long <= max_short * 1.01 + 1e-9, "{max_short} vs {max_long}");
    }

    #[test]
    fn slope_torque_examples() {
        let p = RobotParams::default();
        let flat = sand();
        let m_pw = p.mass_per_wheel(70.0);
        let tau = estimate_slope_torque(&flat, 70.0, 0.0, &p);
        assert_relative_eq!(tau, 0.05 * m_pw * GRAVITY * p.wheel_radius, epsilon = 1e-12);

        let mut tilted = sand();
        tilted.phi_deg = 4.0;
        let phi = 4f64.to_radians();
        let f_crr = 0.05 * m_pw * GRAVITY * phi.cos();
        let f_g = m_pw * GRAVITY * phi.sin();
        assert_relative_eq!(f_crr, 17.74, epsilon = 0.005);
        assert_relative_eq!(f_g, 24.81, epsilon = 0.005);
        let tau = estimate_slope_torque(&tilted, 70.0, 0.75, &p);
        assert_relative_eq!(tau, 6.27, epsilon = 0.005);

        let balance = (f_crr + f_g) * p.wheel_radius / 1.0;
        assert!(estimate_slope_torque(&tilted, 70.0, balance, &p).abs() < 1e-12);
    }

    #[test]
    fn low_level_examples() {
        let p = RobotParams::default();
        let mut s = LowLevelState::new();
        let config = LowLevelConfig { tau_f: 0.0, ..Default::default() };
        let big = low_level_step(&mut s, &config, 20.0, 0.0, &sand(), &p, 0.01);
        assert_eq!(big, 400.0);

        let zero = LowLevelConfig {
            gains: PidGains { kp: 0.0, ki: 0.0, kd: 0.0, ..Default::default() },
            ..Default::default()
        };
        let mut s = LowLevelState::new();
        for k in 0..50 {
            assert_eq!(low_level_step(&mut s, &zero, 1.0, -(k as f64), &sand(), &p, 0.01), 0.0);
        }

        // K_ff = 0 with the feedforward switched on changes nothing
        let mut a = LowLevelState::new();
        let mut b = LowLevelState::new();
        let off = LowLevelConfig::default();
        let on = LowLevelConfig {
            feedforward: FeedforwardConfig { enabled: true, ..Default::default() },
            ..Default::default()
        };
        for k in 0..100 {
            let m = 0.01 * k as f64;
            assert_eq!(
                low_level_step(&mut a, &off, 0.75, m, &sand(), &p, 0.01),
                low_level_step(&mut b, &on, 0.75, m, &sand(), &p, 0.01)
            );
        }
    }

    #[test]
    fn table_poles() {
        let [(slow, si), (fast, fi)] = closed_loop_poles(1.33, 2.97, 70.0, 40.0);
        assert_eq!((si, fi), (0.0, 0.0));
        // independent oracle: quadratic formula written out
        let (a, b, c): (f64, f64, f64) = (2.97, 1.0 + 1.33 * 70.0, 1.33 * 40.0);
        let d = (b * b - 4.0 * a * c).sqrt();
        assert_relative_eq!(slow, (-b + d) / (2.0 * a), epsilon = 1e-12);
        assert_relative_eq!(fast, (-b - d) / (2.0 * a), epsilon = 1e-12);
        // targets are quoted to four significant figures
        assert!((slow + 0.576).abs() < 1e-3 * 0.576);
        assert!((fast + 31.11).abs() < 1e-3 * 31.11);
        assert!((slow + 0.6).abs() <= 0.06);
    }

    #[test]
    fn static_gain_identification() {
        assert_eq!(identify_static_gain(|_| Ok((0.0, 0.0)), 2.0, 2.0), Err(ControlError::DegenerateSlopes(2.0)));
        let p = RobotParams::default();
        let run = open_loop_slope_experiment(sand(), 0.75, 0.0, &p, 300.0);
        let k_s = identify_static_gain(run, 0.0, 4.0).unwrap();
        assert!(k_s.is_finite() && k_s < 0.0);
        assert_relative_eq!(k_s, -1.0, epsilon = 1e-5);
        assert_eq!(feedforward_gain(1.333, 1.333), -1.0);
    }

    proptest! {
        #[test]
        fn filter_has_unit_dc_gain(tau_f in 0.01f64..3.0, n_f in 1usize..4, c in -5.0f64..5.0) {
            let dt = 0.01;
            let mut s = LowLevelState::new();
            let steps = (10.0 * n_f as f64 * tau_f / dt).ceil() as usize;
            let mut y = 0.0;
            for _ in 0..steps {
                y = reference_filter_step(&mut s, c, tau_f, n_f, dt);
            }
            prop_assert!((y - c).abs() <= 0.01 * c.abs() + 1e-12);
        }

        #[test]
        fn output_is_saturated(
            refs in proptest::collection::vec(-50.0f64..50.0, 1..60),
            meas in -50.0f64..50.0,
            kp in 0.0f64..500.0,
        ) {
            let p = RobotParams::default();
            let config = LowLevelConfig {
                gains: PidGains { kp, kd: 3.0, ..Default::default() },
                feedforward: FeedforwardConfig { k_ff: 5.0, enabled: true, ..Default::default() },
                ..Default::default()
            };
            let mut s = LowLevelState::new();
            for r in refs {
                let tau = low_level_step(&mut s, &config, r, meas, &sand(), &p, 0.01);
                prop_assert!(tau.abs() <= 400.0);
            }
        }
    }
}
