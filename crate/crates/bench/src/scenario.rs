//! Closed-loop trial runners for the three benchmark categories.
//!
//! Timing: physics at 5 ms, low-level control and logging at 10 ms, the
//! tracker at 100 ms and global replanning every `replan_period`.

use greenbench_core::ctl_low::{
    feedforward_gain, identify_static_gain, open_loop_slope_experiment, LowLevelConfig, CONTROL_DT,
};
use greenbench_core::ctl_mid::{lidar_ranges, MidLevelConfig};
use greenbench_core::metrics::{closest_point_on_polyline, evaluate, Limits, LogRow, MetricReport, TrialLog};
use greenbench_core::noise::{trial_seed, GaussianStream, Stream};
use greenbench_core::physics::{
    inverse_kinematics, measure_encoders, motor_first_order, step_robot, EncoderModel, RobotParams, RobotState,
    PHYSICS_DT,
};
use greenbench_core::planner::{Path, Replanner};
use greenbench_core::world::{nearest_obstacle, rasterize, sector_at, OccupancyGrid, TerrainSample, World};
use greenbench_core::{Pose, Vec2};

use crate::config::{C1Params, ScenarioConfig};
use crate::plugins::{LowLevelController, PluginSet, Tracker};
use crate::BenchError;

/// Start pose shared by all categories.
pub const START_POSE: Pose = Pose { x: 10.1, y: 3.0, theta: 0.78 };
pub const CATEGORY1_DURATION: f64 = 60.0;
const PHYSICS_PER_CONTROL: usize = 2;
const CONTROL_PER_TRACKER: usize = 10;

/// Wheel speed of the category-1 profile (rad/s).
pub const PROFILE_SPEED: f64 = 0.75;

/// Category-1 wheel references (right, left) at time `t`.
///
/// Ramp to 0.75 rad/s over [4, 5] s, hold to 34 s, spin in place with the
/// right wheel reversed until 42 s, drive forward until 50 s, then stop.
pub fn category1_reference(t: f64) -> [f64; 2] {
    let w = PROFILE_SPEED;
    if t < 4.0 {
        [0.0, 0.0]
    } else if t < 5.0 {
        let ramp = w * (t - 4.0);
        [ramp, ramp]
    } else if t < 34.0 {
        [w, w]
    } else if t < 42.0 {
        [-w, w]
    } else if t < 50.0 {
        [w, w]
    } else {
        [0.0, 0.0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialFailure {
    Timeout { t: f64 },
    Collision { t: f64, clearance: f64 },
    Divergence(String),
    NoPath(String),
}

impl std::fmt::Display for TrialFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrialFailure::Timeout { t } => write!(f, "timeout at t = {t:.2} s"),
            TrialFailure::Collision { t, clearance } => {
                write!(f, "contact at t = {t:.2} s (clearance {clearance:.3} m)")
            }
            TrialFailure::Divergence(m) => write!(f, "physics divergence: {m}"),
            TrialFailure::NoPath(m) => write!(f, "no path: {m}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub category: u8,
    pub trial: usize,
    pub seed: u64,
    pub log: TrialLog,
    /// `None` when the log is too short to evaluate.
    pub report: Option<MetricReport>,
    pub failure: Option<TrialFailure>,
    /// Smallest obstacle surface distance minus the robot radius (m).
    pub min_clearance: f64,
    /// Closest approach to each waypoint (m), categories 2 and 3.
    pub waypoint_min_distance: Vec<f64>,
    /// Plans issued during the run with their issue time, category 3.
    pub plans: Vec<(f64, Path)>,
    pub final_pose: Pose,
}

impl TrialOutcome {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

/// Everything a trial needs besides the plugins.
#[derive(Debug, Clone)]
pub struct Setup {
    pub category: u8,
    pub world: World,
    pub params: RobotParams,
    pub c1: C1Params,
    pub mid: MidLevelConfig,
    pub waypoints: Vec<Vec2>,
    pub lidar_noise: bool,
    pub timeout: f64,
    pub goal: Vec2,
    pub grid: Option<OccupancyGrid>,
    pub replan_period: f64,
    /// Pre-filter time constant replacing the category-1 value under the tracker.
    pub tracking_tau_f: f64,
}

impl Setup {
    pub fn new(config: &ScenarioConfig) -> Result<Self, BenchError> {
        config.validate()?;
        let world = config.build_world()?;
        let c1 = config.c1()?;
        let c2 = config.c2()?;
        let c3 = config.c3()?;
        let mid = c2.mid_level();
        mid.validate().map_err(BenchError::Config)?;
        let grid = if config.category == 3 {
            Some(match &c3.grid {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| BenchError::Io { path: p.clone(), source: e })?;
                    OccupancyGrid::from_text(&text)?
                }
                None => rasterize(&world, c3.resolution, mid.r_robot + mid.d_safe)?,
            })
        } else {
            None
        };
        if !(c3.replan_period > 0.0) {
            return Err(BenchError::Config("replan_period must be positive".into()));
        }
        Ok(Self {
            category: config.category,
            tracking_tau_f: c2.tau_f,
            world,
            params: RobotParams::default(),
            c1,
            waypoints: c2.waypoint_list(),
            lidar_noise: c2.lidar_noise,
            timeout: config.duration.unwrap_or(c2.timeout),
            goal: c3.goal_point(),
            grid,
            replan_period: c3.replan_period,
            mid,
        })
    }

    /// Low-level configuration, identifying the feedforward gain if needed.
    pub fn low_level(&self) -> Result<LowLevelConfig, BenchError> {
        let mut low = self.c1.low_level(|| identified_feedforward_gain(&self.world, &self.params))?;
        if self.category >= 2 {
            low.tau_f = self.tracking_tau_f;
        }
        Ok(low)
    }
}

/// K_ff = −K_s/K_m with K_s from open-loop steady states on flat and 4° compact sand.
pub fn identified_feedforward_gain(world: &World, params: &RobotParams) -> Result<f64, BenchError> {
    let sand = world
        .sector(3)
        .or_else(|| world.terrain_map().first())
        .ok_or_else(|| BenchError::Config("world has no terrain sectors".into()))?;
    let base = TerrainSample::flat(sand.id, sand.mu, sand.crr, sand.cd);
    let run = open_loop_slope_experiment(base, PROFILE_SPEED, 0.0, params, 600.0);
    let k_s = identify_static_gain(run, 0.0, 4.0).map_err(|e| BenchError::Control(e.to_string()))?;
    let (k_m, _) = motor_first_order(params).map_err(|e| BenchError::Control(e.to_string()))?;
    Ok(feedforward_gain(k_s, k_m))
}

/// Baseline plugins configured from the scenario's parameter files.
pub fn baseline_plugins(config: &ScenarioConfig) -> Result<PluginSet, BenchError> {
    let setup = Setup::new(config)?;
    let planner = config.c3()?.planner()?;
    Ok(PluginSet::baseline(setup.low_level()?, setup.mid.clone(), planner, setup.params.clone()))
}

/// Shared plant, sensor and low-level loop.
struct Sim<'a> {
    world: &'a World,
    params: &'a RobotParams,
    state: RobotState,
    encoders: EncoderModel,
    low: Box<dyn LowLevelController>,
    log: TrialLog,
    r_robot: f64,
    min_clearance: f64,
}

impl<'a> Sim<'a> {
    fn new(category: u8, setup: &'a Setup, low: Box<dyn LowLevelController>, seed: u64, noise: bool) -> Self {
        Self {
            world: &setup.world,
            params: &setup.params,
            state: RobotState::at_rest(START_POSE),
            encoders: EncoderModel::new(setup.c1.encoder_sigma, noise, seed),
            low,
            log: TrialLog::new(category, CONTROL_DT),
            r_robot: setup.mid.r_robot,
            min_clearance: f64::INFINITY,
        }
    }

    fn terrain(&self) -> Result<TerrainSample, TrialFailure> {
        let theta = self.state.pose.theta;
        let s =
            sector_at(self.world, self.state.pose.position()).map_err(|e| TrialFailure::Divergence(e.to_string()))?;
        Ok(s.with_pitch(s.pitch_rad(theta), theta))
    }

    /// Runs one control period and logs it; `fill` adds category-specific fields.
    fn tick(&mut self, t: f64, omega_ref: [f64; 2], fill: impl FnOnce(&mut LogRow)) -> Result<(), TrialFailure> {
        let field =
            sector_at(self.world, self.state.pose.position()).map_err(|e| TrialFailure::Divergence(e.to_string()))?;
        let terrain = self.terrain()?;
        let (mr, ml) = measure_encoders(&self.state, &mut self.encoders);
        let tau = self.low.torques(omega_ref, [mr, ml], &terrain, CONTROL_DT);
        let mut row = LogRow {
            t,
            omega_ref,
            omega_meas: [mr, ml],
            omega_true: [self.state.right.omega, self.state.left.omega],
            torque: tau,
            x: self.state.pose.x,
            y: self.state.pose.y,
            theta: self.state.pose.theta,
            slope_deg: field.phi_deg,
            sector: field.sector,
            ..Default::default()
        };
        fill(&mut row);
        self.log.rows.push(row);
        for _ in 0..PHYSICS_PER_CONTROL {
            self.state = step_robot(&self.state, tau[0], tau[1], self.world, self.params, PHYSICS_DT)
                .map_err(|e| TrialFailure::Divergence(e.to_string()))?;
        }
        let clearance = nearest_obstacle(&self.world.obstacles, self.state.pose.position()).0 - self.r_robot;
        self.min_clearance = self.min_clearance.min(clearance);
        if clearance < 0.0 {
            return Err(TrialFailure::Collision { t: t + CONTROL_DT, clearance });
        }
        Ok(())
    }

    fn finish(self, trial: usize, seed: u64, failure: Option<TrialFailure>, extra: Extra) -> TrialOutcome {
        let report = if self.log.rows.len() >= 2 { evaluate(&self.log, &limits(self.params)).ok() } else { None };
        TrialOutcome {
            category: self.log.category,
            trial,
            seed,
            report,
            failure,
            min_clearance: self.min_clearance,
            waypoint_min_distance: extra.waypoint_min_distance,
            plans: extra.plans,
            final_pose: self.state.pose,
            log: self.log,
        }
    }
}

#[derive(Default)]
struct Extra {
    waypoint_min_distance: Vec<f64>,
    plans: Vec<(f64, Path)>,
}

pub fn limits(params: &RobotParams) -> Limits {
    Limits {
        omega_wheel_max: params.omega_max,
        tau_max: params.tau_max,
        v_max: params.v_max,
        omega_max: params.omega_max,
    }
}

fn steps_for(duration: f64) -> usize {
    (duration / CONTROL_DT).round() as usize
}

/// Open-loop wheel-speed profile under the low-level controller.
pub fn run_category1(config: &ScenarioConfig, plugins: &PluginSet, trial: usize) -> Result<TrialOutcome, BenchError> {
    let setup = Setup::new(config)?;
    run_category1_with(config, &setup, plugins, trial)
}

pub fn run_category1_with(
    config: &ScenarioConfig,
    setup: &Setup,
    plugins: &PluginSet,
    trial: usize,
) -> Result<TrialOutcome, BenchError> {
    let duration = config.duration.unwrap_or(CATEGORY1_DURATION);
    let steps = steps_for(duration);
    if steps == 0 {
        return Err(BenchError::Config(format!("simulation length {duration} s is shorter than one control step")));
    }
    let seed = trial_seed(config.seed, trial as u64);
    let mut sim = Sim::new(1, setup, (plugins.low_level)(), seed, config.noise);
    let mut failure = None;
    for k in 0..steps {
        let t = k as f64 * CONTROL_DT;
        if let Err(f) = sim.tick(t, category1_reference(t), |_| {}) {
            failure = Some(f);
            break;
        }
    }
    Ok(sim.finish(trial, seed, failure, Extra::default()))
}

/// Waypoint-following state shared by categories 2 and 3.
struct Follow {
    tracker: Box<dyn Tracker>,
    lidar: Option<GaussianStream>,
    reached: usize,
    cmd: (f64, f64),
    issued_at: f64,
}

impl Follow {
    /// Calls the tracker; returns `true` once every waypoint is reached.
    fn update(&mut self, t: f64, pose: Pose, waypoints: &[Vec2], world: &World) -> bool {
        let seen: Vec<_> =
            lidar_ranges(pose, &world.obstacles, self.lidar.as_mut()).into_iter().map(|o| o.obstacle).collect();
        let pending = &waypoints[self.reached.min(waypoints.len())..];
        let cmd = self.tracker.command(pose, pending, &seen);
        self.reached += cmd.consumed;
        self.cmd = (cmd.v, cmd.omega);
        self.issued_at = t;
        cmd.done
    }

    fn fill(&self, row: &mut LogRow, t: f64) {
        row.v_cmd = Some(self.cmd.0);
        row.omega_cmd = Some(self.cmd.1);
        row.teb = Some(
            self.tracker.predicted_pose(t - self.issued_at).map(|p| p.position()).unwrap_or(Vec2::new(row.x, row.y)),
        );
        row.waypoint = Some(self.reached);
    }
}

fn follower(setup: &Setup, plugins: &PluginSet, seed: u64, noise: bool) -> Follow {
    Follow {
        tracker: (plugins.mid_level)(),
        lidar: (noise && setup.lidar_noise).then(|| GaussianStream::new(seed, Stream::Lidar)),
        reached: 0,
        cmd: (0.0, 0.0),
        issued_at: 0.0,
    }
}

/// Waypoint tracking with the mid-level over the low-level loop.
pub fn run_category2(config: &ScenarioConfig, plugins: &PluginSet, trial: usize) -> Result<TrialOutcome, BenchError> {
    let setup = Setup::new(config)?;
    run_category2_with(config, &setup, plugins, trial)
}

pub fn run_category2_with(
    config: &ScenarioConfig,
    setup: &Setup,
    plugins: &PluginSet,
    trial: usize,
) -> Result<TrialOutcome, BenchError> {
    let seed = trial_seed(config.seed, trial as u64);
    let mut sim = Sim::new(2, setup, (plugins.low_level)(), seed, config.noise);
    let mut follow = follower(setup, plugins, seed, config.noise);
    let waypoints = setup.waypoints.clone();
    let mut closest = vec![f64::INFINITY; waypoints.len()];
    let mut failure = None;
    let steps = steps_for(setup.timeout);
    let mut k = 0;
    loop {
        let t = k as f64 * CONTROL_DT;
        let pose = sim.state.pose;
        for (c, w) in closest.iter_mut().zip(&waypoints) {
            *c = c.min(pose.position().distance(*w));
        }
        if k % CONTROL_PER_TRACKER == 0 && follow.update(t, pose, &waypoints, &setup.world) {
            break;
        }
        if k >= steps {
            failure = Some(TrialFailure::Timeout { t });
            break;
        }
        let refs = wheel_refs(follow.cmd, &setup.params);
        if let Err(f) = sim.tick(t, refs, |row| follow.fill(row, t)) {
            failure = Some(f);
            break;
        }
        k += 1;
    }
    Ok(sim.finish(trial, seed, failure, Extra { waypoint_min_distance: closest, plans: Vec::new() }))
}

fn wheel_refs(cmd: (f64, f64), params: &RobotParams) -> [f64; 2] {
    let (r, l) = inverse_kinematics(cmd.0, cmd.1, params);
    [r, l]
}

/// Tracker waypoints for a plan: interior corners, then the exact goal.
fn plan_waypoints(plan: &Path, goal: Vec2) -> Vec<Vec2> {
    let mut w: Vec<Vec2> = plan.nodes.iter().skip(1).take(plan.nodes.len().saturating_sub(2)).copied().collect();
    w.push(goal);
    w
}

/// Global replanning toward a single goal, tracked by the mid-level.
pub fn run_category3(config: &ScenarioConfig, plugins: &PluginSet, trial: usize) -> Result<TrialOutcome, BenchError> {
    let setup = Setup::new(config)?;
    run_category3_with(config, &setup, plugins, trial)
}

pub fn run_category3_with(
    config: &ScenarioConfig,
    setup: &Setup,
    plugins: &PluginSet,
    trial: usize,
) -> Result<TrialOutcome, BenchError> {
    let grid = setup.grid.as_ref().ok_or_else(|| BenchError::Config("category 3 needs an occupancy grid".into()))?;
    let seed = trial_seed(config.seed, trial as u64);
    let mut sim = Sim::new(3, setup, (plugins.low_level)(), seed, config.noise);
    let mut follow = follower(setup, plugins, seed, config.noise);
    let mut replanner = Replanner::new(setup.replan_period);
    let mut plans: Vec<(f64, Path)> = Vec::new();
    let mut waypoints: Vec<Vec2> = Vec::new();
    let mut closest = f64::INFINITY;
    let mut failure = None;
    let steps = steps_for(setup.timeout);
    let mut k = 0;
    loop {
        let t = k as f64 * CONTROL_DT;
        let pose = sim.state.pose;
        closest = closest.min(pose.position().distance(setup.goal));
        if k % CONTROL_PER_TRACKER == 0 {
            if replanner.due(t) {
                match plugins.global.plan(grid, pose.position(), setup.goal) {
                    Ok(plan) => {
                        waypoints = plan_waypoints(&plan, setup.goal);
                        follow.reached = 0;
                        plans.push((t, plan));
                    }
                    Err(e) => {
                        failure = Some(TrialFailure::NoPath(e.to_string()));
                        break;
                    }
                }
            }
            if follow.update(t, pose, &waypoints, &setup.world) {
                break;
            }
        }
        if k >= steps {
            failure = Some(TrialFailure::Timeout { t });
            break;
        }
        let refs = wheel_refs(follow.cmd, &setup.params);
        let current = &plans.last().expect("a plan is issued on the first step").1;
        let plan_point = closest_point_on_polyline(&current.nodes, pose.position()).ok();
        if let Err(f) = sim.tick(t, refs, |row| {
            follow.fill(row, t);
            row.plan_point = plan_point;
        }) {
            failure = Some(f);
            break;
        }
        k += 1;
    }
    Ok(sim.finish(trial, seed, failure, Extra { waypoint_min_distance: vec![closest], plans }))
}

/// Runs the configured category once.
pub fn run_trial(
    config: &ScenarioConfig,
    setup: &Setup,
    plugins: &PluginSet,
    trial: usize,
) -> Result<TrialOutcome, BenchError> {
    match config.category {
        1 => run_category1_with(config, setup, plugins, trial),
        2 => run_category2_with(config, setup, plugins, trial),
        3 => run_category3_with(config, setup, plugins, trial),
        c => Err(BenchError::Config(format!("category must be 1, 2 or 3, got {c}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_shape() {
        assert_eq!(category1_reference(0.0), [0.0, 0.0]);
        assert_eq!(category1_reference(4.5), [0.375, 0.375]);
        assert_eq!(category1_reference(10.0), [0.75, 0.75]);
        assert_eq!(category1_reference(35.0), [-0.75, 0.75]);
        assert_eq!(category1_reference(45.0), [0.75, 0.75]);
        assert_eq!(category1_reference(55.0), [0.0, 0.0]);
    }

    #[test]
    fn plan_waypoints_end_at_goal() {
        let goal = Vec2::new(5.0, 5.0);
        let single = Path { cells: vec![(0, 0)], nodes: vec![Vec2::new(4.95, 4.95)], cost: 0.0 };
        assert_eq!(plan_waypoints(&single, goal), vec![goal]);
        let p = Path {
            cells: vec![(0, 0), (1, 1), (2, 2)],
            nodes: vec![Vec2::ZERO, Vec2::new(1.0, 2.0), Vec2::new(4.95, 4.95)],
            cost: 0.0,
        };
        assert_eq!(plan_waypoints(&p, goal), vec![Vec2::new(1.0, 2.0), goal]);
    }
}
