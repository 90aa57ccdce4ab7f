//! Replaceable controller and planner slots.
//!
//! Each trial builds fresh controller instances from the factories, so a
//! `PluginSet` can be shared by trials running in parallel.

use std::sync::Arc;

use greenbench_core::ctl_low::{low_level_step, LowLevelConfig, LowLevelState};
use greenbench_core::ctl_mid::{mpc_step, ElasticBand, MidLevelConfig};
use greenbench_core::physics::RobotParams;
use greenbench_core::planner::{self, Path, PlanError, PlannerConfig};
use greenbench_core::world::{Obstacle, OccupancyGrid, TerrainSample};
use greenbench_core::{Pose, Vec2};

/// Wheel-speed controller for both motors. Arrays are ordered (right, left).
pub trait LowLevelController: Send {
    fn torques(&mut self, omega_ref: [f64; 2], omega_meas: [f64; 2], terrain: &TerrainSample, dt: f64) -> [f64; 2];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerCommand {
    pub v: f64,
    pub omega: f64,
    /// Leading waypoints already reached.
    pub consumed: usize,
    pub done: bool,
}

/// Local tracker producing body velocity commands toward waypoints.
pub trait Tracker: Send {
    fn command(&mut self, measured: Pose, waypoints: &[Vec2], obstacles: &[Obstacle]) -> TrackerCommand;
    /// Pose the last plan predicts `elapsed` seconds after it was computed.
    fn predicted_pose(&self, elapsed: f64) -> Option<Pose>;
    /// Forget any warm-start state, e.g. after the waypoint list changes.
    fn reset(&mut self) {}
}

pub trait GlobalPlanner: Send + Sync {
    fn plan(&self, grid: &OccupancyGrid, start: Vec2, goal: Vec2) -> Result<Path, PlanError>;
}

pub type LowLevelFactory = Arc<dyn Fn() -> Box<dyn LowLevelController> + Send + Sync>;
pub type TrackerFactory = Arc<dyn Fn() -> Box<dyn Tracker> + Send + Sync>;

#[derive(Clone)]
pub struct PluginSet {
    pub low_level: LowLevelFactory,
    pub mid_level: TrackerFactory,
    pub global: Arc<dyn GlobalPlanner>,
}

impl PluginSet {
    pub fn baseline(low: LowLevelConfig, mid: MidLevelConfig, planner: PlannerConfig, params: RobotParams) -> Self {
        Self {
            low_level: Arc::new(move || Box::new(PidController::new(low.clone(), params.clone()))),
            mid_level: Arc::new(move || Box::new(MpcTracker::new(mid.clone()))),
            global: Arc::new(LazyThetaPlanner { config: planner }),
        }
    }
}

impl std::fmt::Debug for PluginSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("PluginSet { .. }")
    }
}

pub struct PidController {
    config: LowLevelConfig,
    params: RobotParams,
    right: LowLevelState,
    left: LowLevelState,
}

impl PidController {
    pub fn new(config: LowLevelConfig, params: RobotParams) -> Self {
        Self { config, params, right: LowLevelState::new(), left: LowLevelState::new() }
    }
}

impl LowLevelController for PidController {
    fn torques(&mut self, omega_ref: [f64; 2], omega_meas: [f64; 2], terrain: &TerrainSample, dt: f64) -> [f64; 2] {
        let r = low_level_step(&mut self.right, &self.config, omega_ref[0], omega_meas[0], terrain, &self.params, dt);
        let l = low_level_step(&mut self.left, &self.config, omega_ref[1], omega_meas[1], terrain, &self.params, dt);
        [r, l]
    }
}

pub struct MpcTracker {
    config: MidLevelConfig,
    band: Option<ElasticBand>,
    since_last: f64,
}

impl MpcTracker {
    pub fn new(config: MidLevelConfig) -> Self {
        Self { config, band: None, since_last: 0.0 }
    }

    /// Period the harness calls the tracker at (s).
    pub const PERIOD: f64 = greenbench_core::ctl_mid::MPC_DT;
}

impl Tracker for MpcTracker {
    fn command(&mut self, measured: Pose, waypoints: &[Vec2], obstacles: &[Obstacle]) -> TrackerCommand {
        let previous = self.band.as_ref().map(|b| (b, self.since_last));
        let step = mpc_step(measured, waypoints, obstacles, &self.config, previous);
        self.band = step.band;
        self.since_last = Self::PERIOD;
        TrackerCommand { v: step.v, omega: step.omega, consumed: step.consumed, done: step.done }
    }

    fn predicted_pose(&self, elapsed: f64) -> Option<Pose> {
        self.band.as_ref().map(|b| b.pose_at(elapsed))
    }

    fn reset(&mut self) {
        self.band = None;
    }
}

pub struct LazyThetaPlanner {
    pub config: PlannerConfig,
}

impl GlobalPlanner for LazyThetaPlanner {
    fn plan(&self, grid: &OccupancyGrid, start: Vec2, goal: Vec2) -> Result<Path, PlanError> {
        planner::plan(grid, start, goal, &self.config)
    }
}
