//! Scenario configuration and the per-category parameter files.
//!
//! Every parameter file key is optional; a missing key falls back to the
//! baseline value given by the `Default` impls below.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use greenbench_core::ctl_low::{FeedforwardConfig, LowLevelConfig, PidGains};
use greenbench_core::ctl_mid::MidLevelConfig;
use greenbench_core::physics::EncoderModel;
use greenbench_core::planner::{PlannerConfig, TraversalMode};
use greenbench_core::world::{self, World, MAX_PAYLOAD};
use greenbench_core::Vec2;

use crate::BenchError;

pub const C1_PARAMS_FILE: &str = "c1_pid_params.toml";
pub const C2_PARAMS_FILE: &str = "c2_pid_params.toml";
pub const C3_PARAMS_FILE: &str = "c3_pid_params.toml";

/// Low-level controller and encoder parameters, shared by all categories.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct C1Params {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub n_filter: f64,
    pub kaw: f64,
    pub anti_windup: bool,
    pub tau_f: f64,
    pub n_f: usize,
    pub tau_max: f64,
    pub feedforward: bool,
    /// Fixed feedforward gain; identified from the plant when absent.
    pub k_ff: Option<f64>,
    pub payload_estimate: f64,
    pub encoder_sigma: f64,
}

impl Default for C1Params {
    fn default() -> Self {
        let low = LowLevelConfig::default();
        Self {
            kp: low.gains.kp,
            ki: low.gains.ki,
            kd: low.gains.kd,
            n_filter: low.gains.n_filter,
            kaw: low.gains.kaw,
            anti_windup: low.gains.anti_windup,
            tau_f: low.tau_f,
            n_f: low.n_f,
            tau_max: low.tau_max,
            feedforward: true,
            k_ff: None,
            payload_estimate: 0.0,
            encoder_sigma: EncoderModel::DEFAULT_SIGMA,
        }
    }
}

impl C1Params {
    /// Controller configuration; `identified_k_ff` is used when no gain is pinned.
    pub fn low_level(
        &self,
        identified_k_ff: impl FnOnce() -> Result<f64, BenchError>,
    ) -> Result<LowLevelConfig, BenchError> {
        let feedforward = if self.feedforward {
            let k_ff = match self.k_ff {
                Some(k) => k,
                None => identified_k_ff()?,
            };
            FeedforwardConfig { k_ff, k_s: None, enabled: true, payload_estimate: self.payload_estimate }
        } else {
            FeedforwardConfig::default()
        };
        Ok(LowLevelConfig {
            gains: PidGains {
                kp: self.kp,
                ki: self.ki,
                kd: self.kd,
                n_filter: self.n_filter,
                kaw: self.kaw,
                anti_windup: self.anti_windup,
            },
            tau_f: self.tau_f,
            n_f: self.n_f,
            tau_max: self.tau_max,
            feedforward,
        })
    }
}

/// Mid-level tracker parameters and the Category-2 route.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct C2Params {
    pub q_diag: [f64; 3],
    pub r_diag: [f64; 2],
    pub lambda_t: f64,
    pub d_safe: f64,
    pub r_robot: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub max_node_spacing: f64,
    pub success_tolerance: f64,
    pub iteration_budget: usize,
    pub lidar_noise: bool,
    pub timeout: f64,
    /// Low-level reference pre-filter time constant used under the tracker (s).
    pub tau_f: f64,
    pub waypoints: Vec<[f64; 2]>,
}

impl Default for C2Params {
    fn default() -> Self {
        let mid = MidLevelConfig::default();
        Self {
            q_diag: mid.q_diag,
            r_diag: mid.r_diag,
            lambda_t: mid.lambda_t,
            d_safe: mid.d_safe,
            r_robot: mid.r_robot,
            v_max: mid.v_max,
            omega_max: mid.omega_max,
            max_node_spacing: mid.max_node_spacing,
            success_tolerance: mid.success_tolerance,
            iteration_budget: mid.iteration_budget,
            lidar_noise: true,
            timeout: 160.0,
            tau_f: 0.0,
            waypoints: vec![[10.2, 13.7], [15.0, 13.7], [18.0, 17.4]],
        }
    }
}

impl C2Params {
    pub fn mid_level(&self) -> MidLevelConfig {
        MidLevelConfig {
            q_diag: self.q_diag,
            r_diag: self.r_diag,
            lambda_t: self.lambda_t,
            d_safe: self.d_safe,
            r_robot: self.r_robot,
            v_max: self.v_max,
            omega_max: self.omega_max,
            max_node_spacing: self.max_node_spacing,
            success_tolerance: self.success_tolerance,
            iteration_budget: self.iteration_budget,
            ..MidLevelConfig::default()
        }
    }

    pub fn waypoint_list(&self) -> Vec<Vec2> {
        self.waypoints.iter().map(|&[x, y]| Vec2::new(x, y)).collect()
    }
}

/// Global planner parameters and the Category-3 goal.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct C3Params {
    pub how_many_corners: u8,
    pub w_euc_cost: f64,
    pub w_traversal_cost: f64,
    pub n_max: usize,
    pub goal: [f64; 2],
    pub resolution: f64,
    pub replan_period: f64,
    /// "obstacle_proximity" or "goal_distance".
    pub traversal_mode: String,
    /// Occupancy grid file; rasterised from the world when absent.
    pub grid: Option<PathBuf>,
}

impl Default for C3Params {
    fn default() -> Self {
        let p = PlannerConfig::default();
        Self {
            how_many_corners: p.how_many_corners,
            w_euc_cost: p.w_euc,
            w_traversal_cost: p.w_traversal,
            n_max: p.n_max,
            goal: [18.0, 17.4],
            resolution: 0.1,
            replan_period: 2.0,
            traversal_mode: "obstacle_proximity".into(),
            grid: None,
        }
    }
}

impl C3Params {
    pub fn planner(&self) -> Result<PlannerConfig, BenchError> {
        let traversal_mode = match self.traversal_mode.as_str() {
            "obstacle_proximity" => TraversalMode::ObstacleProximity,
            "goal_distance" => TraversalMode::GoalDistance,
            other => return Err(BenchError::Config(format!("unknown traversal_mode `{other}`"))),
        };
        let cfg = PlannerConfig {
            how_many_corners: self.how_many_corners,
            w_euc: self.w_euc_cost,
            w_traversal: self.w_traversal_cost,
            n_max: self.n_max,
            traversal_mode,
            ..PlannerConfig::default()
        };
        cfg.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn goal_point(&self) -> Vec2 {
        Vec2::new(self.goal[0], self.goal[1])
    }
}

fn parse_params<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T, BenchError> {
    toml::from_str(text).map_err(|e| BenchError::Params { path: path.to_path_buf(), message: e.to_string() })
}

fn read_params<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T, BenchError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| BenchError::Io { path: p.to_path_buf(), source: e })?;
            parse_params(&text, p)
        }
    }
}

pub fn parse_c1(text: &str) -> Result<C1Params, BenchError> {
    parse_params(text, Path::new(C1_PARAMS_FILE))
}

pub fn parse_c2(text: &str) -> Result<C2Params, BenchError> {
    parse_params(text, Path::new(C2_PARAMS_FILE))
}

pub fn parse_c3(text: &str) -> Result<C3Params, BenchError> {
    parse_params(text, Path::new(C3_PARAMS_FILE))
}

/// Paths of the parameter files; `None` selects the baseline defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamPaths {
    pub c1: Option<PathBuf>,
    pub c2: Option<PathBuf>,
    pub c3: Option<PathBuf>,
}

impl ParamPaths {
    /// Looks for the three standard file names inside `dir`.
    pub fn from_dir(dir: &Path) -> Self {
        let pick = |name: &str| {
            let p = dir.join(name);
            p.is_file().then_some(p)
        };
        Self { c1: pick(C1_PARAMS_FILE), c2: pick(C2_PARAMS_FILE), c3: pick(C3_PARAMS_FILE) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub category: u8,
    pub payload: f64,
    pub terrain_slope: bool,
    pub change_terrain: bool,
    pub trials: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub params: ParamPaths,
    pub world: Option<PathBuf>,
    pub noise: bool,
    /// Overrides the category's run length (s): the profile length for
    /// category 1, the timeout for categories 2 and 3.
    pub duration: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            category: 1,
            payload: 0.0,
            terrain_slope: false,
            change_terrain: false,
            trials: 1,
            seed: 0,
            out_dir: PathBuf::from("."),
            params: ParamPaths::default(),
            world: None,
            noise: true,
            duration: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if !(1..=3).contains(&self.category) {
            return Err(BenchError::Config(format!("category must be 1, 2 or 3, got {}", self.category)));
        }
        if !(0.0..=MAX_PAYLOAD).contains(&self.payload) {
            return Err(BenchError::Config(format!("payload must lie in [0, {MAX_PAYLOAD}] kg, got {}", self.payload)));
        }
        if self.trials == 0 {
            return Err(BenchError::Config("trials must be at least 1".into()));
        }
        if let Some(d) = self.duration {
            if !(d > 0.0) || !d.is_finite() {
                return Err(BenchError::Config(format!("duration must be positive, got {d}")));
            }
        }
        Ok(())
    }

    /// World with this scenario's disturbances applied.
    pub fn build_world(&self) -> Result<World, BenchError> {
        let base = match &self.world {
            None => World::greenhouse(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| BenchError::Io { path: p.clone(), source: e })?;
                world::load_world(&text)?
            }
        };
        Ok(base.with_disturbances(world::Disturbances {
            payload_mass: self.payload,
            slope: self.terrain_slope,
            terrain_change: self.change_terrain,
        })?)
    }

    pub fn c1(&self) -> Result<C1Params, BenchError> {
        read_params(self.params.c1.as_deref())
    }

    pub fn c2(&self) -> Result<C2Params, BenchError> {
        read_params(self.params.c2.as_deref())
    }

    pub fn c3(&self) -> Result<C3Params, BenchError> {
        read_params(self.params.c3.as_deref())
    }
}
