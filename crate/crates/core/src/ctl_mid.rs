//! Timed-elastic-band MPC tracker.
//!
//! The band is a sequence of poses x_k with inputs u_k = (v_k, ω_k) and
//! elastic intervals Δt_k. It is optimised as a soft-constrained nonlinear
//! least-squares problem (multiple shooting): tracking, effort and time terms
//! plus one-sided quadratic penalties on dynamics defects, velocity bounds and
//! obstacle clearance. The solver is Levenberg–Marquardt with dense Cholesky on
//! normal equations accumulated row by row from the sparse residual Jacobian.
//! A final projection clamps the inputs and re-integrates the poses so the
//! returned band is dynamically consistent.

use nalgebra::{DMatrix, DVector};

use crate::geometry::{normalize_angle, Pose, Vec2};
use crate::noise::GaussianStream;
use crate::world::Obstacle;

/// Mid-level control period (s).
pub const MPC_DT: f64 = 0.1;

/// LiDAR range limit (m).
pub const LIDAR_RANGE: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MidLevelConfig {
    /// Diagonal of the state weight Q (x, y, θ).
    pub q_diag: [f64; 3],
    /// Diagonal of the input weight R (v, ω).
    pub r_diag: [f64; 2],
    pub lambda_t: f64,
    pub d_safe: f64,
    pub r_robot: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub max_node_spacing: f64,
    pub success_tolerance: f64,
    pub iteration_budget: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    pub max_nodes: usize,
    /// Penalty weight relative to the largest entry of Q.
    pub penalty_scale: f64,
    /// Extra clearance demanded by the penalty so the projected band keeps d_safe.
    pub clearance_margin: f64,
}

impl Default for MidLevelConfig {
    fn default() -> Self {
        Self {
            q_diag: [50.0; 3],
            r_diag: [0.5, 1.0],
            lambda_t: 1.0,
            d_safe: 0.5,
            r_robot: 0.4,
            v_max: 1.0,
            omega_max: 3.2,
            max_node_spacing: 0.4,
            success_tolerance: 0.2,
            iteration_budget: 50,
            dt_min: 0.05,
            dt_max: 1.0,
            max_nodes: 15,
            penalty_scale: 1e3,
            clearance_margin: 0.03,
        }
    }
}

impl MidLevelConfig {
    pub fn penalty_weight(&self) -> f64 {
        self.penalty_scale * self.q_diag.iter().cloned().fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.q_diag.iter().chain(self.r_diag.iter()).any(|w| !(*w >= 0.0)) || !(self.lambda_t >= 0.0) {
            return Err("weights must be non-negative".into());
        }
        if !(self.d_safe > 0.0) {
            return Err("d_safe must be positive".into());
        }
        if !(self.success_tolerance > 0.0) {
            return Err("success_tolerance must be positive".into());
        }
        if !(self.v_max > 0.0 && self.omega_max > 0.0) {
            return Err("velocity bounds must be positive".into());
        }
        if !(self.dt_min > 0.0 && self.dt_max >= self.dt_min) {
            return Err("interval bounds must satisfy 0 < dt_min <= dt_max".into());
        }
        if self.iteration_budget == 0 || self.max_nodes < 2 || !(self.max_node_spacing > 0.0) {
            return Err("iteration_budget >= 1, max_nodes >= 2 and max_node_spacing > 0 required".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BandNode {
    pub state: Pose,
    pub v: f64,
    pub omega: f64,
    /// Interval to the next node (s); unused on the last node.
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElasticBand {
    pub nodes: Vec<BandNode>,
    pub reference: Pose,
}

impl ElasticBand {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.nodes[..self.nodes.len().saturating_sub(1)].iter().map(|n| n.dt).sum()
    }

    /// Pose predicted `t` seconds after the first node (held at the ends).
    pub fn pose_at(&self, t: f64) -> Pose {
        let mut acc = 0.0;
        for w in self.nodes.windows(2) {
            let (a, b) = (w[0], w[1]);
            if t <= acc + a.dt && a.dt > 0.0 {
                let s = ((t - acc) / a.dt).clamp(0.0, 1.0);
                let dth = normalize_angle(b.state.theta - a.state.theta);
                return Pose::new(
                    a.state.x + s * (b.state.x - a.state.x),
                    a.state.y + s * (b.state.y - a.state.y),
                    normalize_angle(a.state.theta + s * dth),
                );
            }
            acc += a.dt;
        }
        self.nodes.last().map(|n| n.state).unwrap_or_default()
    }

    /// Largest node-to-node dynamics defect (position norm plus heading).
    pub fn max_defect(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| {
                let p = propagate(w[0].state, w[0].v, w[0].omega, w[0].dt);
                let d = Vec2::new(w[1].state.x - p.x, w[1].state.y - p.y).norm();
                d.max(normalize_angle(w[1].state.theta - p.theta).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Unicycle step x⁺ = x + Δt·(v cos θ, v sin θ, ω).
pub fn propagate(state: Pose, v: f64, omega: f64, dt: f64) -> Pose {
    Pose::new(
        state.x + dt * v * state.theta.cos(),
        state.y + dt * v * state.theta.sin(),
        normalize_angle(state.theta + dt * omega),
    )
}

// ---------------------------------------------------------------------------
// residual assembly

/// Variables per interval: v, ω, Δt, then the next pose (x, y, θ).
const BLOCK: usize = 6;

struct Problem<'a> {
    start: Pose,
    reference: Pose,
    obstacles: &'a [Obstacle],
    config: &'a MidLevelConfig,
    intervals: usize,
}

struct Normal {
    h: DMatrix<f64>,
    g: DVector<f64>,
}

impl Normal {
    fn add(&mut self, res: f64, jac: &[(usize, f64)]) {
        for &(i, a) in jac {
            self.g[i] += a * res;
            for &(j, b) in jac {
                self.h[(i, j)] += a * b;
            }
        }
    }
}

impl<'a> Problem<'a> {
    fn n_vars(&self) -> usize {
        self.intervals * BLOCK
    }

    fn pose(&self, z: &DVector<f64>, k: usize) -> Pose {
        if k == 0 {
            self.start
        } else {
            let o = (k - 1) * BLOCK + 3;
            Pose::new(z[o], z[o + 1], z[o + 2])
        }
    }

    fn pose_cols(&self, k: usize) -> Option<usize> {
        (k > 0).then(|| (k - 1) * BLOCK + 3)
    }

    /// Sum of squared residuals; fills the normal equations when requested.
    fn assemble(&self, z: &DVector<f64>, mut normal: Option<&mut Normal>) -> f64 {
        let cfg = self.config;
        let w = cfg.penalty_weight().sqrt();
        let sq = |x: f64| x.sqrt();
        let mut cost = 0.0;
        let mut push = |res: f64, jac: &[(usize, f64)], normal: &mut Option<&mut Normal>| {
            cost += res * res;
            if let Some(n) = normal.as_deref_mut() {
                n.add(res, jac);
            }
        };

        for k in 0..=self.intervals {
            let x = self.pose(z, k);
            let cols = self.pose_cols(k);
            let err = [x.x - self.reference.x, x.y - self.reference.y, normalize_angle(x.theta - self.reference.theta)];
            for (i, e) in err.iter().enumerate() {
                let s = sq(cfg.q_diag[i]);
                match cols {
                    Some(c) => push(s * e, &[(c + i, s)], &mut normal),
                    None => push(s * e, &[], &mut normal),
                }
            }
            if let Some(c) = cols {
                let p = Vec2::new(x.x, x.y);
                for o in self.obstacles {
                    let need = cfg.r_robot + cfg.d_safe + cfg.clearance_margin + o.core_radius();
                    let q = o.core_point(p);
                    let diff = p - q;
                    let dist = diff.norm();
                    if dist < need {
                        let dir = if dist > 1e-12 { diff * (1.0 / dist) } else { Vec2::new(1.0, 0.0) };
                        push(w * (need - dist), &[(c, -w * dir.x), (c + 1, -w * dir.y)], &mut normal);
                    }
                }
            }
        }

        for k in 0..self.intervals {
            let o = k * BLOCK;
            let (v, om, dt) = (z[o], z[o + 1], z[o + 2]);
            let (sr0, sr1, sl) = (sq(cfg.r_diag[0]), sq(cfg.r_diag[1]), sq(cfg.lambda_t));
            push(sr0 * v, &[(o, sr0)], &mut normal);
            push(sr1 * om, &[(o + 1, sr1)], &mut normal);
            push(sl * dt, &[(o + 2, sl)], &mut normal);

            let excess_v = v.abs() - cfg.v_max;
            if excess_v > 0.0 {
                push(w * excess_v, &[(o, w * v.signum())], &mut normal);
            }
            let excess_w = om.abs() - cfg.omega_max;
            if excess_w > 0.0 {
                push(w * excess_w, &[(o + 1, w * om.signum())], &mut normal);
            }

            // defect x_{k+1} − f(x_k, u_k, Δt_k)
            let xk = self.pose(z, k);
            let xn = self.pose(z, k + 1);
            let (c, s) = (xk.theta.cos(), xk.theta.sin());
            let next = o + 3;
            let prev = self.pose_cols(k);
            let d =
                [xn.x - xk.x - dt * v * c, xn.y - xk.y - dt * v * s, normalize_angle(xn.theta - xk.theta - dt * om)];
            let mut jac: Vec<(usize, f64)> = Vec::with_capacity(7);
            for (i, di) in d.iter().enumerate() {
                jac.clear();
                jac.push((next + i, w));
                match i {
                    0 => {
                        jac.push((o, -w * dt * c));
                        jac.push((o + 2, -w * v * c));
                        if let Some(p) = prev {
                            jac.push((p, -w));
                            jac.push((p + 2, w * dt * v * s));
                        }
                    }
                    1 => {
                        jac.push((o, -w * dt * s));
                        jac.push((o + 2, -w * v * s));
                        if let Some(p) = prev {
                            jac.push((p + 1, -w));
                            jac.push((p + 2, -w * dt * v * c));
                        }
                    }
                    _ => {
                        jac.push((o + 1, -w * dt));
                        jac.push((o + 2, -w * om));
                        if let Some(p) = prev {
                            jac.push((p + 2, -w));
                        }
                    }
                }
                push(w * di, &jac, &mut normal);
            }
        }
        cost
    }

    fn clamp_intervals(&self, z: &mut DVector<f64>) {
        for k in 0..self.intervals {
            let o = k * BLOCK + 2;
            z[o] = z[o].clamp(self.config.dt_min, self.config.dt_max);
        }
    }

    /// Removes intervals held at a bound by a gradient pointing outward.
    fn freeze_active_bounds(&self, z: &DVector<f64>, normal: &mut Normal) {
        let n = self.n_vars();
        for k in 0..self.intervals {
            let i = k * BLOCK + 2;
            let at_min = z[i] <= self.config.dt_min && normal.g[i] > 0.0;
            let at_max = z[i] >= self.config.dt_max && normal.g[i] < 0.0;
            if at_min || at_max {
                for j in 0..n {
                    normal.h[(i, j)] = 0.0;
                    normal.h[(j, i)] = 0.0;
                }
                normal.h[(i, i)] = 1.0;
                normal.g[i] = 0.0;
            }
        }
    }

    fn to_vector(&self, band: &ElasticBand) -> DVector<f64> {
        let mut z = DVector::zeros(self.n_vars());
        for k in 0..self.intervals {
            let o = k * BLOCK;
            let node = &band.nodes[k];
            let next = &band.nodes[k + 1].state;
            z[o] = node.v;
            z[o + 1] = node.omega;
            z[o + 2] = node.dt;
            z[o + 3] = next.x;
            z[o + 4] = next.y;
            z[o + 5] = next.theta;
        }
        z
    }

    fn to_band(&self, z: &DVector<f64>) -> ElasticBand {
        let mut nodes = Vec::with_capacity(self.intervals + 1);
        for k in 0..=self.intervals {
            let state = self.pose(z, k);
            let state = Pose { theta: normalize_angle(state.theta), ..state };
            let (v, omega, dt) =
                if k < self.intervals { (z[k * BLOCK], z[k * BLOCK + 1], z[k * BLOCK + 2]) } else { (0.0, 0.0, 0.0) };
            nodes.push(BandNode { state, v, omega, dt });
        }
        ElasticBand { nodes, reference: self.reference }
    }
}

/// Tracking, effort and time cost plus the constraint penalties.
pub fn band_cost(band: &ElasticBand, obstacles: &[Obstacle], config: &MidLevelConfig) -> f64 {
    if band.nodes.is_empty() {
        return 0.0;
    }
    let problem = Problem {
        start: band.nodes[0].state,
        reference: band.reference,
        obstacles,
        config,
        intervals: band.nodes.len() - 1,
    };
    // the last node carries no decision input but its u and Δt still count
    let last = band.nodes[band.nodes.len() - 1];
    let tail = config.r_diag[0] * last.v * last.v
        + config.r_diag[1] * last.omega * last.omega
        + config.lambda_t * last.dt * last.dt;
    problem.assemble(&problem.to_vector(band), None) + tail
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeReport {
    /// Cost after each accepted iteration, starting with the initial cost.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Re-integrates the poses from clamped inputs and intervals.
pub fn project_band(band: &ElasticBand, config: &MidLevelConfig) -> ElasticBand {
    let mut out = band.clone();
    let n = out.nodes.len();
    for k in 0..n.saturating_sub(1) {
        let node = &mut out.nodes[k];
        node.v = node.v.clamp(-config.v_max, config.v_max);
        node.omega = node.omega.clamp(-config.omega_max, config.omega_max);
        node.dt = node.dt.clamp(config.dt_min, config.dt_max);
        let node = out.nodes[k];
        out.nodes[k + 1].state = propagate(node.state, node.v, node.omega, node.dt);
    }
    out
}

/// Optimises the band; the first pose stays fixed.
pub fn optimize_band(
    band: &ElasticBand,
    obstacles: &[Obstacle],
    config: &MidLevelConfig,
) -> (ElasticBand, OptimizeReport) {
    let initial_cost = band_cost(band, obstacles, config);
    let mut report = OptimizeReport { cost_history: vec![initial_cost], iterations: 0, converged: true };
    if band.nodes.len() < 2 || initial_cost == 0.0 {
        return (band.clone(), report);
    }
    let problem = Problem {
        start: band.nodes[0].state,
        reference: band.reference,
        obstacles,
        config,
        intervals: band.nodes.len() - 1,
    };
    let n = problem.n_vars();
    let mut z = problem.to_vector(band);
    problem.clamp_intervals(&mut z);
    let mut cost = problem.assemble(&z, None);
    if cost < initial_cost {
        report.cost_history.push(cost);
    }
    let mut mu = 1e-4;
    report.converged = false;
    let mut normal = Normal { h: DMatrix::zeros(n, n), g: DVector::zeros(n) };

    while report.iterations < config.iteration_budget.max(1) {
        report.iterations += 1;
        normal.h.fill(0.0);
        normal.g.fill(0.0);
        problem.assemble(&z, Some(&mut normal));
        problem.freeze_active_bounds(&z, &mut normal);
        let mut accepted = false;
        while mu < 1e12 {
            let mut a = normal.h.clone();
            for i in 0..n {
                a[(i, i)] += mu * (normal.h[(i, i)].max(1e-6));
            }
            let Some(chol) = a.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&normal.g));
            let mut trial = &z + &step;
            problem.clamp_intervals(&mut trial);
            let trial_cost = problem.assemble(&trial, None);
            if trial_cost < cost {
                let gain = cost - trial_cost;
                z = trial;
                cost = trial_cost;
                report.cost_history.push(cost);
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                if gain <= 1e-10 * cost.max(1e-12) || step.amax() < 1e-9 {
                    report.converged = true;
                }
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            // no descent direction left: local minimum
            report.converged = true;
        }
        if report.converged {
            break;
        }
    }
    for k in 0..problem.intervals {
        let o = k * BLOCK + 5;
        z[o] = normalize_angle(z[o]);
    }

    let projected = project_band(&problem.to_band(&z), config);
    let projected_cost = band_cost(&projected, obstacles, config);
    if projected_cost <= initial_cost {
        (projected, report)
    } else {
        (band.clone(), report)
    }
}

/// Straight-line band from `start` to `goal` with the heading toward the goal.
/// Nodes that would violate the clearance are pushed sideways.
pub fn init_band(start: Pose, goal: Vec2, obstacles: &[Obstacle], config: &MidLevelConfig) -> ElasticBand {
    let delta = goal - start.position();
    let dist = delta.norm();
    let heading = if dist > 1e-9 { delta.y.atan2(delta.x) } else { start.theta };
    let reference = Pose::new(goal.x, goal.y, heading);
    let count = ((dist / config.max_node_spacing).ceil() as usize + 1).clamp(2, config.max_nodes);
    let segments = (count - 1) as f64;
    let dt = (dist / segments / config.v_max).clamp(config.dt_min, config.dt_max);
    let normal = Vec2::new(-heading.sin(), heading.cos());

    let mut states: Vec<Pose> = (0..count)
        .map(|k| {
            if k == 0 {
                return start;
            }
            let s = k as f64 / segments;
            let mut p = start.position() + delta * s;
            for o in obstacles {
                let need = config.r_robot + config.d_safe + config.clearance_margin + o.core_radius();
                let q = o.core_point(p);
                let gap = p.distance(q);
                if gap < need {
                    // push to the side of the line the obstacle core is not on
                    let side = if (q - start.position()).cross(delta) >= 0.0 { 1.0 } else { -1.0 };
                    p = p + normal * (side * (need - gap + 1e-3));
                }
            }
            Pose::new(p.x, p.y, heading)
        })
        .collect();
    states[0] = start;

    let mut nodes: Vec<BandNode> = states.iter().map(|s| BandNode { state: *s, ..Default::default() }).collect();
    for k in 0..count - 1 {
        let a = states[k];
        let b = states[k + 1];
        let step = a.position().distance(b.position());
        nodes[k].dt = dt;
        nodes[k].v = (step / dt).min(config.v_max);
        nodes[k].omega = (normalize_angle(b.theta - a.theta) / dt).clamp(-config.omega_max, config.omega_max);
    }
    ElasticBand { nodes, reference }
}

/// Reuses the previous band: pose 0 becomes the measured pose, nodes whose
/// interval has elapsed are dropped, and the band is resized toward the goal.
pub fn warm_start(
    previous: &ElasticBand,
    measured: Pose,
    goal: Vec2,
    elapsed: f64,
    obstacles: &[Obstacle],
    config: &MidLevelConfig,
) -> ElasticBand {
    let fresh = init_band(measured, goal, obstacles, config);
    let same_goal = previous.reference.position().distance(goal) < 1e-9;
    if !same_goal || previous.nodes.len() < 2 {
        return fresh;
    }
    let mut nodes = previous.nodes.clone();
    if elapsed >= nodes[0].dt && nodes.len() > 2 {
        nodes.remove(0);
    }
    nodes[0].state = measured;
    let want = fresh.nodes.len();
    if nodes.len() > want {
        nodes.truncate(want);
        let last = nodes.len() - 1;
        nodes[last] = BandNode { state: nodes[last].state, ..Default::default() };
    } else {
        while nodes.len() < want {
            let last = nodes.len() - 1;
            let tail = nodes[last].state;
            let remaining = goal - tail.position();
            let steps = (want - last) as f64;
            let p = tail.position() + remaining * (1.0 / steps);
            let dt = (remaining.norm() / steps / config.v_max).clamp(config.dt_min, config.dt_max);
            nodes[last].dt = dt;
            nodes[last].v = (remaining.norm() / steps / dt).min(config.v_max);
            nodes.push(BandNode { state: Pose::new(p.x, p.y, fresh.reference.theta), ..Default::default() });
        }
    }
    ElasticBand { nodes, reference: fresh.reference }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcStep {
    pub v: f64,
    pub omega: f64,
    /// First predicted pose of the optimised band.
    pub predicted: Pose,
    pub band: Option<ElasticBand>,
    /// Number of leading waypoints already within tolerance.
    pub consumed: usize,
    pub done: bool,
    pub converged: bool,
}

/// One receding-horizon step toward the first waypoint not yet reached.
/// `previous` is the band returned by the last call and the time since then.
pub fn mpc_step(
    measured: Pose,
    waypoints: &[Vec2],
    obstacles: &[Obstacle],
    config: &MidLevelConfig,
    previous: Option<(&ElasticBand, f64)>,
) -> MpcStep {
    let mut consumed = 0;
    while consumed < waypoints.len() && measured.position().distance(waypoints[consumed]) <= config.success_tolerance {
        consumed += 1;
    }
    if consumed == waypoints.len() {
        return MpcStep { v: 0.0, omega: 0.0, predicted: measured, band: None, consumed, done: true, converged: true };
    }
    let goal = waypoints[consumed];
    let start = match previous {
        Some((band, elapsed)) => warm_start(band, measured, goal, elapsed, obstacles, config),
        None => init_band(measured, goal, obstacles, config),
    };
    let (band, report) = optimize_band(&start, obstacles, config);
    let first = band.nodes[0];
    MpcStep {
        v: first.v.clamp(-config.v_max, config.v_max),
        omega: first.omega.clamp(-config.omega_max, config.omega_max),
        predicted: band.nodes[1].state,
        band: Some(band),
        consumed,
        done: false,
        converged: report.converged,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarObservation {
    pub id: usize,
    /// Measured surface distance (m).
    pub range: f64,
    /// Obstacle primitive shifted so that its clearance equals `range`.
    pub obstacle: Obstacle,
}

/// Range noise standard deviation for a given range (m).
pub fn lidar_sigma(range: f64) -> f64 {
    if range < 1.0 {
        0.01
    } else {
        0.01 * range
    }
}

/// Obstacles within range, with noisy clearances when `noise` is given.
pub fn lidar_ranges(pose: Pose, obstacles: &[Obstacle], noise: Option<&mut GaussianStream>) -> Vec<LidarObservation> {
    let p = pose.position();
    let mut noise = noise;
    let mut out = Vec::new();
    for o in obstacles {
        let truth = o.surface_distance(p);
        if truth > LIDAR_RANGE {
            continue;
        }
        let n = match noise.as_deref_mut() {
            Some(rng) => rng.sample(lidar_sigma(truth)),
            None => 0.0,
        };
        let q = o.core_point(p);
        let away = q - p;
        let len = away.norm();
        let dir = if len > 1e-12 { away * (1.0 / len) } else { Vec2::new(1.0, 0.0) };
        out.push(LidarObservation { id: o.id, range: truth + n, obstacle: o.translated(dir * n) });
    }
    out
}
