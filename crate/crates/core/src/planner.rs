//! Lazy Theta* any-angle planner on an occupancy grid.
//!
//! Nodes sit at cell centres. Line of sight is the supercover of the segment
//! between two centres, so a segment that grazes the corner of an occupied
//! cell is blocked. Edge costs add a per-cell traversal penalty to the
//! weighted Euclidean length.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::geometry::{Pose, Vec2};
use crate::world::OccupancyGrid;

pub type Cell = (usize, usize);

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("no free cell within {radius} m of ({x:.3}, {y:.3})")]
    NoFreeCell { x: f64, y: f64, radius: f64 },
    #[error("goal is unreachable from the start")]
    Unreachable,
    #[error("expansion limit of {0} nodes reached")]
    ExpansionLimit(usize),
    #[error("invalid planner configuration: {0}")]
    Config(String),
}

/// How the per-cell traversal penalty is defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraversalMode {
    /// Cells within three cells of an obstacle cost (3 − distance in cells).
    ObstacleProximity,
    /// Each cell costs its distance to the goal (m).
    GoalDistance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    pub how_many_corners: u8,
    pub w_euc: f64,
    pub w_traversal: f64,
    pub n_max: usize,
    pub traversal_mode: TraversalMode,
    /// Radius for snapping start and goal onto free cells (m).
    pub snap_radius: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            how_many_corners: 8,
            w_euc: 1.0,
            w_traversal: 2.0,
            n_max: 200_000,
            traversal_mode: TraversalMode::ObstacleProximity,
            snap_radius: 0.5,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.how_many_corners != 4 && self.how_many_corners != 8 {
            return Err(PlanError::Config(format!("how_many_corners must be 4 or 8, got {}", self.how_many_corners)));
        }
        if !(self.w_euc >= 0.0) || !(self.w_traversal >= 0.0) {
            return Err(PlanError::Config("weights must be non-negative".into()));
        }
        if self.n_max == 0 {
            return Err(PlanError::Config("n_max must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub cells: Vec<Cell>,
    /// Cell centres in world coordinates, start to goal.
    pub nodes: Vec<Vec2>,
    pub cost: f64,
}

/// Visits the supercover of the segment between two cell centres: every cell
/// whose closed square the segment touches, in order from `a` to `b`.
pub fn supercover(a: Cell, b: Cell, mut visit: impl FnMut(i64, i64) -> bool) -> bool {
    let (x0, y0) = (a.0 as i64, a.1 as i64);
    let (x1, y1) = (b.0 as i64, b.1 as i64);
    let (mut dx, mut dy) = (x1 - x0, y1 - y0);
    let xstep = dx.signum();
    let ystep = dy.signum();
    dx = dx.abs();
    dy = dy.abs();
    let (ddx, ddy) = (2 * dx, 2 * dy);
    let (mut x, mut y) = (x0, y0);
    if !visit(x, y) {
        return false;
    }
    if ddx >= ddy {
        let mut error = dx;
        let mut prev = dx;
        for _ in 0..dx {
            x += xstep;
            error += ddy;
            if error > ddx {
                y += ystep;
                error -= ddx;
                match (error + prev).cmp(&ddx) {
                    Ordering::Less => {
                        if !visit(x, y - ystep) {
                            return false;
                        }
                    }
                    Ordering::Greater => {
                        if !visit(x - xstep, y) {
                            return false;
                        }
                    }
                    Ordering::Equal => {
                        if !visit(x, y - ystep) || !visit(x - xstep, y) {
                            return false;
                        }
                    }
                }
            }
            if !visit(x, y) {
                return false;
            }
            prev = error;
        }
    } else {
        let mut error = dy;
        let mut prev = dy;
        for _ in 0..dy {
            y += ystep;
            error += ddx;
            if error > ddy {
                x += xstep;
                error -= ddy;
                match (error + prev).cmp(&ddy) {
                    Ordering::Less => {
                        if !visit(x - xstep, y) {
                            return false;
                        }
                    }
                    Ordering::Greater => {
                        if !visit(x, y - ystep) {
                            return false;
                        }
                    }
                    Ordering::Equal => {
                        if !visit(x - xstep, y) || !visit(x, y - ystep) {
                            return false;
                        }
                    }
                }
            }
            if !visit(x, y) {
                return false;
            }
            prev = error;
        }
    }
    true
}

/// True iff no cell of the supercover of `a`–`b` is occupied.
pub fn line_of_sight(grid: &OccupancyGrid, a: Cell, b: Cell) -> bool {
    supercover(a, b, |c, r| grid.in_bounds(c, r) && !grid.occupied(c as usize, r as usize))
}

/// Euclidean distance between cell centres in world units.
pub fn heuristic(grid: &OccupancyGrid, n: Cell, goal: Cell) -> f64 {
    let dc = n.0 as f64 - goal.0 as f64;
    let dr = n.1 as f64 - goal.1 as f64;
    dc.hypot(dr) * grid.resolution
}

/// Per-cell traversal penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct TraversalField {
    pub width: usize,
    pub values: Vec<f64>,
}

impl TraversalField {
    pub fn new(grid: &OccupancyGrid, mode: TraversalMode, goal: Cell) -> Self {
        let mut values = vec![0.0; grid.width * grid.height];
        match mode {
            TraversalMode::ObstacleProximity => {
                const RADIUS: i64 = 3;
                for row in 0..grid.height {
                    for col in 0..grid.width {
                        if !grid.occupied(col, row) {
                            continue;
                        }
                        for dr in -RADIUS..=RADIUS {
                            for dc in -RADIUS..=RADIUS {
                                let (c, r) = (col as i64 + dc, row as i64 + dr);
                                if !grid.in_bounds(c, r) {
                                    continue;
                                }
                                let d = ((dc * dc + dr * dr) as f64).sqrt();
                                let p = RADIUS as f64 - d;
                                let i = grid.index(c as usize, r as usize);
                                if p > values[i] {
                                    values[i] = p;
                                }
                            }
                        }
                    }
                }
            }
            TraversalMode::GoalDistance => {
                for row in 0..grid.height {
                    for col in 0..grid.width {
                        values[grid.index(col, row)] = heuristic(grid, (col, row), goal);
                    }
                }
            }
        }
        Self { width: grid.width, values }
    }

    pub fn at(&self, c: Cell) -> f64 {
        self.values[c.1 * self.width + c.0]
    }
}

/// Cost of the straight move `a` → `b`: w_euc·length plus w_traversal·res·Σ
/// penalty over the supercover cells after `a`.
pub fn edge_cost(grid: &OccupancyGrid, field: &TraversalField, a: Cell, b: Cell, config: &PlannerConfig) -> f64 {
    let length = heuristic(grid, a, b);
    if config.w_traversal == 0.0 || a == b {
        return config.w_euc * length;
    }
    let mut penalty = 0.0;
    let start = (a.0 as i64, a.1 as i64);
    supercover(a, b, |c, r| {
        if (c, r) != start {
            penalty += field.at((c as usize, r as usize));
        }
        true
    });
    config.w_euc * length + config.w_traversal * grid.resolution * penalty
}

/// Grid neighbours reachable by a straight move (diagonals need both side cells free).
pub fn neighbours(grid: &OccupancyGrid, n: Cell, corners: u8) -> Vec<Cell> {
    const ORTHO: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
    const DIAG: [(i64, i64); 4] = [(1, 1), (-1, 1), (-1, -1), (1, -1)];
    let free = |c: i64, r: i64| grid.in_bounds(c, r) && !grid.occupied(c as usize, r as usize);
    let (c, r) = (n.0 as i64, n.1 as i64);
    let mut out = Vec::with_capacity(8);
    for (dc, dr) in ORTHO {
        if free(c + dc, r + dr) {
            out.push(((c + dc) as usize, (r + dr) as usize));
        }
    }
    if corners == 8 {
        for (dc, dr) in DIAG {
            if free(c + dc, r + dr) && free(c + dc, r) && free(c, r + dr) {
                out.push(((c + dc) as usize, (r + dr) as usize));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OpenEntry {
    f: f64,
    h: f64,
    cell: Cell,
    g: f64,
}

impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    // reversed for the max-heap: lower f, then lower h, then lower (col, row)
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.h.total_cmp(&self.h)).then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Search statistics, mainly for diagnostics and tests.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchStats {
    pub expansions: usize,
    /// f = g + h of every expanded node, in expansion order.
    pub popped_f: Vec<f64>,
}

pub fn lazy_theta_star(
    grid: &OccupancyGrid,
    start: Cell,
    goal: Cell,
    config: &PlannerConfig,
) -> Result<Path, PlanError> {
    lazy_theta_star_with_stats(grid, start, goal, config).map(|(p, _)| p)
}

pub fn lazy_theta_star_with_stats(
    grid: &OccupancyGrid,
    start: Cell,
    goal: Cell,
    config: &PlannerConfig,
) -> Result<(Path, SearchStats), PlanError> {
    config.validate()?;
    let blocked = |c: Cell| c.0 >= grid.width || c.1 >= grid.height || grid.occupied(c.0, c.1);
    if blocked(start) || blocked(goal) {
        return Err(PlanError::Unreachable);
    }
    let field = TraversalField::new(grid, config.traversal_mode, goal);
    let cost = |a: Cell, b: Cell| edge_cost(grid, &field, a, b, config);
    let idx = |c: Cell| grid.index(c.0, c.1);
    let n = grid.width * grid.height;
    let mut g = vec![f64::INFINITY; n];
    let mut parent: Vec<Cell> = vec![(usize::MAX, usize::MAX); n];
    let mut closed = vec![false; n];
    let mut stats = SearchStats::default();
    let mut open = BinaryHeap::new();

    g[idx(start)] = 0.0;
    parent[idx(start)] = start;
    // scaled so it stays admissible for any length weight
    let h_of = |c: Cell| config.w_euc * heuristic(grid, c, goal);
    let h0 = h_of(start);
    open.push(OpenEntry { f: h0, h: h0, cell: start, g: 0.0 });

    while let Some(entry) = open.pop() {
        let s = entry.cell;
        let si = idx(s);
        if closed[si] || entry.g != g[si] {
            continue;
        }
        if stats.expansions >= config.n_max {
            return Err(PlanError::ExpansionLimit(config.n_max));
        }
        stats.expansions += 1;
        stats.popped_f.push(entry.f);

        // deferred line-of-sight check against the optimistic parent
        let p = parent[si];
        if p != s && !line_of_sight(grid, p, s) {
            let mut best = (f64::INFINITY, s);
            for nb in neighbours(grid, s, config.how_many_corners) {
                let ni = idx(nb);
                if closed[ni] && parent[ni] != s {
                    let cand = g[ni] + cost(nb, s);
                    if cand < best.0 {
                        best = (cand, nb);
                    }
                }
            }
            g[si] = best.0;
            parent[si] = best.1;
            if !best.0.is_finite() {
                continue;
            }
            if s == goal {
                // the goal is only accepted with a verified cost
                open.push(OpenEntry { f: best.0, h: 0.0, cell: s, g: best.0 });
                continue;
            }
        }
        closed[si] = true;

        if s == goal {
            return reconstruct(grid, &parent, start, goal, &cost).map(|p| (p, stats));
        }

        let ps = parent[si];
        for nb in neighbours(grid, s, config.how_many_corners) {
            let ni = idx(nb);
            // optimistic any-angle move from the parent of s, or the grid edge
            // from s when traversal penalties make that cheaper
            let via_parent = g[idx(ps)] + cost(ps, nb);
            let via_self = if ps == s { via_parent } else { g[si] + cost(s, nb) };
            let (cand, from) =
                if via_self < via_parent - 1e-12 * via_parent { (via_self, s) } else { (via_parent, ps) };
            if cand < g[ni] {
                g[ni] = cand;
                parent[ni] = from;
                // closed nodes are reopened when a cheaper route turns up
                closed[ni] = false;
                let h = h_of(nb);
                open.push(OpenEntry { f: cand + h, h, cell: nb, g: cand });
            }
        }
    }
    Err(PlanError::Unreachable)
}

fn reconstruct(
    grid: &OccupancyGrid,
    parent: &[Cell],
    start: Cell,
    goal: Cell,
    edge: &dyn Fn(Cell, Cell) -> f64,
) -> Result<Path, PlanError> {
    let mut cells = vec![goal];
    let mut c = goal;
    while c != start {
        c = parent[grid.index(c.0, c.1)];
        if c.0 >= grid.width || cells.len() > grid.width * grid.height {
            return Err(PlanError::Unreachable);
        }
        cells.push(c);
    }
    cells.reverse();
    // ancestors may have been reopened with a cheaper cost after their
    // children were labelled, so the stored goal cost can be stale
    let cost = cells.windows(2).map(|w| edge(w[0], w[1])).sum();
    let nodes = cells.iter().map(|&(c, r)| grid.cell_center(c, r)).collect();
    Ok(Path { cells, nodes, cost })
}

/// Nearest free cell to `p` whose centre lies within `radius`; ties resolve
/// to the lowest (row, col).
pub fn snap_to_free(grid: &OccupancyGrid, p: Vec2, radius: f64) -> Result<Cell, PlanError> {
    let err = PlanError::NoFreeCell { x: p.x, y: p.y, radius };
    let fc = (p.x - grid.origin.x) / grid.resolution - 0.5;
    let fr = (p.y - grid.origin.y) / grid.resolution - 0.5;
    if !fc.is_finite() || !fr.is_finite() {
        return Err(err);
    }
    let reach = (radius / grid.resolution).ceil() as i64 + 1;
    let (c0, r0) = (fc.round() as i64, fr.round() as i64);
    let mut best: Option<(f64, i64, i64)> = None;
    for r in r0 - reach..=r0 + reach {
        for c in c0 - reach..=c0 + reach {
            if !grid.in_bounds(c, r) || grid.occupied(c as usize, r as usize) {
                continue;
            }
            let d = grid.cell_center(c as usize, r as usize).distance(p);
            if d > radius {
                continue;
            }
            let better = match best {
                None => true,
                Some((bd, bc, br)) => d < bd || (d == bd && (r, c) < (br, bc)),
            };
            if better {
                best = Some((d, c, r));
            }
        }
    }
    best.map(|(_, c, r)| (c as usize, r as usize)).ok_or(err)
}

/// Plans between world points, snapping both onto free cells.
pub fn plan(grid: &OccupancyGrid, start: Vec2, goal: Vec2, config: &PlannerConfig) -> Result<Path, PlanError> {
    let s = snap_to_free(grid, start, config.snap_radius)?;
    let g = snap_to_free(grid, goal, config.snap_radius)?;
    lazy_theta_star(grid, s, g, config)
}

/// Plans from the current pose toward the goal.
pub fn replan(pose: Pose, goal: Vec2, grid: &OccupancyGrid, config: &PlannerConfig) -> Result<Path, PlanError> {
    plan(grid, pose.position(), goal, config)
}

/// Periodic replanning on simulated time.
#[derive(Debug, Clone)]
pub struct Replanner {
    pub period: f64,
    last: Option<f64>,
}

impl Replanner {
    pub fn new(period: f64) -> Self {
        assert!(period > 0.0, "replanning period must be positive");
        Self { period, last: None }
    }

    /// True when a new plan is due at time `t`.
    pub fn due(&mut self, t: f64) -> bool {
        match self.last {
            Some(last) if t + 1e-9 < last + self.period => false,
            _ => {
                self.last = Some(t);
                true
            }
        }
    }
}
