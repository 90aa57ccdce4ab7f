//! Greenhouse world: terrain sectors, slope field, obstacles and rasterisation.

use std::fmt::Write as _;

use serde::Deserialize;
use thiserror::Error;

use crate::geometry::{closest_point_on_segment, point_segment_distance, Polygon, Rect, Vec2};

/// Embedded default layout (five corridors, rows 4 m apart, three sectors).
pub const DEFAULT_WORLD_TOML: &str = include_str!("../data/greenhouse.toml");

/// Largest admissible payload (kg).
pub const MAX_PAYLOAD: f64 = 70.0;
/// Largest admissible slope magnitude (deg).
pub const MAX_SLOPE_DEG: f64 = 4.0;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("world config parse error: {0}")]
    Parse(String),
    #[error("invalid world config: {0}")]
    Invalid(String),
    #[error("position ({x:.3}, {y:.3}) is outside the world bounds")]
    OutOfBounds { x: f64, y: f64 },
    #[error("rasterisation error: {0}")]
    Raster(String),
    #[error("occupancy grid text error at line {line}: {message}")]
    GridFormat { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, WorldError>;

#[derive(Debug, Clone, PartialEq)]
pub struct TerrainSector {
    pub id: u8,
    pub name: String,
    pub region: Polygon,
    pub mu: f64,
    pub crr: f64,
    pub cd: f64,
}

/// Slope profile along a fixed axis: φ is interpolated piecewise-linearly in the
/// signed distance from `origin` along `heading`, held constant past the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeField {
    pub enabled: bool,
    pub origin: Vec2,
    /// Direction of the axis (rad); also the uphill direction for positive φ.
    pub heading: f64,
    /// (axis distance m, slope deg) knots, sorted by distance.
    pub knots: Vec<(f64, f64)>,
}

impl SlopeField {
    pub fn flat() -> Self {
        Self { enabled: false, origin: Vec2::ZERO, heading: 0.0, knots: vec![(0.0, 0.0)] }
    }

    /// Slope angle in degrees at `p`.
    pub fn slope_deg(&self, p: Vec2) -> f64 {
        if !self.enabled || self.knots.is_empty() {
            return 0.0;
        }
        let s = (p - self.origin).dot(Vec2::from_angle(self.heading));
        let first = self.knots[0];
        if s <= first.0 {
            return first.1;
        }
        for w in self.knots.windows(2) {
            let (s0, p0) = w[0];
            let (s1, p1) = w[1];
            if s <= s1 {
                if s1 == s0 {
                    return p1;
                }
                return p0 + (p1 - p0) * (s - s0) / (s1 - s0);
            }
        }
        self.knots[self.knots.len() - 1].1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Disc {
        center: Vec2,
        radius: f64,
    },
    /// Thick segment (capsule) such as a wall.
    Segment {
        a: Vec2,
        b: Vec2,
        thickness: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    /// 1-based obstacle index j.
    pub id: usize,
    pub shape: Shape,
}

impl Obstacle {
    pub fn disc(id: usize, center: Vec2, radius: f64) -> Self {
        Self { id, shape: Shape::Disc { center, radius } }
    }

    pub fn segment(id: usize, a: Vec2, b: Vec2, thickness: f64) -> Self {
        Self { id, shape: Shape::Segment { a, b, thickness } }
    }

    /// Signed distance from `p` to the obstacle surface (negative inside).
    pub fn surface_distance(&self, p: Vec2) -> f64 {
        match self.shape {
            Shape::Disc { center, radius } => p.distance(center) - radius,
            Shape::Segment { a, b, thickness } => point_segment_distance(p, a, b) - 0.5 * thickness,
        }
    }

    /// Closest point of the obstacle's core (disc centre or segment axis) to `p`.
    pub fn core_point(&self, p: Vec2) -> Vec2 {
        match self.shape {
            Shape::Disc { center, .. } => center,
            Shape::Segment { a, b, .. } => closest_point_on_segment(p, a, b),
        }
    }

    /// Effective radius around the core point (r_Oj).
    pub fn core_radius(&self) -> f64 {
        match self.shape {
            Shape::Disc { radius, .. } => radius,
            Shape::Segment { thickness, .. } => 0.5 * thickness,
        }
    }

    pub fn translated(&self, offset: Vec2) -> Self {
        let shape = match self.shape {
            Shape::Disc { center, radius } => Shape::Disc { center: center + offset, radius },
            Shape::Segment { a, b, thickness } => Shape::Segment { a: a + offset, b: b + offset, thickness },
        };
        Self { id: self.id, shape }
    }

    /// Distance from the closed cell square to the obstacle surface (≤ 0 when touching).
    fn rect_distance(&self, cell: &Rect) -> f64 {
        match self.shape {
            Shape::Disc { center, radius } => cell.distance_to_point(center) - radius,
            Shape::Segment { a, b, thickness } => cell.distance_to_segment(a, b) - 0.5 * thickness,
        }
    }

    fn bounding_rect(&self, pad: f64) -> Rect {
        let (min, max) = match self.shape {
            Shape::Disc { center, radius } => {
                let r = radius + pad;
                (center - Vec2::new(r, r), center + Vec2::new(r, r))
            }
            Shape::Segment { a, b, thickness } => {
                let r = 0.5 * thickness + pad;
                (Vec2::new(a.x.min(b.x) - r, a.y.min(b.y) - r), Vec2::new(a.x.max(b.x) + r, a.y.max(b.y) + r))
            }
        };
        Rect::new(min, max)
    }
}

/// Local ground properties at a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerrainSample {
    /// Soil type s.
    pub sector: u8,
    pub mu: f64,
    pub crr: f64,
    pub cd: f64,
    /// Slope angle φ of the field at the point (deg).
    pub phi_deg: f64,
    /// Uphill direction of the slope field (rad).
    pub slope_heading: f64,
}

impl TerrainSample {
    /// Flat ground with the given sector coefficients.
    pub fn flat(sector: u8, mu: f64, crr: f64, cd: f64) -> Self {
        Self { sector, mu, crr, cd, phi_deg: 0.0, slope_heading: 0.0 }
    }

    /// Pitch (rad) experienced by a robot heading `theta`; positive when climbing.
    pub fn pitch_rad(&self, theta: f64) -> f64 {
        if self.phi_deg == 0.0 {
            return 0.0;
        }
        (self.phi_deg.to_radians().tan() * (theta - self.slope_heading).cos()).atan()
    }

    /// Same sample with the slope replaced by a pitch already projected on the heading.
    pub fn with_pitch(&self, pitch_rad: f64, theta: f64) -> Self {
        Self { phi_deg: pitch_rad.to_degrees(), slope_heading: theta, ..*self }
    }
}

/// Disturbance switches applied on top of a loaded layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbances {
    pub payload_mass: f64,
    pub slope: bool,
    pub terrain_change: bool,
}

#[derive(Debug, Clone)]
pub struct World {
    pub bounds: Rect,
    /// Active sectors, sorted by id.
    pub sectors: Vec<TerrainSector>,
    pub slope: SlopeField,
    pub obstacles: Vec<Obstacle>,
    pub payload_mass: f64,
    pub terrain_change_enabled: bool,
    full_map: Vec<TerrainSector>,
    uniform_sector: u8,
}

impl World {
    /// Default greenhouse layout.
    pub fn greenhouse() -> Self {
        load_world(DEFAULT_WORLD_TOML).expect("embedded greenhouse config is valid")
    }

    /// Returns a copy with payload, slope and terrain-change switches applied.
    pub fn with_disturbances(&self, d: Disturbances) -> Result<World> {
        check_payload(d.payload_mass)?;
        let mut w = self.clone();
        w.payload_mass = d.payload_mass;
        w.slope.enabled = d.slope;
        w.terrain_change_enabled = d.terrain_change;
        w.sectors = active_sectors(&w.full_map, w.uniform_sector, d.terrain_change, &w.bounds)?;
        Ok(w)
    }

    /// All sectors of the terrain map regardless of the terrain-change switch.
    pub fn terrain_map(&self) -> &[TerrainSector] {
        &self.full_map
    }

    pub fn sector(&self, id: u8) -> Option<&TerrainSector> {
        self.full_map.iter().find(|s| s.id == id)
    }
}

/// Looks up the terrain sample at `position`. Points on a shared boundary
/// resolve to the sector with the lowest id.
pub fn sector_at(world: &World, position: Vec2) -> Result<TerrainSample> {
    if !position.is_finite() || !world.bounds.contains(position) {
        return Err(WorldError::OutOfBounds { x: position.x, y: position.y });
    }
    let sector = world
        .sectors
        .iter()
        .find(|s| s.region.contains(position))
        .ok_or_else(|| WorldError::Invalid(format!("no sector covers ({}, {})", position.x, position.y)))?;
    Ok(TerrainSample {
        sector: sector.id,
        mu: sector.mu,
        crr: sector.crr,
        cd: sector.cd,
        phi_deg: world.slope.slope_deg(position),
        slope_heading: world.slope.heading,
    })
}

/// Minimum signed surface distance to any obstacle and the id of the nearest one.
/// Returns `(f64::INFINITY, None)` for an obstacle-free world.
pub fn obstacle_clearance(world: &World, position: Vec2) -> (f64, Option<usize>) {
    nearest_obstacle(&world.obstacles, position)
}

pub fn nearest_obstacle(obstacles: &[Obstacle], position: Vec2) -> (f64, Option<usize>) {
    obstacles.iter().fold((f64::INFINITY, None), |(best, id), o| {
        let d = o.surface_distance(position);
        if d < best {
            (d, Some(o.id))
        } else {
            (best, id)
        }
    })
}

/// Occupancy grid; row 0 is the row with the smallest y.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub origin: Vec2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn empty(origin: Vec2, resolution: f64, width: usize, height: usize) -> Self {
        Self { origin, resolution, width, height, cells: vec![false; width * height] }
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn in_bounds(&self, col: i64, row: i64) -> bool {
        col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height
    }

    pub fn occupied(&self, col: usize, row: usize) -> bool {
        self.cells[self.index(col, row)]
    }

    pub fn set(&mut self, col: usize, row: usize, value: bool) {
        let i = self.index(col, row);
        self.cells[i] = value;
    }

    /// Cell containing a world point, if inside the grid.
    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let c = ((p.x - self.origin.x) / self.resolution).floor();
        let r = ((p.y - self.origin.y) / self.resolution).floor();
        if !c.is_finite() || !r.is_finite() {
            return None;
        }
        let (c, r) = (c as i64, r as i64);
        // points on the far boundary belong to the last cell
        let c = if c == self.width as i64 && p.x <= self.origin.x + self.width as f64 * self.resolution {
            c - 1
        } else {
            c
        };
        let r = if r == self.height as i64 && p.y <= self.origin.y + self.height as f64 * self.resolution {
            r - 1
        } else {
            r
        };
        self.in_bounds(c, r).then_some((c as usize, r as usize))
    }

    pub fn cell_center(&self, col: usize, row: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (col as f64 + 0.5) * self.resolution,
            self.origin.y + (row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn cell_rect(&self, col: usize, row: usize) -> Rect {
        let min = Vec2::new(self.origin.x + col as f64 * self.resolution, self.origin.y + row as f64 * self.resolution);
        Rect::new(min, min + Vec2::new(self.resolution, self.resolution))
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    /// Plain-text export: `width height resolution` then one `0`/`1` line per row.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.cells.len() + self.height + 32);
        let _ = writeln!(out, "{} {} {}", self.width, self.height, self.resolution);
        for row in 0..self.height {
            for col in 0..self.width {
                out.push(if self.occupied(col, row) { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    /// Parses the text export. The origin is not part of the format and is set to (0, 0).
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(WorldError::GridFormat { line: 1, message: "missing header".into() })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(WorldError::GridFormat {
                line: 1,
                message: format!("expected `width height resolution`, got `{header}`"),
            });
        }
        let bad = |what: &str| WorldError::GridFormat { line: 1, message: format!("invalid {what}") };
        let width: usize = fields[0].parse().map_err(|_| bad("width"))?;
        let height: usize = fields[1].parse().map_err(|_| bad("height"))?;
        let resolution: f64 = fields[2].parse().map_err(|_| bad("resolution"))?;
        if !(resolution > 0.0) || width == 0 || height == 0 {
            return Err(bad("dimensions"));
        }
        let mut grid = OccupancyGrid::empty(Vec2::ZERO, resolution, width, height);
        for row in 0..height {
            let line_no = row + 2;
            let line = lines.next().ok_or(WorldError::GridFormat { line: line_no, message: "missing row".into() })?;
            if line.len() != width {
                return Err(WorldError::GridFormat {
                    line: line_no,
                    message: format!("expected {width} cells, got {}", line.len()),
                });
            }
            for (col, ch) in line.bytes().enumerate() {
                match ch {
                    b'0' => {}
                    b'1' => grid.set(col, row, true),
                    other => {
                        return Err(WorldError::GridFormat {
                            line: line_no,
                            message: format!("unexpected character `{}`", other as char),
                        })
                    }
                }
            }
        }
        Ok(grid)
    }
}

/// Rasterises the obstacles: a cell is occupied iff its square intersects an
/// obstacle inflated by `inflation` metres.
pub fn rasterize(world: &World, resolution: f64, inflation: f64) -> Result<OccupancyGrid> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(WorldError::Raster(format!("resolution must be positive, got {resolution}")));
    }
    if !(inflation >= 0.0) {
        return Err(WorldError::Raster(format!("inflation must be non-negative, got {inflation}")));
    }
    let (w, h) = (world.bounds.width(), world.bounds.height());
    if resolution > w || resolution > h {
        return Err(WorldError::Raster(format!("resolution {resolution} m exceeds the world extent {w} x {h} m")));
    }
    let width = (w / resolution - 1e-9).ceil() as usize;
    let height = (h / resolution - 1e-9).ceil() as usize;
    let mut grid = OccupancyGrid::empty(world.bounds.min, resolution, width, height);
    for obstacle in &world.obstacles {
        let bb = obstacle.bounding_rect(inflation);
        let to_cell = |v: f64, o: f64| ((v - o) / resolution).floor() as i64;
        let c0 = to_cell(bb.min.x, grid.origin.x).max(0);
        let r0 = to_cell(bb.min.y, grid.origin.y).max(0);
        let c1 = to_cell(bb.max.x, grid.origin.x).min(width as i64 - 1);
        let r1 = to_cell(bb.max.y, grid.origin.y).min(height as i64 - 1);
        for row in r0..=r1 {
            for col in c0..=c1 {
                let (col, row) = (col as usize, row as usize);
                if grid.occupied(col, row) {
                    continue;
                }
                if obstacle.rect_distance(&grid.cell_rect(col, row)) <= inflation {
                    grid.set(col, row, true);
                }
            }
        }
    }
    Ok(grid)
}

// ---------------------------------------------------------------------------
// config loading

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldConfig {
    #[serde(default)]
    payload_mass: f64,
    #[serde(default)]
    terrain_change: bool,
    uniform_sector: Option<u8>,
    bounds: BoundsConfig,
    slope: Option<SlopeConfig>,
    sectors: Vec<SectorConfig>,
    #[serde(default)]
    obstacles: Vec<ObstacleConfig>,
    #[serde(default)]
    plant_rows: Vec<PlantRowConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsConfig {
    min: Vec2,
    max: Vec2,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SlopeConfig {
    #[serde(default)]
    enabled: bool,
    #[serde(default)]
    origin: Vec2,
    #[serde(default)]
    heading: f64,
    knots: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SectorConfig {
    id: u8,
    #[serde(default)]
    name: String,
    mu: f64,
    crr: f64,
    cd: f64,
    polygon: Vec<Vec2>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum ObstacleConfig {
    Disc { center: Vec2, radius: f64 },
    Segment { a: Vec2, b: Vec2, thickness: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantRowConfig {
    start: Vec2,
    end: Vec2,
    spacing: f64,
    stem_radius: f64,
}

fn check_payload(m: f64) -> Result<()> {
    if !(0.0..=MAX_PAYLOAD).contains(&m) {
        return Err(WorldError::Invalid(format!("payload_mass = {m} kg is outside [0, {MAX_PAYLOAD}]")));
    }
    Ok(())
}

fn active_sectors(
    full: &[TerrainSector],
    uniform: u8,
    terrain_change: bool,
    bounds: &Rect,
) -> Result<Vec<TerrainSector>> {
    if terrain_change {
        return Ok(full.to_vec());
    }
    let base = full
        .iter()
        .find(|s| s.id == uniform)
        .ok_or_else(|| WorldError::Invalid(format!("uniform_sector = {uniform} names no sector")))?;
    let mut single = base.clone();
    single.region = Polygon::new(vec![
        bounds.min,
        Vec2::new(bounds.max.x, bounds.min.y),
        bounds.max,
        Vec2::new(bounds.min.x, bounds.max.y),
    ]);
    Ok(vec![single])
}

/// Parses and validates a world config.
pub fn load_world(config_text: &str) -> Result<World> {
    let cfg: WorldConfig = toml::from_str(config_text).map_err(|e| WorldError::Parse(e.to_string()))?;
    check_payload(cfg.payload_mass)?;

    let bounds = Rect::new(cfg.bounds.min, cfg.bounds.max);
    if !(bounds.width() > 0.0 && bounds.height() > 0.0) {
        return Err(WorldError::Invalid("bounds: max must exceed min on both axes".into()));
    }

    let mut sectors = Vec::with_capacity(cfg.sectors.len());
    for (i, s) in cfg.sectors.into_iter().enumerate() {
        let field = format!("sectors[{i}] (id {})", s.id);
        if !(1..=3).contains(&s.id) {
            return Err(WorldError::Invalid(format!("{field}: id must be 1, 2 or 3")));
        }
        if !(s.mu > 0.0) {
            return Err(WorldError::Invalid(format!("{field}: mu must be > 0, got {}", s.mu)));
        }
        if !(s.crr >= 0.0) {
            return Err(WorldError::Invalid(format!("{field}: crr must be >= 0, got {}", s.crr)));
        }
        if !(s.cd >= 0.0) {
            return Err(WorldError::Invalid(format!("{field}: cd must be >= 0, got {}", s.cd)));
        }
        let region = Polygon::new(s.polygon);
        if region.vertices.len() < 3 || !(region.area() > 1e-9) {
            return Err(WorldError::Invalid(format!("{field}: polygon is degenerate")));
        }
        let bb = region.bounding_rect();
        let tol = 1e-9;
        if bb.min.x < bounds.min.x - tol
            || bb.min.y < bounds.min.y - tol
            || bb.max.x > bounds.max.x + tol
            || bb.max.y > bounds.max.y + tol
        {
            return Err(WorldError::Invalid(format!("{field}: polygon leaves the world bounds")));
        }
        sectors.push(TerrainSector { id: s.id, name: s.name, region, mu: s.mu, crr: s.crr, cd: s.cd });
    }
    if sectors.is_empty() {
        return Err(WorldError::Invalid("at least one sector is required".into()));
    }
    sectors.sort_by_key(|s| s.id);
    if sectors.windows(2).any(|w| w[0].id == w[1].id) {
        return Err(WorldError::Invalid("sector ids must be unique".into()));
    }
    check_partition(&sectors, &bounds)?;

    let uniform_sector = cfg.uniform_sector.unwrap_or(sectors[0].id);
    if !cfg.terrain_change && sectors.iter().all(|s| s.id != uniform_sector) {
        return Err(WorldError::Invalid(format!("uniform_sector = {uniform_sector} names no sector")));
    }

    let slope = match cfg.slope {
        None => SlopeField::flat(),
        Some(sc) => {
            if sc.knots.is_empty() {
                return Err(WorldError::Invalid("slope.knots must not be empty".into()));
            }
            let knots: Vec<(f64, f64)> = sc.knots.iter().map(|k| (k[0], k[1])).collect();
            if knots.windows(2).any(|w| w[1].0 < w[0].0) {
                return Err(WorldError::Invalid("slope.knots must be sorted by distance".into()));
            }
            if let Some(k) = knots.iter().find(|k| !(k.1.abs() <= MAX_SLOPE_DEG)) {
                return Err(WorldError::Invalid(format!("slope.knots: |{}| deg exceeds {MAX_SLOPE_DEG} deg", k.1)));
            }
            SlopeField { enabled: sc.enabled, origin: sc.origin, heading: sc.heading, knots }
        }
    };

    let mut obstacles = Vec::new();
    for (i, o) in cfg.obstacles.into_iter().enumerate() {
        let id = obstacles.len() + 1;
        let obstacle = match o {
            ObstacleConfig::Disc { center, radius } => {
                if !(radius > 0.0) {
                    return Err(WorldError::Invalid(format!("obstacles[{i}]: radius must be > 0")));
                }
                Obstacle::disc(id, center, radius)
            }
            ObstacleConfig::Segment { a, b, thickness } => {
                if !(thickness > 0.0) {
                    return Err(WorldError::Invalid(format!("obstacles[{i}]: thickness must be > 0")));
                }
                Obstacle::segment(id, a, b, thickness)
            }
        };
        obstacles.push(obstacle);
    }
    for (i, row) in cfg.plant_rows.iter().enumerate() {
        if !(row.spacing > 0.0) || !(row.stem_radius > 0.0) {
            return Err(WorldError::Invalid(format!("plant_rows[{i}]: spacing and stem_radius must be > 0")));
        }
        let len = row.start.distance(row.end);
        let n = (len / row.spacing + 1e-9).floor() as usize;
        let dir = if len > 0.0 { (row.end - row.start) * (1.0 / len) } else { Vec2::ZERO };
        for k in 0..=n {
            let id = obstacles.len() + 1;
            obstacles.push(Obstacle::disc(id, row.start + dir * (k as f64 * row.spacing), row.stem_radius));
        }
    }

    let active = active_sectors(&sectors, uniform_sector, cfg.terrain_change, &bounds)?;
    Ok(World {
        bounds,
        sectors: active,
        slope,
        obstacles,
        payload_mass: cfg.payload_mass,
        terrain_change_enabled: cfg.terrain_change,
        full_map: sectors,
        uniform_sector,
    })
}

/// Sectors must be disjoint and jointly cover the bounds: total area matches and
/// every probe point of an offset lattice lies in exactly one sector.
fn check_partition(sectors: &[TerrainSector], bounds: &Rect) -> Result<()> {
    let total: f64 = sectors.iter().map(|s| s.region.area()).sum();
    if (total - bounds.area()).abs() > 1e-6 * bounds.area() {
        return Err(WorldError::Invalid(format!(
            "sector areas sum to {total:.6} m² but the world covers {:.6} m² (overlap or gap)",
            bounds.area()
        )));
    }
    const N: usize = 97;
    for i in 0..N {
        for j in 0..N {
            let p = Vec2::new(
                bounds.min.x + (i as f64 + 0.377_123_457) / N as f64 * bounds.width(),
                bounds.min.y + (j as f64 + 0.577_215_665) / N as f64 * bounds.height(),
            );
            let hits: Vec<u8> = sectors.iter().filter(|s| s.region.contains(p)).map(|s| s.id).collect();
            match hits.len() {
                1 => {}
                0 => return Err(WorldError::Invalid(format!("sectors leave ({:.3}, {:.3}) uncovered", p.x, p.y))),
                _ => return Err(WorldError::Invalid(format!("sectors {hits:?} overlap at ({:.3}, {:.3})", p.x, p.y))),
            }
        }
    }
    Ok(())
}
