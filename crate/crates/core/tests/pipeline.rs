use greenbench_core::ctl_low::{low_level_step, LowLevelConfig, LowLevelState, CONTROL_DT};
use greenbench_core::physics::{step_robot, RobotParams, RobotState, PHYSICS_DT};
use greenbench_core::planner::{line_of_sight, plan, PlannerConfig};
use greenbench_core::world::{
    load_world, rasterize, sector_at, Disturbances, OccupancyGrid, World, DEFAULT_WORLD_TOML,
};
use greenbench_core::{Pose, Vec2};

#[test]
fn bundled_world_loads_and_rasterises() {
    let world = load_world(DEFAULT_WORLD_TOML).unwrap();
    assert!(!world.obstacles.is_empty());
    let grid = rasterize(&world, 0.1, 0.9).unwrap();
    assert_eq!((grid.width, grid.height), (200, 200));
    let back = OccupancyGrid::from_text(&grid.to_text()).unwrap();
    assert_eq!(back.occupied_count(), grid.occupied_count());
    let (col, row) = grid.cell_of(Vec2::new(10.1, 3.0)).unwrap();
    assert!(!grid.occupied(col, row));
}

#[test]
fn plan_across_the_greenhouse() {
    let grid = rasterize(&World::greenhouse(), 0.1, 0.9).unwrap();
    let path = plan(&grid, Vec2::new(10.1, 3.0), Vec2::new(18.0, 17.4), &PlannerConfig::default()).unwrap();
    assert!(path.nodes.len() >= 2);
    assert!(path.cells.windows(2).all(|w| line_of_sight(&grid, w[0], w[1])));
    assert!(path.nodes.last().unwrap().distance(Vec2::new(18.0, 17.4)) < 0.1);
    let straight = Vec2::new(10.1, 3.0).distance(Vec2::new(18.0, 17.4));
    assert!(path.cost >= straight - 0.2);
}

#[test]
fn closed_loop_holds_wheel_speed() {
    let world = World::greenhouse()
        .with_disturbances(Disturbances { payload_mass: 35.0, slope: false, terrain_change: false })
        .unwrap();
    let params = RobotParams::default();
    let cfg = LowLevelConfig::default();
    let mut state = RobotState::at_rest(Pose::new(10.1, 3.0, 0.78));
    let (mut right, mut left) = (LowLevelState::new(), LowLevelState::new());
    let substeps = (CONTROL_DT / PHYSICS_DT).round() as usize;
    let target = 0.75;
    for _ in 0..2000 {
        let terrain = sector_at(&world, state.pose.position()).unwrap();
        let tr = low_level_step(&mut right, &cfg, target, state.right.omega, &terrain, &params, CONTROL_DT);
        let tl = low_level_step(&mut left, &cfg, target, state.left.omega, &terrain, &params, CONTROL_DT);
        for _ in 0..substeps {
            state = step_robot(&state, tr, tl, &world, &params, PHYSICS_DT).unwrap();
        }
    }
    assert!((state.right.omega - target).abs() < 1e-2, "{}", state.right.omega);
    assert!((state.left.omega - target).abs() < 1e-2, "{}", state.left.omega);
    assert!(state.v > 0.0);
}
