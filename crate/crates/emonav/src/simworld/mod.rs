//! Deterministic 2D world: occupancy grids, raycast LiDAR, unicycle
//! kinematics, scripted pedestrians with emotion dynamics, randomized
//! scenario generation, and curriculum task sampling.

mod grid;
mod scan;
mod scenario;
mod trace;
mod world;

pub use grid::{wrap_angle, OccupancyGrid, Pose};
pub use scan::{cast_ray, ray_circle, raycast_scan, ScanFrame};
pub use scenario::{
    generate_scenario, load_scenario, sample_task, save_scenario, EmotionDynamicsConfig, Family,
    HumanSpec, Obstacle, Scenario,
};
pub use trace::{HumanTick, Trace, TraceMeta, TraceTick};
pub use world::{
    Event, HumanAgent, RobotState, World, GAIT_BUFFER_LEN, HUMAN_RADIUS, ROBOT_RADIUS, V_BOUNDS,
    W_BOUNDS,
};
