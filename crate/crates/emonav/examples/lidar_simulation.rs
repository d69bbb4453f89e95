//! Raycast LiDAR over an occupancy grid, with and without proxemic scan
//! processing around a pedestrian.
//!
//! Run with: `cargo run --example lidar_simulation`

use emonav::gaitlab::Emotion;
use emonav::proxemics::process_scan;
use emonav::simworld::{HumanSpec, Obstacle, Pose, Scenario, World};

fn main() -> emonav::Result<()> {
    let mut scenario = Scenario::empty("lidar-demo", 10.0, 8.0);
    scenario.n_beams = 16;
    scenario.obstacles.push(Obstacle::Rect { x: 7.0, y: 3.0, w: 0.4, h: 2.0 });
    scenario.humans.push(HumanSpec {
        waypoints: vec![(5.0, 4.0)],
        speed: 0.0,
        emotion: Emotion::Sad,
        cyclic: false,
                heading: None,
    });
    scenario.robot_start = Pose::new(2.0, 4.0, 0.0);
    let world = World::new(scenario, 3)?;

    let raw = world.scan();
    let prox = world.proxemics_config();
    let processed = process_scan(&raw, &world.profiles(), prox.tau, prox.scan_step, world.robot.pose)?;

    println!("human at (5,4) with comfort {:.2} m; wall at x=7", world.humans[0].state.comfort);
    println!("{:>8} {:>8} {:>10}", "beam", "raw (m)", "processed");
    for i in 0..raw.n_beams() {
        let angle = raw.beam_angle(i, world.robot.pose.theta).to_degrees().rem_euclid(360.0);
        let marker = if processed.ranges[i] + 1e-9 < raw.ranges[i] { "  <- clipped" } else { "" };
        println!("{angle:7.0}° {:8.2} {:10.2}{marker}", raw.ranges[i], processed.ranges[i]);
    }
    Ok(())
}
