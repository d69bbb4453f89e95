use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gaitlab::Emotion;
use crate::{Error, Result};

use super::grid::{OccupancyGrid, Pose};
use super::world::{HUMAN_RADIUS, ROBOT_RADIUS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Obstacle {
    Rect { x: f64, y: f64, w: f64, h: f64 },
    Circle { x: f64, y: f64, r: f64 },
}

/// A scripted pedestrian: follows `waypoints` at `speed`, looping when
/// `cyclic`, starting with `emotion`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanSpec {
    pub waypoints: Vec<(f64, f64)>,
    pub speed: f64,
    pub emotion: Emotion,
    #[serde(default)]
    pub cyclic: bool,
    /// Initial facing direction; defaults to the first path segment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<f64>,
}

/// Emotion-dynamics knobs: a robot lingering closer than
/// `alpha`·comfort-radius for `t_intrude` consecutive ticks flips a
/// non-negative human to a negative emotion with probability `p_neg`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmotionDynamicsConfig {
    pub alpha: f64,
    pub t_intrude: usize,
    pub p_neg: f64,
}

impl Default for EmotionDynamicsConfig {
    fn default() -> Self {
        EmotionDynamicsConfig { alpha: 0.5, t_intrude: 5, p_neg: 1.0 }
    }
}

fn default_n_beams() -> usize {
    180
}
fn default_max_range() -> f64 {
    6.0
}
fn default_dt() -> f64 {
    0.1
}
fn default_max_steps() -> usize {
    400
}
fn default_goal_radius() -> f64 {
    0.1
}

/// A full world description. Distances are meters, angles radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub width: f64,
    pub height: f64,
    pub resolution: f64,
    pub obstacles: Vec<Obstacle>,
    pub humans: Vec<HumanSpec>,
    pub robot_start: Pose,
    pub goal: (f64, f64),
    pub seed: u64,
    #[serde(default = "default_n_beams")]
    pub n_beams: usize,
    #[serde(default = "default_max_range")]
    pub max_range: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_goal_radius")]
    pub goal_radius: f64,
    #[serde(default)]
    pub emotion_dynamics: EmotionDynamicsConfig,
}

impl Scenario {
    /// Empty map with defaults; callers fill in obstacles and humans.
    pub fn empty(name: &str, width: f64, height: f64) -> Scenario {
        Scenario {
            name: name.to_string(),
            width,
            height,
            resolution: 0.1,
            obstacles: Vec::new(),
            humans: Vec::new(),
            robot_start: Pose::new(width * 0.15, height * 0.15, 0.0),
            goal: (width * 0.85, height * 0.85),
            seed: 0,
            n_beams: default_n_beams(),
            max_range: default_max_range(),
            dt: default_dt(),
            max_steps: default_max_steps(),
            goal_radius: default_goal_radius(),
            emotion_dynamics: EmotionDynamicsConfig::default(),
        }
    }

    /// Rasterizes the obstacle primitives onto a fresh occupancy grid.
    pub fn rasterize_obstacles(&self) -> OccupancyGrid {
        let w = (self.width / self.resolution).round() as usize;
        let h = (self.height / self.resolution).round() as usize;
        let mut grid = OccupancyGrid::new((0.0, 0.0), self.resolution, w, h);
        for obs in &self.obstacles {
            match *obs {
                Obstacle::Rect { x, y, w, h } => grid.fill_rect(x, y, w, h),
                Obstacle::Circle { x, y, r } => grid.fill_circle(x, y, r),
            }
        }
        grid
    }

    /// Validates invariants; messages name the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.width <= 0.0 || self.height <= 0.0 {
            return Err(Error::config("scenario width/height must be positive"));
        }
        if self.resolution <= 0.0 {
            return Err(Error::config("scenario resolution must be positive"));
        }
        if self.n_beams == 0 || self.max_range <= 0.0 || self.dt <= 0.0 || self.max_steps == 0 {
            return Err(Error::config("scenario sensor/timing fields must be positive"));
        }
        let grid = self.rasterize_obstacles();
        if !grid.in_bounds(self.robot_start.x, self.robot_start.y) {
            return Err(Error::config("robot_start outside the map"));
        }
        if grid.disc_collides(self.robot_start.x, self.robot_start.y, ROBOT_RADIUS) {
            return Err(Error::config("robot_start lies in an obstacle"));
        }
        if !grid.in_bounds(self.goal.0, self.goal.1) {
            return Err(Error::config("goal outside the map"));
        }
        if grid.disc_collides(self.goal.0, self.goal.1, ROBOT_RADIUS) {
            return Err(Error::config("goal lies in an obstacle"));
        }
        for (i, h) in self.humans.iter().enumerate() {
            if h.waypoints.is_empty() {
                return Err(Error::config(format!("humans[{i}].waypoints is empty")));
            }
            if h.speed < 0.0 {
                return Err(Error::config(format!("humans[{i}].speed must be >= 0")));
            }
            for (j, wp) in h.waypoints.iter().enumerate() {
                if !grid.in_bounds(wp.0, wp.1) {
                    return Err(Error::config(format!("humans[{i}].waypoints[{j}] outside the map")));
                }
                if grid.disc_collides(wp.0, wp.1, HUMAN_RADIUS) {
                    return Err(Error::config(format!("humans[{i}].waypoints[{j}] lies in an obstacle")));
                }
            }
        }
        Ok(())
    }
}

/// Loads and validates a scenario JSON file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)?;
    let scenario: Scenario =
        serde_json::from_str(&text).map_err(|e| Error::schema(None, format!("scenario parse: {e}")))?;
    scenario.validate()?;
    Ok(scenario)
}

/// Writes a scenario as pretty JSON (atomically).
pub fn save_scenario(path: &Path, scenario: &Scenario) -> Result<()> {
    let text = serde_json::to_string_pretty(scenario)?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.write_all(b"\n")?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Scenario families of increasing difficulty: A empty room, B scattered
/// blocks, C corridor, D two rooms with a doorway, E clutter plus
/// pedestrians.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    A,
    B,
    C,
    D,
    E,
}

impl Family {
    pub fn parse(s: &str) -> Result<Family> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(Family::A),
            "B" => Ok(Family::B),
            "C" => Ok(Family::C),
            "D" => Ok(Family::D),
            "E" => Ok(Family::E),
            other => Err(Error::config(format!("unknown scenario family '{other}' (expected A-E)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::A => "A",
            Family::B => "B",
            Family::C => "C",
            Family::D => "D",
            Family::E => "E",
        }
    }
}

/// Generates a randomized scenario of the given family, deterministic per
/// seed. Generated scenarios always pass [`Scenario::validate`].
pub fn generate_scenario(family: Family, seed: u64) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ce7a12b00000000);
    let mut scenario = match family {
        Family::A => {
            let mut s = Scenario::empty("family-A", 8.0, 8.0);
            s.robot_start = Pose::new(1.2, 1.2, 0.0);
            s.goal = (6.8, 6.8);
            s
        }
        Family::B => {
            let mut s = Scenario::empty("family-B", 10.0, 10.0);
            let n = rng.gen_range(3..=6);
            for _ in 0..n {
                let w = rng.gen_range(0.4..1.4);
                let h = rng.gen_range(0.4..1.4);
                let x = rng.gen_range(1.5..10.0 - 1.5 - w);
                let y = rng.gen_range(1.5..10.0 - 1.5 - h);
                s.obstacles.push(Obstacle::Rect { x, y, w, h });
            }
            s
        }
        Family::C => {
            let mut s = Scenario::empty("family-C", 12.0, 8.0);
            let cy = rng.gen_range(3.0..5.0);
            let half = rng.gen_range(1.0..1.5);
            s.obstacles.push(Obstacle::Rect { x: 2.0, y: 0.0, w: 8.0, h: cy - half });
            s.obstacles.push(Obstacle::Rect { x: 2.0, y: cy + half, w: 8.0, h: 8.0 - cy - half });
            s.robot_start = Pose::new(0.8, cy, 0.0);
            s.goal = (11.2, cy + rng.gen_range(-0.5..0.5));
            if rng.gen_bool(0.5) {
                s.humans.push(HumanSpec {
                    waypoints: vec![(9.0, cy), (3.0, cy)],
                    speed: rng.gen_range(0.5..1.0),
                    emotion: random_emotion(&mut rng),
                    cyclic: true,
                heading: None,
                });
            }
            s
        }
        Family::D => {
            let mut s = Scenario::empty("family-D", 10.0, 10.0);
            let wall_x = rng.gen_range(4.0..6.0);
            let door = rng.gen_range(2.0..7.0);
            let door_w = rng.gen_range(1.2..1.8);
            s.obstacles.push(Obstacle::Rect { x: wall_x - 0.15, y: 0.0, w: 0.3, h: door });
            s.obstacles.push(Obstacle::Rect { x: wall_x - 0.15, y: door + door_w, w: 0.3, h: 10.0 - door - door_w });
            s.robot_start = Pose::new(rng.gen_range(1.0..2.5), rng.gen_range(1.0..9.0), 0.0);
            s.goal = (rng.gen_range(7.5..9.0), rng.gen_range(1.0..9.0));
            s
        }
        Family::E => {
            let mut s = Scenario::empty("family-E", 12.0, 12.0);
            let n = rng.gen_range(6..=10);
            for _ in 0..n {
                if rng.gen_bool(0.5) {
                    let w = rng.gen_range(0.4..1.2);
                    let h = rng.gen_range(0.4..1.2);
                    let x = rng.gen_range(1.8..12.0 - 1.8 - w);
                    let y = rng.gen_range(1.8..12.0 - 1.8 - h);
                    s.obstacles.push(Obstacle::Rect { x, y, w, h });
                } else {
                    let r = rng.gen_range(0.25..0.6);
                    let x = rng.gen_range(1.8 + r..12.0 - 1.8 - r);
                    let y = rng.gen_range(1.8 + r..12.0 - 1.8 - r);
                    s.obstacles.push(Obstacle::Circle { x, y, r });
                }
            }
            let n_humans = rng.gen_range(1..=2);
            let grid = s.rasterize_obstacles();
            for _ in 0..n_humans {
                if let Some(wps) = sample_waypoints(&grid, &mut rng, 2) {
                    s.humans.push(HumanSpec {
                        waypoints: wps,
                        speed: rng.gen_range(0.4..1.1),
                        emotion: random_emotion(&mut rng),
                        cyclic: true,
                heading: None,
                    });
                }
            }
            s
        }
    };
    scenario.seed = seed;
    scenario.name = format!("family-{}-{}", family.name(), seed);

    // A fresh start/goal pair keeps generated maps valid even when random
    // obstacles swallowed the defaults.
    if family != Family::A {
        let (start, goal) = sample_task(&scenario, seed ^ 0x7a51)?;
        scenario.robot_start = start;
        scenario.goal = goal;
    }
    scenario.validate()?;
    Ok(scenario)
}

fn random_emotion(rng: &mut ChaCha8Rng) -> Emotion {
    Emotion::ALL[rng.gen_range(0..4)]
}

fn sample_waypoints(grid: &OccupancyGrid, rng: &mut ChaCha8Rng, n: usize) -> Option<Vec<(f64, f64)>> {
    let (x0, y0, x1, y1) = grid.bounds();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut found = false;
        for _ in 0..200 {
            let x = rng.gen_range(x0 + 0.5..x1 - 0.5);
            let y = rng.gen_range(y0 + 0.5..y1 - 0.5);
            if !grid.disc_collides(x, y, HUMAN_RADIUS + 0.1) {
                out.push((x, y));
                found = true;
                break;
            }
        }
        if !found {
            return None;
        }
    }
    Some(out)
}

/// Margin around the robot/goal when sampling tasks, beyond the footprint.
const TASK_CLEARANCE: f64 = 0.05;

/// Samples a navigation task on a 6×6 partition of the map: start pose and
/// goal point in two different cells, both collision-free. Deterministic
/// per seed.
pub fn sample_task(scenario: &Scenario, seed: u64) -> Result<(Pose, (f64, f64))> {
    const GRID_N: usize = 6;
    let grid = scenario.rasterize_obstacles();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a5c_0000);
    let cell_w = scenario.width / GRID_N as f64;
    let cell_h = scenario.height / GRID_N as f64;
    let clearance = ROBOT_RADIUS + TASK_CLEARANCE;

    let sample_in_cell = |rng: &mut ChaCha8Rng, cell: usize| -> Option<(f64, f64)> {
        let (cx, cy) = (cell % GRID_N, cell / GRID_N);
        for _ in 0..60 {
            let x = rng.gen_range(cx as f64 * cell_w..(cx + 1) as f64 * cell_w);
            let y = rng.gen_range(cy as f64 * cell_h..(cy + 1) as f64 * cell_h);
            let x = x.clamp(clearance, scenario.width - clearance);
            let y = y.clamp(clearance, scenario.height - clearance);
            if !grid.disc_collides(x, y, clearance) {
                return Some((x, y));
            }
        }
        None
    };

    for _ in 0..200 {
        let a = rng.gen_range(0..GRID_N * GRID_N);
        let b = rng.gen_range(0..GRID_N * GRID_N);
        if a == b {
            continue;
        }
        let Some(start) = sample_in_cell(&mut rng, a) else { continue };
        let Some(goal) = sample_in_cell(&mut rng, b) else { continue };
        let heading = rng.gen_range(0.0..std::f64::consts::TAU);
        return Ok((Pose::new(start.0, start.1, heading), goal));
    }
    Err(Error::config("could not sample a task: insufficient free space in distinct cells"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_empty_scenario_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        let s = Scenario::empty("mini", 6.0, 6.0);
        save_scenario(&path, &s).unwrap();
        let loaded = load_scenario(&path).unwrap();
        assert_eq!(s, loaded);
        assert!(loaded.obstacles.is_empty());
        assert!(loaded.humans.is_empty());
    }

    #[test]
    fn goal_inside_obstacle_names_goal() {
        let mut s = Scenario::empty("bad", 6.0, 6.0);
        s.obstacles.push(Obstacle::Rect { x: 4.5, y: 4.5, w: 1.0, h: 1.0 });
        s.goal = (5.0, 5.0);
        match s.validate() {
            Err(Error::Config(msg)) => assert!(msg.contains("goal"), "message was {msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn family_a_has_no_obstacles() {
        for seed in 0..10 {
            let s = generate_scenario(Family::A, seed).unwrap();
            assert!(s.obstacles.is_empty());
            assert!(s.humans.is_empty());
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for family in [Family::A, Family::B, Family::C, Family::D, Family::E] {
            let a = generate_scenario(family, 33).unwrap();
            let b = generate_scenario(family, 33).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn hundred_family_c_seeds_validate() {
        for seed in 0..100 {
            let s = generate_scenario(Family::C, seed).unwrap();
            s.validate().unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        }
    }

    #[test]
    fn families_b_d_e_validate_over_seeds() {
        for family in [Family::B, Family::D, Family::E] {
            for seed in 0..40 {
                generate_scenario(family, seed).unwrap();
            }
        }
    }

    #[test]
    fn sampled_tasks_are_free_and_in_distinct_cells() {
        let s = generate_scenario(Family::B, 5).unwrap();
        let grid = s.rasterize_obstacles();
        for seed in 0..50 {
            let (start, goal) = sample_task(&s, seed).unwrap();
            assert!(!grid.disc_collides(start.x, start.y, ROBOT_RADIUS));
            assert!(!grid.disc_collides(goal.0, goal.1, ROBOT_RADIUS));
            let cell = |x: f64, y: f64| {
                (((x / (s.width / 6.0)) as usize).min(5), ((y / (s.height / 6.0)) as usize).min(5))
            };
            assert_ne!(cell(start.x, start.y), cell(goal.0, goal.1));
        }
    }

    #[test]
    fn sample_task_deterministic() {
        let s = generate_scenario(Family::C, 2).unwrap();
        assert_eq!(sample_task(&s, 9).unwrap(), sample_task(&s, 9).unwrap());
    }

    #[test]
    fn unknown_family_is_config_error() {
        assert!(Family::parse("Q").is_err());
        assert_eq!(Family::parse("c").unwrap(), Family::C);
    }
}
