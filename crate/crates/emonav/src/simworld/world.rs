use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::emotionctx::{viewgroup_from_orientation, EmotionContext};
use crate::gaitlab::{Emotion, Frame, WalkerShape};
use crate::proxemics::{comfort_multiplier, HumanState, ProxemicsConfig, SpatialProfile};
use crate::Result;

use super::grid::{wrap_angle, OccupancyGrid, Pose};
use super::scan::{cast_ray, ray_circle, ScanFrame};
use super::scenario::{HumanSpec, Scenario};

/// Robot footprint radius, meters.
pub const ROBOT_RADIUS: f64 = 0.3;
/// Pedestrian body radius as seen by the LiDAR, meters.
pub const HUMAN_RADIUS: f64 = 0.25;
/// Translational velocity bounds.
pub const V_BOUNDS: (f64, f64) = (0.0, 1.0);
/// Rotational velocity bounds.
pub const W_BOUNDS: (f64, f64) = (-1.0, 1.0);
/// Gait frames kept per pedestrian for the perception pipeline.
pub const GAIT_BUFFER_LEN: usize = 25;

/// Robot kinematic state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotState {
    pub pose: Pose,
    pub v: f64,
    pub w: f64,
    pub prev_v: f64,
    pub prev_w: f64,
}

/// Events a world step can emit.
#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    Collision,
    GoalReached,
    Timeout,
    ActionClamped,
    EmotionShift { human: usize, from: Emotion, to: Emotion },
}

impl Event {
    pub fn tag(&self) -> String {
        match self {
            Event::Collision => "collision".to_string(),
            Event::GoalReached => "goal_reached".to_string(),
            Event::Timeout => "timeout".to_string(),
            Event::ActionClamped => "action_clamped".to_string(),
            Event::EmotionShift { human, from, to } => {
                format!("emotion_shift:{human}:{}>{}", from.name(), to.name())
            }
        }
    }
}

/// A scripted pedestrian with its perception-facing state.
#[derive(Clone, Debug)]
pub struct HumanAgent {
    pub id: usize,
    pub state: HumanState,
    pub emotion: Emotion,
    pub ctx: EmotionContext,
    pub gait_buffer: VecDeque<Frame>,
    spec: HumanSpec,
    shape: WalkerShape,
    phase: f64,
    wp_index: usize,
    intrusion_steps: usize,
    /// Set on the step the emotion turned negative; cleared next step.
    pub transitioned: bool,
}

impl HumanAgent {
    fn new(id: usize, spec: HumanSpec, rng: &mut ChaCha8Rng) -> HumanAgent {
        let shape = WalkerShape::jittered(spec.emotion, rng);
        let start = spec.waypoints[0];
        let heading = spec.heading.unwrap_or_else(|| {
            if spec.waypoints.len() > 1 {
                let next = spec.waypoints[1];
                (next.1 - start.1).atan2(next.0 - start.0)
            } else {
                0.0
            }
        });
        HumanAgent {
            id,
            state: HumanState { x: start.0, y: start.1, theta: wrap_angle(heading), comfort: 0.0 },
            emotion: spec.emotion,
            ctx: EmotionContext::one_hot(spec.emotion, 0),
            gait_buffer: VecDeque::with_capacity(GAIT_BUFFER_LEN),
            spec,
            shape,
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
            wp_index: 0,
            intrusion_steps: 0,
            transitioned: false,
        }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.state.x, self.state.y)
    }

    fn advance(&mut self, dt: f64) {
        self.phase += std::f64::consts::TAU * self.shape.cadence * dt;
        if self.spec.waypoints.len() > 1 && self.spec.speed > 0.0 {
            let mut remaining = self.spec.speed * dt;
            while remaining > 1e-9 {
                let target_idx = (self.wp_index + 1) % self.spec.waypoints.len();
                if !self.spec.cyclic && self.wp_index + 1 >= self.spec.waypoints.len() {
                    break;
                }
                let target = self.spec.waypoints[target_idx];
                let dx = target.0 - self.state.x;
                let dy = target.1 - self.state.y;
                let dist = (dx * dx + dy * dy).sqrt();
                if dist < 1e-9 {
                    self.wp_index = target_idx;
                    continue;
                }
                self.state.theta = wrap_angle(dy.atan2(dx));
                let step = remaining.min(dist);
                self.state.x += dx / dist * step;
                self.state.y += dy / dist * step;
                remaining -= step;
                if step >= dist - 1e-9 {
                    self.wp_index = target_idx;
                }
            }
        }
        let frame = self.shape.frame_at(self.phase, self.state.theta, (self.state.x, self.state.y));
        if self.gait_buffer.len() == GAIT_BUFFER_LEN {
            self.gait_buffer.pop_front();
        }
        self.gait_buffer.push_back(frame);
    }
}

/// Deterministic 2D world: occupancy grid, unicycle robot, scripted
/// pedestrians. One instance per episode; all randomness (human gait
/// phases, emotion transitions) flows from the construction seed.
pub struct World {
    pub scenario: Scenario,
    pub grid: OccupancyGrid,
    pub robot: RobotState,
    pub humans: Vec<HumanAgent>,
    pub goal: (f64, f64),
    pub tick: usize,
    prox_cfg: ProxemicsConfig,
    rng: ChaCha8Rng,
}

impl World {
    pub fn new(scenario: Scenario, seed: u64) -> Result<World> {
        let start = scenario.robot_start;
        let goal = scenario.goal;
        Self::with_task(scenario, seed, start, goal)
    }

    /// Builds the world with an explicit start/goal (curriculum task).
    pub fn with_task(scenario: Scenario, seed: u64, start: Pose, goal: (f64, f64)) -> Result<World> {
        scenario.validate()?;
        let grid = scenario.rasterize_obstacles();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3b1d_77aa_0000_0000);
        let humans = scenario
            .humans
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, spec)| HumanAgent::new(i, spec, &mut rng))
            .collect();
        let mut world = World {
            scenario,
            grid,
            robot: RobotState { pose: start, v: 0.0, w: 0.0, prev_v: 0.0, prev_w: 0.0 },
            humans,
            goal,
            tick: 0,
            prox_cfg: ProxemicsConfig::default(),
            rng,
        };
        // Prime gait buffers and comfort radii so perception works at t=0.
        for _ in 0..10 {
            let dt = world.scenario.dt;
            for h in &mut world.humans {
                h.advance(dt);
            }
        }
        world.refresh_contexts();
        Ok(world)
    }

    pub fn proxemics_config(&self) -> &ProxemicsConfig {
        &self.prox_cfg
    }

    pub fn set_proxemics_config(&mut self, cfg: ProxemicsConfig) {
        self.prox_cfg = cfg;
    }

    /// Distance from the robot to the goal.
    pub fn goal_distance(&self) -> f64 {
        self.robot.pose.distance_to(self.goal)
    }

    /// Current personal-space profiles of all pedestrians (zero-comfort
    /// humans project none).
    pub fn profiles(&self) -> Vec<SpatialProfile> {
        self.humans
            .iter()
            .filter_map(|h| SpatialProfile::from_human(&h.state, &self.prox_cfg))
            .collect()
    }

    /// Raw LiDAR sweep from the robot: grid raycast fused with the
    /// pedestrians' physical bodies.
    pub fn scan(&self) -> ScanFrame {
        let pose = self.robot.pose;
        let n = self.scenario.n_beams;
        let max_range = self.scenario.max_range;
        let increment = std::f64::consts::TAU / n as f64;
        let mut ranges = Vec::with_capacity(n);
        for i in 0..n {
            let angle = pose.theta + i as f64 * increment;
            let mut r = cast_ray(&self.grid, (pose.x, pose.y), angle, max_range);
            for h in &self.humans {
                if let Some(t) = ray_circle((pose.x, pose.y), angle, h.position(), HUMAN_RADIUS, max_range) {
                    r = r.min(t);
                }
            }
            ranges.push(r);
        }
        ScanFrame { ranges, start_angle: 0.0, angular_increment: increment, max_range }
    }

    /// Advances one tick. Clamps out-of-bound actions (with an event),
    /// integrates the unicycle, moves pedestrians, applies emotion
    /// dynamics, and reports events. `GoalReached`/`Collision`/`Timeout`
    /// are terminal for episode drivers.
    pub fn step(&mut self, v: f64, w: f64) -> Vec<Event> {
        let dt = self.scenario.dt;
        let mut events = Vec::new();

        let cv = v.clamp(V_BOUNDS.0, V_BOUNDS.1);
        let cw = w.clamp(W_BOUNDS.0, W_BOUNDS.1);
        if cv != v || cw != w {
            events.push(Event::ActionClamped);
        }
        self.robot.prev_v = self.robot.v;
        self.robot.prev_w = self.robot.w;
        self.robot.v = cv;
        self.robot.w = cw;

        let pose = self.robot.pose;
        let nx = pose.x + cv * pose.theta.cos() * dt;
        let ny = pose.y + cv * pose.theta.sin() * dt;
        // The map edge is a hard boundary, not an obstacle.
        let nx = nx.clamp(ROBOT_RADIUS, self.scenario.width - ROBOT_RADIUS);
        let ny = ny.clamp(ROBOT_RADIUS, self.scenario.height - ROBOT_RADIUS);
        self.robot.pose = Pose::new(nx, ny, pose.theta + cw * dt);

        for h in &mut self.humans {
            h.transitioned = false;
            h.advance(dt);
        }

        // Collision: obstacle cells under the footprint or body overlap.
        let collided = self.grid.disc_collides(nx, ny, ROBOT_RADIUS)
            || self.humans.iter().any(|h| {
                let (hx, hy) = h.position();
                ((hx - nx).powi(2) + (hy - ny).powi(2)).sqrt() < ROBOT_RADIUS + HUMAN_RADIUS
            });
        if collided {
            events.push(Event::Collision);
        }

        if self.robot.pose.distance_to(self.goal) < self.scenario.goal_radius {
            events.push(Event::GoalReached);
        }

        self.emotion_dynamics(&mut events);
        self.refresh_contexts();

        self.tick += 1;
        if self.tick >= self.scenario.max_steps {
            events.push(Event::Timeout);
        }
        events
    }

    /// Intrusion-triggered emotion shifts: a robot closer than
    /// `alpha`·comfort for `t_intrude` consecutive ticks turns a
    /// non-negative pedestrian Angry or Sad with probability `p_neg`.
    /// Negative emotions never revert within an episode.
    fn emotion_dynamics(&mut self, events: &mut Vec<Event>) {
        let cfg = self.scenario.emotion_dynamics;
        let (rx, ry) = (self.robot.pose.x, self.robot.pose.y);
        for h in &mut self.humans {
            if h.emotion.is_negative() || h.state.comfort <= 0.0 {
                h.intrusion_steps = 0;
                continue;
            }
            let d = ((h.state.x - rx).powi(2) + (h.state.y - ry).powi(2)).sqrt();
            if d < cfg.alpha * h.state.comfort {
                h.intrusion_steps += 1;
            } else {
                h.intrusion_steps = 0;
            }
            if h.intrusion_steps >= cfg.t_intrude {
                h.intrusion_steps = 0;
                if cfg.p_neg > 0.0 && self.rng.gen_bool(cfg.p_neg.min(1.0)) {
                    let from = h.emotion;
                    let to = if self.rng.gen_bool(0.5) { Emotion::Angry } else { Emotion::Sad };
                    h.emotion = to;
                    h.transitioned = true;
                    events.push(Event::EmotionShift { human: h.id, from, to });
                }
            }
        }
    }

    /// Rebuilds each pedestrian's emotion context (one-hot at its current
    /// emotion and geometric view group) and comfort radius. Profiles
    /// therefore track both emotion shifts and the robot's viewpoint.
    fn refresh_contexts(&mut self) {
        let robot_heading = self.robot.pose.theta;
        for h in &mut self.humans {
            let group = viewgroup_from_orientation(h.state.theta, robot_heading);
            h.ctx = EmotionContext::one_hot(h.emotion, group);
            h.state.comfort = comfort_multiplier(&h.ctx, &self.prox_cfg).unwrap_or(0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::scenario::EmotionDynamicsConfig;
    use approx::assert_abs_diff_eq;

    fn empty_scenario() -> Scenario {
        Scenario::empty("test", 8.0, 8.0)
    }

    #[test]
    fn forward_step_advances_x() {
        let mut s = empty_scenario();
        s.robot_start = Pose::new(4.0, 4.0, 0.0);
        let mut w = World::new(s, 0).unwrap();
        w.step(1.0, 0.0);
        assert_abs_diff_eq!(w.robot.pose.x, 4.1, epsilon = 1e-12);
        assert_abs_diff_eq!(w.robot.pose.y, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_step_turns_in_place() {
        let mut s = empty_scenario();
        s.robot_start = Pose::new(4.0, 4.0, 0.0);
        let mut w = World::new(s, 0).unwrap();
        w.step(0.0, 1.0);
        assert_abs_diff_eq!(w.robot.pose.theta, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(w.robot.pose.x, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn goal_event_inside_radius() {
        let mut s = empty_scenario();
        s.robot_start = Pose::new(4.0, 4.0, 0.0);
        s.goal = (4.15, 4.0);
        let mut w = World::new(s, 0).unwrap();
        let events = w.step(1.0, 0.0);
        // After the step the robot sits 0.05 m from the goal (< 0.1).
        assert!(events.contains(&Event::GoalReached), "events: {events:?}");
    }

    #[test]
    fn out_of_bounds_action_clamped_with_event() {
        let mut s = empty_scenario();
        s.robot_start = Pose::new(4.0, 4.0, 0.0);
        let mut w = World::new(s, 0).unwrap();
        let events = w.step(2.0, -3.0);
        assert!(events.contains(&Event::ActionClamped));
        assert_abs_diff_eq!(w.robot.pose.x, 4.1, epsilon = 1e-12);
        assert_eq!(w.robot.w, -1.0);
    }

    #[test]
    fn collision_event_on_obstacle_contact() {
        let mut s = empty_scenario();
        s.obstacles.push(super::super::scenario::Obstacle::Rect { x: 4.5, y: 3.5, w: 1.0, h: 1.0 });
        s.robot_start = Pose::new(4.2, 4.0, 0.0);
        let mut w = World::new(s, 0).unwrap();
        let events = w.step(1.0, 0.0);
        assert!(events.contains(&Event::Collision), "events: {events:?}");
    }

    #[test]
    fn timeout_fires_at_step_cap() {
        let mut s = empty_scenario();
        s.max_steps = 3;
        let mut w = World::new(s, 0).unwrap();
        assert!(!w.step(0.0, 0.0).contains(&Event::Timeout));
        assert!(!w.step(0.0, 0.0).contains(&Event::Timeout));
        assert!(w.step(0.0, 0.0).contains(&Event::Timeout));
    }

    #[test]
    fn stepping_is_deterministic() {
        let mut s = empty_scenario();
        s.humans.push(HumanSpec {
            waypoints: vec![(2.0, 2.0), (6.0, 6.0)],
            speed: 0.8,
            emotion: Emotion::Neutral,
            cyclic: true,
                heading: None,
        });
        let run = || {
            let mut w = World::new(s.clone(), 7).unwrap();
            let mut log = Vec::new();
            for i in 0..50 {
                let v = (i % 5) as f64 / 5.0;
                let wv = ((i % 3) as f64 - 1.0) / 2.0;
                let events = w.step(v, wv);
                log.push((w.robot.pose, w.humans[0].position(), w.humans[0].emotion, events.len()));
            }
            log
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn waypoint_followers_stay_in_bounds() {
        let mut s = empty_scenario();
        s.humans.push(HumanSpec {
            waypoints: vec![(1.0, 1.0), (7.0, 1.0), (7.0, 7.0), (1.0, 7.0)],
            speed: 1.2,
            emotion: Emotion::Happy,
            cyclic: true,
                heading: None,
        });
        let mut w = World::new(s, 3).unwrap();
        for _ in 0..400 {
            w.step(0.0, 0.0);
            let (x, y) = w.humans[0].position();
            assert!((0.0..=8.0).contains(&x) && (0.0..=8.0).contains(&y));
        }
    }

    #[test]
    fn distant_robot_never_shifts_emotions() {
        let mut s = empty_scenario();
        s.robot_start = Pose::new(1.0, 1.0, 0.0);
        s.humans.push(HumanSpec {
            waypoints: vec![(7.0, 7.0)],
            speed: 0.0,
            emotion: Emotion::Neutral,
            cyclic: false,
                heading: None,
        });
        s.emotion_dynamics = EmotionDynamicsConfig { alpha: 0.5, t_intrude: 5, p_neg: 1.0 };
        let mut w = World::new(s, 1).unwrap();
        for _ in 0..100 {
            w.step(0.0, 0.0);
        }
        assert_eq!(w.humans[0].emotion, Emotion::Neutral);
    }

    #[test]
    fn sustained_intrusion_turns_neutral_negative() {
        // Human faces the robot (view group 0, full comfort radius); the
        // stationary robot sits well inside alpha·C.
        let mut s = empty_scenario();
        s.robot_start = Pose::new(4.4, 4.0, std::f64::consts::PI);
        s.humans.push(HumanSpec {
            waypoints: vec![(4.2, 4.0)],
            speed: 0.0,
            emotion: Emotion::Neutral,
            cyclic: false,
                heading: None,
        });
        s.emotion_dynamics = EmotionDynamicsConfig { alpha: 0.5, t_intrude: 5, p_neg: 1.0 };
        let mut w = World::new(s, 1).unwrap();
        let mut shifted = false;
        for _ in 0..20 {
            let events = w.step(0.0, 0.0);
            shifted |= events.iter().any(|e| matches!(e, Event::EmotionShift { .. }));
        }
        assert!(shifted);
        assert!(w.humans[0].emotion.is_negative());
    }

    #[test]
    fn already_negative_humans_never_emit_shift() {
        let mut s = empty_scenario();
        s.robot_start = Pose::new(4.0, 4.05, 0.0);
        s.humans.push(HumanSpec {
            waypoints: vec![(4.2, 4.0)],
            speed: 0.0,
            emotion: Emotion::Sad,
            cyclic: false,
                heading: None,
        });
        s.emotion_dynamics = EmotionDynamicsConfig { alpha: 0.5, t_intrude: 5, p_neg: 1.0 };
        let mut w = World::new(s, 1).unwrap();
        for _ in 0..30 {
            let events = w.step(0.0, 0.0);
            assert!(!events.iter().any(|e| matches!(e, Event::EmotionShift { .. })));
        }
        assert_eq!(w.humans[0].emotion, Emotion::Sad);
    }

    #[test]
    fn scan_sees_humans_as_discs() {
        let mut s = empty_scenario();
        s.robot_start = Pose::new(2.0, 4.0, 0.0);
        s.humans.push(HumanSpec {
            waypoints: vec![(5.0, 4.0)],
            speed: 0.0,
            emotion: Emotion::Neutral,
            cyclic: false,
                heading: None,
        });
        let w = World::new(s, 0).unwrap();
        let scan = w.scan();
        // Beam 0 points straight at the human 3 m away (radius 0.25).
        assert_abs_diff_eq!(scan.ranges[0], 3.0 - HUMAN_RADIUS, epsilon = 1e-9);
    }

    #[test]
    fn gait_buffers_fill_and_are_bounded() {
        let mut s = empty_scenario();
        s.humans.push(HumanSpec {
            waypoints: vec![(2.0, 2.0), (6.0, 2.0)],
            speed: 1.0,
            emotion: Emotion::Happy,
            cyclic: true,
                heading: None,
        });
        let mut w = World::new(s, 0).unwrap();
        for _ in 0..100 {
            w.step(0.0, 0.0);
        }
        assert_eq!(w.humans[0].gait_buffer.len(), GAIT_BUFFER_LEN);
    }
}
