// Criterion-8 design probe: pillar-pretrained base, arm fine-tunes, wins.
use emonav::evalkit::{delta_ps, encounters};
use emonav::gaitlab::Emotion;
use emonav::navpolicy::{PolicyConfig, PolicyModel, PolicyRunner, SampleMode};
use emonav::nncore::{Optimizer, OptimizerConfig};
use emonav::rltrain::*;
use emonav::simworld::{EmotionDynamicsConfig, HumanSpec, Obstacle, Pose, Scenario, World};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn crossing_scenario() -> Scenario {
    let mut s = Scenario::empty("crossing", 10.0, 6.0);
    s.n_beams = 36;
    s.max_steps = 250;
    s.robot_start = Pose::new(1.0, 3.0, 0.0);
    s.goal = (9.0, 3.0);
    s.humans.push(HumanSpec {
        waypoints: vec![(4.5, 2.0), (4.5, 4.0)],
        speed: 0.5,
        emotion: Emotion::Neutral,
        cyclic: true,
                heading: None,
    });
    s.humans.push(HumanSpec {
        waypoints: vec![(5.5, 4.0), (5.5, 2.0)],
        speed: 0.5,
        emotion: Emotion::Happy,
        cyclic: true,
                heading: None,
    });
    s.emotion_dynamics = EmotionDynamicsConfig { alpha: 1.0, t_intrude: 5, p_neg: 1.0 };
    s
}

fn pillar_world(seed: u64, rng: &mut ChaCha8Rng) -> World {
    // One blob squarely on the straight line to the goal: every episode
    // poses the same decision (swerve and come back), with radius and
    // offset jitter covering the sizes humans project through raw and
    // processed scans.
    let mut s = Scenario::empty("pillars", 10.0, 6.0);
    s.n_beams = 36;
    s.max_steps = 250;
    let y = rng.gen_range(2.2..3.8);
    let r = rng.gen_range(0.3..1.3);
    let x = rng.gen_range(3.5..6.5);
    let dy = rng.gen_range(-0.3..0.3);
    s.obstacles.push(Obstacle::Circle { x, y: y + dy, r });
    if rng.gen_bool(0.4) {
        // Sometimes a second off-path blob.
        let r2 = rng.gen_range(0.3..0.9);
        let x2 = rng.gen_range(3.0..7.0);
        let off: f64 = if rng.gen_bool(0.5) { 1.8 } else { -1.8 };
        let y2 = (y + off).clamp(0.8, 5.2);
        s.obstacles.push(Obstacle::Circle { x: x2, y: y2, r: r2 });
    }
    s.robot_start = Pose::new(1.0, y, 0.0);
    s.goal = (9.0, y);
    if s.validate().is_err() {
        s.obstacles.clear();
    }
    World::new(s, seed).unwrap()
}

fn train_stage1(seed: u64) -> PolicyModel {
    let mut policy = PolicyModel::new(PolicyConfig { seed, ..PolicyConfig::tiny() }).unwrap();
    let mut stages = StageConfig::default_stages(seed);
    let mut s1 = stages.remove(0);
    s1.episode_budget = 1400;
    s1.opt = OptimizerConfig::rmsprop_default().with_learning_rate(2e-3);
    s1.rl.episodes_per_update = 4;
    s1.rl.max_steps = 250;
    s1.eval_every = 8;
    let r1 = train_stage(&mut policy, &s1).unwrap();
    eprintln!("stage1: reached={} success={:.2} episodes={}", r1.reached, r1.success_rate, r1.episodes_run);
    policy
}

fn train_pillars(policy: &mut PolicyModel, episodes: usize, lr: f64, seed: u64) {
    let mut opt = Optimizer::new(OptimizerConfig::rmsprop_default().with_learning_rate(lr)).unwrap();
    let rl = RLConfig { episodes_per_update: 4, max_steps: 250, gamma: 0.98, seed, ..RLConfig::default() };
    let mut baseline = MovingBaseline::new(0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9111a5);
    let cfg = EpisodeConfig::default();
    let mut run = 0;
    let mut goals = 0;
    let mut collisions = 0;
    while run < episodes {
        let mut batch = Vec::new();
        for _ in 0..rl.episodes_per_update.min(episodes - run) {
            let mut world = pillar_world(rng.gen(), &mut rng);
            let mut runner = PolicyRunner::new(policy);
            let rollout = run_episode(&mut world, &mut runner, &cfg, &mut rng).unwrap();
            match rollout.outcome {
                Outcome::Goal => goals += 1,
                Outcome::Collision => collisions += 1,
                _ => {}
            }
            batch.push(rollout.steps());
            run += 1;
        }
        policy_gradient_update(policy, &batch, &mut opt, &rl, &mut baseline).unwrap();
        policy.version += 1;
        if run % 400 < rl.episodes_per_update {
            eprintln!("  pillars {run}: goals {goals} collisions {collisions}");
        }
    }
    eprintln!("pillars: {episodes} episodes, goals {goals}, collisions {collisions}");
}

fn eval_pillars(policy: &PolicyModel, n: usize, seed: u64) -> (usize, usize) {
    let cfg = EpisodeConfig { mode: SampleMode::Greedy, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut goals, mut collisions) = (0, 0);
    for i in 0..n {
        let mut world = pillar_world(0xabc ^ (i as u64 * 31), &mut rng);
        let mut runner = PolicyRunner::new(policy);
        match run_episode(&mut world, &mut runner, &cfg, &mut rng).unwrap().outcome {
            Outcome::Goal => goals += 1,
            Outcome::Collision => collisions += 1,
            _ => {}
        }
    }
    (goals, collisions)
}

fn eval_crossing(policy: &PolicyModel, processed: bool, n: usize, seed: u64) -> (f64, usize, usize, usize, f64) {
    let cfg = EpisodeConfig {
        mode: SampleMode::Greedy,
        processed_scans: processed,
        emotion_penalty: processed,
        ..Default::default()
    };
    let scenario = crossing_scenario();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut dps, mut goals, mut colls, mut encs, mut dmin_sum) = (0.0, 0, 0, 0, 0.0);
    for i in 0..n {
        let mut world = World::new(scenario.clone(), 0xe7a1 ^ seed ^ (i as u64 * 977)).unwrap();
        let mut runner = PolicyRunner::new(policy);
        let rollout = run_episode(&mut world, &mut runner, &cfg, &mut rng).unwrap();
        dps += delta_ps(&rollout.trace);
        match rollout.outcome {
            Outcome::Goal => goals += 1,
            Outcome::Collision => colls += 1,
            _ => {}
        }
        let enc = encounters(&rollout.trace);
        encs += enc.len();
        dmin_sum += enc.iter().map(|e| e.min_distance).sum::<f64>();
    }
    (dps / n as f64, goals, colls, encs, dmin_sum / encs.max(1) as f64)
}

fn main() {
    let t0 = Instant::now();
    let base1 = train_stage1(0);
    let (g, c) = eval_pillars(&base1, 20, 99);
    eprintln!("stage1 base on pillars: goals {g}/20 collisions {c}/20");
    let (dps, goals, colls, encs, dmin) = eval_crossing(&base1, true, 10, 5);
    eprintln!("stage1 base on crossing processed: dps {dps:.3} goals {goals}/10 colls {colls}/10 encs {encs} dmin {dmin:.2}");
    let (dps, goals, colls, encs, dmin) = eval_crossing(&base1, false, 10, 5);
    eprintln!("stage1 base on crossing raw:       dps {dps:.3} goals {goals}/10 colls {colls}/10 encs {encs} dmin {dmin:.2}");

    let mut base2 = base1.clone();
    train_pillars(&mut base2, 1600, 2e-3, 17);
    let (g, c) = eval_pillars(&base2, 20, 99);
    eprintln!("pillar base on pillars: goals {g}/20 collisions {c}/20  [{:.0}s]", t0.elapsed().as_secs_f64());
    let (dps, goals, colls, encs, dmin) = eval_crossing(&base2, true, 10, 5);
    eprintln!("pillar base on crossing processed: dps {dps:.3} goals {goals}/10 colls {colls}/10 encs {encs} dmin {dmin:.2}");
    let (dps, goals, colls, encs, dmin) = eval_crossing(&base2, false, 10, 5);
    eprintln!("pillar base on crossing raw:       dps {dps:.3} goals {goals}/10 colls {colls}/10 encs {encs} dmin {dmin:.2}");
    eprintln!("total {:.0}s", t0.elapsed().as_secs_f64());
}
