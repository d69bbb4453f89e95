// Experiment: proxemic ablation — processed scans + emotion penalty vs raw
// scans without it, compared on personal-space deviation over seed pairs.
use emonav::evalkit::delta_ps;
use emonav::gaitlab::Emotion;
use emonav::navpolicy::{PolicyConfig, PolicyModel, PolicyRunner, SampleMode};
use emonav::nncore::{Optimizer, OptimizerConfig};
use emonav::rltrain::*;
use emonav::simworld::{EmotionDynamicsConfig, HumanSpec, Pose, Scenario, World};
use rand::SeedableRng;
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
    // Wider intrusion band so the emotion penalty is reachable without a
    // collision ending the episode first.
    s.emotion_dynamics = EmotionDynamicsConfig { alpha: 1.0, t_intrude: 5, p_neg: 1.0 };
    s
}

fn train_base(seed: u64) -> PolicyModel {
    let mut policy = PolicyModel::new(PolicyConfig { seed, ..PolicyConfig::tiny() }).unwrap();
    let mut stages = StageConfig::default_stages(seed);
    let mut s1 = stages.remove(0);
    s1.episode_budget = 1400;
    s1.opt = OptimizerConfig::rmsprop_default().with_learning_rate(2e-3);
    s1.rl.episodes_per_update = 4;
    s1.rl.max_steps = 250;
    s1.eval_every = 8;
    let r1 = train_stage(&mut policy, &s1).unwrap();
    eprintln!("base stage1: reached={} success={:.2} episodes={}", r1.reached, r1.success_rate, r1.episodes_run);
    let mut s2 = stages.remove(0);
    s2.episode_budget = 700;
    s2.opt = OptimizerConfig::rmsprop_default().with_learning_rate(1.5e-3);
    s2.rl.episodes_per_update = 4;
    s2.rl.max_steps = 300;
    s2.eval_every = 10;
    let r2 = train_stage(&mut policy, &s2).unwrap();
    eprintln!("base stage2: reached={} success={:.2} episodes={}", r2.reached, r2.success_rate, r2.episodes_run);
    policy
}

fn finetune(base: &PolicyModel, seed: u64, processed: bool, episodes: usize) -> PolicyModel {
    let mut policy = base.clone();
    let mut opt = Optimizer::new(OptimizerConfig::rmsprop_default().with_learning_rate(1e-3)).unwrap();
    let rl = RLConfig { episodes_per_update: 4, max_steps: 250, seed, ..RLConfig::default() };
    let mut baseline = MovingBaseline::new(0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf17e);
    let cfg = EpisodeConfig {
        processed_scans: processed,
        emotion_penalty: processed,
        ..Default::default()
    };
    let scenario = crossing_scenario();
    let mut run = 0usize;
    while run < episodes {
        let mut batch = Vec::new();
        for _ in 0..rl.episodes_per_update.min(episodes - run) {
            let mut world = World::new(scenario.clone(), seed ^ (run as u64 * 131 + 7)).unwrap();
            let mut runner = PolicyRunner::new(&policy);
            let rollout = run_episode(&mut world, &mut runner, &cfg, &mut rng).unwrap();
            batch.push(rollout.steps());
            run += 1;
        }
        policy_gradient_update(&mut policy, &batch, &mut opt, &rl, &mut baseline).unwrap();
        policy.version += 1;
    }
    policy
}

fn eval_dps(policy: &PolicyModel, processed: bool, n: usize, seed: u64) -> (f64, usize, usize) {
    let cfg = EpisodeConfig {
        mode: SampleMode::Greedy,
        processed_scans: processed,
        emotion_penalty: processed,
        ..Default::default()
    };
    let scenario = crossing_scenario();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    let mut goals = 0;
    let mut encounters_n = 0;
    for i in 0..n {
        let mut world = World::new(scenario.clone(), 0xe7a1 ^ seed ^ (i as u64 * 977)).unwrap();
        let mut runner = PolicyRunner::new(policy);
        let rollout = run_episode(&mut world, &mut runner, &cfg, &mut rng).unwrap();
        total += delta_ps(&rollout.trace);
        if rollout.outcome == Outcome::Goal {
            goals += 1;
        }
        encounters_n += emonav::evalkit::encounters(&rollout.trace).len();
    }
    (total / n as f64, goals, encounters_n)
}

fn main() {
    let pairs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let ft_episodes: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(60);
    let t0 = Instant::now();
    let base = train_base(0);
    eprintln!("base trained in {:.0}s", t0.elapsed().as_secs_f64());
    let mut wins = 0;
    for k in 0..pairs {
        let seed = 1000 + k as u64;
        let a = finetune(&base, seed, true, ft_episodes);
        let b = finetune(&base, seed, false, ft_episodes);
        let (dps_a, goals_a, enc_a) = eval_dps(&a, true, 5, seed);
        let (dps_b, goals_b, enc_b) = eval_dps(&b, false, 5, seed);
        let win = dps_a < dps_b;
        if win {
            wins += 1;
        }
        println!(
            "pair {k:2}: dps_a={dps_a:.4} (goals {goals_a}/5, enc {enc_a})  dps_b={dps_b:.4} (goals {goals_b}/5, enc {enc_b})  win={win}  t={:.0}s",
            t0.elapsed().as_secs_f64()
        );
    }
    println!("wins: {wins}/{pairs}");
}
