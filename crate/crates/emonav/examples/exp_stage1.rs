// Experiment: stage-1 goal-reaching with REINFORCE on family A.
use emonav::navpolicy::{PolicyConfig, PolicyModel};
use emonav::nncore::OptimizerConfig;
use emonav::rltrain::{evaluate_stage, train_stage, StageConfig};
use std::time::Instant;

fn main() {
    let lr: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2e-3);
    let budget: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1200);
    let entropy: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(0.01);
    let seed: u64 = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(0);

    let mut policy = PolicyModel::new(PolicyConfig { seed, ..PolicyConfig::tiny() }).unwrap();
    let mut stages = StageConfig::default_stages(seed);
    let mut cfg = stages.remove(0);
    cfg.episode_budget = budget;
    cfg.opt = OptimizerConfig::rmsprop_default().with_learning_rate(lr);
    cfg.rl.entropy_coef = entropy;
    cfg.rl.max_steps = 250;
    cfg.rl.episodes_per_update = std::env::args().nth(5).and_then(|s| s.parse().ok()).unwrap_or(8);
    cfg.eval_every = 8;

    let t0 = Instant::now();
    let report = train_stage(&mut policy, &cfg).unwrap();
    println!(
        "lr={lr} entropy={entropy} seed={seed}: reached={} success={:.2} episodes={} updates={} in {:.0}s",
        report.reached, report.success_rate, report.episodes_run, report.updates,
        t0.elapsed().as_secs_f64()
    );
    let e = evaluate_stage(&policy, &cfg, 100).unwrap();
    println!("final 100-episode eval: success {:.2}, mean return {:.2}", e.success_rate, e.mean_return);
}
