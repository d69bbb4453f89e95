//! A taste of curriculum training: improve the goal-reaching policy on
//! empty maps for a couple of minutes, then drive a greedy episode.
//!
//! Run with: `cargo run --release --example navigate`

use emonav::navpolicy::{PolicyConfig, PolicyModel, PolicyRunner, SampleMode};
use emonav::nncore::OptimizerConfig;
use emonav::rltrain::{
    evaluate_stage, run_episode, train_stage, EpisodeConfig, Outcome, StageConfig,
};
use emonav::simworld::{sample_task, Family, generate_scenario, World};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> emonav::Result<()> {
    let mut policy = PolicyModel::new(PolicyConfig::tiny())?;
    let mut stages = StageConfig::default_stages(0);
    let mut stage1 = stages.remove(0);
    stage1.episode_budget = 400; // demo-sized; the acceptance suite trains to criterion
    stage1.opt = OptimizerConfig::rmsprop_default().with_learning_rate(2e-3);
    stage1.rl.episodes_per_update = 4;
    stage1.rl.max_steps = 250;
    stage1.eval_every = 8;

    println!("training stage 1 (empty rooms) for {} episodes ...", stage1.episode_budget);
    let report = train_stage(&mut policy, &stage1)?;
    println!(
        "stage report: success {:.0}% over {} eval episodes (criterion {:.0}%, reached: {})",
        report.success_rate * 100.0,
        stage1.eval_episodes,
        stage1.success_threshold * 100.0,
        report.reached
    );
    let quick = evaluate_stage(&policy, &stage1, 20)?;
    println!(
        "quick re-eval: success {:.0}%, mean return {:.1}",
        quick.success_rate * 100.0,
        quick.mean_return
    );

    // Watch one greedy episode.
    let mut scenario = generate_scenario(Family::A, 123)?;
    scenario.n_beams = policy.cfg.n_beams;
    let (start, goal) = sample_task(&scenario, 5)?;
    println!("\ngreedy episode from ({:.1},{:.1}) to ({:.1},{:.1}):", start.x, start.y, goal.0, goal.1);
    let mut world = World::with_task(scenario, 9, start, goal)?;
    let mut runner = PolicyRunner::new(&policy);
    let cfg = EpisodeConfig { mode: SampleMode::Greedy, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rollout = run_episode(&mut world, &mut runner, &cfg, &mut rng)?;
    for tick in rollout.trace.ticks.iter().step_by(25) {
        println!("  t={:3}  pos ({:4.1},{:4.1})  v={:.1} w={:+.2}", tick.t, tick.x, tick.y, tick.v, tick.w);
    }
    println!(
        "outcome: {:?} in {} steps, return {:.1}",
        rollout.outcome,
        rollout.transitions.len(),
        rollout.total_return()
    );
    if rollout.outcome == Outcome::Goal {
        println!("goal reached.");
    }
    Ok(())
}
