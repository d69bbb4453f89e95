//! One full perception→prediction→action tick, end to end: pedestrians
//! stream gait frames, get classified, project comfort fields that clip
//! the LiDAR, and the policy picks a velocity from the fused input.
//!
//! Run with: `cargo run --release --example full_pipeline`

use emonav::emotionctx::heuristic_classify;
use emonav::gaitlab::{Emotion, GaitSequence};
use emonav::navpolicy::{PolicyConfig, PolicyModel, PolicyRunner};
use emonav::rltrain::{run_episode, EpisodeConfig};
use emonav::simworld::{HumanSpec, Pose, Scenario, World};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> emonav::Result<()> {
    let mut scenario = Scenario::empty("pipeline-demo", 10.0, 6.0);
    scenario.n_beams = 36;
    scenario.max_steps = 120;
    scenario.robot_start = Pose::new(1.0, 3.0, 0.0);
    scenario.goal = (9.0, 3.0);
    scenario.humans.push(HumanSpec {
        waypoints: vec![(5.0, 2.0), (5.0, 4.0)],
        speed: 0.5,
        emotion: Emotion::Happy,
        cyclic: true,
                heading: None,
    });
    let mut world = World::new(scenario, 7)?;

    // Perception snapshot before driving: classify the pedestrian's
    // buffered gait stream.
    let frames: Vec<_> = world.humans[0].gait_buffer.iter().copied().collect();
    let stream = GaitSequence::new("human-0", 10.0, None, frames)?;
    let ctx = heuristic_classify(&stream)?;
    println!(
        "pedestrian stream: predicted {:?} in view group {}, comfort {:.2} m",
        ctx.predicted_emotion(),
        ctx.predicted_view_group(),
        world.humans[0].state.comfort
    );

    // Drive one episode with an untrained policy; the rollout machinery
    // assembles trajectory images, processed scans, and rewards.
    let policy = PolicyModel::new(PolicyConfig::tiny())?;
    let mut runner = PolicyRunner::new(&policy);
    let cfg = EpisodeConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rollout = run_episode(&mut world, &mut runner, &cfg, &mut rng)?;
    println!("\nepisode finished: {:?} after {} steps", rollout.outcome, rollout.transitions.len());
    let sum = |f: fn(&emonav::rltrain::Transition) -> f64| rollout.transitions.iter().map(f).sum::<f64>();
    println!("reward components:");
    println!("  goal shaping {:8.3}", sum(|t| t.reward.goal));
    println!("  collision    {:8.3}", sum(|t| t.reward.collision));
    println!("  smoothness   {:8.3}", sum(|t| t.reward.smooth));
    println!("  emotion      {:8.3}", sum(|t| t.reward.emotion));
    println!("  total        {:8.3}", rollout.total_return());
    Ok(())
}
