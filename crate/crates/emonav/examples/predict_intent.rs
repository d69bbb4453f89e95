//! Train the intent transformer briefly and compare its predictions with
//! the closed-form baselines on held-out walkers.
//!
//! Run with: `cargo run --release --example predict_intent`

use emonav::emotionctx::heuristic_classify;
use emonav::gaitlab::{synth_gait, Emotion, GaitSequence};
use emonav::intentnet::{
    baseline_predict, mse_metric_pooled, train_intent, BaselineKind, IntentSample,
    TransformerConfig,
};
use emonav::nncore::OptimizerConfig;

fn main() -> emonav::Result<()> {
    let cfg = TransformerConfig::desk();
    let make = |seed_base: u64, n: usize| -> emonav::Result<Vec<IntentSample>> {
        (0..n)
            .map(|i| {
                let e = Emotion::ALL[i % 4];
                let seq = synth_gait(e, seed_base + i as u64, 33, 25.0)?;
                let ctx = heuristic_classify(&seq.slice(0, cfg.history_len))?;
                IntentSample::split(&seq, &cfg, ctx)
            })
            .collect()
    };
    let train = make(0, 120)?;
    let held = make(50_000, 24)?;

    let opt = OptimizerConfig::adam_default().with_learning_rate(0.001);
    println!("training the desk transformer for 10 epochs on 120 sequences ...");
    let (model, report) = train_intent(&train, cfg, opt, 10, 16, 42)?;
    println!(
        "train loss {:.4} -> {:.4}",
        report.train_loss.first().unwrap(),
        report.train_loss.last().unwrap()
    );

    let slices = [80.0, 160.0, 320.0];
    println!("\nmean per-joint error (m) at 80/160/320 ms on held-out walkers:");
    for kind in BaselineKind::ALL {
        let pairs: Vec<(GaitSequence, GaitSequence)> = held
            .iter()
            .map(|s| Ok((baseline_predict(kind, &s.history, 8)?, s.future.clone())))
            .collect::<emonav::Result<Vec<_>>>()?;
        let m = mse_metric_pooled(&pairs, &slices)?;
        println!("  {:28} {:6.4} {:6.4} {:6.4}", kind.name(), m[0], m[1], m[2]);
    }
    let pairs: Vec<(GaitSequence, GaitSequence)> = held
        .iter()
        .map(|s| Ok((model.decode(&s.history, &s.ctx, 8)?, s.future.clone())))
        .collect::<emonav::Result<Vec<_>>>()?;
    let m = mse_metric_pooled(&pairs, &slices)?;
    println!("  {:28} {:6.4} {:6.4} {:6.4}   (10 epochs only)", "transformer", m[0], m[1], m[2]);
    Ok(())
}
