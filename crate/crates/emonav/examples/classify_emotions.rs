//! Classify gait emotions two ways: with the deterministic heuristic and
//! with a (briefly) trained grouped-convolution classifier.
//!
//! Run with: `cargo run --release --example classify_emotions`

use emonav::emotionctx::{heuristic_classify, train_ecn, EcnConfig, EcnSample};
use emonav::gaitlab::{synth_gait, Emotion};
use emonav::nncore::OptimizerConfig;

fn main() -> emonav::Result<()> {
    // Heuristic path: instant, exact on the generator's presets.
    println!("heuristic classifier:");
    for emotion in Emotion::ALL {
        let seq = synth_gait(emotion, 11, 60, 25.0)?;
        let ctx = heuristic_classify(&seq)?;
        println!(
            "  truth {:8} -> predicted {:8} (view group {})",
            emotion.name(),
            ctx.predicted_emotion().name(),
            ctx.predicted_view_group()
        );
    }

    // Trained path: a short run on a small corpus, just to show the loop.
    let cfg = EcnConfig { input_width: 40, ..EcnConfig::desk() };
    let train: Vec<EcnSample> = (0..80)
        .map(|i| {
            let e = Emotion::ALL[i % 4];
            EcnSample::from_sequence(&synth_gait(e, i as u64, 40, 25.0)?, cfg.input_width)
        })
        .collect::<emonav::Result<Vec<_>>>()?;
    let opt = OptimizerConfig::adam_default().with_learning_rate(0.002);
    let (model, report) = train_ecn(&train, cfg, opt, 6, 5)?;
    println!(
        "\ntrained classifier for {} epochs: loss {:.3} -> {:.3}, best val accuracy {:.2}",
        report.train_loss.len(),
        report.train_loss.first().unwrap(),
        report.train_loss.last().unwrap(),
        report.best_val_accuracy
    );

    let probe = synth_gait(Emotion::Sad, 999, 40, 25.0)?;
    let ctx = model.classify_sequence(&probe)?;
    println!("probe sad walker -> {:?}", ctx.predicted_emotion());
    println!("score matrix (rows = emotions, columns = view groups):");
    for (e, row) in ctx.rows().iter().enumerate() {
        println!("  {:8} {:?}", Emotion::ALL[e].name(), row.map(|v| (v * 1000.0).round() / 1000.0));
    }
    Ok(())
}
