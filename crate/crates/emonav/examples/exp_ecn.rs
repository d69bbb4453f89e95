// Experiment: classifier accuracy on held-out synthetic gaits.
use emonav::emotionctx::*;
use emonav::gaitlab::{synth_gait, Emotion};
use emonav::nncore::OptimizerConfig;
use std::time::Instant;

fn main() {
    let lr: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.002);
    let epochs: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(30);
    let width: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(25);
    let cfg = EcnConfig { input_width: width, ..EcnConfig::desk() };
    let train: Vec<EcnSample> = (0..400)
        .map(|i| {
            let e = Emotion::ALL[i % 4];
            EcnSample::from_sequence(&synth_gait(e, i as u64, 40, 25.0).unwrap(), cfg.input_width).unwrap()
        })
        .collect();
    let held: Vec<EcnSample> = (0..200)
        .map(|i| {
            let e = Emotion::ALL[i % 4];
            EcnSample::from_sequence(&synth_gait(e, 10_000 + i as u64, 40, 25.0).unwrap(), cfg.input_width)
                .unwrap()
        })
        .collect();
    let t0 = Instant::now();
    let opt = OptimizerConfig::adam_default().with_learning_rate(lr);
    let (model, report) = train_ecn(&train, cfg, opt, epochs, 5).unwrap();
    let correct = held
        .iter()
        .filter(|s| model.classify(&s.image).unwrap().predicted_emotion() == s.emotion)
        .count();
    let group_correct = held
        .iter()
        .filter(|s| model.classify(&s.image).unwrap().predicted_view_group() == s.view_group)
        .count();
    println!(
        "lr={lr} epochs={epochs}: best_val={:.3} held-out emotion acc {}/{} = {:.3}, group acc {:.3}, {:.0}s",
        report.best_val_accuracy,
        correct,
        held.len(),
        correct as f64 / held.len() as f64,
        group_correct as f64 / held.len() as f64,
        t0.elapsed().as_secs_f64()
    );
    let mut confusion = [[0usize; 4]; 4];
    for s in &held {
        let pred = model.classify(&s.image).unwrap().predicted_emotion();
        confusion[s.emotion.index()][pred.index()] += 1;
    }
    println!("rows=truth cols=pred [happy sad angry neutral]");
    for (i, row) in confusion.iter().enumerate() {
        println!("{:8} {:?}", Emotion::ALL[i].name(), row);
    }
}
