// Experiment: Table-I-style ordering on a 500-sequence synthetic corpus.
use emonav::emotionctx::heuristic_classify;
use emonav::gaitlab::{synth_gait, Emotion, GaitSequence};
use emonav::intentnet::*;
use emonav::nncore::OptimizerConfig;
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    let lr: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.001);
    let epochs: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(30);
    let cfg = TransformerConfig::desk();
    let n = 500;
    let samples: Vec<IntentSample> = (0..n)
        .map(|i| {
            let e = Emotion::ALL[i % 4];
            let seq = synth_gait(e, i as u64, 33, 25.0).unwrap();
            let ctx = heuristic_classify(&seq.slice(0, cfg.history_len)).unwrap();
            IntentSample::split(&seq, &cfg, ctx).unwrap()
        })
        .collect();

    // Same split convention as train_intent (seeded shuffle, first 10% = val).
    let seed = 42u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    // train_intent uses its own Fisher-Yates; replicate by calling the real thing below.
    order.shuffle(&mut rng);

    let t0 = Instant::now();
    let opt = OptimizerConfig::adam_default().with_learning_rate(lr);
    let (model, report) = train_intent(&samples, cfg, opt, epochs, 32, seed).unwrap();
    println!("trained {} epochs in {:.0}s; val loss curve tail: {:?}",
        epochs, t0.elapsed().as_secs_f64(),
        &report.val_loss[report.val_loss.len().saturating_sub(4)..]);

    // Rebuild the validation index set exactly as train_intent does.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..order.len()).rev() {
        use rand::Rng;
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let val_idx = &order[..n / 10];
    let slices = [80.0, 160.0, 320.0];

    for kind in BaselineKind::ALL {
        let pairs: Vec<(GaitSequence, GaitSequence)> = val_idx
            .iter()
            .map(|&i| (baseline_predict(kind, &samples[i].history, 8).unwrap(), samples[i].future.clone()))
            .collect();
        let m = mse_metric_pooled(&pairs, &slices).unwrap();
        println!("{:28} {:8.4} {:8.4} {:8.4}", kind.name(), m[0], m[1], m[2]);
    }
    let pairs: Vec<(GaitSequence, GaitSequence)> = val_idx
        .iter()
        .map(|&i| (model.decode(&samples[i].history, &samples[i].ctx, 8).unwrap(), samples[i].future.clone()))
        .collect();
    let m = mse_metric_pooled(&pairs, &slices).unwrap();
    println!("{:28} {:8.4} {:8.4} {:8.4}", "model", m[0], m[1], m[2]);
    println!("total {:.0}s", t0.elapsed().as_secs_f64());
}
