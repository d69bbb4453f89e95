// Experiment: overfit the desk transformer on 8 sequences; measure decode L2.
use emonav::emotionctx::EmotionContext;
use emonav::gaitlab::{synth_gait, Emotion, JOINT_COUNT};
use emonav::intentnet::{IntentModel, IntentSample, TransformerConfig};
use emonav::nncore::{Optimizer, OptimizerConfig, Tape};
use std::time::Instant;

fn decode_l2(model: &IntentModel, s: &IntentSample) -> (f64, f64) {
    let pred = model.decode(&s.history, &s.ctx, model.cfg.horizon_len).unwrap();
    let mut worst = 0.0f64;
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for (pf, tf) in pred.frames().iter().zip(s.future.frames()) {
        for j in 0..JOINT_COUNT {
            let d = ((pf[j][0] - tf[j][0]).powi(2) + (pf[j][1] - tf[j][1]).powi(2) + (pf[j][2] - tf[j][2]).powi(2)).sqrt();
            worst = worst.max(d);
            sum += d;
            n += 1;
        }
    }
    (worst, sum / n as f64)
}

fn main() {
    let lr: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.002);
    let steps: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(400);
    let cfg = TransformerConfig::desk();
    let samples: Vec<IntentSample> = (0..8)
        .map(|i| {
            let e = Emotion::ALL[i % 4];
            let seq = synth_gait(e, 100 + i as u64, 33, 25.0).unwrap();
            IntentSample::split(&seq, &cfg, EmotionContext::one_hot(e, 0)).unwrap()
        })
        .collect();
    let mut model = IntentModel::new(TransformerConfig { seed: 7, ..cfg }).unwrap();
    let mut cfg_opt = OptimizerConfig::adam_default().with_learning_rate(lr);
    cfg_opt.decay_every_epochs = 150;
    let mut opt = Optimizer::new(cfg_opt).unwrap();
    let t0 = Instant::now();
    for step in 0..steps {
        opt.set_epoch(step);
        model.params.zero_grads();
        let mut total = 0.0;
        for s in &samples {
            let mut tape = Tape::new();
            let tp = model.params.inject(&mut tape).unwrap();
            let loss = model.teacher_forced_loss(&mut tape, &tp, &s.history, &s.ctx, &s.future, None).unwrap();
            tape.backward(loss).unwrap();
            model.params.accumulate_grads(&tape, &tp).unwrap();
            total += tape.scalar(loss);
        }
        model.params.scale_grads(1.0 / samples.len() as f64);
        opt.step(&mut model.params).unwrap();
        if step % 200 == 0 || step == steps - 1 {
            let (mut worst, mut mean) = (0.0f64, 0.0f64);
            for s in &samples {
                let (w, m) = decode_l2(&model, s);
                worst = worst.max(w);
                mean += m / samples.len() as f64;
            }
            println!(
                "step {:5}  train_mse {:.3e}  decode_L2 worst {:.4} mean {:.5}  elapsed {:.1}s",
                step, total / 8.0, worst, mean, t0.elapsed().as_secs_f64()
            );
        }
    }
}
