// Can the classifier overfit 32 samples? Separates bugs from capacity.
use emonav::emotionctx::*;
use emonav::gaitlab::{synth_gait, Emotion};
use emonav::nncore::{Optimizer, OptimizerConfig, Tape};

fn main() {
    let lr: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.002);
    let steps: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(300);
    let c1: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(16);
    let c2: usize = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(32);
    let width: usize = std::env::args().nth(5).and_then(|s| s.parse().ok()).unwrap_or(25);
    let cfg = EcnConfig { input_width: width, c1, c2, seed: 3 };
    let samples: Vec<EcnSample> = (0..32)
        .map(|i| {
            let e = Emotion::ALL[i % 4];
            EcnSample::from_sequence(&synth_gait(e, i as u64, 40, 25.0).unwrap(), cfg.input_width).unwrap()
        })
        .collect();
    let mut model = EcnModel::new(cfg).unwrap();
    let mut opt = Optimizer::new(OptimizerConfig::adam_default().with_learning_rate(lr)).unwrap();
    for step in 0..steps {
        model.params.zero_grads();
        let mut total = 0.0;
        for s in &samples {
            let input = s.image.tiled_tensor(4);
            let mut tape = Tape::new();
            let tp = model.params.inject(&mut tape).unwrap();
            let logits = model.logits(&mut tape, &tp, &input).unwrap();
            let rows = tape.reshape(logits, vec![4, 4]).unwrap();
            let lsm = tape.log_softmax_rows(rows).unwrap();
            let mut w = [0.25f64; 16];
            for e in 0..4 {
                w[s.view_group * 4 + e] = if e == s.emotion.index() { 1.0 } else { 0.0 };
            }
            let target = tape.constant(vec![4, 4], w.to_vec()).unwrap();
            let weighted = tape.mul(lsm, target).unwrap();
            let nll = tape.sum_all(weighted).unwrap();
            let loss = tape.mul_scalar(nll, -1.0).unwrap();
            tape.backward(loss).unwrap();
            model.params.accumulate_grads(&tape, &tp).unwrap();
            total += tape.scalar(loss);
        }
        model.params.scale_grads(1.0 / 32.0);
        opt.step(&mut model.params).unwrap();
        if step % 50 == 0 || step + 1 == steps {
            let acc = samples
                .iter()
                .filter(|s| model.classify(&s.image).unwrap().predicted_emotion() == s.emotion)
                .count();
            println!("step {step:4} loss {:.4} train emotion acc {}/32", total / 32.0, acc);
        }
    }
}
