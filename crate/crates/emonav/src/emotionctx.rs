//! Emotion context: a grouped-convolution classifier mapping gait images to
//! a 4 emotions × 4 view-groups score matrix, plus a deterministic
//! threshold classifier for pipeline runs that need no training.
//!
//! View groups quantize the walker's orientation relative to the observing
//! camera in quarter turns: group 0 faces the camera, each following group
//! adds a counter-clockwise quarter turn.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};
use std::path::Path;

use crate::gaitlab::{gait_to_image, resample, Emotion, GaitImage, GaitSequence};
use crate::nncore::{
    load_records, save_records, uniform_init, Optimizer, OptimizerConfig, Padding, ParamStore,
    Tape, TapeParams, Tensor, TensorId,
};
use crate::{Error, Result};

pub const N_EMOTIONS: usize = 4;
pub const N_VIEW_GROUPS: usize = 4;

/// Per-human emotion evidence: a non-negative score for every
/// (emotion, view group) pair. The classifier normalizes each view group's
/// column to sum to one, so scores are comparable across groups.
#[derive(Clone, Debug, PartialEq)]
pub struct EmotionContext {
    /// `scores[emotion][group]`.
    scores: [[f64; N_VIEW_GROUPS]; N_EMOTIONS],
}

impl EmotionContext {
    pub fn new(scores: [[f64; N_VIEW_GROUPS]; N_EMOTIONS]) -> Result<Self> {
        let mut any_positive = false;
        for row in &scores {
            for &v in row {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::config(format!(
                        "emotion scores must be finite and >= 0, got {v}"
                    )));
                }
                any_positive |= v > 0.0;
            }
        }
        if !any_positive {
            return Err(Error::config("emotion context must have at least one positive score"));
        }
        Ok(EmotionContext { scores })
    }

    pub fn one_hot(emotion: Emotion, group: usize) -> Self {
        let mut scores = [[0.0; N_VIEW_GROUPS]; N_EMOTIONS];
        scores[emotion.index()][group % N_VIEW_GROUPS] = 1.0;
        EmotionContext { scores }
    }

    pub fn score(&self, emotion: Emotion, group: usize) -> f64 {
        self.scores[emotion.index()][group]
    }

    pub fn rows(&self) -> &[[f64; N_VIEW_GROUPS]; N_EMOTIONS] {
        &self.scores
    }

    /// All 16 scores, emotion-major.
    pub fn flat(&self) -> [f64; N_EMOTIONS * N_VIEW_GROUPS] {
        let mut out = [0.0; 16];
        for e in 0..N_EMOTIONS {
            for g in 0..N_VIEW_GROUPS {
                out[e * N_VIEW_GROUPS + g] = self.scores[e][g];
            }
        }
        out
    }

    pub fn max_over_groups(&self, emotion: Emotion) -> f64 {
        self.scores[emotion.index()].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Group index of the globally maximal score; ties break toward the
    /// lowest (emotion, group) indices.
    pub fn predicted_view_group(&self) -> usize {
        let mut best = f64::NEG_INFINITY;
        let mut arg = (0, 0);
        for e in 0..N_EMOTIONS {
            for g in 0..N_VIEW_GROUPS {
                if self.scores[e][g] > best {
                    best = self.scores[e][g];
                    arg = (e, g);
                }
            }
        }
        arg.1
    }

    /// Emotion whose best-group score is globally maximal; ties break
    /// toward the lowest emotion index.
    pub fn predicted_emotion(&self) -> Emotion {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for e in 0..N_EMOTIONS {
            let v = self.max_over_groups(Emotion::ALL[e]);
            if v > best {
                best = v;
                arg = e;
            }
        }
        Emotion::ALL[arg]
    }
}

/// World orientation implied by a view group: group 0 faces the observing
/// camera (heading + π), each higher group adds a quarter turn.
/// Returns radians in `[0, 2π)`.
pub fn orientation_from_viewgroup(group: usize, robot_heading: f64) -> Result<f64> {
    if group >= N_VIEW_GROUPS {
        return Err(Error::config(format!("view group must be 0..4, got {group}")));
    }
    Ok((robot_heading + PI + group as f64 * PI / 2.0).rem_euclid(TAU))
}

/// Inverse of [`orientation_from_viewgroup`]: nearest view group for a
/// human world heading seen from a robot with `robot_heading`.
pub fn viewgroup_from_orientation(human_heading: f64, robot_heading: f64) -> usize {
    let rel = (human_heading - robot_heading - PI).rem_euclid(TAU);
    ((rel / (PI / 2.0)).round() as usize) % N_VIEW_GROUPS
}

// ── Heuristic classifier ────────────────────────────────────────────

/// Speed thresholds separating sad / neutral / fast walkers (m/s), and the
/// torso-pitch threshold separating angry from happy among fast walkers.
const SAD_SPEED_MAX: f64 = 0.8;
const NEUTRAL_SPEED_MAX: f64 = 1.2;
const ANGRY_PITCH_MIN: f64 = 0.10;

/// Deterministic stand-in for the trained classifier: thresholds on mean
/// root speed and torso pitch pick the emotion, and the one-hot score lands
/// in the view group nearest the sequence's net heading (quantized at the
/// odd multiples of π/4, i.e. octant boundaries). The observing camera is
/// taken at heading 0, so the group is the walker's absolute quarter-turn
/// class.
pub fn heuristic_classify(seq: &GaitSequence) -> Result<EmotionContext> {
    if seq.len() < 10 {
        return Err(Error::config(format!(
            "heuristic_classify needs >= 10 frames, got {}",
            seq.len()
        )));
    }
    let speed = seq.mean_root_speed();
    let pitch = seq.mean_torso_pitch();
    let emotion = if speed < SAD_SPEED_MAX {
        Emotion::Sad
    } else if speed < NEUTRAL_SPEED_MAX {
        Emotion::Neutral
    } else if pitch > ANGRY_PITCH_MIN {
        Emotion::Angry
    } else {
        Emotion::Happy
    };
    let group = viewgroup_from_orientation(seq.mean_heading(), 0.0);
    Ok(EmotionContext::one_hot(emotion, group))
}

// ── Classifier network ──────────────────────────────────────────────

/// Classifier hyperparameters. Input gait images are resampled to
/// `input_width` timesteps and tiled `N_VIEW_GROUPS` times along channels
/// so every group of the grouped convolutions sees the full image.
#[derive(Clone, Copy, Debug)]
pub struct EcnConfig {
    pub input_width: usize,
    /// Channels after the first grouped block (divisible by 4).
    pub c1: usize,
    /// Channels after the second grouped block (divisible by 4).
    pub c2: usize,
    pub seed: u64,
}

impl EcnConfig {
    /// Full-width preset (75-step gait images).
    pub fn paper() -> Self {
        EcnConfig { input_width: 75, c1: 32, c2: 64, seed: 0 }
    }

    /// Small preset for CPU training.
    pub fn desk() -> Self {
        EcnConfig { input_width: 25, c1: 32, c2: 64, seed: 0 }
    }

    fn validate(&self) -> Result<()> {
        if self.c1 % N_VIEW_GROUPS != 0 || self.c2 % N_VIEW_GROUPS != 0 {
            return Err(Error::config("ECN channel counts must be divisible by the 4 view groups"));
        }
        if self.input_width < 4 {
            return Err(Error::config("ECN input width too small"));
        }
        Ok(())
    }
}

/// Grouped-convolution emotion classifier: two (grouped conv, bias, ReLU,
/// 2×2 max-pool) blocks with groups = 4, global average pooling, and an
/// affine head to 16 logits interpreted as 4 emotions × 4 view groups.
#[derive(Clone, Debug)]
pub struct EcnModel {
    pub cfg: EcnConfig,
    pub params: ParamStore,
}

impl EcnModel {
    pub fn new(cfg: EcnConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut params = ParamStore::new();
        let in_ch = 3 * N_VIEW_GROUPS;
        let cig1 = in_ch / N_VIEW_GROUPS;
        params.add("conv1/kernels", uniform_init(&mut rng, vec![cfg.c1, cig1, 5, 5], cig1 * 25))?;
        params.add("conv1/bias", Tensor::zeros(vec![cfg.c1]))?;
        let cig2 = cfg.c1 / N_VIEW_GROUPS;
        params.add("conv2/kernels", uniform_init(&mut rng, vec![cfg.c2, cig2, 5, 5], cig2 * 25))?;
        params.add("conv2/bias", Tensor::zeros(vec![cfg.c2]))?;
        params.add("head/weight", uniform_init(&mut rng, vec![cfg.c2, 16], cfg.c2))?;
        params.add("head/bias", Tensor::zeros(vec![16]))?;
        Ok(EcnModel { cfg, params })
    }

    /// Raw 16 logits (`[1,16]` node, group-major: index = group·4 +
    /// emotion) for a tiled image tensor.
    pub fn logits(&self, tape: &mut Tape, tp: &TapeParams, img: &Tensor) -> Result<TensorId> {
        let x = tape.leaf(img)?;
        let c1 = tape.grouped_conv2d(x, tp.id("conv1/kernels"), N_VIEW_GROUPS, 1, Padding::Same)?;
        let c1 = tape.channel_bias(c1, tp.id("conv1/bias"))?;
        let c1 = tape.relu(c1)?;
        let p1 = tape.max_pool2(c1)?;
        let c2 = tape.grouped_conv2d(p1, tp.id("conv2/kernels"), N_VIEW_GROUPS, 1, Padding::Same)?;
        let c2 = tape.channel_bias(c2, tp.id("conv2/bias"))?;
        let c2 = tape.relu(c2)?;
        let p2 = tape.max_pool2(c2)?;
        let feat = tape.global_avg_pool(p2)?;
        tape.affine(feat, tp.id("head/weight"), tp.id("head/bias"))
    }

    fn prepare(&self, img: &GaitImage) -> Result<Tensor> {
        if img.width != self.cfg.input_width {
            return Err(Error::shape(format!(
                "gait image width {} does not match model input width {}",
                img.width, self.cfg.input_width
            )));
        }
        Ok(img.tiled_tensor(N_VIEW_GROUPS))
    }

    /// Classifies a gait image: per-group softmax over emotions, so every
    /// view group's four scores sum to one.
    pub fn classify(&self, img: &GaitImage) -> Result<EmotionContext> {
        let input = self.prepare(img)?;
        let mut tape = Tape::new();
        let tp = self.params.inject(&mut tape)?;
        let logits = self.logits(&mut tape, &tp, &input)?;
        let raw = tape.value(logits);
        let mut scores = [[0.0; N_VIEW_GROUPS]; N_EMOTIONS];
        for g in 0..N_VIEW_GROUPS {
            let col: Vec<f64> = (0..N_EMOTIONS).map(|e| raw[g * N_EMOTIONS + e]).collect();
            let sm = softmax4(&col);
            for e in 0..N_EMOTIONS {
                scores[e][g] = sm[e];
            }
        }
        EmotionContext::new(scores)
    }

    /// Resamples a sequence to the model width and classifies it.
    pub fn classify_sequence(&self, seq: &GaitSequence) -> Result<EmotionContext> {
        let r = resample(seq, self.cfg.input_width)?;
        self.classify(&gait_to_image(&r)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut records: Vec<(String, Tensor)> = vec![
            ("__cfg/kind".to_string(), Tensor::scalar(1.0)),
            (
                "__cfg/ecn".to_string(),
                Tensor::new(
                    vec![4],
                    vec![
                        self.cfg.input_width as f64,
                        self.cfg.c1 as f64,
                        self.cfg.c2 as f64,
                        self.cfg.seed as f64,
                    ],
                )?,
            ),
        ];
        for (name, t) in self.params.iter() {
            records.push((name.to_string(), t.clone()));
        }
        save_records(path, &records)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let records = load_records(path)?;
        let kind = records
            .iter()
            .find(|(n, _)| n == "__cfg/kind")
            .ok_or_else(|| Error::schema(None, "checkpoint missing kind record"))?;
        if kind.1.data() != [1.0] {
            return Err(Error::schema(None, "checkpoint is not an emotion classifier"));
        }
        let cfg_rec = records
            .iter()
            .find(|(n, _)| n == "__cfg/ecn")
            .ok_or_else(|| Error::schema(None, "checkpoint missing classifier config"))?;
        let d = cfg_rec.1.data();
        let cfg = EcnConfig {
            input_width: d[0] as usize,
            c1: d[1] as usize,
            c2: d[2] as usize,
            seed: d[3] as u64,
        };
        cfg.validate()?;
        let mut params = ParamStore::new();
        for (name, t) in records {
            if !name.starts_with("__cfg/") {
                params.add(name, t)?;
            }
        }
        Ok(EcnModel { cfg, params })
    }
}

fn softmax4(col: &[f64]) -> Vec<f64> {
    let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = col.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = ex.iter().sum();
    ex.into_iter().map(|v| v / s).collect()
}

// ── Training ────────────────────────────────────────────────────────

/// One labeled classifier example.
#[derive(Clone, Debug)]
pub struct EcnSample {
    pub image: GaitImage,
    pub emotion: Emotion,
    pub view_group: usize,
}

impl EcnSample {
    /// Builds a sample from a labeled sequence: the label combines the
    /// sequence emotion with its heading-derived view group.
    pub fn from_sequence(seq: &GaitSequence, width: usize) -> Result<EcnSample> {
        let emotion = seq
            .emotion
            .ok_or_else(|| Error::config("ECN training needs emotion-labeled sequences"))?;
        let r = resample(seq, width)?;
        Ok(EcnSample {
            image: gait_to_image(&r)?,
            emotion,
            view_group: viewgroup_from_orientation(seq.mean_heading(), 0.0),
        })
    }

    /// Cross-entropy target over the 4×4 score matrix: one-hot at the
    /// labeled emotion inside the labeled view group's column, uniform in
    /// every other column. Training against this target makes the labeled
    /// column sharp and the others flat, which is exactly what the
    /// global-argmax decision rule needs.
    fn target_weights(&self) -> [f64; 16] {
        let mut w = [0.25; 16];
        for e in 0..N_EMOTIONS {
            w[self.view_group * N_EMOTIONS + e] = if e == self.emotion.index() { 1.0 } else { 0.0 };
        }
        w
    }
}

/// Training report: per-epoch mean training loss and validation accuracy.
#[derive(Clone, Debug, Default)]
pub struct EcnTrainReport {
    pub train_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub best_val_accuracy: f64,
}

/// Trains the classifier with per-group cross-entropy against a target
/// that is one-hot at the (emotion, view group) label and uniform in the
/// unlabeled groups, on a 90/10 train/validation split; returns the
/// best-validation model.
pub fn train_ecn(
    dataset: &[EcnSample],
    cfg: EcnConfig,
    opt_cfg: OptimizerConfig,
    epochs: usize,
    seed: u64,
) -> Result<(EcnModel, EcnTrainReport)> {
    if dataset.is_empty() {
        return Err(Error::config("classifier training dataset is empty"));
    }
    let classes: std::collections::HashSet<usize> =
        dataset.iter().map(|s| s.emotion.index()).collect();
    if classes.len() < 2 {
        return Err(Error::config("classifier training needs at least 2 emotion classes present"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    shuffle(&mut order, &mut rng);
    let n_val = (dataset.len() / 10).max(1);
    let (val_idx, train_idx) = order.split_at(n_val);

    let mut model = EcnModel::new(EcnConfig { seed, ..cfg })?;
    let mut opt = Optimizer::new(opt_cfg)?;
    let mut best = model.clone();
    let mut report = EcnTrainReport::default();

    for epoch in 0..epochs {
        opt.set_epoch(epoch);
        let mut idx = train_idx.to_vec();
        shuffle(&mut idx, &mut rng);
        let mut epoch_loss = 0.0;
        for batch in idx.chunks(16) {
            model.params.zero_grads();
            let mut batch_loss = 0.0;
            for &i in batch {
                let sample = &dataset[i];
                let input = model.prepare(&sample.image)?;
                let mut tape = Tape::new();
                let tp = model.params.inject(&mut tape)?;
                let logits = model.logits(&mut tape, &tp, &input)?;
                let rows = tape.reshape(logits, vec![N_VIEW_GROUPS, N_EMOTIONS])?;
                let logp = tape.log_softmax_rows(rows)?;
                let target = tape.constant(vec![N_VIEW_GROUPS, N_EMOTIONS], sample.target_weights().to_vec())?;
                let weighted = tape.mul(logp, target)?;
                let nll = tape.sum_all(weighted)?;
                let loss = tape.mul_scalar(nll, -1.0)?;
                tape.backward(loss)?;
                model.params.accumulate_grads(&tape, &tp)?;
                batch_loss += tape.scalar(loss);
            }
            model.params.scale_grads(1.0 / batch.len() as f64);
            opt.step(&mut model.params)?;
            epoch_loss += batch_loss;
        }
        report.train_loss.push(epoch_loss / train_idx.len() as f64);

        let correct = val_idx
            .iter()
            .filter(|&&i| {
                model
                    .classify(&dataset[i].image)
                    .map(|ctx| ctx.predicted_emotion() == dataset[i].emotion)
                    .unwrap_or(false)
            })
            .count();
        let acc = correct as f64 / val_idx.len() as f64;
        report.val_accuracy.push(acc);
        if acc > report.best_val_accuracy {
            report.best_val_accuracy = acc;
            best = model.clone();
        }
    }
    Ok((best, report))
}

fn shuffle(v: &mut [usize], rng: &mut ChaCha8Rng) {
    use rand::Rng;
    for i in (1..v.len()).rev() {
        let j = rng.gen_range(0..=i);
        v.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaitlab::synth_gait;
    use approx::assert_abs_diff_eq;

    #[test]
    fn one_hot_context_properties() {
        let ctx = EmotionContext::one_hot(Emotion::Sad, 2);
        assert_eq!(ctx.predicted_emotion(), Emotion::Sad);
        assert_eq!(ctx.predicted_view_group(), 2);
        assert_eq!(ctx.flat().iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn rejects_negative_and_all_zero_scores() {
        let mut s = [[0.0; 4]; 4];
        assert!(EmotionContext::new(s).is_err());
        s[0][0] = -1.0;
        assert!(EmotionContext::new(s).is_err());
    }

    #[test]
    fn orientation_examples() {
        assert_abs_diff_eq!(orientation_from_viewgroup(0, 0.0).unwrap(), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(orientation_from_viewgroup(2, 0.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(orientation_from_viewgroup(1, PI / 2.0).unwrap(), 0.0, epsilon = 1e-12);
        assert!(orientation_from_viewgroup(4, 0.0).is_err());
    }

    #[test]
    fn orientation_lands_in_range_and_inverts() {
        for g in 0..4 {
            for h in [-7.0, -1.0, 0.0, 2.5, 9.4] {
                let th = orientation_from_viewgroup(g, h).unwrap();
                assert!((0.0..TAU).contains(&th));
                assert_eq!(viewgroup_from_orientation(th, h), g);
            }
        }
    }

    #[test]
    fn heuristic_matches_generator_presets() {
        for seed in 0..20 {
            for emotion in Emotion::ALL {
                let seq = synth_gait(emotion, seed, 60, 25.0).unwrap();
                let ctx = heuristic_classify(&seq).unwrap();
                assert_eq!(ctx.predicted_emotion(), emotion, "seed {seed} emotion {emotion:?}");
                assert_eq!(ctx.flat().iter().filter(|&&v| v != 0.0).count(), 1);
            }
        }
    }

    #[test]
    fn heuristic_rejects_short_sequences() {
        let seq = synth_gait(Emotion::Happy, 0, 5, 25.0).unwrap();
        assert!(heuristic_classify(&seq).is_err());
    }

    #[test]
    fn heuristic_is_pure() {
        let seq = synth_gait(Emotion::Angry, 5, 60, 25.0).unwrap();
        assert_eq!(heuristic_classify(&seq).unwrap(), heuristic_classify(&seq).unwrap());
    }

    #[test]
    fn classify_rows_are_per_group_distributions() {
        let model = EcnModel::new(EcnConfig::desk()).unwrap();
        let seq = synth_gait(Emotion::Happy, 3, 40, 25.0).unwrap();
        let ctx = model.classify_sequence(&seq).unwrap();
        for g in 0..N_VIEW_GROUPS {
            let col: f64 = Emotion::ALL.iter().map(|&e| ctx.score(e, g)).sum();
            assert_abs_diff_eq!(col, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn zeroed_head_gives_uniform_scores_and_lowest_tie() {
        let mut model = EcnModel::new(EcnConfig::desk()).unwrap();
        for name in ["head/weight", "head/bias"] {
            let t = model.params.get_mut(name).unwrap();
            for v in t.data_mut() {
                *v = 0.0;
            }
        }
        let seq = synth_gait(Emotion::Sad, 9, 40, 25.0).unwrap();
        let ctx = model.classify_sequence(&seq).unwrap();
        for e in Emotion::ALL {
            for g in 0..N_VIEW_GROUPS {
                assert_abs_diff_eq!(ctx.score(e, g), 0.25, epsilon = 1e-12);
            }
        }
        assert_eq!(ctx.predicted_emotion(), Emotion::Happy); // index 0
        assert_eq!(ctx.predicted_view_group(), 0);
    }

    #[test]
    fn classify_rejects_width_mismatch() {
        let model = EcnModel::new(EcnConfig::desk()).unwrap();
        let seq = synth_gait(Emotion::Happy, 3, 40, 25.0).unwrap();
        let img = gait_to_image(&seq).unwrap();
        assert!(model.classify(&img).is_err());
    }

    #[test]
    fn checkpoint_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ecn.ewn");
        let model = EcnModel::new(EcnConfig { seed: 11, ..EcnConfig::desk() }).unwrap();
        model.save(&path).unwrap();
        let loaded = EcnModel::load(&path).unwrap();
        let seq = synth_gait(Emotion::Neutral, 2, 40, 25.0).unwrap();
        assert_eq!(model.classify_sequence(&seq).unwrap(), loaded.classify_sequence(&seq).unwrap());
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let mut dataset = Vec::new();
        for seed in 0..10 {
            for emotion in Emotion::ALL {
                let seq = synth_gait(emotion, seed, 40, 25.0).unwrap();
                dataset.push(EcnSample::from_sequence(&seq, 25).unwrap());
            }
        }
        let opt = OptimizerConfig::adam_default().with_learning_rate(0.002);
        let run = || train_ecn(&dataset, EcnConfig::desk(), opt, 3, 7).unwrap();
        let (m1, r1) = run();
        let (m2, r2) = run();
        assert_eq!(r1.train_loss, r2.train_loss);
        for ((n1, t1), (n2, t2)) in m1.params.iter().zip(m2.params.iter()) {
            assert_eq!(n1, n2);
            assert_eq!(t1.data(), t2.data());
        }
        assert!(r1.train_loss.last().unwrap() < r1.train_loss.first().unwrap());
    }

    #[test]
    fn training_rejects_degenerate_datasets() {
        assert!(train_ecn(&[], EcnConfig::desk(), OptimizerConfig::adam_default(), 1, 0).is_err());
        let seq = synth_gait(Emotion::Happy, 0, 40, 25.0).unwrap();
        let one = vec![EcnSample::from_sequence(&seq, 25).unwrap()];
        assert!(train_ecn(&one, EcnConfig::desk(), OptimizerConfig::adam_default(), 1, 0).is_err());
    }
}
