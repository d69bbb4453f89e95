//! Transformer encoder–decoder that autoregressively predicts future gait
//! frames from history and emotion context, plus the five reference
//! baselines and the pose-error metric used to compare them.
//!
//! Frames are flattened to 48-vectors (16 joints × xyz), affine-embedded
//! with sinusoidal positions, and passed through post-norm transformer
//! layers. The flattened 16-entry emotion context is projected to one
//! extra memory token appended after encoder mixing, so decoding sees a
//! constant emotion signal at every step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use crate::emotionctx::EmotionContext;
use crate::gaitlab::{Frame, GaitSequence, JOINT_COUNT};
use crate::nncore::{
    load_records, save_records, uniform_init, Optimizer, OptimizerConfig, ParamStore, Tape,
    TapeParams, Tensor, TensorId,
};
use crate::{Error, Result};

/// Flattened frame width: 16 joints × (x, y, z).
pub const FRAME_DIM: usize = JOINT_COUNT * 3;

#[derive(Clone, Copy, Debug)]
pub struct TransformerConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub ffn_dim: usize,
    pub history_len: usize,
    pub horizon_len: usize,
    /// Dropout probability on decoder token embeddings during training.
    pub dropout: f64,
    pub seed: u64,
}

impl TransformerConfig {
    /// Six-layer preset at full sequence length; sized for GPUs, kept for
    /// config parity rather than desk training.
    pub fn paper() -> Self {
        TransformerConfig {
            n_layers: 6,
            d_model: 128,
            n_heads: 8,
            ffn_dim: 256,
            history_len: 75,
            horizon_len: 25,
            dropout: 0.0,
            seed: 0,
        }
    }

    /// Two-layer preset that trains in minutes on a CPU.
    pub fn desk() -> Self {
        TransformerConfig {
            n_layers: 2,
            d_model: 64,
            n_heads: 4,
            ffn_dim: 128,
            history_len: 25,
            horizon_len: 8,
            dropout: 0.0,
            seed: 0,
        }
    }

    /// Minimal preset for gradient checks.
    pub fn toy() -> Self {
        TransformerConfig {
            n_layers: 1,
            d_model: 8,
            n_heads: 2,
            ffn_dim: 8,
            history_len: 2,
            horizon_len: 1,
            dropout: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model % self.n_heads != 0 {
            return Err(Error::config(format!(
                "d_model {} must be divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.horizon_len < 1 {
            return Err(Error::config("horizon_len must be >= 1"));
        }
        if self.history_len < 1 || self.n_layers < 1 {
            return Err(Error::config("history_len and n_layers must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dropout must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Sinusoidal positional encodings for positions `0..max_len`.
fn positional_table(max_len: usize, d: usize) -> Vec<f64> {
    let mut table = vec![0.0; max_len * d];
    for pos in 0..max_len {
        for i in 0..d {
            let exponent = (2 * (i / 2)) as f64 / d as f64;
            let rate = pos as f64 / 10_000f64.powf(exponent);
            table[pos * d + i] = if i % 2 == 0 { rate.sin() } else { rate.cos() };
        }
    }
    table
}

/// The intent prediction model: parameters plus configuration.
#[derive(Clone, Debug)]
pub struct IntentModel {
    pub cfg: TransformerConfig,
    pub params: ParamStore,
    pos_table: Vec<f64>,
}

impl IntentModel {
    pub fn new(cfg: TransformerConfig) -> Result<IntentModel> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let d = cfg.d_model;
        let mut p = ParamStore::new();
        p.add("embed/w", uniform_init(&mut rng, vec![FRAME_DIM, d], FRAME_DIM))?;
        p.add("embed/b", Tensor::zeros(vec![d]))?;
        p.add("ctx/w", uniform_init(&mut rng, vec![16, d], 16))?;
        p.add("ctx/b", Tensor::zeros(vec![d]))?;
        for i in 0..cfg.n_layers {
            for block in [format!("enc{i}/attn"), format!("dec{i}/self"), format!("dec{i}/cross")] {
                for m in ["wq", "wk", "wv", "wo"] {
                    p.add(format!("{block}/{m}"), uniform_init(&mut rng, vec![d, d], d))?;
                }
                for m in ["bq", "bk", "bv", "bo"] {
                    p.add(format!("{block}/{m}"), Tensor::zeros(vec![d]))?;
                }
            }
            for ln in [
                format!("enc{i}/ln1"),
                format!("enc{i}/ln2"),
                format!("dec{i}/ln1"),
                format!("dec{i}/ln2"),
                format!("dec{i}/ln3"),
            ] {
                p.add(format!("{ln}/g"), Tensor::new(vec![d], vec![1.0; d])?)?;
                p.add(format!("{ln}/b"), Tensor::zeros(vec![d]))?;
            }
            for ffn in [format!("enc{i}/ffn"), format!("dec{i}/ffn")] {
                p.add(format!("{ffn}/w1"), uniform_init(&mut rng, vec![d, cfg.ffn_dim], d))?;
                p.add(format!("{ffn}/b1"), Tensor::zeros(vec![cfg.ffn_dim]))?;
                p.add(format!("{ffn}/w2"), uniform_init(&mut rng, vec![cfg.ffn_dim, d], cfg.ffn_dim))?;
                p.add(format!("{ffn}/b2"), Tensor::zeros(vec![d]))?;
            }
        }
        p.add("head/w", uniform_init(&mut rng, vec![d, FRAME_DIM], d))?;
        p.add("head/b", Tensor::zeros(vec![FRAME_DIM]))?;
        let pos_table = positional_table(cfg.history_len + cfg.horizon_len + 1, d);
        Ok(IntentModel { cfg, params: p, pos_table })
    }

    fn frames_tensor(frames: &[Frame]) -> Tensor {
        let mut data = Vec::with_capacity(frames.len() * FRAME_DIM);
        for f in frames {
            for j in f {
                data.extend_from_slice(j);
            }
        }
        Tensor::new(vec![frames.len(), FRAME_DIM], data).expect("finite gait frames")
    }

    fn positions(&self, tape: &mut Tape, offset: usize, n: usize) -> Result<TensorId> {
        let d = self.cfg.d_model;
        let data = self.pos_table[offset * d..(offset + n) * d].to_vec();
        tape.constant(vec![n, d], data)
    }

    /// Embeds flattened frames and adds positional encodings starting at
    /// `pos_offset`.
    fn embed(
        &self,
        tape: &mut Tape,
        tp: &TapeParams,
        frames: &[Frame],
        pos_offset: usize,
    ) -> Result<TensorId> {
        let x = tape.leaf(&Self::frames_tensor(frames))?;
        let e = tape.affine(x, tp.id("embed/w"), tp.id("embed/b"))?;
        let pos = self.positions(tape, pos_offset, frames.len())?;
        tape.add(e, pos)
    }

    fn attention_block(
        &self,
        tape: &mut Tape,
        tp: &TapeParams,
        name: &str,
        queries: TensorId,
        keys: TensorId,
        causal: bool,
    ) -> Result<TensorId> {
        let q = tape.affine(queries, tp.id(&format!("{name}/wq")), tp.id(&format!("{name}/bq")))?;
        let k = tape.affine(keys, tp.id(&format!("{name}/wk")), tp.id(&format!("{name}/bk")))?;
        let v = tape.affine(keys, tp.id(&format!("{name}/wv")), tp.id(&format!("{name}/bv")))?;
        let a = tape.scaled_dot_attention(q, k, v, self.cfg.n_heads, causal)?;
        tape.affine(a, tp.id(&format!("{name}/wo")), tp.id(&format!("{name}/bo")))
    }

    fn ffn_block(&self, tape: &mut Tape, tp: &TapeParams, name: &str, x: TensorId) -> Result<TensorId> {
        let h = tape.affine(x, tp.id(&format!("{name}/w1")), tp.id(&format!("{name}/b1")))?;
        let h = tape.relu(h)?;
        tape.affine(h, tp.id(&format!("{name}/w2")), tp.id(&format!("{name}/b2")))
    }

    fn residual_norm(
        &self,
        tape: &mut Tape,
        tp: &TapeParams,
        ln: &str,
        x: TensorId,
        dx: TensorId,
    ) -> Result<TensorId> {
        let sum = tape.add(x, dx)?;
        tape.layer_norm(sum, tp.id(&format!("{ln}/g")), tp.id(&format!("{ln}/b")), 1e-5)
    }

    /// Encoder memory for a history window: `history_len` mixed tokens plus
    /// the projected emotion-context token appended at the end (untouched
    /// by encoder mixing).
    pub fn encode(
        &self,
        tape: &mut Tape,
        tp: &TapeParams,
        history: &GaitSequence,
        ctx: &EmotionContext,
    ) -> Result<TensorId> {
        if history.len() != self.cfg.history_len {
            return Err(Error::shape(format!(
                "history has {} frames, model expects {}",
                history.len(),
                self.cfg.history_len
            )));
        }
        let mut x = self.embed(tape, tp, history.frames(), 0)?;
        for i in 0..self.cfg.n_layers {
            let attn = self.attention_block(tape, tp, &format!("enc{i}/attn"), x, x, false)?;
            x = self.residual_norm(tape, tp, &format!("enc{i}/ln1"), x, attn)?;
            let ffn = self.ffn_block(tape, tp, &format!("enc{i}/ffn"), x)?;
            x = self.residual_norm(tape, tp, &format!("enc{i}/ln2"), x, ffn)?;
        }
        let ctx_t = tape.constant(vec![1, 16], ctx.flat().to_vec())?;
        let ctx_tok = tape.affine(ctx_t, tp.id("ctx/w"), tp.id("ctx/b"))?;
        tape.concat(&[x, ctx_tok], 0)
    }

    /// Decoder stack over `tokens` with cross-attention into `memory`,
    /// returning per-token frame predictions (`[n, 48]`).
    fn decode_stack(
        &self,
        tape: &mut Tape,
        tp: &TapeParams,
        tokens: TensorId,
        memory: TensorId,
    ) -> Result<TensorId> {
        let mut x = tokens;
        for i in 0..self.cfg.n_layers {
            let sa = self.attention_block(tape, tp, &format!("dec{i}/self"), x, x, true)?;
            x = self.residual_norm(tape, tp, &format!("dec{i}/ln1"), x, sa)?;
            let ca = self.attention_block(tape, tp, &format!("dec{i}/cross"), x, memory, false)?;
            x = self.residual_norm(tape, tp, &format!("dec{i}/ln2"), x, ca)?;
            let ffn = self.ffn_block(tape, tp, &format!("dec{i}/ffn"), x)?;
            x = self.residual_norm(tape, tp, &format!("dec{i}/ln3"), x, ffn)?;
        }
        tape.affine(x, tp.id("head/w"), tp.id("head/b"))
    }

    /// Greedy autoregressive prediction of `horizon` future frames, seeded
    /// with the last observed frame.
    pub fn decode(
        &self,
        history: &GaitSequence,
        ctx: &EmotionContext,
        horizon: usize,
    ) -> Result<GaitSequence> {
        if horizon < 1 {
            return Err(Error::config("decode horizon must be >= 1"));
        }
        let mut tape = Tape::new();
        let tp = self.params.inject(&mut tape)?;
        let memory = self.encode(&mut tape, &tp, history, ctx)?;

        let mut frames: Vec<Frame> = vec![*history.frame(history.len() - 1)];
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let tokens = self.embed(&mut tape, &tp, &frames, self.cfg.history_len - 1)?;
            let preds = self.decode_stack(&mut tape, &tp, tokens, memory)?;
            let last = tape.value(preds);
            let row = &last[(frames.len() - 1) * FRAME_DIM..frames.len() * FRAME_DIM];
            let mut frame = [[0.0; 3]; JOINT_COUNT];
            for (j, joint) in frame.iter_mut().enumerate() {
                joint.copy_from_slice(&row[j * 3..j * 3 + 3]);
            }
            out.push(frame);
            frames.push(frame);
        }
        GaitSequence::new(format!("{}-pred", history.subject_id), history.fps, history.emotion, out)
    }

    /// Teacher-forced loss over one (history, future) pair.
    pub fn teacher_forced_loss(
        &self,
        tape: &mut Tape,
        tp: &TapeParams,
        history: &GaitSequence,
        ctx: &EmotionContext,
        future: &GaitSequence,
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<TensorId> {
        if future.len() != self.cfg.horizon_len {
            return Err(Error::shape(format!(
                "future has {} frames, model expects {}",
                future.len(),
                self.cfg.horizon_len
            )));
        }
        let memory = self.encode(tape, tp, history, ctx)?;
        let mut dec_inputs: Vec<Frame> = Vec::with_capacity(self.cfg.horizon_len);
        dec_inputs.push(*history.frame(history.len() - 1));
        dec_inputs.extend_from_slice(&future.frames()[..self.cfg.horizon_len - 1]);
        let mut tokens = self.embed(tape, tp, &dec_inputs, self.cfg.history_len - 1)?;
        if let Some(rng) = dropout_rng {
            if self.cfg.dropout > 0.0 {
                use rand::Rng;
                let keep = 1.0 - self.cfg.dropout;
                let n = dec_inputs.len() * self.cfg.d_model;
                let mask: Vec<f64> =
                    (0..n).map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 }).collect();
                let mask_t = tape.constant(vec![dec_inputs.len(), self.cfg.d_model], mask)?;
                tokens = tape.mul(tokens, mask_t)?;
            }
        }
        let preds = self.decode_stack(tape, tp, tokens, memory)?;
        let target = tape.leaf(&Self::frames_tensor(future.frames()))?;
        tape.mse(preds, target)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let c = &self.cfg;
        let mut records: Vec<(String, Tensor)> = vec![
            ("__cfg/kind".to_string(), Tensor::scalar(2.0)),
            (
                "__cfg/transformer".to_string(),
                Tensor::new(
                    vec![8],
                    vec![
                        c.n_layers as f64,
                        c.d_model as f64,
                        c.n_heads as f64,
                        c.ffn_dim as f64,
                        c.history_len as f64,
                        c.horizon_len as f64,
                        c.dropout,
                        c.seed as f64,
                    ],
                )?,
            ),
        ];
        for (name, t) in self.params.iter() {
            records.push((name.to_string(), t.clone()));
        }
        save_records(path, &records)
    }

    pub fn load(path: &Path) -> Result<IntentModel> {
        let records = load_records(path)?;
        let kind = records
            .iter()
            .find(|(n, _)| n == "__cfg/kind")
            .ok_or_else(|| Error::schema(None, "checkpoint missing kind record"))?;
        if kind.1.data() != [2.0] {
            return Err(Error::schema(None, "checkpoint is not an intent model"));
        }
        let c = records
            .iter()
            .find(|(n, _)| n == "__cfg/transformer")
            .ok_or_else(|| Error::schema(None, "checkpoint missing transformer config"))?;
        let d = c.1.data();
        let cfg = TransformerConfig {
            n_layers: d[0] as usize,
            d_model: d[1] as usize,
            n_heads: d[2] as usize,
            ffn_dim: d[3] as usize,
            history_len: d[4] as usize,
            horizon_len: d[5] as usize,
            dropout: d[6],
            seed: d[7] as u64,
        };
        cfg.validate()?;
        let mut params = ParamStore::new();
        for (name, t) in records {
            if !name.starts_with("__cfg/") {
                params.add(name, t)?;
            }
        }
        let pos_table = positional_table(cfg.history_len + cfg.horizon_len + 1, cfg.d_model);
        Ok(IntentModel { cfg, params, pos_table })
    }
}

// ── Training ────────────────────────────────────────────────────────

/// One training pair: history window, its future, and the emotion context
/// conditioning the prediction.
#[derive(Clone, Debug)]
pub struct IntentSample {
    pub history: GaitSequence,
    pub future: GaitSequence,
    pub ctx: EmotionContext,
}

impl IntentSample {
    /// Splits a sequence at `history_len`; the sequence must be at least
    /// `history_len + horizon_len` frames long.
    pub fn split(seq: &GaitSequence, cfg: &TransformerConfig, ctx: EmotionContext) -> Result<IntentSample> {
        let need = cfg.history_len + cfg.horizon_len;
        if seq.len() < need {
            return Err(Error::config(format!(
                "sequence of {} frames is shorter than history+horizon = {need}",
                seq.len()
            )));
        }
        Ok(IntentSample {
            history: seq.slice(0, cfg.history_len),
            future: seq.slice(cfg.history_len, need),
            ctx,
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct IntentTrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_val_loss: f64,
}

/// Teacher-forced MSE training with a 90/10 split; returns the
/// best-validation model and the loss curves.
pub fn train_intent(
    dataset: &[IntentSample],
    cfg: TransformerConfig,
    opt_cfg: OptimizerConfig,
    epochs: usize,
    batch_size: usize,
    seed: u64,
) -> Result<(IntentModel, IntentTrainReport)> {
    train_intent_from(None, dataset, cfg, opt_cfg, epochs, batch_size, seed)
}

/// [`train_intent`] warm-started from an existing model (checkpoint
/// resume). The config of `init`, when given, wins over `cfg`.
pub fn train_intent_from(
    init: Option<IntentModel>,
    dataset: &[IntentSample],
    cfg: TransformerConfig,
    opt_cfg: OptimizerConfig,
    epochs: usize,
    batch_size: usize,
    seed: u64,
) -> Result<(IntentModel, IntentTrainReport)> {
    if dataset.is_empty() {
        return Err(Error::config("intent training dataset is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    shuffle(&mut order, &mut rng);
    let n_val = (dataset.len() / 10).max(1).min(dataset.len() - 1).max(1);
    let (val_idx, train_idx) = order.split_at(n_val);

    let mut model = match init {
        Some(m) => m,
        None => IntentModel::new(TransformerConfig { seed, ..cfg })?,
    };
    let mut opt = Optimizer::new(opt_cfg)?;
    let mut report = IntentTrainReport { best_val_loss: f64::INFINITY, ..Default::default() };
    let mut best = model.clone();

    let mut dropout_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd30);
    for epoch in 0..epochs {
        opt.set_epoch(epoch);
        let mut idx = train_idx.to_vec();
        shuffle(&mut idx, &mut rng);
        let mut total = 0.0;
        for batch in idx.chunks(batch_size.max(1)) {
            model.params.zero_grads();
            for &i in batch {
                let s = &dataset[i];
                let mut tape = Tape::new();
                let tp = model.params.inject(&mut tape)?;
                let loss = model.teacher_forced_loss(
                    &mut tape,
                    &tp,
                    &s.history,
                    &s.ctx,
                    &s.future,
                    Some(&mut dropout_rng),
                )?;
                tape.backward(loss)?;
                model.params.accumulate_grads(&tape, &tp)?;
                total += tape.scalar(loss);
            }
            model.params.scale_grads(1.0 / batch.len() as f64);
            opt.step(&mut model.params)?;
        }
        report.train_loss.push(total / train_idx.len() as f64);

        let val = validation_loss(&model, dataset, val_idx)?;
        report.val_loss.push(val);
        if val < report.best_val_loss {
            report.best_val_loss = val;
            best = model.clone();
        }
    }
    Ok((best, report))
}

/// Mean teacher-forced loss over a subset.
pub fn validation_loss(model: &IntentModel, dataset: &[IntentSample], idx: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for &i in idx {
        let s = &dataset[i];
        let mut tape = Tape::new();
        let tp = model.params.inject(&mut tape)?;
        let loss = model.teacher_forced_loss(&mut tape, &tp, &s.history, &s.ctx, &s.future, None)?;
        total += tape.scalar(loss);
    }
    Ok(total / idx.len().max(1) as f64)
}

fn shuffle(v: &mut [usize], rng: &mut ChaCha8Rng) {
    use rand::Rng;
    for i in (1..v.len()).rev() {
        let j = rng.gen_range(0..=i);
        v.swap(i, j);
    }
}

// ── Baselines ───────────────────────────────────────────────────────

/// The five reference predictors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineKind {
    ZeroPoseZeroMotion,
    ZeroPoseConstantMotion,
    ConstantPoseConstantMotion,
    LocalPoseZeroMotion,
    LocalPoseConstantMotion,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [
        BaselineKind::ZeroPoseZeroMotion,
        BaselineKind::ZeroPoseConstantMotion,
        BaselineKind::ConstantPoseConstantMotion,
        BaselineKind::LocalPoseZeroMotion,
        BaselineKind::LocalPoseConstantMotion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::ZeroPoseZeroMotion => "ZeroPose-ZeroMotion",
            BaselineKind::ZeroPoseConstantMotion => "ZeroPose-ConstantMotion",
            BaselineKind::ConstantPoseConstantMotion => "ConstantPose-ConstantMotion",
            BaselineKind::LocalPoseZeroMotion => "LocalPose-ZeroMotion",
            BaselineKind::LocalPoseConstantMotion => "LocalPose-ConstantMotion",
        }
    }

    pub fn parse(s: &str) -> Result<BaselineKind> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown baseline '{s}'")))
    }

    fn uses_constant_motion(self) -> bool {
        matches!(
            self,
            BaselineKind::ZeroPoseConstantMotion
                | BaselineKind::ConstantPoseConstantMotion
                | BaselineKind::LocalPoseConstantMotion
        )
    }
}

/// Closed-form baseline prediction.
///
/// Root motion: ZeroMotion freezes the root at its last observed position;
/// ConstantMotion extrapolates it at the last-step velocity. Pose:
/// ZeroPose collapses every joint onto the root; LocalPose re-centers the
/// last pose to root-relative coordinates and re-attaches it to the moving
/// root; ConstantPose freezes the raw world-frame pose (only the root
/// follows the motion model), so it degrades when the root moves.
pub fn baseline_predict(
    kind: BaselineKind,
    history: &GaitSequence,
    horizon: usize,
) -> Result<GaitSequence> {
    if history.is_empty() {
        return Err(Error::config("baseline prediction needs history"));
    }
    if kind.uses_constant_motion() && history.len() < 2 {
        return Err(Error::config(format!("{} needs at least 2 history frames", kind.name())));
    }
    let t_last = history.len() - 1;
    let last = *history.frame(t_last);
    let root = history.root(t_last);
    let vel = if kind.uses_constant_motion() {
        let prev = history.root(t_last - 1);
        [root[0] - prev[0], root[1] - prev[1], root[2] - prev[2]]
    } else {
        [0.0; 3]
    };
    let local = history.local_pose(t_last);

    let mut frames = Vec::with_capacity(horizon);
    for k in 1..=horizon {
        let rho = [
            root[0] + vel[0] * k as f64,
            root[1] + vel[1] * k as f64,
            root[2] + vel[2] * k as f64,
        ];
        let mut frame = [[0.0; 3]; JOINT_COUNT];
        match kind {
            BaselineKind::ZeroPoseZeroMotion | BaselineKind::ZeroPoseConstantMotion => {
                for j in frame.iter_mut() {
                    *j = rho;
                }
            }
            BaselineKind::LocalPoseZeroMotion | BaselineKind::LocalPoseConstantMotion => {
                for (j, l) in frame.iter_mut().zip(&local) {
                    *j = [rho[0] + l[0], rho[1] + l[1], rho[2] + l[2]];
                }
            }
            BaselineKind::ConstantPoseConstantMotion => {
                frame = last;
                frame[0] = rho;
            }
        }
        frames.push(frame);
    }
    GaitSequence::new(
        format!("{}-{}", history.subject_id, kind.name()),
        history.fps,
        history.emotion,
        frames,
    )
}

// ── Metric ──────────────────────────────────────────────────────────

/// Mean per-joint Euclidean error of a prediction against ground truth,
/// evaluated cumulatively up to each millisecond mark. A mark maps to a
/// frame count via `round(ms·fps/1000)`; a mark past the horizon is an
/// error.
pub fn mse_metric(pred: &GaitSequence, truth: &GaitSequence, slices_ms: &[f64]) -> Result<Vec<f64>> {
    if pred.len() != truth.len() {
        return Err(Error::shape(format!(
            "prediction has {} frames, truth {}",
            pred.len(),
            truth.len()
        )));
    }
    if (pred.fps - truth.fps).abs() > 1e-9 {
        return Err(Error::config("prediction and truth fps differ"));
    }
    let mut out = Vec::with_capacity(slices_ms.len());
    for &ms in slices_ms {
        let frames = (ms * pred.fps / 1000.0).round() as usize;
        if frames == 0 || frames > pred.len() {
            return Err(Error::config(format!(
                "slice {ms} ms maps to {frames} frames, outside the {}-frame horizon",
                pred.len()
            )));
        }
        let mut total = 0.0;
        for t in 0..frames {
            for (a, b) in pred.frame(t).iter().zip(truth.frame(t)) {
                total +=
                    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
            }
        }
        out.push(total / (frames * JOINT_COUNT) as f64);
    }
    Ok(out)
}

/// Pooled metric over many (prediction, truth) pairs: every
/// (human, frame, joint) distance weighs equally.
pub fn mse_metric_pooled(
    pairs: &[(GaitSequence, GaitSequence)],
    slices_ms: &[f64],
) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Err(Error::config("metric needs at least one pair"));
    }
    let mut sums = vec![0.0; slices_ms.len()];
    let mut counts = vec![0usize; slices_ms.len()];
    for (pred, truth) in pairs {
        for (si, &ms) in slices_ms.iter().enumerate() {
            let frames = (ms * pred.fps / 1000.0).round() as usize;
            if frames == 0 || frames > pred.len() {
                return Err(Error::config(format!("slice {ms} ms outside horizon")));
            }
            for t in 0..frames {
                for (a, b) in pred.frame(t).iter().zip(truth.frame(t)) {
                    sums[si] += ((a[0] - b[0]).powi(2)
                        + (a[1] - b[1]).powi(2)
                        + (a[2] - b[2]).powi(2))
                    .sqrt();
                }
            }
            counts[si] += frames * JOINT_COUNT;
        }
    }
    Ok(sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect())
}
