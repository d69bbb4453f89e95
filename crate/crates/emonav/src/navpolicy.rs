//! Navigation policy network over a discretized velocity action grid.
//!
//! Three feature paths feed an action head:
//! `f_traj` encodes a square trajectory image (per-human gait histories
//! concatenated with their predicted futures, stacked by distance) through
//! four (5×5 conv, batch-norm, ReLU, 2×2 max-pool) blocks; `f_enc` encodes
//! three stacked LiDAR sweeps through two 1×1 convolutions and a
//! 256-unit affine; `f_act` concatenates both encodings with the previous
//! velocity and the goal in robot-local polar form, then maps through a
//! 128-unit hidden layer and a velocity representation to 54 logits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use crate::gaitlab::{gait_to_image, GaitSequence, JOINT_COUNT};
use crate::nncore::{
    load_records, save_records, softmax_vec, uniform_init, Padding, ParamStore, Tape, TapeParams,
    Tensor, TensorId,
};
use crate::simworld::{Pose, ScanFrame};
use crate::{Error, Result};

/// The discretized action grid: 6 translational × 9 rotational velocities,
/// spanning exactly the kinematic bounds v ∈ [0,1], w ∈ [−1,1].
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSpace {
    pub v_levels: Vec<f64>,
    pub w_levels: Vec<f64>,
}

impl Default for ActionSpace {
    fn default() -> Self {
        ActionSpace {
            v_levels: (0..6).map(|i| i as f64 * 0.2).collect(),
            w_levels: (0..9).map(|i| -1.0 + i as f64 * 0.25).collect(),
        }
    }
}

impl ActionSpace {
    pub fn len(&self) -> usize {
        self.v_levels.len() * self.w_levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(v, w)` of an action index (w-major within each v level).
    pub fn action(&self, index: usize) -> (f64, f64) {
        let nw = self.w_levels.len();
        (self.v_levels[index / nw], self.w_levels[index % nw])
    }

    pub fn validate(&self) -> Result<()> {
        if self.v_levels.is_empty() || self.w_levels.is_empty() {
            return Err(Error::config("action space must have at least one level per axis"));
        }
        for &v in &self.v_levels {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("action v={v} outside [0,1]")));
            }
        }
        for &w in &self.w_levels {
            if !(-1.0..=1.0).contains(&w) {
                return Err(Error::config(format!("action w={w} outside [-1,1]")));
            }
        }
        Ok(())
    }
}

/// The trajectory image fed to `f_traj`: either the canonical blank (no
/// humans visible) or a 3-channel square image.
#[derive(Clone, Debug, PartialEq)]
pub enum TrajImage {
    Blank,
    Image { side: usize, data: Vec<f64> },
}

impl TrajImage {
    fn tensor(&self, side: usize) -> Result<Tensor> {
        match self {
            TrajImage::Blank => Ok(Tensor::zeros(vec![3, side, side])),
            TrajImage::Image { side: s, data } => {
                if *s != side {
                    return Err(Error::shape(format!(
                        "trajectory image side {s} does not match model side {side}"
                    )));
                }
                Tensor::new(vec![3, side, side], data.clone())
            }
        }
    }
}

/// Renders per-human (history ∥ predicted) gait sequences into the square
/// policy input image: one gait image per human, stacked top-to-bottom in
/// the given order (callers sort by distance), bilinearly resized.
pub fn compose_traj_image(sequences: &[GaitSequence], side: usize) -> Result<TrajImage> {
    if sequences.is_empty() {
        return Ok(TrajImage::Blank);
    }
    let imgs: Vec<_> = sequences.iter().map(gait_to_image).collect::<Result<Vec<_>>>()?;
    let width = imgs.iter().map(|i| i.width).max().unwrap();
    let rows = JOINT_COUNT * imgs.len();
    // Stack: missing columns (shorter sequences) stay 0.
    let mut stacked = vec![0.0; 3 * rows * width];
    for (hi, img) in imgs.iter().enumerate() {
        for c in 0..3 {
            for j in 0..JOINT_COUNT {
                let dst_row = hi * JOINT_COUNT + j;
                for t in 0..img.width {
                    stacked[(c * rows + dst_row) * width + t] = img.get(c, j, t);
                }
            }
        }
    }
    let mut out = vec![0.0; 3 * side * side];
    for c in 0..3 {
        let src = &stacked[c * rows * width..(c + 1) * rows * width];
        bilinear_resize(src, rows, width, &mut out[c * side * side..(c + 1) * side * side], side, side);
    }
    Ok(TrajImage::Image { side, data: out })
}

fn bilinear_resize(src: &[f64], sh: usize, sw: usize, dst: &mut [f64], dh: usize, dw: usize) {
    for dy in 0..dh {
        let fy = if dh == 1 { 0.0 } else { dy as f64 * (sh - 1) as f64 / (dh - 1) as f64 };
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(sh - 1);
        let ay = fy - y0 as f64;
        for dx in 0..dw {
            let fx = if dw == 1 { 0.0 } else { dx as f64 * (sw - 1) as f64 / (dw - 1) as f64 };
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(sw - 1);
            let ax = fx - x0 as f64;
            let v = (1.0 - ay) * ((1.0 - ax) * src[y0 * sw + x0] + ax * src[y0 * sw + x1])
                + ay * ((1.0 - ax) * src[y1 * sw + x0] + ax * src[y1 * sw + x1]);
            dst[dy * dw + dx] = v;
        }
    }
}

/// Everything the policy sees at one step. Scans are ordered oldest →
/// newest; exactly three are required.
#[derive(Clone, Debug)]
pub struct PolicyInput {
    pub traj_image: TrajImage,
    pub scans: Vec<ScanFrame>,
    pub v_prev: (f64, f64),
    pub goal: (f64, f64),
    pub robot_pose: Pose,
}

impl PolicyInput {
    pub fn validate(&self) -> Result<()> {
        if self.scans.len() != 3 {
            return Err(Error::config(format!("policy input needs exactly 3 scans, got {}", self.scans.len())));
        }
        let n = self.scans[0].n_beams();
        if self.scans.iter().any(|s| s.n_beams() != n) {
            return Err(Error::shape("policy input scans disagree on beam count"));
        }
        Ok(())
    }

    /// Scalar features: previous velocity plus the goal in robot-local
    /// polar form (distance normalized by 10 m, bearing as sin/cos).
    fn scalar_features(&self) -> [f64; 5] {
        let dx = self.goal.0 - self.robot_pose.x;
        let dy = self.goal.1 - self.robot_pose.y;
        let dist = (dx * dx + dy * dy).sqrt();
        let bearing = dy.atan2(dx) - self.robot_pose.theta;
        [self.v_prev.0, self.v_prev.1, dist / 10.0, bearing.sin(), bearing.cos()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleMode {
    Stochastic,
    Greedy,
}

/// Samples an action index from logits: greedy takes the argmax (ties to
/// the lowest index); stochastic draws from the softmax distribution.
pub fn sample_action(logits: &[f64], mode: SampleMode, rng: &mut ChaCha8Rng) -> Result<usize> {
    if logits.is_empty() {
        return Err(Error::config("sample_action on empty logits"));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("action logits".to_string()));
    }
    match mode {
        SampleMode::Greedy => {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (i, &v) in logits.iter().enumerate() {
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            Ok(arg)
        }
        SampleMode::Stochastic => {
            let probs = softmax_vec(logits)?;
            let draw: f64 = rng.gen_range(0.0..1.0);
            let mut acc = 0.0;
            for (i, &p) in probs.iter().enumerate() {
                acc += p;
                if draw < acc {
                    return Ok(i);
                }
            }
            Ok(probs.len() - 1)
        }
    }
}

/// Policy network hyperparameters.
#[derive(Clone, Debug)]
pub struct PolicyConfig {
    /// Square trajectory-image side.
    pub image_side: usize,
    /// Channels per f_traj conv block.
    pub traj_channels: usize,
    /// Channels of the two 1×1 f_enc convolutions.
    pub lidar_channels: usize,
    /// LiDAR beams per scan (must match the scenario).
    pub n_beams: usize,
    /// f_act hidden width.
    pub hidden: usize,
    /// Velocity-representation width between hidden layer and action head.
    pub vrep: usize,
    pub seed: u64,
    pub actions: ActionSpace,
}

impl PolicyConfig {
    /// Full-size preset (244-pixel images, 180 beams).
    pub fn paper() -> Self {
        PolicyConfig {
            image_side: 244,
            traj_channels: 8,
            lidar_channels: 8,
            n_beams: 180,
            hidden: 128,
            vrep: 16,
            seed: 0,
            actions: ActionSpace::default(),
        }
    }

    /// CPU-trainable preset.
    pub fn desk() -> Self {
        PolicyConfig { image_side: 64, ..Self::paper() }
    }

    /// Minimal preset for RL experiments and gradient checks.
    pub fn tiny() -> Self {
        PolicyConfig { image_side: 16, n_beams: 36, ..Self::paper() }
    }

    pub fn validate(&self) -> Result<()> {
        self.actions.validate()?;
        if self.image_side < 16 {
            return Err(Error::config("image_side must be at least 16 (four pooling stages)"));
        }
        if self.n_beams == 0 || self.hidden == 0 || self.vrep == 0 {
            return Err(Error::config("policy dims must be positive"));
        }
        Ok(())
    }

    /// Flattened f_traj output length for this image side.
    pub fn z_img_len(&self) -> usize {
        let mut side = self.image_side;
        for _ in 0..4 {
            side /= 2;
        }
        self.traj_channels * side * side
    }
}

/// The policy network parameters plus configuration.
#[derive(Clone, Debug)]
pub struct PolicyModel {
    pub cfg: PolicyConfig,
    pub params: ParamStore,
    /// Bumped on every optimizer step; lets rollout caches detect staleness.
    pub version: u64,
    /// Highest curriculum stage this policy has completed (0 = untrained).
    pub trained_stage: usize,
}

impl PolicyModel {
    pub fn new(cfg: PolicyConfig) -> Result<PolicyModel> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut p = ParamStore::new();
        let c = cfg.traj_channels;
        let mut in_ch = 3;
        for b in 0..4 {
            p.add(format!("traj{b}/k"), uniform_init(&mut rng, vec![c, in_ch, 5, 5], in_ch * 25))?;
            p.add(format!("traj{b}/g"), Tensor::new(vec![c], vec![1.0; c])?)?;
            p.add(format!("traj{b}/b"), Tensor::zeros(vec![c]))?;
            in_ch = c;
        }
        let lc = cfg.lidar_channels;
        p.add("lidar0/k", uniform_init(&mut rng, vec![lc, 3, 1, 1], 3))?;
        p.add("lidar0/b", Tensor::zeros(vec![lc]))?;
        p.add("lidar1/k", uniform_init(&mut rng, vec![lc, lc, 1, 1], lc))?;
        p.add("lidar1/b", Tensor::zeros(vec![lc]))?;
        p.add("lidar_fc/w", uniform_init(&mut rng, vec![lc * cfg.n_beams, 256], lc * cfg.n_beams))?;
        p.add("lidar_fc/b", Tensor::zeros(vec![256]))?;
        let concat_len = cfg.z_img_len() + 256 + 5;
        p.add("act_hidden/w", uniform_init(&mut rng, vec![concat_len, cfg.hidden], concat_len))?;
        p.add("act_hidden/b", Tensor::zeros(vec![cfg.hidden]))?;
        p.add("vrep/w", uniform_init(&mut rng, vec![cfg.hidden, cfg.vrep], cfg.hidden))?;
        p.add("vrep/b", Tensor::zeros(vec![cfg.vrep]))?;
        p.add("head/w", uniform_init(&mut rng, vec![cfg.vrep, cfg.actions.len()], cfg.vrep))?;
        p.add("head/b", Tensor::zeros(vec![cfg.actions.len()]))?;
        Ok(PolicyModel { cfg, params: p, version: 0, trained_stage: 0 })
    }

    /// Trajectory-image encoder: four (conv, batch-norm, ReLU, pool)
    /// blocks, flattened to a `[1, z_img_len]` row.
    pub fn f_traj(&self, tape: &mut Tape, tp: &TapeParams, image: &TrajImage) -> Result<TensorId> {
        let img = image.tensor(self.cfg.image_side)?;
        let mut x = tape.leaf(&img)?;
        for b in 0..4 {
            let conv = tape.grouped_conv2d(x, tp.id(&format!("traj{b}/k")), 1, 1, Padding::Same)?;
            let norm = tape.batch_norm2d(conv, tp.id(&format!("traj{b}/g")), tp.id(&format!("traj{b}/b")), 1e-5)?;
            let act = tape.relu(norm)?;
            x = tape.max_pool2(act)?;
        }
        tape.reshape(x, vec![1, self.cfg.z_img_len()])
    }

    /// LiDAR encoder: three stacked scans through two 1×1 convolutions and
    /// an affine to a 256-vector.
    pub fn f_enc(&self, tape: &mut Tape, tp: &TapeParams, scans: &[ScanFrame]) -> Result<TensorId> {
        if scans.len() != 3 {
            return Err(Error::config("f_enc expects exactly 3 scans"));
        }
        let nb = self.cfg.n_beams;
        for s in scans {
            if s.n_beams() != nb {
                return Err(Error::shape(format!(
                    "scan has {} beams, model expects {nb}",
                    s.n_beams()
                )));
            }
        }
        let mut data = Vec::with_capacity(3 * nb);
        for s in scans {
            data.extend(s.ranges.iter().map(|r| r / s.max_range));
        }
        let x = tape.constant(vec![3, 1, nb], data)?;
        let c0 = tape.grouped_conv2d(x, tp.id("lidar0/k"), 1, 1, Padding::Valid)?;
        let c0 = tape.channel_bias(c0, tp.id("lidar0/b"))?;
        let c0 = tape.relu(c0)?;
        let c1 = tape.grouped_conv2d(c0, tp.id("lidar1/k"), 1, 1, Padding::Valid)?;
        let c1 = tape.channel_bias(c1, tp.id("lidar1/b"))?;
        let c1 = tape.relu(c1)?;
        let flat = tape.reshape(c1, vec![1, self.cfg.lidar_channels * nb])?;
        let fc = tape.affine(flat, tp.id("lidar_fc/w"), tp.id("lidar_fc/b"))?;
        tape.relu(fc)
    }

    /// Action head: concatenation → 128-unit hidden + ReLU → velocity
    /// representation → affine head → one logit per action.
    pub fn f_act(
        &self,
        tape: &mut Tape,
        tp: &TapeParams,
        z_img: TensorId,
        z_lidar: TensorId,
        scalars: &[f64; 5],
    ) -> Result<TensorId> {
        let sc = tape.constant(vec![1, 5], scalars.to_vec())?;
        let cat = tape.concat(&[z_img, z_lidar, sc], 1)?;
        let h = tape.affine(cat, tp.id("act_hidden/w"), tp.id("act_hidden/b"))?;
        let h = tape.relu(h)?;
        let vrep = tape.affine(h, tp.id("vrep/w"), tp.id("vrep/b"))?;
        tape.affine(vrep, tp.id("head/w"), tp.id("head/b"))
    }

    /// Full forward pass to action logits. When `cached_blank_z` is given
    /// and the image is blank, the trajectory encoder is skipped and the
    /// cached features are injected as a constant (rollout fast path; the
    /// training path always builds the full graph).
    pub fn logits(
        &self,
        tape: &mut Tape,
        tp: &TapeParams,
        input: &PolicyInput,
        cached_blank_z: Option<&[f64]>,
    ) -> Result<TensorId> {
        input.validate()?;
        let z_img = match (&input.traj_image, cached_blank_z) {
            (TrajImage::Blank, Some(z)) => tape.constant(vec![1, self.cfg.z_img_len()], z.to_vec())?,
            (img, _) => self.f_traj(tape, tp, img)?,
        };
        let z_lidar = self.f_enc(tape, tp, &input.scans)?;
        self.f_act(tape, tp, z_img, z_lidar, &input.scalar_features())
    }

    /// Forward pass on a fresh tape returning the raw logits.
    pub fn eval_logits(&self, input: &PolicyInput) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let tp = self.params.inject(&mut tape)?;
        let id = self.logits(&mut tape, &tp, input, None)?;
        Ok(tape.value(id).to_vec())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let c = &self.cfg;
        let mut records: Vec<(String, Tensor)> = vec![
            ("__cfg/kind".to_string(), Tensor::scalar(3.0)),
            (
                "__cfg/policy".to_string(),
                Tensor::new(
                    vec![8],
                    vec![
                        c.image_side as f64,
                        c.traj_channels as f64,
                        c.lidar_channels as f64,
                        c.n_beams as f64,
                        c.hidden as f64,
                        c.vrep as f64,
                        c.seed as f64,
                        self.trained_stage as f64,
                    ],
                )?,
            ),
            ("__cfg/action_v".to_string(), Tensor::new(vec![c.actions.v_levels.len()], c.actions.v_levels.clone())?),
            ("__cfg/action_w".to_string(), Tensor::new(vec![c.actions.w_levels.len()], c.actions.w_levels.clone())?),
        ];
        for (name, t) in self.params.iter() {
            records.push((name.to_string(), t.clone()));
        }
        save_records(path, &records)
    }

    pub fn load(path: &Path) -> Result<PolicyModel> {
        let records = load_records(path)?;
        let get = |name: &str| -> Result<&Tensor> {
            records
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t)
                .ok_or_else(|| Error::schema(None, format!("checkpoint missing {name}")))
        };
        if get("__cfg/kind")?.data() != [3.0] {
            return Err(Error::schema(None, "checkpoint is not a policy model"));
        }
        let d = get("__cfg/policy")?.data().to_vec();
        let actions = ActionSpace {
            v_levels: get("__cfg/action_v")?.data().to_vec(),
            w_levels: get("__cfg/action_w")?.data().to_vec(),
        };
        let cfg = PolicyConfig {
            image_side: d[0] as usize,
            traj_channels: d[1] as usize,
            lidar_channels: d[2] as usize,
            n_beams: d[3] as usize,
            hidden: d[4] as usize,
            vrep: d[5] as usize,
            seed: d[6] as u64,
            actions,
        };
        cfg.validate()?;
        let mut params = ParamStore::new();
        for (name, t) in records {
            if !name.starts_with("__cfg/") {
                params.add(name, t)?;
            }
        }
        Ok(PolicyModel { cfg, params, version: 0, trained_stage: d.get(7).copied().unwrap_or(0.0) as usize })
    }
}

/// Rollout-time evaluator that caches the blank-image features for the
/// current parameter version.
pub struct PolicyRunner<'a> {
    pub model: &'a PolicyModel,
    blank_z: Option<Vec<f64>>,
}

impl<'a> PolicyRunner<'a> {
    pub fn new(model: &'a PolicyModel) -> PolicyRunner<'a> {
        PolicyRunner { model, blank_z: None }
    }

    /// Logits for an input, computing and caching the blank-image features
    /// on first use (parameters are fixed for the runner's lifetime).
    pub fn logits(&mut self, input: &PolicyInput) -> Result<Vec<f64>> {
        if matches!(input.traj_image, TrajImage::Blank) && self.blank_z.is_none() {
            let mut tape = Tape::new();
            let tp = self.model.params.inject(&mut tape)?;
            let z = self.model.f_traj(&mut tape, &tp, &TrajImage::Blank)?;
            self.blank_z = Some(tape.value(z).to_vec());
        }
        let mut tape = Tape::new();
        let tp = self.model.params.inject(&mut tape)?;
        let id = self.model.logits(&mut tape, &tp, input, self.blank_z.as_deref())?;
        Ok(tape.value(id).to_vec())
    }

    pub fn act(&mut self, input: &PolicyInput, mode: SampleMode, rng: &mut ChaCha8Rng) -> Result<usize> {
        let logits = self.logits(input)?;
        sample_action(&logits, mode, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaitlab::{synth_gait, Emotion};
    use approx::assert_abs_diff_eq;

    fn dummy_scan(n: usize, range: f64) -> ScanFrame {
        ScanFrame {
            ranges: vec![range; n],
            start_angle: 0.0,
            angular_increment: std::f64::consts::TAU / n as f64,
            max_range: 6.0,
        }
    }

    fn tiny_input(model: &PolicyModel) -> PolicyInput {
        PolicyInput {
            traj_image: TrajImage::Blank,
            scans: vec![dummy_scan(model.cfg.n_beams, 6.0); 3],
            v_prev: (0.0, 0.0),
            goal: (5.0, 5.0),
            robot_pose: Pose::new(1.0, 1.0, 0.0),
        }
    }

    #[test]
    fn action_space_is_54_within_bounds() {
        let a = ActionSpace::default();
        assert_eq!(a.len(), 54);
        for i in 0..54 {
            let (v, w) = a.action(i);
            assert!((0.0..=1.0).contains(&v));
            assert!((-1.0..=1.0).contains(&w));
        }
        assert_eq!(a.action(0), (0.0, -1.0));
        assert_eq!(a.action(53), (1.0, 1.0));
    }

    #[test]
    fn desk_z_img_len_is_128() {
        assert_eq!(PolicyConfig::desk().z_img_len(), 128);
        assert_eq!(PolicyConfig::tiny().z_img_len(), 8);
    }

    #[test]
    fn logits_length_is_action_count() {
        let model = PolicyModel::new(PolicyConfig::tiny()).unwrap();
        let logits = model.eval_logits(&tiny_input(&model)).unwrap();
        assert_eq!(logits.len(), 54);
    }

    #[test]
    fn lidar_encoding_is_256_regardless_of_beam_count() {
        for beams in [12, 36, 180] {
            let cfg = PolicyConfig { n_beams: beams, ..PolicyConfig::tiny() };
            let model = PolicyModel::new(cfg).unwrap();
            let mut tape = Tape::new();
            let tp = model.params.inject(&mut tape).unwrap();
            let z = model.f_enc(&mut tape, &tp, &vec![dummy_scan(beams, 3.0); 3]).unwrap();
            assert_eq!(tape.shape(z), &[1, 256]);
        }
    }

    #[test]
    fn f_enc_rejects_beam_mismatch() {
        let model = PolicyModel::new(PolicyConfig::tiny()).unwrap();
        let mut tape = Tape::new();
        let tp = model.params.inject(&mut tape).unwrap();
        let bad = vec![dummy_scan(36, 3.0), dummy_scan(12, 3.0), dummy_scan(36, 3.0)];
        assert!(model.f_enc(&mut tape, &tp, &bad).is_err());
    }

    #[test]
    fn zero_image_with_zero_shift_gives_zero_features() {
        let model = PolicyModel::new(PolicyConfig::tiny()).unwrap();
        // Shifts are zero-initialized by construction.
        let mut tape = Tape::new();
        let tp = model.params.inject(&mut tape).unwrap();
        let z = model.f_traj(&mut tape, &tp, &TrajImage::Blank).unwrap();
        for &v in tape.value(z) {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zeroed_head_gives_uniform_distribution() {
        let mut model = PolicyModel::new(PolicyConfig::tiny()).unwrap();
        for name in ["head/w", "head/b"] {
            for v in model.params.get_mut(name).unwrap().data_mut() {
                *v = 0.0;
            }
        }
        let logits = model.eval_logits(&tiny_input(&model)).unwrap();
        let probs = softmax_vec(&logits).unwrap();
        for p in probs {
            assert_abs_diff_eq!(p, 1.0 / 54.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let model = PolicyModel::new(PolicyConfig::tiny()).unwrap();
        let input = tiny_input(&model);
        assert_eq!(model.eval_logits(&input).unwrap(), model.eval_logits(&input).unwrap());
    }

    #[test]
    fn greedy_picks_unique_max_and_lowest_tie() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut logits = vec![0.0; 54];
        logits[7] = 3.0;
        assert_eq!(sample_action(&logits, SampleMode::Greedy, &mut rng).unwrap(), 7);
        let ties = vec![1.0; 54];
        assert_eq!(sample_action(&ties, SampleMode::Greedy, &mut rng).unwrap(), 0);
    }

    #[test]
    fn greedy_invariant_under_positive_affine_rescale() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let logits: Vec<f64> = (0..54).map(|i| ((i * 37) % 11) as f64 * 0.3 - 1.0).collect();
        let a = sample_action(&logits, SampleMode::Greedy, &mut rng).unwrap();
        let rescaled: Vec<f64> = logits.iter().map(|v| 2.5 * v + 7.0).collect();
        let b = sample_action(&rescaled, SampleMode::Greedy, &mut rng).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stochastic_uniform_frequencies_within_binomial_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let logits = vec![0.0; 54];
        let n = 10_000;
        let mut counts = vec![0usize; 54];
        for _ in 0..n {
            counts[sample_action(&logits, SampleMode::Stochastic, &mut rng).unwrap()] += 1;
        }
        let p = 1.0 / 54.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            let dev = (c as f64 - n as f64 * p).abs();
            assert!(dev < 4.0 * sigma, "action {i}: count {c} deviates {dev:.1} (> 4σ = {:.1})", 4.0 * sigma);
        }
    }

    #[test]
    fn stochastic_is_seed_reproducible() {
        let logits: Vec<f64> = (0..54).map(|i| (i as f64) * 0.01).collect();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| sample_action(&logits, SampleMode::Stochastic, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }

    #[test]
    fn sample_action_rejects_non_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_action(&[0.0, f64::NAN], SampleMode::Greedy, &mut rng).is_err());
    }

    #[test]
    fn traj_image_composition_shapes() {
        let a = synth_gait(Emotion::Happy, 1, 33, 25.0).unwrap();
        let b = synth_gait(Emotion::Sad, 2, 33, 25.0).unwrap();
        match compose_traj_image(&[a, b], 16).unwrap() {
            TrajImage::Image { side, data } => {
                assert_eq!(side, 16);
                assert_eq!(data.len(), 3 * 16 * 16);
                assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
            }
            TrajImage::Blank => panic!("expected an image"),
        }
        assert_eq!(compose_traj_image(&[], 16).unwrap(), TrajImage::Blank);
    }

    #[test]
    fn runner_blank_cache_matches_full_forward() {
        let model = PolicyModel::new(PolicyConfig::tiny()).unwrap();
        let input = tiny_input(&model);
        let mut runner = PolicyRunner::new(&model);
        let fast = runner.logits(&input).unwrap();
        let slow = model.eval_logits(&input).unwrap();
        for (a, b) in fast.iter().zip(&slow) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn checkpoint_roundtrip_preserves_action_space_and_logits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.ewn");
        let model = PolicyModel::new(PolicyConfig { seed: 9, ..PolicyConfig::tiny() }).unwrap();
        model.save(&path).unwrap();
        let loaded = PolicyModel::load(&path).unwrap();
        assert_eq!(model.cfg.actions, loaded.cfg.actions);
        let input = tiny_input(&model);
        assert_eq!(model.eval_logits(&input).unwrap(), loaded.eval_logits(&input).unwrap());
    }
}
