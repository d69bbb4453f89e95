//! Gait data model: 16-joint skeleton sequences, file I/O, a synthetic
//! emotion-labeled walker, resampling, and gait-to-image embeddings.
//!
//! Coordinates are meters in the world frame; the root joint (index 0)
//! carries the world position, so a root-relative pose is obtained by
//! subtracting it (see [`GaitSequence::local_pose`]).

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nncore::Tensor;
use crate::{Error, Result};

pub const JOINT_COUNT: usize = 16;

pub type Joint = [f64; 3];
pub type Frame = [Joint; JOINT_COUNT];

/// Canonical joint order of the 16-joint skeleton.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(usize)]
pub enum JointId {
    Root = 0,
    Spine = 1,
    Neck = 2,
    Head = 3,
    LShoulder = 4,
    LElbow = 5,
    LHand = 6,
    RShoulder = 7,
    RElbow = 8,
    RHand = 9,
    LHip = 10,
    LKnee = 11,
    LFoot = 12,
    RHip = 13,
    RKnee = 14,
    RFoot = 15,
}

/// Fixed joint naming and bone adjacency of the skeleton.
pub struct SkeletonTopology;

impl SkeletonTopology {
    pub const NAMES: [&'static str; JOINT_COUNT] = [
        "root", "spine", "neck", "head", "l_shoulder", "l_elbow", "l_hand", "r_shoulder",
        "r_elbow", "r_hand", "l_hip", "l_knee", "l_foot", "r_hip", "r_knee", "r_foot",
    ];

    /// Parent→child bone list; 15 edges forming a tree rooted at `root`.
    pub const BONES: [(usize, usize); 15] = [
        (0, 1),
        (1, 2),
        (2, 3),
        (2, 4),
        (4, 5),
        (5, 6),
        (2, 7),
        (7, 8),
        (8, 9),
        (0, 10),
        (10, 11),
        (11, 12),
        (0, 13),
        (13, 14),
        (14, 15),
    ];
}

/// The four gait emotion labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Happy,
    Sad,
    Angry,
    Neutral,
}

impl Emotion {
    pub const ALL: [Emotion; 4] = [Emotion::Happy, Emotion::Sad, Emotion::Angry, Emotion::Neutral];

    pub fn index(self) -> usize {
        match self {
            Emotion::Happy => 0,
            Emotion::Sad => 1,
            Emotion::Angry => 2,
            Emotion::Neutral => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Emotion> {
        Emotion::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Happy => "happy",
            Emotion::Sad => "sad",
            Emotion::Angry => "angry",
            Emotion::Neutral => "neutral",
        }
    }

    pub fn parse(s: &str) -> Result<Emotion> {
        match s {
            "happy" => Ok(Emotion::Happy),
            "sad" => Ok(Emotion::Sad),
            "angry" => Ok(Emotion::Angry),
            "neutral" => Ok(Emotion::Neutral),
            other => Err(Error::config(format!("unknown emotion label '{other}'"))),
        }
    }

    /// Negative emotions trigger the navigation penalty.
    pub fn is_negative(self) -> bool {
        matches!(self, Emotion::Sad | Emotion::Angry)
    }
}

/// A time series of 16-joint skeleton frames at a fixed frame rate.
#[derive(Clone, Debug, PartialEq)]
pub struct GaitSequence {
    pub subject_id: String,
    pub fps: f64,
    pub emotion: Option<Emotion>,
    frames: Vec<Frame>,
}

impl GaitSequence {
    pub fn new(
        subject_id: impl Into<String>,
        fps: f64,
        emotion: Option<Emotion>,
        frames: Vec<Frame>,
    ) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::config(format!("fps must be positive, got {fps}")));
        }
        for (t, frame) in frames.iter().enumerate() {
            for (j, joint) in frame.iter().enumerate() {
                if joint.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("gait frame {t}, joint {j}")));
                }
            }
        }
        Ok(GaitSequence { subject_id: subject_id.into(), fps, emotion, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &Frame {
        &self.frames[t]
    }

    pub fn root(&self, t: usize) -> Joint {
        self.frames[t][JointId::Root as usize]
    }

    /// Frame `t` with the root position subtracted from every joint.
    pub fn local_pose(&self, t: usize) -> Frame {
        let r = self.root(t);
        let mut out = self.frames[t];
        for j in out.iter_mut() {
            j[0] -= r[0];
            j[1] -= r[1];
            j[2] -= r[2];
        }
        out
    }

    /// Sub-sequence `[from, to)` sharing fps and labels.
    pub fn slice(&self, from: usize, to: usize) -> GaitSequence {
        GaitSequence {
            subject_id: self.subject_id.clone(),
            fps: self.fps,
            emotion: self.emotion,
            frames: self.frames[from..to].to_vec(),
        }
    }

    /// Appends the frames of `other` (fps and labels of `self` are kept).
    pub fn extended(&self, other: &GaitSequence) -> GaitSequence {
        let mut frames = self.frames.clone();
        frames.extend_from_slice(&other.frames);
        GaitSequence { subject_id: self.subject_id.clone(), fps: self.fps, emotion: self.emotion, frames }
    }

    pub fn translated(&self, d: [f64; 3]) -> GaitSequence {
        let frames = self
            .frames
            .iter()
            .map(|f| {
                let mut nf = *f;
                for j in nf.iter_mut() {
                    j[0] += d[0];
                    j[1] += d[1];
                    j[2] += d[2];
                }
                nf
            })
            .collect();
        GaitSequence { frames, ..self.clone() }
    }

    /// Mean root speed in m/s from consecutive frame displacements.
    pub fn mean_root_speed(&self) -> f64 {
        if self.frames.len() < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for w in self.frames.windows(2) {
            let a = w[0][0];
            let b = w[1][0];
            total += ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        }
        total / (self.frames.len() - 1) as f64 * self.fps
    }

    /// Mean forward lean of the root→neck segment, radians from vertical.
    pub fn mean_torso_pitch(&self) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        let mut total = 0.0;
        for f in &self.frames {
            let r = f[JointId::Root as usize];
            let n = f[JointId::Neck as usize];
            let horiz = ((n[0] - r[0]).powi(2) + (n[1] - r[1]).powi(2)).sqrt();
            let vert = n[2] - r[2];
            total += horiz.atan2(vert);
        }
        total / self.frames.len() as f64
    }

    /// Net walking direction of the root track, radians in `[0, 2π)`.
    pub fn mean_heading(&self) -> f64 {
        if self.frames.len() < 2 {
            return 0.0;
        }
        let a = self.root(0);
        let b = self.root(self.frames.len() - 1);
        let theta = (b[1] - a[1]).atan2(b[0] - a[0]);
        theta.rem_euclid(std::f64::consts::TAU)
    }
}

// ── File format ─────────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
struct GaitRecord {
    id: String,
    fps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    emotion: Option<Emotion>,
    frames: Vec<Vec<[f64; 3]>>,
}

/// Loads newline-delimited gait records, validating each against the
/// 16-joint schema. A malformed record fails the load and names its
/// zero-based record index.
pub fn load_gaits(path: &Path) -> Result<Vec<GaitSequence>> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: GaitRecord = serde_json::from_str(&line)
            .map_err(|e| Error::schema(Some(idx), format!("unparseable gait record: {e}")))?;
        let mut frames = Vec::with_capacity(rec.frames.len());
        for (t, raw) in rec.frames.iter().enumerate() {
            if raw.len() != JOINT_COUNT {
                return Err(Error::schema(
                    Some(idx),
                    format!("frame {t} has {} joints, expected {JOINT_COUNT}", raw.len()),
                ));
            }
            let mut frame = [[0.0; 3]; JOINT_COUNT];
            frame.copy_from_slice(raw);
            frames.push(frame);
        }
        let seq = GaitSequence::new(rec.id, rec.fps, rec.emotion, frames)
            .map_err(|e| Error::schema(Some(idx), e.to_string()))?;
        out.push(seq);
    }
    Ok(out)
}

/// Writes sequences in the newline-delimited record format (atomically).
pub fn save_gaits(path: &Path, seqs: &[GaitSequence]) -> Result<()> {
    let mut buf = Vec::new();
    for seq in seqs {
        let rec = GaitRecord {
            id: seq.subject_id.clone(),
            fps: seq.fps,
            emotion: seq.emotion,
            frames: seq.frames.iter().map(|f| f.to_vec()).collect(),
        };
        serde_json::to_writer(&mut buf, &rec)?;
        buf.push(b'\n');
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&buf)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

// ── Synthetic walker ────────────────────────────────────────────────

/// Body/gait parameters of the parametric sinusoidal walker.
#[derive(Clone, Copy, Debug)]
pub struct WalkerShape {
    /// Walking speed before phase wobble, m/s.
    pub speed: f64,
    /// Stride frequency, Hz.
    pub cadence: f64,
    /// Forward torso lean, radians.
    pub torso_pitch: f64,
    /// Arm swing amplitude, radians.
    pub arm_amp: f64,
    /// Leg swing amplitude, radians.
    pub leg_amp: f64,
    /// Vertical root bounce amplitude, meters.
    pub bob: f64,
}

impl WalkerShape {
    /// Emotion presets: speed and posture carry the affective signal —
    /// happy walks fast and upright, sad slow and slumped, angry fast with
    /// large swings, neutral in between.
    pub fn preset(emotion: Emotion) -> WalkerShape {
        match emotion {
            Emotion::Happy => WalkerShape {
                speed: 1.4,
                cadence: 1.8,
                torso_pitch: 0.00,
                arm_amp: 0.55,
                leg_amp: 0.50,
                bob: 0.06,
            },
            Emotion::Sad => WalkerShape {
                speed: 0.6,
                cadence: 1.1,
                torso_pitch: 0.35,
                arm_amp: 0.15,
                leg_amp: 0.30,
                bob: 0.012,
            },
            Emotion::Angry => WalkerShape {
                speed: 1.5,
                cadence: 2.3,
                torso_pitch: 0.20,
                arm_amp: 1.0,
                leg_amp: 0.70,
                bob: 0.03,
            },
            Emotion::Neutral => WalkerShape {
                speed: 1.0,
                cadence: 1.4,
                torso_pitch: 0.05,
                arm_amp: 0.30,
                leg_amp: 0.45,
                bob: 0.02,
            },
        }
    }

    /// Preset with per-subject jitter. The jitter ranges keep the classes
    /// threshold-separable: speed bands stay disjoint and the pitch gap
    /// between happy and angry survives.
    pub fn jittered(emotion: Emotion, rng: &mut ChaCha8Rng) -> WalkerShape {
        let base = WalkerShape::preset(emotion);
        WalkerShape {
            speed: base.speed * (1.0 + rng.gen_range(-0.08..0.08)),
            cadence: base.cadence * (1.0 + rng.gen_range(-0.08..0.08)),
            torso_pitch: (base.torso_pitch + rng.gen_range(-0.03..0.03)).max(0.0),
            arm_amp: base.arm_amp * (1.0 + rng.gen_range(-0.1..0.1)),
            leg_amp: base.leg_amp * (1.0 + rng.gen_range(-0.1..0.1)),
            bob: base.bob * (1.0 + rng.gen_range(-0.1..0.1)),
        }
    }

    /// One skeleton frame at gait phase `phase`, world heading `heading`,
    /// with the root above `root_xy`.
    pub fn frame_at(&self, phase: f64, heading: f64, root_xy: (f64, f64)) -> Frame {
        let (fx, fy) = (heading.cos(), heading.sin());
        let (lx, ly) = (-fy, fx); // left-hand direction in the ground plane
        let root_z = 0.92 + self.bob * (2.0 * phase).sin();
        let place = |fwd: f64, left: f64, up: f64| -> Joint {
            [root_xy.0 + fwd * fx + left * lx, root_xy.1 + fwd * fy + left * ly, up]
        };

        let pitch = self.torso_pitch;
        let torso = |len: f64| (len * pitch.sin(), root_z + len * pitch.cos());

        let mut f = [[0.0; 3]; JOINT_COUNT];
        f[JointId::Root as usize] = place(0.0, 0.0, root_z);
        let (sf, sz) = torso(0.25);
        f[JointId::Spine as usize] = place(sf, 0.0, sz);
        let (nf, nz) = torso(0.50);
        f[JointId::Neck as usize] = place(nf, 0.0, nz);
        let (hf, hz) = torso(0.64);
        f[JointId::Head as usize] = place(hf, 0.0, hz);

        // Arms swing against the same-side leg.
        let arm = |side: f64, swing: f64| {
            let shoulder = place(nf, side * 0.19, nz - 0.02);
            let (upper, fore) = (0.28, 0.26);
            let elbow = [
                shoulder[0] + upper * swing.sin() * fx,
                shoulder[1] + upper * swing.sin() * fy,
                shoulder[2] - upper * swing.cos(),
            ];
            let hand = [
                elbow[0] + fore * swing.sin() * fx,
                elbow[1] + fore * swing.sin() * fy,
                elbow[2] - fore * swing.cos(),
            ];
            (shoulder, elbow, hand)
        };
        let (ls, le, lh) = arm(1.0, self.arm_amp * phase.sin());
        let (rs, re, rh) = arm(-1.0, self.arm_amp * (phase + std::f64::consts::PI).sin());
        f[JointId::LShoulder as usize] = ls;
        f[JointId::LElbow as usize] = le;
        f[JointId::LHand as usize] = lh;
        f[JointId::RShoulder as usize] = rs;
        f[JointId::RElbow as usize] = re;
        f[JointId::RHand as usize] = rh;

        let leg = |side: f64, swing: f64| {
            let hip = place(0.0, side * 0.11, root_z - 0.05);
            let (thigh, shin) = (0.42, 0.43);
            let knee = [
                hip[0] + thigh * swing.sin() * fx,
                hip[1] + thigh * swing.sin() * fy,
                hip[2] - thigh * swing.cos(),
            ];
            let lift = 0.05 * swing.cos().max(0.0) * swing.sin().abs();
            let foot = [
                knee[0] + shin * (swing * 0.6).sin() * fx,
                knee[1] + shin * (swing * 0.6).sin() * fy,
                (knee[2] - shin * (swing * 0.6).cos() + lift).max(0.02),
            ];
            (hip, knee, foot)
        };
        let (lhip, lknee, lfoot) = leg(1.0, self.leg_amp * phase.sin());
        let (rhip, rknee, rfoot) = leg(-1.0, self.leg_amp * (phase + std::f64::consts::PI).sin());
        f[JointId::LHip as usize] = lhip;
        f[JointId::LKnee as usize] = lknee;
        f[JointId::LFoot as usize] = lfoot;
        f[JointId::RHip as usize] = rhip;
        f[JointId::RKnee as usize] = rknee;
        f[JointId::RFoot as usize] = rfoot;
        f
    }
}

/// Generates a synthetic emotion-labeled gait sequence, deterministic in
/// `(emotion, seed, n_frames, fps)`.
pub fn synth_gait(emotion: Emotion, seed: u64, n_frames: usize, fps: f64) -> Result<GaitSequence> {
    if n_frames < 2 {
        return Err(Error::config(format!("synth_gait needs n_frames >= 2, got {n_frames}")));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::config("synth_gait fps must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((emotion.index() as u64 + 1) << 56));
    let shape = WalkerShape::jittered(emotion, &mut rng);
    let heading0: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let phase0: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let start = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let curvature: f64 = rng.gen_range(-0.04..0.04);

    let dt = 1.0 / fps;
    let omega = std::f64::consts::TAU * shape.cadence;
    let mut frames = Vec::with_capacity(n_frames);
    let mut pos = start;
    let mut arc = 0.0;
    for t in 0..n_frames {
        let phase = phase0 + omega * t as f64 * dt;
        let heading = heading0 + curvature * arc;
        frames.push(shape.frame_at(phase, heading, pos));
        // Walking speed oscillates with the stride.
        let v = shape.speed * (1.0 + 0.12 * phase.sin());
        pos.0 += v * heading.cos() * dt;
        pos.1 += v * heading.sin() * dt;
        arc += v * dt;
    }
    GaitSequence::new(format!("synth-{}-{seed}", emotion.name()), fps, Some(emotion), frames)
}

// ── Resampling ──────────────────────────────────────────────────────

/// Linearly resamples every joint channel onto `n_frames` uniform
/// timestamps over the original time span; endpoints are preserved exactly.
pub fn resample(seq: &GaitSequence, n_frames: usize) -> Result<GaitSequence> {
    if seq.len() < 2 {
        return Err(Error::config("resample needs a sequence with >= 2 frames"));
    }
    if n_frames < 2 {
        return Err(Error::config(format!("resample target must be >= 2 frames, got {n_frames}")));
    }
    let src = seq.frames();
    let t_max = (src.len() - 1) as f64;
    let duration = t_max / seq.fps;
    let mut frames = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let pos = i as f64 * t_max / (n_frames - 1) as f64;
        let i0 = pos.floor() as usize;
        let frac = pos - i0 as f64;
        if frac == 0.0 {
            frames.push(src[i0]);
            continue;
        }
        let (a, b) = (&src[i0], &src[i0 + 1]);
        let mut f = [[0.0; 3]; JOINT_COUNT];
        for j in 0..JOINT_COUNT {
            for c in 0..3 {
                f[j][c] = (1.0 - frac) * a[j][c] + frac * b[j][c];
            }
        }
        frames.push(f);
    }
    GaitSequence::new(seq.subject_id.clone(), (n_frames - 1) as f64 / duration, seq.emotion, frames)
}

// ── Image embedding ─────────────────────────────────────────────────

/// A gait sequence rendered as a 3-channel image: rows = joints, columns =
/// timesteps, channels = (x, y, z), min-max normalized per channel.
#[derive(Clone, Debug)]
pub struct GaitImage {
    pub width: usize,
    /// Channel-major data: `[3][16][width]`.
    data: Vec<f64>,
}

impl GaitImage {
    pub const HEIGHT: usize = JOINT_COUNT;

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, channel: usize, joint: usize, t: usize) -> f64 {
        self.data[(channel * JOINT_COUNT + joint) * self.width + t]
    }

    /// Image as a `[3, 16, width]` tensor.
    pub fn tensor(&self) -> Tensor {
        Tensor::new(vec![3, JOINT_COUNT, self.width], self.data.clone()).expect("normalized data is finite")
    }

    /// Image replicated `groups` times along the channel axis:
    /// `[3·groups, 16, width]`. Grouped classifiers give each group its own
    /// copy of the input.
    pub fn tiled_tensor(&self, groups: usize) -> Tensor {
        let mut data = Vec::with_capacity(self.data.len() * groups);
        for _ in 0..groups {
            data.extend_from_slice(&self.data);
        }
        Tensor::new(vec![3 * groups, JOINT_COUNT, self.width], data).expect("finite")
    }
}

/// Renders a sequence into a [`GaitImage`]. Each coordinate channel is
/// min-max normalized over the whole sequence; a constant channel maps to
/// 0.5 everywhere.
pub fn gait_to_image(seq: &GaitSequence) -> Result<GaitImage> {
    if seq.is_empty() {
        return Err(Error::config("gait_to_image on empty sequence"));
    }
    let t_len = seq.len();
    let mut data = vec![0.0; 3 * JOINT_COUNT * t_len];
    for c in 0..3 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for f in seq.frames() {
            for j in f.iter() {
                lo = lo.min(j[c]);
                hi = hi.max(j[c]);
            }
        }
        let span = hi - lo;
        for (t, f) in seq.frames().iter().enumerate() {
            for (j, joint) in f.iter().enumerate() {
                let v = if span == 0.0 { 0.5 } else { (joint[c] - lo) / span };
                data[(c * JOINT_COUNT + j) * t_len + t] = v;
            }
        }
    }
    Ok(GaitImage { width: t_len, data })
}
