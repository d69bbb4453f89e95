//! Emotion-aware pedestrian intent prediction and proxemic robot navigation.
//!
//! The crate is a desk-scale, fully deterministic pipeline:
//!
//! * [`nncore`] — a small tensor/tape engine with exact backward passes,
//!   Adam/RMSProp optimizers, a finite-difference gradient checker, and a
//!   binary checkpoint format (`EWN1`).
//! * [`gaitlab`] — 16-joint gait sequences: file I/O, a synthetic
//!   emotion-labeled walker generator, resampling, and gait-to-image
//!   embeddings.
//! * [`emotionctx`] — the emotion context network (grouped convolutions over
//!   gait images → 4 emotions × 4 view groups) plus a deterministic
//!   heuristic classifier.
//! * [`intentnet`] — a transformer encoder/decoder that predicts future gait
//!   frames conditioned on history and emotion context, five reference
//!   baselines, and the pose-error metric.
//! * [`proxemics`] — emotion-scaled comfort radii, oriented Gaussian
//!   personal-space fields, costmap rasterization, and proxemic LiDAR scan
//!   processing.
//! * [`simworld`] — a deterministic 2D world: occupancy grids, raycast
//!   LiDAR, unicycle kinematics, scripted pedestrians with emotion dynamics,
//!   scenario generators, and curriculum task sampling.
//! * [`navpolicy`] — the navigation policy network over a 54-way discretized
//!   velocity action space.
//! * [`rltrain`] — reward shaping, episode rollouts, REINFORCE updates, and
//!   the three-stage curriculum.
//! * [`evalkit`] — navigation metrics (distance, time, personal-space
//!   deviation) and run comparison tables.
//! * [`cli`] — the `emonav` command-line frontend.
//!
//! Every run is reproducible: all randomness flows through explicitly seeded
//! generators and outputs are byte-stable across invocations.

pub mod cli;
pub mod emotionctx;
pub mod evalkit;
pub mod gaitlab;
pub mod intentnet;
pub mod navpolicy;
pub mod nncore;
pub mod proxemics;
pub mod rltrain;
pub mod simworld;

mod error;

pub use error::{Error, Result};
