//! Minimal tensor/layer/optimizer substrate with exact backward passes.
//!
//! Everything is `f64`, row-major, and single-threaded. A [`Tape`] records
//! forward operations and replays them in reverse for gradients; parameters
//! live in a [`ParamStore`] and are injected into a fresh tape per forward
//! pass. Gradients of every operation are verified against central finite
//! differences in the test suites.

mod checkpoint;
mod gradcheck;
mod optim;
mod params;
mod tape;
mod tensor;

pub use checkpoint::{load_records, save_records, MAGIC};
pub use gradcheck::{finite_difference_check, CoordSampling, GradCheckReport};
pub use optim::{adam_step, rmsprop_step, AdamSlot, Optimizer, OptimizerConfig, OptimizerKind, RmsPropSlot};
pub use params::{uniform_init, ParamStore, TapeParams};
pub use tape::{softmax_vec, Padding, Tape, TensorId};
pub use tensor::Tensor;
