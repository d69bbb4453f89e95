use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

use super::tape::{Tape, TensorId};
use super::tensor::Tensor;

/// Draws from `U(−√(1/fan_in), +√(1/fan_in))` — the crate-wide
/// initialization scheme for learnable tensors.
pub fn uniform_init(rng: &mut ChaCha8Rng, shape: Vec<usize>, fan_in: usize) -> Tensor {
    let bound = (1.0 / fan_in.max(1) as f64).sqrt();
    let numel: usize = shape.iter().product();
    let data: Vec<f64> = (0..numel).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(shape, data).expect("finite init values")
}

/// Ordered, named collection of parameter tensors.
///
/// Order is insertion order and is stable: checkpoints, optimizers and
/// gradient extraction all rely on it.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    entries: Vec<(String, Tensor)>,
}

/// Parameter leaves injected into a tape for one forward pass.
pub struct TapeParams {
    ids: Vec<TensorId>,
    index: HashMap<String, usize>,
}

impl TapeParams {
    /// Tape node for a named parameter. Panics on unknown names — that is a
    /// model-definition bug, not an input error.
    pub fn id(&self, name: &str) -> TensorId {
        let i = *self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter '{name}'"));
        self.ids[i]
    }

    pub fn ids(&self) -> &[TensorId] {
        &self.ids
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, t: Tensor) -> Result<()> {
        let name = name.into();
        if self.entries.iter().any(|(n, _)| *n == name) {
            return Err(Error::config(format!("duplicate parameter name '{name}'")));
        }
        self.entries.push((name, t));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_values(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.iter_mut().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    /// Injects every parameter as a tape leaf, in store order.
    pub fn inject(&self, tape: &mut Tape) -> Result<TapeParams> {
        let mut ids = Vec::with_capacity(self.entries.len());
        let mut index = HashMap::with_capacity(self.entries.len());
        for (i, (name, t)) in self.entries.iter().enumerate() {
            ids.push(tape.leaf(t)?);
            index.insert(name.clone(), i);
        }
        Ok(TapeParams { ids, index })
    }

    /// Copies tape gradients back into the stored tensors (accumulating).
    /// Parameters that received no gradient are left untouched.
    pub fn accumulate_grads(&mut self, tape: &Tape, tp: &TapeParams) -> Result<()> {
        for ((_, tensor), &id) in self.entries.iter_mut().zip(&tp.ids) {
            if let Some(g) = tape.grad(id) {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("parameter gradient".to_string()));
                }
                tensor.accumulate_grad(g)?;
            }
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for (_, t) in &mut self.entries {
            t.clear_grad();
        }
    }

    /// Scales every stored gradient by `c` (used to average over batches).
    pub fn scale_grads(&mut self, c: f64) {
        for (_, t) in &mut self.entries {
            if let Some(g) = t.grad() {
                let scaled: Vec<f64> = g.iter().map(|v| v * c).collect();
                t.set_grad(scaled).expect("same length");
            }
        }
    }
}
