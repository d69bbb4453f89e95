use crate::{Error, Result};

use super::params::ParamStore;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    RmsProp,
}

/// Optimizer settings. The two constructors reproduce the reference
/// training setups; every field can be overridden afterwards.
#[derive(Clone, Copy, Debug)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub rmsprop_rho: f64,
    pub rmsprop_epsilon: f64,
    /// Fraction removed from the learning rate at each decay boundary.
    pub decay_fraction: f64,
    /// Epoch interval between decay boundaries.
    pub decay_every_epochs: usize,
}

impl OptimizerConfig {
    /// Adam with β1=0.9, β2=0.999, lr=0.009, 10% decay every 250 epochs.
    pub fn adam_default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            learning_rate: 0.009,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            rmsprop_rho: 0.9,
            rmsprop_epsilon: 0.00005,
            decay_fraction: 0.10,
            decay_every_epochs: 250,
        }
    }

    /// RMSProp with lr=0.00004, ε=0.00005 (ρ defaults to 0.9).
    pub fn rmsprop_default() -> Self {
        OptimizerConfig { kind: OptimizerKind::RmsProp, learning_rate: 0.00004, ..Self::adam_default() }
    }

    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::config("learning_rate must be > 0"));
        }
        for (name, v) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2), ("rmsprop_rho", self.rmsprop_rho)] {
            if !(0.0 < v && v < 1.0) {
                return Err(Error::config(format!("{name} must lie in (0,1), got {v}")));
            }
        }
        if self.rmsprop_epsilon <= 0.0 || self.adam_epsilon <= 0.0 {
            return Err(Error::config("epsilon must be > 0"));
        }
        if !(0.0..1.0).contains(&self.decay_fraction) {
            return Err(Error::config("decay_fraction must lie in [0,1)"));
        }
        if self.decay_every_epochs == 0 {
            return Err(Error::config("decay_every_epochs must be positive"));
        }
        Ok(())
    }

    /// Learning rate after epoch-based decay: multiplied by
    /// `(1 − decay_fraction)` once per completed `decay_every_epochs`.
    pub fn effective_lr(&self, epoch: usize) -> f64 {
        let boundaries = epoch / self.decay_every_epochs;
        self.learning_rate * (1.0 - self.decay_fraction).powi(boundaries as i32)
    }
}

/// Per-tensor Adam state (first and second moment estimates).
#[derive(Clone, Debug, Default)]
pub struct AdamSlot {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// Per-tensor RMSProp state (squared-gradient accumulator).
#[derive(Clone, Debug, Default)]
pub struct RmsPropSlot {
    pub acc: Vec<f64>,
}

/// One bias-corrected Adam update. `t` is the 1-based step counter.
pub fn adam_step(
    param: &mut [f64],
    grad: &[f64],
    slot: &mut AdamSlot,
    t: usize,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    if param.len() != grad.len() {
        return Err(Error::shape("adam_step param/grad length mismatch"));
    }
    if slot.m.is_empty() {
        slot.m = vec![0.0; param.len()];
        slot.v = vec![0.0; param.len()];
    }
    let bc1 = 1.0 - beta1.powi(t as i32);
    let bc2 = 1.0 - beta2.powi(t as i32);
    for i in 0..param.len() {
        let g = grad[i];
        slot.m[i] = beta1 * slot.m[i] + (1.0 - beta1) * g;
        slot.v[i] = beta2 * slot.v[i] + (1.0 - beta2) * g * g;
        let m_hat = slot.m[i] / bc1;
        let v_hat = slot.v[i] / bc2;
        param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// One RMSProp update: `a ← ρa + (1−ρ)g²; θ ← θ − lr·g/(√a + ε)`.
pub fn rmsprop_step(
    param: &mut [f64],
    grad: &[f64],
    slot: &mut RmsPropSlot,
    lr: f64,
    rho: f64,
    eps: f64,
) -> Result<()> {
    if param.len() != grad.len() {
        return Err(Error::shape("rmsprop_step param/grad length mismatch"));
    }
    if slot.acc.is_empty() {
        slot.acc = vec![0.0; param.len()];
    }
    for i in 0..param.len() {
        let g = grad[i];
        slot.acc[i] = rho * slot.acc[i] + (1.0 - rho) * g * g;
        param[i] -= lr * g / (slot.acc[i].sqrt() + eps);
    }
    Ok(())
}

enum Slots {
    Adam(Vec<AdamSlot>),
    RmsProp(Vec<RmsPropSlot>),
}

/// Stateful optimizer driving a whole [`ParamStore`].
///
/// Slots are index-aligned with the store, so the store's parameter list
/// must not change between steps.
pub struct Optimizer {
    cfg: OptimizerConfig,
    step_count: usize,
    epoch: usize,
    slots: Option<Slots>,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Optimizer { cfg, step_count: 0, epoch: 0, slots: None })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    /// Sets the epoch used for learning-rate decay.
    pub fn set_epoch(&mut self, epoch: usize) {
        self.epoch = epoch;
    }

    pub fn current_lr(&self) -> f64 {
        self.cfg.effective_lr(self.epoch)
    }

    /// Applies one update using the gradients stored on the parameters.
    /// Parameters without a gradient are skipped.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        let n = store.len();
        let slots = self.slots.get_or_insert_with(|| match self.cfg.kind {
            OptimizerKind::Adam => Slots::Adam(vec![AdamSlot::default(); n]),
            OptimizerKind::RmsProp => Slots::RmsProp(vec![RmsPropSlot::default(); n]),
        });
        self.step_count += 1;
        let lr = self.cfg.effective_lr(self.epoch);
        for (i, (_, tensor)) in store.iter_mut().enumerate() {
            let Some(grad) = tensor.grad().map(|g| g.to_vec()) else {
                continue;
            };
            match slots {
                Slots::Adam(v) => adam_step(
                    tensor.data_mut(),
                    &grad,
                    &mut v[i],
                    self.step_count,
                    lr,
                    self.cfg.adam_beta1,
                    self.cfg.adam_beta2,
                    self.cfg.adam_epsilon,
                )?,
                Slots::RmsProp(v) => rmsprop_step(
                    tensor.data_mut(),
                    &grad,
                    &mut v[i],
                    lr,
                    self.cfg.rmsprop_rho,
                    self.cfg.rmsprop_epsilon,
                )?,
            }
            if !tensor.is_finite() {
                return Err(Error::NonFinite("parameter after optimizer step".to_string()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn defaults_match_reference_settings() {
        let a = OptimizerConfig::adam_default();
        assert_eq!(a.adam_beta1, 0.9);
        assert_eq!(a.adam_beta2, 0.999);
        assert_eq!(a.learning_rate, 0.009);
        assert_eq!(a.decay_fraction, 0.10);
        assert_eq!(a.decay_every_epochs, 250);
        let r = OptimizerConfig::rmsprop_default();
        assert_eq!(r.learning_rate, 0.00004);
        assert_eq!(r.rmsprop_epsilon, 0.00005);
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = vec![1.5, -2.0];
        let mut slot = AdamSlot::default();
        adam_step(&mut p, &[0.0, 0.0], &mut slot, 1, 0.009, 0.9, 0.999, 1e-8).unwrap();
        assert_eq!(p, vec![1.5, -2.0]);

        let mut slot = RmsPropSlot::default();
        rmsprop_step(&mut p, &[0.0, 0.0], &mut slot, 0.00004, 0.9, 0.00005).unwrap();
        assert_eq!(p, vec![1.5, -2.0]);
    }

    #[test]
    fn adam_first_step_magnitude_is_lr() {
        // Bias correction makes the first step ≈ lr regardless of the
        // gradient magnitude.
        let mut p = vec![1.0];
        let mut slot = AdamSlot::default();
        adam_step(&mut p, &[2.0], &mut slot, 1, 0.009, 0.9, 0.999, 1e-8).unwrap();
        assert_abs_diff_eq!(p[0], 0.991, epsilon = 1e-6);
    }

    #[test]
    fn lr_decay_boundary() {
        let cfg = OptimizerConfig::adam_default();
        assert_abs_diff_eq!(cfg.effective_lr(0), 0.009, epsilon = 1e-15);
        assert_abs_diff_eq!(cfg.effective_lr(249), 0.009, epsilon = 1e-15);
        assert_abs_diff_eq!(cfg.effective_lr(250), 0.0081, epsilon = 1e-15);
        assert_abs_diff_eq!(cfg.effective_lr(500), 0.00729, epsilon = 1e-15);
    }

    #[test]
    fn rmsprop_hand_step() {
        let mut p = vec![0.0];
        let mut slot = RmsPropSlot::default();
        rmsprop_step(&mut p, &[1.0], &mut slot, 0.00004, 0.9, 0.00005).unwrap();
        // a = 0.1, step = 4e-5 / (sqrt(0.1} + 5e-5)
        let expect = 0.00004 / (0.1f64.sqrt() + 0.00005);
        assert_abs_diff_eq!(-p[0], expect, epsilon = 1e-12);
        assert_abs_diff_eq!(-p[0], 1.2647e-4, epsilon = 1e-8);
    }

    #[test]
    fn rmsprop_accumulator_sign_symmetric() {
        let mut p1 = vec![0.0];
        let mut s1 = RmsPropSlot::default();
        rmsprop_step(&mut p1, &[0.7], &mut s1, 1e-3, 0.9, 1e-8).unwrap();
        let mut p2 = vec![0.0];
        let mut s2 = RmsPropSlot::default();
        rmsprop_step(&mut p2, &[-0.7], &mut s2, 1e-3, 0.9, 1e-8).unwrap();
        assert_eq!(s1.acc, s2.acc);
    }

    #[test]
    fn config_validation() {
        let mut cfg = OptimizerConfig::adam_default();
        cfg.learning_rate = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = OptimizerConfig::adam_default();
        cfg.adam_beta1 = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = OptimizerConfig::adam_default();
        cfg.decay_fraction = 1.0;
        assert!(cfg.validate().is_err());
    }
}
