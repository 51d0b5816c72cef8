use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Params;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            lr: 0.1,
            momentum: 0.9,
            weight_decay: 0.0005,
            batch_size: 40,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.lr > 0.0) {
            return Err(format!("lr must be > 0, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if self.weight_decay < 0.0 {
            return Err("weight_decay must be ≥ 0".into());
        }
        if self.batch_size == 0 {
            return Err("batch_size must be ≥ 1".into());
        }
        Ok(())
    }
}

/// SGD with momentum in the Caffe form:
/// `v ← μ·v − lr·(g + λ·w)`, `w ← w + v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub cfg: SgdConfig,
    pub velocity: Params,
}

impl Sgd {
    pub fn new(cfg: SgdConfig, params: &Params) -> Self {
        Sgd {
            cfg,
            velocity: params.zeros_like(),
        }
    }

    pub fn step(&mut self, params: &mut Params, grads: &Params) {
        let SgdConfig {
            lr,
            momentum,
            weight_decay,
            ..
        } = self.cfg;
        for ((w, g), v) in params
            .tensors
            .iter_mut()
            .zip(&grads.tensors)
            .zip(&mut self.velocity.tensors)
        {
            for ((wi, gi), vi) in w.data.iter_mut().zip(&g.data).zip(&mut v.data) {
                *vi = momentum * *vi - lr * (gi + weight_decay * *wi);
                *wi += *vi;
            }
        }
    }
}

/// Xavier-uniform weights, zero biases, and forget-gate biases of every
/// registered LSTM cell set to 1.
pub fn init_params<R: Rng + ?Sized>(params: &mut Params, rng: &mut R) {
    for t in &mut params.tensors {
        if t.shape.len() == 2 {
            let (fan_out, fan_in) = (t.shape[0], t.shape[1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in &mut t.data {
                *v = rng.gen_range(-a..a);
            }
        } else {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    for id in params.lstm_biases.clone() {
        let b = params.get_mut(id);
        let h = b.len() / 4;
        b[h..2 * h].iter_mut().for_each(|v| *v = 1.0);
    }
}
