//! Dense layers, recurrent cells, losses and SGD on 64-bit floats.
//!
//! Parameters live in a flat [`Params`] store addressed by [`ParamId`]; a
//! gradient buffer is another `Params` of identical shape. Layers are plain
//! handle structs with explicit forward and backward passes.

mod checkpoint;
mod layers;
mod optim;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use layers::{Linear, LstmCell, LstmStep, RnnCell};
pub use optim::{init_params, Sgd, SgdConfig};
pub use train::{fit, gradcheck, mean_step_loss, EpochLog, FitConfig, Objective};

use serde::{Deserialize, Serialize};

/// Run identity stored in checkpoint metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub catalog_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, ShapeError> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(ShapeError {
                expected: n,
                got: data.len(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("shape mismatch: expected {expected} values, got {got}")]
pub struct ShapeError {
    pub expected: usize,
    pub got: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Named parameter tensors. Bias tensors are 1-d, weights 2-d.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor>,
    /// Gate-bias tensors of LSTM cells, for forget-bias initialization.
    pub lstm_biases: Vec<ParamId>,
}

impl Params {
    pub fn add(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(Tensor::zeros(shape));
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.tensors[id.0].data
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.tensors[id.0].data
    }

    pub fn zeros_like(&self) -> Params {
        Params {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| Tensor::zeros(&t.shape)).collect(),
            lstm_biases: self.lstm_biases.clone(),
        }
    }

    pub fn zero(&mut self) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::all_finite)
    }

    pub fn same_layout(&self, other: &Params) -> bool {
        self.names == other.names
            && self.tensors.len() == other.tensors.len()
            && self.tensors.iter().zip(&other.tensors).all(|(a, b)| a.shape == b.shape)
    }

    /// Flat view index → (tensor, offset), for finite differences.
    pub fn locate(&self, mut flat: usize) -> (usize, usize) {
        for (i, t) in self.tensors.iter().enumerate() {
            if flat < t.len() {
                return (i, flat);
            }
            flat -= t.len();
        }
        panic!("flat index out of range");
    }
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Max-subtracted softmax.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Softmax over the first `valid` entries; the rest get probability 0.
pub fn masked_softmax(x: &[f64], valid: usize) -> Vec<f64> {
    let mut p = softmax(&x[..valid]);
    p.resize(x.len(), 0.0);
    p
}

pub const PROB_FLOOR: f64 = 1e-12;

pub fn cross_entropy(p: &[f64], target: usize) -> f64 {
    -p[target].max(PROB_FLOOR).ln()
}

/// Natural-log entropy of a distribution (zero entries contribute 0).
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

/// Gradient of `cross_entropy(softmax(z), target)` w.r.t. `z`, given `p = softmax(z)`.
pub fn softmax_xent_grad(p: &[f64], target: usize) -> Vec<f64> {
    let mut g = p.to_vec();
    g[target] -= 1.0;
    g
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    best
}
