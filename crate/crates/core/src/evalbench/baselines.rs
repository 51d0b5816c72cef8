//! Nearest-neighbour retrieval and the windowed MLP planner.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action_planner::{curriculum_indices, CurriculumSchedule, Decoded, SeqExample, DEFAULT_L_MAX};
use crate::context::task_one_hot;
use crate::neural::{
    argmax, cross_entropy, fit, init_params, relu, softmax, softmax_xent_grad, EpochLog, FitConfig, Linear, Objective,
    Params,
};
use crate::vocab::{AtomicAction, FACTOR_CLASSES, NUM_TASKS};
use crate::worldgen::encode_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no training sample for task {0}")]
pub struct TaskAbsent(pub usize);

/// Returns the sequence of the closest same-task training scene (Euclidean
/// distance on scene features; ties go to the earliest sample).
#[derive(Debug, Clone, Default)]
pub struct NearestNeighbor {
    items: Vec<(usize, Vec<f64>, Vec<AtomicAction>)>,
}

impl NearestNeighbor {
    pub fn new(train: &[SeqExample]) -> Self {
        NearestNeighbor {
            items: train.iter().map(|e| (e.task_id, e.f_i.clone(), e.sequence.clone())).collect(),
        }
    }

    pub fn predict(&self, f_i: &[f64], task_id: usize) -> Result<&[AtomicAction], TaskAbsent> {
        let mut best: Option<(f64, usize)> = None;
        for (i, (t, f, _)) in self.items.iter().enumerate() {
            if *t != task_id {
                continue;
            }
            let d: f64 = f.iter().zip(f_i).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.map_or(true, |(b, _)| d < b) {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| self.items[i].2.as_slice()).ok_or(TaskAbsent(task_id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub width: usize,
    pub scene_dim: usize,
    /// Number of previous atomic actions fed back as input.
    pub window: usize,
    pub l_max: usize,
}

impl MlpConfig {
    pub fn new(width: usize, scene_dim: usize) -> Self {
        MlpConfig {
            width,
            scene_dim,
            window: 5,
            l_max: DEFAULT_L_MAX,
        }
    }

    fn input_dim(&self) -> usize {
        self.scene_dim + NUM_TASKS + self.window * 2 * FACTOR_CLASSES
    }
}

/// `[f^I, f^T, last W atomic actions]` → ReLU hidden layer → action and
/// object softmax heads. The history starts with `(start, start)`; the most
/// recent action occupies the first window slot.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpPlanner {
    pub config: MlpConfig,
    hidden: Linear,
    action: Linear,
    object: Linear,
    pub params: Params,
}

impl MlpPlanner {
    pub fn new<R: Rng + ?Sized>(config: MlpConfig, rng: &mut R) -> Self {
        let mut params = Params::default();
        let hidden = Linear::new(&mut params, "mlp_hidden", config.input_dim(), config.width);
        let action = Linear::new(&mut params, "mlp_action", config.width, FACTOR_CLASSES);
        let object = Linear::new(&mut params, "mlp_object", config.width, FACTOR_CLASSES);
        init_params(&mut params, rng);
        MlpPlanner {
            config,
            hidden,
            action,
            object,
            params,
        }
    }

    /// Sparse input for a step whose history (oldest first) is `history`.
    fn input(&self, f_i: &[f64], task_id: usize, history: &[AtomicAction]) -> Vec<(usize, f64)> {
        let mut x: Vec<(usize, f64)> = f_i.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (i, v)).collect();
        let off = self.config.scene_dim;
        x.extend(task_one_hot(task_id).iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (off + i, v)));
        let off = off + NUM_TASKS;
        for (slot, a) in history.iter().rev().take(self.config.window).enumerate() {
            for k in encode_atomic(*a) {
                x.push((off + slot * 2 * FACTOR_CLASSES + k, 1.0));
            }
        }
        x
    }

    fn forward(&self, p: &Params, x: &[(usize, f64)]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = relu(&self.hidden.forward_sparse(p, x));
        let pa = softmax(&self.action.forward(p, &h));
        let po = softmax(&self.object.forward(p, &h));
        (h, pa, po)
    }

    pub fn decode(&self, f_i: &[f64], task_id: usize) -> Decoded {
        let mut history = vec![AtomicAction::START];
        let mut sequence = Vec::new();
        for _ in 0..self.config.l_max {
            let (_, pa, po) = self.forward(&self.params, &self.input(f_i, task_id, &history));
            let a = AtomicAction::new(argmax(&pa) as u8, argmax(&po) as u8);
            if a.is_stop() {
                return Decoded {
                    sequence,
                    truncated: false,
                };
            }
            sequence.push(a);
            if a.is_task_fail() {
                return Decoded {
                    sequence,
                    truncated: false,
                };
            }
            history.push(a);
        }
        Decoded {
            sequence,
            truncated: true,
        }
    }

    /// Per-step (input, target) pairs under teacher forcing.
    fn steps(&self, ex: &SeqExample) -> Vec<(Vec<(usize, f64)>, AtomicAction)> {
        let mut history = vec![AtomicAction::START];
        let mut out = Vec::with_capacity(ex.sequence.len() + 1);
        for &t in ex.sequence.iter().chain(std::iter::once(&AtomicAction::STOP)) {
            out.push((self.input(&ex.f_i, ex.task_id, &history), t));
            history.push(t);
        }
        out
    }
}

impl Objective for MlpPlanner {
    type Item = SeqExample;

    fn accumulate(&self, p: &Params, ex: &SeqExample, g: &mut Params) -> (f64, usize) {
        let steps = self.steps(ex);
        let mut loss = 0.0;
        for (x, t) in &steps {
            let (h, pa, po) = self.forward(p, x);
            let (ta, to) = (t.action.0 as usize, t.object.0 as usize);
            loss += cross_entropy(&pa, ta) + cross_entropy(&po, to);
            let mut dh = vec![0.0; h.len()];
            self.action.backward(p, g, &h, &softmax_xent_grad(&pa, ta), Some(&mut dh));
            self.object.backward(p, g, &h, &softmax_xent_grad(&po, to), Some(&mut dh));
            for (d, &v) in dh.iter_mut().zip(&h) {
                if v <= 0.0 {
                    *d = 0.0;
                }
            }
            self.hidden.backward_sparse(g, x, &dh);
        }
        (loss, steps.len())
    }

    fn loss(&self, p: &Params, ex: &SeqExample) -> (f64, usize) {
        let steps = self.steps(ex);
        let loss = steps
            .iter()
            .map(|(x, t)| {
                let (_, pa, po) = self.forward(p, x);
                cross_entropy(&pa, t.action.0 as usize) + cross_entropy(&po, t.object.0 as usize)
            })
            .sum();
        (loss, steps.len())
    }

    fn val_error(&self, p: &Params, items: &[SeqExample]) -> f64 {
        let (mut wrong, mut n) = (0usize, 0usize);
        for ex in items {
            for (x, t) in self.steps(ex) {
                let (_, pa, po) = self.forward(p, &x);
                wrong += (AtomicAction::new(argmax(&pa) as u8, argmax(&po) as u8) != t) as usize;
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            wrong as f64 / n as f64
        }
    }
}

/// Same data selection as the action planner's trainer.
pub fn train_mlp<R: Rng + ?Sized>(
    mlp: &mut MlpPlanner,
    annotated: &[SeqExample],
    generated: &[SeqExample],
    val: &[SeqExample],
    cfg: &FitConfig,
    curriculum: Option<&CurriculumSchedule>,
    rng: &mut R,
) -> Vec<EpochLog> {
    let items: Vec<SeqExample> = annotated.iter().chain(generated).cloned().collect();
    let select = |epoch: usize| {
        let tau = curriculum.map(|s| s.tau(epoch));
        (tau, curriculum_indices(annotated.len(), generated, tau))
    };
    let mut params = std::mem::take(&mut mlp.params);
    let logs = fit(&*mlp, &mut params, &items, val, cfg, select, rng);
    mlp.params = params;
    logs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck;
    use crate::worldgen::Origin;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ex(task_id: usize, f: Vec<f64>, seq: Vec<AtomicAction>) -> SeqExample {
        SeqExample {
            f_i: f,
            task_id,
            sequence: seq,
            uncertainty: 0.0,
            origin: Origin::Annotated,
        }
    }

    #[test]
    fn nearest_neighbour_is_task_restricted() {
        let a = vec![AtomicAction::new(0, 0)];
        let b = vec![AtomicAction::new(1, 1)];
        let nn = NearestNeighbor::new(&[ex(0, vec![0.0, 0.0], a.clone()), ex(1, vec![1.0, 1.0], b.clone())]);
        assert_eq!(nn.predict(&[1.0, 1.0], 0).unwrap(), &a[..]);
        assert_eq!(nn.predict(&[0.0, 0.0], 1).unwrap(), &b[..]);
        assert_eq!(nn.predict(&[0.0, 0.0], 2), Err(TaskAbsent(2)));
    }

    #[test]
    fn nearest_neighbour_ties_go_to_first() {
        let nn = NearestNeighbor::new(&[
            ex(0, vec![1.0], vec![AtomicAction::new(2, 2)]),
            ex(0, vec![-1.0], vec![AtomicAction::new(3, 3)]),
        ]);
        assert_eq!(nn.predict(&[0.0], 0).unwrap(), &[AtomicAction::new(2, 2)]);
    }

    #[test]
    fn window_keeps_most_recent_first() {
        let mlp = MlpPlanner::new(MlpConfig { window: 2, ..MlpConfig::new(4, 3) }, &mut ChaCha8Rng::seed_from_u64(0));
        let h = [AtomicAction::START, AtomicAction::new(1, 2), AtomicAction::new(3, 4)];
        let x = mlp.input(&[0.0; 3], 0, &h);
        let off = 3 + NUM_TASKS;
        let hist: Vec<usize> = x.iter().map(|&(i, _)| i).filter(|&i| i >= off).map(|i| i - off).collect();
        assert_eq!(hist, vec![3, 15 + 4, 30 + 1, 30 + 15 + 2]);
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        let mlp = MlpPlanner::new(MlpConfig::new(6, 4), &mut ChaCha8Rng::seed_from_u64(1));
        let e = ex(3, vec![0.5, 0.0, 1.0, 0.2], vec![AtomicAction::new(1, 1), AtomicAction::new(2, 0)]);
        assert!(gradcheck(&mlp, &mlp.params, &e, 1e-5) < 1e-4);
    }
}
