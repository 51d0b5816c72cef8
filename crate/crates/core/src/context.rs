//! Scene/task context encoder shared by the recurrent planners:
//! `h_0 = W_hf [relu(W_fI f^I), relu(W_fT f^T)]`.

use crate::neural::{relu, Linear, Params};
use crate::vocab::NUM_TASKS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextEncoder {
    pub fi: Linear,
    pub ft: Linear,
    pub hf: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextCache {
    pub a_i: Vec<f64>,
    pub a_t: Vec<f64>,
    pub h0: Vec<f64>,
}

pub fn task_one_hot(task_id: usize) -> Vec<f64> {
    let mut v = vec![0.0; NUM_TASKS];
    v[task_id] = 1.0;
    v
}

impl ContextEncoder {
    pub fn new(p: &mut Params, scene_dim: usize, embed: usize, hidden: usize) -> Self {
        ContextEncoder {
            fi: Linear::new(p, "fI", scene_dim, embed),
            ft: Linear::new(p, "fT", NUM_TASKS, embed),
            hf: Linear::new(p, "hf", 2 * embed, hidden),
        }
    }

    pub fn forward(&self, p: &Params, f_i: &[f64], task_id: usize) -> ContextCache {
        let a_i = relu(&self.fi.forward(p, f_i));
        let a_t = relu(&self.ft.forward(p, &task_one_hot(task_id)));
        let cat: Vec<f64> = a_i.iter().chain(&a_t).copied().collect();
        let h0 = self.hf.forward(p, &cat);
        ContextCache { a_i, a_t, h0 }
    }

    pub fn backward(&self, p: &Params, g: &mut Params, f_i: &[f64], task_id: usize, cache: &ContextCache, dh0: &[f64]) {
        let cat: Vec<f64> = cache.a_i.iter().chain(&cache.a_t).copied().collect();
        let mut dcat = vec![0.0; cat.len()];
        self.hf.backward(p, g, &cat, dh0, Some(&mut dcat));
        let e = cache.a_i.len();
        let mask = |d: &[f64], a: &[f64]| -> Vec<f64> { d.iter().zip(a).map(|(&d, &a)| if a > 0.0 { d } else { 0.0 }).collect() };
        let d_i = mask(&dcat[..e], &cache.a_i);
        let d_t = mask(&dcat[e..], &cache.a_t);
        self.fi.backward(p, g, f_i, &d_i, None);
        self.ft.backward(p, g, &task_one_hot(task_id), &d_t, None);
    }
}
