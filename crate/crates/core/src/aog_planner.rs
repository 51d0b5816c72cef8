//! AOG-LSTM: a recurrent or-node branch selector conditioned on scene and task.
//!
//! At step t the current (pruned) graph is encoded, embedded linearly and fed
//! to the LSTM; a 3-way head scores the branches of the t-th pending or-node,
//! with branches beyond its child count masked out.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::context::{ContextCache, ContextEncoder};
use crate::grammar::{AogEncodingLayout, GrammarError, NodeId, OrSelectionList, ParseGraph, TaskAog, MAX_BRANCHES};
use crate::neural::{Provenance, 
    argmax, cross_entropy, entropy, fit, init_params, load_checkpoint, masked_softmax, save_checkpoint,
    softmax_xent_grad, CheckpointError, EpochLog, FitConfig, Linear, LstmCell, LstmStep, Objective, Params,
};
use crate::worldgen::{encode_scene, EncodeError, Origin, PoolEntry, Sample, SceneLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AogPlannerConfig {
    /// Width of the scene/task embeddings, the graph embedding and the LSTM.
    pub width: usize,
    pub scene_dim: usize,
    pub layout: AogEncodingLayout,
}

#[derive(Debug, Clone)]
pub struct AogPlanner {
    pub config: AogPlannerConfig,
    ctx: ContextEncoder,
    emb: Linear,
    lstm: LstmCell,
    head: Linear,
    pub params: Params,
}

/// One teacher-forced or-node decision.
#[derive(Debug, Clone, PartialEq)]
pub struct AogStep {
    pub encoding: Vec<(usize, f64)>,
    pub valid: usize,
    pub target: usize,
}

/// A training sample unrolled along its ground-truth pruning path.
#[derive(Debug, Clone, PartialEq)]
pub struct AogExample {
    pub f_i: Vec<f64>,
    pub task_id: usize,
    pub steps: Vec<AogStep>,
}

impl AogExample {
    pub fn new(f_i: Vec<f64>, aog: &TaskAog, selections: &OrSelectionList, layout: &AogEncodingLayout) -> Result<Self, GrammarError> {
        let mut state = aog.start_parse()?;
        let mut steps = Vec::with_capacity(selections.len());
        for sel in selections.iter() {
            let encoding = layout.encode_sparse(&state)?;
            steps.push(AogStep {
                encoding,
                valid: aog.node(sel.or_node).children.len(),
                target: sel.branch,
            });
            state.select(sel.or_node, sel.branch)?;
        }
        if let Some(id) = state.next_or_node() {
            return Err(GrammarError::Unresolved(id));
        }
        Ok(AogExample {
            f_i,
            task_id: aog.task_id,
            steps,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionTrace {
    pub or_node: NodeId,
    pub probs: [f64; MAX_BRANCHES],
    pub valid: usize,
    pub branch: usize,
}

impl SelectionTrace {
    pub fn entropy(&self) -> f64 {
        entropy(&self.probs[..self.valid])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub parse: ParseGraph,
    pub trace: Vec<SelectionTrace>,
    /// Mean branch entropy over visited or-nodes (0 when there are none).
    pub uncertainty: f64,
}

/// Forces the branch taken at a given step of the or-node visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Override {
    pub step: usize,
    pub branch: usize,
}

impl AogPlanner {
    pub fn new<R: Rng + ?Sized>(config: AogPlannerConfig, rng: &mut R) -> Self {
        let mut params = Params::default();
        let w = config.width;
        let ctx = ContextEncoder::new(&mut params, config.scene_dim, w, w);
        let emb = Linear::new(&mut params, "aog_emb", config.layout.total_dim, w);
        let lstm = LstmCell::new(&mut params, "lstm", w, w);
        let head = Linear::new(&mut params, "head", w, MAX_BRANCHES);
        init_params(&mut params, rng);
        AogPlanner {
            config,
            ctx,
            emb,
            lstm,
            head,
            params,
        }
    }

    /// Initial LSTM state `(h_0, c_0)` for a scene and task.
    pub fn init_state(&self, p: &Params, f_i: &[f64], task_id: usize) -> (Vec<f64>, Vec<f64>) {
        let c = self.ctx.forward(p, f_i, task_id);
        (c.h0, vec![0.0; self.config.width])
    }

    /// One selection step; returns the masked branch distribution and the new state.
    pub fn select_step(
        &self,
        p: &Params,
        h: &[f64],
        c: &[f64],
        encoding: &[(usize, f64)],
        valid: usize,
    ) -> ([f64; MAX_BRANCHES], Vec<f64>, Vec<f64>) {
        let x = self.emb.forward_sparse(p, encoding);
        let s = self.lstm.forward(p, &x, h, c);
        let probs = masked_softmax(&self.head.forward(p, &s.h), valid);
        let mut out = [0.0; MAX_BRANCHES];
        out.copy_from_slice(&probs);
        (out, s.h, s.c)
    }

    /// Resolves the task graph with argmax selections, pruning as it goes.
    pub fn generate(&self, f_i: &[f64], aog: &TaskAog, force: Option<Override>) -> Result<Generation, GrammarError> {
        let p = &self.params;
        let (mut h, mut c) = self.init_state(p, f_i, aog.task_id);
        let mut state = aog.start_parse()?;
        let mut trace = Vec::new();
        while let Some(or_node) = state.next_or_node() {
            let valid = aog.node(or_node).children.len();
            let enc = self.config.layout.encode_sparse(&state)?;
            let (probs, h2, c2) = self.select_step(p, &h, &c, &enc, valid);
            h = h2;
            c = c2;
            let mut branch = argmax(&probs[..valid]);
            if let Some(o) = force.filter(|o| o.step == trace.len()) {
                branch = o.branch.min(valid - 1);
            }
            trace.push(SelectionTrace {
                or_node,
                probs,
                valid,
                branch,
            });
            state.select(or_node, branch)?;
        }
        let uncertainty = if trace.is_empty() {
            0.0
        } else {
            trace.iter().map(SelectionTrace::entropy).sum::<f64>() / trace.len() as f64
        };
        Ok(Generation {
            parse: state.into_parse()?,
            trace,
            uncertainty,
        })
    }

    pub fn generate_sample(&self, entry: &PoolEntry, aog: &TaskAog, scene_layout: &SceneLayout) -> Result<Sample, AugmentError> {
        let f_i = encode_scene(&entry.scene, scene_layout)?;
        let g = self.generate(&f_i, aog, None)?;
        Ok(Sample {
            scene: entry.scene.clone(),
            task_id: entry.task_id,
            selections: g.parse.selections,
            sequence: g.parse.sequence,
            uncertainty: g.uncertainty,
            origin: Origin::Generated,
        })
    }

    pub fn save<W: std::io::Write>(&self, w: W) -> Result<(), CheckpointError> {
        self.save_with(w, None)
    }

    pub fn save_with<W: std::io::Write>(&self, w: W, provenance: Option<&Provenance>) -> Result<(), CheckpointError> {
        let meta = serde_json::json!({ "model": "aog-lstm", "config": self.config, "provenance": provenance }).to_string();
        save_checkpoint(w, &self.params, &meta)
    }

    pub fn load<R: std::io::Read>(r: R) -> Result<Self, CheckpointError> {
        Ok(Self::load_with(r)?.0)
    }

    pub fn load_with<R: std::io::Read>(r: R) -> Result<(Self, Option<Provenance>), CheckpointError> {
        let (loaded, meta) = load_checkpoint(r)?;
        let meta: serde_json::Value =
            serde_json::from_str(&meta).map_err(|e| CheckpointError::Corrupt(format!("meta: {e}")))?;
        if meta["model"] != "aog-lstm" {
            return Err(CheckpointError::Corrupt("not an aog-lstm checkpoint".into()));
        }
        let config: AogPlannerConfig = serde_json::from_value(meta["config"].clone())
            .map_err(|e| CheckpointError::Corrupt(format!("config: {e}")))?;
        let mut planner = AogPlanner::new(config, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0));
        planner.params.load_values(&loaded)?;
        let provenance = serde_json::from_value(meta["provenance"].clone())
            .map_err(|e| CheckpointError::Corrupt(format!("provenance: {e}")))?;
        Ok((planner, provenance))
    }

    fn unroll(&self, p: &Params, ex: &AogExample) -> (ContextCache, Vec<(Vec<f64>, LstmStep, Vec<f64>)>) {
        let ctx = self.ctx.forward(p, &ex.f_i, ex.task_id);
        let mut h = ctx.h0.clone();
        let mut c = vec![0.0; self.config.width];
        let mut steps = Vec::with_capacity(ex.steps.len());
        for st in &ex.steps {
            let x = self.emb.forward_sparse(p, &st.encoding);
            let s = self.lstm.forward(p, &x, &h, &c);
            let probs = masked_softmax(&self.head.forward(p, &s.h), st.valid);
            h = s.h.clone();
            c = s.c.clone();
            steps.push((x, s, probs));
        }
        (ctx, steps)
    }
}

impl Objective for AogPlanner {
    type Item = AogExample;

    fn accumulate(&self, p: &Params, ex: &AogExample, g: &mut Params) -> (f64, usize) {
        let (ctx, steps) = self.unroll(p, ex);
        let w = self.config.width;
        let mut loss = 0.0;
        let mut dh_next = vec![0.0; w];
        let mut dc_next = vec![0.0; w];
        let zeros = vec![0.0; w];
        for t in (0..steps.len()).rev() {
            let (x, s, probs) = &steps[t];
            let st = &ex.steps[t];
            loss += cross_entropy(probs, st.target);
            let dlogits = softmax_xent_grad(probs, st.target);
            let mut dh = dh_next.clone();
            self.head.backward(p, g, &s.h, &dlogits, Some(&mut dh));
            let (h_prev, c_prev) = if t == 0 {
                (&ctx.h0, &zeros)
            } else {
                (&steps[t - 1].1.h, &steps[t - 1].1.c)
            };
            let (dx, dhp, dcp) = self.lstm.backward(p, g, x, h_prev, c_prev, s, &dh, &dc_next);
            self.emb.backward_sparse(g, &st.encoding, &dx);
            dh_next = dhp;
            dc_next = dcp;
        }
        if !steps.is_empty() {
            self.ctx.backward(p, g, &ex.f_i, ex.task_id, &ctx, &dh_next);
        }
        (loss, steps.len())
    }

    fn loss(&self, p: &Params, ex: &AogExample) -> (f64, usize) {
        let (_, steps) = self.unroll(p, ex);
        let loss = steps
            .iter()
            .zip(&ex.steps)
            .map(|((_, _, probs), st)| cross_entropy(probs, st.target))
            .sum();
        (loss, steps.len())
    }

    /// Fraction of wrong teacher-forced selections.
    fn val_error(&self, p: &Params, items: &[AogExample]) -> f64 {
        let (mut wrong, mut n) = (0usize, 0usize);
        for ex in items {
            let (_, steps) = self.unroll(p, ex);
            for ((_, _, probs), st) in steps.iter().zip(&ex.steps) {
                wrong += (argmax(&probs[..st.valid]) != st.target) as usize;
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

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

/// Trains by teacher forcing along the ground-truth pruning path; returns the
/// per-epoch log. The planner ends on its best-validation parameters.
pub fn train_aog<R: Rng + ?Sized>(
    planner: &mut AogPlanner,
    train: &[AogExample],
    val: &[AogExample],
    cfg: &FitConfig,
    rng: &mut R,
) -> Vec<EpochLog> {
    let mut params = std::mem::take(&mut planner.params);
    let usable: Vec<usize> = (0..train.len()).filter(|&i| !train[i].steps.is_empty()).collect();
    let logs = fit(&*planner, &mut params, train, val, cfg, |_| (None, usable.clone()), rng);
    planner.params = params;
    logs
}

/// Labels every pool entry with the planner's argmax parse.
pub fn augment(
    planner: &AogPlanner,
    pool: &[PoolEntry],
    catalog: &crate::grammar::Catalog,
    scene_layout: &SceneLayout,
) -> Result<Vec<Sample>, AugmentError> {
    pool.iter()
        .map(|e| planner.generate_sample(e, &catalog.tasks[e.task_id], scene_layout))
        .collect()
}
