//! The action planner: an LSTM (or tanh RNN) that emits atomic actions one
//! step at a time, conditioned on the scene and task through the shared
//! context encoder.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::context::{ContextCache, ContextEncoder};
use crate::neural::{Provenance, 
    argmax, cross_entropy, entropy, fit, init_params, load_checkpoint, save_checkpoint, softmax, softmax_xent_grad,
    CheckpointError, EpochLog, FitConfig, Linear, LstmCell, LstmStep, Objective, Params, RnnCell,
};
use crate::vocab::{AtomicAction, FACTOR_CLASSES};
use crate::worldgen::{encode_atomic, Origin, Sample};

/// Decoding bound; the longest catalog sequence is well below it.
pub const DEFAULT_L_MAX: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellKind {
    Lstm,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadKind {
    /// Independent softmax heads over actions and objects.
    Factorized,
    /// One softmax over `ActionPlannerConfig::joint_vocab`.
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionPlannerConfig {
    pub width: usize,
    pub scene_dim: usize,
    pub cell: CellKind,
    pub head: HeadKind,
    /// Output classes of the joint head (empty for the factorized head).
    pub joint_vocab: Vec<AtomicAction>,
    pub l_max: usize,
}

impl ActionPlannerConfig {
    pub fn factorized(width: usize, scene_dim: usize, cell: CellKind) -> Self {
        ActionPlannerConfig {
            width,
            scene_dim,
            cell,
            head: HeadKind::Factorized,
            joint_vocab: Vec::new(),
            l_max: DEFAULT_L_MAX,
        }
    }

    /// Joint head over the given atomic actions plus `(stop, stop)`.
    pub fn joint(width: usize, scene_dim: usize, atomic: &[AtomicAction]) -> Self {
        let mut joint_vocab = atomic.to_vec();
        if !joint_vocab.contains(&AtomicAction::STOP) {
            joint_vocab.push(AtomicAction::STOP);
        }
        ActionPlannerConfig {
            width,
            scene_dim,
            cell: CellKind::Lstm,
            head: HeadKind::Joint,
            joint_vocab,
            l_max: DEFAULT_L_MAX,
        }
    }
}

/// One training sequence. Inputs are `START, seq[0], …`; targets are
/// `seq[0], …, STOP`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqExample {
    pub f_i: Vec<f64>,
    pub task_id: usize,
    pub sequence: Vec<AtomicAction>,
    pub uncertainty: f64,
    pub origin: Origin,
}

impl SeqExample {
    pub fn new(f_i: Vec<f64>, sample: &Sample) -> Self {
        SeqExample {
            f_i,
            task_id: sample.task_id,
            sequence: sample.sequence.clone(),
            uncertainty: sample.uncertainty,
            origin: sample.origin,
        }
    }

    fn inputs(&self) -> impl Iterator<Item = AtomicAction> + '_ {
        std::iter::once(AtomicAction::START).chain(self.sequence.iter().copied())
    }

    fn targets(&self) -> impl Iterator<Item = AtomicAction> + '_ {
        self.sequence.iter().copied().chain(std::iter::once(AtomicAction::STOP))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decoded {
    pub sequence: Vec<AtomicAction>,
    /// True when decoding hit `l_max` without emitting `(stop, stop)`.
    pub truncated: bool,
}

/// Inclusion threshold over training epochs:
/// `τ(e) = min(tau_init + tau_step·⌊e / epochs_per_step⌋, tau_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurriculumSchedule {
    pub tau_init: f64,
    pub tau_step: f64,
    pub epochs_per_step: usize,
    pub tau_max: f64,
}

impl Default for CurriculumSchedule {
    fn default() -> Self {
        CurriculumSchedule {
            tau_init: 0.2,
            tau_step: 0.2,
            epochs_per_step: 100,
            tau_max: 1.2,
        }
    }
}

impl CurriculumSchedule {
    pub fn tau(&self, epoch: usize) -> f64 {
        let steps = epoch / self.epochs_per_step.max(1);
        (self.tau_init + self.tau_step * steps as f64).min(self.tau_max)
    }

    /// First epoch at which τ reaches `tau_max`.
    pub fn saturation_epoch(&self) -> usize {
        if self.tau_step <= 0.0 || self.tau_init >= self.tau_max {
            return 0;
        }
        let steps = ((self.tau_max - self.tau_init) / self.tau_step).ceil() as usize;
        steps * self.epochs_per_step.max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Recurrence {
    Lstm(LstmCell),
    Tanh(RnnCell),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Heads {
    Factorized { action: Linear, object: Linear },
    Joint(Linear),
}

#[derive(Debug, Clone, PartialEq)]
enum CellCache {
    Lstm(LstmStep),
    Tanh(Vec<f64>),
}

impl CellCache {
    fn h(&self) -> &[f64] {
        match self {
            CellCache::Lstm(s) => &s.h,
            CellCache::Tanh(h) => h,
        }
    }

    fn c(&self) -> Option<&[f64]> {
        match self {
            CellCache::Lstm(s) => Some(&s.c),
            CellCache::Tanh(_) => None,
        }
    }
}

/// Output distribution of one step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepDist {
    Factorized { action: Vec<f64>, object: Vec<f64> },
    Joint(Vec<f64>),
}

struct Unrolled {
    ctx: ContextCache,
    steps: Vec<(Vec<(usize, f64)>, Vec<f64>, CellCache, StepDist)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionPlanner {
    pub config: ActionPlannerConfig,
    ctx: ContextEncoder,
    emb: Linear,
    rec: Recurrence,
    heads: Heads,
    pub params: Params,
}

const META_MODEL: &str = "action-planner";

impl ActionPlanner {
    pub fn new<R: Rng + ?Sized>(config: ActionPlannerConfig, rng: &mut R) -> Self {
        let mut params = Params::default();
        let w = config.width;
        let ctx = ContextEncoder::new(&mut params, config.scene_dim, w, w);
        let emb = Linear::new(&mut params, "pair_emb", 2 * FACTOR_CLASSES, w);
        let rec = match config.cell {
            CellKind::Lstm => Recurrence::Lstm(LstmCell::new(&mut params, "lstm", w, w)),
            CellKind::Tanh => Recurrence::Tanh(RnnCell::new(&mut params, "rnn", w, w)),
        };
        let heads = match config.head {
            HeadKind::Factorized => Heads::Factorized {
                action: Linear::new(&mut params, "head_action", w, FACTOR_CLASSES),
                object: Linear::new(&mut params, "head_object", w, FACTOR_CLASSES),
            },
            HeadKind::Joint => Heads::Joint(Linear::new(&mut params, "head_joint", w, config.joint_vocab.len())),
        };
        init_params(&mut params, rng);
        ActionPlanner {
            config,
            ctx,
            emb,
            rec,
            heads,
            params,
        }
    }

    fn joint_index(&self, a: AtomicAction) -> Option<usize> {
        self.config.joint_vocab.iter().position(|&v| v == a)
    }

    /// Whether every atomic action of `seq` (and the stop pair) is predictable.
    pub fn covers(&self, seq: &[AtomicAction]) -> bool {
        match self.config.head {
            HeadKind::Factorized => true,
            HeadKind::Joint => seq
                .iter()
                .chain(std::iter::once(&AtomicAction::STOP))
                .all(|&a| self.joint_index(a).is_some()),
        }
    }

    fn cell_forward(&self, p: &Params, x: &[f64], h: &[f64], c: &[f64]) -> CellCache {
        match self.rec {
            Recurrence::Lstm(cell) => CellCache::Lstm(cell.forward(p, x, h, c)),
            Recurrence::Tanh(cell) => CellCache::Tanh(cell.forward(p, x, h)),
        }
    }

    fn dist(&self, p: &Params, h: &[f64]) -> StepDist {
        match self.heads {
            Heads::Factorized { action, object } => StepDist::Factorized {
                action: softmax(&action.forward(p, h)),
                object: softmax(&object.forward(p, h)),
            },
            Heads::Joint(head) => StepDist::Joint(softmax(&head.forward(p, h))),
        }
    }

    fn pick(&self, d: &StepDist) -> AtomicAction {
        match d {
            StepDist::Factorized { action, object } => AtomicAction::new(argmax(action) as u8, argmax(object) as u8),
            StepDist::Joint(p) => self.config.joint_vocab[argmax(p)],
        }
    }

    fn step_loss(&self, d: &StepDist, target: AtomicAction) -> f64 {
        match d {
            StepDist::Factorized { action, object } => {
                cross_entropy(action, target.action.0 as usize) + cross_entropy(object, target.object.0 as usize)
            }
            StepDist::Joint(p) => cross_entropy(p, self.joint_index(target).expect("target outside joint vocabulary")),
        }
    }

    fn pair_input(a: AtomicAction) -> Vec<(usize, f64)> {
        encode_atomic(a).iter().map(|&i| (i, 1.0)).collect()
    }

    fn unroll(&self, p: &Params, ex: &SeqExample) -> Unrolled {
        let ctx = self.ctx.forward(p, &ex.f_i, ex.task_id);
        let w = self.config.width;
        let mut h = ctx.h0.clone();
        let mut c = vec![0.0; w];
        let mut steps = Vec::with_capacity(ex.sequence.len() + 1);
        for a in ex.inputs() {
            let enc = Self::pair_input(a);
            let x = self.emb.forward_sparse(p, &enc);
            let cell = self.cell_forward(p, &x, &h, &c);
            let d = self.dist(p, cell.h());
            h = cell.h().to_vec();
            if let Some(cn) = cell.c() {
                c = cn.to_vec();
            }
            steps.push((enc, x, cell, d));
        }
        Unrolled { ctx, steps }
    }

    /// Greedy decoding from `(start, start)`. Stops at `(stop, stop)` (not
    /// included), after emitting `(task fail, task fail)`, or at `l_max`.
    pub fn decode(&self, f_i: &[f64], task_id: usize) -> Decoded {
        self.decode_scored(f_i, task_id).0
    }

    /// Decodes and also returns the mean per-step entropy of the emitted
    /// choices (the mean of the two factor entropies for the factorized head).
    pub fn decode_scored(&self, f_i: &[f64], task_id: usize) -> (Decoded, f64) {
        let p = &self.params;
        let ctx = self.ctx.forward(p, f_i, task_id);
        let mut h = ctx.h0;
        let mut c = vec![0.0; self.config.width];
        let mut prev = AtomicAction::START;
        let mut sequence = Vec::new();
        let mut entropies = Vec::new();
        let mut truncated = true;
        for _ in 0..self.config.l_max {
            let x = self.emb.forward_sparse(p, &Self::pair_input(prev));
            let cell = self.cell_forward(p, &x, &h, &c);
            let d = self.dist(p, cell.h());
            entropies.push(match &d {
                StepDist::Factorized { action, object } => 0.5 * (entropy(action) + entropy(object)),
                StepDist::Joint(pj) => entropy(pj),
            });
            let a = self.pick(&d);
            if a.is_stop() {
                truncated = false;
                break;
            }
            sequence.push(a);
            if a.is_task_fail() {
                truncated = false;
                break;
            }
            h = cell.h().to_vec();
            if let Some(cn) = cell.c() {
                c = cn.to_vec();
            }
            prev = a;
        }
        let u = entropies.iter().sum::<f64>() / entropies.len().max(1) as f64;
        (Decoded { sequence, truncated }, u)
    }

    /// Teacher-forced log-probability of `sequence` followed by the stop pair.
    pub fn sequence_logprob(&self, f_i: &[f64], task_id: usize, sequence: &[AtomicAction]) -> f64 {
        let ex = SeqExample {
            f_i: f_i.to_vec(),
            task_id,
            sequence: sequence.to_vec(),
            uncertainty: 0.0,
            origin: Origin::Annotated,
        };
        -self.loss(&self.params, &ex).0
    }

    pub fn save<W: std::io::Write>(&self, w: W) -> Result<(), CheckpointError> {
        self.save_with(w, None)
    }

    pub fn save_with<W: std::io::Write>(&self, w: W, provenance: Option<&Provenance>) -> Result<(), CheckpointError> {
        let meta = serde_json::json!({ "model": META_MODEL, "config": self.config, "provenance": provenance }).to_string();
        save_checkpoint(w, &self.params, &meta)
    }

    pub fn load<R: std::io::Read>(r: R) -> Result<Self, CheckpointError> {
        Ok(Self::load_with(r)?.0)
    }

    pub fn load_with<R: std::io::Read>(r: R) -> Result<(Self, Option<Provenance>), CheckpointError> {
        let (loaded, meta) = load_checkpoint(r)?;
        let meta: serde_json::Value =
            serde_json::from_str(&meta).map_err(|e| CheckpointError::Corrupt(format!("meta: {e}")))?;
        if meta["model"] != META_MODEL {
            return Err(CheckpointError::Corrupt("not an action-planner checkpoint".into()));
        }
        let config: ActionPlannerConfig = serde_json::from_value(meta["config"].clone())
            .map_err(|e| CheckpointError::Corrupt(format!("config: {e}")))?;
        let mut planner = ActionPlanner::new(config, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0));
        planner.params.load_values(&loaded)?;
        let provenance = serde_json::from_value(meta["provenance"].clone())
            .map_err(|e| CheckpointError::Corrupt(format!("provenance: {e}")))?;
        Ok((planner, provenance))
    }
}

impl Objective for ActionPlanner {
    type Item = SeqExample;

    fn accumulate(&self, p: &Params, ex: &SeqExample, g: &mut Params) -> (f64, usize) {
        let un = self.unroll(p, ex);
        let w = self.config.width;
        let zeros = vec![0.0; w];
        let mut loss = 0.0;
        let mut dh_next = vec![0.0; w];
        let mut dc_next = vec![0.0; w];
        let targets: Vec<AtomicAction> = ex.targets().collect();
        for t in (0..un.steps.len()).rev() {
            let (enc, x, cell, d) = &un.steps[t];
            let target = targets[t];
            loss += self.step_loss(d, target);
            let mut dh = dh_next.clone();
            match (self.heads, d) {
                (Heads::Factorized { action, object }, StepDist::Factorized { action: pa, object: po }) => {
                    action.backward(p, g, cell.h(), &softmax_xent_grad(pa, target.action.0 as usize), Some(&mut dh));
                    object.backward(p, g, cell.h(), &softmax_xent_grad(po, target.object.0 as usize), Some(&mut dh));
                }
                (Heads::Joint(head), StepDist::Joint(pj)) => {
                    let k = self.joint_index(target).expect("target outside joint vocabulary");
                    head.backward(p, g, cell.h(), &softmax_xent_grad(pj, k), Some(&mut dh));
                }
                _ => unreachable!("head/distribution mismatch"),
            }
            let h_prev: &[f64] = if t == 0 { &un.ctx.h0 } else { un.steps[t - 1].2.h() };
            let dx = match (self.rec, cell) {
                (Recurrence::Lstm(lstm), CellCache::Lstm(s)) => {
                    let c_prev: &[f64] = if t == 0 { &zeros } else { un.steps[t - 1].2.c().expect("lstm state") };
                    let (dx, dhp, dcp) = lstm.backward(p, g, x, h_prev, c_prev, s, &dh, &dc_next);
                    dh_next = dhp;
                    dc_next = dcp;
                    dx
                }
                (Recurrence::Tanh(rnn), CellCache::Tanh(h)) => {
                    let (dx, dhp) = rnn.backward(p, g, x, h_prev, h, &dh);
                    dh_next = dhp;
                    dx
                }
                _ => unreachable!("cell/cache mismatch"),
            };
            self.emb.backward_sparse(g, enc, &dx);
        }
        self.ctx.backward(p, g, &ex.f_i, ex.task_id, &un.ctx, &dh_next);
        (loss, un.steps.len())
    }

    fn loss(&self, p: &Params, ex: &SeqExample) -> (f64, usize) {
        let un = self.unroll(p, ex);
        let loss = un.steps.iter().zip(ex.targets()).map(|(s, t)| self.step_loss(&s.3, t)).sum();
        (loss, un.steps.len())
    }

    /// Fraction of teacher-forced steps whose argmax atomic action is wrong.
    fn val_error(&self, p: &Params, items: &[SeqExample]) -> f64 {
        let (mut wrong, mut n) = (0usize, 0usize);
        for ex in items {
            let un = self.unroll(p, ex);
            for (s, t) in un.steps.iter().zip(ex.targets()) {
                wrong += (self.pick(&s.3) != t) as usize;
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

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ActionTrainError {
    #[error("no training samples")]
    Empty,
    #[error("sample {0} holds an atomic action the joint head cannot emit")]
    Uncovered(usize),
}

/// Trains on `annotated ∪ {g ∈ generated : H_g < τ(epoch)}`; without a
/// schedule every generated sample is admitted from the first epoch.
pub fn train_action<R: Rng + ?Sized>(
    planner: &mut ActionPlanner,
    annotated: &[SeqExample],
    generated: &[SeqExample],
    val: &[SeqExample],
    cfg: &FitConfig,
    curriculum: Option<&CurriculumSchedule>,
    rng: &mut R,
) -> Result<Vec<EpochLog>, ActionTrainError> {
    if annotated.is_empty() && generated.is_empty() {
        return Err(ActionTrainError::Empty);
    }
    let items: Vec<SeqExample> = annotated.iter().chain(generated).cloned().collect();
    if let Some(i) = items.iter().position(|e| !planner.covers(&e.sequence)) {
        return Err(ActionTrainError::Uncovered(i));
    }
    let select = |epoch: usize| {
        let tau = curriculum.map(|s| s.tau(epoch));
        (tau, curriculum_indices(annotated.len(), generated, tau))
    };
    let mut params = std::mem::take(&mut planner.params);
    let logs = fit(&*planner, &mut params, &items, val, cfg, select, rng);
    planner.params = params;
    Ok(logs)
}

/// Indices into `annotated ++ generated` admitted at threshold `tau`: every
/// annotated sample, and generated ones with uncertainty below `tau`.
pub fn curriculum_indices(n_annotated: usize, generated: &[SeqExample], tau: Option<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n_annotated).collect();
    idx.extend(
        generated
            .iter()
            .enumerate()
            .filter(|(_, g)| tau.map_or(true, |t| g.uncertainty < t))
            .map(|(i, _)| n_annotated + i),
    );
    idx
}

/// Drops generated samples whose (scene features, task) pair also occurs in
/// the annotated set.
pub fn drop_duplicates(annotated: &[SeqExample], generated: Vec<SeqExample>) -> Vec<SeqExample> {
    generated
        .into_iter()
        .filter(|g| !annotated.iter().any(|a| a.task_id == g.task_id && a.f_i == g.f_i))
        .collect()
}
