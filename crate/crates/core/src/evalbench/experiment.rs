//! Named experiments. A [`Workbench`] owns one seed's dataset and trains
//! arms lazily, so experiments sharing an arm train it once.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::baselines::{train_mlp, MlpConfig, MlpPlanner, NearestNeighbor, TaskAbsent};
use super::metrics::{score, SequenceEval};
use crate::action_planner::{
    drop_duplicates, train_action, ActionPlanner, ActionPlannerConfig, ActionTrainError, CellKind, CurriculumSchedule,
    Decoded, SeqExample,
};
use crate::aog_planner::{train_aog, AogExample, AogPlanner, AogPlannerConfig, AugmentError, Override};
use crate::grammar::{Catalog, GrammarError};
use crate::neural::{argmax, EpochLog, FitConfig, SgdConfig};
use crate::vocab::{AtomicAction, NUM_TASKS};
use crate::worldgen::{
    build_dataset, calibrate_sigma, encode_scene, perturb_features, validation_split, Dataset, DatasetConfig,
    DatasetError, EncodeError, Origin, SceneLayout,
};

pub const REPORT_SCHEMA: &str = "aogplan.report/1";

pub const EXPERIMENTS: [&str; 6] = ["main", "generalization", "self-aug", "curriculum", "joint-head", "noise"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Small widths for CPU runs.
    #[default]
    Desk,
    /// The published layer sizes.
    Paper,
}

impl Profile {
    pub fn aog_width(self) -> usize {
        match self {
            Profile::Desk => 64,
            Profile::Paper => 256,
        }
    }

    pub fn action_width(self) -> usize {
        match self {
            Profile::Desk => 64,
            Profile::Paper => 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub profile: Profile,
    pub dataset: DatasetConfig,
    pub aog_fit: FitConfig,
    /// Arms trained with generated samples.
    pub action_fit: FitConfig,
    /// Arms trained on the annotated set alone.
    pub annotated_fit: FitConfig,
    pub curriculum: Option<CurriculumSchedule>,
    /// When false, arms that would use the augmented set train without it.
    pub augment: bool,
    pub noise_ratios: Vec<f64>,
    /// Share of generated samples, by descending uncertainty, whose
    /// or-node choice is flipped in the corrupted arms.
    pub corrupt_fraction: f64,
    /// Per-task share of the annotated set held out for checkpoint selection.
    pub val_fraction: f64,
}

impl ExperimentConfig {
    pub fn new(seed: u64, profile: Profile) -> Self {
        let sgd = SgdConfig::default();
        let (curriculum, action_epochs) = match profile {
            Profile::Desk => (
                CurriculumSchedule {
                    epochs_per_step: 4,
                    ..CurriculumSchedule::default()
                },
                30,
            ),
            Profile::Paper => (CurriculumSchedule::default(), 600),
        };
        ExperimentConfig {
            seed,
            profile,
            dataset: DatasetConfig {
                seed,
                ..DatasetConfig::default()
            },
            aog_fit: FitConfig {
                sgd,
                epochs: 10,
                min_updates: 6000,
                clip_norm: None,
            },
            action_fit: FitConfig {
                sgd,
                epochs: action_epochs,
                min_updates: 0,
                clip_norm: None,
            },
            annotated_fit: FitConfig {
                sgd,
                epochs: 10,
                min_updates: 2000,
                clip_norm: None,
            },
            curriculum: Some(curriculum),
            augment: true,
            noise_ratios: vec![0.1, 0.2],
            corrupt_fraction: 0.2,
            val_fraction: 0.1,
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_string(self).expect("config serializes").as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        for (name, f) in [("aog", &self.aog_fit), ("action", &self.action_fit), ("annotated", &self.annotated_fit)] {
            if let Err(e) = f.sgd.validate() {
                return bad(format!("{name} sgd: {e}"));
            }
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad(format!("val_fraction {} outside [0, 1)", self.val_fraction));
        }
        if !(0.0..=1.0).contains(&self.corrupt_fraction) {
            return bad(format!("corrupt_fraction {} outside [0, 1]", self.corrupt_fraction));
        }
        if let Some(r) = self.noise_ratios.iter().find(|r| !(0.0..1.0).contains(*r) || **r == 0.0) {
            return bad(format!("noise ratio {r} outside (0, 1)"));
        }
        if let Some(c) = &self.curriculum {
            if c.epochs_per_step == 0 || c.tau_step < 0.0 {
                return bad("curriculum needs epochs_per_step > 0 and tau_step >= 0".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("unknown experiment `{0}` (expected one of: {})", EXPERIMENTS.join(", "))]
    UnknownExperiment(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Train(#[from] ActionTrainError),
    #[error(transparent)]
    Baseline(#[from] TaskAbsent),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arm {
    NearestNeighbor,
    Mlp,
    Rnn,
    Annotated,
    Aog,
    AogNoCurriculum,
    SelfAug,
    Corrupt,
    CorruptNoCurriculum,
    Joint,
    /// Annotated-only retraining on noisy features; negative ratio in ‰.
    Noise(u32),
}

impl Arm {
    pub fn id(self) -> String {
        match self {
            Arm::NearestNeighbor => "nn".into(),
            Arm::Mlp => "mlp".into(),
            Arm::Rnn => "rnn".into(),
            Arm::Annotated => "lstm-annotated".into(),
            Arm::Aog => "lstm-aog".into(),
            Arm::AogNoCurriculum => "lstm-aog-no-curriculum".into(),
            Arm::SelfAug => "lstm-self-aug".into(),
            Arm::Corrupt => "lstm-corrupt".into(),
            Arm::CorruptNoCurriculum => "lstm-corrupt-no-curriculum".into(),
            Arm::Joint => "lstm-joint".into(),
            Arm::Noise(pm) => format!("lstm-noise-{pm}"),
        }
    }

    pub fn label(self) -> String {
        match self {
            Arm::NearestNeighbor => "NN".into(),
            Arm::Mlp => "MLP".into(),
            Arm::Rnn => "RNN".into(),
            Arm::Annotated => "Action-LSTM w/o AOG".into(),
            Arm::Aog => "Action-LSTM w/ AOG".into(),
            Arm::AogNoCurriculum => "Action-LSTM w/ AOG, no curriculum".into(),
            Arm::SelfAug => "Action-LSTM w/ self aug".into(),
            Arm::Corrupt => "corrupted labels, curriculum".into(),
            Arm::CorruptNoCurriculum => "corrupted labels, no curriculum".into(),
            Arm::Joint => "Action-LSTM (joint)".into(),
            Arm::Noise(pm) => format!("w/ {}% noise", pm as f64 / 10.0),
        }
    }

    /// Rng stream family; init draws from `2·stream`, shuffling from `2·stream + 1`.
    pub fn stream(self) -> u64 {
        match self {
            Arm::NearestNeighbor => 10,
            Arm::Mlp => 11,
            Arm::Rnn => 12,
            Arm::Annotated => 13,
            Arm::Aog => 14,
            Arm::AogNoCurriculum => 15,
            Arm::SelfAug => 16,
            Arm::Corrupt => 17,
            Arm::CorruptNoCurriculum => 18,
            Arm::Joint => 19,
            Arm::Noise(pm) => 1000 + u64::from(pm),
        }
    }
}

pub fn experiment_arms(name: &str, config: &ExperimentConfig) -> Result<Vec<Arm>, ExperimentError> {
    Ok(match name {
        "main" => vec![Arm::NearestNeighbor, Arm::Mlp, Arm::Rnn, Arm::Annotated, Arm::Aog],
        "generalization" => vec![Arm::Annotated, Arm::SelfAug, Arm::Aog],
        "self-aug" => vec![Arm::SelfAug, Arm::Aog],
        "curriculum" => vec![Arm::Aog, Arm::AogNoCurriculum, Arm::Corrupt, Arm::CorruptNoCurriculum],
        "joint-head" => vec![Arm::Aog, Arm::Joint],
        "noise" => std::iter::once(Arm::Annotated)
            .chain(config.noise_ratios.iter().map(|r| Arm::Noise((r * 1000.0).round() as u32)))
            .collect(),
        other => return Err(ExperimentError::UnknownExperiment(other.to_string())),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub target_ratio: f64,
    pub sigma: f64,
    pub train_negative_ratio: f64,
    pub test_negative_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub id: String,
    pub label: String,
    /// Training items admitted in the final epoch (0 for retrieval).
    pub train_items: usize,
    pub epochs: usize,
    pub best_val_error: Option<f64>,
    pub all: SequenceEval,
    pub seen: SequenceEval,
    pub unseen: SequenceEval,
    pub per_task_sequence_acc: Vec<Option<f64>>,
    pub truncated: usize,
    pub noise: Option<NoiseReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AogReport {
    /// Held-out or-node accuracy with ground-truth pruning, annotated tasks.
    pub selection_accuracy: f64,
    /// Same, pruning with the model's own choices (later nodes of a wrong
    /// parse count as wrong).
    pub free_running_accuracy: f64,
    pub generated: usize,
    pub corrupted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
    pub catalog_version: String,
    pub aog: Option<AogReport>,
    pub arms: Vec<ArmReport>,
}

impl Report {
    pub fn arm(&self, id: &str) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.id == id)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per arm: headline accuracies, then per-task sequence accuracy.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("arm,label,sequence_acc,seen_sequence_acc,unseen_sequence_acc,action_acc,object_acc,atomic_acc");
        for t in 0..NUM_TASKS {
            out.push_str(&format!(",task_{t}"));
        }
        out.push('\n');
        let f = |v: f64| format!("{v:.4}");
        for a in &self.arms {
            out.push_str(&format!(
                "{},\"{}\",{},{},{},{},{},{}",
                a.id,
                a.label,
                f(a.all.sequence_acc),
                f(a.seen.sequence_acc),
                f(a.unseen.sequence_acc),
                f(a.all.action_acc),
                f(a.all.object_acc),
                f(a.all.atomic_acc)
            ));
            for v in &a.per_task_sequence_acc {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&f(*v));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Anything that maps (scene features, task) to a plan.
trait Plan {
    fn plan(&self, f_i: &[f64], task_id: usize) -> Result<Decoded, TaskAbsent>;
}

impl Plan for ActionPlanner {
    fn plan(&self, f_i: &[f64], task_id: usize) -> Result<Decoded, TaskAbsent> {
        Ok(self.decode(f_i, task_id))
    }
}

impl Plan for MlpPlanner {
    fn plan(&self, f_i: &[f64], task_id: usize) -> Result<Decoded, TaskAbsent> {
        Ok(self.decode(f_i, task_id))
    }
}

/// Retrieval has nothing to return for tasks without annotations; those
/// queries are scored as an empty plan.
impl Plan for NearestNeighbor {
    fn plan(&self, f_i: &[f64], task_id: usize) -> Result<Decoded, TaskAbsent> {
        Ok(Decoded {
            sequence: self.predict(f_i, task_id).map(<[_]>::to_vec).unwrap_or_default(),
            truncated: false,
        })
    }
}

/// Scores of one planner on a test set, overall and by task group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEval {
    pub all: SequenceEval,
    /// Tasks `0..n_seen`, the ones with annotated training samples.
    pub seen: SequenceEval,
    pub unseen: SequenceEval,
    pub per_task_sequence_acc: Vec<Option<f64>>,
    pub truncated: usize,
}

fn split_eval(planner: &dyn Plan, test: &[&SeqExample], n_seen: usize) -> Result<SplitEval, TaskAbsent> {
    let mut preds = Vec::with_capacity(test.len());
    let mut truncated = 0;
    for ex in test {
        let d = planner.plan(&ex.f_i, ex.task_id)?;
        truncated += d.truncated as usize;
        preds.push(d.sequence);
    }
    let subset = |keep: &dyn Fn(usize) -> bool| -> SequenceEval {
        let (p, r): (Vec<Vec<AtomicAction>>, Vec<Vec<AtomicAction>>) = preds
            .iter()
            .zip(test)
            .filter(|(_, ex)| keep(ex.task_id))
            .map(|(p, ex)| (p.clone(), ex.sequence.clone()))
            .unzip();
        score(&p, &r).expect("aligned by construction")
    };
    let per_task_sequence_acc = (0..NUM_TASKS)
        .map(|t| {
            let idx: Vec<usize> = (0..test.len()).filter(|&i| test[i].task_id == t).collect();
            (!idx.is_empty()).then(|| idx.iter().filter(|&&i| preds[i] == test[i].sequence).count() as f64 / idx.len() as f64)
        })
        .collect();
    Ok(SplitEval {
        all: subset(&|_| true),
        seen: subset(&|t| t < n_seen),
        unseen: subset(&|t| t >= n_seen),
        per_task_sequence_acc,
        truncated,
    })
}

/// Greedy-decodes every test item with `planner` and scores it.
pub fn evaluate_planner(planner: &ActionPlanner, test: &[SeqExample], n_seen: usize) -> SplitEval {
    let test: Vec<&SeqExample> = test.iter().collect();
    split_eval(planner, &test, n_seen).expect("action planners cover every task")
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub struct Workbench {
    pub config: ExperimentConfig,
    pub catalog: Catalog,
    pub data: Dataset,
    pub scene_layout: SceneLayout,
    annotated: Vec<SeqExample>,
    val: Vec<SeqExample>,
    aog_train: Vec<AogExample>,
    aog_val: Vec<AogExample>,
    test: Vec<SeqExample>,
    aog: Option<AogPlanner>,
    /// Pool index and example for each generated sample kept after dedup.
    generated: Option<Vec<(usize, SeqExample)>>,
    corrupted: Option<Vec<SeqExample>>,
    annotated_model: Option<ActionPlanner>,
    arms: BTreeMap<Arm, ArmReport>,
    /// Per-epoch training logs, keyed by arm id (plus "aog").
    pub logs: BTreeMap<String, Vec<EpochLog>>,
}

impl Workbench {
    pub fn new(config: ExperimentConfig, catalog: Catalog) -> Result<Self, ExperimentError> {
        config.validate()?;
        let data = build_dataset(&config.dataset, &catalog)?;
        Self::with_dataset(config, catalog, data)
    }

    pub fn with_dataset(config: ExperimentConfig, catalog: Catalog, data: Dataset) -> Result<Self, ExperimentError> {
        config.validate()?;
        let scene_layout = SceneLayout::new(data.config.m_max);
        let layout = catalog.layout();
        let tasks: Vec<usize> = data.train.iter().map(|s| s.task_id).collect();
        let (tr, va) = validation_split(&tasks, config.val_fraction);
        let seq = |idx: &[usize]| -> Result<Vec<SeqExample>, EncodeError> {
            idx.iter()
                .map(|&i| Ok(SeqExample::new(encode_scene(&data.train[i].scene, &scene_layout)?, &data.train[i])))
                .collect()
        };
        let annotated = seq(&tr)?;
        let val = seq(&va)?;
        let aog_ex = |idx: &[usize]| -> Result<Vec<AogExample>, ExperimentError> {
            idx.iter()
                .map(|&i| {
                    let s = &data.train[i];
                    let f = encode_scene(&s.scene, &scene_layout)?;
                    Ok(AogExample::new(f, &catalog.tasks[s.task_id], &s.selections, &layout)?)
                })
                .collect()
        };
        let aog_train = aog_ex(&tr)?;
        let aog_val = aog_ex(&va)?;
        let test = data
            .test
            .iter()
            .map(|s| Ok(SeqExample::new(encode_scene(&s.scene, &scene_layout)?, s)))
            .collect::<Result<Vec<_>, EncodeError>>()?;
        Ok(Workbench {
            config,
            catalog,
            data,
            scene_layout,
            annotated,
            val,
            aog_train,
            aog_val,
            test,
            aog: None,
            generated: None,
            corrupted: None,
            annotated_model: None,
            arms: BTreeMap::new(),
            logs: BTreeMap::new(),
        })
    }

    pub fn aog(&mut self) -> &AogPlanner {
        if self.aog.is_none() {
            let cfg = AogPlannerConfig {
                width: self.config.profile.aog_width(),
                scene_dim: self.scene_layout.total_dim,
                layout: self.catalog.layout(),
            };
            let mut planner = AogPlanner::new(cfg, &mut rng(self.config.seed, 2));
            let logs = train_aog(&mut planner, &self.aog_train, &self.aog_val, &self.config.aog_fit, &mut rng(self.config.seed, 3));
            self.logs.insert("aog".into(), logs);
            self.aog = Some(planner);
        }
        self.aog.as_ref().expect("trained above")
    }

    /// Held-out or-node accuracy on the annotated tasks of the test set:
    /// (ground-truth pruning, free-running).
    pub fn aog_accuracy(&mut self) -> Result<(f64, f64), ExperimentError> {
        let n_tasks = self.config.dataset.annotated_tasks;
        let layout = self.catalog.layout();
        self.aog();
        let aog = self.aog.as_ref().expect("trained");
        let (mut tf, mut fr, mut n) = (0usize, 0usize, 0usize);
        for (s, ex) in self.data.test.iter().zip(&self.test) {
            if s.task_id >= n_tasks {
                continue;
            }
            let task = &self.catalog.tasks[s.task_id];
            let steps = AogExample::new(ex.f_i.clone(), task, &s.selections, &layout)?;
            let (mut h, mut c) = aog.init_state(&aog.params, &ex.f_i, s.task_id);
            for st in &steps.steps {
                let (p, h2, c2) = aog.select_step(&aog.params, &h, &c, &st.encoding, st.valid);
                tf += (argmax(&p[..st.valid]) == st.target) as usize;
                h = h2;
                c = c2;
            }
            let g = aog.generate(&ex.f_i, task, None)?;
            fr += s.selections.iter().enumerate().filter(|(k, sel)| g.parse.selections.0.get(*k) == Some(sel)).count();
            n += s.selections.len();
        }
        let r = |v: usize| if n == 0 { 0.0 } else { v as f64 / n as f64 };
        Ok((r(tf), r(fr)))
    }

    fn generated(&mut self) -> Result<&[(usize, SeqExample)], ExperimentError> {
        if self.generated.is_none() {
            self.aog();
            let aog = self.aog.as_ref().expect("trained");
            let mut out = Vec::with_capacity(self.data.pool.len());
            for (i, e) in self.data.pool.iter().enumerate() {
                let s = aog.generate_sample(e, &self.catalog.tasks[e.task_id], &self.scene_layout)?;
                out.push((i, SeqExample::new(encode_scene(&e.scene, &self.scene_layout)?, &s)));
            }
            let kept = drop_duplicates(&self.annotated, out.iter().map(|(_, e)| e.clone()).collect());
            let mut it = kept.into_iter().peekable();
            let mut aligned = Vec::new();
            for (i, e) in out {
                if it.peek() == Some(&e) {
                    aligned.push((i, it.next().expect("peeked")));
                }
            }
            self.generated = Some(aligned);
        }
        Ok(self.generated.as_deref().expect("computed above"))
    }

    /// The generated set when augmentation is enabled, else empty.
    fn augmented(&mut self) -> Result<Vec<SeqExample>, ExperimentError> {
        if !self.config.augment {
            return Ok(Vec::new());
        }
        Ok(self.generated()?.iter().map(|(_, e)| e.clone()).collect())
    }

    /// Generated set with the top `corrupt_fraction` by uncertainty relabeled:
    /// the highest-entropy or-node is forced to its second most probable branch.
    fn corrupted(&mut self) -> Result<Vec<SeqExample>, ExperimentError> {
        if self.corrupted.is_none() {
            let gen = self.generated()?.to_vec();
            let mut order: Vec<usize> = (0..gen.len()).collect();
            order.sort_by(|&a, &b| gen[b].1.uncertainty.total_cmp(&gen[a].1.uncertainty).then(a.cmp(&b)));
            let k = (self.config.corrupt_fraction * gen.len() as f64).round() as usize;
            let aog = self.aog.as_ref().expect("trained by generated()");
            let mut out: Vec<SeqExample> = gen.iter().map(|(_, e)| e.clone()).collect();
            for &j in &order[..k] {
                let (pool_i, ex) = &gen[j];
                let task = &self.catalog.tasks[ex.task_id];
                let g = aog.generate(&ex.f_i, task, None)?;
                let Some((step, tr)) = g
                    .trace
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.entropy().total_cmp(&b.1.entropy()).then(b.0.cmp(&a.0)))
                else {
                    continue;
                };
                let mut ranked: Vec<usize> = (0..tr.valid).collect();
                ranked.sort_by(|&a, &b| tr.probs[b].total_cmp(&tr.probs[a]).then(a.cmp(&b)));
                let forced = aog.generate(&ex.f_i, task, Some(Override { step, branch: ranked[1] }))?;
                debug_assert_eq!(self.data.pool[*pool_i].task_id, ex.task_id);
                out[j].sequence = forced.parse.sequence;
            }
            self.corrupted = Some(out);
        }
        Ok(self.corrupted.clone().expect("computed above"))
    }

    fn action_config(&self, cell: CellKind) -> ActionPlannerConfig {
        ActionPlannerConfig::factorized(self.config.profile.action_width(), self.scene_layout.total_dim, cell)
    }

    fn fit_action(
        &mut self,
        arm: Arm,
        cfg: ActionPlannerConfig,
        generated: &[SeqExample],
        curriculum: Option<CurriculumSchedule>,
    ) -> Result<ActionPlanner, ExperimentError> {
        let s = self.config.seed;
        let mut pl = ActionPlanner::new(cfg, &mut rng(s, 2 * arm.stream()));
        let fit = if generated.is_empty() {
            self.config.annotated_fit
        } else {
            self.config.action_fit
        };
        let logs = train_action(
            &mut pl,
            &self.annotated,
            generated,
            &self.val,
            &fit,
            curriculum.as_ref(),
            &mut rng(s, 2 * arm.stream() + 1),
        )?;
        self.logs.insert(arm.id(), logs);
        Ok(pl)
    }

    fn annotated_model(&mut self) -> Result<&ActionPlanner, ExperimentError> {
        if self.annotated_model.is_none() {
            let cfg = self.action_config(CellKind::Lstm);
            let pl = self.fit_action(Arm::Annotated, cfg, &[], None)?;
            self.annotated_model = Some(pl);
        }
        Ok(self.annotated_model.as_ref().expect("trained above"))
    }

    /// Pseudo-labels from the annotated-only planner, uncertainty = mean
    /// decoding entropy.
    fn self_labels(&mut self) -> Result<Vec<SeqExample>, ExperimentError> {
        self.annotated_model()?;
        let model = self.annotated_model.as_ref().expect("trained");
        let mut out = Vec::with_capacity(self.data.pool.len());
        for e in &self.data.pool {
            let f = encode_scene(&e.scene, &self.scene_layout)?;
            let (d, u) = model.decode_scored(&f, e.task_id);
            out.push(SeqExample {
                f_i: f,
                task_id: e.task_id,
                sequence: d.sequence,
                uncertainty: u,
                origin: Origin::Generated,
            });
        }
        Ok(drop_duplicates(&self.annotated, out))
    }

    fn evaluate(&self, arm: Arm, planner: &dyn Plan, test: &[SeqExample], only_seen: bool) -> Result<ArmReport, ExperimentError> {
        let n_seen = self.config.dataset.annotated_tasks;
        let test: Vec<&SeqExample> = test.iter().filter(|ex| !only_seen || ex.task_id < n_seen).collect();
        let e = split_eval(planner, &test, n_seen)?;
        let logs = self.logs.get(&arm.id());
        Ok(ArmReport {
            id: arm.id(),
            label: arm.label(),
            train_items: logs.and_then(|l| l.last()).map_or(0, |l| l.included),
            epochs: logs.map_or(0, Vec::len),
            best_val_error: logs.and_then(|l| l.iter().filter_map(|e| e.val_error).min_by(f64::total_cmp)),
            all: e.all,
            seen: e.seen,
            unseen: e.unseen,
            per_task_sequence_acc: e.per_task_sequence_acc,
            truncated: e.truncated,
            noise: None,
        })
    }

    fn noise_arm(&mut self, arm: Arm, ratio: f64, clean_test: &[SeqExample]) -> Result<ArmReport, ExperimentError> {
        let s = self.config.seed;
        let sl = self.scene_layout;
        let test_f: Vec<Vec<f64>> = clean_test.iter().map(|e| e.f_i.clone()).collect();
        let calib_seed = s ^ (0x5eed_0000 + arm.stream());
        let sigma = calibrate_sigma(&test_f, &sl, ratio, calib_seed);
        let perturb = |items: &[SeqExample], r: &mut ChaCha8Rng| -> (Vec<SeqExample>, usize, usize) {
            let (mut seg, mut neg) = (0, 0);
            let items = items
                .iter()
                .map(|e| {
                    let o = perturb_features(&e.f_i, &sl, sigma, r);
                    seg += o.segments;
                    neg += o.negatives;
                    SeqExample { f_i: o.features, ..e.clone() }
                })
                .collect();
            (items, seg, neg)
        };
        let mut train_rng = rng(s, 2 * arm.stream() + 100);
        let (ann, s1, n1) = perturb(&self.annotated, &mut train_rng);
        let (val, s2, n2) = perturb(&self.val, &mut train_rng);
        let (test, s3, n3) = perturb(clean_test, &mut ChaCha8Rng::seed_from_u64(calib_seed));
        let mut pl = ActionPlanner::new(self.action_config(CellKind::Lstm), &mut rng(s, 2 * arm.stream()));
        let logs = train_action(
            &mut pl,
            &ann,
            &[],
            &val,
            &self.config.annotated_fit,
            None,
            &mut rng(s, 2 * arm.stream() + 1),
        )?;
        self.logs.insert(arm.id(), logs);
        let mut report = self.evaluate(arm, &pl, &test, true)?;
        let r = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        report.noise = Some(NoiseReport {
            target_ratio: ratio,
            sigma,
            train_negative_ratio: r(n1 + n2, s1 + s2),
            test_negative_ratio: r(n3, s3),
        });
        Ok(report)
    }

    /// Trains (once) and evaluates one arm.
    pub fn arm(&mut self, arm: Arm) -> Result<&ArmReport, ExperimentError> {
        if !self.arms.contains_key(&arm) {
            let test = std::mem::take(&mut self.test);
            let result = self.run_arm(arm, &test);
            self.test = test;
            let report = result?;
            self.arms.insert(arm, report);
        }
        Ok(&self.arms[&arm])
    }

    fn run_arm(&mut self, arm: Arm, test: &[SeqExample]) -> Result<ArmReport, ExperimentError> {
        let cur = self.config.curriculum;
        match arm {
            Arm::NearestNeighbor => {
                let nn = NearestNeighbor::new(&self.annotated);
                self.evaluate(arm, &nn, test, false)
            }
            Arm::Mlp => {
                let gen = self.augmented()?;
                let s = self.config.seed;
                let cfg = MlpConfig::new(self.config.profile.action_width(), self.scene_layout.total_dim);
                let mut mlp = MlpPlanner::new(cfg, &mut rng(s, 2 * arm.stream()));
                let fit = if gen.is_empty() {
                    self.config.annotated_fit
                } else {
                    self.config.action_fit
                };
                let logs = train_mlp(&mut mlp, &self.annotated, &gen, &self.val, &fit, cur.as_ref(), &mut rng(s, 2 * arm.stream() + 1));
                self.logs.insert(arm.id(), logs);
                self.evaluate(arm, &mlp, test, false)
            }
            Arm::Rnn => {
                let gen = self.augmented()?;
                let pl = self.fit_action(arm, self.action_config(CellKind::Tanh), &gen, cur)?;
                self.evaluate(arm, &pl, test, false)
            }
            Arm::Annotated => {
                self.annotated_model()?;
                let pl = self.annotated_model.as_ref().expect("trained");
                self.evaluate(arm, pl, test, false)
            }
            Arm::Aog | Arm::AogNoCurriculum => {
                let gen = self.augmented()?;
                let c = if arm == Arm::Aog { cur } else { None };
                let pl = self.fit_action(arm, self.action_config(CellKind::Lstm), &gen, c)?;
                self.evaluate(arm, &pl, test, false)
            }
            Arm::SelfAug => {
                let gen = self.self_labels()?;
                let pl = self.fit_action(arm, self.action_config(CellKind::Lstm), &gen, cur)?;
                self.evaluate(arm, &pl, test, false)
            }
            Arm::Corrupt | Arm::CorruptNoCurriculum => {
                let gen = self.corrupted()?;
                let c = if arm == Arm::Corrupt { cur.or(Some(CurriculumSchedule::default())) } else { None };
                let pl = self.fit_action(arm, self.action_config(CellKind::Lstm), &gen, c)?;
                self.evaluate(arm, &pl, test, false)
            }
            Arm::Joint => {
                let gen = self.augmented()?;
                let cfg = ActionPlannerConfig::joint(
                    self.config.profile.action_width(),
                    self.scene_layout.total_dim,
                    &self.catalog.atomic_actions(),
                );
                let pl = self.fit_action(arm, cfg, &gen, cur)?;
                self.evaluate(arm, &pl, test, false)
            }
            Arm::Noise(pm) => self.noise_arm(arm, pm as f64 / 1000.0, test),
        }
    }

    pub fn run(&mut self, experiment: &str) -> Result<Report, ExperimentError> {
        let arms = experiment_arms(experiment, &self.config)?;
        let mut reports = Vec::with_capacity(arms.len());
        for a in arms {
            reports.push(self.arm(a)?.clone());
        }
        let aog = if self.aog.is_some() {
            let (tf, fr) = self.aog_accuracy()?;
            let generated = self.generated.as_ref().map_or(0, Vec::len);
            let corrupted = self
                .corrupted
                .as_ref()
                .map_or(0, |_| (self.config.corrupt_fraction * generated as f64).round() as usize);
            Some(AogReport {
                selection_accuracy: tf,
                free_running_accuracy: fr,
                generated,
                corrupted,
            })
        } else {
            None
        };
        Ok(Report {
            schema: REPORT_SCHEMA.to_string(),
            experiment: experiment.to_string(),
            seed: self.config.seed,
            config_hash: self.config.hash(),
            catalog_version: self.catalog.version(),
            aog,
            arms: reports,
        })
    }
}
