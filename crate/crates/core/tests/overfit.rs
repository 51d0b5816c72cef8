//! Each planner memorizes one sample: per-step NLL below 0.01 within 500
//! SGD steps, and greedy decoding reproduces the sample.

use aogplan::action_planner::{ActionPlanner, ActionPlannerConfig, CellKind, SeqExample};
use aogplan::aog_planner::{AogExample, AogPlanner, AogPlannerConfig};
use aogplan::evalbench::{MlpConfig, MlpPlanner};
use aogplan::grammar::Catalog;
use aogplan::neural::{fit, mean_step_loss, FitConfig, Objective, Params, SgdConfig};
use aogplan::worldgen::{build_dataset, encode_scene, DatasetConfig, Sample, SceneLayout};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const STEPS: usize = 500;
const NLL_TARGET: f64 = 0.01;
const WIDTH: usize = 16;

fn fit_one<O: Objective>(obj: &O, params: &mut Params, item: O::Item) -> f64
where
    O::Item: Clone,
{
    let cfg = FitConfig {
        sgd: SgdConfig {
            weight_decay: 0.0,
            batch_size: 1,
            ..SgdConfig::default()
        },
        epochs: STEPS,
        min_updates: 0,
        clip_norm: None,
    };
    let items = vec![item];
    let logs = fit(obj, params, &items, &[], &cfg, |_| (None, vec![0]), &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(logs.len(), STEPS);
    mean_step_loss(obj, params, &items)
}

fn sample() -> (Catalog, Sample) {
    let cat = Catalog::builtin();
    let d = build_dataset(
        &DatasetConfig {
            seed: 4,
            train_size: 60,
            test_size: 0,
            pool_size: 0,
            ..DatasetConfig::default()
        },
        &cat,
    )
    .unwrap();
    let s = d.train.into_iter().find(|s| s.selections.len() >= 3 && s.sequence.len() >= 6).unwrap();
    (cat, s)
}

fn seq(s: &Sample) -> SeqExample {
    SeqExample::new(encode_scene(&s.scene, &SceneLayout::default()).unwrap(), s)
}

#[test]
fn aog_planner_memorizes_one_parse() {
    let (cat, s) = sample();
    let sl = SceneLayout::default();
    let f = encode_scene(&s.scene, &sl).unwrap();
    let ex = AogExample::new(f.clone(), &cat.tasks[s.task_id], &s.selections, &cat.layout()).unwrap();
    let config = AogPlannerConfig {
        width: WIDTH,
        scene_dim: sl.total_dim,
        layout: cat.layout(),
    };
    let mut pl = AogPlanner::new(config, &mut ChaCha8Rng::seed_from_u64(0));
    let mut params = std::mem::take(&mut pl.params);
    let nll = fit_one(&pl, &mut params, ex);
    pl.params = params;
    assert!(nll < NLL_TARGET, "per-step NLL {nll}");
    let g = pl.generate(&f, &cat.tasks[s.task_id], None).unwrap();
    assert_eq!(g.parse.selections, s.selections);
    assert_eq!(g.parse.sequence, s.sequence);
}

#[test]
fn action_planners_memorize_one_sequence() {
    let (cat, s) = sample();
    let ex = seq(&s);
    let dim = ex.f_i.len();
    for (name, cfg) in [
        ("lstm", ActionPlannerConfig::factorized(WIDTH, dim, CellKind::Lstm)),
        ("rnn", ActionPlannerConfig::factorized(WIDTH, dim, CellKind::Tanh)),
        ("joint", ActionPlannerConfig::joint(WIDTH, dim, &cat.atomic_actions())),
    ] {
        let mut pl = ActionPlanner::new(cfg, &mut ChaCha8Rng::seed_from_u64(0));
        let mut params = std::mem::take(&mut pl.params);
        let nll = fit_one(&pl, &mut params, ex.clone());
        pl.params = params;
        assert!(nll < NLL_TARGET, "{name}: per-step NLL {nll}");
        let d = pl.decode(&ex.f_i, ex.task_id);
        assert!(!d.truncated, "{name}");
        assert_eq!(d.sequence, s.sequence, "{name}");
    }
}

#[test]
fn mlp_baseline_memorizes_one_sequence() {
    let (_, s) = sample();
    let ex = seq(&s);
    let mut pl = MlpPlanner::new(MlpConfig::new(WIDTH, ex.f_i.len()), &mut ChaCha8Rng::seed_from_u64(0));
    let mut params = std::mem::take(&mut pl.params);
    let nll = fit_one(&pl, &mut params, ex.clone());
    pl.params = params;
    assert!(nll < NLL_TARGET, "per-step NLL {nll}");
    assert_eq!(pl.decode(&ex.f_i, ex.task_id).sequence, s.sequence);
}
