use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use aogplan::action_planner::{drop_duplicates, train_action, ActionPlanner, ActionPlannerConfig, CellKind, SeqExample};
use aogplan::aog_planner::{augment, train_aog, AogExample, AogPlanner, AogPlannerConfig};
use aogplan::evalbench::{evaluate_planner, Arm, ExperimentConfig, SplitEval, Workbench, EXPERIMENTS};
use aogplan::grammar::{Catalog, NodeKind, TaskAog};
use aogplan::neural::{CheckpointError, EpochLog, Provenance};
use aogplan::worldgen::{
    build_dataset, encode_scene, read_samples, validation_split, write_samples, DatasetError, DatasetHeader, PoolEntry,
    Sample, SceneLayout,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::CliError;

pub const RUN_SCHEMA: &str = "aogplan.run/1";
pub const EVAL_SCHEMA: &str = "aogplan.eval/1";

pub struct Ctx {
    pub config: ExperimentConfig,
    pub catalog: Catalog,
    pub out: PathBuf,
}

impl Ctx {
    fn provenance(&self) -> Provenance {
        Provenance {
            config_hash: self.config.hash(),
            catalog_version: self.catalog.version(),
        }
    }

    fn seed_rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.config.seed);
        r.set_stream(stream);
        r
    }
}

fn dataset_err(path: &Path, e: DatasetError) -> CliError {
    let kind = match &e {
        DatasetError::Schema(_) => "schema",
        DatasetError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => "missing-file",
        DatasetError::Io(_) => "io",
        _ => "dataset",
    };
    CliError::new(kind, format!("{}: {e}", path.display()))
}

fn checkpoint_err(path: &Path, e: CheckpointError) -> CliError {
    let kind = match &e {
        CheckpointError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => "missing-file",
        CheckpointError::Version(_) | CheckpointError::Magic => "schema",
        _ => "checkpoint",
    };
    CliError::new(kind, format!("{}: {e}", path.display()))
}

fn generic<E: std::fmt::Display>(kind: &'static str) -> impl Fn(E) -> CliError {
    move |e| CliError::new(kind, e.to_string())
}

/// Collects output files and refuses to overwrite any input.
struct Outputs<'a> {
    dir: &'a Path,
    inputs: Vec<PathBuf>,
    written: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path, inputs: &[&Path]) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let inputs = inputs.iter().map(|p| p.canonicalize().map_err(|e| CliError::io(p, e))).collect::<Result<_, _>>()?;
        Ok(Outputs {
            dir,
            inputs,
            written: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> Result<PathBuf, CliError> {
        let p = self.dir.join(name);
        if let Ok(c) = p.canonicalize() {
            if self.inputs.contains(&c) {
                return Err(CliError::new("would-overwrite-input", format!("{} is an input of this command", p.display())));
            }
        }
        Ok(p)
    }

    fn write_with(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>) -> Result<(), CliError> {
        let p = self.path(name)?;
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        let mut w = BufWriter::new(File::create(&p).map_err(|e| CliError::io(&p, e))?);
        f(&mut w)?;
        w.flush().map_err(|e| CliError::io(&p, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.path(name)?;
        self.write_with(name, |w| w.write_all(bytes).map_err(|e| CliError::io(&p, e)))
    }

    /// Writes the run manifest last, listing everything written before it.
    fn finish(mut self, ctx: &Ctx, command: &str, inputs: BTreeMap<&str, String>) -> Result<Vec<String>, CliError> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            schema: &'a str,
            command: &'a str,
            config_hash: String,
            catalog_version: String,
            config: &'a ExperimentConfig,
            inputs: BTreeMap<&'a str, String>,
            outputs: &'a [String],
        }
        let m = Manifest {
            schema: RUN_SCHEMA,
            command,
            config_hash: ctx.config.hash(),
            catalog_version: ctx.catalog.version(),
            config: &ctx.config,
            inputs,
            outputs: &self.written,
        };
        let mut text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        text.push('\n');
        let name = format!("run-{}.json", command.replace(' ', "-"));
        self.write(&name, text.as_bytes())?;
        Ok(self.written)
    }
}

/// Epoch log as CSV, preceded by a provenance comment line.
fn log_csv(p: &Provenance, logs: &[EpochLog]) -> String {
    let mut s = format!("# config_hash={} catalog_version={}\n{}\n", p.config_hash, p.catalog_version, EpochLog::CSV_HEADER);
    for l in logs {
        s.push_str(&l.csv_row());
        s.push('\n');
    }
    s
}

fn read_split<T: serde::de::DeserializeOwned>(path: &Path, catalog: &Catalog) -> Result<(DatasetHeader, Vec<T>), CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let (header, records) = read_samples(BufReader::new(f)).map_err(|e| dataset_err(path, e))?;
    if header.catalog_version != catalog.version() {
        return Err(CliError::new(
            "catalog-mismatch",
            format!("{} was built against catalog {}, current catalog is {}", path.display(), header.catalog_version, catalog.version()),
        ));
    }
    Ok((header, records))
}

fn check_provenance(path: &Path, p: Option<Provenance>, catalog: &Catalog) -> Result<Provenance, CliError> {
    let p = p.ok_or_else(|| CliError::new("checkpoint", format!("{}: checkpoint carries no provenance", path.display())))?;
    if p.catalog_version != catalog.version() {
        return Err(CliError::new(
            "catalog-mismatch",
            format!("{} was trained against catalog {}, current catalog is {}", path.display(), p.catalog_version, catalog.version()),
        ));
    }
    Ok(p)
}

fn encode_all(samples: &[Sample], layout: &SceneLayout) -> Result<Vec<SeqExample>, CliError> {
    samples
        .iter()
        .map(|s| Ok(SeqExample::new(encode_scene(&s.scene, layout).map_err(generic("encode"))?, s)))
        .collect()
}

/// Annotated training samples split into (train, validation) like the workbench does.
fn split_train(ctx: &Ctx, train: &[Sample]) -> (Vec<Sample>, Vec<Sample>) {
    let tasks: Vec<usize> = train.iter().map(|s| s.task_id).collect();
    let (tr, va) = validation_split(&tasks, ctx.config.val_fraction);
    let pick = |idx: &[usize]| idx.iter().map(|&i| train[i].clone()).collect();
    (pick(&tr), pick(&va))
}

pub fn dataset_gen(ctx: &Ctx) -> Result<Vec<String>, CliError> {
    let data = build_dataset(&ctx.config.dataset, &ctx.catalog).map_err(|e| dataset_err(Path::new("<generator>"), e))?;
    let mut out = Outputs::new(&ctx.out, &[])?;
    let jsonl = |split: &str, n: usize| data.header(split, n, &ctx.catalog);
    for (split, n) in [("train", data.train.len()), ("test", data.test.len()), ("pool", data.pool.len())] {
        let name = format!("{split}.jsonl");
        let path = out.path(&name)?;
        let header = jsonl(split, n);
        out.write_with(&name, |w| {
            match split {
                "train" => write_samples(w, &header, &data.train),
                "test" => write_samples(w, &header, &data.test),
                _ => write_samples(w, &header, &data.pool),
            }
            .map_err(|e| dataset_err(&path, e))
        })?;
    }
    out.finish(ctx, "dataset gen", BTreeMap::new())
}

pub fn train_aog_cmd(ctx: &Ctx, data: &Path) -> Result<Vec<String>, CliError> {
    let train_path = data.join("train.jsonl");
    let (header, train) = read_split::<Sample>(&train_path, &ctx.catalog)?;
    let layout = ctx.catalog.layout();
    let sl = header.scene_layout;
    let aog_ex = |samples: &[Sample]| -> Result<Vec<AogExample>, CliError> {
        samples
            .iter()
            .map(|s| {
                let f = encode_scene(&s.scene, &sl).map_err(generic("encode"))?;
                AogExample::new(f, &ctx.catalog.tasks[s.task_id], &s.selections, &layout).map_err(generic("grammar"))
            })
            .collect()
    };
    let (tr, va) = split_train(ctx, &train);
    let (tr, va) = (aog_ex(&tr)?, aog_ex(&va)?);
    let cfg = AogPlannerConfig {
        width: ctx.config.profile.aog_width(),
        scene_dim: sl.total_dim,
        layout,
    };
    let mut planner = AogPlanner::new(cfg, &mut ctx.seed_rng(2));
    let logs = train_aog(&mut planner, &tr, &va, &ctx.config.aog_fit, &mut ctx.seed_rng(3));
    let prov = ctx.provenance();
    let mut out = Outputs::new(&ctx.out, &[&train_path])?;
    let ckpt = out.path("aog.ckpt")?;
    out.write_with("aog.ckpt", |w| planner.save_with(w, Some(&prov)).map_err(|e| checkpoint_err(&ckpt, e)))?;
    out.write("aog-log.csv", log_csv(&prov, &logs).as_bytes())?;
    out.finish(ctx, "train aog", BTreeMap::from([("train", header.config_hash)]))
}

fn load_aog(path: &Path, catalog: &Catalog) -> Result<(AogPlanner, Provenance), CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let (pl, p) = AogPlanner::load_with(BufReader::new(f)).map_err(|e| checkpoint_err(path, e))?;
    Ok((pl, check_provenance(path, p, catalog)?))
}

fn load_action(path: &Path, catalog: &Catalog) -> Result<(ActionPlanner, Provenance), CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let (pl, p) = ActionPlanner::load_with(BufReader::new(f)).map_err(|e| checkpoint_err(path, e))?;
    Ok((pl, check_provenance(path, p, catalog)?))
}

pub fn augment_cmd(ctx: &Ctx, data: &Path, model: &Path) -> Result<Vec<String>, CliError> {
    let pool_path = data.join("pool.jsonl");
    let (header, pool) = read_split::<PoolEntry>(&pool_path, &ctx.catalog)?;
    let (planner, model_prov) = load_aog(model, &ctx.catalog)?;
    if planner.config.scene_dim != header.scene_layout.total_dim {
        return Err(CliError::new("checkpoint", "model scene width does not match the dataset layout"));
    }
    let generated = augment(&planner, &pool, &ctx.catalog, &header.scene_layout).map_err(generic("augment"))?;
    let gen_header = DatasetHeader {
        split: "generated".into(),
        count: generated.len(),
        ..header.clone()
    };
    let mut out = Outputs::new(&ctx.out, &[&pool_path, model])?;
    let path = out.path("generated.jsonl")?;
    out.write_with("generated.jsonl", |w| write_samples(w, &gen_header, &generated).map_err(|e| dataset_err(&path, e)))?;
    out.finish(ctx, "augment", BTreeMap::from([("pool", header.config_hash), ("model", model_prov.config_hash)]))
}

pub fn train_action_cmd(ctx: &Ctx, data: &Path, generated: Option<&Path>) -> Result<Vec<String>, CliError> {
    let train_path = data.join("train.jsonl");
    let (header, train) = read_split::<Sample>(&train_path, &ctx.catalog)?;
    let sl = header.scene_layout;
    let (tr, va) = split_train(ctx, &train);
    let (annotated, val) = (encode_all(&tr, &sl)?, encode_all(&va, &sl)?);
    let mut inputs = BTreeMap::from([("train", header.config_hash.clone())]);
    let mut input_paths = vec![train_path.as_path()];
    let gen = match generated.filter(|_| ctx.config.augment) {
        Some(p) => {
            let (h, g) = read_split::<Sample>(p, &ctx.catalog)?;
            if h.scene_layout != sl {
                return Err(CliError::new("dataset", "generated samples use a different scene layout"));
            }
            inputs.insert("generated", h.config_hash);
            input_paths.push(p);
            drop_duplicates(&annotated, encode_all(&g, &sl)?)
        }
        None => Vec::new(),
    };
    let arm = Arm::Aog;
    let cfg = ActionPlannerConfig::factorized(ctx.config.profile.action_width(), sl.total_dim, CellKind::Lstm);
    let mut planner = ActionPlanner::new(cfg, &mut ctx.seed_rng(2 * arm.stream()));
    let fit = if gen.is_empty() { ctx.config.annotated_fit } else { ctx.config.action_fit };
    let logs = train_action(
        &mut planner,
        &annotated,
        &gen,
        &val,
        &fit,
        ctx.config.curriculum.as_ref(),
        &mut ctx.seed_rng(2 * arm.stream() + 1),
    )
    .map_err(generic("train"))?;
    let prov = ctx.provenance();
    let mut out = Outputs::new(&ctx.out, &input_paths)?;
    let ckpt = out.path("action.ckpt")?;
    out.write_with("action.ckpt", |w| planner.save_with(w, Some(&prov)).map_err(|e| checkpoint_err(&ckpt, e)))?;
    out.write("action-log.csv", log_csv(&prov, &logs).as_bytes())?;
    out.finish(ctx, "train action", inputs)
}

#[derive(Serialize)]
struct EvalReport {
    schema: &'static str,
    config_hash: String,
    catalog_version: String,
    model: Provenance,
    test: String,
    #[serde(flatten)]
    eval: SplitEval,
}

pub fn eval_cmd(ctx: &Ctx, data: &Path, model: &Path) -> Result<Vec<String>, CliError> {
    let test_path = data.join("test.jsonl");
    let (header, test) = read_split::<Sample>(&test_path, &ctx.catalog)?;
    let (planner, model_prov) = load_action(model, &ctx.catalog)?;
    if planner.config.scene_dim != header.scene_layout.total_dim {
        return Err(CliError::new("checkpoint", "model scene width does not match the dataset layout"));
    }
    let test_ex = encode_all(&test, &header.scene_layout)?;
    let report = EvalReport {
        schema: EVAL_SCHEMA,
        config_hash: ctx.config.hash(),
        catalog_version: ctx.catalog.version(),
        model: model_prov.clone(),
        test: header.config_hash.clone(),
        eval: evaluate_planner(&planner, &test_ex, ctx.config.dataset.annotated_tasks),
    };
    let mut text = serde_json::to_string_pretty(&report).expect("eval serializes");
    text.push('\n');
    let mut out = Outputs::new(&ctx.out, &[&test_path, model])?;
    out.write("eval.json", text.as_bytes())?;
    out.finish(ctx, "eval", BTreeMap::from([("test", header.config_hash), ("model", model_prov.config_hash)]))
}

pub fn experiment_cmd(ctx: &Ctx, name: &str) -> Result<Vec<String>, CliError> {
    if !EXPERIMENTS.contains(&name) {
        return Err(CliError::usage(format!("unknown experiment `{name}` (expected one of: {})", EXPERIMENTS.join(", "))));
    }
    let mut wb = Workbench::new(ctx.config.clone(), ctx.catalog.clone()).map_err(generic("experiment"))?;
    let report = wb.run(name).map_err(generic("experiment"))?;
    let prov = ctx.provenance();
    let mut out = Outputs::new(&ctx.out, &[])?;
    out.write("report.json", report.to_json().as_bytes())?;
    let table = format!("# config_hash={} catalog_version={}\n{}", prov.config_hash, prov.catalog_version, report.to_csv());
    out.write("table.csv", table.as_bytes())?;
    for (id, logs) in &wb.logs {
        out.write(&format!("logs/{id}.csv"), log_csv(&prov, logs).as_bytes())?;
    }
    out.finish(ctx, "experiment", BTreeMap::from([("experiment", name.to_string())]))
}

fn render(aog: &TaskAog, id: usize, depth: usize, out: &mut String) {
    let n = aog.node(id);
    let pad = "  ".repeat(depth);
    let tag = match n.kind {
        NodeKind::And => "AND",
        NodeKind::Or => "OR ",
        NodeKind::Leaf => "-  ",
    };
    match (n.kind, n.action) {
        (NodeKind::Leaf, Some(a)) => out.push_str(&format!("{pad}{tag} #{id} {a}\n")),
        _ => out.push_str(&format!("{pad}{tag} #{id} {}\n", n.label)),
    }
    for &c in &n.children {
        render(aog, c, depth + 1, out);
    }
}

pub fn inspect_aog(catalog: &Catalog, task: usize) -> Result<String, CliError> {
    let aog = catalog
        .task(task)
        .ok_or_else(|| CliError::usage(format!("task {task} not in catalog (0..{})", catalog.tasks.len())))?;
    let mut s = format!("task {} `{}` (catalog {})\n", aog.task_id, aog.name, catalog.version());
    render(aog, aog.root, 0, &mut s);
    let or_nodes = aog.nodes.iter().filter(|n| n.kind == NodeKind::Or).count();
    s.push_str(&format!("nodes: {}, or-nodes: {or_nodes}\nsequences: {}\n", aog.len(), aog.count_sequences()));
    Ok(s)
}
