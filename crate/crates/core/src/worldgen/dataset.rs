use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{generate_scene, oracle_plan, required_objects, task_environments, OracleError, Scene, SceneLayout};
use crate::grammar::{AogEncodingLayout, Catalog, OrSelectionList};
use crate::vocab::{AtomicAction, Vocab, NUM_TASKS};

pub const DATASET_SCHEMA: &str = "aogplan.dataset/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Annotated,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub scene: Scene,
    pub task_id: usize,
    pub selections: OrSelectionList,
    pub sequence: Vec<AtomicAction>,
    pub uncertainty: f64,
    pub origin: Origin,
}

/// An unlabeled (scene, task) query used for augmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub scene: Scene,
    pub task_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub pool_size: usize,
    /// Tasks `0..annotated_tasks` receive annotated training samples.
    pub annotated_tasks: usize,
    pub m_max: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            seed: 0,
            train_size: 215,
            test_size: 983,
            pool_size: 2600,
            annotated_tasks: 12,
            m_max: super::DEFAULT_M_MAX,
        }
    }
}

impl DatasetConfig {
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(
            serde_json::to_string(self).expect("config serializes").as_bytes(),
        ))
    }
}

/// First line of every dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema: String,
    pub split: String,
    pub count: usize,
    pub seed: u64,
    pub config_hash: String,
    pub catalog_version: String,
    pub vocab: Vocab,
    pub scene_layout: SceneLayout,
    pub aog_layout: AogEncodingLayout,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json at line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("unsupported dataset schema {0:?}")]
    Schema(String),
    #[error("header announces {announced} records, file has {found}")]
    Count { announced: usize, found: usize },
    #[error("empty dataset file")]
    Empty,
    #[error("could not draw a scene satisfying task {0} after {1} attempts")]
    Exhausted(usize, usize),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub catalog_version: String,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub pool: Vec<PoolEntry>,
}

impl Dataset {
    pub fn header(&self, split: &str, count: usize, catalog: &Catalog) -> DatasetHeader {
        DatasetHeader {
            schema: DATASET_SCHEMA.to_string(),
            split: split.to_string(),
            count,
            seed: self.config.seed,
            config_hash: self.config.hash(),
            catalog_version: self.catalog_version.clone(),
            vocab: Vocab::default(),
            scene_layout: SceneLayout::new(self.config.m_max),
            aog_layout: catalog.layout(),
        }
    }
}

const MAX_ATTEMPTS: usize = 10_000;

fn split_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_query<R: Rng>(rng: &mut R, task_id: usize, m_max: usize) -> Result<Scene, DatasetError> {
    let envs = task_environments(task_id);
    for _ in 0..MAX_ATTEMPTS {
        let env = *envs.choose(rng).expect("every task has environments");
        let scene = generate_scene(rng, env);
        if scene.objects.len() <= m_max && required_objects(task_id).iter().all(|&c| scene.has(c)) {
            return Ok(scene);
        }
    }
    Err(DatasetError::Exhausted(task_id, MAX_ATTEMPTS))
}

fn draw_queries(rng: &mut ChaCha8Rng, n: usize, tasks: usize, m_max: usize) -> Result<Vec<PoolEntry>, DatasetError> {
    let mut task_ids: Vec<usize> = (0..n).map(|i| i % tasks).collect();
    task_ids.shuffle(rng);
    task_ids
        .into_iter()
        .map(|task_id| {
            Ok(PoolEntry {
                scene: draw_query(rng, task_id, m_max)?,
                task_id,
            })
        })
        .collect()
}

fn annotate(catalog: &Catalog, q: PoolEntry) -> Result<Sample, DatasetError> {
    let parse = oracle_plan(&q.scene, &catalog.tasks[q.task_id])?;
    Ok(Sample {
        scene: q.scene,
        task_id: q.task_id,
        selections: parse.selections,
        sequence: parse.sequence,
        uncertainty: 0.0,
        origin: Origin::Annotated,
    })
}

/// Builds the annotated training split, the annotated test split and the
/// unlabeled augmentation pool. Each split draws from its own rng stream of
/// `config.seed`, so the splits are independent and reproducible.
pub fn build_dataset(config: &DatasetConfig, catalog: &Catalog) -> Result<Dataset, DatasetError> {
    let train_q = draw_queries(&mut split_rng(config.seed, 1), config.train_size, config.annotated_tasks, config.m_max)?;
    let test_q = draw_queries(&mut split_rng(config.seed, 2), config.test_size, NUM_TASKS, config.m_max)?;
    let pool = draw_queries(&mut split_rng(config.seed, 3), config.pool_size, NUM_TASKS, config.m_max)?;
    let train = train_q
        .into_iter()
        .map(|q| annotate(catalog, q))
        .collect::<Result<Vec<_>, _>>()?;
    let test = test_q
        .into_iter()
        .map(|q| annotate(catalog, q))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset {
        config: config.clone(),
        catalog_version: catalog.version(),
        train,
        test,
        pool,
    })
}

/// Writes a header line followed by one JSON record per line.
pub fn write_samples<W: Write, T: Serialize>(mut w: W, header: &DatasetHeader, records: &[T]) -> Result<(), DatasetError> {
    let line = |e| DatasetError::Json { line: 0, source: e };
    writeln!(w, "{}", serde_json::to_string(header).map_err(line)?)?;
    for r in records {
        writeln!(w, "{}", serde_json::to_string(r).map_err(line)?)?;
    }
    Ok(())
}

pub fn read_samples<R: BufRead, T: DeserializeOwned>(r: R) -> Result<(DatasetHeader, Vec<T>), DatasetError> {
    let mut lines = r.lines();
    let first = lines.next().ok_or(DatasetError::Empty)??;
    let header: DatasetHeader = serde_json::from_str(&first).map_err(|e| DatasetError::Json { line: 1, source: e })?;
    if header.schema != DATASET_SCHEMA {
        return Err(DatasetError::Schema(header.schema));
    }
    let mut records = Vec::new();
    for (i, l) in lines.enumerate() {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&l).map_err(|e| DatasetError::Json { line: i + 2, source: e })?);
    }
    if records.len() != header.count {
        return Err(DatasetError::Count {
            announced: header.count,
            found: records.len(),
        });
    }
    Ok((header, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DatasetConfig {
        DatasetConfig {
            seed: 9,
            train_size: 40,
            test_size: 60,
            pool_size: 30,
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn sizes_follow_config() {
        let cat = Catalog::builtin();
        let d = build_dataset(&small(), &cat).unwrap();
        assert_eq!((d.train.len(), d.test.len(), d.pool.len()), (40, 60, 30));
        assert!(d.train.iter().all(|s| s.task_id < 12));
    }

    #[test]
    fn jsonl_roundtrip() {
        let cat = Catalog::builtin();
        let d = build_dataset(&small(), &cat).unwrap();
        let mut buf = Vec::new();
        let header = d.header("train", d.train.len(), &cat);
        write_samples(&mut buf, &header, &d.train).unwrap();
        let (h, back): (_, Vec<Sample>) = read_samples(&buf[..]).unwrap();
        assert_eq!(h, header);
        assert_eq!(back, d.train);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let cat = Catalog::builtin();
        let d = build_dataset(&small(), &cat).unwrap();
        let mut buf = Vec::new();
        write_samples(&mut buf, &d.header("test", d.test.len(), &cat), &d.test).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        let err = read_samples::<_, Sample>(cut.as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::Count { .. }));
    }
}

/// Splits sample indices into (train, validation), holding out
/// `round(fraction·n_t)` samples of each task (the last ones in order), but
/// never a task's only sample.
pub fn validation_split(task_ids: &[usize], fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let mut by_task: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &t) in task_ids.iter().enumerate() {
        by_task.entry(t).or_default().push(i);
    }
    let mut val = Vec::new();
    for idx in by_task.values() {
        let k = ((fraction * idx.len() as f64).round() as usize).min(idx.len().saturating_sub(1));
        val.extend_from_slice(&idx[idx.len() - k..]);
    }
    val.sort_unstable();
    let train = (0..task_ids.len()).filter(|i| val.binary_search(i).is_err()).collect();
    (train, val)
}
