use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{AogEncodingLayout, AogNode, NodeKind, TaskAog, ValidationReport};
use crate::vocab::{action_id, action_name, object_id, object_name, AtomicAction, NUM_TASKS};

pub const AOG_SCHEMA: &str = "aogplan.aog/1";

const BUILTIN: [&str; NUM_TASKS] = [
    include_str!("../../catalog/task_00.json"),
    include_str!("../../catalog/task_01.json"),
    include_str!("../../catalog/task_02.json"),
    include_str!("../../catalog/task_03.json"),
    include_str!("../../catalog/task_04.json"),
    include_str!("../../catalog/task_05.json"),
    include_str!("../../catalog/task_06.json"),
    include_str!("../../catalog/task_07.json"),
    include_str!("../../catalog/task_08.json"),
    include_str!("../../catalog/task_09.json"),
    include_str!("../../catalog/task_10.json"),
    include_str!("../../catalog/task_11.json"),
    include_str!("../../catalog/task_12.json"),
    include_str!("../../catalog/task_13.json"),
    include_str!("../../catalog/task_14.json"),
];

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed catalog document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported catalog schema {found:?} (expected {AOG_SCHEMA:?})")]
    Schema { found: String },
    #[error("task {task_id}: unknown {what} {name:?}")]
    UnknownName {
        task_id: usize,
        what: &'static str,
        name: String,
    },
    #[error("task {task_id}: {report}")]
    Invalid {
        task_id: usize,
        report: ValidationReport,
    },
    #[error("catalog must hold tasks 0..{expected} exactly once, found {found:?}")]
    TaskIds { expected: usize, found: Vec<usize> },
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeDoc {
    id: usize,
    kind: NodeKind,
    children: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    object: Option<String>,
    label: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct TaskDoc {
    schema: String,
    task_id: usize,
    name: String,
    nodes: Vec<NodeDoc>,
}

fn from_doc(doc: TaskDoc) -> Result<TaskAog, CatalogError> {
    if doc.schema != AOG_SCHEMA {
        return Err(CatalogError::Schema { found: doc.schema });
    }
    let task_id = doc.task_id;
    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for n in doc.nodes {
        let action = match (&n.action, &n.object) {
            (Some(a), Some(o)) => {
                let a = action_id(a).ok_or_else(|| CatalogError::UnknownName {
                    task_id,
                    what: "action",
                    name: a.clone(),
                })?;
                let o = object_id(o).ok_or_else(|| CatalogError::UnknownName {
                    task_id,
                    what: "object",
                    name: o.clone(),
                })?;
                Some(AtomicAction { action: a, object: o })
            }
            _ => None,
        };
        nodes.push(AogNode {
            id: n.id,
            kind: n.kind,
            children: n.children,
            action,
            label: n.label,
        });
    }
    let aog = TaskAog {
        task_id,
        name: doc.name,
        root: 0,
        nodes,
    };
    let report = aog.validate();
    if !report.is_valid() {
        return Err(CatalogError::Invalid { task_id, report });
    }
    Ok(aog)
}

fn to_doc(aog: &TaskAog) -> TaskDoc {
    TaskDoc {
        schema: AOG_SCHEMA.to_string(),
        task_id: aog.task_id,
        name: aog.name.clone(),
        nodes: aog
            .nodes
            .iter()
            .map(|n| NodeDoc {
                id: n.id,
                kind: n.kind,
                children: n.children.clone(),
                action: n.action.map(|a| action_name(a.action).to_string()),
                object: n.action.map(|a| object_name(a.object).to_string()),
                label: n.label.clone(),
            })
            .collect(),
    }
}

/// The full set of task graphs, indexed by task id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    pub tasks: Vec<TaskAog>,
}

impl Catalog {
    /// The 15 task graphs shipped with the crate.
    pub fn builtin() -> Catalog {
        Catalog::from_json_docs(BUILTIN.iter().copied()).expect("built-in catalog is valid")
    }

    pub fn from_json_docs<'a>(docs: impl IntoIterator<Item = &'a str>) -> Result<Catalog, CatalogError> {
        let mut tasks = Vec::new();
        for text in docs {
            tasks.push(from_doc(serde_json::from_str(text)?)?);
        }
        tasks.sort_by_key(|t| t.task_id);
        let ids: Vec<usize> = tasks.iter().map(|t| t.task_id).collect();
        if ids != (0..NUM_TASKS).collect::<Vec<_>>() {
            return Err(CatalogError::TaskIds {
                expected: NUM_TASKS,
                found: ids,
            });
        }
        Ok(Catalog { tasks })
    }

    /// Reads every `*.json` file in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Catalog, CatalogError> {
        let io_err = |source| CatalogError::Io {
            path: dir.display().to_string(),
            source,
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut texts = Vec::new();
        for p in &paths {
            texts.push(std::fs::read_to_string(p).map_err(|source| CatalogError::Io {
                path: p.display().to_string(),
                source,
            })?);
        }
        Catalog::from_json_docs(texts.iter().map(String::as_str))
    }

    pub fn task_json(aog: &TaskAog) -> String {
        serde_json::to_string_pretty(&to_doc(aog)).expect("catalog docs serialize")
    }

    pub fn task(&self, id: usize) -> Option<&TaskAog> {
        self.tasks.get(id)
    }

    pub fn layout(&self) -> AogEncodingLayout {
        AogEncodingLayout::fit(&self.tasks)
    }

    /// Content hash of the catalog, computed like a git blob id
    /// (`"blob <len>\0" ++ content`) over the canonical JSON of all tasks, SHA-256.
    pub fn version(&self) -> String {
        let content: String = self
            .tasks
            .iter()
            .map(|t| serde_json::to_string(&to_doc(t)).expect("catalog docs serialize") + "\n")
            .collect();
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", content.len()).as_bytes());
        h.update(content.as_bytes());
        hex::encode(h.finalize())
    }

    /// Distinct atomic actions over all leaves, sorted.
    pub fn atomic_actions(&self) -> Vec<AtomicAction> {
        let mut all: Vec<AtomicAction> = self.tasks.iter().flat_map(|t| t.leaf_actions()).collect();
        all.sort();
        all.dedup();
        all
    }
}
