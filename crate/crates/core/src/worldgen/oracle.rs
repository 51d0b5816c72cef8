use super::{required_objects, Access, Fill, Power, Scene};
use crate::grammar::{GrammarError, NodeId, ParseGraph, TaskAog};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("no rule for or-node {node} ({label:?}) of task {task_id}")]
    NoRule { task_id: usize, node: NodeId, label: String },
    #[error("task {task_id} needs object class {class_id}, which the scene lacks")]
    MissingObject { task_id: usize, class_id: u8 },
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

struct Facts<'a>(&'a Scene);

impl Facts<'_> {
    fn filled(&self, class_id: u8) -> bool {
        self.0.find(class_id).is_some_and(|o| o.fill == Fill::Filled)
    }
    fn closed(&self, class_id: u8) -> bool {
        self.0.find(class_id).is_some_and(|o| o.access == Access::Closed)
    }
    fn on(&self, class_id: u8) -> bool {
        self.0.find(class_id).is_some_and(|o| o.power == Power::On)
    }
    fn has(&self, class_id: u8) -> bool {
        self.0.has(class_id)
    }
}

const CUP: u8 = 0;
const POT: u8 = 1;
const DISPENSER: u8 = 2;
const TEA_BOX: u8 = 3;
const WASHER: u8 = 8;
const TEAPOT: u8 = 9;
const CLOSET: u8 = 11;

/// Whether a task with a failure branch can be carried out.
fn feasible(task_id: usize, f: &Facts) -> bool {
    match task_id {
        0 => f.filled(CUP),
        1 | 6 => f.has(DISPENSER) || f.filled(POT),
        4 => f.on(DISPENSER) || f.filled(POT),
        5 | 7 | 12 => f.filled(POT),
        8 => f.filled(TEAPOT),
        9 | 10 => !f.on(WASHER),
        _ => true,
    }
}

fn decide(aog: &TaskAog, node: NodeId, f: &Facts) -> Result<usize, OracleError> {
    let label = aog.node(node).label.as_str();
    if node == aog.root && label == aog.name {
        return Ok(if feasible(aog.task_id, f) { 0 } else { 1 });
    }
    let branch = match label {
        "empty the cup" => f.filled(CUP) as usize,
        "water source" => {
            if f.has(DISPENSER) {
                if f.on(DISPENSER) {
                    0
                } else {
                    1
                }
            } else {
                2
            }
        }
        "hot water source" => {
            if f.on(DISPENSER) {
                0
            } else {
                1
            }
        }
        "power the water dispenser" => (!f.on(DISPENSER)) as usize,
        "open the tea box" => f.closed(TEA_BOX) as usize,
        "open the washing machine" => f.closed(WASHER) as usize,
        "open the closet" => f.closed(CLOSET) as usize,
        _ => {
            return Err(OracleError::NoRule {
                task_id: aog.task_id,
                node,
                label: label.to_string(),
            })
        }
    };
    Ok(branch)
}

/// Resolves every or-node of `aog` from the scene by a fixed rule table.
///
/// Infeasible scenes resolve the root to its failure branch, which yields the
/// one-element `[(task fail, task fail)]` sequence.
pub fn oracle_plan(scene: &Scene, aog: &TaskAog) -> Result<ParseGraph, OracleError> {
    let facts = Facts(scene);
    let mut state = aog.start_parse()?;
    let root_can_fail = aog.node(aog.root).label == aog.name;
    if !root_can_fail || feasible(aog.task_id, &facts) {
        for &class_id in required_objects(aog.task_id) {
            if !scene.has(class_id) {
                return Err(OracleError::MissingObject {
                    task_id: aog.task_id,
                    class_id,
                });
            }
        }
    }
    while let Some(node) = state.next_or_node() {
        let branch = decide(aog, node, &facts)?;
        state.select(node, branch)?;
    }
    Ok(state.into_parse()?)
}
