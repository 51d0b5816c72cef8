//! And-or graph task grammars.
//!
//! A [`TaskAog`] is a rooted ordered tree: and-nodes decompose a task into
//! chronologically ordered parts, or-nodes pick one of 2 or 3 alternatives,
//! leaves carry one [`AtomicAction`]. Node ids are assigned in depth-first
//! preorder from the root, children left to right, so ids double as
//! positions in the vector encoding and stay valid under pruning.

mod catalog;
mod encode;
mod prune;

pub use catalog::{Catalog, CatalogError, AOG_SCHEMA};
pub use encode::{encode_aog, AogEncodingLayout};
pub use prune::PrunedAog;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::vocab::AtomicAction;

/// Maximum branching factor of an or-node.
pub const MAX_BRANCHES: usize = 3;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    And,
    Or,
    Leaf,
}

impl NodeKind {
    /// Position of this kind in the node-type one-hot.
    pub fn index(self) -> usize {
        match self {
            NodeKind::And => 0,
            NodeKind::Or => 1,
            NodeKind::Leaf => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AogNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub children: Vec<NodeId>,
    pub action: Option<AtomicAction>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskAog {
    pub task_id: usize,
    pub name: String,
    pub root: NodeId,
    pub nodes: Vec<AogNode>,
}

/// One resolved or-node: which child was kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Selection {
    pub or_node: NodeId,
    pub branch: usize,
}

/// Or-node choices in canonical (preorder) visiting order.
///
/// Serialized as a list of `[or_node, branch]` pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct OrSelectionList(pub Vec<Selection>);

impl OrSelectionList {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Selection> {
        self.0.iter()
    }

    pub fn branches(&self) -> Vec<usize> {
        self.0.iter().map(|s| s.branch).collect()
    }
}

impl Serialize for OrSelectionList {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[usize; 2]> = self.0.iter().map(|x| [x.or_node, x.branch]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for OrSelectionList {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pairs = Vec::<[usize; 2]>::deserialize(d)?;
        Ok(OrSelectionList(
            pairs
                .into_iter()
                .map(|[or_node, branch]| Selection { or_node, branch })
                .collect(),
        ))
    }
}

/// A fully resolved parse: the choices made and the action sequence they spell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseGraph {
    pub task_id: usize,
    pub selections: OrSelectionList,
    pub sequence: Vec<AtomicAction>,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("invalid and-or graph: {0}")]
    Invalid(ValidationReport),
    #[error("branch {branch} out of range for or-node {or_node} with {children} children")]
    BranchOutOfRange {
        or_node: NodeId,
        branch: usize,
        children: usize,
    },
    #[error("or-node {got} is not the next pending or-node (expected {expected:?})")]
    NotNextOrNode { expected: Option<NodeId>, got: NodeId },
    #[error("no or-node left to resolve")]
    NoPendingOrNode,
    #[error("unresolved choice at or-node {0}")]
    Unresolved(NodeId),
    #[error("graph has {nodes} nodes but the encoding layout holds {n_max}")]
    TooManyNodes { nodes: usize, n_max: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub node: Option<NodeId>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, node: Option<NodeId>, message: impl Into<String>) {
        self.violations.push(Violation {
            node,
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| match v.node {
                Some(id) => format!("node {id}: {}", v.message),
                None => v.message.clone(),
            })
            .collect();
        f.write_str(&parts.join("; "))
    }
}

impl TaskAog {
    pub fn node(&self, id: NodeId) -> &AogNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Checks every structural invariant and lists each violation.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let n = self.nodes.len();
        if n == 0 {
            report.push(None, "graph has no nodes");
            return report;
        }
        if self.root != 0 {
            report.push(Some(self.root), "root must have id 0");
        }
        for (idx, node) in self.nodes.iter().enumerate() {
            if node.id != idx {
                report.push(Some(idx), format!("stored id {} differs from index", node.id));
            }
            for &c in &node.children {
                if c >= n {
                    report.push(Some(idx), format!("child {c} does not exist"));
                }
            }
            match node.kind {
                NodeKind::Leaf => {
                    if !node.children.is_empty() {
                        report.push(Some(idx), "leaf must not have children");
                    }
                    if node.action.is_none() {
                        report.push(Some(idx), "leaf needs an atomic action");
                    }
                }
                NodeKind::And => {
                    if node.children.is_empty() {
                        report.push(Some(idx), "and-node needs ≥1 child");
                    }
                    if node.action.is_some() {
                        report.push(Some(idx), "and-node must not carry an action");
                    }
                }
                NodeKind::Or => {
                    if node.children.len() < 2 {
                        report.push(Some(idx), "or-node needs ≥2 children");
                    }
                    if node.children.len() > MAX_BRANCHES {
                        report.push(Some(idx), format!("exceeds B={MAX_BRANCHES} branches"));
                    }
                    if node.action.is_some() {
                        report.push(Some(idx), "or-node must not carry an action");
                    }
                }
            }
        }

        // Tree shape: each node has exactly one parent, except the root.
        let mut parents = vec![0usize; n];
        for node in &self.nodes {
            for &c in node.children.iter().filter(|&&c| c < n) {
                parents[c] += 1;
            }
        }
        if self.root >= n {
            report.push(Some(self.root), "root does not exist");
            return report;
        }
        for (idx, &p) in parents.iter().enumerate() {
            if idx == self.root {
                if p != 0 {
                    report.push(Some(idx), "root must not have a parent");
                }
            } else if p == 0 {
                report.push(Some(idx), "node is unreachable from root");
            } else if p > 1 {
                report.push(Some(idx), format!("node has {p} parents"));
            }
        }

        // Preorder numbering (also detects cycles and unreachable nodes).
        {
            let mut visited = vec![false; n];
            let mut stack = vec![self.root];
            let mut next = 0usize;
            while let Some(id) = stack.pop() {
                if visited[id] {
                    report.push(Some(id), "cycle or shared node in traversal");
                    continue;
                }
                visited[id] = true;
                if id != next {
                    report.push(Some(id), format!("id is not the preorder index {next}"));
                }
                next += 1;
                for &c in self.nodes[id].children.iter().rev().filter(|&&c| c < n) {
                    stack.push(c);
                }
            }
        }
        report
    }

    fn ensure_valid(&self) -> Result<(), GrammarError> {
        let report = self.validate();
        if report.is_valid() {
            Ok(())
        } else {
            Err(GrammarError::Invalid(report))
        }
    }

    /// Or-node ids in depth-first, left-to-right order.
    pub fn or_node_order(&self) -> Result<Vec<NodeId>, GrammarError> {
        self.ensure_valid()?;
        // Preorder ids make the traversal order identical to id order.
        let mut order = Vec::new();
        self.preorder(self.root, &mut |node| {
            if node.kind == NodeKind::Or {
                order.push(node.id);
            }
        });
        Ok(order)
    }

    fn preorder<'a>(&'a self, id: NodeId, visit: &mut impl FnMut(&'a AogNode)) {
        let node = &self.nodes[id];
        visit(node);
        for &c in &node.children {
            self.preorder(c, visit);
        }
    }

    /// Fresh, unpruned parse state over this graph.
    pub fn start_parse(&self) -> Result<PrunedAog<'_>, GrammarError> {
        self.ensure_valid()?;
        Ok(PrunedAog::new(self))
    }

    /// Number of sequences by the recursive count law:
    /// leaf = 1, and = product over children, or = sum over children.
    pub fn count_sequences(&self) -> u128 {
        fn count(aog: &TaskAog, id: NodeId) -> u128 {
            let node = aog.node(id);
            match node.kind {
                NodeKind::Leaf => 1,
                NodeKind::And => node.children.iter().map(|&c| count(aog, c)).product(),
                NodeKind::Or => node.children.iter().map(|&c| count(aog, c)).sum(),
            }
        }
        count(self, self.root)
    }

    /// Every parse obtainable by some combination of or-branch choices, in
    /// lexicographic order of the choices.
    pub fn enumerate_parses(&self) -> Result<Vec<ParseGraph>, GrammarError> {
        self.ensure_valid()?;
        type Partial = (Vec<Selection>, Vec<AtomicAction>);
        fn go(aog: &TaskAog, id: NodeId) -> Vec<Partial> {
            let node = aog.node(id);
            match node.kind {
                NodeKind::Leaf => vec![(Vec::new(), vec![node.action.expect("validated leaf")])],
                NodeKind::And => {
                    let mut acc: Vec<Partial> = vec![(Vec::new(), Vec::new())];
                    for &c in &node.children {
                        let parts = go(aog, c);
                        let mut next = Vec::with_capacity(acc.len() * parts.len());
                        for (sel, seq) in &acc {
                            for (csel, cseq) in &parts {
                                let mut s = sel.clone();
                                s.extend_from_slice(csel);
                                let mut q = seq.clone();
                                q.extend_from_slice(cseq);
                                next.push((s, q));
                            }
                        }
                        acc = next;
                    }
                    acc
                }
                NodeKind::Or => {
                    let mut out = Vec::new();
                    for (branch, &c) in node.children.iter().enumerate() {
                        for (csel, cseq) in go(aog, c) {
                            let mut s = vec![Selection { or_node: id, branch }];
                            s.extend(csel);
                            out.push((s, cseq));
                        }
                    }
                    out
                }
            }
        }
        Ok(go(self, self.root)
            .into_iter()
            .map(|(sel, sequence)| ParseGraph {
                task_id: self.task_id,
                selections: OrSelectionList(sel),
                sequence,
            })
            .collect())
    }

    /// The action sequences of [`TaskAog::enumerate_parses`].
    pub fn enumerate_sequences(&self) -> Result<Vec<Vec<AtomicAction>>, GrammarError> {
        Ok(self
            .enumerate_parses()?
            .into_iter()
            .map(|p| p.sequence)
            .collect())
    }

    /// Resolves every or-node with the given branches, in canonical order.
    pub fn parse_with(&self, branches: &[usize]) -> Result<ParseGraph, GrammarError> {
        let mut state = self.start_parse()?;
        for &b in branches {
            let next = state.next_or_node().ok_or(GrammarError::NoPendingOrNode)?;
            state.select(next, b)?;
        }
        state.into_parse()
    }

    /// Draws a branch uniformly at random at each pending or-node.
    pub fn sample_parse<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ParseGraph, GrammarError> {
        let mut state = self.start_parse()?;
        while let Some(or_id) = state.next_or_node() {
            let k = self.node(or_id).children.len();
            state.select(or_id, rng.gen_range(0..k))?;
        }
        state.into_parse()
    }

    /// Distinct atomic actions on the leaves.
    pub fn leaf_actions(&self) -> Vec<AtomicAction> {
        let mut out: Vec<AtomicAction> = self.nodes.iter().filter_map(|n| n.action).collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Leaf sequence of a parse graph (already linear by construction).
pub fn linearize(parse: &ParseGraph) -> &[AtomicAction] {
    &parse.sequence
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::AtomicAction;

    fn leaf(id: NodeId, a: u8, o: u8) -> AogNode {
        AogNode {
            id,
            kind: NodeKind::Leaf,
            children: vec![],
            action: Some(AtomicAction::new(a, o)),
            label: format!("leaf {id}"),
        }
    }

    fn inner(id: NodeId, kind: NodeKind, children: Vec<NodeId>) -> AogNode {
        AogNode {
            id,
            kind,
            children,
            action: None,
            label: format!("{kind:?} {id}"),
        }
    }

    pub(crate) fn graph(nodes: Vec<AogNode>) -> TaskAog {
        TaskAog {
            task_id: 0,
            name: "test".into(),
            root: 0,
            nodes,
        }
    }

    #[test]
    fn single_leaf_is_valid() {
        let g = graph(vec![leaf(0, 0, 0)]);
        assert!(g.validate().is_valid());
        assert_eq!(g.or_node_order().unwrap(), Vec::<NodeId>::new());
        assert_eq!(g.enumerate_sequences().unwrap(), vec![vec![AtomicAction::new(0, 0)]]);
    }

    #[test]
    fn or_with_one_child_is_flagged() {
        let g = graph(vec![inner(0, NodeKind::Or, vec![1]), leaf(1, 0, 0)]);
        let report = g.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| v.node == Some(0) && v.message == "or-node needs ≥2 children"));
    }

    #[test]
    fn or_with_four_children_is_flagged() {
        let g = graph(vec![
            inner(0, NodeKind::Or, vec![1, 2, 3, 4]),
            leaf(1, 0, 0),
            leaf(2, 1, 0),
            leaf(3, 2, 0),
            leaf(4, 3, 0),
        ]);
        let report = g.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| v.node == Some(0) && v.message == "exceeds B=3 branches"));
    }

    #[test]
    fn non_preorder_ids_and_cycles_are_flagged() {
        // children listed right-to-left relative to ids
        let g = graph(vec![inner(0, NodeKind::And, vec![2, 1]), leaf(1, 0, 0), leaf(2, 1, 0)]);
        assert!(!g.validate().is_valid());

        let cyclic = graph(vec![inner(0, NodeKind::And, vec![1]), inner(1, NodeKind::And, vec![0])]);
        assert!(!cyclic.validate().is_valid());

        let leaf_with_child = graph(vec![
            AogNode {
                children: vec![1],
                ..leaf(0, 0, 0)
            },
            leaf(1, 0, 0),
        ]);
        assert!(!leaf_with_child.validate().is_valid());
    }

    #[test]
    fn preorder_of_nested_or_nodes() {
        // And(Or_a(l, l), And(Or_b(l, l)))
        let g = graph(vec![
            inner(0, NodeKind::And, vec![1, 4]),
            inner(1, NodeKind::Or, vec![2, 3]),
            leaf(2, 0, 0),
            leaf(3, 1, 0),
            inner(4, NodeKind::And, vec![5]),
            inner(5, NodeKind::Or, vec![6, 7]),
            leaf(6, 2, 0),
            leaf(7, 3, 0),
        ]);
        assert_eq!(g.or_node_order().unwrap(), vec![1, 5]);
    }

    #[test]
    fn enumeration_counts() {
        // And(Or(2 leaves), Or(3 leaves)) → 6
        let g = graph(vec![
            inner(0, NodeKind::And, vec![1, 4]),
            inner(1, NodeKind::Or, vec![2, 3]),
            leaf(2, 0, 0),
            leaf(3, 1, 0),
            inner(4, NodeKind::Or, vec![5, 6, 7]),
            leaf(5, 2, 0),
            leaf(6, 3, 0),
            leaf(7, 4, 0),
        ]);
        let seqs = g.enumerate_sequences().unwrap();
        assert_eq!(seqs.len(), 6);
        assert_eq!(g.count_sequences(), 6);

        let two = graph(vec![inner(0, NodeKind::Or, vec![1, 2]), leaf(1, 0, 0), leaf(2, 1, 0)]);
        assert_eq!(two.enumerate_sequences().unwrap().len(), 2);
    }

    #[test]
    fn linearize_nested_and() {
        let g = graph(vec![
            inner(0, NodeKind::And, vec![1, 2]),
            leaf(1, 0, 0),
            inner(2, NodeKind::And, vec![3, 4]),
            leaf(3, 1, 1),
            leaf(4, 2, 2),
        ]);
        let parse = g.parse_with(&[]).unwrap();
        assert_eq!(
            linearize(&parse),
            &[AtomicAction::new(0, 0), AtomicAction::new(1, 1), AtomicAction::new(2, 2)]
        );
    }

    #[test]
    fn invalid_graph_is_a_structural_error() {
        let g = graph(vec![inner(0, NodeKind::Or, vec![1]), leaf(1, 0, 0)]);
        assert!(matches!(g.or_node_order(), Err(GrammarError::Invalid(_))));
    }

    #[test]
    fn selection_list_serializes_as_pairs() {
        let list = OrSelectionList(vec![
            Selection { or_node: 0, branch: 1 },
            Selection { or_node: 5, branch: 0 },
        ]);
        let json = serde_json::to_string(&list).unwrap();
        assert_eq!(json, "[[0,1],[5,0]]");
        let back: OrSelectionList = serde_json::from_str(&json).unwrap();
        assert_eq!(back, list);
    }
}
