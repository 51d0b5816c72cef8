use super::{GrammarError, NodeId, NodeKind, OrSelectionList, ParseGraph, Selection, TaskAog};
use crate::vocab::AtomicAction;

/// A task graph with a prefix of its or-nodes resolved.
///
/// Resolving an or-node drops every unselected child subtree. Surviving nodes
/// keep their ids; removed ids stay in the index space and encode as zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrunedAog<'a> {
    aog: &'a TaskAog,
    alive: Vec<bool>,
    chosen: Vec<Option<usize>>,
    pending: Vec<NodeId>,
    selections: Vec<Selection>,
}

impl<'a> PrunedAog<'a> {
    pub(super) fn new(aog: &'a TaskAog) -> Self {
        let pending = aog
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Or)
            .map(|n| n.id)
            .collect();
        PrunedAog {
            aog,
            alive: vec![true; aog.nodes.len()],
            chosen: vec![None; aog.nodes.len()],
            pending,
            selections: Vec::new(),
        }
    }

    pub fn aog(&self) -> &'a TaskAog {
        self.aog
    }

    pub fn is_alive(&self, id: NodeId) -> bool {
        self.alive[id]
    }

    /// Surviving children of a surviving node.
    pub fn children(&self, id: NodeId) -> Vec<NodeId> {
        let node = self.aog.node(id);
        match self.chosen[id] {
            Some(b) => vec![node.children[b]],
            None => node.children.clone(),
        }
    }

    /// Unresolved or-nodes still reachable, in canonical order.
    pub fn or_node_order(&self) -> &[NodeId] {
        &self.pending
    }

    pub fn next_or_node(&self) -> Option<NodeId> {
        self.pending.first().copied()
    }

    pub fn is_fully_pruned(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn selections(&self) -> OrSelectionList {
        OrSelectionList(self.selections.clone())
    }

    /// Keeps only `branch` below `or_id`, which must be the next pending or-node.
    pub fn select(&mut self, or_id: NodeId, branch: usize) -> Result<(), GrammarError> {
        let expected = self.next_or_node();
        if expected != Some(or_id) {
            return Err(GrammarError::NotNextOrNode { expected, got: or_id });
        }
        let node = self.aog.node(or_id);
        if branch >= node.children.len() {
            return Err(GrammarError::BranchOutOfRange {
                or_node: or_id,
                branch,
                children: node.children.len(),
            });
        }
        for (b, &c) in node.children.iter().enumerate() {
            if b != branch {
                self.remove_subtree(c);
            }
        }
        self.chosen[or_id] = Some(branch);
        self.selections.push(Selection { or_node: or_id, branch });
        self.pending.remove(0);
        let alive = &self.alive;
        self.pending.retain(|&id| alive[id]);
        Ok(())
    }

    /// Non-mutating form of [`PrunedAog::select`].
    pub fn apply_selection(&self, or_id: NodeId, branch: usize) -> Result<PrunedAog<'a>, GrammarError> {
        let mut next = self.clone();
        next.select(or_id, branch)?;
        Ok(next)
    }

    fn remove_subtree(&mut self, id: NodeId) {
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            self.alive[n] = false;
            stack.extend_from_slice(&self.aog.node(n).children);
        }
    }

    /// Left-to-right leaf sequence; fails while any choice is unresolved.
    pub fn linearize(&self) -> Result<Vec<AtomicAction>, GrammarError> {
        if let Some(&id) = self.pending.first() {
            return Err(GrammarError::Unresolved(id));
        }
        let mut out = Vec::new();
        let mut stack = vec![self.aog.root];
        while let Some(id) = stack.pop() {
            let node = self.aog.node(id);
            if let Some(a) = node.action {
                out.push(a);
            }
            for c in self.children(id).into_iter().rev() {
                stack.push(c);
            }
        }
        Ok(out)
    }

    pub fn into_parse(self) -> Result<ParseGraph, GrammarError> {
        let sequence = self.linearize()?;
        Ok(ParseGraph {
            task_id: self.aog.task_id,
            selections: OrSelectionList(self.selections),
            sequence,
        })
    }
}
