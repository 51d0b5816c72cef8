use serde::{Deserialize, Serialize};

use super::{GrammarError, NodeKind, PrunedAog, TaskAog};
use crate::vocab::FACTOR_CLASSES;

/// Fixed vector layout shared by every task graph.
///
/// `[ M (n_max × n_max, row-major) | node 0 features | … | node n_max-1 features ]`
/// where each node feature is `type one-hot (and, or, leaf) ++ action one-hot ++
/// object one-hot`. `M[i][j]` is 1 for an and-edge, 2 for an or-edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AogEncodingLayout {
    pub n_max: usize,
    pub node_feat_dim: usize,
    pub total_dim: usize,
}

impl AogEncodingLayout {
    pub fn new(n_max: usize) -> Self {
        let node_feat_dim = 3 + 2 * FACTOR_CLASSES;
        AogEncodingLayout {
            n_max,
            node_feat_dim,
            total_dim: n_max * n_max + n_max * node_feat_dim,
        }
    }

    /// Sized for the largest graph in `graphs`.
    pub fn fit<'a>(graphs: impl IntoIterator<Item = &'a TaskAog>) -> Self {
        Self::new(graphs.into_iter().map(TaskAog::len).max().unwrap_or(0))
    }

    fn adjacency_index(&self, i: usize, j: usize) -> usize {
        i * self.n_max + j
    }

    fn feature_offset(&self, node: usize) -> usize {
        self.n_max * self.n_max + node * self.node_feat_dim
    }

    /// Nonzero entries of the encoding, sorted by index.
    pub fn encode_sparse(&self, graph: &PrunedAog<'_>) -> Result<Vec<(usize, f64)>, GrammarError> {
        let aog = graph.aog();
        if aog.len() > self.n_max {
            return Err(GrammarError::TooManyNodes {
                nodes: aog.len(),
                n_max: self.n_max,
            });
        }
        let mut entries = Vec::new();
        for node in aog.nodes.iter().filter(|n| graph.is_alive(n.id)) {
            let edge = match node.kind {
                NodeKind::And => 1.0,
                NodeKind::Or => 2.0,
                NodeKind::Leaf => 0.0,
            };
            if edge != 0.0 {
                for c in graph.children(node.id) {
                    entries.push((self.adjacency_index(node.id, c), edge));
                }
            }
        }
        for node in aog.nodes.iter().filter(|n| graph.is_alive(n.id)) {
            let base = self.feature_offset(node.id);
            entries.push((base + node.kind.index(), 1.0));
            if let Some(a) = node.action {
                entries.push((base + 3 + a.action.0 as usize, 1.0));
                entries.push((base + 3 + FACTOR_CLASSES + a.object.0 as usize, 1.0));
            }
        }
        entries.sort_by_key(|e| e.0);
        Ok(entries)
    }
}

/// Dense encoding of a (possibly pruned) graph.
pub fn encode_aog(graph: &PrunedAog<'_>, layout: &AogEncodingLayout) -> Result<Vec<f64>, GrammarError> {
    let mut out = vec![0.0; layout.total_dim];
    for (i, v) in layout.encode_sparse(graph)? {
        out[i] = v;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{AogNode, Catalog};
    use crate::vocab::AtomicAction;

    fn three(root: NodeKind) -> TaskAog {
        let leaf = |id, a, o| AogNode {
            id,
            kind: NodeKind::Leaf,
            children: vec![],
            action: Some(AtomicAction::new(a, o)),
            label: String::new(),
        };
        TaskAog {
            task_id: 0,
            name: "t".into(),
            root: 0,
            nodes: vec![
                AogNode {
                    id: 0,
                    kind: root,
                    children: vec![1, 2],
                    action: None,
                    label: String::new(),
                },
                leaf(1, 0, 0),
                leaf(2, 1, 3),
            ],
        }
    }

    fn adjacency(v: &[f64], n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| v[i * n..(i + 1) * n].to_vec()).collect()
    }

    #[test]
    fn and_root_adjacency() {
        let g = three(NodeKind::And);
        let layout = AogEncodingLayout::new(3);
        let v = encode_aog(&g.start_parse().unwrap(), &layout).unwrap();
        assert_eq!(v.len(), layout.total_dim);
        assert_eq!(
            adjacency(&v, 3),
            vec![vec![0.0, 1.0, 1.0], vec![0.0; 3], vec![0.0; 3]]
        );
        // node 0: and one-hot, zero action/object
        let f0 = &v[9..9 + 33];
        assert_eq!(f0[0], 1.0);
        assert!(f0[1..].iter().all(|&x| x == 0.0));
        // node 2: leaf, action 1, object 3
        let f2 = &v[9 + 66..9 + 99];
        assert_eq!(f2[2], 1.0);
        assert_eq!(f2[3 + 1], 1.0);
        assert_eq!(f2[3 + 15 + 3], 1.0);
        assert_eq!(f2.iter().sum::<f64>(), 3.0);
    }

    #[test]
    fn or_root_uses_two() {
        let g = three(NodeKind::Or);
        let v = encode_aog(&g.start_parse().unwrap(), &AogEncodingLayout::new(3)).unwrap();
        assert_eq!(&v[0..3], &[0.0, 2.0, 2.0]);
    }

    #[test]
    fn pruning_zeroes_only_removed_slots() {
        let g = three(NodeKind::Or);
        let layout = AogEncodingLayout::new(3);
        let before = encode_aog(&g.start_parse().unwrap(), &layout).unwrap();
        let after = encode_aog(&g.start_parse().unwrap().apply_selection(0, 0).unwrap(), &layout).unwrap();
        let n = 3;
        for idx in 0..layout.total_dim {
            let removed = if idx < n * n {
                idx / n == 2 || idx % n == 2
            } else {
                (idx - n * n) / layout.node_feat_dim == 2
            };
            if removed {
                assert_eq!(after[idx], 0.0, "slot {idx}");
            } else {
                assert_eq!(after[idx], before[idx], "slot {idx}");
            }
        }
    }

    #[test]
    fn oversized_graph_is_rejected() {
        let g = three(NodeKind::And);
        let err = encode_aog(&g.start_parse().unwrap(), &AogEncodingLayout::new(2)).unwrap_err();
        assert_eq!(err, GrammarError::TooManyNodes { nodes: 3, n_max: 2 });
    }

    #[test]
    fn catalog_layout_fits_every_graph() {
        let cat = Catalog::builtin();
        let layout = cat.layout();
        assert_eq!(layout.node_feat_dim, 33);
        assert_eq!(layout.total_dim, layout.n_max * layout.n_max + layout.n_max * 33);
        for g in &cat.tasks {
            let v = encode_aog(&g.start_parse().unwrap(), &layout).unwrap();
            assert_eq!(v.len(), layout.total_dim);
        }
    }
}
