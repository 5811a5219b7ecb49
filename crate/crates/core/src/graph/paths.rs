use serde::{Deserialize, Serialize};

use super::{CausalGraph, NodeId};

/// Directed simple path, stored as node ids (length >= 2 once validated).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Path(Vec<NodeId>);

pub type PathSet = Vec<Path>;

impl Path {
    pub(crate) fn from_ids(ids: Vec<NodeId>) -> Self {
        Path(ids)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    pub fn source(&self) -> NodeId {
        self.0[0]
    }

    pub fn target(&self) -> NodeId {
        self.0[self.0.len() - 1]
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.0.len() < 2
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }

    /// Nodes strictly between source and target.
    pub fn interior(&self) -> &[NodeId] {
        if self.0.len() <= 2 {
            &[]
        } else {
            &self.0[1..self.0.len() - 1]
        }
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.0.contains(&id)
    }
}

/// Every simple directed path from `src` to `dst`, in depth-first order
/// following each node's children in edge declaration order.
pub fn enumerate_paths(graph: &CausalGraph, src: NodeId, dst: NodeId) -> PathSet {
    let mut out = Vec::new();
    if src == dst {
        return out;
    }
    let mut on_path = vec![false; graph.len()];
    let mut stack = vec![src];
    on_path[src] = true;
    walk(graph, dst, &mut stack, &mut on_path, &mut out);
    out
}

fn walk(graph: &CausalGraph, dst: NodeId, stack: &mut Vec<NodeId>, on_path: &mut [bool], out: &mut PathSet) {
    let v = *stack.last().expect("non-empty stack");
    for &c in graph.children(v) {
        if on_path[c] {
            continue;
        }
        stack.push(c);
        if c == dst {
            out.push(Path(stack.clone()));
        } else {
            on_path[c] = true;
            walk(graph, dst, stack, on_path, out);
            on_path[c] = false;
        }
        stack.pop();
    }
}
