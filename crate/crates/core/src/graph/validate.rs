use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use super::{CausalGraph, Level, MacroCategory, NodeId};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// Witness cycle, first node repeated at the end.
    Cycle(Vec<String>),
    IndividualParentOfMacro {
        parent: String,
        child: String,
    },
    AggregateMacro(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle(nodes) => write!(f, "directed cycle {}", nodes.join(" -> ")),
            Violation::IndividualParentOfMacro { parent, child } => write!(
                f,
                "individual-level node `{parent}` is a parent of macro-level sensitive node `{child}` (edge {parent} -> {child})"
            ),
            Violation::AggregateMacro(node) => write!(
                f,
                "macro-level sensitive node `{node}` is an aggregate (Category-2) macro attribute"
            ),
        }
    }
}

impl std::error::Error for Violation {}

/// `Ok` iff the graph has no directed cycle; otherwise one witnessing cycle.
pub fn validate_dag(graph: &CausalGraph) -> std::result::Result<(), Violation> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let n = graph.len();
    let mut mark = vec![Mark::New; n];
    let mut stack: Vec<NodeId> = Vec::new();
    // Iterative DFS: frame = (node, next child index).
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        let mut frames: Vec<(NodeId, usize)> = vec![(root, 0)];
        mark[root] = Mark::Open;
        stack.push(root);
        while let Some(top) = frames.last_mut() {
            let v = top.0;
            let children = graph.children(v);
            if top.1 < children.len() {
                let c = children[top.1];
                top.1 += 1;
                match mark[c] {
                    Mark::New => {
                        mark[c] = Mark::Open;
                        stack.push(c);
                        frames.push((c, 0));
                    }
                    Mark::Open => {
                        let start = stack.iter().position(|&x| x == c).expect("open node on stack");
                        let mut cycle: Vec<String> =
                            stack[start..].iter().map(|&x| graph.name(x).to_string()).collect();
                        cycle.push(graph.name(c).to_string());
                        return Err(Violation::Cycle(cycle));
                    }
                    Mark::Done => {}
                }
            } else {
                mark[v] = Mark::Done;
                stack.pop();
                frames.pop();
            }
        }
    }
    Ok(())
}

/// Kahn's algorithm, always releasing the earliest-declared ready node.
pub fn topological_order(graph: &CausalGraph) -> Result<Vec<NodeId>> {
    let n = graph.len();
    let mut indegree: Vec<usize> = (0..n).map(|v| graph.parents(v).len()).collect();
    let mut ready: BinaryHeap<Reverse<NodeId>> = (0..n).filter(|&v| indegree[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for &c in graph.children(v) {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() != n {
        let witness = match validate_dag(graph) {
            Err(v) => v.to_string(),
            Ok(()) => "unresolved dependency".to_string(),
        };
        return Err(Error::Cycle(witness));
    }
    Ok(order)
}

/// Multi-level identification conditions: no individual-level node is a
/// parent of a macro-level sensitive node, every macro-level sensitive node
/// is a non-aggregate property, and the graph is acyclic.
pub fn check_multilevel_identifiability(graph: &CausalGraph) -> std::result::Result<(), Violation> {
    for (v, node) in graph.nodes().iter().enumerate() {
        if node.level != Level::Macro || !node.is_sensitive() {
            continue;
        }
        for &p in graph.parents(v) {
            if graph.node(p).level == Level::Individual {
                return Err(Violation::IndividualParentOfMacro {
                    parent: graph.name(p).to_string(),
                    child: node.name.clone(),
                });
            }
        }
        if node.macro_category != Some(MacroCategory::Nonaggregate) {
            return Err(Violation::AggregateMacro(node.name.clone()));
        }
    }
    validate_dag(graph)
}
