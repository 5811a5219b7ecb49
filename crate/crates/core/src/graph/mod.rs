//! Causal graphs over typed variables with individual- and macro-level
//! sensitive attributes.
//!
//! A [`CausalGraph`] is structurally checked on construction (names, edges,
//! unfair paths, exactly one outcome). Acyclicity and the multi-level
//! identification conditions are separate checks in [`validate`], so that
//! failing graphs can still be built and diagnosed.

mod paths;
mod spec;
mod validate;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use paths::{enumerate_paths, Path, PathSet};
pub use spec::{parse_graph_spec, serialize_graph_spec, EdgeSpec, GraphSpec};
pub use validate::{check_multilevel_identifiability, topological_order, validate_dag, Violation};

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    Individual,
    Macro,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sensitivity {
    Sensitive,
    Nonsensitive,
    Outcome,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    LinearGaussian,
    BernoulliLogistic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MacroCategory {
    /// Group property that is not a summary of its members (nationality).
    Nonaggregate,
    /// Summary of individual properties (mean neighbourhood income).
    Aggregate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    pub level: Level,
    pub sensitivity: Sensitivity,
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub macro_category: Option<MacroCategory>,
}

impl NodeSpec {
    pub fn individual(name: &str, sensitivity: Sensitivity, family: Family) -> Self {
        NodeSpec {
            name: name.to_string(),
            level: Level::Individual,
            sensitivity,
            family,
            macro_category: None,
        }
    }

    pub fn macro_level(name: &str, sensitivity: Sensitivity, family: Family, category: MacroCategory) -> Self {
        NodeSpec {
            name: name.to_string(),
            level: Level::Macro,
            sensitivity,
            family,
            macro_category: Some(category),
        }
    }

    pub fn is_binary(&self) -> bool {
        self.family == Family::BernoulliLogistic
    }

    pub fn is_sensitive(&self) -> bool {
        self.sensitivity == Sensitivity::Sensitive
    }
}

#[derive(Clone, Debug)]
pub struct CausalGraph {
    nodes: Vec<NodeSpec>,
    index: HashMap<String, NodeId>,
    edges: Vec<(NodeId, NodeId)>,
    parents: Vec<Vec<NodeId>>,
    children: Vec<Vec<NodeId>>,
    unfair_paths: PathSet,
    outcome: NodeId,
}

impl PartialEq for CausalGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges && self.unfair_paths == other.unfair_paths
    }
}

impl CausalGraph {
    /// Builds a structurally well-formed graph. Cycles are not rejected here;
    /// see [`validate_dag`].
    pub fn new<S: AsRef<str>>(nodes: Vec<NodeSpec>, edges: &[(S, S)], unfair_paths: &[Vec<S>]) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if node.name.is_empty() {
                return Err(Error::InvalidNode {
                    node: node.name.clone(),
                    reason: "empty name".into(),
                });
            }
            if index.insert(node.name.clone(), i).is_some() {
                return Err(Error::DuplicateNode(node.name.clone()));
            }
            match (node.level, node.macro_category) {
                (Level::Individual, Some(_)) => {
                    return Err(Error::InvalidNode {
                        node: node.name.clone(),
                        reason: "macro_category is only allowed on macro-level nodes".into(),
                    })
                }
                (Level::Macro, None) => {
                    return Err(Error::InvalidNode {
                        node: node.name.clone(),
                        reason: "macro-level node requires macro_category".into(),
                    })
                }
                _ => {}
            }
        }
        let outcomes: Vec<NodeId> = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.sensitivity == Sensitivity::Outcome)
            .map(|(i, _)| i)
            .collect();
        if outcomes.len() != 1 {
            return Err(Error::OutcomeCount(outcomes.len()));
        }

        let lookup = |name: &str| -> Result<NodeId> {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::UnknownNode(name.to_string()))
        };
        let mut edge_ids = Vec::with_capacity(edges.len());
        let mut parents = vec![Vec::new(); nodes.len()];
        let mut children = vec![Vec::new(); nodes.len()];
        for (from, to) in edges {
            let (u, v) = (lookup(from.as_ref())?, lookup(to.as_ref())?);
            if u == v {
                return Err(Error::SelfLoop(nodes[u].name.clone()));
            }
            if parents[v].contains(&u) {
                return Err(Error::DuplicateEdge(nodes[u].name.clone(), nodes[v].name.clone()));
            }
            edge_ids.push((u, v));
            parents[v].push(u);
            children[u].push(v);
        }

        let mut graph = CausalGraph {
            nodes,
            index,
            edges: edge_ids,
            parents,
            children,
            unfair_paths: Vec::new(),
            outcome: outcomes[0],
        };
        let mut unfair = Vec::with_capacity(unfair_paths.len());
        for names in unfair_paths {
            let names: Vec<&str> = names.iter().map(|s| s.as_ref()).collect();
            let path = graph.path(&names)?;
            let origin = path.source();
            if !graph.nodes[origin].is_sensitive() {
                return Err(Error::InvalidPath {
                    path: graph.path_string(&path),
                    reason: "unfair path must originate at a sensitive node".into(),
                });
            }
            if path.target() != graph.outcome {
                return Err(Error::InvalidPath {
                    path: graph.path_string(&path),
                    reason: "unfair path must terminate at the outcome".into(),
                });
            }
            if unfair.contains(&path) {
                return Err(Error::InvalidPath {
                    path: graph.path_string(&path),
                    reason: "listed twice".into(),
                });
            }
            unfair.push(path);
        }
        graph.unfair_paths = unfair;
        Ok(graph)
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &NodeSpec {
        &self.nodes[id]
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id].name
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<NodeId> {
        self.id(name).ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn edge_names(&self) -> Vec<(String, String)> {
        self.edges
            .iter()
            .map(|&(u, v)| (self.nodes[u].name.clone(), self.nodes[v].name.clone()))
            .collect()
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.parents[to].contains(&from)
    }

    /// Parents in edge declaration order.
    pub fn parents(&self, id: NodeId) -> &[NodeId] {
        &self.parents[id]
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id]
    }

    pub fn outcome(&self) -> NodeId {
        self.outcome
    }

    pub fn unfair_paths(&self) -> &[Path] {
        &self.unfair_paths
    }

    /// Unfair paths whose origin is one of `origins`.
    pub fn unfair_paths_from(&self, origins: &[NodeId]) -> PathSet {
        self.unfair_paths
            .iter()
            .filter(|p| origins.contains(&p.source()))
            .cloned()
            .collect()
    }

    pub fn sensitive_nodes(&self) -> Vec<NodeId> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].is_sensitive())
            .collect()
    }

    /// Resolve a node-name sequence into a validated directed path.
    pub fn path(&self, names: &[&str]) -> Result<Path> {
        let display = names.join("->");
        if names.len() < 2 {
            return Err(Error::InvalidPath {
                path: display,
                reason: "a path needs at least two nodes".into(),
            });
        }
        let ids = names.iter().map(|n| self.require(n)).collect::<Result<Vec<_>>>()?;
        for (i, &v) in ids.iter().enumerate() {
            if ids[..i].contains(&v) {
                return Err(Error::InvalidPath {
                    path: display,
                    reason: format!("node `{}` repeated", self.name(v)),
                });
            }
        }
        for w in ids.windows(2) {
            if !self.has_edge(w[0], w[1]) {
                return Err(Error::InvalidPath {
                    path: display,
                    reason: format!("no edge {} -> {}", self.name(w[0]), self.name(w[1])),
                });
            }
        }
        Ok(Path::from_ids(ids))
    }

    pub fn path_string(&self, path: &Path) -> String {
        path.nodes()
            .iter()
            .map(|&v| self.name(v))
            .collect::<Vec<_>>()
            .join("->")
    }

    pub fn path_names(&self, path: &Path) -> Vec<String> {
        path.nodes().iter().map(|&v| self.name(v).to_string()).collect()
    }

    /// Ancestors of `id` (excluding itself).
    pub fn ancestors(&self, id: NodeId) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<NodeId> = self.parents[id].clone();
        while let Some(v) = stack.pop() {
            if !seen[v] {
                seen[v] = true;
                stack.extend_from_slice(&self.parents[v]);
            }
        }
        seen
    }
}

impl fmt::Display for CausalGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} nodes, {} edges", self.nodes.len(), self.edges.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lg(name: &str, s: Sensitivity) -> NodeSpec {
        NodeSpec::individual(name, s, Family::LinearGaussian)
    }

    #[test]
    fn builds_and_indexes() {
        let g = CausalGraph::new(
            vec![lg("X", Sensitivity::Sensitive), lg("Y", Sensitivity::Outcome)],
            &[("X", "Y")],
            &[vec!["X", "Y"]],
        )
        .unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.outcome(), 1);
        assert_eq!(g.parents(1), &[0]);
        assert_eq!(g.unfair_paths().len(), 1);
    }

    #[test]
    fn rejects_self_loop() {
        let err = CausalGraph::new(vec![lg("Y", Sensitivity::Outcome)], &[("Y", "Y")], &[]).unwrap_err();
        assert!(matches!(err, Error::SelfLoop(ref n) if n == "Y"));
    }

    #[test]
    fn rejects_duplicate_and_unknown() {
        let dup = CausalGraph::new(
            vec![lg("Y", Sensitivity::Outcome), lg("Y", Sensitivity::Nonsensitive)],
            &[] as &[(&str, &str)],
            &[],
        );
        assert!(matches!(dup, Err(Error::DuplicateNode(_))));
        let unknown = CausalGraph::new(vec![lg("Y", Sensitivity::Outcome)], &[("Q", "Y")], &[]);
        assert!(matches!(unknown, Err(Error::UnknownNode(ref n)) if n == "Q"));
    }

    #[test]
    fn requires_single_outcome() {
        let none = CausalGraph::new(vec![lg("X", Sensitivity::Sensitive)], &[] as &[(&str, &str)], &[]);
        assert!(matches!(none, Err(Error::OutcomeCount(0))));
    }

    #[test]
    fn unfair_path_must_start_sensitive_and_end_at_outcome() {
        let nodes = vec![
            lg("X", Sensitivity::Nonsensitive),
            lg("M", Sensitivity::Nonsensitive),
            lg("Y", Sensitivity::Outcome),
        ];
        let edges = [("X", "M"), ("M", "Y")];
        let err = CausalGraph::new(nodes.clone(), &edges, &[vec!["X", "M", "Y"]]).unwrap_err();
        assert!(matches!(err, Error::InvalidPath { .. }));
        let mut nodes = nodes;
        nodes[0].sensitivity = Sensitivity::Sensitive;
        let err = CausalGraph::new(nodes.clone(), &edges, &[vec!["X", "M"]]).unwrap_err();
        assert!(matches!(err, Error::InvalidPath { .. }));
        let err = CausalGraph::new(nodes, &edges, &[vec!["X", "Y"]]).unwrap_err();
        assert!(matches!(err, Error::InvalidPath { .. }));
    }

    #[test]
    fn macro_category_presence_follows_level() {
        let mut bad = lg("X", Sensitivity::Sensitive);
        bad.macro_category = Some(MacroCategory::Aggregate);
        let err = CausalGraph::new(vec![bad, lg("Y", Sensitivity::Outcome)], &[] as &[(&str, &str)], &[]);
        assert!(matches!(err, Err(Error::InvalidNode { .. })));
    }
}
