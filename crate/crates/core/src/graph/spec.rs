//! JSON graph-spec documents.
//!
//! ```json
//! {
//!   "nodes": [{"name": "A", "level": "individual", "sensitivity": "sensitive",
//!              "family": "bernoulli-logistic"}, ...],
//!   "edges": [{"from": "A", "to": "Y"}],
//!   "unfair_paths": [["A", "Y"]]
//! }
//! ```

use serde::{Deserialize, Serialize};

use super::{validate_dag, CausalGraph, NodeSpec};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
    #[serde(default)]
    pub unfair_paths: Vec<Vec<String>>,
}

impl GraphSpec {
    pub fn from_graph(graph: &CausalGraph) -> Self {
        GraphSpec {
            nodes: graph.nodes().to_vec(),
            edges: graph
                .edge_names()
                .into_iter()
                .map(|(from, to)| EdgeSpec { from, to })
                .collect(),
            unfair_paths: graph.unfair_paths().iter().map(|p| graph.path_names(p)).collect(),
        }
    }

    pub fn build(self) -> Result<CausalGraph> {
        let edges: Vec<(String, String)> = self.edges.into_iter().map(|e| (e.from, e.to)).collect();
        CausalGraph::new(self.nodes, &edges, &self.unfair_paths)
    }
}

/// Parse and validate a graph-spec document. Cycles are rejected.
pub fn parse_graph_spec(text: &str) -> Result<CausalGraph> {
    let spec: GraphSpec = serde_json::from_str(text).map_err(Error::from_json_syntax)?;
    let graph = spec.build()?;
    validate_dag(&graph).map_err(|v| Error::Cycle(v.to_string()))?;
    Ok(graph)
}

pub fn serialize_graph_spec(graph: &CausalGraph) -> String {
    serde_json::to_string_pretty(&GraphSpec::from_graph(graph)).expect("graph spec serializes")
}
