//! Canonical graphs used by the studies, tests and benches.
//!
//! `A_P` is a macro-level sensitive attribute, `P` a macro-level covariate,
//! `A_I` an individual-level sensitive attribute, `I` an individual-level
//! covariate and `Y` the outcome.

use crate::graph::{CausalGraph, Family, MacroCategory, NodeSpec, Sensitivity};

pub const MULTILEVEL_EDGES: [(&str, &str); 8] = [
    ("A_P", "P"),
    ("A_P", "I"),
    ("A_P", "A_I"),
    ("P", "A_I"),
    ("P", "Y"),
    ("A_I", "I"),
    ("A_I", "Y"),
    ("I", "Y"),
];

/// Every path into `Y` through `I`. `A_I -> Y` and `P -> Y` are fair.
pub fn multilevel_unfair_paths() -> Vec<Vec<&'static str>> {
    vec![
        vec!["A_P", "I", "Y"],
        vec!["A_P", "A_I", "I", "Y"],
        vec!["A_P", "P", "A_I", "I", "Y"],
        vec!["A_I", "I", "Y"],
    ]
}

pub fn multilevel_nodes() -> Vec<NodeSpec> {
    vec![
        NodeSpec::macro_level(
            "A_P",
            Sensitivity::Sensitive,
            Family::BernoulliLogistic,
            MacroCategory::Nonaggregate,
        ),
        NodeSpec::macro_level(
            "P",
            Sensitivity::Nonsensitive,
            Family::LinearGaussian,
            MacroCategory::Nonaggregate,
        ),
        NodeSpec::individual("A_I", Sensitivity::Sensitive, Family::BernoulliLogistic),
        NodeSpec::individual("I", Sensitivity::Nonsensitive, Family::LinearGaussian),
        NodeSpec::individual("Y", Sensitivity::Outcome, Family::BernoulliLogistic),
    ]
}

/// Macro and individual sensitive attributes interacting through `P` and `I`.
pub fn multilevel_graph() -> CausalGraph {
    CausalGraph::new(multilevel_nodes(), &MULTILEVEL_EDGES, &multilevel_unfair_paths())
        .expect("multilevel fixture is well formed")
}

/// Same structure with a linear-gaussian outcome.
pub fn multilevel_graph_gaussian_outcome() -> CausalGraph {
    let mut nodes = multilevel_nodes();
    nodes[4].family = Family::LinearGaussian;
    CausalGraph::new(nodes, &MULTILEVEL_EDGES, &multilevel_unfair_paths()).expect("multilevel fixture is well formed")
}

/// An aggregate macro attribute caused by individual income:
/// `I -> A_P -> P -> I` closes a cycle.
pub fn cyclic_macro_graph() -> CausalGraph {
    CausalGraph::new(
        vec![
            NodeSpec::macro_level(
                "A_P",
                Sensitivity::Sensitive,
                Family::LinearGaussian,
                MacroCategory::Aggregate,
            ),
            NodeSpec::macro_level(
                "P",
                Sensitivity::Nonsensitive,
                Family::LinearGaussian,
                MacroCategory::Nonaggregate,
            ),
            NodeSpec::individual("I", Sensitivity::Nonsensitive, Family::LinearGaussian),
            NodeSpec::individual("Y", Sensitivity::Outcome, Family::LinearGaussian),
        ],
        &[
            ("I", "A_P"),
            ("A_P", "P"),
            ("P", "I"),
            ("A_P", "Y"),
            ("P", "Y"),
            ("I", "Y"),
        ],
        &[] as &[Vec<&str>],
    )
    .expect("cyclic fixture is structurally well formed")
}
