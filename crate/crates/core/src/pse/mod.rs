//! Path-specific effects for linear SEMs.
//!
//! A query fixes, for each intervened sensitive node, an observed value `a`
//! and a baseline `a'`, plus a set of paths π into the outcome. The nested
//! counterfactual propagates `a` along π and `a'` along every other edge.
//! Internally each node is evaluated in two lanes (baseline and π); an edge
//! feeds the π lane of its child from the π lane of its parent iff the edge
//! lies on a non-blocked path of π. A path is blocked when one of its interior
//! nodes is itself intervened: the intervention cuts it, so it contributes 0.
//!
//! Binary nodes enter on their log-odds (linear predictor) scale.

mod closed_form;
mod oracle;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CausalGraph, NodeId, Path};

pub use closed_form::{compute_pse_linear, counterfactual_mean, interventional_mean, path_coefficient_product};
pub use oracle::{
    mc_counterfactual_oracle, mc_counterfactual_oracle_with, NoiseCoupling, OracleEstimate, OracleOptions,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intervention {
    pub observed: f64,
    pub baseline: f64,
}

/// `{interventions: {node: {observed, baseline}}, paths: [[node, ...], ...]}`
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PseQuery {
    pub interventions: BTreeMap<String, Intervention>,
    #[serde(default)]
    pub paths: Vec<Vec<String>>,
}

impl PseQuery {
    pub fn new() -> Self {
        PseQuery::default()
    }

    pub fn intervene(mut self, node: &str, observed: f64, baseline: f64) -> Self {
        self.interventions
            .insert(node.to_string(), Intervention { observed, baseline });
        self
    }

    pub fn path(mut self, nodes: &[&str]) -> Self {
        self.paths.push(nodes.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn with_paths(mut self, graph: &CausalGraph, paths: &[Path]) -> Self {
        self.paths.extend(paths.iter().map(|p| graph.path_names(p)));
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(Error::from_json_syntax)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("query serializes")
    }

    /// Every observed value replaced by its baseline.
    pub fn at_baseline(&self) -> Self {
        let mut q = self.clone();
        for iv in q.interventions.values_mut() {
            iv.observed = iv.baseline;
        }
        q
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectScale {
    /// Linear-gaussian outcome: the effect is on the outcome itself.
    Identity,
    /// Binary outcome: the effect is on the log-odds.
    LogOdds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathContribution {
    pub path: Vec<String>,
    pub coefficient_product: f64,
    pub delta: f64,
    pub contribution: f64,
    /// An interior node is itself intervened, so the path carries nothing.
    pub blocked: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseResult {
    pub value: f64,
    pub per_path: Vec<PathContribution>,
    pub scale: EffectScale,
    /// Binary nodes whose logistic coefficients were used as linear effects.
    pub linearized_binary: Vec<String>,
}

impl PseResult {
    /// Sum of coefficient products of non-blocked paths, per origin node.
    pub fn origin_weights(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for c in &self.per_path {
            let w = out.entry(c.path[0].clone()).or_insert(0.0);
            if !c.blocked {
                *w += c.coefficient_product;
            }
        }
        out
    }

    pub fn odds_ratio(&self) -> Option<f64> {
        (self.scale == EffectScale::LogOdds).then(|| self.value.exp())
    }
}

/// A query checked against a graph.
#[derive(Clone, Debug)]
pub(crate) struct ResolvedQuery {
    /// `(observed, baseline)` per node id, for intervened nodes.
    pub fixed: Vec<Option<(f64, f64)>>,
    pub paths: Vec<Path>,
    pub blocked: Vec<bool>,
    /// `active[v][i]`: the edge from the `i`-th parent of `v` carries the π lane.
    pub active: Vec<Vec<bool>>,
}

pub(crate) fn resolve(graph: &CausalGraph, query: &PseQuery) -> Result<ResolvedQuery> {
    let mut fixed = vec![None; graph.len()];
    for (name, iv) in &query.interventions {
        let v = graph.require(name)?;
        if !graph.node(v).is_sensitive() {
            return Err(Error::Query(format!("intervened node `{name}` is not sensitive")));
        }
        if !iv.observed.is_finite() || !iv.baseline.is_finite() {
            return Err(Error::Query(format!("non-finite value for `{name}`")));
        }
        fixed[v] = Some((iv.observed, iv.baseline));
    }
    let mut paths: Vec<Path> = Vec::with_capacity(query.paths.len());
    for names in &query.paths {
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let p = graph.path(&names)?;
        if p.target() != graph.outcome() {
            return Err(Error::Query(format!(
                "path {} does not end at the outcome",
                graph.path_string(&p)
            )));
        }
        if fixed[p.source()].is_none() {
            return Err(Error::Query(format!(
                "origin of path {} is not intervened",
                graph.path_string(&p)
            )));
        }
        if paths.contains(&p) {
            return Err(Error::Query(format!("path {} listed twice", graph.path_string(&p))));
        }
        paths.push(p);
    }
    let blocked: Vec<bool> = paths
        .iter()
        .map(|p| p.interior().iter().any(|&v| fixed[v].is_some()))
        .collect();

    let mut active: Vec<Vec<bool>> = (0..graph.len()).map(|v| vec![false; graph.parents(v).len()]).collect();
    for (p, &b) in paths.iter().zip(&blocked) {
        if b {
            continue;
        }
        for (u, v) in p.edges() {
            let i = graph.parents(v).iter().position(|&x| x == u).expect("edge");
            active[v][i] = true;
        }
    }

    let resolved = ResolvedQuery {
        fixed,
        paths,
        blocked,
        active,
    };
    check_closed(graph, &resolved)?;
    Ok(resolved)
}

/// The lanes realise "observed value along every active-edge route". That
/// equals "observed value along exactly π" only when every route from an
/// intervened origin to the outcome over active edges is itself in π.
fn check_closed(graph: &CausalGraph, q: &ResolvedQuery) -> Result<()> {
    let y = graph.outcome();
    let unblocked: Vec<&Path> = q
        .paths
        .iter()
        .zip(&q.blocked)
        .filter(|(_, &b)| !b)
        .map(|(p, _)| p)
        .collect();
    let is_active = |u: NodeId, v: NodeId| {
        graph
            .parents(v)
            .iter()
            .position(|&x| x == u)
            .is_some_and(|i| q.active[v][i])
    };
    for origin in 0..graph.len() {
        if q.fixed[origin].is_none() {
            continue;
        }
        let mut stack = vec![origin];
        let mut found = Vec::new();
        active_routes(graph, y, &q.fixed, &is_active, &mut stack, &mut found);
        for route in found {
            if !unblocked.iter().any(|p| p.nodes() == route.as_slice()) {
                let names: Vec<&str> = route.iter().map(|&v| graph.name(v)).collect();
                return Err(Error::Query(format!(
                    "path set is not closed: {} is formed from edges of the listed paths \
                     but is not listed itself",
                    names.join("->")
                )));
            }
        }
    }
    Ok(())
}

fn active_routes(
    graph: &CausalGraph,
    y: NodeId,
    fixed: &[Option<(f64, f64)>],
    is_active: &dyn Fn(NodeId, NodeId) -> bool,
    stack: &mut Vec<NodeId>,
    found: &mut Vec<Vec<NodeId>>,
) {
    let v = *stack.last().expect("non-empty");
    for &c in graph.children(v) {
        if !is_active(v, c) || stack.contains(&c) {
            continue;
        }
        if c == y {
            let mut route = stack.clone();
            route.push(c);
            found.push(route);
        } else if fixed[c].is_none() {
            stack.push(c);
            active_routes(graph, y, fixed, is_active, stack, found);
            stack.pop();
        }
    }
}
