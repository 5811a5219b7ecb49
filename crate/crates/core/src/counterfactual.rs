//! Path-specific counterfactual datasets by abduction, action and prediction.
//!
//! Every node is carried in two lanes: the factual lane is the observed
//! column, the counterfactual lane is re-evaluated in topological order. An
//! edge feeds the counterfactual lane of its child from the counterfactual
//! lane of its parent iff it lies on a scope path that is not cut by another
//! flipped node; every other edge feeds the factual value. Exogenous noise is
//! shared between the lanes; binary nodes reuse their uniform latent.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{fill_indexed, ExecPolicy};
use crate::graph::{CausalGraph, NodeId};
use crate::pse::PseQuery;
use crate::rng::StreamKey;
use crate::sem::{sigmoid, Dataset, SemModel};

/// Seed of the uniform draws used when abducting binary latents.
pub const ABDUCTION_SEED: u64 = 0xABD0_C7ED;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseSource {
    /// Use the noise record stored with the dataset.
    #[default]
    Recorded,
    /// Infer the noise from the observations under the model.
    Abducted,
}

/// `{flips: {node: value}, scope: [[node, ...], ...], noise_source}`
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterfactualConfig {
    pub flips: BTreeMap<String, f64>,
    #[serde(default)]
    pub scope: Vec<Vec<String>>,
    #[serde(default)]
    pub noise_source: NoiseSource,
}

impl CounterfactualConfig {
    pub fn new() -> Self {
        CounterfactualConfig::default()
    }

    pub fn flip(mut self, node: &str, value: f64) -> Self {
        self.flips.insert(node.to_string(), value);
        self
    }

    pub fn path(mut self, nodes: &[&str]) -> Self {
        self.scope.push(nodes.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn noise_source(mut self, source: NoiseSource) -> Self {
        self.noise_source = source;
        self
    }

    /// Flip each intervened node of `query` to its baseline along the query's paths.
    pub fn for_query(query: &PseQuery) -> Self {
        CounterfactualConfig {
            flips: query
                .interventions
                .iter()
                .map(|(k, iv)| (k.clone(), iv.baseline))
                .collect(),
            scope: query.paths.clone(),
            noise_source: NoiseSource::Recorded,
        }
    }

    /// Scope = the graph's unfair paths that start at a flipped node.
    pub fn along_unfair_paths(graph: &CausalGraph, flips: &[(&str, f64)]) -> Result<Self> {
        let mut ids = Vec::with_capacity(flips.len());
        let mut cfg = CounterfactualConfig::new();
        for &(name, value) in flips {
            ids.push(graph.require(name)?);
            cfg.flips.insert(name.to_string(), value);
        }
        cfg.scope = graph
            .unfair_paths_from(&ids)
            .iter()
            .map(|p| graph.path_names(p))
            .collect();
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(Error::from_json_syntax)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// A counterfactual dataset plus the view of it seen by the outcome equation:
/// the outcome's parents hold the counterfactual value where the edge into
/// the outcome is routed, the factual value otherwise.
#[derive(Clone, Debug)]
pub struct CounterfactualWorld {
    pub data: Dataset,
    pub outcome_view: Dataset,
}

struct Routing {
    flips: Vec<Option<f64>>,
    active: Vec<Vec<bool>>,
}

fn route(graph: &CausalGraph, config: &CounterfactualConfig) -> Result<Routing> {
    let mut flips = vec![None; graph.len()];
    for (name, &value) in &config.flips {
        let v = graph.require(name)?;
        let spec = graph.node(v);
        if !spec.is_sensitive() {
            return Err(Error::Counterfactual(format!("flipped node `{name}` is not sensitive")));
        }
        if !value.is_finite() || (spec.is_binary() && value != 0.0 && value != 1.0) {
            return Err(Error::Counterfactual(format!("invalid value {value} for `{name}`")));
        }
        flips[v] = Some(value);
    }
    let mut active: Vec<Vec<bool>> = (0..graph.len()).map(|v| vec![false; graph.parents(v).len()]).collect();
    for names in &config.scope {
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let p = graph.path(&names)?;
        if flips[p.source()].is_none() {
            return Err(Error::Counterfactual(format!(
                "scope path {} does not start at a flipped node",
                graph.path_string(&p)
            )));
        }
        if p.interior().iter().any(|&v| flips[v].is_some()) {
            continue;
        }
        for (u, v) in p.edges() {
            let i = graph.parents(v).iter().position(|&x| x == u).expect("edge");
            active[v][i] = true;
        }
    }
    Ok(Routing { flips, active })
}

pub fn abduct_noise(model: &SemModel, data: &Dataset) -> Result<Dataset> {
    abduct_noise_seeded(model, data, ABDUCTION_SEED)
}

/// Fill the noise record from the observations: residuals for
/// linear-gaussian nodes, a uniform latent consistent with the observed bit
/// for binary nodes (drawn on `[0, p)` for 1, `[p, 1)` for 0).
pub fn abduct_noise_seeded(model: &SemModel, data: &Dataset, seed: u64) -> Result<Dataset> {
    let graph = model.graph();
    let n = data.n_rows();
    let mut out = data.clone();
    for v in 0..graph.len() {
        let name = graph.name(v);
        let eq = model.equation(v);
        let obs = data.require(name)?;
        let parents: Vec<&[f64]> = eq
            .parents
            .iter()
            .map(|&p| data.require(graph.name(p)))
            .collect::<Result<_>>()?;
        let lin = |r: usize| {
            let mut acc = eq.intercept;
            for (col, &c) in parents.iter().zip(&eq.coefficients) {
                acc += c * col[r];
            }
            acc
        };
        let mut eps = vec![0.0; n];
        if eq.binary {
            let key = StreamKey::new(seed, name).derive("abduct");
            for (r, e) in eps.iter_mut().enumerate() {
                let p = sigmoid(lin(r));
                let w = key.uniform(r as u64);
                *e = if obs[r] == 1.0 {
                    let u = w * p;
                    if u >= p && p > 0.0 {
                        f64::from_bits(p.to_bits() - 1)
                    } else {
                        u
                    }
                } else {
                    p + w * (1.0 - p)
                };
            }
        } else {
            for (r, e) in eps.iter_mut().enumerate() {
                *e = obs[r] - lin(r);
            }
        }
        out.set_noise(name, eps)?;
    }
    Ok(out)
}

pub fn generate_counterfactual(model: &SemModel, data: &Dataset, config: &CounterfactualConfig) -> Result<Dataset> {
    generate_counterfactual_world(model, data, config, ExecPolicy::default()).map(|w| w.data)
}

pub fn generate_counterfactual_world(
    model: &SemModel,
    data: &Dataset,
    config: &CounterfactualConfig,
    policy: ExecPolicy,
) -> Result<CounterfactualWorld> {
    let graph = model.graph();
    let routing = route(graph, config)?;
    let abducted;
    let data = match config.noise_source {
        NoiseSource::Recorded => data,
        NoiseSource::Abducted => {
            abducted = abduct_noise(model, data)?;
            &abducted
        }
    };
    let n = data.n_rows();
    let factual: Vec<&[f64]> = graph
        .nodes()
        .iter()
        .map(|s| data.require(&s.name))
        .collect::<Result<_>>()?;
    let mut cf: Vec<Option<Vec<f64>>> = vec![None; graph.len()];
    for &v in model.order() {
        if let Some(x) = routing.flips[v] {
            cf[v] = Some(vec![x; n]);
            continue;
        }
        if !routing.active[v].iter().any(|&a| a) {
            continue;
        }
        let eq = model.equation(v);
        let eps = data.require_noise(graph.name(v))?;
        let inputs: Vec<&[f64]> = eq
            .parents
            .iter()
            .zip(&routing.active[v])
            .map(|(&p, &a)| match (&cf[p], a) {
                (Some(col), true) => col.as_slice(),
                _ => factual[p],
            })
            .collect();
        let mut col = vec![0.0; n];
        fill_indexed(policy, &mut col, |r| {
            let mut lin = eq.intercept;
            for (input, &c) in inputs.iter().zip(&eq.coefficients) {
                lin += c * input[r];
            }
            if eq.binary {
                if eps[r] < sigmoid(lin) {
                    1.0
                } else {
                    0.0
                }
            } else {
                lin + eps[r]
            }
        });
        cf[v] = Some(col);
    }

    let y = graph.outcome();
    let mut out = data.clone();
    for (v, col) in cf.iter().enumerate() {
        if let Some(col) = col {
            out.set_column(graph.name(v), col.clone())?;
        }
    }
    let mut view = out.clone();
    for (&p, &a) in graph.parents(y).iter().zip(&routing.active[y]) {
        if !a && cf[p].is_some() {
            view.set_column(graph.name(p), factual[p].to_vec())?;
        }
    }
    Ok(CounterfactualWorld {
        data: out,
        outcome_view: view,
    })
}

/// Nodes whose counterfactual lane may differ from the factual one.
pub fn affected_nodes(graph: &CausalGraph, config: &CounterfactualConfig) -> Result<Vec<NodeId>> {
    let routing = route(graph, config)?;
    let order = crate::graph::topological_order(graph)?;
    let mut changed = vec![false; graph.len()];
    for &v in &order {
        changed[v] = routing.flips[v].is_some()
            || graph
                .parents(v)
                .iter()
                .zip(&routing.active[v])
                .any(|(&p, &a)| a && changed[p]);
    }
    Ok((0..graph.len()).filter(|&v| changed[v]).collect())
}
