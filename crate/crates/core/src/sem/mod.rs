//! Linear structural equation models with linear-gaussian and
//! Bernoulli-logistic nodes.
//!
//! A linear-gaussian node is `intercept + sum(coef * parent) + sigma * z`.
//! A Bernoulli-logistic node is `1` iff `u < sigmoid(intercept + sum(coef * parent))`
//! for a uniform latent `u`. Noise draws are retained so that counterfactual
//! worlds can be regenerated with the same exogenous randomness.

mod dataset;
mod fit;
mod predict;
mod sample;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{topological_order, CausalGraph, Family, NodeId};

pub use dataset::Dataset;
pub use fit::{fit_node, fit_params, fit_params_report, irls, ols, FitReport, LogisticFit, NodeFit, OlsFit};
pub use predict::{accuracy, linear_predictor, predict_outcome, CLASSIFICATION_THRESHOLD};
pub use sample::{regenerate_from_noise, sample_dataset, sample_dataset_with};

pub const RIDGE: f64 = 1e-6;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeParams {
    pub intercept: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub coefficients: BTreeMap<String, f64>,
}

/// Structural parameters keyed by node name. Serialized as
/// `{node: {intercept, sigma?, coefficients: {parent: value}}}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamSet {
    pub nodes: BTreeMap<String, NodeParams>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl ParamSet {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(Error::from_json_syntax)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    pub fn node(&self, name: &str) -> Option<&NodeParams> {
        self.nodes.get(name)
    }

    pub fn node_mut(&mut self, name: &str) -> &mut NodeParams {
        self.nodes.entry(name.to_string()).or_default()
    }

    pub fn coefficient(&self, child: &str, parent: &str) -> Option<f64> {
        self.nodes.get(child)?.coefficients.get(parent).copied()
    }

    pub fn set_coefficient(&mut self, child: &str, parent: &str, value: f64) {
        self.node_mut(child).coefficients.insert(parent.to_string(), value);
    }

    /// Zero intercepts and coefficients, `sigma = 1` on linear-gaussian nodes.
    pub fn zeros(graph: &CausalGraph) -> Self {
        let mut nodes = BTreeMap::new();
        for (v, spec) in graph.nodes().iter().enumerate() {
            let coefficients = graph
                .parents(v)
                .iter()
                .map(|&p| (graph.name(p).to_string(), 0.0))
                .collect();
            let sigma = (spec.family == Family::LinearGaussian).then_some(1.0);
            nodes.insert(
                spec.name.clone(),
                NodeParams {
                    intercept: 0.0,
                    sigma,
                    coefficients,
                },
            );
        }
        ParamSet {
            nodes,
            warnings: Vec::new(),
        }
    }
}

/// Distribution of a parentless node when sampling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RootDistribution {
    Bernoulli { p: f64 },
    Gaussian { mean: f64, sd: f64 },
    Constant { value: f64 },
}

pub type RootConfig = BTreeMap<String, RootDistribution>;

/// One compiled structural equation.
#[derive(Clone, Debug, PartialEq)]
pub struct Equation {
    pub intercept: f64,
    pub parents: Vec<NodeId>,
    pub coefficients: Vec<f64>,
    /// Noise scale; zero for binary nodes.
    pub sigma: f64,
    pub binary: bool,
}

impl Equation {
    #[inline]
    pub fn linear(&self, value: impl Fn(NodeId) -> f64) -> f64 {
        let mut acc = self.intercept;
        for (&p, &c) in self.parents.iter().zip(&self.coefficients) {
            acc += c * value(p);
        }
        acc
    }
}

/// A graph paired with parameters keyed exactly by its structure.
#[derive(Clone, Debug)]
pub struct SemModel {
    graph: CausalGraph,
    params: ParamSet,
    equations: Vec<Equation>,
    order: Vec<NodeId>,
}

impl SemModel {
    pub fn new(graph: CausalGraph, params: ParamSet) -> Result<Self> {
        let order = topological_order(&graph)?;
        for name in params.nodes.keys() {
            if graph.id(name).is_none() {
                return Err(Error::Params {
                    node: name.clone(),
                    reason: "not a node of the graph".into(),
                });
            }
        }
        let mut equations = Vec::with_capacity(graph.len());
        for (v, spec) in graph.nodes().iter().enumerate() {
            let np = params.node(&spec.name).ok_or_else(|| Error::Params {
                node: spec.name.clone(),
                reason: "missing parameters".into(),
            })?;
            let parents = graph.parents(v).to_vec();
            if np.coefficients.len() != parents.len() {
                return Err(Error::Params {
                    node: spec.name.clone(),
                    reason: format!(
                        "expected {} coefficients, found {}",
                        parents.len(),
                        np.coefficients.len()
                    ),
                });
            }
            let mut coefficients = Vec::with_capacity(parents.len());
            for &p in &parents {
                let c = np
                    .coefficients
                    .get(graph.name(p))
                    .copied()
                    .ok_or_else(|| Error::Params {
                        node: spec.name.clone(),
                        reason: format!("missing coefficient for parent `{}`", graph.name(p)),
                    })?;
                if !c.is_finite() {
                    return Err(Error::Params {
                        node: spec.name.clone(),
                        reason: "non-finite coefficient".into(),
                    });
                }
                coefficients.push(c);
            }
            let binary = spec.is_binary();
            let sigma = match (binary, np.sigma) {
                (false, Some(s)) if s >= 0.0 && s.is_finite() => s,
                (false, Some(_)) => {
                    return Err(Error::Params {
                        node: spec.name.clone(),
                        reason: "sigma must be finite and >= 0".into(),
                    })
                }
                (false, None) => {
                    return Err(Error::Params {
                        node: spec.name.clone(),
                        reason: "linear-gaussian node requires sigma".into(),
                    })
                }
                (true, Some(_)) => {
                    return Err(Error::Params {
                        node: spec.name.clone(),
                        reason: "bernoulli-logistic node must not have sigma".into(),
                    })
                }
                (true, None) => 0.0,
            };
            if !np.intercept.is_finite() {
                return Err(Error::Params {
                    node: spec.name.clone(),
                    reason: "non-finite intercept".into(),
                });
            }
            equations.push(Equation {
                intercept: np.intercept,
                parents,
                coefficients,
                sigma,
                binary,
            });
        }
        Ok(SemModel {
            graph,
            params,
            equations,
            order,
        })
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn equation(&self, v: NodeId) -> &Equation {
        &self.equations[v]
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    /// Topological order with declaration-order tie-break.
    pub fn order(&self) -> &[NodeId] {
        &self.order
    }

    /// Coefficient on edge `parent -> child`, if the edge exists.
    pub fn coefficient(&self, child: NodeId, parent: NodeId) -> Option<f64> {
        let eq = &self.equations[child];
        eq.parents.iter().position(|&p| p == parent).map(|i| eq.coefficients[i])
    }

    /// Replace the parameters of a single node.
    pub fn with_node_params(&self, node: &str, np: NodeParams) -> Result<Self> {
        let mut params = self.params.clone();
        params.nodes.insert(node.to_string(), np);
        SemModel::new(self.graph.clone(), params)
    }

    /// Root distributions implied by the parameters: `Bernoulli(sigmoid(intercept))`
    /// for binary roots, `Gaussian(intercept, sigma)` otherwise.
    pub fn implied_roots(&self) -> RootConfig {
        let mut out = RootConfig::new();
        for (v, eq) in self.equations.iter().enumerate() {
            if !eq.parents.is_empty() {
                continue;
            }
            let dist = if eq.binary {
                RootDistribution::Bernoulli {
                    p: sigmoid(eq.intercept),
                }
            } else {
                RootDistribution::Gaussian {
                    mean: eq.intercept,
                    sd: eq.sigma,
                }
            };
            out.insert(self.graph.name(v).to_string(), dist);
        }
        out
    }
}
