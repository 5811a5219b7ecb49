use super::{resolve, PseQuery, ResolvedQuery};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, mean, sample_sd, ExecPolicy};
use crate::graph::check_multilevel_identifiability;
use crate::rng::StreamKey;
use crate::sem::{logit, SemModel};

const CHUNK: usize = 4096;

/// How the two worlds of a replicate share exogenous noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NoiseCoupling {
    /// The π-world and the baseline world are drawn from independent units.
    #[default]
    Independent,
    /// Both worlds reuse one unit's noise (lower variance).
    Shared,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OracleOptions {
    pub coupling: NoiseCoupling,
    pub policy: ExecPolicy,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub replicates: usize,
}

/// Monte-Carlo estimate of `E[Y_π] - E[Y_baseline]` by forward simulation of
/// the nested counterfactual.
///
/// Binary nodes are simulated on their latent log-odds scale
/// (`linear predictor - logit(u)`), and the outcome is read off as its linear
/// predictor, so the estimate targets the same quantity as the closed form.
pub fn mc_counterfactual_oracle(model: &SemModel, query: &PseQuery, n: usize, seed: u64) -> Result<OracleEstimate> {
    mc_counterfactual_oracle_with(model, query, n, seed, OracleOptions::default())
}

pub fn mc_counterfactual_oracle_with(
    model: &SemModel,
    query: &PseQuery,
    n: usize,
    seed: u64,
    options: OracleOptions,
) -> Result<OracleEstimate> {
    if n < 2 {
        return Err(Error::Config("oracle needs at least two replicates".into()));
    }
    check_multilevel_identifiability(model.graph()).map_err(|v| Error::Identifiability(v.to_string()))?;
    let q = resolve(model.graph(), query)?;
    let graph = model.graph();
    let keys: Vec<[StreamKey; 2]> = graph
        .nodes()
        .iter()
        .map(|spec| {
            let k = StreamKey::new(seed, &spec.name).derive("oracle");
            [k.indexed(0), k.indexed(1)]
        })
        .collect();
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = map_indexed(options.policy, chunks, |c| {
        let start = c * CHUNK;
        let end = (start + CHUNK).min(n);
        let mut lanes = Lanes::new(graph.len());
        (start..end)
            .map(|r| {
                let r = r as u64;
                let pi = lanes.run(model, &q, &keys, 0, r).1;
                let base = match options.coupling {
                    NoiseCoupling::Shared => lanes.base_y,
                    NoiseCoupling::Independent => lanes.run(model, &q, &keys, 1, r).0,
                };
                pi - base
            })
            .collect()
    });
    let diffs: Vec<f64> = parts.concat();
    Ok(OracleEstimate {
        estimate: mean(&diffs),
        standard_error: sample_sd(&diffs) / (n as f64).sqrt(),
        replicates: n,
    })
}

struct Lanes {
    base: Vec<f64>,
    pi: Vec<f64>,
    base_y: f64,
}

impl Lanes {
    fn new(n: usize) -> Self {
        Lanes {
            base: vec![0.0; n],
            pi: vec![0.0; n],
            base_y: 0.0,
        }
    }

    /// One unit: returns the outcome's linear predictor in the baseline and π lanes.
    fn run(&mut self, model: &SemModel, q: &ResolvedQuery, keys: &[[StreamKey; 2]], unit: usize, r: u64) -> (f64, f64) {
        let y = model.graph().outcome();
        for &v in model.order() {
            if let Some((obs, b)) = q.fixed[v] {
                self.base[v] = b;
                self.pi[v] = obs;
                continue;
            }
            let eq = model.equation(v);
            let noise = if v == y {
                0.0
            } else if eq.binary {
                -logit(keys[v][unit].uniform_open(r))
            } else {
                eq.sigma * keys[v][unit].standard_normal(r)
            };
            let mut lb = eq.intercept + noise;
            let mut lp = lb;
            for (i, (&p, &c)) in eq.parents.iter().zip(&eq.coefficients).enumerate() {
                lb += c * self.base[p];
                lp += c * if q.active[v][i] { self.pi[p] } else { self.base[p] };
            }
            self.base[v] = lb;
            self.pi[v] = lp;
        }
        self.base_y = self.base[y];
        (self.base[y], self.pi[y])
    }
}
