//! Fair prediction by subtracting a β-scaled path-specific effect, and
//! audits of the residual unfairness left over.
//!
//! The correction is applied per row: each intervened origin `o` contributes
//! `K_o * (x_o - baseline_o)` on the outcome's linear-predictor scale, with
//! `K_o` the summed coefficient products of its non-blocked query paths. For
//! a row whose origin values equal the query's observed values this is
//! exactly the query's PSE.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::counterfactual::{generate_counterfactual_world, CounterfactualConfig, CounterfactualWorld};
use crate::error::{Error, Result};
use crate::exec::{map_slice, mean, sample_sd, ExecPolicy};
use crate::graph::check_multilevel_identifiability;
use crate::pse::{compute_pse_linear, PseQuery};
use crate::sem::{
    accuracy, fit_node, linear_predictor, predict_outcome, sigmoid, Dataset, SemModel, CLASSIFICATION_THRESHOLD,
};

pub const DEFAULT_TOLERANCE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FairPredictConfig {
    pub beta: f64,
    pub query: PseQuery,
}

impl FairPredictConfig {
    pub fn new(beta: f64, query: PseQuery) -> Result<Self> {
        let c = FairPredictConfig { beta, query };
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta {} outside [0, 1]", self.beta)));
        }
        Ok(())
    }
}

/// How the counterfactual side of an audit is scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditMode {
    /// Refit the outcome equation on the counterfactual data.
    #[default]
    Retrained,
    /// Score the factual model on the counterfactual data.
    SharedModel,
}

/// Per-origin correction weights and baselines for one query.
#[derive(Clone, Debug)]
struct Correction {
    terms: Vec<(String, f64, f64)>,
}

impl Correction {
    fn new(model: &SemModel, query: &PseQuery) -> Result<Self> {
        let pse = compute_pse_linear(model, query)?;
        let terms = pse
            .origin_weights()
            .into_iter()
            .map(|(name, k)| {
                let base = query.interventions[&name].baseline;
                (name, k, base)
            })
            .collect();
        Ok(Correction { terms })
    }

    fn per_row(&self, origins: &Dataset) -> Result<Vec<f64>> {
        let mut out = vec![0.0; origins.n_rows()];
        for (name, k, base) in &self.terms {
            let col = origins.require(name)?;
            for (o, &x) in out.iter_mut().zip(col) {
                *o += k * (x - base);
            }
        }
        Ok(out)
    }
}

fn adjusted(
    model: &SemModel,
    features: &Dataset,
    origins: &Dataset,
    beta: f64,
    correction: &Correction,
) -> Result<Vec<f64>> {
    if beta == 0.0 {
        return predict_outcome(model, features);
    }
    let y = model.graph().outcome();
    let mut lin = linear_predictor(model, y, features)?;
    for (l, c) in lin.iter_mut().zip(correction.per_row(origins)?) {
        *l -= beta * c;
    }
    if model.equation(y).binary {
        lin.iter_mut().for_each(|l| *l = sigmoid(*l));
    }
    Ok(lin)
}

/// Outcome predictions with `beta` times the per-row PSE removed from the
/// linear predictor. Probabilities for a binary outcome.
pub fn fair_predict(model: &SemModel, data: &Dataset, config: &FairPredictConfig) -> Result<Vec<f64>> {
    config.check()?;
    check_multilevel_identifiability(model.graph()).map_err(|v| Error::Identifiability(v.to_string()))?;
    let correction = Correction::new(model, &config.query)?;
    adjusted(model, data, data, config.beta, &correction)
}

/// The per-row correction `sum_o K_o * (x_o - baseline_o)` before scaling by β.
pub fn per_row_pse(model: &SemModel, data: &Dataset, query: &PseQuery) -> Result<Vec<f64>> {
    Correction::new(model, query)?.per_row(data)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub mean: f64,
    pub std: f64,
}

/// Mean and spread over rows of `|factual - counterfactual|` fair predictions.
pub fn residual_unfairness(
    model: &SemModel,
    data: &Dataset,
    config: &FairPredictConfig,
    cf_config: &CounterfactualConfig,
    mode: AuditMode,
) -> Result<Residual> {
    let auditor = Auditor::new(model, data, cf_config, ExecPolicy::default())?;
    let point = auditor.evaluate(model, &config.query, config.beta, mode)?;
    Ok(Residual {
        mean: point.residual_mean,
        std: point.residual_std,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditPoint {
    pub beta: f64,
    pub residual_mean: f64,
    pub residual_std: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub beta_grid: Vec<f64>,
    pub residual_unfairness: Vec<f64>,
    pub residual_std: Vec<f64>,
    pub accuracy: Vec<f64>,
    /// Predictions at β = 1: `factual` (fair model on factual data) and
    /// `counterfactual` (counterfactual side of the audit).
    pub density_data: BTreeMap<String, Vec<f64>>,
}

impl AuditReport {
    pub fn points(&self) -> Vec<AuditPoint> {
        (0..self.beta_grid.len())
            .map(|i| AuditPoint {
                beta: self.beta_grid[i],
                residual_mean: self.residual_unfairness[i],
                residual_std: self.residual_std[i],
                accuracy: self.accuracy[i],
            })
            .collect()
    }

    /// Header plus one row per β: `beta,residual_unfairness_mean,residual_unfairness_std,accuracy`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "beta",
            "residual_unfairness_mean",
            "residual_unfairness_std",
            "accuracy",
        ])?;
        for p in self.points() {
            w.write_record([
                p.beta.to_string(),
                p.residual_mean.to_string(),
                p.residual_std.to_string(),
                p.accuracy.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A factual dataset together with one counterfactual world, reusable across
/// predictor models and queries.
#[derive(Clone, Debug)]
pub struct Auditor {
    data: Dataset,
    world: CounterfactualWorld,
    policy: ExecPolicy,
}

/// The two predictors being compared, with their corrections.
struct Sides {
    factual: SemModel,
    factual_correction: Correction,
    counterfactual: SemModel,
    counterfactual_correction: Correction,
}

impl Auditor {
    /// Builds the counterfactual world from `generator` (usually the model
    /// fitted on the factual data).
    pub fn new(
        generator: &SemModel,
        data: &Dataset,
        cf_config: &CounterfactualConfig,
        policy: ExecPolicy,
    ) -> Result<Self> {
        let world = generate_counterfactual_world(generator, data, cf_config, policy)?;
        Ok(Auditor {
            data: data.clone(),
            world,
            policy,
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn world(&self) -> &CounterfactualWorld {
        &self.world
    }

    /// `model` with its outcome equation refitted on the counterfactual data.
    pub fn retrained(&self, model: &SemModel) -> Result<SemModel> {
        let graph = model.graph();
        let y = graph.outcome();
        let fit = fit_node(graph, y, &self.world.outcome_view)?;
        model.with_node_params(graph.name(y), fit.params())
    }

    fn sides(&self, model: &SemModel, query: &PseQuery, mode: AuditMode) -> Result<Sides> {
        check_multilevel_identifiability(model.graph()).map_err(|v| Error::Identifiability(v.to_string()))?;
        let counterfactual = match mode {
            AuditMode::Retrained => self.retrained(model)?,
            AuditMode::SharedModel => model.clone(),
        };
        Ok(Sides {
            factual_correction: Correction::new(model, query)?,
            counterfactual_correction: Correction::new(&counterfactual, query)?,
            factual: model.clone(),
            counterfactual,
        })
    }

    fn predictions(&self, sides: &Sides, beta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let f = adjusted(&sides.factual, &self.data, &self.data, beta, &sides.factual_correction)?;
        let c = adjusted(
            &sides.counterfactual,
            &self.world.outcome_view,
            &self.world.data,
            beta,
            &sides.counterfactual_correction,
        )?;
        Ok((f, c))
    }

    fn point(&self, sides: &Sides, beta: f64) -> Result<AuditPoint> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Config(format!("beta {beta} outside [0, 1]")));
        }
        let (f, c) = self.predictions(sides, beta)?;
        let diffs: Vec<f64> = f.iter().zip(&c).map(|(a, b)| (a - b).abs()).collect();
        let y = sides.factual.graph().outcome();
        let labels = self.data.require(sides.factual.graph().name(y))?;
        let acc = if sides.factual.equation(y).binary {
            accuracy(&f, labels, CLASSIFICATION_THRESHOLD)?
        } else {
            f64::NAN
        };
        Ok(AuditPoint {
            beta,
            residual_mean: mean(&diffs),
            residual_std: sample_sd(&diffs),
            accuracy: acc,
        })
    }

    pub fn evaluate(&self, model: &SemModel, query: &PseQuery, beta: f64, mode: AuditMode) -> Result<AuditPoint> {
        let sides = self.sides(model, query, mode)?;
        self.point(&sides, beta)
    }

    /// Per-row `(factual, counterfactual)` fair predictions.
    pub fn paired_predictions(
        &self,
        model: &SemModel,
        query: &PseQuery,
        beta: f64,
        mode: AuditMode,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let sides = self.sides(model, query, mode)?;
        self.predictions(&sides, beta)
    }

    pub fn sweep(&self, model: &SemModel, query: &PseQuery, grid: &[f64], mode: AuditMode) -> Result<AuditReport> {
        let sides = self.sides(model, query, mode)?;
        let points: Vec<AuditPoint> = map_slice(self.policy, grid, |&b| self.point(&sides, b))
            .into_iter()
            .collect::<Result<_>>()?;
        let (f, c) = self.predictions(&sides, 1.0)?;
        Ok(AuditReport {
            beta_grid: grid.to_vec(),
            residual_unfairness: points.iter().map(|p| p.residual_mean).collect(),
            residual_std: points.iter().map(|p| p.residual_std).collect(),
            accuracy: points.iter().map(|p| p.accuracy).collect(),
            density_data: BTreeMap::from([("factual".to_string(), f), ("counterfactual".to_string(), c)]),
        })
    }
}

pub fn beta_sweep(
    model: &SemModel,
    data: &Dataset,
    query: &PseQuery,
    cf_config: &CounterfactualConfig,
    grid: &[f64],
) -> Result<AuditReport> {
    Auditor::new(model, data, cf_config, ExecPolicy::default())?.sweep(model, query, grid, AuditMode::default())
}

#[derive(Clone, Debug, PartialEq)]
pub enum FairnessVerdict {
    Pass,
    Fail(Residual),
}

impl FairnessVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, FairnessVerdict::Pass)
    }
}

/// Pass iff the mean residual unfairness is at most `tol`.
pub fn counterfactual_fairness_check(
    model: &SemModel,
    data: &Dataset,
    config: &FairPredictConfig,
    cf_config: &CounterfactualConfig,
    tol: f64,
    mode: AuditMode,
) -> Result<FairnessVerdict> {
    let r = residual_unfairness(model, data, config, cf_config, mode)?;
    Ok(if r.mean <= tol {
        FairnessVerdict::Pass
    } else {
        FairnessVerdict::Fail(r)
    })
}
