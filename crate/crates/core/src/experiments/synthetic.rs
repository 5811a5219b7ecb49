//! Simulation study on the multi-level graph: four ways of correcting the
//! unfair effect, audited against one counterfactual world per run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::emit::{CurveRow, StudyOutput};
use crate::audit::{AuditMode, AuditReport, Auditor};
use crate::counterfactual::{CounterfactualConfig, NoiseSource};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, mean, sample_sd, ExecPolicy};
use crate::fixtures;
use crate::graph::{CausalGraph, Level};
use crate::pse::{compute_pse_linear, PseQuery};
use crate::rng::{CounterRng, StreamKey};
use crate::sem::{fit_params_report, sample_dataset_with, ParamSet, RootConfig, RootDistribution, SemModel};

pub const VARIANTS: [&str; 4] = ["ai_only", "ap_individual", "both_individual", "multilevel"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThetaRanges {
    pub intercept: f64,
    /// Coefficients into `P`, `A_I` and `I`.
    pub mediator: [f64; 2],
    /// Coefficients into `Y`.
    pub outcome: [f64; 2],
    pub noise_sd: f64,
    /// `P(A_P = 1)`.
    pub sensitive_root_p: f64,
}

impl Default for ThetaRanges {
    fn default() -> Self {
        ThetaRanges {
            intercept: 0.2,
            mediator: [0.2, 0.7],
            outcome: [0.3, 0.95],
            noise_sd: 1.0,
            sensitive_root_p: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticStudyConfig {
    pub runs: usize,
    pub n: usize,
    pub master_seed: u64,
    pub theta_ranges: ThetaRanges,
    pub beta_grid: Vec<f64>,
    pub audit_mode: AuditMode,
}

impl Default for SyntheticStudyConfig {
    fn default() -> Self {
        SyntheticStudyConfig {
            runs: 10,
            n: 2000,
            master_seed: 2024,
            theta_ranges: ThetaRanges::default(),
            beta_grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
            audit_mode: AuditMode::Retrained,
        }
    }
}

impl SyntheticStudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(Error::from_json_syntax)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.theta_ranges;
        if self.runs == 0 || self.n < 10 {
            return Err(Error::Config("runs must be positive and n at least 10".into()));
        }
        if r.mediator[0] > r.mediator[1] || r.outcome[0] > r.outcome[1] {
            return Err(Error::Config("empty coefficient range".into()));
        }
        if !(0.0..=1.0).contains(&r.sensitive_root_p) || r.noise_sd < 0.0 {
            return Err(Error::Config("invalid root probability or noise scale".into()));
        }
        if self.beta_grid.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::Config("beta grid must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        StreamKey::new(self.master_seed, "sample").indexed(run as u64).0
    }
}

/// The data-generating model of one run.
pub fn draw_truth(config: &SyntheticStudyConfig, run: usize) -> SemModel {
    let r = &config.theta_ranges;
    let graph = fixtures::multilevel_graph();
    let mut rng = CounterRng::new(StreamKey::new(config.master_seed, "theta").indexed(run as u64));
    let mut ps = ParamSet::zeros(&graph);
    for (parent, child) in fixtures::MULTILEVEL_EDGES {
        let [lo, hi] = if child == "Y" { r.outcome } else { r.mediator };
        ps.set_coefficient(child, parent, rng.uniform_range(lo, hi));
    }
    for spec in graph.nodes() {
        let np = ps.node_mut(&spec.name);
        if graph.parents(graph.id(&spec.name).expect("node")).is_empty() {
            np.intercept = crate::sem::logit(r.sensitive_root_p);
        } else {
            np.intercept = r.intercept;
        }
        if let Some(s) = np.sigma.as_mut() {
            *s = r.noise_sd;
        }
    }
    SemModel::new(graph, ps).expect("drawn parameters match the graph")
}

pub fn synthetic_roots(config: &SyntheticStudyConfig) -> RootConfig {
    RootConfig::from([(
        "A_P".to_string(),
        RootDistribution::Bernoulli {
            p: config.theta_ranges.sensitive_root_p,
        },
    )])
}

/// `A_P` treated as an individual-level attribute: it loses its edges into
/// `A_I` and `I`, and the unfair paths become `A_P -> P -> Y` and `A_I -> I -> Y`.
pub fn build_fig4b_variant(graph: &CausalGraph) -> Result<CausalGraph> {
    let shape = |m: &str| Error::Config(format!("not the multi-level graph: {m}"));
    for name in ["A_P", "P", "A_I", "I", "Y"] {
        graph.require(name).map_err(|_| shape(&format!("missing `{name}`")))?;
    }
    let ap = graph.id("A_P").expect("checked");
    if graph.node(ap).level != Level::Macro {
        return Err(shape("`A_P` is already individual-level"));
    }
    let drop = [("A_P", "A_I"), ("A_P", "I")];
    for (u, v) in drop {
        if !graph.has_edge(graph.id(u).expect("checked"), graph.id(v).expect("checked")) {
            return Err(shape(&format!("missing edge {u} -> {v}")));
        }
    }
    let mut nodes = graph.nodes().to_vec();
    nodes[ap].level = Level::Individual;
    nodes[ap].macro_category = None;
    let names = graph.edge_names();
    let edges: Vec<(&str, &str)> = names
        .iter()
        .map(|(u, v)| (u.as_str(), v.as_str()))
        .filter(|e| !drop.contains(e))
        .collect();
    CausalGraph::new(nodes, &edges, &[vec!["A_P", "P", "Y"], vec!["A_I", "I", "Y"]])
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticVariant {
    pub name: &'static str,
    /// Whether the predictor is the one fitted on the individual-level variant graph.
    pub individual_graph: bool,
    pub query: PseQuery,
}

pub fn synthetic_variants() -> Vec<SyntheticVariant> {
    let unfair = fixtures::multilevel_unfair_paths();
    let mut multilevel = PseQuery::new().intervene("A_P", 1.0, 0.0).intervene("A_I", 1.0, 0.0);
    for p in &unfair {
        multilevel = multilevel.path(p);
    }
    vec![
        SyntheticVariant {
            name: "ai_only",
            individual_graph: false,
            query: PseQuery::new().intervene("A_I", 1.0, 0.0).path(&["A_I", "I", "Y"]),
        },
        SyntheticVariant {
            name: "ap_individual",
            individual_graph: true,
            query: PseQuery::new().intervene("A_P", 1.0, 0.0).path(&["A_P", "P", "Y"]),
        },
        SyntheticVariant {
            name: "both_individual",
            individual_graph: true,
            query: PseQuery::new()
                .intervene("A_P", 1.0, 0.0)
                .intervene("A_I", 1.0, 0.0)
                .path(&["A_P", "P", "Y"])
                .path(&["A_I", "I", "Y"]),
        },
        SyntheticVariant {
            name: "multilevel",
            individual_graph: false,
            query: multilevel,
        },
    ]
}

/// Both sensitive attributes flipped to 0 along every unfair path, noise
/// abducted under the fitted multi-level model.
pub fn synthetic_counterfactual(graph: &CausalGraph) -> Result<CounterfactualConfig> {
    Ok(
        CounterfactualConfig::along_unfair_paths(graph, &[("A_P", 0.0), ("A_I", 0.0)])?
            .noise_source(NoiseSource::Abducted),
    )
}

#[derive(Clone, Debug)]
pub struct SyntheticRun {
    pub run: usize,
    pub seed: u64,
    pub truth: ParamSet,
    pub fitted: ParamSet,
    pub fitted_individual: ParamSet,
    pub pse: BTreeMap<String, f64>,
    pub reports: BTreeMap<String, AuditReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunFailure {
    pub run: usize,
    pub error: String,
}

#[derive(Clone, Debug)]
pub struct SyntheticStudy {
    pub config: SyntheticStudyConfig,
    pub runs: Vec<SyntheticRun>,
    pub failures: Vec<RunFailure>,
}

pub fn run_synthetic_once(config: &SyntheticStudyConfig, run: usize, policy: ExecPolicy) -> Result<SyntheticRun> {
    let truth = draw_truth(config, run);
    let seed = config.run_seed(run);
    let data = sample_dataset_with(&truth, config.n, seed, &synthetic_roots(config), policy)?;
    let graph = truth.graph().clone();
    let fitted = SemModel::new(graph.clone(), fit_params_report(&graph, &data, policy)?.params)?;
    let ind_graph = build_fig4b_variant(&graph)?;
    let individual = SemModel::new(ind_graph.clone(), fit_params_report(&ind_graph, &data, policy)?.params)?;
    let auditor = Auditor::new(&fitted, &data, &synthetic_counterfactual(&graph)?, policy)?;
    let mut pse = BTreeMap::new();
    let mut reports = BTreeMap::new();
    for v in synthetic_variants() {
        let model = if v.individual_graph { &individual } else { &fitted };
        pse.insert(v.name.to_string(), compute_pse_linear(model, &v.query)?.value);
        reports.insert(
            v.name.to_string(),
            auditor.sweep(model, &v.query, &config.beta_grid, config.audit_mode)?,
        );
    }
    Ok(SyntheticRun {
        run,
        seed,
        truth: truth.params().clone(),
        fitted: fitted.params().clone(),
        fitted_individual: individual.params().clone(),
        pse,
        reports,
    })
}

/// Every run is a pure function of `(master_seed, run)`; a failed run is
/// recorded and the study continues.
pub fn run_synthetic_study(config: &SyntheticStudyConfig, policy: ExecPolicy) -> Result<SyntheticStudy> {
    config.validate()?;
    let results = map_indexed(policy, config.runs, |r| run_synthetic_once(config, r, policy));
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(run) => runs.push(run),
            Err(e) => {
                log::warn!("run {r} failed: {e}");
                failures.push(RunFailure {
                    run: r,
                    error: e.to_string(),
                });
            }
        }
    }
    Ok(SyntheticStudy {
        config: config.clone(),
        runs,
        failures,
    })
}

impl SyntheticStudy {
    /// Per-β means over runs; `residual_std` is the spread of the per-run means.
    pub fn curve(&self, variant: &str) -> Vec<CurveRow> {
        let reports: Vec<&AuditReport> = self.runs.iter().filter_map(|r| r.reports.get(variant)).collect();
        if reports.is_empty() {
            return Vec::new();
        }
        (0..self.config.beta_grid.len())
            .map(|i| {
                let res: Vec<f64> = reports.iter().map(|r| r.residual_unfairness[i]).collect();
                let acc: Vec<f64> = reports.iter().map(|r| r.accuracy[i]).collect();
                CurveRow {
                    beta: self.config.beta_grid[i],
                    residual_mean: mean(&res),
                    residual_std: sample_sd(&res),
                    accuracy: mean(&acc),
                }
            })
            .collect()
    }

    /// Mean over runs of the residual at the grid point closest to `beta`.
    pub fn residual_at(&self, variant: &str, beta: f64) -> Option<f64> {
        let i = self.grid_index(beta)?;
        let c = self.curve(variant);
        c.get(i).map(|row| row.residual_mean)
    }

    pub fn accuracy_at(&self, variant: &str, beta: f64) -> Option<f64> {
        let i = self.grid_index(beta)?;
        self.curve(variant).get(i).map(|row| row.accuracy)
    }

    fn grid_index(&self, beta: f64) -> Option<usize> {
        self.config
            .beta_grid
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - beta).abs().total_cmp(&(b.1 - beta).abs()))
            .map(|(i, _)| i)
    }

    pub fn output(&self) -> StudyOutput {
        let mut curves = BTreeMap::new();
        let mut densities: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for v in VARIANTS {
            curves.insert(v.to_string(), self.curve(v));
            let pooled: Vec<f64> = self
                .runs
                .iter()
                .flat_map(|r| r.reports[v].density_data["factual"].iter().copied())
                .collect();
            densities.insert(v.to_string(), pooled);
        }
        densities.insert(
            "counterfactual".to_string(),
            self.runs
                .iter()
                .flat_map(|r| r.reports["multilevel"].density_data["counterfactual"].iter().copied())
                .collect(),
        );
        let mut variants = serde_json::Map::new();
        for v in VARIANTS {
            let pse: Vec<f64> = self.runs.iter().map(|r| r.pse[v]).collect();
            variants.insert(
                v.to_string(),
                json!({
                    "pse_log_odds_per_run": pse,
                    "pse_log_odds_mean": mean(&pse),
                    "accuracy_beta0": self.accuracy_at(v, 0.0),
                    "accuracy_beta1": self.accuracy_at(v, 1.0),
                    "residual_beta1": self.residual_at(v, 1.0),
                }),
            );
        }
        let summary = json!({
            "study": "synthetic",
            "master_seed": self.config.master_seed,
            "runs": self.config.runs,
            "n": self.config.n,
            "audit_mode": self.config.audit_mode,
            "run_seeds": self.runs.iter().map(|r| r.seed).collect::<Vec<_>>(),
            "failures": self.failures,
            "variants": variants,
        });
        StudyOutput {
            curves,
            densities,
            summary,
        }
    }
}
