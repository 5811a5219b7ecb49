//! UCI Adult income study.
//!
//! Scalar encoding of the graph's blocks: `A` sex (male = 1), `C_age` and
//! `C_nat` (native country label code, `United-States` = 39), `M` married,
//! `L` education-num, `R_workclass` / `R_occupation` (label codes) and
//! `R_hours`, `Y` income above 50K. Label codes index the sorted category
//! lists below, `?` first.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::emit::{histogram, tv_distance, CurveRow, StudyOutput};
use crate::audit::{fair_predict, per_row_pse, AuditMode, AuditReport, Auditor, FairPredictConfig};
use crate::counterfactual::{CounterfactualConfig, NoiseSource};
use crate::error::{Error, Result};
use crate::exec::{mean, ExecPolicy};
use crate::graph::{enumerate_paths, CausalGraph, Family, MacroCategory, NodeSpec, Sensitivity};
use crate::pse::{compute_pse_linear, PseQuery, PseResult};
use crate::rng::{CounterRng, StreamKey};
use crate::sem::{accuracy, fit_params_report, predict_outcome, Dataset, SemModel, CLASSIFICATION_THRESHOLD};

pub const WORKCLASS: [&str; 9] = [
    "?",
    "Federal-gov",
    "Local-gov",
    "Never-worked",
    "Private",
    "Self-emp-inc",
    "Self-emp-not-inc",
    "State-gov",
    "Without-pay",
];

pub const OCCUPATION: [&str; 15] = [
    "?",
    "Adm-clerical",
    "Armed-Forces",
    "Craft-repair",
    "Exec-managerial",
    "Farming-fishing",
    "Handlers-cleaners",
    "Machine-op-inspct",
    "Other-service",
    "Priv-house-serv",
    "Prof-specialty",
    "Protective-serv",
    "Sales",
    "Tech-support",
    "Transport-moving",
];

pub const NATIVE_COUNTRY: [&str; 42] = [
    "?",
    "Cambodia",
    "Canada",
    "China",
    "Columbia",
    "Cuba",
    "Dominican-Republic",
    "Ecuador",
    "El-Salvador",
    "England",
    "France",
    "Germany",
    "Greece",
    "Guatemala",
    "Haiti",
    "Holand-Netherlands",
    "Honduras",
    "Hong",
    "Hungary",
    "India",
    "Iran",
    "Ireland",
    "Italy",
    "Jamaica",
    "Japan",
    "Laos",
    "Mexico",
    "Nicaragua",
    "Outlying-US(Guam-USVI-etc)",
    "Peru",
    "Philippines",
    "Poland",
    "Portugal",
    "Puerto-Rico",
    "Scotland",
    "South",
    "Taiwan",
    "Thailand",
    "Trinadad&Tobago",
    "United-States",
    "Vietnam",
    "Yugoslavia",
];

/// UCI column order.
const UCI_COLUMNS: [&str; 15] = [
    "age",
    "workclass",
    "fnlwgt",
    "education",
    "education-num",
    "marital-status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "capital-gain",
    "capital-loss",
    "hours-per-week",
    "native-country",
    "income",
];

const USED: [&str; 9] = [
    "age",
    "workclass",
    "education-num",
    "marital-status",
    "occupation",
    "sex",
    "hours-per-week",
    "native-country",
    "income",
];

pub const ADULT_NODES: [&str; 9] = [
    "A",
    "C_age",
    "C_nat",
    "M",
    "L",
    "R_workclass",
    "R_occupation",
    "R_hours",
    "Y",
];

const R_NODES: [&str; 3] = ["R_workclass", "R_occupation", "R_hours"];

pub fn adult_graph() -> CausalGraph {
    use Family::*;
    use Sensitivity::*;
    let nodes = vec![
        NodeSpec::individual("A", Sensitive, BernoulliLogistic),
        NodeSpec::individual("C_age", Nonsensitive, LinearGaussian),
        NodeSpec::macro_level("C_nat", Sensitive, LinearGaussian, MacroCategory::Nonaggregate),
        NodeSpec::individual("M", Sensitive, BernoulliLogistic),
        NodeSpec::individual("L", Nonsensitive, LinearGaussian),
        NodeSpec::individual("R_workclass", Nonsensitive, LinearGaussian),
        NodeSpec::individual("R_occupation", Nonsensitive, LinearGaussian),
        NodeSpec::individual("R_hours", Nonsensitive, LinearGaussian),
        NodeSpec::individual("Y", Outcome, BernoulliLogistic),
    ];
    let mut edges: Vec<(&str, &str)> = Vec::new();
    for src in ["A", "C_age", "C_nat"] {
        edges.push((src, "M"));
        edges.push((src, "L"));
        edges.extend(R_NODES.iter().map(|&r| (src, r)));
        edges.push((src, "Y"));
    }
    edges.push(("M", "L"));
    edges.extend(R_NODES.iter().map(|&r| ("M", r)));
    edges.push(("M", "Y"));
    edges.extend(R_NODES.iter().map(|&r| ("L", r)));
    edges.push(("L", "Y"));
    edges.extend(R_NODES.iter().map(|&r| (r, "Y")));

    let structure = CausalGraph::new(nodes.clone(), &edges, &[] as &[Vec<&str>]).expect("adult graph");
    let y = structure.outcome();
    let mut unfair: Vec<Vec<String>> = Vec::new();
    for (src, second) in [
        ("A", &["Y", "M"][..]),
        ("C_nat", &["M", "L"][..]),
        ("M", &["Y", "L"][..]),
    ] {
        let s = structure.id(src).expect("node");
        for p in enumerate_paths(&structure, s, y) {
            let names = structure.path_names(&p);
            if second.contains(&names[1].as_str()) {
                unfair.push(names);
            }
        }
    }
    let unfair: Vec<Vec<&str>> = unfair.iter().map(|p| p.iter().map(String::as_str).collect()).collect();
    CausalGraph::new(nodes, &edges, &unfair).expect("adult graph")
}

#[derive(Clone, Debug)]
pub struct AdultIngest {
    pub data: Dataset,
    pub graph: CausalGraph,
    pub rows: usize,
    pub skipped: usize,
}

pub fn ingest_adult(path: &Path) -> Result<AdultIngest> {
    parse_adult(BufReader::new(File::open(path)?))
}

fn code(list: &[&str], v: &str) -> Option<f64> {
    list.iter().position(|&c| c == v).map(|i| i as f64)
}

/// Accepts the raw UCI layout (no header, 15 fields, `|` comment lines,
/// trailing periods on labels) or a CSV whose header names the UCI columns.
pub fn parse_adult<R: Read>(input: R) -> Result<AdultIngest> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut positions: Option<Vec<usize>> = None;
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); ADULT_NODES.len()];
    let mut skipped = 0;
    let mut first = true;
    for rec in reader.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let head = rec.get(0).unwrap_or("");
        if head.starts_with('|') || (rec.len() == 1 && head.is_empty()) {
            continue;
        }
        if first {
            first = false;
            if head.eq_ignore_ascii_case("age") {
                let names: Vec<String> = rec.iter().map(|s| s.to_ascii_lowercase().replace('_', "-")).collect();
                let mut pos = Vec::with_capacity(USED.len());
                for want in USED {
                    let i = names
                        .iter()
                        .position(|n| n == want)
                        .ok_or_else(|| Error::Adult(format!("missing column `{want}`")))?;
                    pos.push(i);
                }
                positions = Some(pos);
                continue;
            }
        }
        let pos = positions.get_or_insert_with(|| {
            USED.iter()
                .map(|u| UCI_COLUMNS.iter().position(|c| c == u).expect("uci column"))
                .collect()
        });
        let field = |k: usize| rec.get(pos[k]);
        match parse_row(&field) {
            Some(row) => {
                for (c, v) in cols.iter_mut().zip(row) {
                    c.push(v);
                }
            }
            None => skipped += 1,
        }
    }
    let rows = cols[0].len();
    if rows == 0 {
        return Err(Error::Adult("no usable rows".into()));
    }
    if skipped > 0 {
        log::warn!("adult: skipped {skipped} malformed rows");
    }
    let graph = adult_graph();
    let mut data = Dataset::new(rows);
    for (name, col) in ADULT_NODES.iter().zip(cols) {
        let binary = graph.node(graph.id(name).expect("node")).is_binary();
        data.push_column(name, col, binary)?;
    }
    Ok(AdultIngest {
        data,
        graph,
        rows,
        skipped,
    })
}

fn parse_row<'a>(field: &dyn Fn(usize) -> Option<&'a str>) -> Option<[f64; 9]> {
    let num = |k: usize| field(k)?.parse::<f64>().ok().filter(|x| x.is_finite());
    let age = num(0)?;
    let workclass = code(&WORKCLASS, field(1)?)?;
    let education = num(2)?;
    let married = if field(3)?.starts_with("Married") { 1.0 } else { 0.0 };
    let occupation = code(&OCCUPATION, field(4)?)?;
    let sex = match field(5)? {
        "Male" => 1.0,
        "Female" => 0.0,
        _ => return None,
    };
    let hours = num(6)?;
    let country = code(&NATIVE_COUNTRY, field(7)?)?;
    let income = match field(8)?.trim_end_matches('.') {
        ">50K" => 1.0,
        "<=50K" => 0.0,
        _ => return None,
    };
    Some([
        sex, age, country, married, education, workclass, occupation, hours, income,
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdultStudyConfig {
    pub data_path: PathBuf,
    pub train_fraction: f64,
    pub seed: u64,
    pub baseline_c: f64,
    pub baseline_a: f64,
    pub beta_grid: Vec<f64>,
    pub audit_mode: AuditMode,
}

impl Default for AdultStudyConfig {
    fn default() -> Self {
        AdultStudyConfig {
            data_path: PathBuf::from("data/adult.csv"),
            train_fraction: 0.8,
            seed: 2024,
            baseline_c: 39.0,
            baseline_a: 1.0,
            beta_grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
            audit_mode: AuditMode::Retrained,
        }
    }
}

/// `(train, test)` row indices from a seeded shuffle.
pub fn split_rows(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("train fraction {fraction} outside (0, 1)")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    CounterRng::new(StreamKey::new(seed, "split")).shuffle(&mut idx);
    let cut = (n as f64 * fraction).floor() as usize;
    let test = idx.split_off(cut);
    Ok((idx, test))
}

fn unfair_from(graph: &CausalGraph, origins: &[&str]) -> Vec<Vec<String>> {
    let ids: Vec<_> = origins.iter().map(|o| graph.id(o).expect("node")).collect();
    graph
        .unfair_paths_from(&ids)
        .iter()
        .map(|p| graph.path_names(p))
        .collect()
}

/// `(individual, macro, multilevel)` queries: `A` alone, `C_nat` alone, both.
pub fn adult_queries(
    graph: &CausalGraph,
    config: &AdultStudyConfig,
    c_observed: f64,
) -> (PseQuery, PseQuery, PseQuery) {
    let mut ind = PseQuery::new().intervene("A", 1.0 - config.baseline_a, config.baseline_a);
    ind.paths = unfair_from(graph, &["A"]);
    let mut mac = PseQuery::new().intervene("C_nat", c_observed, config.baseline_c);
    mac.paths = unfair_from(graph, &["C_nat"]);
    let mut multi = PseQuery::new()
        .intervene("A", 1.0 - config.baseline_a, config.baseline_a)
        .intervene("C_nat", c_observed, config.baseline_c);
    multi.paths = unfair_from(graph, &["A", "C_nat"]);
    (ind, mac, multi)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PseSummary {
    /// Mean over test rows of the per-row log-odds correction.
    pub population_log_odds: f64,
    pub population_odds_ratio: f64,
    /// Closed form at the query's observed and baseline values.
    pub query_log_odds: f64,
    pub query_odds_ratio: f64,
    pub origin_weights: BTreeMap<String, f64>,
}

fn pse_summary(model: &SemModel, test: &Dataset, query: &PseQuery) -> Result<PseSummary> {
    let r: PseResult = compute_pse_linear(model, query)?;
    let pop = mean(&per_row_pse(model, test, query)?);
    Ok(PseSummary {
        population_log_odds: pop,
        population_odds_ratio: pop.exp(),
        query_log_odds: r.value,
        query_odds_ratio: r.value.exp(),
        origin_weights: r.origin_weights(),
    })
}

#[derive(Clone, Debug)]
pub struct AdultStudy {
    pub config: AdultStudyConfig,
    pub rows: usize,
    pub skipped: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub model: SemModel,
    pub pse_individual: PseSummary,
    pub pse_macro: PseSummary,
    pub pse_multilevel: PseSummary,
    /// Test accuracy: unadjusted, individual correction and multi-level correction at β = 1.
    pub accuracy: BTreeMap<String, f64>,
    /// Sweeps of the three corrections against the combined counterfactual world.
    pub reports: BTreeMap<String, AuditReport>,
    /// `fair` plus the three counterfactual predictors.
    pub densities: BTreeMap<String, Vec<f64>>,
    /// Total variation between `fair` and each counterfactual density.
    pub tv: BTreeMap<String, f64>,
}

pub fn run_adult_study(config: &AdultStudyConfig, policy: ExecPolicy) -> Result<AdultStudy> {
    let ingest = ingest_adult(&config.data_path)?;
    run_adult_on(ingest, config, policy)
}

pub fn run_adult_on(ingest: AdultIngest, config: &AdultStudyConfig, policy: ExecPolicy) -> Result<AdultStudy> {
    if config.beta_grid.iter().any(|b| !(0.0..=1.0).contains(b)) {
        return Err(Error::Config("beta grid must lie in [0, 1]".into()));
    }
    let graph = ingest.graph.clone();
    let (train_idx, test_idx) = split_rows(ingest.rows, config.train_fraction, config.seed)?;
    let train = ingest.data.select_rows(&train_idx);
    let test = ingest.data.select_rows(&test_idx);
    let model = SemModel::new(graph.clone(), fit_params_report(&graph, &train, policy)?.params)?;

    let c_mean = mean(train.require("C_nat")?);
    let (ind, mac, multi) = adult_queries(&graph, config, c_mean);
    let labels = test.require("Y")?;
    let mut acc = BTreeMap::new();
    acc.insert(
        "unadjusted".to_string(),
        accuracy(&predict_outcome(&model, &test)?, labels, CLASSIFICATION_THRESHOLD)?,
    );
    for (name, q) in [("individual", &ind), ("macro", &mac), ("multilevel", &multi)] {
        let p = fair_predict(&model, &test, &FairPredictConfig::new(1.0, q.clone())?)?;
        acc.insert(name.to_string(), accuracy(&p, labels, CLASSIFICATION_THRESHOLD)?);
    }

    let world = |flips: &[(&str, f64)]| -> Result<CounterfactualConfig> {
        Ok(CounterfactualConfig::along_unfair_paths(&graph, flips)?.noise_source(NoiseSource::Abducted))
    };
    let a = ("A", config.baseline_a);
    let c = ("C_nat", config.baseline_c);
    let combined = Auditor::new(&model, &test, &world(&[a, c])?, policy)?;
    let mut reports = BTreeMap::new();
    for (name, q) in [("individual", &ind), ("macro", &mac), ("multilevel", &multi)] {
        reports.insert(
            name.to_string(),
            combined.sweep(&model, q, &config.beta_grid, config.audit_mode)?,
        );
    }

    let mut densities = BTreeMap::new();
    densities.insert(
        "fair".to_string(),
        reports["multilevel"].density_data["factual"].clone(),
    );
    for (name, flips, q) in [
        ("cf_individual", vec![a], &ind),
        ("cf_macro", vec![c], &mac),
        ("cf_combined", vec![a, c], &multi),
    ] {
        let auditor = Auditor::new(&model, &test, &world(&flips)?, policy)?;
        let (_, cf) = auditor.paired_predictions(&model, q, 0.0, config.audit_mode)?;
        densities.insert(name.to_string(), cf);
    }
    let fair_hist = histogram(&densities["fair"]);
    let tv = ["cf_individual", "cf_macro", "cf_combined"]
        .into_iter()
        .map(|k| (k.to_string(), tv_distance(&fair_hist, &histogram(&densities[k]))))
        .collect();

    Ok(AdultStudy {
        config: config.clone(),
        rows: ingest.rows,
        skipped: ingest.skipped,
        train_rows: train.n_rows(),
        test_rows: test.n_rows(),
        pse_individual: pse_summary(&model, &test, &ind)?,
        pse_macro: pse_summary(&model, &test, &mac)?,
        pse_multilevel: pse_summary(&model, &test, &multi)?,
        model,
        accuracy: acc,
        reports,
        densities,
        tv,
    })
}

impl AdultStudy {
    pub fn residual_at_one(&self, name: &str) -> Option<f64> {
        let r = self.reports.get(name)?;
        let i = r.beta_grid.iter().position(|&b| b == 1.0)?;
        Some(r.residual_unfairness[i])
    }

    pub fn output(&self) -> StudyOutput {
        let curves = self
            .reports
            .iter()
            .map(|(k, r)| {
                let rows = r
                    .points()
                    .into_iter()
                    .map(|p| CurveRow {
                        beta: p.beta,
                        residual_mean: p.residual_mean,
                        residual_std: p.residual_std,
                        accuracy: p.accuracy,
                    })
                    .collect();
                (k.clone(), rows)
            })
            .collect();
        let residual: BTreeMap<&str, Option<f64>> = ["individual", "macro", "multilevel"]
            .into_iter()
            .map(|k| (k, self.residual_at_one(k)))
            .collect();
        let summary = json!({
            "study": "adult",
            "seed": self.config.seed,
            "train_fraction": self.config.train_fraction,
            "baseline_a": self.config.baseline_a,
            "baseline_c": self.config.baseline_c,
            "audit_mode": self.config.audit_mode,
            "rows": self.rows,
            "skipped_rows": self.skipped,
            "train_rows": self.train_rows,
            "test_rows": self.test_rows,
            "pse": {
                "individual": self.pse_individual,
                "macro": self.pse_macro,
                "multilevel": self.pse_multilevel,
            },
            "accuracy": self.accuracy,
            "residual_beta1": residual,
            "tv_distance_to_fair": self.tv,
            "params": self.model.params(),
        });
        StudyOutput {
            curves,
            densities: self.densities.clone(),
            summary,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
39, State-gov, 77516, Bachelors, 13, Never-married, Adm-clerical, Not-in-family, White, Male, 2174, 0, 40, United-States, <=50K
|1x3 Cross validator
50, Self-emp-not-inc, 83311, Bachelors, 13, Married-civ-spouse, Exec-managerial, Husband, White, Female, 0, 0, 13, Cuba, >50K.
38, Private, 215646, HS-grad, 9, Divorced
40, Private, 215646, HS-grad, nine, Divorced, Handlers-cleaners, Not-in-family, White, Male, 0, 0, 40, United-States, <=50K
";

    #[test]
    fn us_is_code_39() {
        assert_eq!(code(&NATIVE_COUNTRY, "United-States"), Some(39.0));
    }

    #[test]
    fn parses_uci_rows() {
        let ing = parse_adult(SAMPLE.as_bytes()).unwrap();
        assert_eq!(ing.rows, 2);
        assert_eq!(ing.skipped, 2);
        let d = &ing.data;
        assert_eq!(d.column("A").unwrap(), &[1.0, 0.0]);
        assert_eq!(d.column("M").unwrap(), &[0.0, 1.0]);
        assert_eq!(d.column("Y").unwrap(), &[0.0, 1.0]);
        assert_eq!(d.column("C_nat").unwrap(), &[39.0, 5.0]);
        assert_eq!(d.column("R_workclass").unwrap(), &[7.0, 6.0]);
        assert!(!d.has_column("race"));
        assert_eq!(d.names().len(), 9);
    }

    #[test]
    fn header_mode_requires_columns() {
        let text = "age,workclass,education-num,marital-status,occupation,sex,hours-per-week,native-country\n";
        assert!(matches!(parse_adult(text.as_bytes()), Err(Error::Adult(m)) if m.contains("income")));
        let ok = "age,workclass,education_num,marital_status,occupation,sex,hours_per_week,native_country,income\n\
                  30,Private,10,Never-married,Sales,Female,40,Mexico,<=50K\n";
        assert_eq!(parse_adult(ok.as_bytes()).unwrap().rows, 1);
    }

    #[test]
    fn empty_input_is_fatal() {
        assert!(matches!(parse_adult("".as_bytes()), Err(Error::Adult(_))));
    }

    #[test]
    fn graph_paths() {
        let g = adult_graph();
        assert_eq!(g.edges().len(), 30);
        assert_eq!(unfair_from(&g, &["A"]).len(), 9);
        assert_eq!(unfair_from(&g, &["C_nat"]).len(), 12);
        assert_eq!(unfair_from(&g, &["M"]).len(), 5);
        crate::graph::check_multilevel_identifiability(&g).unwrap();
    }

    #[test]
    fn queries_are_closed() {
        let g = adult_graph();
        let (a, b, c) = adult_queries(&g, &AdultStudyConfig::default(), 30.0);
        for q in [a, b, c] {
            crate::pse::resolve(&g, &q).unwrap();
        }
    }

    #[test]
    fn split_sizes() {
        let (tr, te) = split_rows(10, 0.8, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(split_rows(10, 1.0, 1).is_err());
    }
}
