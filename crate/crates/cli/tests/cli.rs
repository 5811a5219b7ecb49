use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mlfair::fixtures;
use mlfair::graph::serialize_graph_spec;
use mlfair::pse::PseQuery;
use mlfair::sem::ParamSet;

fn mlfair() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mlfair"));
    c.env_remove("MLFAIR_SEED");
    c
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn mlfair");
    assert!(
        out.status.success(),
        "mlfair failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn truth_params() -> ParamSet {
    let g = fixtures::multilevel_graph();
    let mut ps = ParamSet::zeros(&g);
    for ((parent, child), c) in fixtures::MULTILEVEL_EDGES
        .iter()
        .zip([0.5, 0.3, 0.4, 0.6, 0.7, 0.45, 0.8, 0.9])
    {
        ps.set_coefficient(child, parent, c);
    }
    for n in ["P", "A_I", "I", "Y"] {
        ps.node_mut(n).intercept = 0.2;
    }
    ps
}

struct Inputs {
    graph: PathBuf,
    params: PathBuf,
    query: PathBuf,
    cf: PathBuf,
    roots: PathBuf,
}

fn write_inputs(dir: &Path) -> Inputs {
    let g = fixtures::multilevel_graph();
    let inputs = Inputs {
        graph: dir.join("graph.json"),
        params: dir.join("params.json"),
        query: dir.join("query.json"),
        cf: dir.join("cf.json"),
        roots: dir.join("roots.json"),
    };
    fs::write(&inputs.graph, serialize_graph_spec(&g)).unwrap();
    fs::write(&inputs.params, truth_params().to_json()).unwrap();
    let q = PseQuery::new()
        .intervene("A_P", 1.0, 0.0)
        .intervene("A_I", 1.0, 0.0)
        .with_paths(&g, g.unfair_paths());
    fs::write(&inputs.query, q.to_json()).unwrap();
    let cf = mlfair::counterfactual::CounterfactualConfig::for_query(&q);
    fs::write(&inputs.cf, cf.to_json()).unwrap();
    fs::write(&inputs.roots, r#"{"A_P": {"kind": "bernoulli", "p": 0.5}}"#).unwrap();
    inputs
}

#[test]
fn sample_fit_pse_audit_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let i = write_inputs(d);
    let data = d.join("data.csv");
    let noise = d.join("noise.csv");
    run(mlfair()
        .args(["sample", "--n", "3000", "--seed", "5", "--graph"])
        .arg(&i.graph)
        .arg("--params")
        .arg(&i.params)
        .arg("--roots")
        .arg(&i.roots)
        .arg("--out")
        .arg(&data)
        .arg("--noise-out")
        .arg(&noise));
    let text = fs::read_to_string(&data).unwrap();
    assert_eq!(text.lines().count(), 3001);

    let fitted = d.join("fitted.json");
    run(mlfair()
        .arg("fit")
        .arg("--graph")
        .arg(&i.graph)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&fitted));
    let ps = ParamSet::from_json(&fs::read_to_string(&fitted).unwrap()).unwrap();
    let truth = truth_params();
    for (parent, child) in fixtures::MULTILEVEL_EDGES {
        let (got, want) = (
            ps.coefficient(child, parent).unwrap(),
            truth.coefficient(child, parent).unwrap(),
        );
        assert!((got - want).abs() < 0.25, "{parent}->{child}: {got} vs {want}");
    }

    let out = run(mlfair()
        .arg("pse")
        .arg("--graph")
        .arg(&i.graph)
        .arg("--params")
        .arg(&i.params)
        .arg("--query")
        .arg(&i.query)
        .args(["--oracle", "20000", "--seed", "3"]));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // A_P->I->Y and A_I->I->Y; paths through the intervened A_I are cut.
    let expected = 0.9 * 0.3 + 0.9 * 0.45;
    assert!((v["value"].as_f64().unwrap() - expected).abs() < 1e-12);
    assert!((v["odds_ratio"].as_f64().unwrap() - expected.exp()).abs() < 1e-9);
    let est = v["oracle"]["estimate"].as_f64().unwrap();
    let se = v["oracle"]["standard_error"].as_f64().unwrap();
    assert!((est - expected).abs() < 5.0 * se, "{est} +- {se}");

    let audit = d.join("audit.csv");
    run(mlfair()
        .arg("audit")
        .arg("--graph")
        .arg(&i.graph)
        .arg("--data")
        .arg(&data)
        .arg("--query")
        .arg(&i.query)
        .arg("--cf")
        .arg(&i.cf)
        .arg("--noise")
        .arg(&noise)
        .args(["--beta-grid", "0,0.5,1", "--out"])
        .arg(&audit));
    let csv = fs::read_to_string(&audit).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "beta,residual_unfairness_mean,residual_unfairness_std,accuracy"
    );
    assert_eq!(lines.len(), 4);
    let residual: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(residual[2] < residual[0], "{residual:?}");
}

#[test]
fn audit_rejects_beta_outside_unit_interval() {
    let dir = tempfile::tempdir().unwrap();
    let i = write_inputs(dir.path());
    let out = mlfair()
        .arg("audit")
        .arg("--graph")
        .arg(&i.graph)
        .arg("--data")
        .arg(dir.path().join("missing.csv"))
        .arg("--query")
        .arg(&i.query)
        .arg("--cf")
        .arg(&i.cf)
        .args(["--beta-grid", "0,1.5", "--out"])
        .arg(dir.path().join("audit.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta"));
}

#[test]
fn recorded_noise_requires_a_noise_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let i = write_inputs(d);
    let data = d.join("data.csv");
    run(mlfair()
        .args(["sample", "--n", "200", "--graph"])
        .arg(&i.graph)
        .arg("--params")
        .arg(&i.params)
        .arg("--out")
        .arg(&data));
    let out = mlfair()
        .arg("audit")
        .arg("--graph")
        .arg(&i.graph)
        .arg("--data")
        .arg(&data)
        .arg("--query")
        .arg(&i.query)
        .arg("--cf")
        .arg(&i.cf)
        .arg("--out")
        .arg(d.join("audit.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("noise"));
}

fn simulate(dir: &Path, seed: Option<&str>, sequential: bool) -> PathBuf {
    let config = dir.join("sim.json");
    fs::write(&config, r#"{"runs": 2, "n": 400, "beta_grid": [0.0, 0.5, 1.0]}"#).unwrap();
    let out = dir.join(format!("out-{}-{sequential}", seed.unwrap_or("default")));
    let mut cmd = mlfair();
    if let Some(s) = seed {
        cmd.env("MLFAIR_SEED", s);
    }
    if sequential {
        cmd.arg("--sequential");
    }
    run(cmd.arg("simulate").arg("--config").arg(&config).arg("--out").arg(&out));
    out
}

#[test]
fn simulate_writes_curves_densities_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(dir.path(), None, false);
    for v in ["ai_only", "ap_individual", "both_individual", "multilevel"] {
        let curve = fs::read_to_string(out.join(format!("curve_{v}.csv"))).unwrap();
        assert!(curve.starts_with("beta,residual_mean,residual_std,accuracy\n"));
        assert_eq!(curve.lines().count(), 4);
        let density = fs::read_to_string(out.join(format!("density_{v}.csv"))).unwrap();
        assert!(density.starts_with("bin_left,bin_right,count\n"));
        assert_eq!(density.lines().count(), 65);
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["master_seed"], 2024);
}

#[test]
fn simulate_is_deterministic_and_seeded_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), Some("7"), false);
    let b = simulate(dir.path(), Some("7"), true);
    let c = simulate(dir.path(), Some("8"), false);
    let read = |p: &Path| fs::read(p.join("curve_multilevel.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(
        fs::read(a.join("summary.json")).unwrap(),
        fs::read(b.join("summary.json")).unwrap()
    );
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["master_seed"], 7);
}

#[test]
fn bad_seed_in_environment_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mlfair()
        .env("MLFAIR_SEED", "not-a-number")
        .arg("simulate")
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MLFAIR_SEED"));
}

#[test]
fn adult_study_on_bundled_data() {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/adult.csv");
    if !data.exists() {
        eprintln!("skipping: {} not present", data.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("adult");
    run(mlfair().arg("adult").arg("--data").arg(&data).arg("--out").arg(&out));
    for name in [
        "curve_individual.csv",
        "curve_macro.csv",
        "curve_multilevel.csv",
        "density_fair.csv",
        "summary.json",
    ] {
        assert!(out.join(name).exists(), "{name}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rows"], 48842);
    assert!(summary["accuracy"]["unadjusted"].as_f64().unwrap() > 0.75);
}
