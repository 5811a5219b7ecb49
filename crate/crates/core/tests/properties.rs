use proptest::prelude::*;

use mlfair::audit::{fair_predict, residual_unfairness, AuditMode, FairPredictConfig};
use mlfair::counterfactual::{generate_counterfactual, CounterfactualConfig, NoiseSource};
use mlfair::experiments::{histogram, tv_distance};
use mlfair::fixtures::{self, MULTILEVEL_EDGES};
use mlfair::graph::{enumerate_paths, CausalGraph};
use mlfair::pse::{compute_pse_linear, counterfactual_mean, PseQuery};
use mlfair::sem::{predict_outcome, sample_dataset, ParamSet, RootConfig, RootDistribution, SemModel};

fn params_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(-2.0f64..2.0, MULTILEVEL_EDGES.len()),
        prop::collection::vec(-1.0f64..1.0, 5),
    )
}

fn model(graph: CausalGraph, coefs: &[f64], intercepts: &[f64]) -> SemModel {
    let mut ps = ParamSet::zeros(&graph);
    for ((parent, child), &c) in MULTILEVEL_EDGES.iter().zip(coefs) {
        ps.set_coefficient(child, parent, c);
    }
    for (spec, &b) in graph.nodes().iter().zip(intercepts) {
        ps.node_mut(&spec.name).intercept = b;
    }
    SemModel::new(graph, ps).unwrap()
}

fn bernoulli_root() -> RootConfig {
    RootConfig::from([("A_P".to_string(), RootDistribution::Bernoulli { p: 0.5 })])
}

fn full_query(g: &CausalGraph, ap: f64, ai: f64) -> PseQuery {
    PseQuery::new()
        .intervene("A_P", ap, 0.0)
        .intervene("A_I", ai, 0.0)
        .with_paths(g, g.unfair_paths())
}

fn paths_from(g: &CausalGraph, src: &str) -> Vec<Vec<String>> {
    enumerate_paths(g, g.id(src).unwrap(), g.outcome())
        .iter()
        .map(|p| g.path_names(p))
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beta_zero_returns_plain_predictions((c, b) in params_strategy(), seed in 0u64..1000) {
        let m = model(fixtures::multilevel_graph(), &c, &b);
        let ds = sample_dataset(&m, 100, seed, &bernoulli_root()).unwrap();
        let cfg = FairPredictConfig::new(0.0, full_query(m.graph(), 1.0, 1.0)).unwrap();
        prop_assert_eq!(fair_predict(&m, &ds, &cfg).unwrap(), predict_outcome(&m, &ds).unwrap());
    }

    #[test]
    fn zero_delta_gives_zero_effect((c, b) in params_strategy(), ap in -3.0f64..3.0, ai in 0.0f64..1.0) {
        let m = model(fixtures::multilevel_graph_gaussian_outcome(), &c, &b);
        let q = full_query(m.graph(), ap, ai).at_baseline();
        let r = compute_pse_linear(&m, &q).unwrap();
        prop_assert_eq!(r.value, 0.0);
        prop_assert!(r.per_path.iter().all(|p| p.contribution == 0.0));
    }

    #[test]
    fn identity_flip_changes_nothing((c, b) in params_strategy(), seed in 0u64..1000) {
        let m = model(fixtures::multilevel_graph(), &c, &b);
        let roots = RootConfig::from([("A_P".to_string(), RootDistribution::Constant { value: 1.0 })]);
        let ds = sample_dataset(&m, 80, seed, &roots).unwrap();
        let cfg = CounterfactualConfig {
            flips: [("A_P".to_string(), 1.0)].into(),
            scope: paths_from(m.graph(), "A_P"),
            noise_source: NoiseSource::Recorded,
        };
        prop_assert!(generate_counterfactual(&m, &ds, &cfg).unwrap().bit_identical(&ds));
    }

    #[test]
    fn double_flip_restores_the_data((c, b) in params_strategy(), seed in 0u64..1000) {
        let m = model(fixtures::multilevel_graph(), &c, &b);
        let roots = RootConfig::from([("A_P".to_string(), RootDistribution::Constant { value: 1.0 })]);
        let ds = sample_dataset(&m, 80, seed, &roots).unwrap();
        let flip = |v: f64| CounterfactualConfig {
            flips: [("A_P".to_string(), v)].into(),
            scope: paths_from(m.graph(), "A_P"),
            noise_source: NoiseSource::Recorded,
        };
        let there = generate_counterfactual(&m, &ds, &flip(0.0)).unwrap();
        let back = generate_counterfactual(&m, &there, &flip(1.0)).unwrap();
        for name in ["A_I", "Y"] {
            prop_assert_eq!(back.column(name), ds.column(name));
        }
        for name in ["P", "I"] {
            prop_assert!(max_abs_diff(back.column(name).unwrap(), ds.column(name).unwrap()) <= 1e-9);
        }
    }

    #[test]
    fn sampling_is_a_function_of_the_seed((c, b) in params_strategy(), seed in 0u64..1000) {
        let m = model(fixtures::multilevel_graph(), &c, &b);
        let a = sample_dataset(&m, 60, seed, &bernoulli_root()).unwrap();
        let again = sample_dataset(&m, 60, seed, &bernoulli_root()).unwrap();
        prop_assert!(a.bit_identical(&again));
    }

    #[test]
    fn single_origin_effects_add_over_first_edges((c, b) in params_strategy(), mask in 1u8..7) {
        // Paths grouped by their first edge form edge-closed sets.
        let m = model(fixtures::multilevel_graph(), &c, &b);
        let paths = paths_from(m.graph(), "A_P");
        let (left, right): (Vec<_>, Vec<_>) = paths.iter().cloned().partition(|p| {
            let group = ["P", "I", "A_I"].iter().position(|n| p[1] == *n).unwrap();
            mask & (1 << group) != 0
        });
        let query = |ps: Vec<Vec<String>>| PseQuery { paths: ps, ..PseQuery::new().intervene("A_P", 1.0, 0.0) };
        let whole = compute_pse_linear(&m, &query(paths)).unwrap().value;
        let l = compute_pse_linear(&m, &query(left)).unwrap().value;
        let r = compute_pse_linear(&m, &query(right)).unwrap().value;
        prop_assert!((whole - l - r).abs() <= 1e-9);
    }

    #[test]
    fn effect_is_a_difference_of_counterfactual_means((c, b) in params_strategy(), ap in -2.0f64..2.0, ai in 0.0f64..1.0) {
        let m = model(fixtures::multilevel_graph_gaussian_outcome(), &c, &b);
        let q = full_query(m.graph(), ap, ai);
        let pse = compute_pse_linear(&m, &q).unwrap().value;
        let diff = counterfactual_mean(&m, &q).unwrap() - counterfactual_mean(&m, &q.at_baseline()).unwrap();
        prop_assert!((pse - diff).abs() <= 1e-9);
    }

    #[test]
    fn effect_scales_with_the_contrast((c, b) in params_strategy(), k in -3.0f64..3.0) {
        let m = model(fixtures::multilevel_graph_gaussian_outcome(), &c, &b);
        let one = compute_pse_linear(&m, &full_query(m.graph(), 1.0, 1.0)).unwrap().value;
        let scaled = compute_pse_linear(&m, &full_query(m.graph(), k, k)).unwrap().value;
        prop_assert!((scaled - k * one).abs() <= 1e-9 * (1.0 + one.abs() * k.abs()));
    }

    #[test]
    fn residual_is_non_negative((c, b) in params_strategy(), beta in 0.0f64..=1.0, seed in 0u64..1000) {
        let m = model(fixtures::multilevel_graph(), &c, &b);
        let ds = sample_dataset(&m, 100, seed, &bernoulli_root()).unwrap();
        let q = full_query(m.graph(), 1.0, 1.0);
        let cf = CounterfactualConfig::for_query(&q);
        let r = residual_unfairness(&m, &ds, &FairPredictConfig::new(beta, q).unwrap(), &cf, AuditMode::SharedModel).unwrap();
        prop_assert!(r.mean >= 0.0 && r.std >= 0.0);
    }

    #[test]
    fn histograms_count_finite_values(values in prop::collection::vec(prop_oneof![-0.5f64..1.5, Just(f64::NAN)], 1..200)) {
        let h = histogram(&values);
        let finite = values.iter().filter(|v| !v.is_nan()).count() as u64;
        prop_assert_eq!(h.iter().sum::<u64>(), finite);
        if finite > 0 {
            let tv = tv_distance(&h, &h);
            prop_assert_eq!(tv, 0.0);
        }
    }

    #[test]
    fn tv_is_a_bounded_symmetric_distance(
        a in prop::collection::vec(0.0f64..=1.0, 1..100),
        b in prop::collection::vec(0.0f64..=1.0, 1..100),
    ) {
        let (ha, hb) = (histogram(&a), histogram(&b));
        let d = tv_distance(&ha, &hb);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
        prop_assert!((d - tv_distance(&hb, &ha)).abs() <= 1e-12);
    }
}
