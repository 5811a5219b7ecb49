use std::collections::BTreeMap;

use super::{resolve, EffectScale, PathContribution, PseQuery, PseResult, ResolvedQuery};
use crate::error::{Error, Result};
use crate::graph::{check_multilevel_identifiability, NodeId};
use crate::sem::{ParamSet, SemModel};

/// Product of edge coefficients along `path` (node names, source first).
pub fn path_coefficient_product(params: &ParamSet, path: &[&str]) -> Result<f64> {
    let mut product = 1.0;
    for w in path.windows(2) {
        let c = params.coefficient(w[1], w[0]).ok_or_else(|| Error::Params {
            node: w[1].to_string(),
            reason: format!("no coefficient for edge {} -> {}", w[0], w[1]),
        })?;
        product *= c;
    }
    Ok(product)
}

fn checked(model: &SemModel, query: &PseQuery) -> Result<ResolvedQuery> {
    check_multilevel_identifiability(model.graph()).map_err(|v| Error::Identifiability(v.to_string()))?;
    resolve(model.graph(), query)
}

/// Closed-form effect: sum over non-blocked paths of the coefficient product
/// times the origin's `observed - baseline`.
pub fn compute_pse_linear(model: &SemModel, query: &PseQuery) -> Result<PseResult> {
    let q = checked(model, query)?;
    let graph = model.graph();
    let mut per_path = Vec::with_capacity(q.paths.len());
    let mut value = 0.0;
    let mut linearized = Vec::new();
    for (p, &blocked) in q.paths.iter().zip(&q.blocked) {
        let names: Vec<&str> = p.nodes().iter().map(|&v| graph.name(v)).collect();
        let product = path_coefficient_product(model.params(), &names)?;
        let (obs, base) = q.fixed[p.source()].expect("origin intervened");
        let delta = obs - base;
        let contribution = if blocked { 0.0 } else { product * delta };
        value += contribution;
        if !blocked {
            for &v in &p.nodes()[1..] {
                if graph.node(v).is_binary() && !linearized.contains(&v) {
                    linearized.push(v);
                }
            }
        }
        per_path.push(PathContribution {
            path: names.iter().map(|s| s.to_string()).collect(),
            coefficient_product: product,
            delta,
            contribution,
            blocked,
        });
    }
    linearized.sort_unstable();
    let scale = if model.equation(graph.outcome()).binary {
        EffectScale::LogOdds
    } else {
        EffectScale::Identity
    };
    Ok(PseResult {
        value,
        per_path,
        scale,
        linearized_binary: linearized.into_iter().map(|v| graph.name(v).to_string()).collect(),
    })
}

/// Zero-noise lanes: `(baseline lane, π lane)` per node.
pub(crate) fn mean_lanes(model: &SemModel, q: &ResolvedQuery) -> (Vec<f64>, Vec<f64>) {
    let n = model.graph().len();
    let mut base = vec![0.0; n];
    let mut pi = vec![0.0; n];
    for &v in model.order() {
        if let Some((obs, b)) = q.fixed[v] {
            base[v] = b;
            pi[v] = obs;
            continue;
        }
        let eq = model.equation(v);
        let mut lb = eq.intercept;
        let mut lp = eq.intercept;
        for (i, (&p, &c)) in eq.parents.iter().zip(&eq.coefficients).enumerate() {
            lb += c * base[p];
            lp += c * if q.active[v][i] { pi[p] } else { base[p] };
        }
        base[v] = lb;
        pi[v] = lp;
    }
    (base, pi)
}

/// Mean of the nested counterfactual outcome: observed values travel along π,
/// baselines everywhere else, non-intervened roots sit at their intercept.
pub fn counterfactual_mean(model: &SemModel, query: &PseQuery) -> Result<f64> {
    let q = checked(model, query)?;
    let (_, pi) = mean_lanes(model, &q);
    Ok(pi[model.graph().outcome()])
}

/// Mean of `target` under `do(node = value, ...)`, composing the linear
/// equations in topological order.
pub fn interventional_mean(model: &SemModel, target: &str, assignments: &BTreeMap<String, f64>) -> Result<f64> {
    let graph = model.graph();
    let t = graph.require(target)?;
    let mut fixed: Vec<Option<f64>> = vec![None; graph.len()];
    for (name, &value) in assignments {
        let v: NodeId = graph.require(name)?;
        fixed[v] = Some(value);
    }
    let mut mean = vec![0.0; graph.len()];
    for &v in model.order() {
        mean[v] = match fixed[v] {
            Some(x) => x,
            None => model.equation(v).linear(|p| mean[p]),
        };
    }
    Ok(mean[t])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::{CausalGraph, Family, MacroCategory, NodeSpec, Sensitivity};

    fn multilevel(theta: &[(&str, &str, f64)]) -> SemModel {
        let g = fixtures::multilevel_graph();
        let mut ps = ParamSet::zeros(&g);
        for &(child, parent, c) in theta {
            ps.set_coefficient(child, parent, c);
        }
        SemModel::new(g, ps).unwrap()
    }

    fn eq8_query() -> PseQuery {
        PseQuery::new()
            .intervene("A_P", 1.0, 0.0)
            .intervene("A_I", 1.0, 0.0)
            .path(&["A_P", "I", "Y"])
            .path(&["A_P", "A_I", "I", "Y"])
            .path(&["A_P", "P", "A_I", "I", "Y"])
            .path(&["A_I", "I", "Y"])
    }

    #[test]
    fn path_products() {
        let m = multilevel(&[
            ("P", "A_P", 0.3),
            ("Y", "P", 0.5),
            ("Y", "I", 0.7),
            ("I", "A_I", 0.2),
            ("A_I", "A_P", 0.4),
        ]);
        let ps = m.params();
        assert!((path_coefficient_product(ps, &["A_P", "P", "Y"]).unwrap() - 0.15).abs() < 1e-15);
        assert!((path_coefficient_product(ps, &["A_P", "A_I", "I", "Y"]).unwrap() - 0.7 * 0.2 * 0.4).abs() < 1e-15);
        assert_eq!(path_coefficient_product(ps, &["Y", "P"]).ok(), None);
        assert_eq!(path_coefficient_product(ps, &["I", "Y"]).unwrap(), 0.7);
    }

    #[test]
    fn direct_evaluation_of_both_attribute_effect() {
        let m = multilevel(&[("Y", "I", 0.5), ("I", "A_I", 0.3), ("I", "A_P", 0.4)]);
        let r = compute_pse_linear(&m, &eq8_query()).unwrap();
        assert!((r.value - 0.35).abs() < 1e-15);
        assert_eq!(r.scale, EffectScale::LogOdds);
        assert_eq!(r.linearized_binary, vec!["Y".to_string()]);
        let sum: f64 = r.per_path.iter().map(|c| c.contribution).sum();
        assert_eq!(sum, r.value);
    }

    #[test]
    fn zero_delta_is_zero() {
        let m = multilevel(&[("Y", "I", 0.5), ("I", "A_I", 0.3), ("I", "A_P", 0.4)]);
        let q = eq8_query().at_baseline();
        let r = compute_pse_linear(&m, &q).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.per_path.iter().all(|c| c.contribution == 0.0));
    }

    #[test]
    fn binary_mediator_is_flagged() {
        let m = multilevel(&[("Y", "I", 0.5), ("I", "A_I", 0.3), ("A_I", "A_P", 0.4)]);
        let q = PseQuery::new()
            .intervene("A_P", 1.0, 0.0)
            .path(&["A_P", "A_I", "I", "Y"]);
        let r = compute_pse_linear(&m, &q).unwrap();
        assert_eq!(r.linearized_binary, vec!["A_I".to_string(), "Y".to_string()]);
        assert!((r.value - 0.06).abs() < 1e-15);
    }

    #[test]
    fn counterfactual_mean_expansion() {
        let theta = [
            ("P", "A_P", 0.31),
            ("I", "A_P", 0.42),
            ("A_I", "A_P", 0.53),
            ("A_I", "P", 0.24),
            ("Y", "P", 0.65),
            ("I", "A_I", 0.36),
            ("Y", "A_I", 0.87),
            ("Y", "I", 0.48),
        ];
        let g = fixtures::multilevel_graph();
        let mut ps = ParamSet::zeros(&g);
        for &(c, p, v) in &theta {
            ps.set_coefficient(c, p, v);
        }
        let (ty, ti, tp, tai) = (0.2, 0.3, 0.4, 0.5);
        ps.node_mut("Y").intercept = ty;
        ps.node_mut("I").intercept = ti;
        ps.node_mut("P").intercept = tp;
        ps.node_mut("A_I").intercept = tai;
        let m = SemModel::new(g, ps).unwrap();
        let (a_p, a_p0, a_i, a_i0) = (1.0, 0.0, 1.0, 0.0);
        let q = PseQuery::new()
            .intervene("A_P", a_p, a_p0)
            .intervene("A_I", a_i, a_i0)
            .path(&["A_P", "I", "Y"])
            .path(&["A_I", "I", "Y"]);
        let got = counterfactual_mean(&m, &q).unwrap();
        let expected =
            ty + 0.48 * ti + 0.65 * tp + 0.87 * a_i0 + 0.48 * 0.36 * a_i + 0.48 * 0.42 * a_p + 0.65 * 0.31 * a_p0;
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
        let pse = compute_pse_linear(&m, &q).unwrap().value;
        let diff = got - counterfactual_mean(&m, &q.at_baseline()).unwrap();
        assert!((diff - pse).abs() < 1e-10);
    }

    #[test]
    fn zero_coefficients_give_outcome_intercept() {
        let g = fixtures::multilevel_graph();
        let mut ps = ParamSet::zeros(&g);
        ps.node_mut("Y").intercept = 0.2;
        ps.node_mut("I").intercept = 3.0;
        let m = SemModel::new(g, ps).unwrap();
        assert_eq!(counterfactual_mean(&m, &eq8_query()).unwrap(), 0.2);
    }

    #[test]
    fn non_interacting_levels() {
        // P and I disconnected: do(P) leaves the mean of I alone.
        let g = CausalGraph::new(
            vec![
                NodeSpec::macro_level(
                    "P",
                    Sensitivity::Nonsensitive,
                    Family::LinearGaussian,
                    MacroCategory::Nonaggregate,
                ),
                NodeSpec::individual("I", Sensitivity::Nonsensitive, Family::LinearGaussian),
                NodeSpec::individual("Y", Sensitivity::Outcome, Family::LinearGaussian),
            ],
            &[("P", "Y"), ("I", "Y")],
            &[] as &[Vec<&str>],
        )
        .unwrap();
        let mut ps = ParamSet::zeros(&g);
        ps.node_mut("I").intercept = 1.3;
        ps.set_coefficient("Y", "P", 0.5);
        ps.set_coefficient("Y", "I", 0.25);
        let m = SemModel::new(g, ps).unwrap();
        let none = interventional_mean(&m, "I", &BTreeMap::new()).unwrap();
        let with = interventional_mean(&m, "I", &BTreeMap::from([("P".to_string(), 7.0)])).unwrap();
        assert_eq!(none, with);
        let all = BTreeMap::from([("P".to_string(), 0.0), ("I".to_string(), 0.0)]);
        assert_eq!(interventional_mean(&m, "Y", &all).unwrap(), 0.0);
    }

    #[test]
    fn chain_composition() {
        let g = CausalGraph::new(
            vec![
                NodeSpec::individual("A", Sensitivity::Sensitive, Family::LinearGaussian),
                NodeSpec::individual("B", Sensitivity::Nonsensitive, Family::LinearGaussian),
                NodeSpec::individual("C", Sensitivity::Outcome, Family::LinearGaussian),
            ],
            &[("A", "B"), ("B", "C")],
            &[] as &[Vec<&str>],
        )
        .unwrap();
        let mut ps = ParamSet::zeros(&g);
        ps.set_coefficient("B", "A", 0.6);
        ps.set_coefficient("C", "B", -1.5);
        let m = SemModel::new(g, ps).unwrap();
        let got = interventional_mean(&m, "C", &BTreeMap::from([("A".to_string(), 1.0)])).unwrap();
        assert_eq!(got, 0.6 * -1.5);
        assert!(interventional_mean(&m, "Q", &BTreeMap::new()).is_err());
    }

    #[test]
    fn identifiability_violation_is_error() {
        let g = CausalGraph::new(
            vec![
                NodeSpec::individual("I", Sensitivity::Nonsensitive, Family::LinearGaussian),
                NodeSpec::macro_level(
                    "A_P",
                    Sensitivity::Sensitive,
                    Family::LinearGaussian,
                    MacroCategory::Nonaggregate,
                ),
                NodeSpec::individual("Y", Sensitivity::Outcome, Family::LinearGaussian),
            ],
            &[("I", "A_P"), ("A_P", "Y")],
            &[] as &[Vec<&str>],
        )
        .unwrap();
        let m = SemModel::new(g.clone(), ParamSet::zeros(&g)).unwrap();
        let q = PseQuery::new().intervene("A_P", 1.0, 0.0).path(&["A_P", "Y"]);
        assert!(matches!(compute_pse_linear(&m, &q), Err(Error::Identifiability(_))));
    }
}
