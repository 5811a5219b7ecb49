//! Per-node estimation: least squares via QR for linear-gaussian nodes and
//! iteratively reweighted least squares for Bernoulli-logistic nodes.

use log::warn;
use nalgebra::{DMatrix, DVector};

use super::{sigmoid, Dataset, NodeParams, ParamSet, RIDGE};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, ExecPolicy};
use crate::graph::{CausalGraph, NodeId};

pub const IRLS_MAX_ITER: usize = 100;
pub const IRLS_TOL: f64 = 1e-8;
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct OlsFit {
    /// Intercept first, then one entry per design column after it.
    pub beta: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Residual standard deviation with `n - k` degrees of freedom.
    pub sigma: f64,
    pub rank_deficient: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticFit {
    pub beta: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeFit {
    pub node: String,
    pub parents: Vec<String>,
    pub beta: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub sigma: Option<f64>,
    pub iterations: usize,
    pub rank_deficient: bool,
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub params: ParamSet,
    pub nodes: Vec<NodeFit>,
}

/// Ordinary least squares of `y` on the columns of `x` (the caller includes
/// the intercept column). Solved through a QR factorisation; a design whose
/// `R` has a negligible diagonal entry is treated as rank deficient and solved
/// from ridge-regularised normal equations instead.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if n < k || k == 0 {
        return Err(Error::TooFewRows {
            node: String::new(),
            rows: n,
            cols: k,
        });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let max_diag = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let rank_deficient = max_diag == 0.0 || (0..k).any(|i| r[(i, i)].abs() <= RANK_TOL * max_diag);

    let (beta, cov_diag) = if rank_deficient {
        let mut xtx = x.transpose() * x;
        for i in 0..k {
            xtx[(i, i)] += RIDGE;
        }
        let chol = xtx.cholesky().ok_or_else(|| Error::Singular(String::new()))?;
        let beta = chol.solve(&(x.transpose() * y));
        let inv = chol.inverse();
        (beta, (0..k).map(|i| inv[(i, i)]).collect::<Vec<_>>())
    } else {
        let qty = qr.q().transpose() * y;
        let beta = r
            .solve_upper_triangular(&qty)
            .ok_or_else(|| Error::Singular(String::new()))?;
        let r_inv = r
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .ok_or_else(|| Error::Singular(String::new()))?;
        let diag = (0..k)
            .map(|i| r_inv.row(i).iter().map(|v| v * v).sum::<f64>())
            .collect();
        (beta, diag)
    };
    let resid = y - x * &beta;
    let dof = n - k;
    let sigma = if dof > 0 {
        (resid.norm_squared() / dof as f64).sqrt()
    } else {
        0.0
    };
    Ok(OlsFit {
        beta: beta.iter().copied().collect(),
        std_errors: cov_diag.iter().map(|d| sigma * d.sqrt()).collect(),
        sigma,
        rank_deficient,
    })
}

/// Logistic regression by Newton/IRLS. The first column of `x` is taken to be
/// the intercept and is not penalised; the others get a `RIDGE` penalty.
pub fn irls(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LogisticFit> {
    let (n, k) = x.shape();
    if n < k || k == 0 {
        return Err(Error::TooFewRows {
            node: String::new(),
            rows: n,
            cols: k,
        });
    }
    let mut beta = DVector::zeros(k);
    let ybar = (y.sum() / n as f64).clamp(1e-6, 1.0 - 1e-6);
    beta[0] = (ybar / (1.0 - ybar)).ln();

    for it in 1..=IRLS_MAX_ITER {
        let eta = x * &beta;
        let mut wx = x.clone();
        let mut resid = DVector::zeros(n);
        for r in 0..n {
            let mu = sigmoid(eta[r]);
            let w = mu * (1.0 - mu);
            resid[r] = y[r] - mu;
            for c in 0..k {
                wx[(r, c)] *= w;
            }
        }
        let mut h = x.transpose() * &wx;
        let mut g = x.transpose() * &resid;
        for i in 1..k {
            h[(i, i)] += RIDGE;
            g[i] -= RIDGE * beta[i];
        }
        let chol = h.clone().cholesky().ok_or_else(|| Error::Singular(String::new()))?;
        let delta = chol.solve(&g);
        if delta.iter().any(|d| !d.is_finite()) {
            return Err(Error::Singular(String::new()));
        }
        beta += &delta;
        if delta.amax() <= IRLS_TOL {
            let inv = chol.inverse();
            return Ok(LogisticFit {
                beta: beta.iter().copied().collect(),
                std_errors: (0..k).map(|i| inv[(i, i)].sqrt()).collect(),
                iterations: it,
            });
        }
    }
    Err(Error::IrlsNonConvergence {
        node: String::new(),
        iterations: IRLS_MAX_ITER,
    })
}

fn design(graph: &CausalGraph, v: NodeId, data: &Dataset) -> Result<DMatrix<f64>> {
    let parents = graph.parents(v);
    let cols: Vec<&[f64]> = parents
        .iter()
        .map(|&p| data.require(graph.name(p)))
        .collect::<Result<_>>()?;
    let n = data.n_rows();
    Ok(DMatrix::from_fn(n, parents.len() + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            cols[c - 1][r]
        }
    }))
}

impl NodeFit {
    pub fn params(&self) -> NodeParams {
        NodeParams {
            intercept: self.beta[0],
            sigma: self.sigma,
            coefficients: self
                .parents
                .iter()
                .cloned()
                .zip(self.beta[1..].iter().copied())
                .collect(),
        }
    }
}

pub fn fit_node(graph: &CausalGraph, v: NodeId, data: &Dataset) -> Result<NodeFit> {
    let spec = graph.node(v);
    let name = spec.name.clone();
    let y = DVector::from_column_slice(data.require(&name)?);
    let x = design(graph, v, data)?;
    if x.nrows() <= graph.parents(v).len() {
        return Err(Error::TooFewRows {
            node: name,
            rows: x.nrows(),
            cols: x.ncols(),
        });
    }
    let parents = graph.parents(v).iter().map(|&p| graph.name(p).to_string()).collect();
    let tag = |e: Error| match e {
        Error::Singular(_) => Error::Singular(name.clone()),
        Error::IrlsNonConvergence { iterations, .. } => Error::IrlsNonConvergence {
            node: name.clone(),
            iterations,
        },
        Error::TooFewRows { rows, cols, .. } => Error::TooFewRows {
            node: name.clone(),
            rows,
            cols,
        },
        other => other,
    };
    if spec.is_binary() {
        if let Some(bad) = y.iter().find(|&&t| t != 0.0 && t != 1.0) {
            return Err(Error::Dataset(format!("binary node `{name}` holds {bad}")));
        }
        let fit = irls(&x, &y).map_err(tag)?;
        Ok(NodeFit {
            node: name,
            parents,
            beta: fit.beta,
            std_errors: fit.std_errors,
            sigma: None,
            iterations: fit.iterations,
            rank_deficient: false,
        })
    } else {
        let fit = ols(&x, &y).map_err(tag)?;
        Ok(NodeFit {
            node: name,
            parents,
            beta: fit.beta,
            std_errors: fit.std_errors,
            sigma: Some(fit.sigma),
            iterations: 1,
            rank_deficient: fit.rank_deficient,
        })
    }
}

pub fn fit_params(graph: &CausalGraph, data: &Dataset) -> Result<ParamSet> {
    fit_params_report(graph, data, ExecPolicy::default()).map(|r| r.params)
}

/// Fit every node independently (nodes in parallel under `policy`).
pub fn fit_params_report(graph: &CausalGraph, data: &Dataset, policy: ExecPolicy) -> Result<FitReport> {
    for spec in graph.nodes() {
        data.require(&spec.name)?;
    }
    let fits = map_indexed(policy, graph.len(), |v| fit_node(graph, v, data));
    let mut params = ParamSet::default();
    let mut nodes = Vec::with_capacity(fits.len());
    for fit in fits {
        let fit = fit?;
        if fit.rank_deficient {
            let msg = format!(
                "node `{}`: rank-deficient design, ridge {RIDGE} added to the normal equations",
                fit.node
            );
            warn!("{msg}");
            params.warnings.push(msg);
        }
        params.nodes.insert(fit.node.clone(), fit.params());
        nodes.push(fit);
    }
    Ok(FitReport { params, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Family, NodeSpec, Sensitivity};

    fn xy_graph(family: Family) -> CausalGraph {
        CausalGraph::new(
            vec![
                NodeSpec::individual("X", Sensitivity::Nonsensitive, Family::LinearGaussian),
                NodeSpec::individual("Y", Sensitivity::Outcome, family),
            ],
            &[("X", "Y")],
            &[] as &[Vec<&str>],
        )
        .unwrap()
    }

    #[test]
    fn exact_linear_fit() {
        let g = xy_graph(Family::LinearGaussian);
        let mut ds = Dataset::new(3);
        ds.push_column("X", vec![0.0, 1.0, 2.0], false).unwrap();
        ds.push_column("Y", vec![1.0, 3.0, 5.0], false).unwrap();
        let ps = fit_params(&g, &ds).unwrap();
        let y = ps.node("Y").unwrap();
        assert!((y.intercept - 1.0).abs() < 1e-12);
        assert!((y.coefficients["X"] - 2.0).abs() < 1e-12);
        assert!(y.sigma.unwrap() < 1e-12);
        assert!(ps.warnings.is_empty());
    }

    #[test]
    fn symmetric_logistic_has_zero_intercept() {
        let g = xy_graph(Family::BernoulliLogistic);
        let xs = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0, -1.5, 1.5];
        let ys = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let mut xcol = xs.to_vec();
        let mut ycol = ys.to_vec();
        for (x, y) in xs.iter().zip(ys) {
            xcol.push(-x);
            ycol.push(1.0 - y);
        }
        let mut ds = Dataset::new(xcol.len());
        ds.push_column("X", xcol, false).unwrap();
        ds.push_column("Y", ycol, true).unwrap();
        let ps = fit_params(&g, &ds).unwrap();
        assert!(ps.node("Y").unwrap().intercept.abs() < 1e-10);
        assert!(ps.node("Y").unwrap().sigma.is_none());
    }

    #[test]
    fn rank_deficient_design_warns() {
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[
                1.0, 1.0, 2.0, //
                1.0, 2.0, 4.0, //
                1.0, 3.0, 6.0, //
                1.0, 4.0, 8.0,
            ],
        );
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let fit = ols(&x, &y).unwrap();
        assert!(fit.rank_deficient);
        let pred = &x * DVector::from_vec(fit.beta.clone());
        assert!((pred - y).amax() < 1e-4);
    }

    #[test]
    fn irls_matches_closed_form_for_saturated_binary_predictor() {
        // Two groups: x = 0 with 1/4 positives, x = 1 with 3/4 positives.
        let x = DMatrix::from_fn(8, 2, |r, c| if c == 0 { 1.0 } else { (r / 4) as f64 });
        let y = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        let fit = irls(&x, &y).unwrap();
        let b0 = (1.0f64 / 3.0).ln();
        assert!((fit.beta[0] - b0).abs() < 1e-5);
        assert!((fit.beta[1] - (-2.0 * b0)).abs() < 1e-5);
    }

    #[test]
    fn too_few_rows() {
        let g = xy_graph(Family::LinearGaussian);
        let mut ds = Dataset::new(1);
        ds.push_column("X", vec![0.0], false).unwrap();
        ds.push_column("Y", vec![1.0], false).unwrap();
        assert!(matches!(fit_params(&g, &ds), Err(Error::TooFewRows { .. })));
    }
}
