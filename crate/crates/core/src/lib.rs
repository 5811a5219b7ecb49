//! Multi-level path-specific counterfactual fairness for linear structural
//! causal models.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: typed causal graphs, path enumeration, identification checks.
//! * [`sem`]: sampling and fitting linear-gaussian / Bernoulli-logistic SEMs.
//! * [`pse`]: closed-form path-specific effects and a Monte-Carlo oracle.
//! * [`counterfactual`]: path-specific counterfactual datasets.
//! * [`audit`]: fair prediction by PSE subtraction and residual-unfairness audits.
//! * [`experiments`]: the synthetic and Adult income studies.

pub mod audit;
pub mod counterfactual;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod fixtures;
pub mod graph;
pub mod pse;
pub mod rng;
pub mod sem;

pub use error::{Error, Result};
pub use exec::ExecPolicy;
