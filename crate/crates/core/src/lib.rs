//! Bayesian nonparametric conditional independence testing.
//!
//! Given samples of a real-valued triple `(X, Y, Z)`, the crate computes the
//! posterior probability that `X` and `Y` are dependent conditionally on `Z`.
//! Each of the conditional densities `X|Z`, `Y|Z` and `(X,Y)|Z` gets a
//! nonparametric prior: the `Z` axis is split by an optional-stopping
//! recursive partition, and inside every `Z` block the response is modelled
//! by a truncated Pólya tree with a uniform base measure. All randomness is
//! integrated out analytically, so the three conditional marginal likelihoods
//! are exact and their ratio is a Bayes factor.
//!
//! Module map:
//!
//! - [`partition`]: dyadic and Gaussian-quantile recursive partitions, node
//!   addressing, separating prunes.
//! - [`tpt`]: truncated Pólya tree densities, predictive densities and
//!   marginal likelihoods (two independent formulas).
//! - [`condopt`]: the conditional marginal likelihood recursion over a `Z`
//!   partition.
//! - [`bftest`]: Bayes factor and posterior assembly, pairwise dependence
//!   graphs, hyperparameter grids.
//! - [`datahub`]: CSV ingestion, rescaling, subsampling, synthetic models.
//! - [`oracle`]: brute-force validators used by the tests.
//! - [`cli`]: the `bnpci` command line.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod bftest;
pub mod cli;
pub mod condopt;
pub mod datahub;
pub mod error;
pub mod logspace;
pub mod oracle;
pub mod partition;
pub mod tpt;

pub use bftest::{
    posterior_h1, run_pairwise, run_test, run_test_unit, select_c, sweep, CValues,
    DependenceGraph, ResponseKind, TestConfig, TestProblem, TestResult,
};
pub use condopt::{CondModelSpec, PhiTable, Rho};
pub use datahub::{load_csv, Dataset, Rescale, RescaleMethod, SyntheticModel, SyntheticSpec};
pub use error::{Error, Result};
pub use partition::{build_dyadic, build_quantile, separating_prune, Dim, NodeWord, PartitionTree};
pub use tpt::TptParams;
