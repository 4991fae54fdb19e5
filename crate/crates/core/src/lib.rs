//! Tail estimation for heavy-tailed time series.
//!
//! * [`distributions`]: two-sided Pareto innovation laws.
//! * [`simulate`]: linear and log-perturbed AR(1) series, stochastic
//!   recurrence equations, geometric random walks.
//! * [`estimators`]: Hill and Weissman estimators, direct and residual based.
//! * [`theory`]: closed-form asymptotics for linear processes.
//! * [`extremal`]: Monte Carlo extremal functionals of the recurrence equation.
//! * [`diagnostics`]: residual randomness tests.
//! * [`experiments`]: the replicated simulation harness.
//!
//! All randomness flows from an explicit [`RngState`]; parallel work uses
//! derived substreams so results do not depend on the thread count.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod extremal;
pub mod rng;
pub mod simulate;
pub mod theory;

pub use distributions::{InnovationKind, InnovationSpec};
pub use error::{Error, Result};
pub use estimators::{EstimatorOptions, QuantileTarget};
pub use rng::RngState;
pub use simulate::{ModelVariant, SeriesModel, SreDriver, WalkEnsemble};
