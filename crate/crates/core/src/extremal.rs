//! Extremal-dependence functionals of the stationary solution of
//! `X_t = A_t X_{t-1} + B_t`, evaluated by Monte Carlo over the geometric
//! random walk `W_j = prod_{i<=j} A_i^kappa`.
//!
//! With `U_k` the `k`-th largest of `W_1, W_2, ...`:
//!
//! * extremal index `theta = 1 - E min(U_1, 1)`;
//! * `theta_k = E[min(U_{k-1}, 1) - min(U_k, 1)]` (with `min(U_0, 1) = 1`) and
//!   cluster size probabilities `pi_k = (theta_k - theta_{k+1}) / theta`;
//! * Hill asymptotic variance `kappa^-2 (1 + 2 sum_{j>=1} E min(W_j, 1))`;
//! * joint exceedance limits `E min_j (x_j^-kappa W_j)` / `E max_j (x_j^-kappa W_j)`.
//!
//! Every path is reduced independently (in parallel) and the per-path values
//! are then summed in path order, so results do not depend on the number of
//! worker threads. Walks are truncated at the ensemble horizon `J`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::WalkEnsemble;

/// Default tolerance on the omitted tail of the Hill variance series.
pub const DEFAULT_HORIZON_TOL: f64 = 1e-3;

/// A Monte Carlo point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
}

impl McEstimate {
    fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            value: mean,
            stderr: (var / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalSummary {
    pub theta: f64,
    pub theta_stderr: f64,
    /// `theta_k` for `k = 1..=kmax`.
    pub theta_k: Vec<f64>,
    pub theta_k_stderr: Vec<f64>,
    /// `pi_k` for `k = 1..=kmax`.
    pub pi_k: Vec<f64>,
    /// Standard errors of `pi_k`, treating `theta` as known.
    pub pi_k_stderr: Vec<f64>,
    /// `theta_{kmax+1}`; `sum_{k<=kmax} pi_k + theta_{kmax+1}/theta = 1`.
    pub theta_next: f64,
    /// `E min(U_{kmax+1}, 1)`.
    pub horizon_remainder: f64,
    /// Bound on the contribution of `W_j`, `j > J`, to any `E min(U_k, 1)`.
    pub truncation_bound: f64,
}

impl ExtremalSummary {
    /// `sum_k k pi_k` over `k <= kmax`.
    pub fn mean_cluster_size(&self) -> f64 {
        self.pi_k
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum()
    }
}

/// Coordinate thresholds `x_0..x_{k-1}` of a joint exceedance query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointExceedanceQuery {
    pub x: Vec<f64>,
    pub mode: ExceedanceMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExceedanceMode {
    /// All of `X_1..X_k` exceed their thresholds.
    All,
    /// At least one of them does.
    Some,
}

fn per_path<F>(ensemble: &WalkEnsemble, f: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    (0..ensemble.n_paths())
        .into_par_iter()
        .map(|i| f(ensemble.path(i)))
        .collect()
}

/// `theta = 1 - E min(max_{j<=J} W_j, 1)`.
pub fn extremal_index(ensemble: &WalkEnsemble) -> McEstimate {
    let d = per_path(ensemble, |p| 1.0 - p.iter().copied().fold(0.0, f64::max).min(1.0));
    McEstimate::from_values(&d)
}

/// Cluster size distribution from the top `kmax + 1` values of every path.
pub fn cluster_size_probs(ensemble: &WalkEnsemble, kmax: usize) -> Result<ExtremalSummary> {
    if kmax == 0 {
        return Err(Error::Config("kmax must be at least 1".into()));
    }
    if ensemble.horizon() <= kmax {
        return Err(Error::Config(format!(
            "horizon {} must exceed kmax = {kmax}",
            ensemble.horizon()
        )));
    }
    // per path: min(U_k, 1) for k = 0..=kmax+1
    let levels: Vec<Vec<f64>> = (0..ensemble.n_paths())
        .into_par_iter()
        .map(|i| {
            let mut top = ensemble.path(i).to_vec();
            top.select_nth_unstable_by(kmax, |a, b| b.total_cmp(a));
            top.truncate(kmax + 1);
            top.sort_by(|a, b| b.total_cmp(a));
            std::iter::once(1.0)
                .chain(top.into_iter().map(|u| u.min(1.0)))
                .collect()
        })
        .collect();

    // theta_k for k = 1..=kmax+1
    let mut theta_k = Vec::with_capacity(kmax + 1);
    let mut theta_k_stderr = Vec::with_capacity(kmax + 1);
    let mut diffs = vec![0.0; levels.len()];
    for k in 1..=kmax + 1 {
        for (d, l) in diffs.iter_mut().zip(&levels) {
            *d = l[k - 1] - l[k];
        }
        let e = McEstimate::from_values(&diffs);
        theta_k.push(e.value);
        theta_k_stderr.push(e.stderr);
    }
    let theta = theta_k[0];
    let theta_stderr = theta_k_stderr[0];

    let mut pi_k = Vec::with_capacity(kmax);
    let mut pi_k_stderr = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        if theta > 0.0 {
            for (d, l) in diffs.iter_mut().zip(&levels) {
                *d = (l[k - 1] - 2.0 * l[k] + l[k + 1]) / theta;
            }
            let e = McEstimate::from_values(&diffs);
            pi_k.push(e.value);
            pi_k_stderr.push(e.stderr);
        } else {
            pi_k.push(f64::NAN);
            pi_k_stderr.push(f64::NAN);
        }
    }

    let horizon_remainder =
        levels.iter().map(|l| l[kmax + 1]).sum::<f64>() / levels.len() as f64;
    let theta_next = theta_k[kmax];
    theta_k.truncate(kmax);
    theta_k_stderr.truncate(kmax);

    Ok(ExtremalSummary {
        theta,
        theta_stderr,
        theta_k,
        theta_k_stderr,
        pi_k,
        pi_k_stderr,
        theta_next,
        horizon_remainder,
        truncation_bound: ensemble.tail_bound(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SreHillVariance {
    pub variance: f64,
    pub stderr: f64,
    /// Bound on `2 kappa^-2 sum_{j>J} E min(W_j, 1)`, the omitted tail.
    pub tail_bound: f64,
}

/// Hill asymptotic variance `kappa^-2 (1 + 2 sum_{j=1..J} E min(W_j, 1))`.
pub fn hill_avar_sre(ensemble: &WalkEnsemble) -> Result<SreHillVariance> {
    hill_avar_sre_with_tol(ensemble, DEFAULT_HORIZON_TOL)
}

pub fn hill_avar_sre_with_tol(ensemble: &WalkEnsemble, tol: f64) -> Result<SreHillVariance> {
    let scale = ensemble.kappa().powi(-2);
    let tail_bound = 2.0 * scale * ensemble.tail_bound();
    if !(tail_bound <= tol) {
        return Err(Error::HorizonTooSmall {
            bound: tail_bound,
            tolerance: tol,
        });
    }
    let sums = per_path(ensemble, |p| p.iter().map(|w| w.min(1.0)).sum());
    let e = McEstimate::from_values(&sums);
    Ok(SreHillVariance {
        variance: scale * (1.0 + 2.0 * e.value),
        stderr: scale * 2.0 * e.stderr,
        tail_bound,
    })
}

/// Monte Carlo limit of `n P(X_j > a_n x_j for all / some j < k)`, using
/// `W_0 = 1` for the first coordinate.
pub fn joint_exceedance(ensemble: &WalkEnsemble, query: &JointExceedanceQuery) -> Result<McEstimate> {
    let k = query.x.len();
    if k == 0 {
        return Err(Error::Config("query needs at least one threshold".into()));
    }
    if query.x.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Config("thresholds must be positive and finite".into()));
    }
    if k > ensemble.horizon() + 1 {
        return Err(Error::Config(format!(
            "query length {k} exceeds horizon + 1 = {}",
            ensemble.horizon() + 1
        )));
    }
    let weights: Vec<f64> = query.x.iter().map(|x| x.powf(-ensemble.kappa())).collect();
    let mode = query.mode;
    let values = per_path(ensemble, |p| {
        let terms = std::iter::once(weights[0])
            .chain(weights[1..].iter().zip(p).map(|(w, v)| w * v));
        match mode {
            ExceedanceMode::All => terms.fold(f64::INFINITY, f64::min),
            ExceedanceMode::Some => terms.fold(f64::NEG_INFINITY, f64::max),
        }
    });
    Ok(McEstimate::from_values(&values))
}
