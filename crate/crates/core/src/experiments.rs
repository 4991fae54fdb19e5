//! Monte Carlo harness for the quantile-estimation study: ground-truth
//! quantiles, replicated estimation over a grid of `k`, error summaries,
//! kernel density estimates and residual-test power.
//!
//! Replicate `r` always draws from substream `r` of the master seed, and
//! per-replicate results are reduced in replicate order, so every output is
//! independent of the number of worker threads.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    difference_sign_test, normal_cdf, portmanteau_sweep, turning_point_test,
};
use crate::error::{Error, Result};
use crate::estimators::{direct_from_tail, fit_ar1, residuals_ar1, EstimatorOptions, ResidualFit, TailSample};
use crate::rng::RngState;
use crate::simulate::{simulate_series, SeriesModel};

/// Largest portmanteau lag of the power experiment.
pub const POWER_MAX_LAG: usize = 30;

/// Number of points of the automatic KDE grid.
pub const KDE_GRID_POINTS: usize = 512;

/// The `ceil(q n)`-th smallest value (at least the first).
///
/// `q n` is rounded down by a relative `1e-12` before taking the ceiling so
/// that levels like `0.999` with `n = 10^6` select order statistic 999000
/// rather than 999001 due to representation error.
pub fn empirical_quantile(series: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {q}")));
    }
    if series.is_empty() {
        return Err(Error::DegenerateInput("empty series".into()));
    }
    let mut v = series.to_vec();
    let idx = order_index(q, v.len());
    let (_, x, _) = v.select_nth_unstable_by(idx, f64::total_cmp);
    Ok(*x)
}

fn order_index(q: f64, n: usize) -> usize {
    let qn = q * n as f64;
    let rank = (qn - qn * 1e-12).ceil().max(1.0) as usize;
    rank.min(n) - 1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueQuantile {
    pub value: f64,
    /// `2.58` standard errors of the replicate mean.
    pub half_width: f64,
    pub stderr: f64,
    pub n_reps: usize,
    pub rep_length: usize,
}

/// Mean over `n_reps` simulated series of length `rep_length` of the
/// empirical `(1 - t)`-quantile.
pub fn true_quantile(
    model: &SeriesModel,
    t: f64,
    n_reps: usize,
    rep_length: usize,
    rng: &RngState,
) -> Result<TrueQuantile> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Config(format!("t must lie in (0, 1), got {t}")));
    }
    if n_reps < 2 {
        return Err(Error::Config("ground truth needs at least 2 replicates".into()));
    }
    if (rep_length as f64) * t < 100.0 {
        return Err(Error::Config(format!(
            "rep_length * t = {} is below 100 expected exceedances",
            rep_length as f64 * t
        )));
    }
    model.validate()?;
    let q = 1.0 - t;
    let idx = order_index(q, rep_length);
    let quantiles: Vec<f64> = (0..n_reps)
        .into_par_iter()
        .map(|r| {
            let mut x = simulate_series(model, rep_length, &mut rng.substream(r as u64))?;
            let (_, v, _) = x.select_nth_unstable_by(idx, f64::total_cmp);
            Ok(*v)
        })
        .collect::<Result<_>>()?;
    let (mean, sd) = mean_sd(&quantiles);
    let stderr = sd / (n_reps as f64).sqrt();
    Ok(TrueQuantile {
        value: mean,
        half_width: 2.58 * stderr,
        stderr,
        n_reps,
        rep_length,
    })
}

/// Mean and sample standard deviation (denominator `len - 1`, 0 for one value).
fn mean_sd(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Direct,
    ModelBased,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Direct => "direct",
            EstimatorKind::ModelBased => "model-based",
        }
    }
}

/// Something that turns one series into quantile estimates for every `k`
/// of a grid; `None` marks a failed estimate.
pub trait GridEstimator: Sync {
    fn name(&self) -> String;
    fn estimate_grid(&self, series: &[f64], k_grid: &[usize], t: f64) -> Vec<Option<f64>>;
}

/// A built-in estimator with its options.
#[derive(Debug, Clone, Copy)]
pub struct BuiltinEstimator {
    pub kind: EstimatorKind,
    pub options: EstimatorOptions,
}

fn finite(v: Result<f64>) -> Option<f64> {
    v.ok().filter(|x| x.is_finite())
}

impl GridEstimator for BuiltinEstimator {
    fn name(&self) -> String {
        self.kind.name().to_string()
    }

    fn estimate_grid(&self, series: &[f64], k_grid: &[usize], t: f64) -> Vec<Option<f64>> {
        let n = series.len();
        match self.kind {
            EstimatorKind::Direct => {
                let tail = if self.options.abs_values {
                    TailSample::from_abs(series)
                } else {
                    TailSample::new(series)
                };
                k_grid
                    .iter()
                    .map(|&k| finite(direct_from_tail(&tail, n, k, t).map(|e| e.estimate)))
                    .collect()
            }
            EstimatorKind::ModelBased => match ResidualFit::new(series, &self.options) {
                Ok(fit) => k_grid
                    .iter()
                    .map(|&k| {
                        finite(
                            fit.estimate(k, t, self.options.tail_factor_floor)
                                .map(|e| e.estimate),
                        )
                    })
                    .collect(),
                Err(_) => vec![None; k_grid.len()],
            },
        }
    }
}

fn default_k_grid() -> Vec<usize> {
    (10..=1000).step_by(5).collect()
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Direct, EstimatorKind::ModelBased]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub model: SeriesModel,
    /// Series length.
    pub n: usize,
    pub replicates: usize,
    #[serde(default = "default_k_grid")]
    pub k_grid: Vec<usize>,
    /// Exceedance probability of the target quantile.
    pub t: f64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    pub master_seed: u64,
    #[serde(default)]
    pub options: EstimatorOptions,
}

impl ExperimentSpec {
    /// Both estimators over the default `k` grid.
    pub fn new(model: SeriesModel, n: usize, replicates: usize, t: f64, master_seed: u64) -> Self {
        Self {
            model,
            n,
            replicates,
            k_grid: default_k_grid(),
            t,
            estimators: default_estimators(),
            master_seed,
            options: EstimatorOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.replicates < 1 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.k_grid.is_empty() {
            return Err(Error::Config("k grid is empty".into()));
        }
        if let Some(k) = self.k_grid.iter().find(|&&k| k < 1 || k >= self.n) {
            return Err(Error::Config(format!("k = {k} outside 1 <= k < n = {}", self.n)));
        }
        if !(self.t > 0.0 && self.t < 1.0) {
            return Err(Error::Config(format!("t must lie in (0, 1), got {}", self.t)));
        }
        Ok(())
    }

    pub fn builtin_estimators(&self) -> Vec<BuiltinEstimator> {
        self.estimators
            .iter()
            .map(|&kind| BuiltinEstimator {
                kind,
                options: self.options,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub estimator: String,
    pub k: usize,
    pub rmse: f64,
    pub l1: f64,
    pub bias: f64,
    /// Sample standard deviation of the estimates.
    pub stderr: f64,
    pub missing: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Argmin {
    pub k: usize,
    pub value: f64,
    pub bias: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub replicates: usize,
    pub n: usize,
    pub t: f64,
    pub true_value: f64,
    /// Uncertainty of `true_value`, when known.
    pub true_value_half_width: Option<f64>,
    pub rows: Vec<ErrorRow>,
    pub argmin_rmse: BTreeMap<String, Argmin>,
    pub argmin_l1: BTreeMap<String, Argmin>,
}

impl ErrorSummary {
    pub fn rows_for<'a>(&'a self, estimator: &'a str) -> impl Iterator<Item = &'a ErrorRow> + 'a {
        self.rows.iter().filter(move |r| r.estimator == estimator)
    }
}

/// Raw estimates, indexed `[replicate][estimator][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateTable {
    pub estimators: Vec<String>,
    pub k_grid: Vec<usize>,
    pub values: Vec<Vec<Vec<Option<f64>>>>,
}

impl EstimateTable {
    /// Completed estimates of one estimator at one grid position, in replicate order.
    pub fn column(&self, estimator: usize, k_index: usize) -> Vec<f64> {
        self.values
            .iter()
            .filter_map(|rep| rep[estimator][k_index])
            .collect()
    }
}

pub fn run_quantile_experiment(spec: &ExperimentSpec, true_value: f64) -> Result<ErrorSummary> {
    let est = spec.builtin_estimators();
    let dyns: Vec<&dyn GridEstimator> = est.iter().map(|e| e as &dyn GridEstimator).collect();
    run_quantile_experiment_with(spec, true_value, &dyns).map(|(s, _)| s)
}

/// Runs the experiment with arbitrary estimators and also returns the raw estimates.
pub fn run_quantile_experiment_with(
    spec: &ExperimentSpec,
    true_value: f64,
    estimators: &[&dyn GridEstimator],
) -> Result<(ErrorSummary, EstimateTable)> {
    spec.validate()?;
    if estimators.is_empty() {
        return Err(Error::Config("no estimators selected".into()));
    }
    if !true_value.is_finite() {
        return Err(Error::Config("true value must be finite".into()));
    }
    let master = RngState::new(spec.master_seed);
    let values: Vec<Vec<Vec<Option<f64>>>> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| {
            let series = simulate_series(&spec.model, spec.n, &mut master.substream(r as u64))?;
            Ok(estimators
                .iter()
                .map(|e| e.estimate_grid(&series, &spec.k_grid, spec.t))
                .collect())
        })
        .collect::<Result<_>>()?;

    let table = EstimateTable {
        estimators: estimators.iter().map(|e| e.name()).collect(),
        k_grid: spec.k_grid.clone(),
        values,
    };
    let summary = summarize(&table, spec, true_value);
    Ok((summary, table))
}

fn summarize(table: &EstimateTable, spec: &ExperimentSpec, true_value: f64) -> ErrorSummary {
    let mut rows = Vec::new();
    let mut argmin_rmse = BTreeMap::new();
    let mut argmin_l1 = BTreeMap::new();
    for (e, name) in table.estimators.iter().enumerate() {
        let start = rows.len();
        for (ki, &k) in table.k_grid.iter().enumerate() {
            let col = table.column(e, ki);
            rows.push(error_row(name, k, &col, true_value, spec.replicates - col.len()));
        }
        let mine = &rows[start..];
        for (map, metric) in [
            (&mut argmin_rmse, (|r: &ErrorRow| r.rmse) as fn(&ErrorRow) -> f64),
            (&mut argmin_l1, |r: &ErrorRow| r.l1),
        ] {
            if let Some(best) = argmin(mine, metric) {
                map.insert(
                    name.clone(),
                    Argmin {
                        k: best.k,
                        value: metric(best),
                        bias: best.bias,
                        stderr: best.stderr,
                    },
                );
            }
        }
    }
    ErrorSummary {
        replicates: spec.replicates,
        n: spec.n,
        t: spec.t,
        true_value,
        true_value_half_width: None,
        rows,
        argmin_rmse,
        argmin_l1,
    }
}

fn error_row(name: &str, k: usize, est: &[f64], truth: f64, missing: usize) -> ErrorRow {
    if est.is_empty() {
        return ErrorRow {
            estimator: name.to_string(),
            k,
            rmse: f64::NAN,
            l1: f64::NAN,
            bias: f64::NAN,
            stderr: f64::NAN,
            missing,
        };
    }
    let m = est.len() as f64;
    let mse = est.iter().map(|x| (x - truth) * (x - truth)).sum::<f64>() / m;
    let l1 = est.iter().map(|x| (x - truth).abs()).sum::<f64>() / m;
    let (mean, sd) = mean_sd(est);
    ErrorRow {
        estimator: name.to_string(),
        k,
        rmse: mse.sqrt(),
        l1,
        bias: mean - truth,
        stderr: sd,
        missing,
    }
}

/// Smallest metric over rows without missing estimates, falling back to all
/// rows with a finite value. Ties go to the smaller `k`.
fn argmin(rows: &[ErrorRow], metric: fn(&ErrorRow) -> f64) -> Option<&ErrorRow> {
    let pick = |complete: bool| {
        rows.iter()
            .filter(|r| metric(r).is_finite() && (!complete || r.missing == 0))
            .fold(None, |best: Option<&ErrorRow>, r| match best {
                Some(b) if metric(b) <= metric(r) => Some(b),
                _ => Some(r),
            })
    };
    pick(true).or_else(|| pick(false))
}

/// Gaussian kernel density estimate on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityEstimate {
    /// Trapezoid integral of the density over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(g, d)| 0.5 * (g[1] - g[0]) * (d[0] + d[1]))
            .sum()
    }
}

/// Silverman's rule `1.06 min(sd, iqr / 1.34) n^(-1/5)`; falls back to the
/// standard deviation when the interquartile range is zero.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::DegenerateInput("need at least 2 values".into()));
    }
    let (_, sd) = mean_sd(values);
    if !(sd > 0.0) {
        return Err(Error::DegenerateInput("all values are identical".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let iqr = sorted[order_index(0.75, n)] - sorted[order_index(0.25, n)];
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(1.06 * spread * (n as f64).powf(-0.2))
}

pub fn kde(values: &[f64], grid: &[f64]) -> Result<DensityEstimate> {
    let h = silverman_bandwidth(values)?;
    Ok(kde_with_bandwidth(values, grid, h))
}

/// KDE on `KDE_GRID_POINTS` equally spaced points spanning the data range
/// extended by three bandwidths on each side.
pub fn kde_auto(values: &[f64]) -> Result<DensityEstimate> {
    let h = silverman_bandwidth(values)?;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let step = (hi - lo) / (KDE_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..KDE_GRID_POINTS).map(|i| lo + step * i as f64).collect();
    Ok(kde_with_bandwidth(values, &grid, h))
}

fn kde_with_bandwidth(values: &[f64], grid: &[f64], h: f64) -> DensityEstimate {
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let density = grid
        .par_iter()
        .map(|&g| {
            norm * values
                .iter()
                .map(|&v| {
                    let u = (g - v) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
        })
        .collect();
    DensityEstimate {
        grid: grid.to_vec(),
        density,
        bandwidth: h,
    }
}

/// Probability mass of the kernel mixture that falls inside `[a, b]`.
pub fn kde_mass(values: &[f64], h: f64, a: f64, b: f64) -> f64 {
    values
        .iter()
        .map(|&v| normal_cdf((b - v) / h) - normal_cdf((a - v) / h))
        .sum::<f64>()
        / values.len() as f64
}

/// Rejection frequencies at nominal size 0.05 of the residual tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSummary {
    pub replicates: usize,
    pub n: usize,
    pub turning_point: f64,
    pub difference_sign: f64,
    /// Ljung-Box rejection frequency for `h = 1..=POWER_MAX_LAG`.
    pub ljung_box: Vec<f64>,
    pub ljung_box_max: f64,
    pub ljung_box_argmax: usize,
    pub mean_phi_hat: f64,
}

/// Simulates, fits a linear AR(1), and applies the three residual tests to
/// every replicate.
pub fn test_power_experiment(
    model: &SeriesModel,
    n: usize,
    replicates: usize,
    rng: &RngState,
) -> Result<PowerSummary> {
    if replicates < 1 {
        return Err(Error::Config("replicates must be at least 1".into()));
    }
    if n <= POWER_MAX_LAG + 2 {
        return Err(Error::Config(format!("series length {n} too short for lag {POWER_MAX_LAG}")));
    }
    model.validate()?;
    struct Rep {
        phi: f64,
        tp: bool,
        ds: bool,
        lb: Vec<bool>,
    }
    let reps: Vec<Rep> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let x = simulate_series(model, n, &mut rng.substream(r as u64))?;
            let phi = fit_ar1(&x)?;
            let z = residuals_ar1(&x, phi);
            Ok(Rep {
                phi,
                tp: turning_point_test(&z)?.reject_at_5pct,
                ds: difference_sign_test(&z)?.reject_at_5pct,
                lb: portmanteau_sweep(&z, POWER_MAX_LAG)?
                    .iter()
                    .map(|t| t.reject_at_5pct)
                    .collect(),
            })
        })
        .collect::<Result<_>>()?;
    let rf = replicates as f64;
    let rate = |f: &dyn Fn(&Rep) -> bool| reps.iter().filter(|r| f(r)).count() as f64 / rf;
    let ljung_box: Vec<f64> = (0..POWER_MAX_LAG).map(|h| rate(&|r: &Rep| r.lb[h])).collect();
    let (argmax, max) = ljung_box
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    Ok(PowerSummary {
        replicates,
        n,
        turning_point: rate(&|r: &Rep| r.tp),
        difference_sign: rate(&|r: &Rep| r.ds),
        ljung_box,
        ljung_box_max: max,
        ljung_box_argmax: argmax + 1,
        mean_phi_hat: reps.iter().map(|r| r.phi).sum::<f64>() / rf,
    })
}

/// Fitted lag-1 coefficients of `replicates` simulated series.
pub fn fitted_phi(model: &SeriesModel, n: usize, replicates: usize, rng: &RngState) -> Result<Vec<f64>> {
    (0..replicates)
        .into_par_iter()
        .map(|r| fit_ar1(&simulate_series(model, n, &mut rng.substream(r as u64))?))
        .collect()
}
