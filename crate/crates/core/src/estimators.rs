//! Hill and Weissman estimators, applied either directly to the series or
//! to the residuals of a fitted AR(1) model.
//!
//! Order statistics follow the usual convention: `X_{j:n}` is the `j`-th
//! smallest of `n` values, so `X_{n-k:n}` is the `(k+1)`-th largest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound applied to `1 - |phi|^(1/gamma)` in the model-based estimator.
pub const DEFAULT_TAIL_FACTOR_FLOOR: f64 = 1e-6;

/// Conditions noticed while estimating that do not invalidate the result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateFlag {
    /// All top order statistics equal the threshold; Hill returned 0.
    TiedTopValues,
    /// `1 - |phi|^(1/gamma)` fell below the floor and was clamped.
    ClampedTailFactor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileTarget {
    /// Exceedance probability; the target is the `(1 - t)`-quantile.
    pub t: f64,
    /// Number of upper order statistics.
    pub k: usize,
    /// Sample size (length of the observed series).
    pub n: usize,
}

impl QuantileTarget {
    pub fn new(t: f64, k: usize, n: usize) -> Result<Self> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Config(format!("t must lie in (0, 1), got {t}")));
        }
        if k < 1 || k >= n {
            return Err(Error::Config(format!("need 1 <= k < n, got k = {k}, n = {n}")));
        }
        Ok(Self { t, k, n })
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::Config(format!(
                "target built for n = {} but series has length {len}",
                self.n
            )));
        }
        Ok(())
    }
}

/// Knobs shared by the direct and model-based quantile estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorOptions {
    /// Apply the direct estimator to `|X_t|`.
    pub abs_values: bool,
    /// Apply the residual Hill estimator to `|Z_t|`.
    pub abs_residuals: bool,
    /// Center the series by its mean when fitting the AR(1) coefficient.
    pub center: bool,
    pub tail_factor_floor: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            abs_values: false,
            abs_residuals: false,
            center: true,
            tail_factor_floor: DEFAULT_TAIL_FACTOR_FLOOR,
        }
    }
}

/// Hill estimator from the `k` largest values:
/// `(1/k) sum_{i=1..k} log(X_{n-i+1:n} / X_{n-k:n})`.
pub fn hill(sample: &[f64], k: usize) -> Result<f64> {
    let sorted = sorted_desc(sample.iter().copied());
    hill_sorted(&sorted, k)
}

fn hill_sorted(desc: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k >= desc.len() {
        return Err(Error::Domain(format!(
            "hill needs 1 <= k < n, got k = {k}, n = {}",
            desc.len()
        )));
    }
    let threshold = desc[k];
    if !(threshold > 0.0) {
        return Err(Error::Domain(format!(
            "threshold order statistic {threshold} is not positive"
        )));
    }
    let sum: f64 = desc[..k].iter().map(|x| (x / threshold).ln()).sum();
    Ok(sum / k as f64)
}

fn sorted_desc(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Values sorted in decreasing order with cumulative log sums, so that the
/// Hill estimate for every `k` costs O(1).
#[derive(Debug, Clone)]
pub struct TailSample {
    desc: Vec<f64>,
    /// `log_prefix[i] = sum_{j<i} ln desc[j]`, valid while `desc[j] > 0`.
    log_prefix: Vec<f64>,
}

impl TailSample {
    pub fn new(values: &[f64]) -> Self {
        Self::from_iter(values.iter().copied())
    }

    pub fn from_abs(values: &[f64]) -> Self {
        Self::from_iter(values.iter().map(|x| x.abs()))
    }

    fn from_iter(values: impl Iterator<Item = f64>) -> Self {
        let desc = sorted_desc(values);
        let mut log_prefix = Vec::with_capacity(desc.len() + 1);
        let mut acc = 0.0;
        log_prefix.push(acc);
        for &x in desc.iter().take_while(|&&x| x > 0.0) {
            acc += x.ln();
            log_prefix.push(acc);
        }
        Self { desc, log_prefix }
    }

    pub fn len(&self) -> usize {
        self.desc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.desc.is_empty()
    }

    /// The `r`-th largest value, `r >= 1`.
    pub fn largest(&self, r: usize) -> f64 {
        self.desc[r - 1]
    }

    pub fn hill(&self, k: usize) -> Result<(f64, Option<EstimateFlag>)> {
        if k == 0 || k >= self.desc.len() {
            return Err(Error::Domain(format!(
                "hill needs 1 <= k < n, got k = {k}, n = {}",
                self.desc.len()
            )));
        }
        let threshold = self.desc[k];
        if !(threshold > 0.0) {
            return Err(Error::Domain(format!(
                "threshold order statistic {threshold} is not positive"
            )));
        }
        if self.desc[0] == threshold {
            return Ok((0.0, Some(EstimateFlag::TiedTopValues)));
        }
        let g = self.log_prefix[k] / k as f64 - threshold.ln();
        Ok((g.max(0.0), None))
    }
}

/// Result of a quantile estimate with its ingredients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub estimate: f64,
    pub gamma_hat: f64,
    pub threshold: f64,
    pub phi_hat: Option<f64>,
    pub flags: Vec<EstimateFlag>,
}

/// `threshold * (k / (n t))^gamma`.
pub fn weissman_formula(threshold: f64, gamma: f64, n: usize, k: usize, t: f64) -> f64 {
    threshold * (k as f64 / (n as f64 * t)).powf(gamma)
}

/// `threshold * (n u / k)^(-gamma)` with `u = max(1 - |phi|^(1/gamma), floor) * t`.
/// The second component reports whether the floor was applied.
pub fn weissman_model_formula(
    threshold: f64,
    gamma: f64,
    phi: f64,
    n: usize,
    k: usize,
    t: f64,
    floor: f64,
) -> (f64, bool) {
    let factor = 1.0 - phi.abs().powf(1.0 / gamma);
    let clamped = !(factor >= floor);
    let u = if clamped { floor } else { factor } * t;
    (threshold * (n as f64 * u / k as f64).powf(-gamma), clamped)
}

/// Sample lag-1 autocorrelation (centered) or, with `center = false`, the
/// least-squares slope through the origin of `X_{t+1}` on `X_t`.
pub fn fit_ar1_with(series: &[f64], center: bool) -> Result<f64> {
    if series.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "AR(1) fit needs at least 3 observations, got {}",
            series.len()
        )));
    }
    let (num, den) = if center {
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        let num: f64 = series
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum();
        let den: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum();
        (num, den)
    } else {
        let num: f64 = series.windows(2).map(|w| w[0] * w[1]).sum();
        let den: f64 = series[..series.len() - 1].iter().map(|x| x * x).sum();
        (num, den)
    };
    if !(den > 0.0) {
        return Err(Error::DegenerateInput("series has zero variance".into()));
    }
    Ok(num / den)
}

/// Sample autocorrelation at lag 1.
pub fn fit_ar1(series: &[f64]) -> Result<f64> {
    fit_ar1_with(series, true)
}

/// `Z_t = X_t - phi X_{t-1}` for `t = 2..n`.
pub fn residuals_ar1(series: &[f64], phi_hat: f64) -> Vec<f64> {
    series.windows(2).map(|w| w[1] - phi_hat * w[0]).collect()
}

/// Direct Weissman estimator `X_{n-k:n} (k / (n t))^gamma_hat` with the Hill
/// estimate from the same `k` order statistics.
pub fn weissman_direct(series: &[f64], target: &QuantileTarget) -> Result<f64> {
    weissman_direct_with(series, target, &EstimatorOptions::default()).map(|e| e.estimate)
}

pub fn weissman_direct_with(
    series: &[f64],
    target: &QuantileTarget,
    opts: &EstimatorOptions,
) -> Result<QuantileEstimate> {
    target.check_len(series.len())?;
    let tail = if opts.abs_values {
        TailSample::from_abs(series)
    } else {
        TailSample::new(series)
    };
    direct_from_tail(&tail, series.len(), target.k, target.t)
}

pub(crate) fn direct_from_tail(tail: &TailSample, n: usize, k: usize, t: f64) -> Result<QuantileEstimate> {
    let (gamma_hat, flag) = tail.hill(k)?;
    let threshold = tail.largest(k + 1);
    Ok(QuantileEstimate {
        estimate: weissman_formula(threshold, gamma_hat, n, k, t),
        gamma_hat,
        threshold,
        phi_hat: None,
        flags: flag.into_iter().collect(),
    })
}

/// Model-based estimator: fit AR(1), Hill on the residuals, and Weissman
/// extrapolation at the innovation level `(1 - |phi_hat|^(1/gamma_hat)) t`.
pub fn weissman_model_ar1(series: &[f64], target: &QuantileTarget) -> Result<f64> {
    weissman_model_ar1_with(series, target, &EstimatorOptions::default()).map(|e| e.estimate)
}

pub fn weissman_model_ar1_with(
    series: &[f64],
    target: &QuantileTarget,
    opts: &EstimatorOptions,
) -> Result<QuantileEstimate> {
    target.check_len(series.len())?;
    let fit = ResidualFit::new(series, opts)?;
    fit.estimate(target.k, target.t, opts.tail_factor_floor)
}

/// Fitted AR(1) coefficient plus sorted residuals, reusable across `k`.
#[derive(Debug, Clone)]
pub struct ResidualFit {
    pub phi_hat: f64,
    n: usize,
    tail: TailSample,
}

impl ResidualFit {
    pub fn new(series: &[f64], opts: &EstimatorOptions) -> Result<Self> {
        let phi_hat = fit_ar1_with(series, opts.center)?;
        let resid = residuals_ar1(series, phi_hat);
        let tail = if opts.abs_residuals {
            TailSample::from_abs(&resid)
        } else {
            TailSample::new(&resid)
        };
        Ok(Self {
            phi_hat,
            n: series.len(),
            tail,
        })
    }

    pub fn estimate(&self, k: usize, t: f64, floor: f64) -> Result<QuantileEstimate> {
        let (gamma_hat, flag) = self.tail.hill(k)?;
        // Z_{n-k:n-1}: the k-th largest of the n - 1 residuals
        let threshold = self.tail.largest(k);
        let (estimate, clamped) =
            weissman_model_formula(threshold, gamma_hat, self.phi_hat, self.n, k, t, floor);
        let mut flags: Vec<EstimateFlag> = flag.into_iter().collect();
        if clamped {
            flags.push(EstimateFlag::ClampedTailFactor);
        }
        Ok(QuantileEstimate {
            estimate,
            gamma_hat,
            threshold,
            phi_hat: Some(self.phi_hat),
            flags,
        })
    }
}
