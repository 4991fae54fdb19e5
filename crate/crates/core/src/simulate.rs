//! Time-series generators and geometric random walks.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{draw, InnovationSpec};
use crate::error::{Error, Result};
use crate::rng::RngState;

pub const DEFAULT_BURNIN: usize = 10_000;

/// Law of the multiplicative coefficient `A_t` of `X_t = A_t X_{t-1} + B_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MultiplierLaw {
    TwoPoint { a_up: f64, a_down: f64, p_up: f64 },
    Lognormal { mu: f64, sigma: f64 },
}

/// Law of the additive term `B_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AdditiveLaw {
    Constant { value: f64 },
    Pareto { spec: InnovationSpec },
}

impl Default for AdditiveLaw {
    fn default() -> Self {
        AdditiveLaw::Constant { value: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SreDriver {
    pub law: MultiplierLaw,
    /// Defaults to `B = 1` when omitted from JSON.
    #[serde(default)]
    pub b_law: AdditiveLaw,
}

impl SreDriver {
    pub fn two_point(a_up: f64, a_down: f64, p_up: f64) -> Self {
        Self {
            law: MultiplierLaw::TwoPoint { a_up, a_down, p_up },
            b_law: AdditiveLaw::Constant { value: 1.0 },
        }
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Self {
        Self {
            law: MultiplierLaw::Lognormal { mu, sigma },
            b_law: AdditiveLaw::Constant { value: 1.0 },
        }
    }

    /// Checks supports and parameter ranges; does not check the drift.
    pub fn validate(&self) -> Result<()> {
        match self.law {
            MultiplierLaw::TwoPoint { a_up, a_down, p_up } => {
                if !(a_up > 0.0 && a_down > 0.0 && a_up.is_finite() && a_down.is_finite()) {
                    return Err(Error::Config("two-point values must be positive and finite".into()));
                }
                if !(p_up > 0.0 && p_up < 1.0) {
                    return Err(Error::Config(format!("p_up must lie in (0, 1), got {p_up}")));
                }
            }
            MultiplierLaw::Lognormal { mu, sigma } => {
                if !(mu.is_finite() && sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::Config("lognormal needs finite mu and positive sigma".into()));
                }
            }
        }
        match self.b_law {
            AdditiveLaw::Constant { value } if !(value > 0.0 && value.is_finite()) => {
                Err(Error::Config(format!("constant B must be positive, got {value}")))
            }
            AdditiveLaw::Pareto { spec } => {
                spec.validate()?;
                if !spec.is_nonnegative() {
                    Err(Error::Config("B law must have positive support (p = 1)".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// `E[log A]`.
    pub fn mean_log_a(&self) -> f64 {
        match self.law {
            MultiplierLaw::TwoPoint { a_up, a_down, p_up } => {
                p_up * a_up.ln() + (1.0 - p_up) * a_down.ln()
            }
            MultiplierLaw::Lognormal { mu, .. } => mu,
        }
    }

    /// `E[A^s]`.
    pub fn moment(&self, s: f64) -> f64 {
        match self.law {
            MultiplierLaw::TwoPoint { a_up, a_down, p_up } => {
                p_up * a_up.powf(s) + (1.0 - p_up) * a_down.powf(s)
            }
            MultiplierLaw::Lognormal { mu, sigma } => (mu * s + 0.5 * sigma * sigma * s * s).exp(),
        }
    }

    /// Fails unless `E[log A] < 0`, the condition for `W_j -> 0`.
    pub fn check_drift(&self) -> Result<()> {
        let m = self.mean_log_a();
        if m < -1e-12 {
            Ok(())
        } else {
            Err(Error::Config(format!("E[log A] = {m:e} is not negative")))
        }
    }

    #[inline]
    fn draw_a(&self, rng: &mut RngState) -> f64 {
        match self.law {
            MultiplierLaw::TwoPoint { a_up, a_down, p_up } => {
                if rng.uniform() < p_up {
                    a_up
                } else {
                    a_down
                }
            }
            MultiplierLaw::Lognormal { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                (mu + sigma * z).exp()
            }
        }
    }

    #[inline]
    fn draw_b(&self, rng: &mut RngState) -> f64 {
        match self.b_law {
            AdditiveLaw::Constant { value } => value,
            AdditiveLaw::Pareto { spec } => draw(&spec, rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelVariant {
    LinearAr1 {
        phi1: f64,
        innovations: InnovationSpec,
    },
    /// `X_t = phi1 X_{t-1} + delta sgn(X_{t-1}) log(max(|X_{t-1}|, 1)) + Z_t`
    NonlinearAr1 {
        phi1: f64,
        delta: f64,
        innovations: InnovationSpec,
    },
    Sre {
        driver: SreDriver,
    },
}

/// A series model together with its burn-in length.
///
/// JSON form: `{"variant": {"type": "linear-ar1", "phi1": 0.8, "innovations":
/// {...}}, "burnin": 10000}`; `burnin` may be omitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesModel {
    pub variant: ModelVariant,
    #[serde(default = "default_burnin")]
    pub burnin: usize,
}

fn default_burnin() -> usize {
    DEFAULT_BURNIN
}

impl SeriesModel {
    pub fn linear_ar1(phi1: f64, innovations: InnovationSpec) -> Self {
        Self {
            variant: ModelVariant::LinearAr1 { phi1, innovations },
            burnin: DEFAULT_BURNIN,
        }
    }

    pub fn nonlinear_ar1(phi1: f64, delta: f64, innovations: InnovationSpec) -> Self {
        Self {
            variant: ModelVariant::NonlinearAr1 {
                phi1,
                delta,
                innovations,
            },
            burnin: DEFAULT_BURNIN,
        }
    }

    pub fn sre(driver: SreDriver) -> Self {
        Self {
            variant: ModelVariant::Sre { driver },
            burnin: DEFAULT_BURNIN,
        }
    }

    pub fn with_burnin(mut self, burnin: usize) -> Self {
        self.burnin = burnin;
        self
    }

    /// Innovation law of the AR variants.
    pub fn innovations(&self) -> Option<&InnovationSpec> {
        match &self.variant {
            ModelVariant::LinearAr1 { innovations, .. }
            | ModelVariant::NonlinearAr1 { innovations, .. } => Some(innovations),
            ModelVariant::Sre { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.variant {
            ModelVariant::LinearAr1 { phi1, innovations } => {
                if !(phi1.abs() < 1.0) {
                    return Err(Error::Config(format!("linear AR(1) needs |phi1| < 1, got {phi1}")));
                }
                innovations.validate()
            }
            ModelVariant::NonlinearAr1 {
                phi1,
                delta,
                innovations,
            } => {
                if !(phi1.is_finite() && delta.is_finite()) {
                    return Err(Error::Config("phi1 and delta must be finite".into()));
                }
                innovations.validate()
            }
            ModelVariant::Sre { driver } => {
                driver.validate()?;
                driver.check_drift()
            }
        }
    }
}

#[inline]
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Simulates `burnin + n` steps of the model and returns the last `n`.
///
/// AR variants start at `X = 0` and consume one innovation draw per step.
/// The SRE starts at a draw of `B` and then draws `A_t` before `B_t` at
/// every step.
pub fn simulate_series(model: &SeriesModel, n: usize, rng: &mut RngState) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Config("series length must be at least 1".into()));
    }
    model.validate()?;
    let total = model.burnin + n;
    let mut out = Vec::with_capacity(n);
    let keep = |step: usize, x: f64, out: &mut Vec<f64>| -> Result<()> {
        if !x.is_finite() {
            return Err(Error::Simulation { step });
        }
        if step >= model.burnin {
            out.push(x);
        }
        Ok(())
    };
    match model.variant {
        ModelVariant::LinearAr1 { phi1, innovations } => {
            let mut x = 0.0;
            for step in 0..total {
                x = phi1 * x + draw(&innovations, rng);
                keep(step, x, &mut out)?;
            }
        }
        ModelVariant::NonlinearAr1 {
            phi1,
            delta,
            innovations,
        } => {
            let mut x: f64 = 0.0;
            for step in 0..total {
                x = phi1 * x + delta * sgn(x) * x.abs().max(1.0).ln() + draw(&innovations, rng);
                keep(step, x, &mut out)?;
            }
        }
        ModelVariant::Sre { driver } => {
            let mut x = driver.draw_b(rng);
            for step in 0..total {
                let a = driver.draw_a(rng);
                x = a * x + driver.draw_b(rng);
                keep(step, x, &mut out)?;
            }
        }
    }
    Ok(out)
}

/// Monte Carlo paths of `W_j = prod_{i<=j} A_i^kappa`, `j = 1..horizon`.
///
/// `W_0 = 1` is implicit and not stored.
#[derive(Debug, Clone)]
pub struct WalkEnsemble {
    kappa: f64,
    horizon: usize,
    n_paths: usize,
    paths: Vec<f64>,
    /// `E[A^(kappa/2)]`, the per-step factor of the bound
    /// `E min(W_j, 1) <= E W_j^(1/2)` used for truncation remainders.
    half_moment: f64,
}

impl WalkEnsemble {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn half_moment(&self) -> f64 {
        self.half_moment
    }

    /// `W_1..W_J` of path `i`.
    pub fn path(&self, i: usize) -> &[f64] {
        &self.paths[i * self.horizon..(i + 1) * self.horizon]
    }

    pub fn paths(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.paths.chunks_exact(self.horizon)
    }

    /// Upper bound on `sum_{j > J} E min(W_j, 1)`.
    pub fn tail_bound(&self) -> f64 {
        let m = self.half_moment;
        if m >= 1.0 {
            f64::INFINITY
        } else {
            m.powi(self.horizon as i32 + 1) / (1.0 - m)
        }
    }

    /// Builds an ensemble from explicit paths (row-major, `n_paths x horizon`).
    ///
    /// The truncation factor is estimated as the sample mean of `W_1^(1/2)`.
    #[doc(hidden)]
    pub fn from_paths(kappa: f64, horizon: usize, paths: Vec<f64>) -> Result<Self> {
        if horizon == 0 || paths.is_empty() || !paths.len().is_multiple_of(horizon) {
            return Err(Error::Config("paths must be a non-empty multiple of the horizon".into()));
        }
        let n_paths = paths.len() / horizon;
        let half_moment =
            paths.chunks_exact(horizon).map(|p| p[0].sqrt()).sum::<f64>() / n_paths as f64;
        Ok(Self {
            kappa,
            horizon,
            n_paths,
            paths,
            half_moment,
        })
    }
}

/// Simulates `n_paths` walks of length `horizon`; path `i` uses
/// `rng.substream(i)`.
pub fn simulate_walks(
    driver: &SreDriver,
    kappa: f64,
    horizon: usize,
    n_paths: usize,
    rng: &RngState,
) -> Result<WalkEnsemble> {
    driver.validate()?;
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Config(format!("kappa must be positive, got {kappa}")));
    }
    if horizon == 0 || n_paths == 0 {
        return Err(Error::Config("horizon and path count must be positive".into()));
    }
    driver.check_drift()?;

    let mut paths = vec![0.0; horizon * n_paths];
    paths
        .par_chunks_mut(horizon)
        .enumerate()
        .for_each(|(i, row)| {
            let mut r = rng.substream(i as u64);
            let mut w = 1.0;
            for slot in row.iter_mut() {
                w *= driver.draw_a(&mut r).powf(kappa);
                *slot = w;
            }
        });

    let mean_log_last = paths
        .chunks_exact(horizon)
        .map(|p| p[horizon - 1].ln())
        .sum::<f64>()
        / n_paths as f64;
    if !(mean_log_last < 0.0) {
        return Err(Error::Config(format!(
            "walk drift check failed: mean log W_J = {mean_log_last}"
        )));
    }

    Ok(WalkEnsemble {
        kappa,
        horizon,
        n_paths,
        paths,
        half_moment: driver.moment(kappa / 2.0),
    })
}

const KAPPA_LO: f64 = 1e-6;
const KAPPA_MAX: f64 = 64.0;

/// Solves `E[A^kappa] = 1` for `kappa > 0`.
///
/// The lognormal law has the closed form `-2 mu / sigma^2`. Otherwise the
/// root is bracketed on `[1e-6, 64]` with geometric expansion of the upper
/// end, then refined by bisection on the convex map `kappa -> E A^kappa`.
pub fn solve_kappa(driver: &SreDriver) -> Result<f64> {
    driver.validate()?;
    if driver.check_drift().is_err() {
        return Err(Error::NoRoot(format!(
            "E[log A] = {:e} is not negative",
            driver.mean_log_a()
        )));
    }
    match driver.law {
        MultiplierLaw::Lognormal { mu, sigma } => Ok(-2.0 * mu / (sigma * sigma)),
        MultiplierLaw::TwoPoint { a_up, a_down, .. } => {
            if a_up <= 1.0 && a_down <= 1.0 {
                return Err(Error::NoRoot("P(A > 1) = 0".into()));
            }
            bisect_moment(|s| driver.moment(s) - 1.0)
        }
    }
}

fn bisect_moment(g: impl Fn(f64) -> f64) -> Result<f64> {
    let mut lo = KAPPA_LO;
    if g(lo) >= 0.0 {
        return Err(Error::NoRoot(format!("E A^kappa - 1 is not negative at kappa = {lo}")));
    }
    let mut hi = 1.0;
    while g(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > KAPPA_MAX {
            return Err(Error::NoRoot(format!("no sign change on (0, {KAPPA_MAX}]")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    if g(root).abs() > 1e-10 {
        return Err(Error::NoRoot(format!("bisection stalled at {root}")));
    }
    Ok(root)
}
