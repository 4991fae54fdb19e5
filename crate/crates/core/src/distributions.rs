//! Two-sided Pareto innovation laws.
//!
//! Both families have balanced power tails with extreme value index `gamma`
//! and right-tail weight `p`:
//!
//! * two-sided Pareto: `P(Z > x) = p x^(-1/gamma)` and
//!   `P(Z <= -x) = (1-p) x^(-1/gamma)` for `x >= 1`, no mass on `(-1, 1)`;
//! * shifted two-sided Pareto: the same with `x` replaced by `x + 1`, for
//!   `x >= 0`, so the law is continuous with support on the whole line.
//!
//! With `p = 1/2` and `gamma = 1/2` (resp. `gamma = 0.3`) these are the
//! innovation laws of "Model a" (resp. "Model b") of the simulation study.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnovationKind {
    TwoSidedPareto,
    ShiftedTwoSidedPareto,
    /// Degenerate law at a constant. Test hook only; cannot be deserialized.
    #[doc(hidden)]
    #[serde(skip)]
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnovationSpec {
    pub kind: InnovationKind,
    pub gamma: f64,
    pub p: f64,
}

impl InnovationSpec {
    pub fn new(kind: InnovationKind, gamma: f64, p: f64) -> Result<Self> {
        let spec = Self { kind, gamma, p };
        spec.validate()?;
        Ok(spec)
    }

    /// Model a): unshifted, `gamma = 1/2`, symmetric.
    pub fn model_a() -> Self {
        Self {
            kind: InnovationKind::TwoSidedPareto,
            gamma: 0.5,
            p: 0.5,
        }
    }

    /// Model b): shifted, `gamma = 0.3`, symmetric.
    pub fn model_b() -> Self {
        Self {
            kind: InnovationKind::ShiftedTwoSidedPareto,
            gamma: 0.3,
            p: 0.5,
        }
    }

    #[doc(hidden)]
    pub fn constant_for_tests(value: f64) -> Self {
        Self {
            kind: InnovationKind::Constant(value),
            gamma: 1.0,
            p: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::Config(format!("p must lie in (0, 1], got {}", self.p)));
        }
        Ok(())
    }

    /// Whether the law puts all its mass on `[0, inf)`.
    pub fn is_nonnegative(&self) -> bool {
        match self.kind {
            InnovationKind::Constant(c) => c >= 0.0,
            _ => self.p == 1.0,
        }
    }
}

/// Generalized inverse `inf{x : F(x) >= u}` of the innovation CDF.
///
/// For the unshifted law the CDF is flat at level `1 - p` on `[-1, 1)`, and
/// `u = 1 - p` maps to the left end `-1` of that segment.
pub fn quantile_fn(spec: &InnovationSpec, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {u}")));
    }
    Ok(quantile_unchecked(spec, u))
}

#[inline]
pub(crate) fn quantile_unchecked(spec: &InnovationSpec, u: f64) -> f64 {
    let q = 1.0 - spec.p;
    match spec.kind {
        InnovationKind::TwoSidedPareto => {
            if u <= q {
                -(u / q).powf(-spec.gamma)
            } else {
                ((1.0 - u) / spec.p).powf(-spec.gamma)
            }
        }
        InnovationKind::ShiftedTwoSidedPareto => {
            if u <= q {
                1.0 - (u / q).powf(-spec.gamma)
            } else {
                ((1.0 - u) / spec.p).powf(-spec.gamma) - 1.0
            }
        }
        InnovationKind::Constant(c) => c,
    }
}

/// Survival function `P(Z > x)`.
pub fn survival_fn(spec: &InnovationSpec, x: f64) -> f64 {
    let alpha = 1.0 / spec.gamma;
    let q = 1.0 - spec.p;
    match spec.kind {
        InnovationKind::TwoSidedPareto => {
            if x >= 1.0 {
                spec.p * x.powf(-alpha)
            } else if x > -1.0 {
                spec.p
            } else {
                1.0 - q * (-x).powf(-alpha)
            }
        }
        InnovationKind::ShiftedTwoSidedPareto => {
            if x >= 0.0 {
                spec.p * (x + 1.0).powf(-alpha)
            } else {
                1.0 - q * (1.0 - x).powf(-alpha)
            }
        }
        InnovationKind::Constant(c) => {
            if x < c {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// CDF `P(Z <= x)`.
pub fn cdf(spec: &InnovationSpec, x: f64) -> f64 {
    1.0 - survival_fn(spec, x)
}

/// `n` independent draws by inversion, one uniform per draw.
pub fn sample(spec: &InnovationSpec, rng: &mut RngState, n: usize) -> Vec<f64> {
    (0..n).map(|_| draw(spec, rng)).collect()
}

/// A single inverse-CDF draw. Consumes exactly one uniform.
#[inline]
pub fn draw(spec: &InnovationSpec, rng: &mut RngState) -> f64 {
    quantile_unchecked(spec, rng.uniform())
}
