//! Closed-form tail quantities for linear processes `X_t = sum_j psi_j Z_{t-j}`
//! driven by balanced heavy-tailed innovations.
//!
//! These are pure formula evaluators. The classical tail relation between
//! `X` and `Z` requires side conditions that are not checked here (see
//! [`tail_relation_conditions`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-12;

/// Finitely many nonzero MA coefficients `(j, psi_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSequence {
    pub psi: Vec<(i64, f64)>,
    pub truncation_tol: f64,
}

impl CoefficientSequence {
    pub fn new(psi: Vec<(i64, f64)>, truncation_tol: f64) -> Result<Self> {
        if !psi.iter().any(|&(_, c)| c != 0.0) {
            return Err(Error::Domain("coefficient sequence has no nonzero entry".into()));
        }
        if psi.iter().any(|&(_, c)| !c.is_finite()) {
            return Err(Error::Domain("coefficients must be finite".into()));
        }
        Ok(Self { psi, truncation_tol })
    }

    /// One-sided sequence `psi_0, psi_1, ...` from a slice.
    pub fn one_sided(coeffs: &[f64]) -> Result<Self> {
        Self::new(
            coeffs.iter().enumerate().map(|(j, &c)| (j as i64, c)).collect(),
            DEFAULT_TRUNCATION_TOL,
        )
    }

    /// `psi_j = phi^j` for `j = 0..=horizon`.
    pub fn ar1_with_horizon(phi: f64, horizon: usize) -> Self {
        let mut psi = Vec::with_capacity(horizon + 1);
        let mut c = 1.0;
        for j in 0..=horizon {
            psi.push((j as i64, c));
            c *= phi;
        }
        Self {
            psi,
            truncation_tol: DEFAULT_TRUNCATION_TOL,
        }
    }

    /// MA(infinity) coefficients of an AR(1), `psi_j = phi^j`, truncated where
    /// the geometric bound on the omitted part of every evaluator in this
    /// module drops below `tol`.
    pub fn ar1(phi: f64, gamma: f64, tol: f64) -> Result<Self> {
        if !(phi.abs() < 1.0) {
            return Err(Error::Domain(format!("need |phi| < 1, got {phi}")));
        }
        if !(gamma > 0.0) || !(tol > 0.0) {
            return Err(Error::Domain("gamma and tol must be positive".into()));
        }
        let q = phi.abs().powf(1.0 / gamma);
        let mut seq = Self::ar1_with_horizon(phi, ar1_horizon(q, gamma, tol));
        seq.truncation_tol = tol;
        Ok(seq)
    }

    /// Dense `|psi_j|^(1/gamma)` for `j = 0..=max index`; requires `j >= 0`.
    fn one_sided_powers(&self, gamma: f64) -> Result<Vec<f64>> {
        if self.psi.iter().any(|&(j, _)| j < 0) {
            return Err(Error::Domain("sequence must be one-sided (indices >= 0)".into()));
        }
        let len = self.psi.iter().map(|&(j, _)| j as usize + 1).max().unwrap_or(0);
        let mut a = vec![0.0; len];
        for &(j, c) in &self.psi {
            a[j as usize] += c;
        }
        Ok(a.into_iter().map(|c| c.abs().powf(1.0 / gamma)).collect())
    }
}

/// Smallest horizon `N` at which the omitted tail of the geometric sums
/// (`~ (N + 2) q^(N+1) / (1-q)^2`, scaled by the largest prefactor) is below tol.
fn ar1_horizon(q: f64, gamma: f64, tol: f64) -> usize {
    if q == 0.0 {
        return 0;
    }
    let scale = 2.0 * gamma * gamma + 2.0;
    let mut n = 0usize;
    let mut qn = q;
    while (n as f64 + 2.0) * qn / ((1.0 - q) * (1.0 - q)) * scale >= tol {
        n += 1;
        qn *= q;
        if n > 1_000_000 {
            break;
        }
    }
    n
}

fn check_gamma_p(gamma: f64, p: f64) -> Result<()> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("p must lie in (0, 1], got {p}")));
    }
    Ok(())
}

/// `lim P(X > x) / P(Z > x) = (1/p) sum_j [p psi_j^(1/gamma) 1{psi_j > 0}
///  + (1-p) |psi_j|^(1/gamma) 1{psi_j < 0}]`.
pub fn tail_ratio_linear(seq: &CoefficientSequence, gamma: f64, p: f64) -> Result<f64> {
    check_gamma_p(gamma, p)?;
    if seq.psi.is_empty() {
        return Err(Error::Domain("empty coefficient sequence".into()));
    }
    let sum: f64 = seq
        .psi
        .iter()
        .map(|&(_, c)| {
            let a = c.abs().powf(1.0 / gamma);
            if c > 0.0 {
                p * a
            } else if c < 0.0 {
                (1.0 - p) * a
            } else {
                0.0
            }
        })
        .sum();
    Ok(sum / p)
}

/// The same limit for an AR(1) in closed form.
pub fn tail_ratio_ar1(phi: f64, gamma: f64, p: f64) -> Result<f64> {
    check_gamma_p(gamma, p)?;
    check_phi(phi)?;
    let q = phi.abs().powf(1.0 / gamma);
    if phi >= 0.0 {
        Ok(1.0 / (1.0 - q))
    } else {
        Ok((1.0 + q * (1.0 - p) / p) / (1.0 - q * q))
    }
}

fn check_phi(phi: f64) -> Result<()> {
    if !(phi.abs() < 1.0) {
        return Err(Error::Domain(format!("need |phi| < 1, got {phi}")));
    }
    Ok(())
}

/// Asymptotic variance of the Hill estimator applied to `|X_t|`:
///
/// `gamma^2 (1 + 2 sum_{j>=1} sum_{i>=0} min(|psi_j|^(1/gamma), |psi_{i+j}|^(1/gamma))
///  / sum_{i>=0} |psi_i|^(1/gamma))`.
pub fn hill_avar_linear(seq: &CoefficientSequence, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    let a = seq.one_sided_powers(gamma)?;
    let norm: f64 = a.iter().sum();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Domain(format!("normalizing sum {norm} is not finite and positive")));
    }
    // inner sums from the far end so small terms accumulate first
    let mut double = 0.0;
    for j in (1..a.len()).rev() {
        let inner: f64 = a[j..].iter().rev().map(|&b| b.min(a[j])).sum();
        double += inner;
    }
    Ok(gamma * gamma * (1.0 + 2.0 * double / norm))
}

/// `gamma^2 (1 + |phi|^(1/gamma)) / (1 - |phi|^(1/gamma))`.
pub fn hill_avar_ar1(phi: f64, gamma: f64) -> Result<f64> {
    check_phi(phi)?;
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    let q = phi.abs().powf(1.0 / gamma);
    Ok(gamma * gamma * (1.0 + q) / (1.0 - q))
}

/// Ratio of the minimal asymptotic RMSEs of the residual-based and the
/// direct Hill estimator for an AR(1) with shifted-Pareto innovations:
///
/// `[(1 - |phi|^(1/gamma + 1))^2 / ((1 - |phi|^(1/gamma))^2 (1 + |phi|^(1/gamma))^(2 gamma))]^(1/(2 gamma + 1))`.
pub fn rmse_ratio_ar1(phi: f64, gamma: f64) -> Result<f64> {
    check_phi(phi)?;
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    let a = phi.abs();
    let q = a.powf(1.0 / gamma);
    let num = (1.0 - a.powf(1.0 / gamma + 1.0)).powi(2);
    let den = (1.0 - q).powi(2) * (1.0 + q).powf(2.0 * gamma);
    Ok((num / den).powf(1.0 / (2.0 * gamma + 1.0)))
}

/// Second-order tail expansion of the innovations:
/// `P(Z > x) = x^(-1/gamma) (c + d/x + o(1/x))`, `P(Z < -x) = x^(-1/gamma) (c~ + d~/x + o(1/x))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderTail {
    pub c: f64,
    pub d: f64,
    pub c_tilde: f64,
    pub d_tilde: f64,
}

impl SecondOrderTail {
    pub fn new(c: f64, d: f64, c_tilde: f64, d_tilde: f64) -> Result<Self> {
        if !(c > 0.0) || !(c_tilde >= 0.0) {
            return Err(Error::Domain("need c > 0 and c_tilde >= 0".into()));
        }
        Ok(Self { c, d, c_tilde, d_tilde })
    }

    /// Shifted two-sided Pareto with weight `p` on the right tail:
    /// `p (x+1)^(-1/gamma) = p x^(-1/gamma) (1 - x^(-1)/gamma + ...)`, so
    /// `c = p` and `d = -p/gamma` (and likewise on the left with `1 - p`).
    pub fn shifted_pareto(gamma: f64, p: f64) -> Self {
        Self {
            c: p,
            d: -p / gamma,
            c_tilde: 1.0 - p,
            d_tilde: -(1.0 - p) / gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderConstants {
    pub d_psi: f64,
    #[serde(rename = "D_psi")]
    pub big_d_psi: f64,
}

/// Leading and second-order constants of the tail of the linear process:
/// `d_psi = sum_j [c psi_j^(1/gamma) 1{psi_j>0} + c~ |psi_j|^(1/gamma) 1{psi_j<0}]` and
/// `D_psi = sum_j [c d psi_j^(1/gamma+1) 1{psi_j>0} + c~ d~ |psi_j|^(1/gamma+1) 1{psi_j<0}]`.
pub fn second_order_constants(
    seq: &CoefficientSequence,
    gamma: f64,
    tail: &SecondOrderTail,
) -> Result<SecondOrderConstants> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    let (mut d_psi, mut big_d_psi) = (0.0, 0.0);
    for &(_, c) in &seq.psi {
        let a = c.abs();
        if c > 0.0 {
            d_psi += tail.c * a.powf(1.0 / gamma);
            big_d_psi += tail.c * tail.d * a.powf(1.0 / gamma + 1.0);
        } else if c < 0.0 {
            d_psi += tail.c_tilde * a.powf(1.0 / gamma);
            big_d_psi += tail.c_tilde * tail.d_tilde * a.powf(1.0 / gamma + 1.0);
        }
    }
    Ok(SecondOrderConstants { d_psi, big_d_psi })
}

/// Side conditions under which the tail relation of [`tail_ratio_linear`]
/// holds, as human-readable notes. The evaluator itself does not enforce them.
pub fn tail_relation_conditions(seq: &CoefficientSequence, gamma: f64) -> Vec<String> {
    let mut notes = Vec::new();
    if gamma < 0.5 {
        let s: f64 = seq.psi.iter().map(|&(_, c)| c * c).sum();
        if !(s > 0.0 && s.is_finite()) {
            notes.push("requires 0 < sum psi_j^2 < inf".to_string());
        }
    } else {
        notes.push("requires sum |psi_j|^(1/gamma - eps) < inf for some eps > 0".to_string());
    }
    if gamma < 1.0 {
        notes.push("requires E Z = 0 (gamma < 1)".to_string());
    }
    notes
}
