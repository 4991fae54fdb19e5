//! Randomness tests for residual series: turning points, difference signs
//! and the Ljung-Box portmanteau statistic, with the normal and chi-square
//! distribution functions they need.
//!
//! Equal neighbours count as "not greater", so ties never produce a turning
//! point or an increase.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

/// Default portmanteau lag.
pub const DEFAULT_LB_LAG: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    TurningPoint,
    DifferenceSign,
    LjungBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: TestKind,
    /// Portmanteau lag; absent for the two sign-based tests.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub h: Option<usize>,
    pub statistic: f64,
    /// Standardized statistic for the normal tests, `Q` for Ljung-Box.
    pub z_or_q: f64,
    pub p_value: f64,
    pub reject_at_5pct: bool,
}

impl TestReport {
    fn normal(test: TestKind, statistic: f64, mean: f64, var: f64) -> Self {
        let z = (statistic - mean) / var.sqrt();
        let p_value = (2.0 * normal_cdf(-z.abs())).min(1.0);
        Self {
            test,
            h: None,
            statistic,
            z_or_q: z,
            p_value,
            reject_at_5pct: p_value < 0.05,
        }
    }
}

/// Standard normal CDF, `erfc(-z / sqrt 2) / 2`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Upper tail `P(chi2_df > x)` via the regularized upper incomplete gamma function.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma_ur(df / 2.0, x / 2.0)
    }
}

pub fn turning_point_test(series: &[f64]) -> Result<TestReport> {
    let n = series.len();
    if n < 3 {
        return Err(Error::DegenerateInput(format!(
            "turning point test needs at least 3 observations, got {n}"
        )));
    }
    let turns = series
        .windows(3)
        .filter(|w| (w[0] < w[1] && w[1] > w[2]) || (w[0] > w[1] && w[1] < w[2]))
        .count();
    let nf = n as f64;
    Ok(TestReport::normal(
        TestKind::TurningPoint,
        turns as f64,
        2.0 * (nf - 2.0) / 3.0,
        (16.0 * nf - 29.0) / 90.0,
    ))
}

pub fn difference_sign_test(series: &[f64]) -> Result<TestReport> {
    let n = series.len();
    if n < 2 {
        return Err(Error::DegenerateInput(format!(
            "difference sign test needs at least 2 observations, got {n}"
        )));
    }
    let ups = series.windows(2).filter(|w| w[1] > w[0]).count();
    let nf = n as f64;
    Ok(TestReport::normal(
        TestKind::DifferenceSign,
        ups as f64,
        (nf - 1.0) / 2.0,
        (nf + 1.0) / 12.0,
    ))
}

/// Mean-centered sample autocorrelations at lags `1..=max_lag`.
pub fn autocorrelations(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if max_lag == 0 || n <= max_lag {
        return Err(Error::Config(format!(
            "need 1 <= h < n, got h = {max_lag}, n = {n}"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0: f64 = c.iter().map(|v| v * v).sum();
    if !(c0 > 0.0) {
        return Err(Error::DegenerateInput("series is constant".into()));
    }
    Ok((1..=max_lag)
        .map(|j| c[j..].iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() / c0)
        .collect())
}

fn ljung_box_report(q: f64, h: usize) -> TestReport {
    let p_value = chi_square_sf(q, h as f64);
    TestReport {
        test: TestKind::LjungBox,
        h: Some(h),
        statistic: q,
        z_or_q: q,
        p_value,
        reject_at_5pct: p_value < 0.05,
    }
}

/// Ljung-Box `Q = n(n+2) sum_{j<=h} rho_j^2 / (n-j)` against chi-square(h).
pub fn portmanteau_test(series: &[f64], h: usize) -> Result<TestReport> {
    Ok(portmanteau_sweep(series, h)?.pop().expect("h >= 1"))
}

/// Ljung-Box reports for every lag `1..=max_h`, sharing one autocorrelation pass.
pub fn portmanteau_sweep(series: &[f64], max_h: usize) -> Result<Vec<TestReport>> {
    let rho = autocorrelations(series, max_h)?;
    let nf = series.len() as f64;
    let mut acc = 0.0;
    Ok(rho
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let j = i + 1;
            acc += r * r / (nf - j as f64);
            ljung_box_report(nf * (nf + 2.0) * acc, j)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;
    use approx::assert_abs_diff_eq;

    #[test]
    fn turning_point_examples() {
        let r = turning_point_test(&[1.0, 3.0, 2.0, 4.0, 3.0]).unwrap();
        assert_eq!(r.statistic, 3.0);
        assert_abs_diff_eq!(r.z_or_q, (3.0 - 2.0) / (51.0f64 / 90.0).sqrt(), epsilon = 1e-14);
        assert_eq!(turning_point_test(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap().statistic, 0.0);
        // plateaus are not turns
        assert_eq!(turning_point_test(&[1.0, 2.0, 2.0, 1.0]).unwrap().statistic, 0.0);
        assert!(turning_point_test(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn difference_sign_examples() {
        let r = difference_sign_test(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.statistic, 2.0);
        assert_abs_diff_eq!(r.z_or_q, 1.0 / (4.0f64 / 12.0).sqrt(), epsilon = 1e-14);
        assert_eq!(difference_sign_test(&[3.0, 2.0, 1.0, 0.0]).unwrap().statistic, 0.0);
        assert_eq!(difference_sign_test(&[1.0, 1.0, 1.0]).unwrap().statistic, 0.0);
        assert!(difference_sign_test(&[1.0]).is_err());
    }

    #[test]
    fn ljung_box_examples() {
        let r = portmanteau_test(&[1.0, -1.0, 1.0, -1.0], 1).unwrap();
        assert_abs_diff_eq!(r.statistic, 4.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_value, 0.033894853524689274, epsilon = 1e-10);
        assert!(r.reject_at_5pct);
        assert_eq!(r.h, Some(1));
        assert!(matches!(portmanteau_test(&[2.0; 10], 3), Err(Error::DegenerateInput(_))));
        assert!(portmanteau_test(&[1.0, 2.0, 3.0], 3).is_err());
        assert!(portmanteau_test(&[1.0, 2.0, 3.0], 0).is_err());
    }

    #[test]
    fn zero_autocorrelation_gives_unit_p_value() {
        // lag-1 products of the centered series cancel exactly
        let x = [0.0, 1.0, 0.0, -1.0];
        let r = portmanteau_test(&x, 1).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(!r.reject_at_5pct);
    }

    #[test]
    fn sweep_matches_single_lag() {
        let mut rng = RngState::new(8);
        let x: Vec<f64> = (0..500).map(|_| rng.uniform()).collect();
        let sweep = portmanteau_sweep(&x, 30).unwrap();
        assert_eq!(sweep.len(), 30);
        for h in [1, 7, 20, 30] {
            let single = portmanteau_test(&x, h).unwrap();
            assert_eq!(single, sweep[h - 1]);
        }
        assert!(sweep.windows(2).all(|w| w[1].statistic >= w[0].statistic));
    }

    #[test]
    fn normal_cdf_reference_points() {
        let table = [
            (-6.0, 9.86587645037698e-10),
            (-3.5, 0.00023262907903552504),
            (-2.5758293035489, 0.005000000000000012),
            (-1.959963984540054, 0.025000000000000012),
            (-1.0, 0.15865525393145705),
            (-0.5, 0.3085375387259869),
            (0.0, 0.5),
            (0.3, 0.6179114221889527),
            (1.2815515655446004, 0.9),
            (1.6448536269514722, 0.95),
            (2.3263478740408408, 0.99),
            (4.0, 0.9999683287581669),
        ];
        for (z, p) in table {
            assert_abs_diff_eq!(normal_cdf(z), p, epsilon = 1e-10);
        }
    }

    #[test]
    fn chi_square_reference_points() {
        let table = [
            (0.5, 1.0, 0.4795001221869535),
            (3.841458820694124, 1.0, 0.05000000000000006),
            (4.5, 1.0, 0.033894853524689274),
            (1.0, 2.0, 0.6065306597126334),
            (5.991464547107979, 2.0, 0.05000000000000007),
            (10.0, 5.0, 0.07523524614651218),
            (31.410432844230918, 20.0, 0.0500000000000001),
            (20.0, 20.0, 0.4579297144718522),
            (50.0, 30.0, 0.01240206071890058),
            (0.1, 3.0, 0.9918374237318764),
            (100.0, 30.0, 1.8568023365102387e-09),
            (15.0, 10.0, 0.1320618562877206),
        ];
        for (x, df, sf) in table {
            assert_abs_diff_eq!(chi_square_sf(x, df), sf, epsilon = 1e-10);
        }
    }

    #[test]
    fn invariance_under_increasing_transforms() {
        let mut rng = RngState::new(31);
        let x: Vec<f64> = (0..400).map(|_| rng.uniform() - 0.5).collect();
        let y: Vec<f64> = x.iter().map(|v| v.powi(3) * 7.0 + 2.0).collect();
        let z: Vec<f64> = x.iter().map(|v| 3.5 * v - 11.0).collect();
        assert_eq!(turning_point_test(&x).unwrap().statistic, turning_point_test(&y).unwrap().statistic);
        assert_eq!(difference_sign_test(&x).unwrap().statistic, difference_sign_test(&y).unwrap().statistic);
        let a = portmanteau_test(&x, 10).unwrap();
        let b = portmanteau_test(&z, 10).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-9 * a.statistic.max(1.0));
    }

    #[test]
    fn size_calibration_on_iid_data() {
        let reps = 10_000;
        let n = 2000;
        let master = RngState::new(77);
        let mut rejections = [0usize; 3];
        for r in 0..reps {
            let mut rng = master.substream(r as u64);
            let x: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
            rejections[0] += turning_point_test(&x).unwrap().reject_at_5pct as usize;
            rejections[1] += difference_sign_test(&x).unwrap().reject_at_5pct as usize;
            rejections[2] += portmanteau_test(&x, DEFAULT_LB_LAG).unwrap().reject_at_5pct as usize;
        }
        for (i, count) in rejections.iter().enumerate() {
            let rate = *count as f64 / reps as f64;
            assert!((rate - 0.05).abs() <= 0.01, "test {i}: rate {rate}");
        }
    }
}
