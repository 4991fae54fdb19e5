use serde::Serialize;
use serde_json::json;

use heavytail::diagnostics::{
    difference_sign_test, portmanteau_test, turning_point_test, TestReport,
};
use heavytail::estimators::{
    fit_ar1_with, hill, residuals_ar1, weissman_direct_with, weissman_model_ar1_with,
    EstimateFlag, EstimatorOptions, QuantileTarget,
};
use heavytail::extremal::{
    cluster_size_probs, extremal_index, hill_avar_sre_with_tol, joint_exceedance,
    ExceedanceMode, JointExceedanceQuery,
};
use heavytail::simulate::{simulate_series, simulate_walks, solve_kappa, WalkEnsemble};
use heavytail::theory::{
    hill_avar_ar1, hill_avar_linear, rmse_ratio_ar1, second_order_constants, tail_ratio_ar1,
    tail_ratio_linear, tail_relation_conditions, CoefficientSequence, SecondOrderTail,
    DEFAULT_TRUNCATION_TOL,
};
use heavytail::{InnovationSpec, RngState, SeriesModel, SreDriver};

use crate::cli::*;
use crate::error::{CliError, CliResult};
use crate::io::{csv_writer, fmt_f64, inline_or_file, json_doc, merge, print, read_series};

/// Value printed next to the RMSE ratio at its reference point.
const RMSE_RATIO_REFERENCE: (f64, f64, f64) = (0.8, 0.3, 1.03);

pub fn preset_model(p: ModelPreset) -> SeriesModel {
    match p {
        ModelPreset::LinearA => SeriesModel::linear_ar1(0.8, InnovationSpec::model_a()),
        ModelPreset::LinearB => SeriesModel::linear_ar1(0.8, InnovationSpec::model_b()),
        ModelPreset::NonlinearA => SeriesModel::nonlinear_ar1(0.8, 0.6, InnovationSpec::model_a()),
        ModelPreset::NonlinearB => SeriesModel::nonlinear_ar1(0.8, 0.6, InnovationSpec::model_b()),
    }
}

pub fn simulate(a: SimulateArgs) -> CliResult<()> {
    let mut model = match (&a.model, a.preset) {
        (Some(m), _) => inline_or_file::<SeriesModel>(m, "model")?,
        (None, Some(p)) => preset_model(p),
        (None, None) => unreachable!("clap requires a model source"),
    };
    if let Some(b) = a.burnin {
        model = model.with_burnin(b);
    }
    let x = simulate_series(&model, a.n, &mut RngState::new(a.seed))?;
    let mut w = csv_writer(a.out.as_deref())?;
    w.write_record(["t", "x"])?;
    for (i, v) in x.iter().enumerate() {
        w.write_record([(i + 1).to_string(), fmt_f64(*v)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EstimateOutput {
    method: &'static str,
    n: usize,
    k: usize,
    t: Option<f64>,
    estimate: f64,
    gamma_hat: f64,
    threshold: Option<f64>,
    phi_hat: Option<f64>,
    flags: Vec<EstimateFlag>,
}

pub fn estimate(a: EstimateArgs) -> CliResult<()> {
    let x = read_series(&a.input.input, a.input.column.as_deref())?;
    let n = x.len();
    let opts = EstimatorOptions {
        abs_values: a.abs,
        abs_residuals: a.abs,
        center: !a.no_center,
        tail_factor_floor: a.floor,
    };
    let out = match a.method {
        Method::Hill => {
            let data: Vec<f64> = if a.abs { x.iter().map(|v| v.abs()).collect() } else { x };
            let g = hill(&data, a.k)?;
            EstimateOutput {
                method: "hill",
                n,
                k: a.k,
                t: None,
                estimate: g,
                gamma_hat: g,
                threshold: None,
                phi_hat: None,
                flags: vec![],
            }
        }
        Method::WeissmanDirect | Method::WeissmanModel => {
            let t = a
                .t
                .ok_or_else(|| CliError::Usage("--t is required for Weissman estimates".into()))?;
            let target = QuantileTarget::new(t, a.k, n)?;
            let (name, e) = if a.method == Method::WeissmanDirect {
                ("weissman-direct", weissman_direct_with(&x, &target, &opts)?)
            } else {
                ("weissman-model", weissman_model_ar1_with(&x, &target, &opts)?)
            };
            EstimateOutput {
                method: name,
                n,
                k: a.k,
                t: Some(t),
                estimate: e.estimate,
                gamma_hat: e.gamma_hat,
                threshold: Some(e.threshold),
                phi_hat: e.phi_hat,
                flags: e.flags,
            }
        }
    };
    print(&json_doc("estimate", &out)?)
}

fn coefficients(c: &CoefArgs, gamma: f64) -> CliResult<(CoefficientSequence, serde_json::Value)> {
    match (&c.phi, &c.psi) {
        (Some(phi), _) => Ok((
            CoefficientSequence::ar1(*phi, gamma, DEFAULT_TRUNCATION_TOL)?,
            json!({ "phi": phi }),
        )),
        (None, Some(psi)) => Ok((CoefficientSequence::one_sided(psi)?, json!({ "psi": psi }))),
        (None, None) => unreachable!("clap requires coefficients"),
    }
}


pub fn theory(cmd: TheoryCommand) -> CliResult<()> {
    let (name, body) = match cmd {
        TheoryCommand::TailRatio { coef, gamma, p } => {
            let (seq, input) = coefficients(&coef, gamma)?;
            let value = match coef.phi {
                Some(phi) => tail_ratio_ar1(phi, gamma, p)?,
                None => tail_ratio_linear(&seq, gamma, p)?,
            };
            let notes = tail_relation_conditions(&seq, gamma);
            ("theory tail-ratio", merge(input, json!({ "gamma": gamma, "p": p, "value": value, "conditions": notes })))
        }
        TheoryCommand::HillAvar { coef, gamma } => {
            let (seq, input) = coefficients(&coef, gamma)?;
            let value = match coef.phi {
                Some(phi) => hill_avar_ar1(phi, gamma)?,
                None => hill_avar_linear(&seq, gamma)?,
            };
            ("theory hill-avar", merge(input, json!({ "gamma": gamma, "value": value })))
        }
        TheoryCommand::RmseRatio { phi, gamma } => {
            let value = rmse_ratio_ar1(phi, gamma)?;
            let (rphi, rgamma, rvalue) = RMSE_RATIO_REFERENCE;
            let at_reference = phi == rphi && gamma == rgamma;
            let mut body = json!({
                "phi": phi,
                "gamma": gamma,
                "value": value,
                "reference": { "phi": rphi, "gamma": rgamma, "value": rvalue },
            });
            if at_reference {
                body["discrepancy"] = json!(value - rvalue);
                body["matches_reference"] = json!((value - rvalue).abs() < 0.005);
            }
            ("theory rmse-ratio", body)
        }
        TheoryCommand::SecondOrder {
            coef,
            gamma,
            p,
            c,
            d,
            c_tilde,
            d_tilde,
        } => {
            let (seq, input) = coefficients(&coef, gamma)?;
            let tail = match (c, d, c_tilde, d_tilde) {
                (Some(c), Some(d), Some(ct), Some(dt)) => SecondOrderTail::new(c, d, ct, dt)?,
                _ => SecondOrderTail::shifted_pareto(gamma, p),
            };
            let k = second_order_constants(&seq, gamma, &tail)?;
            (
                "theory second-order",
                merge(input, json!({ "gamma": gamma, "tail": tail, "d_psi": k.d_psi, "D_psi": k.big_d_psi })),
            )
        }
    };
    print(&json_doc(name, &body)?)
}

fn walks(w: &WalkArgs) -> CliResult<(SreDriver, WalkEnsemble, &'static str)> {
    let driver: SreDriver = inline_or_file(&w.driver, "driver")?;
    driver.validate()?;
    let (kappa, source) = if w.kappa == "auto" {
        (solve_kappa(&driver)?, "solved")
    } else {
        let k: f64 = w
            .kappa
            .parse()
            .map_err(|_| CliError::Usage(format!("--kappa must be `auto` or a number, got {}", w.kappa)))?;
        (k, "given")
    };
    let ens = simulate_walks(&driver, kappa, w.horizon, w.paths, &RngState::new(w.seed))?;
    Ok((driver, ens, source))
}

fn walk_meta(w: &WalkArgs, driver: &SreDriver, ens: &WalkEnsemble, source: &str) -> serde_json::Value {
    json!({
        "driver": driver,
        "kappa": ens.kappa(),
        "kappa_source": source,
        "paths": w.paths,
        "horizon": w.horizon,
        "seed": w.seed,
    })
}

pub fn extremal(cmd: ExtremalCommand) -> CliResult<()> {
    let (name, body) = match cmd {
        ExtremalCommand::Theta { walk } => {
            let (d, ens, src) = walks(&walk)?;
            let t = extremal_index(&ens);
            let extra = json!({ "theta": t.value, "stderr": t.stderr, "truncation_bound": ens.tail_bound() });
            ("extremal theta", merge(walk_meta(&walk, &d, &ens, src), extra))
        }
        ExtremalCommand::Cluster { walk, kmax } => {
            let (d, ens, src) = walks(&walk)?;
            let s = cluster_size_probs(&ens, kmax)?;
            let extra = merge(serde_json::to_value(&s)?, json!({ "kmax": kmax, "mean_cluster_size": s.mean_cluster_size() }));
            ("extremal cluster", merge(walk_meta(&walk, &d, &ens, src), extra))
        }
        ExtremalCommand::HillAvar { walk, tol } => {
            let (d, ens, src) = walks(&walk)?;
            let v = hill_avar_sre_with_tol(&ens, tol)?;
            ("extremal hill-avar", merge(walk_meta(&walk, &d, &ens, src), serde_json::to_value(v)?))
        }
        ExtremalCommand::Joint { walk, x, mode } => {
            let (d, ens, src) = walks(&walk)?;
            let mode = match mode {
                ModeArg::All => ExceedanceMode::All,
                ModeArg::Some => ExceedanceMode::Some,
            };
            let q = JointExceedanceQuery { x, mode };
            let e = joint_exceedance(&ens, &q)?;
            let extra = json!({ "x": q.x, "mode": q.mode, "value": e.value, "stderr": e.stderr });
            ("extremal joint", merge(walk_meta(&walk, &d, &ens, src), extra))
        }
    };
    print(&json_doc(name, &body)?)
}

#[derive(Serialize)]
struct DiagnoseOutput {
    n: usize,
    ar1_residuals: bool,
    phi_hat: Option<f64>,
    reports: Vec<TestReport>,
    warnings: Vec<String>,
}

pub fn diagnose(a: DiagnoseArgs) -> CliResult<()> {
    let x = read_series(&a.input.input, a.input.column.as_deref())?;
    let (series, phi_hat) = if a.ar1_residuals {
        let phi = fit_ar1_with(&x, true)?;
        (residuals_ar1(&x, phi), Some(phi))
    } else {
        (x, None)
    };
    let mut warnings = Vec::new();
    let mut reports = Vec::new();
    for t in &a.tests {
        reports.push(match t {
            TestArg::Tp => turning_point_test(&series)?,
            TestArg::Ds => difference_sign_test(&series)?,
            TestArg::Lb => {
                if let Some(g) = a.innovation_gamma {
                    if g >= 0.5 {
                        let msg = format!(
                            "innovation gamma {g} >= 1/2 means infinite variance; the portmanteau test is not valid"
                        );
                        eprintln!("warning: {msg}");
                        warnings.push(msg);
                    }
                }
                portmanteau_test(&series, a.h)?
            }
        });
    }
    let out = DiagnoseOutput {
        n: series.len(),
        ar1_residuals: a.ar1_residuals,
        phi_hat,
        reports,
        warnings,
    };
    print(&json_doc("diagnose", &out)?)
}
