use std::path::{Path, PathBuf};

use serde_json::json;

use heavytail::experiments::{
    kde, run_quantile_experiment_with, silverman_bandwidth, test_power_experiment, true_quantile,
    ErrorSummary, EstimateTable, GridEstimator, TrueQuantile, KDE_GRID_POINTS,
};
use heavytail::estimators::{fit_ar1, EstimatorOptions};
use heavytail::experiments::ExperimentSpec;
use heavytail::rng::child_key;
use heavytail::simulate::simulate_series;
use heavytail::{InnovationSpec, RngState, SeriesModel};

use crate::cli::{ExperimentArgs, InnovationLabel, Preset, Scale};
use crate::error::{CliError, CliResult};
use crate::io::{csv_writer, fmt_f64, json_doc, json_line, merge, print, write_file};

const DEFAULT_REPLICATES: usize = 500;
const DEFAULT_POWER_REPLICATES: usize = 2000;
const PHI: f64 = 0.8;
const DELTA: f64 = 0.6;

fn innovations(label: InnovationLabel) -> InnovationSpec {
    match label {
        InnovationLabel::A => InnovationSpec::model_a(),
        InnovationLabel::B => InnovationSpec::model_b(),
    }
}

fn dir_name(label: InnovationLabel) -> &'static str {
    match label {
        InnovationLabel::A => "model_a",
        InnovationLabel::B => "model_b",
    }
}

/// Independent seed per (model, purpose).
fn seed_for(seed: u64, label: InnovationLabel, purpose: u64) -> u64 {
    child_key(child_key(seed, label as u64), purpose)
}

const PURPOSE_ESTIMATES: u64 = 0;
const PURPOSE_TRUTH: u64 = 1;
const PURPOSE_NULL: u64 = 2;

struct Run<'a> {
    args: &'a ExperimentArgs,
    files: Vec<PathBuf>,
}

pub fn experiment(args: ExperimentArgs) -> CliResult<()> {
    if args.k_step == 0 || args.k_min == 0 || args.k_min > args.k_max {
        return Err(CliError::Usage("need 1 <= k-min <= k-max and k-step >= 1".into()));
    }
    let mut labels = args.models.clone().unwrap_or_else(|| match args.preset {
        Preset::Figure4 | Preset::Figure2Scatter | Preset::Power => vec![InnovationLabel::B],
        _ => vec![InnovationLabel::A, InnovationLabel::B],
    });
    labels.sort();
    labels.dedup();
    if args.true_value.is_some() && labels.len() != 1 {
        return Err(CliError::Usage("--true-value needs exactly one model in --models".into()));
    }
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", args.out.display())))?;

    let mut run = Run { args: &args, files: Vec::new() };
    for &label in &labels {
        let dir = args.out.join(dir_name(label));
        std::fs::create_dir_all(&dir)?;
        let spec = innovations(label);
        let linear = SeriesModel::linear_ar1(PHI, spec);
        let nonlinear = SeriesModel::nonlinear_ar1(PHI, DELTA, spec);
        match args.preset {
            Preset::Table1 | Preset::Figure1 => {
                run.quantile(label, &linear, &dir, &[])?;
            }
            Preset::Table2 | Preset::Figure3 => {
                run.quantile(label, &nonlinear, &dir, &[])?;
            }
            Preset::Figure4 => run.figure4(label, &nonlinear, &dir)?,
            Preset::Figure2Scatter => run.scatter(label, &nonlinear, &dir)?,
            Preset::Power => run.power(label, &nonlinear, &linear, &dir)?,
        }
    }
    let manifest = json!({
        "preset": args.preset.to_possible_value_name(),
        "seed": args.seed,
        "models": labels.iter().map(|&l| dir_name(l)).collect::<Vec<_>>(),
        "files": run.files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    print(&json_doc("experiment", &manifest)?)
}

trait PresetName {
    fn to_possible_value_name(&self) -> String;
}

impl PresetName for Preset {
    fn to_possible_value_name(&self) -> String {
        use clap::ValueEnum;
        self.to_possible_value().expect("no skipped values").get_name().to_string()
    }
}

impl Run<'_> {
    fn k_grid(&self, extra: &[usize]) -> Vec<usize> {
        let a = self.args;
        let mut g: Vec<usize> = (a.k_min..=a.k_max).step_by(a.k_step).collect();
        g.extend_from_slice(extra);
        g.sort_unstable();
        g.dedup();
        g
    }

    fn truth(&self, label: InnovationLabel, model: &SeriesModel) -> CliResult<(f64, Option<TrueQuantile>)> {
        let a = self.args;
        if let Some(v) = a.true_value {
            return Ok((v, None));
        }
        let (reps, len) = match a.scale {
            Scale::Desk => (50, 1_000_000),
            Scale::Full => (200, 9_000_000),
        };
        let reps = a.truth_reps.unwrap_or(reps);
        let len = a.truth_length.unwrap_or(len);
        eprintln!("[{}] ground truth: {reps} series of length {len}", dir_name(label));
        let rng = RngState::new(seed_for(a.seed, label, PURPOSE_TRUTH));
        let tq = true_quantile(model, a.t, reps, len, &rng)?;
        Ok((tq.value, Some(tq)))
    }

    fn quantile(
        &mut self,
        label: InnovationLabel,
        model: &SeriesModel,
        dir: &Path,
        extra_k: &[usize],
    ) -> CliResult<(ErrorSummary, EstimateTable)> {
        let a = self.args;
        let (true_value, truth) = self.truth(label, model)?;
        let mut spec = ExperimentSpec::new(
            *model,
            a.n,
            a.replicates.unwrap_or(DEFAULT_REPLICATES),
            a.t,
            seed_for(a.seed, label, PURPOSE_ESTIMATES),
        );
        spec.k_grid = self.k_grid(extra_k);
        spec.options = EstimatorOptions {
            abs_values: a.abs,
            abs_residuals: a.abs,
            ..EstimatorOptions::default()
        };
        eprintln!("[{}] {} replicates of length {}", dir_name(label), spec.replicates, spec.n);
        let builtins = spec.builtin_estimators();
        let ests: Vec<&dyn GridEstimator> = builtins.iter().map(|e| e as &dyn GridEstimator).collect();
        let (mut summary, table) = run_quantile_experiment_with(&spec, true_value, &ests)?;
        summary.true_value_half_width = truth.map(|t| t.half_width);

        let body = merge(
            serde_json::to_value(&summary)?,
            json!({
                "model": model,
                "master_seed": spec.master_seed,
                "k_grid": spec.k_grid,
                "truth": truth,
            }),
        );
        let path = dir.join("summary.json");
        write_file(&path, &json_doc("experiment", &body)?)?;
        self.files.push(path);

        let path = dir.join("errors_vs_k.csv");
        let mut w = csv_writer(Some(&path))?;
        w.write_record(["estimator", "k", "rmse", "l1", "bias", "stderr", "missing"])?;
        for r in &summary.rows {
            w.write_record([
                r.estimator.clone(),
                r.k.to_string(),
                fmt_f64(r.rmse),
                fmt_f64(r.l1),
                fmt_f64(r.bias),
                fmt_f64(r.stderr),
                r.missing.to_string(),
            ])?;
        }
        w.flush()?;
        self.files.push(path);
        Ok((summary, table))
    }

    fn figure4(&mut self, label: InnovationLabel, model: &SeriesModel, dir: &Path) -> CliResult<()> {
        let a = self.args;
        let extra: Vec<usize> = [a.k_direct, a.k_model].into_iter().flatten().collect();
        let (summary, table) = self.quantile(label, model, dir, &extra)?;
        let pick = |given: Option<usize>, name: &str| -> CliResult<usize> {
            given
                .or_else(|| summary.argmin_rmse.get(name).map(|m| m.k))
                .ok_or_else(|| CliError::Numeric(format!("no valid estimates for {name}")))
        };
        let kd = pick(a.k_direct, "direct")?;
        let km = pick(a.k_model, "model-based")?;
        let idx = |k: usize| table.k_grid.iter().position(|&g| g == k).expect("k is on the grid");
        let direct = table.column(0, idx(kd));
        let model_based = table.column(1, idx(km));
        let hd = silverman_bandwidth(&direct)?;
        let hm = silverman_bandwidth(&model_based)?;
        let h = hd.max(hm);
        let all = direct.iter().chain(&model_based);
        let lo = all.clone().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
        let hi = all.copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
        let step = (hi - lo) / (KDE_GRID_POINTS - 1) as f64;
        let grid: Vec<f64> = (0..KDE_GRID_POINTS).map(|i| lo + step * i as f64).collect();
        let dd = kde(&direct, &grid)?;
        let dm = kde(&model_based, &grid)?;

        let path = dir.join("density.csv");
        let mut w = csv_writer(Some(&path))?;
        w.write_record(["x", "direct", "model"])?;
        for ((x, a), b) in grid.iter().zip(&dd.density).zip(&dm.density) {
            w.write_record([fmt_f64(*x), fmt_f64(*a), fmt_f64(*b)])?;
        }
        w.flush()?;
        self.files.push(path);

        let meta = json!({
            "k_direct": kd,
            "k_model": km,
            "bandwidth_direct": dd.bandwidth,
            "bandwidth_model": dm.bandwidth,
            "estimates_direct": direct.len(),
            "estimates_model": model_based.len(),
            "true_value": summary.true_value,
        });
        let path = dir.join("density.json");
        write_file(&path, &json_doc("experiment", &meta)?)?;
        self.files.push(path);
        Ok(())
    }

    fn scatter(&mut self, label: InnovationLabel, model: &SeriesModel, dir: &Path) -> CliResult<()> {
        let a = self.args;
        let seed = seed_for(a.seed, label, PURPOSE_ESTIMATES);
        let x = simulate_series(model, a.n, &mut RngState::new(seed))?;
        let phi_hat = fit_ar1(&x)?;
        let path = dir.join("scatter.csv");
        let mut w = csv_writer(Some(&path))?;
        w.write_record(["x_prev", "x_cur"])?;
        for p in x.windows(2) {
            w.write_record([fmt_f64(p[0]), fmt_f64(p[1])])?;
        }
        w.flush()?;
        self.files.push(path);
        let path = dir.join("fit.json");
        let meta = json!({ "phi_hat": phi_hat, "n": a.n, "seed": seed, "model": model });
        write_file(&path, &json_line("experiment", &meta)?)?;
        self.files.push(path);
        Ok(())
    }

    fn power(
        &mut self,
        label: InnovationLabel,
        alternative: &SeriesModel,
        null: &SeriesModel,
        dir: &Path,
    ) -> CliResult<()> {
        let a = self.args;
        let reps = a.replicates.unwrap_or(DEFAULT_POWER_REPLICATES);
        eprintln!("[{}] power: {reps} replicates of length {}", dir_name(label), a.n);
        let alt = test_power_experiment(
            alternative,
            a.n,
            reps,
            &RngState::new(seed_for(a.seed, label, PURPOSE_ESTIMATES)),
        )?;
        let size = test_power_experiment(null, a.n, reps, &RngState::new(seed_for(a.seed, label, PURPOSE_NULL)))?;
        let body = json!({
            "nonlinear": alt,
            "linear": size,
            "ljung_box_excess": alt.ljung_box_max - size.ljung_box[alt.ljung_box_argmax - 1],
        });
        let path = dir.join("power.json");
        write_file(&path, &json_doc("experiment", &body)?)?;
        self.files.push(path);
        Ok(())
    }
}
