//! Config-driven experiment pipelines. Each pipeline is a strategy behind
//! the [`Experiment`] trait, registered by name and selected at runtime by
//! the CLI (or directly through [`run_experiment`]).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::cubature::make_weight_rule;
use crate::dataset::{load_csv, synth_inpaint_image, synth_seasonal_series, Dataset};
use crate::diagnostics::{mrmse_closed_form, mrmse_monte_carlo, PriorSampler};
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::inference::{posterior_predictive, run_posterior, OutputPrior, RegressionProblem};
use crate::kernels::ZeroMean;
use crate::points::PointSet;
use crate::prior::sample_ridgelet_network;
use crate::report::{emit_plot_data, CsvValue, PlotTable};
use crate::ridgelet::{build_psi, check_reconstruction, FeatureMap};
use crate::rng::derive_seed;

/// One experiment pipeline: turns a validated config into artifact files.
pub trait Experiment: Send + Sync {
    fn kind(&self) -> ExperimentKind;
    fn run(&self, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>>;

    fn name(&self) -> &'static str {
        self.kind().name()
    }
}

/// All registered pipelines, in CLI order.
pub fn registry() -> Vec<Box<dyn Experiment>> {
    vec![
        Box::new(SamplePriorExperiment),
        Box::new(MrmseExperiment),
        Box::new(CovCurveExperiment),
        Box::new(RegressExperiment),
        Box::new(InPaintExperiment),
        Box::new(ReconstructExperiment),
        Box::new(SweepExperiment),
    ]
}

/// Look up a pipeline by its registered name.
pub fn find(name: &str) -> Result<Box<dyn Experiment>> {
    let kind = ExperimentKind::parse(name)?;
    registry()
        .into_iter()
        .find(|e| e.kind() == kind)
        .ok_or_else(|| Error::UnknownName {
            kind: "experiment",
            name: name.to_string(),
        })
}

/// Validate the config against the requested kind and dispatch.
pub fn run_experiment(
    kind: ExperimentKind,
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    if let Some(name) = &cfg.experiment {
        if ExperimentKind::parse(name)? != kind {
            return Err(Error::Config(format!(
                "config is for experiment `{name}`, not `{}`",
                kind.name()
            )));
        }
    }
    std::fs::create_dir_all(out_dir)?;
    find(kind.name())?.run(cfg, out_dir)
}

fn metadata(cfg: &ExperimentConfig) -> Vec<(&'static str, String)> {
    vec![
        ("config_sha256", cfg.sha256()),
        ("seed", cfg.seed.to_string()),
        ("version", env!("CARGO_PKG_VERSION").to_string()),
    ]
}

fn probe_grid(cfg: &ExperimentConfig) -> PointSet {
    let half = cfg.x_domain_half();
    if cfg.kernel_dimension == 1 {
        PointSet::grid_1d(-half, half, cfg.probe_points)
    } else {
        // multivariate probes use a coarser per-axis resolution
        let per_axis = (cfg.probe_points as f64)
            .powf(1.0 / cfg.kernel_dimension as f64)
            .round()
            .max(2.0) as usize;
        PointSet::grid_nd(-half, half, per_axis, cfg.kernel_dimension)
    }
}

// ---------------------------------------------------------------------------

/// Sample paths from the ridgelet prior (and the target GP) on a probe grid.
struct SamplePriorExperiment;

impl Experiment for SamplePriorExperiment {
    fn kind(&self) -> ExperimentKind {
        ExperimentKind::SamplePrior
    }

    fn run(&self, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
        let kernel = cfg.make_kernel()?;
        let mean = cfg.make_mean()?;
        let pair = cfg.make_activation()?;
        let input = cfg.make_input_rule()?;
        let probe = probe_grid(cfg);
        let meta = metadata(cfg);
        let mut files = Vec::new();

        let widths_list: Vec<Vec<usize>> = match &cfg.layer_widths {
            Some(w) => vec![w.clone()],
            None => cfg.n_units.iter().map(|&n| vec![n]).collect(),
        };
        for widths in &widths_list {
            let mut columns = vec!["x".to_string()];
            for p in 0..cfg.n_paths {
                columns.push(format!("path_{p}"));
            }
            let mut table = PlotTable {
                columns,
                rows: Vec::new(),
            };
            let nets = (0..cfg.n_paths)
                .into_par_iter()
                .map(|p| {
                    sample_ridgelet_network(
                        mean.as_ref(),
                        kernel.as_ref(),
                        &input,
                        pair.clone(),
                        widths,
                        cfg.sigma_w,
                        cfg.sigma_b,
                        derive_seed(cfg.seed, 1, p as u64),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let values: Vec<DVector<f64>> = nets
                .iter()
                .map(|net| net.evaluate_many(&probe))
                .collect::<Result<Vec<_>>>()?;
            for (j, x) in probe.iter().enumerate() {
                let mut row = vec![CsvValue::Float(x[0])];
                for v in &values {
                    row.push(CsvValue::Float(v[j]));
                }
                table.push(row);
            }
            let tag = widths
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join("x");
            let path = out_dir.join(format!("prior_paths_n{tag}.csv"));
            emit_plot_data(&table, &meta, &path)?;
            files.push(path);
        }

        // reference draws from the target GP on the same grid
        let gp = GpModel::new(mean, kernel);
        let paths = gp.sample_paths(&probe, cfg.n_paths, derive_seed(cfg.seed, 2, 0))?;
        let mut columns = vec!["x".to_string()];
        for p in 0..cfg.n_paths {
            columns.push(format!("path_{p}"));
        }
        let mut table = PlotTable {
            columns,
            rows: Vec::new(),
        };
        for (j, x) in probe.iter().enumerate() {
            let mut row = vec![CsvValue::Float(x[0])];
            for p in 0..cfg.n_paths {
                row.push(CsvValue::Float(paths[(p, j)]));
            }
            table.push(row);
        }
        let path = out_dir.join("gp_paths.csv");
        emit_plot_data(&table, &meta, &path)?;
        files.push(path);
        Ok(files)
    }
}

// ---------------------------------------------------------------------------

/// Closed-form MRMSE across unit counts and seeds, with an optional Monte
/// Carlo cross-check.
struct MrmseExperiment;

impl Experiment for MrmseExperiment {
    fn kind(&self) -> ExperimentKind {
        ExperimentKind::Mrmse
    }

    fn run(&self, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
        let kernel = cfg.make_kernel()?;
        let mean = cfg.make_mean()?;
        let pair = cfg.make_activation()?;
        let input = cfg.make_input_rule()?;
        let probe = probe_grid(cfg);
        let mut table = PlotTable::new(&["n_units", "seed", "metric", "value"]);
        for &n in &cfg.n_units {
            let rows: Vec<Vec<(u64, &'static str, f64)>> = (0..cfg.n_seeds)
                .into_par_iter()
                .map(|s| {
                    let seed = derive_seed(cfg.seed, n as u64, s as u64);
                    let rule = make_weight_rule(input.dim(), n, cfg.sigma_w, cfg.sigma_b, seed)?;
                    let psi = build_psi(&rule, &input, pair.as_ref())?;
                    let feature = FeatureMap::new(&rule, pair.as_ref());
                    let cf = mrmse_closed_form(
                        mean.as_ref(),
                        kernel.as_ref(),
                        &input,
                        &psi,
                        &feature,
                        &probe,
                    )?;
                    let mut out = vec![(seed, "mrmse_closed_form", cf.value)];
                    if cfg.with_monte_carlo_check {
                        let mc = mrmse_monte_carlo(
                            mean.as_ref(),
                            kernel.as_ref(),
                            &input,
                            &psi,
                            &feature,
                            &probe,
                            cfg.n_gp_draws,
                            seed,
                        )?;
                        out.push((seed, "mrmse_monte_carlo", mc));
                    }
                    Ok(out)
                })
                .collect::<Result<Vec<_>>>()?;
            for group in rows {
                for (seed, metric, value) in group {
                    table.push(vec![
                        CsvValue::Int(n as i64),
                        CsvValue::UInt(seed),
                        CsvValue::Text(metric.to_string()),
                        CsvValue::Float(value),
                    ]);
                }
            }
        }
        let path = out_dir.join("mrmse.csv");
        emit_plot_data(&table, &metadata(cfg), &path)?;
        Ok(vec![path])
    }
}

// ---------------------------------------------------------------------------

/// Network covariance function `cov(x, 0)` versus the target kernel.
struct CovCurveExperiment;

impl Experiment for CovCurveExperiment {
    fn kind(&self) -> ExperimentKind {
        ExperimentKind::CovCurve
    }

    fn run(&self, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
        let kernel = cfg.make_kernel()?;
        let pair = cfg.make_activation()?;
        let input = cfg.make_input_rule()?;
        let probe = probe_grid(cfg);
        let x_ref = vec![0.0; cfg.kernel_dimension];
        let meta = metadata(cfg);

        let mut curve_table = PlotTable::new(&["n_units", "x", "bnn_cov", "target"]);
        let mut summary = PlotTable::new(&["n_units", "seed", "metric", "value"]);
        for &n in &cfg.n_units {
            let sampler = PriorSampler::Ridgelet {
                kernel: kernel.clone(),
                input: input.clone(),
                pair: pair.clone(),
                sigma_w: cfg.sigma_w,
                sigma_b: cfg.sigma_b,
                n_units: n,
            };
            for s in 0..cfg.n_seeds {
                let seed = derive_seed(cfg.seed, n as u64, s as u64);
                let curve = sampler.covariance_curve(&probe, &x_ref, cfg.n_nets, seed)?;
                let sup = probe
                    .iter()
                    .zip(curve.iter())
                    .map(|(x, &c)| (c - kernel.eval(x, &x_ref)).abs())
                    .fold(0.0f64, f64::max);
                summary.push(vec![
                    CsvValue::Int(n as i64),
                    CsvValue::UInt(seed),
                    CsvValue::Text("cov_sup_dist".into()),
                    CsvValue::Float(sup),
                ]);
                if s == 0 {
                    for (x, &c) in probe.iter().zip(curve.iter()) {
                        curve_table.push(vec![
                            CsvValue::Int(n as i64),
                            CsvValue::Float(x[0]),
                            CsvValue::Float(c),
                            CsvValue::Float(kernel.eval(x, &x_ref)),
                        ]);
                    }
                }
            }
        }
        let curve_path = out_dir.join("cov_curve.csv");
        emit_plot_data(&curve_table, &meta, &curve_path)?;
        let summary_path = out_dir.join("cov_summary.csv");
        emit_plot_data(&summary, &meta, &summary_path)?;
        Ok(vec![curve_path, summary_path])
    }
}

// ---------------------------------------------------------------------------

fn load_or_synthesize_series(cfg: &ExperimentConfig) -> Result<(Dataset, usize)> {
    match &cfg.dataset {
        Some(path) => {
            let x_cols: Vec<String> = cfg
                .x_columns
                .clone()
                .ok_or_else(|| Error::Config("x_columns required with a dataset".into()))?;
            let y_col = cfg
                .y_column
                .clone()
                .ok_or_else(|| Error::Config("y_column required with a dataset".into()))?;
            let refs: Vec<&str> = x_cols.iter().map(String::as_str).collect();
            let ds = load_csv(path, &refs, &y_col, cfg.standardize)?;
            let n_train = cfg.synth_train_points.unwrap_or(ds.x.len());
            if n_train > ds.x.len() {
                return Err(Error::Config("synth_train_points exceeds dataset size".into()));
            }
            Ok((ds, n_train))
        }
        None => {
            let n_train = cfg.synth_train_points.unwrap_or(43);
            let n_extra = cfg.synth_extrapolation_points.unwrap_or(23);
            let slope = cfg
                .mean_slope
                .as_ref()
                .and_then(|s| s.first().copied())
                .unwrap_or(0.0);
            let period = cfg
                .synth_period
                .or_else(|| cfg.kernel_period.map(|p| p * p))
                .unwrap_or(3.24);
            let amplitude = cfg.synth_amplitude.unwrap_or(0.75);
            let series = synth_seasonal_series(
                n_train,
                n_extra,
                slope,
                period,
                amplitude,
                cfg.noise_sd,
                derive_seed(cfg.seed, 3, 0),
            );
            Ok((
                Dataset {
                    x: PointSet::from_1d(&series.x),
                    y: DVector::from_vec(series.y),
                    standardization: None,
                },
                n_train,
            ))
        }
    }
}

fn predictive_table(
    xs: &PointSet,
    mean: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> PlotTable {
    let mut table = PlotTable::new(&["x", "mean", "lo", "hi"]);
    for (j, x) in xs.iter().enumerate() {
        table.push(vec![
            CsvValue::Float(x[0]),
            CsvValue::Float(mean[j]),
            CsvValue::Float(lower[j]),
            CsvValue::Float(upper[j]),
        ]);
    }
    table
}

/// Series regression with three models: closed-form GP posterior, the
/// ridgelet-prior network posterior and the i.i.d.-prior baseline, all on a
/// common test grid (training window plus extrapolation horizon).
struct RegressExperiment;

impl Experiment for RegressExperiment {
    fn kind(&self) -> ExperimentKind {
        ExperimentKind::Regress
    }

    fn run(&self, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
        let kernel = cfg.make_kernel()?;
        let mean = cfg.make_mean()?;
        let pair = cfg.make_activation()?;
        let input = cfg.make_input_rule()?;
        let n_units = cfg.n_units[0];
        let meta = metadata(cfg);
        let (dataset, n_train) = load_or_synthesize_series(cfg)?;
        let train = PointSet::from_rows(
            &(0..n_train)
                .map(|i| dataset.x.point(i).to_vec())
                .collect::<Vec<_>>(),
        )?;
        let y_train = DVector::from_iterator(n_train, dataset.y.iter().take(n_train).copied());
        let test = dataset.x.clone();
        let mut files = Vec::new();

        // observed data
        let mut data_table = PlotTable::new(&["x", "y", "train"]);
        for (i, x) in dataset.x.iter().enumerate() {
            data_table.push(vec![
                CsvValue::Float(x[0]),
                CsvValue::Float(dataset.y[i]),
                CsvValue::Int(i64::from(i < n_train)),
            ]);
        }
        let p = out_dir.join("dataset.csv");
        emit_plot_data(&data_table, &meta, &p)?;
        files.push(p);

        // closed-form GP posterior
        let gp = GpModel::new(mean.clone(), kernel.clone());
        let (gp_mean, gp_var) = gp.posterior(&train, &y_train, cfg.noise_sd, &test)?;
        let sd = gp_var.map(|v| v.max(0.0).sqrt());
        let lower = &gp_mean - 1.959_963_984_540_054 * &sd;
        let upper = &gp_mean + 1.959_963_984_540_054 * &sd;
        let p = out_dir.join("gp_posterior.csv");
        emit_plot_data(&predictive_table(&test, &gp_mean, &lower, &upper), &meta, &p)?;
        files.push(p);

        // network posteriors
        for (label, prior) in [
            (
                "ridgelet",
                OutputPrior::Ridgelet {
                    kernel: kernel.clone(),
                    input: input.clone(),
                    prior_mean: Arc::new(ZeroMean::new(input.dim())?),
                },
            ),
            (
                "iid",
                OutputPrior::Iid {
                    output_sd: cfg
                        .iid_sigma_w1
                        .unwrap_or(0.1 / (n_units as f64).sqrt()),
                },
            ),
        ] {
            let (sigma_w, sigma_b) = match prior {
                OutputPrior::Ridgelet { .. } => (cfg.sigma_w, cfg.sigma_b),
                OutputPrior::Iid { .. } => (
                    cfg.iid_sigma_w0.unwrap_or(cfg.sigma_w),
                    cfg.iid_sigma_b0.unwrap_or(cfg.sigma_b),
                ),
            };
            let problem = RegressionProblem::new(
                train.clone(),
                y_train.clone(),
                mean.clone(),
                cfg.noise_sd,
                pair.clone(),
                n_units,
                sigma_w,
                sigma_b,
                prior,
            )?;
            let chain = run_posterior(
                &problem,
                cfg.mcmc_samples,
                cfg.mcmc_burn_in,
                cfg.mcmc_thin,
                derive_seed(cfg.seed, 4, if label == "ridgelet" { 0 } else { 1 }),
            )?;
            let summary = posterior_predictive(&chain, &problem, &test, 0.025, 0.975)?;
            let p = out_dir.join(format!("bnn_{label}_posterior.csv"));
            emit_plot_data(
                &predictive_table(&test, &summary.mean, &summary.lower, &summary.upper),
                &meta,
                &p,
            )?;
            files.push(p);
            let nets = out_dir.join(format!("bnn_{label}_chain.jsonl"));
            let side = out_dir.join(format!("bnn_{label}_loglik.csv"));
            chain.write_checkpoint(&problem, &nets, &side)?;
            files.push(nets);
            files.push(side);
        }
        Ok(files)
    }
}

// ---------------------------------------------------------------------------

/// Image in-painting: infer the censored central square from the noisy
/// remainder, with both priors, reporting posterior means on the full grid.
struct InPaintExperiment;

impl Experiment for InPaintExperiment {
    fn kind(&self) -> ExperimentKind {
        ExperimentKind::InPaint
    }

    fn run(&self, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
        if cfg.kernel_dimension != 2 {
            return Err(Error::Config("inpaint requires kernel_dimension = 2".into()));
        }
        let kernel = cfg.make_kernel()?;
        let mean = cfg.make_mean()?;
        let pair = cfg.make_activation()?;
        let input = cfg.make_input_rule()?;
        let n_units = cfg.n_units[0];
        let mask_half = cfg.inpaint_mask_half_width.unwrap_or(5.0 / 3.0);
        let meta = metadata(cfg);

        let (grid, truth) = match &cfg.dataset {
            Some(path) => {
                let x_cols: Vec<String> = cfg
                    .x_columns
                    .clone()
                    .ok_or_else(|| Error::Config("x_columns required with a dataset".into()))?;
                let y_col = cfg
                    .y_column
                    .clone()
                    .ok_or_else(|| Error::Config("y_column required with a dataset".into()))?;
                let refs: Vec<&str> = x_cols.iter().map(String::as_str).collect();
                let ds = load_csv(path, &refs, &y_col, false)?;
                (ds.x, ds.y)
            }
            None => synth_inpaint_image(cfg.grid_points_per_axis),
        };

        // censor the central square, add observation noise to the rest
        let observed: Vec<usize> = (0..grid.len())
            .filter(|&i| {
                let x = grid.point(i);
                x.iter().any(|v| v.abs() > mask_half)
            })
            .collect();
        let train = PointSet::from_rows(
            &observed.iter().map(|&i| grid.point(i).to_vec()).collect::<Vec<_>>(),
        )?;
        let mut noise_rng =
            crate::rng::substream_for(derive_seed(cfg.seed, 5, 0), crate::rng::purpose::OBS_NOISE, 0, 0);
        let noise = crate::rng::normal_vector(&mut noise_rng, observed.len(), cfg.noise_sd);
        let y_train = DVector::from_iterator(
            observed.len(),
            observed.iter().enumerate().map(|(j, &i)| truth[i] + noise[j]),
        );

        let mut files = Vec::new();
        let mut img = PlotTable::new(&["x1", "x2", "value", "observed"]);
        for (i, x) in grid.iter().enumerate() {
            img.push(vec![
                CsvValue::Float(x[0]),
                CsvValue::Float(x[1]),
                CsvValue::Float(truth[i]),
                CsvValue::Int(i64::from(observed.binary_search(&i).is_ok())),
            ]);
        }
        let p = out_dir.join("inpaint_image.csv");
        emit_plot_data(&img, &meta, &p)?;
        files.push(p);

        // closed-form GP reference
        let gp = GpModel::new(mean.clone(), kernel.clone());
        let (gp_mean, _) = gp.posterior(&train, &y_train, cfg.noise_sd, &grid)?;
        let mut gp_table = PlotTable::new(&["x1", "x2", "posterior_mean"]);
        for (i, x) in grid.iter().enumerate() {
            gp_table.push(vec![
                CsvValue::Float(x[0]),
                CsvValue::Float(x[1]),
                CsvValue::Float(gp_mean[i]),
            ]);
        }
        let p = out_dir.join("inpaint_gp.csv");
        emit_plot_data(&gp_table, &meta, &p)?;
        files.push(p);

        for (label, prior) in [
            (
                "ridgelet",
                OutputPrior::Ridgelet {
                    kernel: kernel.clone(),
                    input: input.clone(),
                    prior_mean: Arc::new(ZeroMean::new(2)?),
                },
            ),
            (
                "iid",
                OutputPrior::Iid {
                    output_sd: cfg.iid_sigma_w1.unwrap_or(0.1 / (n_units as f64).sqrt()),
                },
            ),
        ] {
            let (sigma_w, sigma_b) = match prior {
                OutputPrior::Ridgelet { .. } => (cfg.sigma_w, cfg.sigma_b),
                OutputPrior::Iid { .. } => (
                    cfg.iid_sigma_w0.unwrap_or(cfg.sigma_w),
                    cfg.iid_sigma_b0.unwrap_or(cfg.sigma_b),
                ),
            };
            let problem = RegressionProblem::new(
                train.clone(),
                y_train.clone(),
                mean.clone(),
                cfg.noise_sd,
                pair.clone(),
                n_units,
                sigma_w,
                sigma_b,
                prior,
            )?;
            let chain = run_posterior(
                &problem,
                cfg.mcmc_samples,
                cfg.mcmc_burn_in,
                cfg.mcmc_thin,
                derive_seed(cfg.seed, 6, if label == "ridgelet" { 0 } else { 1 }),
            )?;
            let summary = posterior_predictive(&chain, &problem, &grid, 0.025, 0.975)?;
            let mut table = PlotTable::new(&["x1", "x2", "posterior_mean"]);
            for (i, x) in grid.iter().enumerate() {
                table.push(vec![
                    CsvValue::Float(x[0]),
                    CsvValue::Float(x[1]),
                    CsvValue::Float(summary.mean[i]),
                ]);
            }
            let p = out_dir.join(format!("inpaint_{label}.csv"));
            emit_plot_data(&table, &meta, &p)?;
            files.push(p);
        }
        Ok(files)
    }
}

// ---------------------------------------------------------------------------

/// Reconstruction of a fixed test function under the discretised operator:
/// error versus unit count, and along the bandwidth schedule.
struct ReconstructExperiment;

impl Experiment for ReconstructExperiment {
    fn kind(&self) -> ExperimentKind {
        ExperimentKind::Reconstruct
    }

    fn run(&self, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
        if cfg.kernel_dimension != 1 {
            return Err(Error::Config("reconstruct is one-dimensional".into()));
        }
        let pair = cfg.make_activation()?;
        let x_half = cfg.x_domain_half().min(cfg.grid_s * 0.999);
        let test_fn = |x: f64| (-x * x / 2.0).exp();
        let mut table = PlotTable::new(&["sigma_w", "sigma_b", "n_units", "seed", "metric", "value"]);

        // error vs N at the configured bandwidths
        for &n in &cfg.n_units {
            let sups: Vec<(u64, f64)> = (0..cfg.n_seeds)
                .into_par_iter()
                .map(|s| {
                    let seed = derive_seed(cfg.seed, n as u64, s as u64);
                    let sup = check_reconstruction(
                        pair.as_ref(),
                        &test_fn,
                        cfg.sigma_w,
                        cfg.sigma_b,
                        cfg.grid_points_per_axis,
                        n,
                        cfg.grid_s,
                        x_half,
                        seed,
                    )?;
                    Ok((seed, sup))
                })
                .collect::<Result<Vec<_>>>()?;
            for (seed, sup) in sups {
                table.push(vec![
                    CsvValue::Float(cfg.sigma_w),
                    CsvValue::Float(cfg.sigma_b),
                    CsvValue::Int(n as i64),
                    CsvValue::UInt(seed),
                    CsvValue::Text("sup_error".into()),
                    CsvValue::Float(sup),
                ]);
            }
        }

        // dynamic (σ_w, σ_b, N) schedule
        for (idx, ((&sw, &sb), &n)) in cfg
            .schedule_sigma_w
            .iter()
            .zip(&cfg.schedule_sigma_b)
            .zip(&cfg.schedule_n_units)
            .enumerate()
        {
            let sups: Vec<(u64, f64)> = (0..cfg.n_seeds)
                .into_par_iter()
                .map(|s| {
                    let seed = derive_seed(cfg.seed, 100 + idx as u64, s as u64);
                    let sup = check_reconstruction(
                        pair.as_ref(),
                        &test_fn,
                        sw,
                        sb,
                        cfg.grid_points_per_axis,
                        n,
                        cfg.grid_s,
                        x_half,
                        seed,
                    )?;
                    Ok((seed, sup))
                })
                .collect::<Result<Vec<_>>>()?;
            for (seed, sup) in sups {
                table.push(vec![
                    CsvValue::Float(sw),
                    CsvValue::Float(sb),
                    CsvValue::Int(n as i64),
                    CsvValue::UInt(seed),
                    CsvValue::Text("schedule_sup_error".into()),
                    CsvValue::Float(sup),
                ]);
            }
        }
        let path = out_dir.join("reconstruction.csv");
        emit_plot_data(&table, &metadata(cfg), &path)?;
        Ok(vec![path])
    }
}

// ---------------------------------------------------------------------------

/// Bandwidth sweep: MRMSE and covariance sup-distance per `(σ_w, σ_b)` pair
/// (optionally with a per-rung unit count).
struct SweepExperiment;

impl Experiment for SweepExperiment {
    fn kind(&self) -> ExperimentKind {
        ExperimentKind::Sweep
    }

    fn run(&self, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
        let kernel = cfg.make_kernel()?;
        let mean = cfg.make_mean()?;
        let pair = cfg.make_activation()?;
        let input = cfg.make_input_rule()?;
        let probe = probe_grid(cfg);
        let x_ref = vec![0.0; cfg.kernel_dimension];
        let mut table =
            PlotTable::new(&["sigma_w", "sigma_b", "n_units", "seed", "metric", "value"]);
        for (idx, (&sw, &sb)) in cfg
            .schedule_sigma_w
            .iter()
            .zip(&cfg.schedule_sigma_b)
            .enumerate()
        {
            let n_list: Vec<usize> = if cfg.schedule_n_units.is_empty() {
                cfg.n_units.clone()
            } else {
                vec![cfg.schedule_n_units[idx]]
            };
            for &n in &n_list {
                // MRMSE medians across seeds at these bandwidths
                let values: Vec<(u64, f64)> = (0..cfg.n_seeds)
                    .into_par_iter()
                    .map(|s| {
                        let seed = derive_seed(cfg.seed, (idx as u64) << 32 | n as u64, s as u64);
                        let rule = make_weight_rule(input.dim(), n, sw, sb, seed)?;
                        let psi = build_psi(&rule, &input, pair.as_ref())?;
                        let feature = FeatureMap::new(&rule, pair.as_ref());
                        let cf = mrmse_closed_form(
                            mean.as_ref(),
                            kernel.as_ref(),
                            &input,
                            &psi,
                            &feature,
                            &probe,
                        )?;
                        Ok((seed, cf.value))
                    })
                    .collect::<Result<Vec<_>>>()?;
                for (seed, value) in values {
                    table.push(vec![
                        CsvValue::Float(sw),
                        CsvValue::Float(sb),
                        CsvValue::Int(n as i64),
                        CsvValue::UInt(seed),
                        CsvValue::Text("mrmse_closed_form".into()),
                        CsvValue::Float(value),
                    ]);
                }
                // covariance sup-distance at the first seed
                let sampler = PriorSampler::Ridgelet {
                    kernel: kernel.clone(),
                    input: input.clone(),
                    pair: pair.clone(),
                    sigma_w: sw,
                    sigma_b: sb,
                    n_units: n,
                };
                let seed = derive_seed(cfg.seed, (idx as u64) << 32 | n as u64, u64::MAX);
                let curve = sampler.covariance_curve(&probe, &x_ref, cfg.n_nets, seed)?;
                let sup = probe
                    .iter()
                    .zip(curve.iter())
                    .map(|(x, &c)| (c - kernel.eval(x, &x_ref)).abs())
                    .fold(0.0f64, f64::max);
                table.push(vec![
                    CsvValue::Float(sw),
                    CsvValue::Float(sb),
                    CsvValue::Int(n as i64),
                    CsvValue::UInt(seed),
                    CsvValue::Text("cov_sup_dist".into()),
                    CsvValue::Float(sup),
                ]);
            }
        }
        let path = out_dir.join("sweep.csv");
        emit_plot_data(&table, &metadata(cfg), &path)?;
        Ok(vec![path])
    }
}
