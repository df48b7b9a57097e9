//! Experiment configuration: a single flat-key TOML file, schema-validated
//! with unknown keys rejected. Defaults per experiment kind reproduce the
//! settings used for the reference studies.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::activations::{make_activation_by_name, ActivationPair};
use crate::cubature::{make_input_rule_uniform, InputRule, Mollifier};
use crate::error::{Error, Result};
use crate::kernels::{make_kernel, make_mean, Kernel, KernelSpec, MeanFn, MeanSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    SamplePrior,
    Mrmse,
    CovCurve,
    Regress,
    InPaint,
    Reconstruct,
    Sweep,
}

pub const EXPERIMENT_NAMES: &[(&str, ExperimentKind)] = &[
    ("sample-prior", ExperimentKind::SamplePrior),
    ("mrmse", ExperimentKind::Mrmse),
    ("cov-curve", ExperimentKind::CovCurve),
    ("regress", ExperimentKind::Regress),
    ("inpaint", ExperimentKind::InPaint),
    ("reconstruct", ExperimentKind::Reconstruct),
    ("sweep", ExperimentKind::Sweep),
];

impl ExperimentKind {
    pub fn parse(name: &str) -> Result<Self> {
        EXPERIMENT_NAMES
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, k)| *k)
            .ok_or_else(|| Error::UnknownName {
                kind: "experiment",
                name: name.to_string(),
            })
    }

    pub fn name(self) -> &'static str {
        EXPERIMENT_NAMES
            .iter()
            .find(|(_, k)| *k == self)
            .map(|(n, _)| *n)
            .expect("every kind is named")
    }
}

fn default_standardize() -> bool {
    true
}
fn default_probe_points() -> usize {
    201
}
fn default_n_paths() -> usize {
    10
}
fn default_n_seeds() -> usize {
    10
}
fn default_n_nets() -> usize {
    100
}
fn default_n_gp_draws() -> usize {
    10_000
}
fn default_mcmc_samples() -> usize {
    5000
}
fn default_mcmc_burn_in() -> usize {
    1000
}
fn default_mcmc_thin() -> usize {
    2
}

/// Flat key schema for every experiment kind. Unknown keys are rejected at
/// parse time; cross-field consistency is checked by [`ExperimentConfig::validate`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; must match the subcommand when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,

    // target GP
    pub kernel: String,
    pub kernel_dimension: usize,
    pub kernel_amplitude: f64,
    pub kernel_length_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_period: Option<f64>,
    pub mean: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_slope: Option<Vec<f64>>,
    pub activation: String,

    // cubature
    pub grid_s: f64,
    /// Half-width of the region of interest; absent means no mollifier
    /// (the grid box is the region itself).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_x_half: Option<f64>,
    pub grid_points_per_axis: usize,
    pub sigma_w: f64,
    pub sigma_b: f64,

    // network sizes and replication
    pub n_units: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_widths: Option<Vec<usize>>,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: usize,
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    #[serde(default = "default_probe_points")]
    pub probe_points: usize,
    #[serde(default = "default_n_nets")]
    pub n_nets: usize,
    #[serde(default = "default_n_gp_draws")]
    pub n_gp_draws: usize,
    #[serde(default)]
    pub with_monte_carlo_check: bool,

    // bandwidth schedules (sweep, reconstruct)
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule_sigma_w: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule_sigma_b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule_n_units: Vec<usize>,

    // data and inference
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_columns: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_column: Option<String>,
    #[serde(default = "default_standardize")]
    pub standardize: bool,
    pub noise_sd: f64,
    #[serde(default = "default_mcmc_samples")]
    pub mcmc_samples: usize,
    #[serde(default = "default_mcmc_burn_in")]
    pub mcmc_burn_in: usize,
    #[serde(default = "default_mcmc_thin")]
    pub mcmc_thin: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iid_sigma_w0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iid_sigma_b0: Option<f64>,
    /// Output-weight prior sd of the i.i.d. baseline; default `0.1/√N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iid_sigma_w1: Option<f64>,

    // synthetic data
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth_train_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth_extrapolation_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth_amplitude: Option<f64>,
    /// Seasonal period of the synthetic series; default is the kernel's
    /// `period²` (the periodic kernel's actual period in `|x - x'|`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth_period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inpaint_mask_half_width: Option<f64>,
}

impl ExperimentConfig {
    /// Defaults reproducing the reference settings for each experiment kind
    /// (grid, mollifier, bandwidths, kernels and noise levels).
    pub fn for_kind(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            experiment: Some(kind.name().to_string()),
            seed: 0,
            out_dir: None,
            kernel: "squared_exponential".into(),
            kernel_dimension: 1,
            kernel_amplitude: 1.0,
            kernel_length_scale: 1.5,
            kernel_alpha: None,
            kernel_period: None,
            mean: "zero".into(),
            mean_slope: None,
            activation: "tanh".into(),
            grid_s: 6.0,
            grid_x_half: Some(5.0),
            grid_points_per_axis: 200,
            sigma_w: 5.0,
            sigma_b: 36.0,
            n_units: vec![100, 1000, 3000],
            layer_widths: None,
            n_seeds: default_n_seeds(),
            n_paths: default_n_paths(),
            probe_points: default_probe_points(),
            n_nets: default_n_nets(),
            n_gp_draws: default_n_gp_draws(),
            with_monte_carlo_check: false,
            schedule_sigma_w: vec![],
            schedule_sigma_b: vec![],
            schedule_n_units: vec![],
            dataset: None,
            x_columns: None,
            y_column: None,
            standardize: true,
            noise_sd: 0.085,
            mcmc_samples: default_mcmc_samples(),
            mcmc_burn_in: default_mcmc_burn_in(),
            mcmc_thin: default_mcmc_thin(),
            iid_sigma_w0: None,
            iid_sigma_b0: None,
            iid_sigma_w1: None,
            synth_train_points: None,
            synth_extrapolation_points: None,
            synth_amplitude: None,
            synth_period: None,
            inpaint_mask_half_width: None,
        };
        match kind {
            ExperimentKind::SamplePrior | ExperimentKind::CovCurve => base,
            ExperimentKind::Mrmse => ExperimentConfig {
                n_units: vec![100, 300, 1000, 3000],
                n_seeds: 20,
                ..base
            },
            ExperimentKind::Reconstruct => ExperimentConfig {
                n_units: vec![300, 1000, 3000],
                schedule_sigma_w: vec![1.0, 2.0, 3.0, 4.0, 5.0],
                schedule_sigma_b: vec![4.0, 9.0, 16.0, 25.0, 36.0],
                schedule_n_units: vec![300, 1000, 3000, 10000, 30000],
                ..base
            },
            ExperimentKind::Sweep => ExperimentConfig {
                n_units: vec![100, 300, 1000, 3000],
                schedule_sigma_w: vec![1.0, 2.0, 3.0, 4.0],
                schedule_sigma_b: vec![4.0, 9.0, 16.0, 25.0],
                ..base
            },
            ExperimentKind::Regress => ExperimentConfig {
                kernel: "periodic".into(),
                kernel_amplitude: 1.0,
                kernel_length_scale: 0.75,
                kernel_period: Some(1.8),
                mean: "linear".into(),
                mean_slope: Some(vec![0.06]),
                grid_s: 5.0,
                grid_x_half: None,
                n_units: vec![3000],
                noise_sd: 0.085,
                synth_train_points: Some(43),
                synth_extrapolation_points: Some(23),
                synth_amplitude: Some(0.75),
                ..base
            },
            ExperimentKind::InPaint => ExperimentConfig {
                kernel: "inpaint_composite".into(),
                kernel_dimension: 2,
                kernel_amplitude: 0.1,
                kernel_length_scale: 0.1,
                mean: "zero".into(),
                grid_s: 5.0,
                grid_x_half: None,
                grid_points_per_axis: 30,
                sigma_w: 2.0,
                sigma_b: 18.0,
                n_units: vec![5000],
                probe_points: 41,
                noise_sd: 0.05,
                inpaint_mask_half_width: Some(5.0 / 3.0),
                ..base
            },
        }
    }

    /// Parse from TOML text with unknown keys rejected.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization; stamped into output files.
    pub fn sha256(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(name) = &self.experiment {
            ExperimentKind::parse(name)?;
        }
        if self.n_units.is_empty() {
            return Err(Error::Config("n_units must be nonempty".into()));
        }
        if let Some(x_half) = self.grid_x_half {
            if !(x_half > 0.0 && x_half < self.grid_s) {
                return Err(Error::Config(format!(
                    "grid_x_half {x_half} must lie in (0, grid_s = {})",
                    self.grid_s
                )));
            }
        }
        if self.schedule_sigma_w.len() != self.schedule_sigma_b.len() {
            return Err(Error::Config(
                "schedule_sigma_w and schedule_sigma_b must have equal length".into(),
            ));
        }
        if !self.schedule_n_units.is_empty()
            && self.schedule_n_units.len() != self.schedule_sigma_w.len()
        {
            return Err(Error::Config(
                "schedule_n_units must be empty or match the sigma schedules".into(),
            ));
        }
        if self.probe_points < 2 {
            return Err(Error::Config("probe_points must be at least 2".into()));
        }
        // constructors validate the rest (positivity, kernel dimensionality)
        self.make_kernel()?;
        self.make_mean()?;
        self.make_activation()?;
        Ok(())
    }

    pub fn kernel_spec(&self) -> KernelSpec {
        KernelSpec {
            kernel: self.kernel.clone(),
            kernel_dimension: self.kernel_dimension,
            kernel_amplitude: self.kernel_amplitude,
            kernel_length_scale: self.kernel_length_scale,
            kernel_alpha: self.kernel_alpha,
            kernel_period: self.kernel_period,
        }
    }

    pub fn make_kernel(&self) -> Result<Arc<dyn Kernel>> {
        make_kernel(&self.kernel_spec())
    }

    pub fn make_mean(&self) -> Result<Arc<dyn MeanFn>> {
        make_mean(
            &MeanSpec {
                mean: self.mean.clone(),
                mean_slope: self.mean_slope.clone(),
            },
            self.kernel_dimension,
        )
    }

    pub fn make_activation(&self) -> Result<Arc<dyn ActivationPair>> {
        make_activation_by_name(&self.activation, self.kernel_dimension)
    }

    pub fn make_input_rule(&self) -> Result<InputRule> {
        let mollifier = match self.grid_x_half {
            Some(x_half) => Some(Mollifier::new(x_half, self.grid_s)?),
            None => None,
        };
        make_input_rule_uniform(
            self.kernel_dimension,
            self.grid_points_per_axis,
            self.grid_s,
            mollifier,
        )
    }

    /// Half-width of the region of interest (probe domain).
    pub fn x_domain_half(&self) -> f64 {
        self.grid_x_half.unwrap_or(self.grid_s)
    }
}
