//! Experiment configuration, read from TOML with CLI overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tscf_core::{BoundSpec, ModelKind, SearchConfig, SplitSpec, TrainConfig};

use crate::error::CliError;
use crate::synth::SyntheticSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    ForecastCf,
    BaseNn,
    BaseShift,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::ForecastCf, Method::BaseNn, Method::BaseShift];

    pub fn name(self) -> &'static str {
        match self {
            Method::ForecastCf => "forecastcf",
            Method::BaseNn => "basenn",
            Method::BaseShift => "baseshift",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "forecastcf" => Ok(Method::ForecastCf),
            "basenn" => Ok(Method::BaseNn),
            "baseshift" => Ok(Method::BaseShift),
            other => Err(CliError::Config(format!("unknown method `{other}`"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Long-format CSV; takes precedence over `synthetic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            csv: None,
            synthetic: Some(SyntheticSpec::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub horizon: usize,
    /// `back_horizon = round(multiplier * horizon)` unless `back_horizon` is set.
    pub back_horizon_multiplier: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub back_horizon: Option<usize>,
    pub stride: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_frac: 0.6,
            val_frac: 0.2,
            test_frac: 0.2,
            horizon: 10,
            back_horizon_multiplier: 2.0,
            back_horizon: None,
            stride: 1,
        }
    }
}

impl SplitConfig {
    pub fn back_horizon_for(&self, horizon: usize) -> usize {
        ((self.back_horizon_multiplier * horizon as f64).round() as usize).max(1)
    }

    pub fn spec(&self) -> SplitSpec {
        self.spec_for_horizon(self.horizon, self.back_horizon)
    }

    pub fn spec_for_horizon(&self, horizon: usize, back_horizon: Option<usize>) -> SplitSpec {
        SplitSpec {
            train_frac: self.train_frac,
            val_frac: self.val_frac,
            test_frac: self.test_frac,
            back_horizon: back_horizon.unwrap_or_else(|| self.back_horizon_for(horizon)),
            horizon,
            stride: self.stride,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Hidden units, MLP only.
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            kind: ModelKind::Mlp,
            hidden: 32,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
        }
    }
}

impl ModelConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub tol: f64,
    /// Seasonal period for MASE.
    pub period: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            tol: tscf_core::metrics::DEFAULT_TOL,
            period: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub methods: Vec<Method>,
    pub data: DataConfig,
    pub split: SplitConfig,
    pub model: ModelConfig,
    pub bounds: BoundSpec,
    pub search: SearchConfig,
    pub metrics: MetricConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            output_dir: PathBuf::from("out"),
            methods: Method::ALL.to_vec(),
            data: DataConfig::default(),
            split: SplitConfig::default(),
            model: ModelConfig::default(),
            bounds: BoundSpec::default(),
            search: SearchConfig::default(),
            metrics: MetricConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// The pinned synthetic benchmark: 20 series of length 200, `d = 20`,
    /// `T = 10`, seed 42, MLP forecaster, `cp = 0.1`, `fr = 1`.
    pub fn fixture() -> Self {
        Self {
            seed: 42,
            data: DataConfig {
                csv: None,
                synthetic: Some(SyntheticSpec::fixture()),
            },
            model: ModelConfig {
                kind: ModelKind::Mlp,
                hidden: 32,
                learning_rate: 1e-3,
                batch_size: 128,
                max_epochs: 100,
                patience: 10,
            },
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.split.spec().validate().map_err(CliError::from_core)?;
        self.model
            .train_config(self.seed)
            .validate()
            .map_err(CliError::from_core)?;
        self.bounds.validate().map_err(CliError::from_core)?;
        self.search.validate().map_err(CliError::from_core)?;
        if self.model.kind == ModelKind::Mlp && self.model.hidden == 0 {
            return Err(CliError::Config("model.hidden must be positive".into()));
        }
        if !(self.metrics.tol >= 0.0) {
            return Err(CliError::Config("metrics.tol must be non-negative".into()));
        }
        if self.metrics.period == 0 {
            return Err(CliError::Config("metrics.period must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(CliError::Config("at least one method is required".into()));
        }
        if self.data.csv.is_none() && self.data.synthetic.is_none() {
            return Err(CliError::Config("data needs either `csv` or `synthetic`".into()));
        }
        if let Some(spec) = &self.data.synthetic {
            spec.validate()?;
        }
        Ok(())
    }

    /// JSON form embedded in every output file. The output directory is left
    /// out so identical runs written to different places compare equal.
    pub fn to_json(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("output_dir");
        }
        value
    }
}
