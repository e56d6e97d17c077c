//! On-disk layout of a run directory and the JSON/CSV readers and writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tscf_core::metrics::EvaluationReport;

use crate::config::{ExperimentConfig, Method};
use crate::error::{CliError, Result};
use crate::pipeline::{CfRecord, Dataset};

pub struct Layout {
    dir: PathBuf,
}

impl Layout {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn create(&self) -> Result<()> {
        std::fs::create_dir_all(&self.dir).map_err(CliError::io("cannot create output directory", &self.dir))
    }

    pub fn synthetic_csv(&self) -> PathBuf {
        self.dir.join("synthetic.csv")
    }

    pub fn dataset(&self) -> PathBuf {
        self.dir.join("dataset.json")
    }

    pub fn model(&self) -> PathBuf {
        self.dir.join("model.json")
    }

    pub fn loss_history(&self) -> PathBuf {
        self.dir.join("loss_history.csv")
    }

    pub fn counterfactuals(&self, method: Method) -> PathBuf {
        self.dir.join(format!("counterfactuals_{method}.json"))
    }

    pub fn report(&self, method: Method) -> PathBuf {
        self.dir.join(format!("report_{method}.json"))
    }

    pub fn samples(&self, method: Method) -> PathBuf {
        self.dir.join(format!("samples_{method}.csv"))
    }

    pub fn comparison(&self) -> PathBuf {
        self.dir.join("comparison.csv")
    }

    pub fn sweep(&self) -> PathBuf {
        self.dir.join("sweep_horizon.csv")
    }

    pub fn ablation(&self, param: &str) -> PathBuf {
        self.dir.join(format!("ablation_{param}.csv"))
    }

    pub fn repeats(&self) -> PathBuf {
        self.dir.join("repeats.csv")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetArtifact {
    pub config: serde_json::Value,
    pub dataset: Dataset,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CounterfactualArtifact {
    pub config: serde_json::Value,
    pub method: Method,
    pub records: Vec<CfRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportArtifact {
    pub config: serde_json::Value,
    pub method: Method,
    /// Units of proximity and compactness.
    pub counterfactual_units: String,
    /// Units of sMAPE and MASE.
    pub accuracy_units: String,
    pub report: EvaluationReport,
}

impl ReportArtifact {
    pub fn new(cfg: &ExperimentConfig, method: Method, report: EvaluationReport) -> Self {
        Self {
            config: cfg.to_json(),
            method,
            counterfactual_units: "normalized (per-series min-max fitted on the training chunk)".into(),
            accuracy_units: "original".into(),
            report,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(CliError::io("cannot create", path))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    out.write_all(b"\n").map_err(CliError::io("cannot write", path))?;
    out.flush().map_err(CliError::io("cannot write", path))
}

/// Reads a JSON artifact, reporting a missing file as a missing prerequisite.
pub fn read_json<T: DeserializeOwned>(path: &Path, needs: &'static str) -> Result<T> {
    if !path.exists() {
        return Err(CliError::MissingArtifact {
            path: path.to_path_buf(),
            needs,
        });
    }
    let file = File::open(path).map_err(CliError::io("cannot open", path))?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| CliError::Data(format!("malformed artifact {}: {e}", path.display())))
}

/// CSV writer whose first line is `# config: <json>`.
pub fn csv_with_config(path: &Path, cfg: &ExperimentConfig) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(CliError::io("cannot create", path))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "# config: {}", cfg.to_json()).map_err(CliError::io("cannot write", path))?;
    Ok(csv::Writer::from_writer(out))
}

pub fn finish_csv(path: &Path, mut writer: csv::Writer<BufWriter<File>>) -> Result<()> {
    writer.flush().map_err(CliError::io("cannot write", path))
}

pub fn csv_error(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

pub fn fmt_f64(v: f64) -> String {
    v.to_string()
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}
