//! The single JSON configuration file shared by every subcommand. Every
//! block is optional and falls back to its defaults.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use myoimp::baseline::FitConfig;
use myoimp::intent::PipelineConfig;
use myoimp::joint::GeometryConfig;
use myoimp::mtu::ParamVector;
use myoimp::optimizer::{ObjectiveConfig, OptimizationSpec};
use myoimp::session::synthetic::{DatasetConfig, SubjectConfig};
use myoimp::session::{BatchSpec, Protocol};
use myoimp::sigproc::EmgConfig;
use myoimp_service::ServiceConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub geometry: GeometryConfig,
    pub pipeline: PipelineConfig,
    pub emg: EmgConfig,
    /// Annealing spec. Its objective geometry and pipeline are replaced by the
    /// top-level blocks; only the scored output is read from it.
    pub optimization: OptimizationSpec,
    pub baseline: FitConfig,
    pub protocol: Protocol,
    pub batch: BatchSpec,
    pub service: ServiceConfig,
    pub subject: SubjectConfig,
    pub dataset: DatasetConfig,
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(Config::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// The optimization spec with the shared geometry and pipeline applied.
    pub fn optimization(&self) -> OptimizationSpec {
        let mut spec = self.optimization.clone();
        spec.objective = ObjectiveConfig {
            geometry: self.geometry,
            pipeline: self.pipeline,
            output: spec.objective.output,
        };
        spec
    }
}

/// Identified parameters of the extensor and flexor MTUs, keyed by the
/// parameter names of the identification table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub extensor: ParamVector,
    pub flexor: ParamVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_rmse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_rmse: Option<f64>,
}

impl ParamsFile {
    pub fn pair(&self) -> [ParamVector; 2] {
        [self.extensor, self.flexor]
    }

    pub fn reference() -> Self {
        ParamsFile {
            extensor: ParamVector::reference(),
            flexor: ParamVector::reference(),
            train_rmse: None,
            validation_rmse: None,
        }
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}
