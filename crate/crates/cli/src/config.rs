//! Pipeline configuration: a JSON file whose fields are overridden by
//! command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scarforge_core::diffusion::ScheduleConfig;
use scarforge_core::maskgen::ScarSpec;
use scarforge_core::register::{DemonsParams, RigidConfig, StageOrder};

use crate::Failure;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_dir: Option<PathBuf>,
    /// AHA label volume of the template.
    pub atlas: Option<PathBuf>,
    /// Template myocardium; derived from the atlas labels when absent.
    pub myocardium: Option<PathBuf>,
    pub subject_myocardium: Option<PathBuf>,
    pub existing_scar: Option<PathBuf>,
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub scar: ScarSpec,
    pub demons: DemonsParams,
    pub rigid: RigidConfig,
    pub registration_order: StageOrder,
    pub schedule: Option<ScheduleConfig>,
    pub histogram_bins: Option<usize>,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(PipelineConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn output_dir(&self) -> Result<&Path, Failure> {
        self.output_dir
            .as_deref()
            .ok_or_else(|| Failure::Config("an output directory is required (--out)".into()))
    }

    pub fn seed(&self) -> Result<u64, Failure> {
        self.seed
            .ok_or_else(|| Failure::Config("a seed is required for generation (--seed)".into()))
    }
}

/// Fails unless every given path exists.
pub fn require_existing<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<(), Failure> {
    for p in paths {
        if !p.exists() {
            return Err(Failure::Config(format!("{} does not exist", p.display())));
        }
    }
    Ok(())
}

/// Three comma-separated numbers.
pub fn vec3(values: &[f64], flag: &str) -> Result<[f64; 3], Failure> {
    values
        .try_into()
        .map_err(|_| Failure::Config(format!("{flag} takes three comma-separated values")))
}
