//! Run manifest: one JSON file describing a whole generation batch.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use detforge::eval::score::WeightConfig;
use detforge::gateway::{GenerationConfig, ReasoningEffort};
use detforge::workflows::{Approach, GenerationTask, DEFAULT_MAX_ITERATIONS};

#[derive(Debug)]
pub enum ManifestError {
    /// The manifest file itself cannot be read.
    Unreadable(PathBuf, String),
    /// The manifest is not valid JSON of the expected shape.
    Parse(String),
    /// The manifest parsed but its contents are unusable.
    Invalid(String),
    /// A path named by the manifest does not exist.
    MissingPath(PathBuf),
}

impl fmt::Display for ManifestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifestError::Unreadable(path, e) => {
                write!(f, "cannot read manifest {}: {e}", path.display())
            }
            ManifestError::Parse(e) => write!(f, "malformed manifest: {e}"),
            ManifestError::Invalid(e) => write!(f, "invalid manifest: {e}"),
            ManifestError::MissingPath(path) => {
                write!(f, "manifest references a missing path: {}", path.display())
            }
        }
    }
}

impl ManifestError {
    /// True for environment problems, false for bad data.
    pub fn is_environment(&self) -> bool {
        matches!(
            self,
            ManifestError::Unreadable(..) | ManifestError::MissingPath(..)
        )
    }
}

/// Model settings as written in a manifest. Temperature defaults to
/// zero, matching the deterministic generation contract.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub model_id: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub reasoning_effort: Option<ReasoningEffort>,
    #[serde(default)]
    pub max_output_tokens: Option<u64>,
}

impl ModelSpec {
    pub fn to_config(&self) -> GenerationConfig {
        GenerationConfig {
            model_id: self.model_id.clone(),
            temperature: self.temperature,
            reasoning_effort: self.reasoning_effort,
            max_output_tokens: self.max_output_tokens,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedSpec {
    pub model_id: String,
}

fn default_parallelism() -> usize {
    1
}

fn default_max_iterations() -> u32 {
    DEFAULT_MAX_ITERATIONS
}

/// Everything a generation batch needs: where the store lives, which
/// gold detections are held out, the tasks, and the approach and
/// model grid to run them under.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub store_dir: PathBuf,
    #[serde(default)]
    pub corpus_path: Option<PathBuf>,
    #[serde(default)]
    pub schema_path: Option<PathBuf>,
    /// Scripted conversation entries for offline runs.
    #[serde(default)]
    pub scenario_path: Option<PathBuf>,
    #[serde(default)]
    pub holdout_ids: Vec<String>,
    pub tasks: Vec<GenerationTask>,
    pub approaches: Vec<Approach>,
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub weights: Option<WeightConfig>,
    #[serde(default)]
    pub schema_enabled_platforms: BTreeSet<String>,
    pub output_dir: PathBuf,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: u32,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub embed: Option<EmbedSpec>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<RunManifest, ManifestError> {
        let raw = fs::read_to_string(path)
            .map_err(|e| ManifestError::Unreadable(path.to_path_buf(), e.to_string()))?;
        let manifest: RunManifest =
            serde_json::from_str(&raw).map_err(|e| ManifestError::Parse(e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    fn validate(&self) -> Result<(), ManifestError> {
        if self.tasks.is_empty() {
            return Err(ManifestError::Invalid("no tasks".to_string()));
        }
        if self.approaches.is_empty() {
            return Err(ManifestError::Invalid("no approaches".to_string()));
        }
        if self.models.is_empty() {
            return Err(ManifestError::Invalid("no models".to_string()));
        }
        if self.max_iterations == 0 {
            return Err(ManifestError::Invalid(
                "max_iterations must be at least 1".to_string(),
            ));
        }
        if let Some(weights) = &self.weights {
            weights
                .validate()
                .map_err(|e| ManifestError::Invalid(e.to_string()))?;
        }
        if !self.store_dir.exists() {
            return Err(ManifestError::MissingPath(self.store_dir.clone()));
        }
        for path in [&self.corpus_path, &self.schema_path, &self.scenario_path]
            .into_iter()
            .flatten()
        {
            if !path.exists() {
                return Err(ManifestError::MissingPath(path.clone()));
            }
        }
        Ok(())
    }

    pub fn configs(&self) -> Vec<GenerationConfig> {
        self.models.iter().map(ModelSpec::to_config).collect()
    }
}
