//! Run manifests: every run emits one `manifest.json` recording the config
//! hash, resolved config, per-stage seeds, artifact paths, versions, and
//! per-stage wall-clock. Artifacts are byte-reproducible across identical
//! runs; the wall-clock block is the only varying part of the manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_hash: String,
    versions: BTreeMap<&'static str, String>,
    stage_seeds: BTreeMap<String, u64>,
    artifacts: Vec<String>,
    wall_clock_seconds: BTreeMap<String, f64>,
    config: &'a ExperimentConfig,
}

/// Collects artifacts, stage seeds, and stage timings for one run.
pub struct RunRecorder {
    command: String,
    out_dir: PathBuf,
    overwrite: bool,
    artifacts: Vec<String>,
    stage_seeds: BTreeMap<String, u64>,
    wall_clock: BTreeMap<String, f64>,
    stage_started: Option<(String, Instant)>,
}

impl RunRecorder {
    pub fn new(command: &str, out_dir: &Path, overwrite: bool) -> Result<Self, CliError> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| CliError::Data(format!("cannot create output dir: {e}")))?;
        Ok(RunRecorder {
            command: command.to_string(),
            out_dir: out_dir.to_path_buf(),
            overwrite,
            artifacts: Vec::new(),
            stage_seeds: BTreeMap::new(),
            wall_clock: BTreeMap::new(),
            stage_started: None,
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    /// Starts timing a named stage, closing the previous one.
    pub fn stage(&mut self, name: &str) {
        self.finish_stage();
        self.stage_started = Some((name.to_string(), Instant::now()));
    }

    fn finish_stage(&mut self) {
        if let Some((name, started)) = self.stage_started.take() {
            self.wall_clock.insert(name, started.elapsed().as_secs_f64());
        }
    }

    pub fn record_seed(&mut self, stage: &str, seed: u64) {
        self.stage_seeds.insert(stage.to_string(), seed);
    }

    /// Registers an artifact path (relative to the output dir), enforcing
    /// the overwrite policy.
    pub fn artifact(&mut self, name: &str) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        if path.exists() && !self.overwrite {
            return Err(CliError::Config(format!(
                "artifact '{}' already exists; pass --overwrite to replace it",
                path.display()
            )));
        }
        self.artifacts.push(name.to_string());
        Ok(path)
    }

    pub fn write_text(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.artifact(name)?;
        std::fs::write(&path, content)
            .map_err(|e| CliError::Data(format!("cannot write '{}': {e}", path.display())))?;
        Ok(())
    }

    /// Writes the manifest and finishes the run.
    pub fn finish(mut self, config: &ExperimentConfig) -> Result<(), CliError> {
        self.finish_stage();
        let mut versions = BTreeMap::new();
        versions.insert("cpicf-cli", env!("CARGO_PKG_VERSION").to_string());
        versions.insert("cpicf-core", env!("CARGO_PKG_VERSION").to_string());
        versions.insert(
            "model_format",
            cpicf_core::gbt::MODEL_FORMAT_VERSION.to_string(),
        );
        let manifest = Manifest {
            command: &self.command,
            config_hash: config.hash(),
            versions,
            stage_seeds: self.stage_seeds,
            artifacts: self.artifacts,
            wall_clock_seconds: self.wall_clock,
            config,
        };
        let path = self.out_dir.join(MANIFEST_FILE);
        if path.exists() && !self.overwrite {
            return Err(CliError::Config(format!(
                "artifact '{}' already exists; pass --overwrite to replace it",
                path.display()
            )));
        }
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Data(e.to_string()))?;
        std::fs::write(&path, text + "\n")
            .map_err(|e| CliError::Data(format!("cannot write manifest: {e}")))?;
        Ok(())
    }
}
