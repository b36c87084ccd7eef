use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub sha256: String,
    pub bytes: u64,
    /// Stage that produced the file.
    pub stage: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OpenLoopResults {
    pub samples: usize,
    /// Strongest non-constant periodogram line of the mean probe deviation, s.
    pub dominant_period_s: f64,
    pub mean_probe_temp: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitResults {
    pub period_s: f64,
    pub nu_re: f64,
    pub nu_im: f64,
    pub snapshots: usize,
    pub observables: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlResults {
    pub d: f64,
    pub energy_norm: f64,
    /// All four channel norms over the calibration horizon.
    pub energy_norms: Vec<f64>,
    pub calibrated: bool,
    pub amplitude: f64,
    /// `1 - amplitude / open-loop amplitude`.
    pub amplitude_reduction: f64,
    pub controller_faults: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluateResults {
    pub invariance_open_loop: f64,
    pub invariance_closed_loop: f64,
    pub d_hat: f64,
    pub d_hat_r_squared: f64,
    pub projected_open_loop: usize,
    pub projected_closed_loop: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_epsilon_for_10: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub nonlinear_amplitude: f64,
    pub linear_amplitude: f64,
    pub nonlinear_energy_norm: f64,
    pub linear_energy_norm: f64,
    pub relative_norm_mismatch: f64,
    pub nonlinear_not_worse: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Results {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_loop: Option<OpenLoopResults>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fit: BTreeMap<String, FitResults>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub control: BTreeMap<String, ControlResults>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub evaluate: BTreeMap<String, EvaluateResults>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
    /// Why `comparison` is missing, when it is.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison_absent: Option<String>,
}

/// Record of a run directory: inputs, products with checksums, and headline numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config_hash: String,
    pub time_offset_s: f64,
    /// Paths relative to the run directory.
    pub files: BTreeMap<String, FileEntry>,
    pub results: Results,
}

impl RunManifest {
    pub fn new(config_hash: String, time_offset_s: f64) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
            time_offset_s,
            files: BTreeMap::new(),
            results: Results::default(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Usage(format!("{}: {e}; run the earlier stages first", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join(MANIFEST_FILE), self.to_toml()?)?;
        Ok(())
    }

    /// Hashes `dir/rel` and records it under `stage`.
    pub fn record(&mut self, dir: &Path, rel: &str, stage: &str) -> Result<()> {
        let bytes = std::fs::read(dir.join(rel))?;
        self.files.insert(
            rel.to_string(),
            FileEntry { sha256: sha256_hex(&bytes), bytes: bytes.len() as u64, stage: stage.to_string() },
        );
        Ok(())
    }

    /// Path of a listed file after checking its checksum.
    pub fn input(&self, dir: &Path, rel: &str) -> Result<PathBuf> {
        let entry = self
            .files
            .get(rel)
            .ok_or_else(|| Error::Usage(format!("`{rel}` is not in the manifest; run the stage that produces it")))?;
        let path = dir.join(rel);
        let bytes = std::fs::read(&path)?;
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(Error::Ingestion(format!("{} does not match its manifest checksum", path.display())));
        }
        Ok(path)
    }

    pub fn has_stage(&self, stage: &str) -> bool {
        self.files.values().any(|f| f.stage == stage)
    }

    /// Drops the files and results of `stage`.
    pub fn clear_stage(&mut self, stage: &str) {
        self.files.retain(|_, f| f.stage != stage);
        let r = &mut self.results;
        match stage {
            "simulate" => r.open_loop = None,
            "fit" => r.fit.clear(),
            "control" => {
                r.control.clear();
                r.comparison = None;
                r.comparison_absent = None;
            }
            "evaluate" => r.evaluate.clear(),
            _ => {}
        }
    }

    /// Checks every listed file against its checksum.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for rel in self.files.keys() {
            self.input(dir, rel)?;
        }
        Ok(())
    }
}
