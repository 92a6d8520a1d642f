//! Synthetic dataset manifests.
//!
//! `simulate` writes one container and sidecar per measurement plus a
//! manifest listing every file with its split, generation plan and ground
//! truth. Container paths are relative to the manifest's directory.

use std::path::{Path, PathBuf};

use glucokin_core::synth::{self, DatasetEntry, Jitter, KineticDefaults, SceneConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container::{read_json, read_measurement, write_json, write_measurement};
use crate::{Error, Result};

pub const MANIFEST_SCHEMA: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    /// Used only to fit the calibration curve.
    Calibration,
    Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub g: f64,
    pub r_c: f64,
    pub r_d: f64,
    /// Decay exponent per frame.
    pub tau: f64,
    pub n_d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: usize,
    pub split: Split,
    /// Container path relative to the manifest.
    pub container: String,
    pub truth: TruthRecord,
    pub plan: synth::MeasurementPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub levels: Vec<f64>,
    pub repeats: usize,
    pub calibration_repeats: usize,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = read_json(path)?;
        if m.schema_version != MANIFEST_SCHEMA {
            return Err(Error::Format(format!(
                "unsupported manifest schema {}",
                m.schema_version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }
}

/// Resolves container paths of a manifest stored at `manifest_path`.
pub fn container_path(manifest_path: &Path, entry: &ManifestEntry) -> PathBuf {
    manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&entry.container)
}

pub fn load_entry(
    manifest_path: &Path,
    entry: &ManifestEntry,
) -> Result<glucokin_core::Measurement> {
    read_measurement(&container_path(manifest_path, entry), None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    pub levels: Vec<f64>,
    pub repeats: usize,
    /// Extra repeats per level reserved for calibration.
    pub calibration_repeats: usize,
    pub scene: SceneConfig,
    pub kinetics: KineticDefaults,
    pub jitter: Jitter,
    pub seed: u64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            levels: synth::linspace(50.0, 550.0, 10),
            repeats: 5,
            calibration_repeats: 2,
            scene: SceneConfig::default(),
            kinetics: KineticDefaults::default(),
            jitter: Jitter::default(),
            seed: 0,
        }
    }
}

/// Generates the dataset into `out_dir` and writes `manifest.json` there.
/// The first `calibration_repeats` measurements of each level form the
/// calibration split.
pub fn simulate(out_dir: &Path, opts: &SimulateOptions) -> Result<DatasetManifest> {
    if opts.repeats == 0 {
        return Err(Error::Invalid("repeats must be at least 1".into()));
    }
    let per_level = opts.repeats + opts.calibration_repeats;
    let plan = synth::generate_dataset(
        &opts.levels,
        per_level,
        opts.scene,
        opts.kinetics,
        opts.jitter,
        opts.seed,
    )?;
    std::fs::create_dir_all(out_dir)?;
    let entries = plan
        .entries
        .par_iter()
        .map(|e: &DatasetEntry| {
            let gen = e.plan.generator()?;
            let name = format!("m{:04}.glkf", e.id);
            write_measurement(&out_dir.join(&name), &gen.measurement())?;
            let t = gen.truth();
            Ok(ManifestEntry {
                id: e.id,
                split: if e.id % per_level < opts.calibration_repeats {
                    Split::Calibration
                } else {
                    Split::Evaluation
                },
                container: name,
                truth: TruthRecord {
                    g: t.g,
                    r_c: t.r_c,
                    r_d: t.r_d,
                    tau: t.tau,
                    n_d: t.n_d,
                },
                plan: e.plan.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        schema_version: MANIFEST_SCHEMA,
        seed: opts.seed,
        levels: opts.levels.clone(),
        repeats: opts.repeats,
        calibration_repeats: opts.calibration_repeats,
        entries,
    };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
