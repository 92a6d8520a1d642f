//! Running the pipeline over datasets and aggregating the results.
//!
//! Measurements are independent, so they run in parallel; results are
//! always ordered by measurement id, which keeps every artifact
//! deterministic.

use std::path::Path;

use glucokin_core::calibrate::{self, CalibrationCurve};
use glucokin_core::kinetics::{KineticModelParams, Method};
use glucokin_core::metrics::{self, ceg_zone, EvaluationReport, GmadConfig, Zone};
use glucokin_core::pipeline::{
    fit_kinetic_params, run_pipeline, MeasurementResult, PipelineConfig, Status,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifest::{load_entry, DatasetManifest, Split};
use crate::{Error, Result};

pub const RESULTS_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub id: usize,
    pub split: Option<Split>,
    pub result: MeasurementResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub schema_version: u32,
    pub entries: Vec<ResultEntry>,
}

impl ResultsFile {
    pub fn new(entries: Vec<ResultEntry>) -> Self {
        Self {
            schema_version: RESULTS_SCHEMA,
            entries,
        }
    }
}

/// Runs the pipeline on every manifest entry of `split` (all entries when
/// `None`).
pub fn run_manifest(
    manifest_path: &Path,
    manifest: &DatasetManifest,
    split: Option<Split>,
    cfg: &PipelineConfig,
    curve: Option<&CalibrationCurve>,
) -> Result<Vec<ResultEntry>> {
    let selected: Vec<_> = manifest
        .entries
        .iter()
        .filter(|e| split.map_or(true, |s| e.split == s))
        .collect();
    let mut out = selected
        .par_iter()
        .map(|e| {
            let m = load_entry(manifest_path, e)?;
            Ok(ResultEntry {
                id: e.id,
                split: Some(e.split),
                result: run_pipeline(&m, cfg, curve)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by_key(|e| e.id);
    Ok(out)
}

/// `fitted_at` for new curves: `SOURCE_DATE_EPOCH` when set, otherwise now.
pub fn timestamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .unwrap_or_else(|| chrono::Utc::now().timestamp());
    chrono::DateTime::from_timestamp(secs, 0)
        .unwrap_or_default()
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Fits a calibration curve to the `(r̂_C, g)` pairs of completed results.
pub fn fit_curve(results: &[ResultEntry], source_dataset: &str) -> Result<CalibrationCurve> {
    let pairs: Vec<(f64, f64)> = results
        .iter()
        .filter_map(|e| Some((e.result.r_c_hat?, e.result.g_true?)))
        .collect();
    let mut curve = calibrate::fit(&pairs)?;
    curve.fitted_at = timestamp();
    curve.source_dataset = source_dataset.to_string();
    Ok(curve)
}

/// Kinetic parameters fitted to full post-drop traces of the calibration
/// split.
pub fn fit_kinetics(
    manifest_path: &Path,
    manifest: &DatasetManifest,
    cfg: &PipelineConfig,
) -> Result<KineticModelParams> {
    let mut full = cfg.clone();
    full.full_trace = true;
    full.convergence.method = Method::Standard;
    let results = run_manifest(
        manifest_path,
        manifest,
        Some(Split::Calibration),
        &full,
        None,
    )?;
    let traces: Vec<Vec<f64>> = results.iter().map(|e| e.result.post_drop_trace()).collect();
    Ok(fit_kinetic_params(&traces)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CegRow {
    pub g_true: f64,
    pub g_est: f64,
    pub zone: Zone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    /// Metrics over measurements with both a reference and an estimate.
    pub metrics: Option<EvaluationReport>,
    pub total: usize,
    pub completed: usize,
    /// Ids of measurements without a glucose estimate.
    pub incomplete: Vec<usize>,
    /// Mean `n_C - n_D` in frames over completed measurements.
    pub mean_frames_to_result: Option<f64>,
    pub mean_time_to_result_s: Option<f64>,
    pub ceg: Vec<CegRow>,
}

pub fn aggregate(results: &[ResultEntry], gmad: &GmadConfig) -> Result<DatasetReport> {
    if results.is_empty() {
        return Err(Error::Invalid("no results to evaluate".into()));
    }
    let mut pairs = Vec::new();
    let mut r_c = Vec::new();
    let mut incomplete = Vec::new();
    let mut frames = Vec::new();
    let mut secs = Vec::new();
    for e in results {
        let r = &e.result;
        match (r.g_true, r.g_hat, r.r_c_hat) {
            (Some(g), Some(g_hat), Some(rc)) if r.status == Status::Complete => {
                pairs.push((g, g_hat));
                r_c.push(rc);
            }
            _ => incomplete.push(e.id),
        }
        if let (Some(n_d), Some(n_c)) = (r.n_d, r.n_c) {
            frames.push((n_c - n_d) as f64);
        }
        secs.extend(r.time_to_result_s);
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let metrics = if pairs.is_empty() {
        None
    } else {
        Some(metrics::evaluate(&pairs, &r_c, gmad)?)
    };
    Ok(DatasetReport {
        metrics,
        total: results.len(),
        completed: pairs.len(),
        incomplete,
        mean_frames_to_result: mean(&frames),
        mean_time_to_result_s: mean(&secs),
        ceg: pairs
            .iter()
            .map(|&(g, e)| CegRow {
                g_true: g,
                g_est: e,
                zone: ceg_zone(g, e),
            })
            .collect(),
    })
}

/// Location-independent name of a dataset, for curve provenance.
pub fn source_name(manifest: &DatasetManifest) -> String {
    format!("synthetic seed {}", manifest.seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEvaluation {
    pub curve: CalibrationCurve,
    pub calibration: Vec<ResultEntry>,
    pub results: Vec<ResultEntry>,
    pub report: DatasetReport,
}

/// Fits the curve on the calibration split, then runs and scores the
/// evaluation split.
pub fn evaluate_dataset(manifest_path: &Path, cfg: &PipelineConfig) -> Result<DatasetEvaluation> {
    let manifest = DatasetManifest::load(manifest_path)?;
    if manifest.entries.is_empty() {
        return Err(Error::Invalid("empty manifest".into()));
    }
    if manifest.split(Split::Evaluation).next().is_none() {
        return Err(Error::Invalid("manifest has no evaluation split".into()));
    }
    let calibration = run_manifest(
        manifest_path,
        &manifest,
        Some(Split::Calibration),
        cfg,
        None,
    )?;
    let curve = fit_curve(&calibration, &source_name(&manifest))?;
    let results = run_manifest(
        manifest_path,
        &manifest,
        Some(Split::Evaluation),
        cfg,
        Some(&curve),
    )?;
    let report = aggregate(&results, &GmadConfig::default())?;
    Ok(DatasetEvaluation {
        curve,
        calibration,
        results,
        report,
    })
}
