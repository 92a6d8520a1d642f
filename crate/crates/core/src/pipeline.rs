//! Per-measurement processing chain.
//!
//! Frames are normalised against the calibration mean and binned, then fed
//! in index order to the drop detector. Once the drop is declared, every
//! frame from `n_D` on is segmented by mode seeking, the ROI intensity
//! `r̂(n)` goes to the convergence tracker, and processing stops at the
//! first convergence decision. The converged remission is mapped to glucose
//! when a calibration curve is supplied.
//!
//! Results hold deterministic quantities only, so equal inputs serialise to
//! equal bytes.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::calibrate::CalibrationCurve;
use crate::dropdetect::{self, DropDetector, DropDetectorConfig};
use crate::frames::{self, Frame, Measurement};
use crate::kinetics::{
    fit_exponential, regress_tau, ConvergenceDecision, EkfConfig, EkfTracker, KineticModelParams,
    Method, Stage, StandardConfig, StandardTracker, MIN_FIT_SAMPLES,
};
use crate::modeseek::{self, GaussianKernel, ModeSeekConfig, Points, RobustConfig, Variant};
use crate::roi;
use crate::sparse::SubsetStop;
use crate::{math, Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorSettings {
    pub p_fa: f64,
    pub min_consecutive: usize,
    /// Pre-reaction variance; estimated from the calibration frames when
    /// absent.
    pub sigma1_sq: Option<f64>,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        Self {
            p_fa: 1e-3,
            min_consecutive: 3,
            sigma1_sq: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    pub variant: Variant,
    /// Intensity bandwidth in percent.
    pub h: f64,
    /// Add pixel coordinates to the feature vector.
    pub spatial: bool,
    /// Spatial bandwidth in binned pixels.
    pub h_spatial: f64,
    pub sparse: SubsetStop,
    pub robust: RobustConfig,
    pub max_iters: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Meds,
            h: 0.3,
            spatial: false,
            h_spatial: 8.0,
            sparse: SubsetStop::default(),
            robust: RobustConfig::default(),
            max_iters: 200,
        }
    }
}

impl SegmentationConfig {
    pub fn kernel(&self) -> Result<GaussianKernel> {
        if self.spatial {
            GaussianKernel::with_bandwidths(vec![self.h, self.h_spatial, self.h_spatial])
        } else {
            GaussianKernel::new(self.h)
        }
    }

    pub fn mode_seek(&self) -> ModeSeekConfig {
        ModeSeekConfig {
            variant: self.variant,
            robust: self.robust,
            sparse: self.sparse,
            tol: None,
            max_iters: self.max_iters,
            record: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceSettings {
    pub method: Method,
    pub standard: StandardConfig,
    pub ekf: EkfConfig,
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        Self {
            method: Method::Ekf,
            standard: StandardConfig::default(),
            ekf: EkfConfig::default(),
        }
    }
}

/// File locations used by the command-line tool; ignored by the core.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    pub result: Option<String>,
    pub trace: Option<String>,
    pub report: Option<String>,
    pub ceg_csv: Option<String>,
    pub ceg_svg: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub detector: DetectorSettings,
    pub segmentation: SegmentationConfig,
    pub convergence: ConvergenceSettings,
    /// Decay-rate line and measurement noise of the kinetic model.
    pub kinetics: KineticModelParams,
    /// Keep processing after convergence, up to the last frame.
    pub full_trace: bool,
    pub calibration_curve: Option<String>,
    pub outputs: OutputPaths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            detector: DetectorSettings::default(),
            segmentation: SegmentationConfig::default(),
            convergence: ConvergenceSettings::default(),
            kinetics: KineticModelParams {
                delta_tau: 0.00024,
                tau0: -0.0308,
                sigma_v_sq: 0.01,
            },
            full_trace: false,
            calibration_curve: None,
            outputs: OutputPaths::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidConfig("unsupported config schema version"));
        }
        let d = self.detector;
        DropDetectorConfig {
            sigma1_sq: d.sigma1_sq.unwrap_or(1.0),
            p_fa: d.p_fa,
            min_consecutive: d.min_consecutive,
        }
        .validate()?;
        if !(self.segmentation.h > 0.0) || !(self.segmentation.h_spatial > 0.0) {
            return Err(Error::InvalidConfig("bandwidths must be positive"));
        }
        if self.segmentation.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive"));
        }
        self.segmentation.robust.validate()?;
        self.convergence.standard.validate()?;
        self.convergence.ekf.validate()?;
        self.kinetics.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Complete,
    NoDrop,
    NotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub n: usize,
    /// ROI intensity from `n_D` on, frame mean before.
    pub r_hat: f64,
    pub stage: Stage,
    /// Detector statistic while searching for the drop.
    pub statistic: Option<f64>,
    /// Filter state after this frame (EKF only).
    pub r_c_hat: Option<f64>,
    pub p: Option<f64>,
    pub clusters: Option<usize>,
    pub roi_size: Option<usize>,
    /// Sparse subset size.
    pub n_nu: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub frames_processed: usize,
    pub segmented_frames: usize,
    pub mode_iterations: u64,
    pub medoid_cycles: usize,
    /// Segmented frames where only one cluster was found.
    pub single_region_frames: usize,
    pub pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementResult {
    pub status: Status,
    pub method: Method,
    pub n_d: Option<usize>,
    pub n_c: Option<usize>,
    pub r_c_hat: Option<f64>,
    /// Present iff a calibration curve was supplied and `r̂_C` exists.
    pub g_hat: Option<f64>,
    /// Reference glucose from the metadata, if known.
    pub g_true: Option<f64>,
    /// Seconds from the drop to the convergence decision.
    pub time_to_result_s: Option<f64>,
    pub sigma1_sq: f64,
    pub threshold: f64,
    pub trace: Vec<TraceRow>,
    pub diagnostics: Diagnostics,
}

impl MeasurementResult {
    /// `r̂(n)` for `n ≥ n_D`.
    pub fn post_drop_trace(&self) -> Vec<f64> {
        match self.n_d {
            Some(n_d) => self
                .trace
                .iter()
                .filter(|row| row.n >= n_d)
                .map(|row| row.r_hat)
                .collect(),
            None => Vec::new(),
        }
    }
}

/// Segmentation outcome of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSegmentation {
    pub r_hat: f64,
    pub clusters: modeseek::ClusterSet,
    pub assignment: roi::RegionAssignment,
    pub n_nu: Option<usize>,
    pub iterations: u64,
    pub cycles: usize,
}

/// Mode seeking plus ROI assignment on a pre-processed frame.
pub fn segment_frame(frame: &Frame, cfg: &SegmentationConfig) -> Result<FrameSegmentation> {
    let k = cfg.kernel()?;
    let data = Points::from_frame(frame, cfg.spatial);
    let (res, clusters) = modeseek::segment(&data, &k, &cfg.mode_seek())?;
    let assignment = roi::assign(&clusters)?;
    Ok(FrameSegmentation {
        r_hat: assignment.r_hat,
        n_nu: res.basis.as_ref().map(|b| b.n),
        iterations: res.iterations.iter().map(|&i| i as u64).sum(),
        cycles: res.cycles,
        clusters,
        assignment,
    })
}

/// Normalises and bins raw frames.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    calibration_mean: Frame,
    bin_size: usize,
}

impl Preprocessor {
    pub fn new(m: &Measurement) -> Result<Self> {
        Ok(Self {
            calibration_mean: frames::calibration_mean(&m.calibration_frames)?,
            bin_size: m.metadata.bin_size,
        })
    }

    pub fn apply(&self, raw: &Frame) -> Result<Frame> {
        frames::bin(
            &frames::normalize(raw, &self.calibration_mean)?,
            self.bin_size,
        )
    }
}

enum Tracker {
    Standard(StandardTracker),
    Ekf(EkfTracker),
}

impl Tracker {
    fn push(&mut self, n: usize, r_hat: f64) -> Result<Option<ConvergenceDecision>> {
        match self {
            Tracker::Standard(t) => Ok(t.push(n, r_hat)),
            Tracker::Ekf(t) => t.push(n, r_hat),
        }
    }

    fn state(&self, n: usize) -> (Option<f64>, Option<f64>) {
        match self {
            Tracker::Ekf(t) => match t.state() {
                Some(s) if s.n == n => (Some(s.r_c_hat), Some(s.p)),
                _ => (None, None),
            },
            Tracker::Standard(_) => (None, None),
        }
    }
}

/// Runs the chain on one measurement. `curve` maps `r̂_C` to glucose.
pub fn run_pipeline(
    m: &Measurement,
    cfg: &PipelineConfig,
    curve: Option<&CalibrationCurve>,
) -> Result<MeasurementResult> {
    cfg.validate()?;
    m.validate()?;
    if let Some(c) = curve {
        c.validate()?;
    }
    let pre = Preprocessor::new(m)?;
    let sigma1_sq = match cfg.detector.sigma1_sq {
        Some(v) => v,
        None => dropdetect::estimate_sigma1_sq(&m.calibration_frames, m.metadata.bin_size)?,
    };
    let det_cfg = DropDetectorConfig {
        sigma1_sq,
        p_fa: cfg.detector.p_fa,
        min_consecutive: cfg.detector.min_consecutive,
    };
    let (rows, cols) = m.dims();
    let b = m.metadata.bin_size;
    if rows % b != 0 || cols % b != 0 {
        return Err(Error::BinSize { bin: b, rows, cols });
    }
    let pixels = (rows / b) * (cols / b);
    let mut detector = DropDetector::new(&det_cfg, pixels)?;

    let mut trace: Vec<TraceRow> = Vec::with_capacity(m.frames.len());
    let mut diag = Diagnostics {
        pixels,
        ..Diagnostics::default()
    };
    let mut recent: VecDeque<(usize, Frame)> = VecDeque::with_capacity(det_cfg.min_consecutive);
    let mut tracker: Option<Tracker> = None;
    let mut n_d = None;
    let mut decision: Option<ConvergenceDecision> = None;

    let process = |n: usize,
                   x: &Frame,
                   tracker: &mut Tracker,
                   decided: bool,
                   diag: &mut Diagnostics|
     -> Result<(TraceRow, Option<ConvergenceDecision>)> {
        let seg = segment_frame(x, &cfg.segmentation)?;
        diag.segmented_frames += 1;
        diag.mode_iterations += seg.iterations;
        diag.medoid_cycles += seg.cycles;
        diag.single_region_frames += seg.assignment.single_region as usize;
        let d = if decided {
            None
        } else {
            tracker.push(n, seg.r_hat)?
        };
        let (r_c_hat, p) = tracker.state(n);
        let stage = if decided || d.is_some() {
            Stage::Converged
        } else {
            Stage::Decay
        };
        let row = TraceRow {
            n,
            r_hat: seg.r_hat,
            stage,
            statistic: None,
            r_c_hat,
            p,
            clusters: Some(seg.clusters.len()),
            roi_size: Some(seg.clusters.sizes[seg.assignment.roi]),
            n_nu: seg.n_nu,
        };
        Ok((row, d))
    };

    for (n, raw) in m.frames.iter().enumerate() {
        let x = pre.apply(raw)?;
        diag.frames_processed += 1;
        match tracker.as_mut() {
            None => {
                let statistic = dropdetect::test_statistic(x.pixels())?;
                trace.push(TraceRow {
                    n,
                    r_hat: x.mean(),
                    stage: Stage::PreDrop,
                    statistic: Some(statistic),
                    r_c_hat: None,
                    p: None,
                    clusters: None,
                    roi_size: None,
                    n_nu: None,
                });
                let found = detector.push(n, x.pixels())?;
                if recent.len() == det_cfg.min_consecutive {
                    recent.pop_front();
                }
                recent.push_back((n, x));
                if let Some(nd) = found {
                    n_d = Some(nd);
                    let mut t = match cfg.convergence.method {
                        Method::Standard => {
                            Tracker::Standard(StandardTracker::new(cfg.convergence.standard)?)
                        }
                        Method::Ekf => {
                            Tracker::Ekf(EkfTracker::new(cfg.convergence.ekf, cfg.kinetics, nd)?)
                        }
                    };
                    // Frames from n_D up to now were only seen by the detector.
                    for (k, xk) in recent.drain(..).filter(|(k, _)| *k >= nd) {
                        let (mut row, d) = process(k, &xk, &mut t, decision.is_some(), &mut diag)?;
                        row.statistic = trace[k].statistic;
                        trace[k] = row;
                        decision = decision.or(d);
                    }
                    tracker = Some(t);
                }
            }
            Some(t) => {
                let (row, d) = process(n, &x, t, decision.is_some(), &mut diag)?;
                trace.push(row);
                decision = decision.or(d);
            }
        }
        if decision.is_some() && !cfg.full_trace {
            break;
        }
    }

    let status = match (n_d, decision) {
        (None, _) => Status::NoDrop,
        (Some(_), None) => Status::NotConverged,
        (Some(_), Some(_)) => Status::Complete,
    };
    let r_c_hat = decision.map(|d| d.r_c_hat);
    let g_hat = match (curve, r_c_hat) {
        (Some(c), Some(r)) => Some(c.map(r)),
        _ => None,
    };
    let time_to_result_s = match (n_d, decision) {
        (Some(nd), Some(d)) => Some((d.n_c - nd) as f64 / m.metadata.sample_rate_fps),
        _ => None,
    };
    Ok(MeasurementResult {
        status,
        method: cfg.convergence.method,
        n_d,
        n_c: decision.map(|d| d.n_c),
        r_c_hat,
        g_hat,
        g_true: m.metadata.glucose_mg_dl,
        time_to_result_s,
        sigma1_sq,
        threshold: detector.threshold(),
        trace,
        diagnostics: diag,
    })
}

/// Kinetic parameters estimated from post-drop traces: an exponential per
/// trace, a line through the fitted `(r_C, τ)` pairs, and the mean residual
/// variance as measurement noise. Traces too short or too flat to fit are
/// skipped.
pub fn fit_kinetic_params(traces: &[Vec<f64>]) -> Result<KineticModelParams> {
    let mut r_c = Vec::new();
    let mut tau = Vec::new();
    let mut resid = Vec::new();
    for t in traces {
        if t.len() < MIN_FIT_SAMPLES {
            continue;
        }
        if let Ok(f) = fit_exponential(t) {
            if f.converged && f.tau < 0.0 {
                r_c.push(f.r_c);
                tau.push(f.tau);
                resid.push(f.residual_variance);
            }
        }
    }
    if r_c.len() < 2 {
        return Err(Error::TooFew {
            len: r_c.len(),
            min: 2,
        });
    }
    let line = regress_tau(&r_c, &tau)?;
    let p = KineticModelParams {
        delta_tau: line.delta_tau,
        tau0: line.tau0,
        sigma_v_sq: math::mean(&resid).max(1e-9),
    };
    p.validate()?;
    Ok(p)
}
