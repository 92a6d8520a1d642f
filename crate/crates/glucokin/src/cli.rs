//! Command-line interface.
//!
//! Exit codes: 0 on success, 2 for invalid input (bad arguments, unreadable
//! or malformed files, invalid configurations), 3 when a measurement ends
//! without a drop or without convergence. Outputs that could be produced are
//! still written before exiting with 3.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use glucokin_core::calibrate::CalibrationCurve;
use glucokin_core::dropdetect::{self, DropDetectorConfig};
use glucokin_core::kinetics::Method;
use glucokin_core::metrics::GmadConfig;
use glucokin_core::pipeline::{run_pipeline, segment_frame, PipelineConfig, Preprocessor, Status};
use glucokin_core::sparse::SubsetStop;
use glucokin_core::synth::{Jitter, KineticDefaults, SceneConfig};
use glucokin_core::Variant;
use serde::Serialize;
use serde_json::json;

use crate::container::{read_json, read_measurement, write_json};
use crate::evaluate::{
    aggregate, fit_curve, fit_kinetics, run_manifest, source_name, ResultEntry, ResultsFile,
};
use crate::manifest::{simulate, DatasetManifest, SimulateOptions, Split};
use crate::report::{ceg_csv, ceg_svg, trace_csv};
use crate::{Error, Result};

pub const EXIT_INVALID: u8 = 2;
pub const EXIT_INCOMPLETE: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "glucokin",
    version,
    about = "Image-based photometric glucose measurement"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset: containers, sidecars and a manifest.
    Simulate(SimulateArgs),
    /// Detect the drop time of a measurement.
    Detect(DetectArgs),
    /// Segment one frame by mode seeking and assign the ROI.
    Segment(SegmentArgs),
    /// Track the kinetic curve until convergence.
    Track(TrackArgs),
    /// Fit a calibration curve on the calibration split of a dataset.
    Calibrate(CalibrateArgs),
    /// Run the full pipeline on a measurement or a dataset.
    Run(RunArgs),
    /// Aggregate pipeline results into accuracy metrics.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Glucose levels in mg/dl, comma separated; defaults to 10 levels
    /// from 50 to 550.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub levels: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Additional repeats per level reserved for calibration.
    #[arg(long, default_value_t = 2)]
    pub calibration_repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Smaller frames for quick experiments.
    #[arg(long)]
    pub compact: bool,
    /// Frames per measurement after the calibration frames.
    #[arg(long)]
    pub frames: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// GLKF container.
    #[arg(long)]
    pub input: PathBuf,
    /// Sidecar JSON; defaults to the container path with `.json`.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub pfa: f64,
    #[arg(long, default_value_t = 3)]
    pub min_consec: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Ms,
    Rms,
    Meds,
    Rmeds,
    Ssms,
    Rssms,
    Ssmeds,
    Rssmeds,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Ms => Variant::Ms,
            VariantArg::Rms => Variant::Rms,
            VariantArg::Meds => Variant::Meds,
            VariantArg::Rmeds => Variant::Rmeds,
            VariantArg::Ssms => Variant::Ssms,
            VariantArg::Rssms => Variant::Rssms,
            VariantArg::Ssmeds => Variant::Ssmeds,
            VariantArg::Rssmeds => Variant::Rssmeds,
        }
    }
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Timed frame to segment; defaults to the last one.
    #[arg(long)]
    pub frame: Option<usize>,
    #[arg(long, value_enum, default_value = "meds")]
    pub variant: VariantArg,
    /// Intensity bandwidth in percent.
    #[arg(long, default_value_t = 0.3)]
    pub h: f64,
    /// Add pixel coordinates to the features.
    #[arg(long)]
    pub spatial: bool,
    /// Spatial bandwidth in binned pixels.
    #[arg(long, default_value_t = 8.0)]
    pub hs: f64,
    /// Use the sparse form of the variant.
    #[arg(long)]
    pub sparse: bool,
    /// Fixed sparse subset size.
    #[arg(long = "N", conflicts_with = "tnu")]
    pub n: Option<usize>,
    /// Threshold of the subset size rule.
    #[arg(long)]
    pub tnu: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Standard,
    Ekf,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Standard => Method::Standard,
            MethodArg::Ekf => Method::Ekf,
        }
    }
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Pipeline configuration JSON; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long)]
    pub h: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Slope threshold of the standard rule.
    #[arg(long)]
    pub tslope: Option<f64>,
    /// Trace CSV output.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Also fit the kinetic model on full calibration traces and write the
    /// updated configuration to `--config-out`.
    #[arg(long, requires = "config_out")]
    pub fit_kinetics: bool,
    #[arg(long)]
    pub config_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Calibration,
    Evaluation,
    All,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Single measurement container.
    #[arg(
        long,
        conflicts_with = "manifest",
        required_unless_present = "manifest"
    )]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Dataset manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "evaluation")]
    pub split: SplitArg,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Calibration curve JSON; overrides the configured path.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Trace CSV output (single measurement only).
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Results JSON written by `run`.
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// CEG CSV output.
    #[arg(long)]
    pub ceg: Option<PathBuf>,
    /// CEG scatter plot output.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

/// How a command finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Incomplete,
}

impl Outcome {
    pub fn exit_code(self) -> ExitCode {
        match self {
            Outcome::Success => ExitCode::SUCCESS,
            Outcome::Incomplete => ExitCode::from(EXIT_INCOMPLETE),
        }
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Segment(a) => cmd_segment(a),
        Command::Track(a) => cmd_track(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Run(a) => cmd_run(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    }
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            let mut s = serde_json::to_string_pretty(value)?;
            s.push('\n');
            std::io::stdout().write_all(s.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<Outcome> {
    let mut opts = SimulateOptions {
        repeats: a.repeats,
        calibration_repeats: a.calibration_repeats,
        seed: a.seed,
        scene: if a.compact {
            SceneConfig::compact()
        } else {
            SceneConfig::default()
        },
        kinetics: KineticDefaults::default(),
        jitter: Jitter::default(),
        ..SimulateOptions::default()
    };
    if !a.levels.is_empty() {
        opts.levels = a.levels;
    }
    if let Some(n) = a.frames {
        opts.kinetics.n_frames = n;
    }
    let m = simulate(&a.out, &opts)?;
    eprintln!(
        "wrote {} measurements to {}",
        m.entries.len(),
        a.out.display()
    );
    Ok(Outcome::Success)
}

fn cmd_detect(a: DetectArgs) -> Result<Outcome> {
    let m = read_measurement(&a.input.input, a.input.sidecar.as_deref())?;
    let b = m.metadata.bin_size;
    let sigma1_sq = dropdetect::estimate_sigma1_sq(&m.calibration_frames, b)?;
    let cfg = DropDetectorConfig {
        sigma1_sq,
        p_fa: a.pfa,
        min_consecutive: a.min_consec,
    };
    let pre = Preprocessor::new(&m)?;
    let frames = m
        .frames
        .iter()
        .map(|f| pre.apply(f))
        .collect::<glucokin_core::Result<Vec<_>>>()?;
    let d = dropdetect::detect(&frames, &cfg)?;
    emit(
        None,
        &json!({
            "n_d": d.n_d,
            "threshold": d.threshold,
            "sigma1_sq": sigma1_sq,
            "p_fa": a.pfa,
            "min_consecutive": a.min_consec,
            "frames": frames.len(),
        }),
    )?;
    Ok(if d.n_d.is_some() {
        Outcome::Success
    } else {
        Outcome::Incomplete
    })
}

fn cmd_segment(a: SegmentArgs) -> Result<Outcome> {
    let m = read_measurement(&a.input.input, a.input.sidecar.as_deref())?;
    let n = a.frame.unwrap_or(m.frames.len().saturating_sub(1));
    let raw = m
        .frames
        .get(n)
        .ok_or_else(|| Error::Invalid(format!("frame {n} out of range")))?;
    let x = Preprocessor::new(&m)?.apply(raw)?;
    let mut variant: Variant = a.variant.into();
    if a.sparse || a.n.is_some() || a.tnu.is_some() {
        variant = match variant {
            Variant::Ms => Variant::Ssms,
            Variant::Rms => Variant::Rssms,
            Variant::Meds => Variant::Ssmeds,
            Variant::Rmeds => Variant::Rssmeds,
            v => v,
        };
    }
    let mut cfg = PipelineConfig::default().segmentation;
    cfg.variant = variant;
    cfg.h = a.h;
    cfg.spatial = a.spatial;
    cfg.h_spatial = a.hs;
    cfg.sparse = match (a.n, a.tnu) {
        (Some(n), _) => SubsetStop::Fixed(n),
        (None, Some(t)) => SubsetStop::Threshold(t),
        (None, None) => SubsetStop::default(),
    };
    let seg = segment_frame(&x, &cfg)?;
    emit(
        a.out.as_deref(),
        &json!({
            "frame": n,
            "variant": variant,
            "h": a.h,
            "spatial": a.spatial,
            "clusters": seg.clusters,
            "roles": seg.assignment.roles,
            "roi": seg.assignment.roi,
            "background": seg.assignment.background,
            "r_hat": seg.r_hat,
            "single_region": seg.assignment.single_region,
            "n_nu": seg.n_nu,
        }),
    )?;
    Ok(Outcome::Success)
}

fn load_config(a: &ConfigArgs) -> Result<PipelineConfig> {
    let mut cfg = match &a.config {
        Some(p) => read_json(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(m) = a.method {
        cfg.convergence.method = m.into();
    }
    if let Some(v) = a.variant {
        cfg.segmentation.variant = v.into();
    }
    if let Some(h) = a.h {
        cfg.segmentation.h = h;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_curve(path: Option<&Path>, cfg: &PipelineConfig) -> Result<Option<CalibrationCurve>> {
    let path = path
        .map(Path::to_path_buf)
        .or_else(|| cfg.calibration_curve.as_ref().map(PathBuf::from));
    match path {
        Some(p) => {
            let c: CalibrationCurve = read_json(&p)?;
            c.validate()?;
            Ok(Some(c))
        }
        None => Ok(None),
    }
}

fn outcome_of(status: Status) -> Outcome {
    match status {
        Status::Complete => Outcome::Success,
        Status::NoDrop | Status::NotConverged => Outcome::Incomplete,
    }
}

fn cmd_track(a: TrackArgs) -> Result<Outcome> {
    let mut cfg = load_config(&a.config)?;
    if let Some(t) = a.tslope {
        cfg.convergence.standard.t_slope = t;
        cfg.validate()?;
    }
    let m = read_measurement(&a.input.input, a.input.sidecar.as_deref())?;
    let r = run_pipeline(&m, &cfg, None)?;
    let trace = a
        .trace
        .clone()
        .or_else(|| cfg.outputs.trace.as_ref().map(PathBuf::from));
    if let Some(p) = trace {
        std::fs::write(p, trace_csv(&r)?)?;
    }
    let decision = r
        .n_c
        .zip(r.r_c_hat)
        .map(|(n_c, r_c_hat)| json!({ "method": r.method, "n_c": n_c, "r_c_hat": r_c_hat }));
    emit(
        a.out.as_deref(),
        &json!({
            "status": r.status,
            "n_d": r.n_d,
            "decision": decision,
            "time_to_result_s": r.time_to_result_s,
        }),
    )?;
    Ok(outcome_of(r.status))
}

fn cmd_calibrate(a: CalibrateArgs) -> Result<Outcome> {
    let mut cfg = load_config(&a.config)?;
    let manifest = DatasetManifest::load(&a.manifest)?;
    if a.fit_kinetics {
        cfg.kinetics = fit_kinetics(&a.manifest, &manifest, &cfg)?;
        if let Some(p) = &a.config_out {
            write_json(p, &cfg)?;
        }
    }
    let results = run_manifest(&a.manifest, &manifest, Some(Split::Calibration), &cfg, None)?;
    let curve = fit_curve(&results, &source_name(&manifest))?;
    write_json(&a.out, &curve)?;
    Ok(Outcome::Success)
}

fn cmd_run(a: RunArgs) -> Result<Outcome> {
    let cfg = load_config(&a.config)?;
    let curve = load_curve(a.curve.as_deref(), &cfg)?;
    let out = a
        .out
        .clone()
        .or_else(|| cfg.outputs.result.as_ref().map(PathBuf::from));
    if let Some(manifest_path) = &a.manifest {
        let manifest = DatasetManifest::load(manifest_path)?;
        let split = match a.split {
            SplitArg::Calibration => Some(Split::Calibration),
            SplitArg::Evaluation => Some(Split::Evaluation),
            SplitArg::All => None,
        };
        let entries = run_manifest(manifest_path, &manifest, split, &cfg, curve.as_ref())?;
        emit(out.as_deref(), &ResultsFile::new(entries))?;
        return Ok(Outcome::Success);
    }
    let input = a.input.as_ref().expect("clap requires input or manifest");
    let m = read_measurement(input, a.sidecar.as_deref())?;
    let r = run_pipeline(&m, &cfg, curve.as_ref())?;
    let trace = a
        .trace
        .clone()
        .or_else(|| cfg.outputs.trace.as_ref().map(PathBuf::from));
    if let Some(p) = trace {
        std::fs::write(p, trace_csv(&r)?)?;
    }
    let status = r.status;
    emit(out.as_deref(), &r)?;
    Ok(outcome_of(status))
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<Outcome> {
    let text = std::fs::read_to_string(&a.results)?;
    // A results file from a dataset run, or a single measurement result.
    let entries: Vec<ResultEntry> = match serde_json::from_str::<ResultsFile>(&text) {
        Ok(f) => f.entries,
        Err(_) => vec![ResultEntry {
            id: 0,
            split: None,
            result: serde_json::from_str(&text)?,
        }],
    };
    let report = aggregate(&entries, &GmadConfig::default())?;
    write_json(&a.out, &report)?;
    if let Some(p) = &a.ceg {
        std::fs::write(p, ceg_csv(&report.ceg)?)?;
    }
    if let Some(p) = &a.svg {
        std::fs::write(p, ceg_svg(&report.ceg))?;
    }
    Ok(Outcome::Success)
}
