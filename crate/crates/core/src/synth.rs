//! Synthetic measurements with known ground truth.
//!
//! A scene is a dry background with a circular wetted region (ROI), a ring
//! of edge pixels that mixes ROI and background half and half, and small air
//! bubbles inside the ROI that stay at background level. Before the drop
//! every pixel sits at the background level. From `n_D` on the ROI follows
//! the kinetic model and the background drifts linearly down by
//! `background_drift` over the rest of the run.
//!
//! Each pixel has a fixed illumination gain in `[0.8, 0.9]`; raw intensities
//! are `gain · (s + σ ε) / 100` with i.i.d. standard normal `ε`. Calibration
//! frames image a white reference at [`WHITE_REFERENCE`], so normalising
//! recovers `s` up to noise. The dry strip defaults to 98 %, which keeps
//! pre-drop noise clear of the 100 % clamp of the normalisation.
//!
//! Glucose maps linearly to converged remission, 20 mg/dl to 95 % and
//! 600 mg/dl to 45 %. The drop lowers the ROI by `drop_depth` of its total
//! change at once, and the decay exponent is `Δτ · r_C + τ₀`.
//!
//! Frames are generated on demand: frame `n` draws from its own ChaCha
//! stream, so any frame can be produced without the others.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::frames::{Frame, Measurement, MeasurementMetadata};
use crate::kinetics::{model_eval, KineticModelParams};
use crate::{Error, Result};

pub const G_MIN: f64 = 20.0;
/// Level of the calibration target, in percent.
pub const WHITE_REFERENCE: f64 = 100.0;
pub const G_MAX: f64 = 600.0;

/// Converged remission of the generator for glucose `g` (mg/dl).
pub fn r_c_of_g(g: f64) -> f64 {
    95.0 - (g - G_MIN) * 50.0 / (G_MAX - G_MIN)
}

/// Inverse of [`r_c_of_g`].
pub fn g_of_r_c(r_c: f64) -> f64 {
    G_MIN + (95.0 - r_c) * (G_MAX - G_MIN) / 50.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArtefactConfig {
    pub count: usize,
    pub radius_min: f64,
    pub radius_max: f64,
}

/// Raw (unbinned) scene geometry and noise, in pixels and percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub rows: usize,
    pub cols: usize,
    /// `(row, col)` of the ROI centre.
    pub roi_center: (f64, f64),
    pub roi_radius: f64,
    pub edge_width: f64,
    pub artefacts: ArtefactConfig,
    pub noise_sigma: f64,
    pub background: f64,
    pub background_drift: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            rows: 44,
            cols: 60,
            roi_center: (22.0, 30.0),
            roi_radius: 12.0,
            edge_width: 3.0,
            artefacts: ArtefactConfig {
                count: 1,
                radius_min: 1.5,
                radius_max: 2.5,
            },
            noise_sigma: 0.5,
            background: 98.0,
            background_drift: 1.0,
        }
    }
}

impl SceneConfig {
    /// A small scene for fast tests.
    pub fn compact() -> Self {
        Self {
            rows: 32,
            cols: 40,
            roi_center: (16.0, 20.0),
            roi_radius: 8.0,
            edge_width: 2.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Empty("scene dimensions"));
        }
        if !(self.roi_radius > 0.0) || !(self.edge_width >= 0.0) {
            return Err(Error::InvalidConfig("ROI radius must be positive"));
        }
        let outer = self.roi_radius + self.edge_width;
        let (r, c) = self.roi_center;
        if r - outer < 0.0
            || c - outer < 0.0
            || r + outer > self.rows as f64
            || c + outer > self.cols as f64
        {
            return Err(Error::InvalidConfig("ROI does not fit in the frame"));
        }
        let a = self.artefacts;
        if a.count > 0
            && (!(a.radius_min > 0.0)
                || a.radius_max < a.radius_min
                || a.radius_max >= self.roi_radius)
        {
            return Err(Error::InvalidConfig(
                "artefact radii must lie in (0, ROI radius)",
            ));
        }
        if !(self.noise_sigma >= 0.0)
            || !(self.background > 0.0 && self.background <= WHITE_REFERENCE)
        {
            return Err(Error::InvalidConfig(
                "need noise >= 0 and background in (0, 100]",
            ));
        }
        Ok(())
    }
}

/// Timing and kinetic constants of a generated measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticDefaults {
    pub delta_tau: f64,
    pub tau0: f64,
    /// Fraction of `background - r_C` lost instantly at the drop.
    pub drop_depth: f64,
    pub n_frames: usize,
    pub n_d: usize,
    pub calibration_frames: usize,
    pub sample_rate_fps: f64,
    pub resolution_um_per_px: f64,
    pub bin_size: usize,
}

impl Default for KineticDefaults {
    fn default() -> Self {
        Self {
            delta_tau: 0.00024,
            tau0: -0.0308,
            drop_depth: 0.35,
            n_frames: 580,
            n_d: 60,
            calibration_frames: 10,
            sample_rate_fps: 30.0,
            resolution_um_per_px: 15.0,
            bin_size: 2,
        }
    }
}

impl KineticDefaults {
    /// True kinetic parameters, with `σ_v²` left at a placeholder of 1.
    pub fn params(&self) -> KineticModelParams {
        KineticModelParams {
            delta_tau: self.delta_tau,
            tau0: self.tau0,
            sigma_v_sq: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_frames == 0 || self.calibration_frames == 0 {
            return Err(Error::Empty("frames"));
        }
        if self.n_d >= self.n_frames {
            return Err(Error::InvalidConfig("drop must happen within the run"));
        }
        if !(self.sample_rate_fps > 0.0) || self.bin_size == 0 {
            return Err(Error::InvalidConfig(
                "sample rate and bin size must be positive",
            ));
        }
        if !(0.0..=1.0).contains(&self.drop_depth) {
            return Err(Error::InvalidConfig("drop depth must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Background,
    Roi,
    Edge,
    Artefact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub g: f64,
    pub r_c: f64,
    pub r_d: f64,
    /// Decay exponent per frame (negative).
    pub tau: f64,
    pub n_d: usize,
    pub rows: usize,
    pub cols: usize,
    /// Region of each raw pixel, column-major.
    pub mask: Vec<Region>,
}

impl GroundTruth {
    /// Noise-free ROI remission at frame `n`.
    pub fn roi_value(&self, n: usize, background: f64) -> f64 {
        if n < self.n_d {
            background
        } else {
            (self.r_d - self.r_c) * libm::exp(self.tau * (n - self.n_d) as f64) + self.r_c
        }
    }

    pub fn count(&self, region: Region) -> usize {
        self.mask.iter().filter(|&&m| m == region).count()
    }
}

/// Everything needed to produce the frames of one measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPlan {
    pub scene: SceneConfig,
    pub kinetics: KineticDefaults,
    pub g: f64,
    pub seed: u64,
}

/// Stream ids: 0 for per-measurement constants, `1 + n` for frame `n`,
/// `CAL_STREAM + k` for calibration frame `k`.
const CAL_STREAM: u64 = 1 << 40;

/// A realised plan: geometry, gains and truth, ready to emit frames.
#[derive(Debug, Clone)]
pub struct Generator {
    plan: MeasurementPlan,
    gains: Vec<f64>,
    truth: GroundTruth,
}

impl MeasurementPlan {
    pub fn new(scene: SceneConfig, kinetics: KineticDefaults, g: f64, seed: u64) -> Result<Self> {
        if !(G_MIN..=G_MAX).contains(&g) {
            return Err(Error::GlucoseOutOfRange(g));
        }
        scene.validate()?;
        kinetics.validate()?;
        Ok(Self {
            scene,
            kinetics,
            g,
            seed,
        })
    }

    pub fn generator(&self) -> Result<Generator> {
        Generator::new(self.clone())
    }
}

impl Generator {
    pub fn new(plan: MeasurementPlan) -> Result<Self> {
        let plan = MeasurementPlan::new(plan.scene, plan.kinetics, plan.g, plan.seed)?;
        let s = &plan.scene;
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        rng.set_stream(0);
        let len = s.rows * s.cols;
        let gains: Vec<f64> = (0..len).map(|_| rng.random_range(0.8..0.9)).collect();
        let bubbles: Vec<(f64, f64, f64)> = (0..s.artefacts.count)
            .map(|_| {
                let rad = if s.artefacts.radius_max > s.artefacts.radius_min {
                    rng.random_range(s.artefacts.radius_min..s.artefacts.radius_max)
                } else {
                    s.artefacts.radius_min
                };
                let reach = s.roi_radius - rad;
                let dist = reach * libm::sqrt(rng.random_range(0.0..1.0));
                let ang = rng.random_range(0.0..core::f64::consts::TAU);
                (
                    s.roi_center.0 + dist * libm::cos(ang),
                    s.roi_center.1 + dist * libm::sin(ang),
                    rad,
                )
            })
            .collect();
        let mut mask = Vec::with_capacity(len);
        for c in 0..s.cols {
            for r in 0..s.rows {
                let (y, x) = (r as f64 + 0.5, c as f64 + 0.5);
                let d = libm::hypot(y - s.roi_center.0, x - s.roi_center.1);
                let region = if d <= s.roi_radius {
                    if bubbles
                        .iter()
                        .any(|&(by, bx, br)| libm::hypot(y - by, x - bx) <= br)
                    {
                        Region::Artefact
                    } else {
                        Region::Roi
                    }
                } else if d <= s.roi_radius + s.edge_width {
                    Region::Edge
                } else {
                    Region::Background
                };
                mask.push(region);
            }
        }
        let k = &plan.kinetics;
        let r_c = r_c_of_g(plan.g);
        let truth = GroundTruth {
            g: plan.g,
            r_c,
            r_d: s.background - k.drop_depth * (s.background - r_c),
            tau: k.delta_tau * r_c + k.tau0,
            n_d: k.n_d,
            rows: s.rows,
            cols: s.cols,
            mask,
        };
        Ok(Self { plan, gains, truth })
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn plan(&self) -> &MeasurementPlan {
        &self.plan
    }

    /// Noise-free background level at frame `n`.
    pub fn background_at(&self, n: usize) -> f64 {
        let s = &self.plan.scene;
        let k = &self.plan.kinetics;
        if n < k.n_d {
            return s.background;
        }
        let span = (k.n_frames - k.n_d).max(1) as f64;
        s.background - s.background_drift * ((n - k.n_d) as f64 / span).min(1.0)
    }

    /// Noise-free remission of a region at frame `n`.
    pub fn region_value(&self, region: Region, n: usize) -> f64 {
        let bg = self.background_at(n);
        if n < self.truth.n_d {
            return bg;
        }
        let roi = model_eval(
            (n - self.truth.n_d) as f64,
            self.truth.r_d,
            self.truth.r_c,
            &self.plan.kinetics.params(),
        );
        match region {
            Region::Roi => roi,
            Region::Edge => 0.5 * (roi + bg),
            Region::Background | Region::Artefact => bg,
        }
    }

    fn raw(&self, stream: u64, index: usize, level: impl Fn(Region) -> f64) -> Frame {
        let s = &self.plan.scene;
        let mut rng = ChaCha8Rng::seed_from_u64(self.plan.seed);
        rng.set_stream(stream);
        let levels = [
            Region::Background,
            Region::Roi,
            Region::Edge,
            Region::Artefact,
        ]
        .map(&level);
        let pixels = self
            .truth
            .mask
            .iter()
            .zip(&self.gains)
            .map(|(&m, &gain)| {
                let eps: f64 = StandardNormal.sample(&mut rng);
                gain * (levels[m as usize] + s.noise_sigma * eps) / 100.0
            })
            .collect();
        Frame::new(s.rows, s.cols, index, pixels).expect("generator frames are finite")
    }

    /// Raw frame `n` of the timed sequence.
    pub fn frame_at(&self, n: usize) -> Frame {
        self.raw(1 + n as u64, n, |r| self.region_value(r, n))
    }

    /// Raw calibration frame `k` of the white reference.
    pub fn calibration_frame(&self, k: usize) -> Frame {
        self.raw(CAL_STREAM + k as u64, k, |_| WHITE_REFERENCE)
    }

    pub fn calibration_frames(&self) -> Vec<Frame> {
        (0..self.plan.kinetics.calibration_frames)
            .map(|k| self.calibration_frame(k))
            .collect()
    }

    pub fn metadata(&self) -> MeasurementMetadata {
        let k = &self.plan.kinetics;
        MeasurementMetadata {
            sample_rate_fps: k.sample_rate_fps,
            resolution_um_per_px: k.resolution_um_per_px,
            bin_size: k.bin_size,
            glucose_mg_dl: Some(self.plan.g),
        }
    }

    /// Materialises every frame.
    pub fn measurement(&self) -> Measurement {
        let frames = (0..self.plan.kinetics.n_frames)
            .map(|n| self.frame_at(n))
            .collect();
        Measurement {
            frames,
            calibration_frames: self.calibration_frames(),
            metadata: self.metadata(),
        }
    }
}

pub fn generate_measurement(
    scene: SceneConfig,
    kinetics: KineticDefaults,
    g: f64,
    seed: u64,
) -> Result<(Measurement, GroundTruth)> {
    let gen = MeasurementPlan::new(scene, kinetics, g, seed)?.generator()?;
    Ok((gen.measurement(), gen.truth.clone()))
}

/// Per-measurement jitter applied by [`generate_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    pub center: f64,
    pub radius: f64,
    /// Inclusive `n_D` range.
    pub n_d: (usize, usize),
}

impl Default for Jitter {
    fn default() -> Self {
        Self {
            center: 3.0,
            radius: 1.0,
            n_d: (50, 70),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: usize,
    pub plan: MeasurementPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPlan {
    pub seed: u64,
    pub entries: Vec<DatasetEntry>,
}

/// Evenly spaced glucose levels from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `levels × repeats` measurement plans with jittered ROI geometry and drop
/// time. Frames are not generated.
pub fn generate_dataset(
    levels: &[f64],
    repeats: usize,
    scene: SceneConfig,
    kinetics: KineticDefaults,
    jitter: Jitter,
    seed: u64,
) -> Result<DatasetPlan> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1"));
    }
    if levels.is_empty() {
        return Err(Error::Empty("levels"));
    }
    if jitter.n_d.0 > jitter.n_d.1 {
        return Err(Error::InvalidConfig("empty drop jitter range"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(levels.len() * repeats);
    for &g in levels {
        for _ in 0..repeats {
            let mut s = scene;
            let dr = rng.random_range(-jitter.center..=jitter.center);
            let dc = rng.random_range(-jitter.center..=jitter.center);
            s.roi_center = (scene.roi_center.0 + dr, scene.roi_center.1 + dc);
            s.roi_radius = scene.roi_radius + rng.random_range(-jitter.radius..=jitter.radius);
            let mut k = kinetics;
            k.n_d = rng.random_range(jitter.n_d.0..=jitter.n_d.1);
            let m_seed = rng.random::<u64>();
            let id = entries.len();
            entries.push(DatasetEntry {
                id,
                plan: MeasurementPlan::new(s, k, g, m_seed)?,
            });
        }
    }
    Ok(DatasetPlan { seed, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames;

    #[test]
    fn glucose_map_ends() {
        assert_eq!(r_c_of_g(20.0), 95.0);
        assert_eq!(r_c_of_g(600.0), 45.0);
        assert!((g_of_r_c(r_c_of_g(137.0)) - 137.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_glucose() {
        let e = MeasurementPlan::new(SceneConfig::compact(), KineticDefaults::default(), 10.0, 1);
        assert_eq!(e, Err(Error::GlucoseOutOfRange(10.0)));
    }

    #[test]
    fn noiseless_roi_converges() {
        let scene = SceneConfig {
            noise_sigma: 0.0,
            ..SceneConfig::compact()
        };
        let gen = MeasurementPlan::new(scene, KineticDefaults::default(), 300.0, 3)
            .unwrap()
            .generator()
            .unwrap();
        let cal = frames::calibration_mean(&gen.calibration_frames()).unwrap();
        let f = frames::normalize(&gen.frame_at(579), &cal).unwrap();
        let r_c = r_c_of_g(300.0);
        let expected = gen.truth().roi_value(579, 98.0);
        assert!((expected - r_c).abs() < 0.02);
        for (v, m) in f.pixels().iter().zip(&gen.truth().mask) {
            if *m == Region::Roi {
                assert!((v - expected).abs() < 1e-9, "{v} vs {expected}");
            }
        }
    }

    #[test]
    fn frames_are_random_access() {
        let gen =
            MeasurementPlan::new(SceneConfig::compact(), KineticDefaults::default(), 200.0, 9)
                .unwrap()
                .generator()
                .unwrap();
        let m = gen.measurement();
        assert_eq!(m.frames[77], gen.frame_at(77));
        assert_eq!(m.frames.len(), 580);
        assert_eq!(m.calibration_frames.len(), 10);
    }

    #[test]
    fn masks_partition_and_contain_roi() {
        let gen =
            MeasurementPlan::new(SceneConfig::default(), KineticDefaults::default(), 100.0, 5)
                .unwrap()
                .generator()
                .unwrap();
        let t = gen.truth();
        let total: usize = [
            Region::Background,
            Region::Roi,
            Region::Edge,
            Region::Artefact,
        ]
        .iter()
        .map(|&r| t.count(r))
        .sum();
        assert_eq!(total, t.mask.len());
        assert!(t.count(Region::Roi) > t.count(Region::Edge));
        assert!(t.count(Region::Artefact) > 0);
    }

    #[test]
    fn dataset_shape() {
        let levels = linspace(50.0, 550.0, 10);
        let d = generate_dataset(
            &levels,
            5,
            SceneConfig::default(),
            KineticDefaults::default(),
            Jitter::default(),
            11,
        )
        .unwrap();
        assert_eq!(d.entries.len(), 50);
        assert!(d
            .entries
            .iter()
            .all(|e| (50..=70).contains(&e.plan.kinetics.n_d) && e.plan.kinetics.n_frames == 580));
        let one = generate_dataset(
            &[90.0],
            1,
            SceneConfig::default(),
            KineticDefaults::default(),
            Jitter::default(),
            1,
        )
        .unwrap();
        assert_eq!(one.entries.len(), 1);
    }
}
