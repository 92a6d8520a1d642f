//! Neyman-Pearson variance test for the onset of the reaction.
//!
//! Before the drop the mean-adjusted frame is i.i.d. `N(0, σ₁²)`, afterwards
//! the variance grows. The statistic `T = Σ (x_l - x̄)²` is compared against
//! a threshold derived from the Gaussian approximation `χ²_L ≈ N(L, 2L)`:
//!
//! ```text
//! δ' = σ₁² · (L + sqrt(2L) · Q⁻¹(P_FA))
//! ```

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::frames::{self, Frame};
use crate::math;
use crate::{Error, Result};

/// Smallest `L` for which the Gaussian approximation is accepted.
pub const MIN_PIXELS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropDetectorConfig {
    /// Pre-reaction pixel variance (percent²).
    pub sigma1_sq: f64,
    /// Nominal per-frame false-alarm probability.
    pub p_fa: f64,
    /// Consecutive above-threshold frames needed to declare the drop.
    pub min_consecutive: usize,
}

impl DropDetectorConfig {
    pub fn new(sigma1_sq: f64, p_fa: f64) -> Self {
        Self {
            sigma1_sq,
            p_fa,
            min_consecutive: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma1_sq > 0.0) || !self.sigma1_sq.is_finite() {
            return Err(Error::InvalidConfig("sigma1_sq must be positive"));
        }
        if !(self.p_fa > 0.0 && self.p_fa < 1.0) {
            return Err(Error::InvalidProbability(self.p_fa));
        }
        if self.min_consecutive == 0 {
            return Err(Error::InvalidConfig("min_consecutive must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropDecision {
    /// Frame index of the drop, if detected.
    pub n_d: Option<usize>,
    /// `T` for every processed frame.
    pub statistic_trace: Vec<f64>,
    pub threshold: f64,
}

/// Sum of squared deviations from the vector mean.
pub fn test_statistic(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::TooFew {
            len: x.len(),
            min: 2,
        });
    }
    let m = math::mean(x);
    Ok(x.iter().map(|v| (v - m) * (v - m)).sum())
}

/// Threshold `δ'` for `L` pixels.
pub fn threshold(cfg: &DropDetectorConfig, l: usize) -> Result<f64> {
    cfg.validate()?;
    if l < MIN_PIXELS {
        return Err(Error::TooFew {
            len: l,
            min: MIN_PIXELS,
        });
    }
    let l = l as f64;
    Ok(cfg.sigma1_sq * (l + math::sqrt(2.0 * l) * math::normal_isf(cfg.p_fa)))
}

/// Streaming detector with the consecutive-frame debounce.
#[derive(Debug, Clone)]
pub struct DropDetector {
    threshold: f64,
    min_consecutive: usize,
    run_start: Option<usize>,
    run_len: usize,
    detected: Option<usize>,
    trace: Vec<f64>,
}

impl DropDetector {
    pub fn new(cfg: &DropDetectorConfig, pixels: usize) -> Result<Self> {
        Ok(Self {
            threshold: threshold(cfg, pixels)?,
            min_consecutive: cfg.min_consecutive,
            run_start: None,
            run_len: 0,
            detected: None,
            trace: Vec::new(),
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn detected(&self) -> Option<usize> {
        self.detected
    }

    /// Feeds the pre-processed frame with index `n`. Returns the drop index
    /// once it has been confirmed.
    pub fn push(&mut self, n: usize, x: &[f64]) -> Result<Option<usize>> {
        let t = test_statistic(x)?;
        self.trace.push(t);
        if self.detected.is_some() {
            return Ok(self.detected);
        }
        if t > self.threshold {
            if self.run_len == 0 {
                self.run_start = Some(n);
            }
            self.run_len += 1;
            if self.run_len >= self.min_consecutive {
                self.detected = self.run_start;
            }
        } else {
            self.run_len = 0;
            self.run_start = None;
        }
        Ok(self.detected)
    }

    pub fn finish(self) -> DropDecision {
        DropDecision {
            n_d: self.detected,
            statistic_trace: self.trace,
            threshold: self.threshold,
        }
    }
}

/// Runs the detector over pre-processed (normalised, binned) frames.
pub fn detect(frames: &[Frame], cfg: &DropDetectorConfig) -> Result<DropDecision> {
    let first = frames.first().ok_or(Error::Empty("frames"))?;
    let mut det = DropDetector::new(cfg, first.len())?;
    for f in frames {
        det.push(f.index(), f.pixels())?;
    }
    Ok(det.finish())
}

/// Pooled pre-reaction variance from raw calibration frames.
///
/// Each calibration frame is divided by the mean of the *other* calibration
/// frames, then binned, so its noise has the same structure as a measurement
/// frame normalised against the full calibration mean (a self-inclusive
/// reference would shrink the variance by `(K-1)/K`). The ratio is not
/// clamped: it scatters around 100 %, and clipping it would hide half the
/// noise.
pub fn estimate_sigma1_sq(calibration_frames: &[Frame], bin_size: usize) -> Result<f64> {
    let k = calibration_frames.len();
    if k < 2 {
        return Err(Error::TooFew { len: k, min: 2 });
    }
    let total = frames::calibration_mean(calibration_frames)?;
    let mut ss = 0.0;
    let mut dof = 0.0;
    for frame in calibration_frames {
        let mut ratio = Vec::with_capacity(frame.len());
        for (index, (&t, &p)) in total.pixels().iter().zip(frame.pixels()).enumerate() {
            let others = (t * k as f64 - p) / (k as f64 - 1.0);
            if !(others > 0.0) {
                return Err(Error::NonPositiveCalibration { index });
            }
            ratio.push(100.0 * p / others);
        }
        let x = frames::bin(&Frame::new(frame.rows(), frame.cols(), 0, ratio)?, bin_size)?;
        ss += test_statistic(x.pixels())?;
        dof += x.len() as f64 - 1.0;
    }
    let v = ss / dof;
    if !(v > 0.0) {
        return Err(Error::InvalidConfig("calibration frames carry no noise"));
    }
    Ok(v)
}
