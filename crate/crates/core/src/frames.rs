//! Frames, calibration normalisation, binning and vectorisation.
//!
//! Pixels are stored column-major: pixel `(r, c)` of an `rows x cols` frame
//! lives at `c * rows + r`. The same order is used by [`vectorize`] and by
//! the on-disk container, so a frame's storage *is* its vectorised form.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A gray-scale frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    rows: usize,
    cols: usize,
    index: usize,
    pixels: Vec<f64>,
}

impl Frame {
    /// Builds a frame from column-major pixels.
    pub fn new(rows: usize, cols: usize, index: usize, pixels: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("frame dimensions"));
        }
        if pixels.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                found: pixels.len(),
            });
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("frame pixels must be finite"));
        }
        Ok(Self {
            rows,
            cols,
            index,
            pixels,
        })
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        index: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                pixels.push(f(r, c));
            }
        }
        Self::new(rows, cols, index, pixels)
    }

    pub fn constant(rows: usize, cols: usize, index: usize, value: f64) -> Result<Self> {
        Self::new(rows, cols, index, alloc::vec![value; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Number of pixels `L`.
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[col * self.rows + row]
    }

    /// Column-major pixel storage.
    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn mean(&self) -> f64 {
        crate::math::mean(&self.pixels)
    }
}

/// A vectorised frame, `x = vec(X)` in column-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelVector(pub Vec<f64>);

impl PixelVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Inverse of [`vectorize`].
    pub fn reshape(self, rows: usize, cols: usize, index: usize) -> Result<Frame> {
        Frame::new(rows, cols, index, self.0)
    }
}

pub fn vectorize(frame: &Frame) -> PixelVector {
    PixelVector(frame.pixels.clone())
}

/// Relative remission in percent: `100 * raw / calibration`, clamped to
/// `[0, 100]`.
pub fn normalize(raw: &Frame, calibration_mean: &Frame) -> Result<Frame> {
    if raw.dims() != calibration_mean.dims() {
        return Err(Error::DimensionMismatch {
            expected: calibration_mean.dims(),
            found: raw.dims(),
        });
    }
    if let Some(index) = calibration_mean.pixels.iter().position(|&c| !(c > 0.0)) {
        return Err(Error::NonPositiveCalibration { index });
    }
    let pixels = raw
        .pixels
        .iter()
        .zip(&calibration_mean.pixels)
        .map(|(&r, &c)| (100.0 * r / c).clamp(0.0, 100.0))
        .collect();
    Ok(Frame {
        rows: raw.rows,
        cols: raw.cols,
        index: raw.index,
        pixels,
    })
}

/// Non-overlapping `B x B` block means.
pub fn bin(frame: &Frame, b: usize) -> Result<Frame> {
    if b == 0 || frame.rows % b != 0 || frame.cols % b != 0 {
        return Err(Error::BinSize {
            bin: b,
            rows: frame.rows,
            cols: frame.cols,
        });
    }
    if b == 1 {
        return Ok(frame.clone());
    }
    let (rows, cols) = (frame.rows / b, frame.cols / b);
    let scale = 1.0 / (b * b) as f64;
    Frame::from_fn(rows, cols, frame.index, |r, c| {
        let mut s = 0.0;
        for dc in 0..b {
            for dr in 0..b {
                s += frame.get(r * b + dr, c * b + dc);
            }
        }
        s * scale
    })
}

/// Pixel-wise mean of the calibration frames.
pub fn calibration_mean(frames: &[Frame]) -> Result<Frame> {
    let first = frames.first().ok_or(Error::Empty("calibration frames"))?;
    let mut acc = alloc::vec![0.0; first.len()];
    for f in frames {
        if f.dims() != first.dims() {
            return Err(Error::DimensionMismatch {
                expected: first.dims(),
                found: f.dims(),
            });
        }
        for (a, p) in acc.iter_mut().zip(&f.pixels) {
            *a += p;
        }
    }
    let n = frames.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Frame::new(first.rows, first.cols, 0, acc)
}

/// Acquisition metadata carried alongside the frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementMetadata {
    pub sample_rate_fps: f64,
    pub resolution_um_per_px: f64,
    pub bin_size: usize,
    pub glucose_mg_dl: Option<f64>,
}

/// One measurement: calibration frames taken before the sample is applied,
/// followed by the timed frame sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub frames: Vec<Frame>,
    pub calibration_frames: Vec<Frame>,
    pub metadata: MeasurementMetadata,
}

impl Measurement {
    pub fn new(
        frames: Vec<Frame>,
        calibration_frames: Vec<Frame>,
        metadata: MeasurementMetadata,
    ) -> Result<Self> {
        let m = Self {
            frames,
            calibration_frames,
            metadata,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.metadata.sample_rate_fps > 0.0) {
            return Err(Error::InvalidConfig("sample rate must be positive"));
        }
        if self.metadata.bin_size == 0 {
            return Err(Error::InvalidConfig("bin size must be at least 1"));
        }
        let first = self
            .calibration_frames
            .first()
            .ok_or(Error::Empty("calibration frames"))?;
        for f in self.calibration_frames.iter().chain(&self.frames) {
            if f.dims() != first.dims() {
                return Err(Error::DimensionMismatch {
                    expected: first.dims(),
                    found: f.dims(),
                });
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        self.calibration_frames
            .first()
            .map(Frame::dims)
            .unwrap_or((0, 0))
    }
}
