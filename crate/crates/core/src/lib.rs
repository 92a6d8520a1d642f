//! Image-based photometric glucose measurement.
//!
//! The crate covers the whole per-measurement chain: frame pre-processing,
//! reaction-onset (drop) detection, kernel mode seeking segmentation with
//! robust and sparse variants, region-of-interest assignment, kinetic curve
//! tracking with an extended Kalman filter, remission-to-glucose calibration
//! and clinical accuracy scoring. A synthetic measurement generator supplies
//! ground truth for testing.
//!
//! Everything here is pure computation on in-memory data and builds without
//! `std` (an allocator is required). File formats and the command-line tool
//! live in the companion `glucokin` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod calibrate;
pub mod dropdetect;
mod error;
pub mod frames;
pub mod kinetics;
pub mod math;
pub mod metrics;
pub mod modeseek;
pub mod pipeline;
pub mod roi;
pub mod sparse;
pub mod synth;

pub use error::{Error, Result};
pub use frames::{Frame, Measurement, MeasurementMetadata, PixelVector};
pub use modeseek::{ClusterSet, GaussianKernel, KernelProfile, Points, Variant};
pub use pipeline::{run_pipeline, MeasurementResult, PipelineConfig};
