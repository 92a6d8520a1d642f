//! GLKF frame containers and their JSON sidecars.
//!
//! A container is little-endian: the magic `GLKF`, `u32` version 1, `u32`
//! rows, `u32` cols, `u32` frame count, then every frame as column-major
//! `f32`. The sidecar carries acquisition metadata and the number of
//! leading frames that are calibration frames.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use glucokin_core::{Frame, Measurement, MeasurementMetadata};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"GLKF";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub sample_rate_fps: f64,
    pub resolution_um_per_px: f64,
    pub bin_size: usize,
    pub glucose_mg_dl: Option<f64>,
    pub calibration_frame_count: usize,
}

impl Sidecar {
    pub fn of(m: &Measurement) -> Self {
        Self {
            sample_rate_fps: m.metadata.sample_rate_fps,
            resolution_um_per_px: m.metadata.resolution_um_per_px,
            bin_size: m.metadata.bin_size,
            glucose_mg_dl: m.metadata.glucose_mg_dl,
            calibration_frame_count: m.calibration_frames.len(),
        }
    }

    pub fn metadata(&self) -> MeasurementMetadata {
        MeasurementMetadata {
            sample_rate_fps: self.sample_rate_fps,
            resolution_um_per_px: self.resolution_um_per_px,
            bin_size: self.bin_size,
            glucose_mg_dl: self.glucose_mg_dl,
        }
    }
}

/// `dir/name.glkf` pairs with `dir/name.json`.
pub fn sidecar_path(container: &Path) -> PathBuf {
    container.with_extension("json")
}

pub fn encode_frames(frames: &[Frame]) -> Result<Vec<u8>> {
    let (rows, cols) = frames.first().map(Frame::dims).unwrap_or((0, 0));
    let mut out = Vec::with_capacity(HEADER_LEN + frames.len() * rows * cols * 4);
    out.extend_from_slice(&MAGIC);
    for v in [VERSION, dim(rows)?, dim(cols)?, dim(frames.len())?] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for f in frames {
        if f.dims() != (rows, cols) {
            return Err(Error::Format(format!(
                "frame {} is {:?}, expected {:?}",
                f.index(),
                f.dims(),
                (rows, cols)
            )));
        }
        for &p in f.pixels() {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
    }
    Ok(out)
}

fn dim(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Format(format!("dimension {n} exceeds u32")))
}

pub fn decode_frames(bytes: &[u8]) -> Result<Vec<Frame>> {
    if bytes.len() < HEADER_LEN || bytes[..4] != MAGIC {
        return Err(Error::Format("not a GLKF container".into()));
    }
    let word = |i: usize| {
        u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize
    };
    let (version, rows, cols, count) = (word(0), word(1), word(2), word(3));
    if version != VERSION as usize {
        return Err(Error::Format(format!("unsupported GLKF version {version}")));
    }
    let per_frame = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("frame size overflows".into()))?;
    let expected = per_frame
        .checked_mul(count)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format("container size overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "container holds {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    bytes[HEADER_LEN..]
        .chunks_exact(per_frame * 4)
        .take(count)
        .enumerate()
        .map(|(n, chunk)| {
            let pixels = chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
                .collect();
            Ok(Frame::new(rows, cols, n, pixels)?)
        })
        .collect()
}

/// Calibration frames first, then the timed frames.
pub fn write_measurement(container: &Path, m: &Measurement) -> Result<()> {
    let all: Vec<Frame> = m
        .calibration_frames
        .iter()
        .chain(&m.frames)
        .cloned()
        .collect();
    let bytes = encode_frames(&all)?;
    let mut w = BufWriter::new(File::create(container)?);
    w.write_all(&bytes)?;
    w.flush()?;
    write_json(&sidecar_path(container), &Sidecar::of(m))
}

/// Reads a container; the sidecar defaults to the container path with a
/// `.json` extension.
pub fn read_measurement(container: &Path, sidecar: Option<&Path>) -> Result<Measurement> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(container)?).read_to_end(&mut bytes)?;
    let frames = decode_frames(&bytes)?;
    let side_path = sidecar.map_or_else(|| sidecar_path(container), Path::to_path_buf);
    let side: Sidecar = read_json(&side_path)?;
    let k = side.calibration_frame_count;
    if k > frames.len() {
        return Err(Error::Format(format!(
            "sidecar claims {k} calibration frames, container has {}",
            frames.len()
        )));
    }
    let mut frames = frames;
    let timed: Vec<Frame> = frames
        .split_off(k)
        .into_iter()
        .enumerate()
        .map(|(n, f)| f.with_index(n))
        .collect();
    Ok(Measurement::new(timed, frames, side.metadata())?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let s = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    Ok(serde_json::from_str(&s)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let f = Frame::new(2, 3, 0, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.5]).unwrap();
        let b = encode_frames(std::slice::from_ref(&f)).unwrap();
        assert_eq!(&b[..4], b"GLKF");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(b[16..20].try_into().unwrap()), 1);
        assert_eq!(b.len(), 20 + 6 * 4);
        assert_eq!(decode_frames(&b).unwrap(), vec![f]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode_frames(b"NOPE").is_err());
        let f = Frame::constant(2, 2, 0, 1.0).unwrap();
        let mut b = encode_frames(&[f]).unwrap();
        b.pop();
        assert!(decode_frames(&b).is_err());
        b.push(0);
        b[4] = 2;
        assert!(decode_frames(&b).is_err());
    }
}
