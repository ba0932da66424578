//! Intensity images and their on-disk form.
//!
//! An image is written as a binary 16-bit PGM (P5, big-endian samples, max
//! value 65535, image maximum mapped to 65535) plus a sidecar with the unscaled
//! intensities as little-endian `f64` in the same row-major order.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    n: usize,
    pitch: f64,
    samples: Vec<f64>,
}

impl IntensityImage {
    pub(crate) fn from_parts(n: usize, pitch: f64, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), n * n);
        Self { n, pitch, samples }
    }

    pub fn new(n: usize, pitch: f64, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != n * n {
            return Err(Error::Config(format!(
                "expected {} intensity samples, got {}",
                n * n,
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(
                "intensities must be finite and non-negative".into(),
            ));
        }
        Ok(Self { n, pitch, samples })
    }

    pub fn grid_size(&self) -> usize {
        self.n
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.pitch
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.samples[row * self.n + col]
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(0.0, f64::max)
    }

    pub fn total(&self) -> f64 {
        self.samples.iter().sum()
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            n: self.n,
            pitch: self.pitch,
            samples: self.samples.iter().map(|v| v * gain).collect(),
        }
    }

    /// Point reflection through the frame center.
    pub fn mirrored(&self) -> Self {
        let mut samples = self.samples.clone();
        samples.reverse();
        Self {
            n: self.n,
            pitch: self.pitch,
            samples,
        }
    }

    /// Writes `path` (PGM) and `path` with extension `f64` (raw sidecar).
    /// Returns the sidecar path.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        let raw = path.with_extension("f64");
        write_file(path, &self.pgm_bytes())?;
        write_file(&raw, &self.raw_bytes())?;
        Ok(raw)
    }

    pub fn pgm_bytes(&self) -> Vec<u8> {
        let header = format!("P5\n{} {}\n65535\n", self.n, self.n);
        let max = self.max();
        let mut out = Vec::with_capacity(header.len() + 2 * self.samples.len());
        out.extend_from_slice(header.as_bytes());
        for v in &self.samples {
            let q = if max > 0.0 {
                (v / max * 65535.0).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            };
            out.extend_from_slice(&q.to_be_bytes());
        }
        out
    }

    pub fn raw_bytes(&self) -> Vec<u8> {
        self.samples.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    /// Reads the raw sidecar back; the grid is inferred from its length.
    pub fn read_raw(path: &Path, pitch: f64) -> Result<Self> {
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|source| Error::Io {
                path: path.to_owned(),
                source,
            })?;
        let count = bytes.len() / 8;
        let n = (count as f64).sqrt().round() as usize;
        if bytes.len() % 8 != 0 || n * n != count {
            return Err(Error::Config(format!(
                "{} is not a square f64 image",
                path.display()
            )));
        }
        let samples = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Self::new(n, pitch, samples)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_owned(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    w.write_all(bytes).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Normalized cross-correlation of two mean-removed images, in `[-1, 1]`.
pub fn xcorr(a: &IntensityImage, b: &IntensityImage) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::Metric(format!(
            "image size mismatch: {} vs {}",
            a.n, b.n
        )));
    }
    let len = a.samples.len() as f64;
    let ma = a.samples.iter().sum::<f64>() / len;
    let mb = b.samples.iter().sum::<f64>() / len;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.samples.iter().zip(&b.samples) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Metric("zero-variance image".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}
