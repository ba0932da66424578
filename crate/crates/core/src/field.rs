//! Sampled scalar light field on a square, centered grid.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{config, Error, Result};
use crate::image::IntensityImage;

/// Tolerance used when checking normalized mask coordinates against the frame.
const FRAME_EPS: f64 = 1e-9;

/// N x N complex amplitudes with physical pixel pitch and wavelength (both in mm).
///
/// Pixel `(i, j)` sits at `x = (j - (N-1)/2) * pitch`, `y = ((N-1)/2 - i) * pitch`,
/// so row 0 is the top of the frame and the origin is the frame center.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    n: usize,
    pitch: f64,
    wavelength: f64,
    samples: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(n: usize, pitch: f64, wavelength: f64) -> Result<Self> {
        validate_geometry(n, pitch, wavelength)?;
        Ok(Self {
            n,
            pitch,
            wavelength,
            samples: vec![Complex64::new(0.0, 0.0); n * n],
        })
    }

    pub fn from_samples(
        n: usize,
        pitch: f64,
        wavelength: f64,
        samples: Vec<Complex64>,
    ) -> Result<Self> {
        validate_geometry(n, pitch, wavelength)?;
        if samples.len() != n * n {
            return config(format!(
                "expected {} samples for a {n}x{n} grid, got {}",
                n * n,
                samples.len()
            ));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return config("field samples must be finite");
        }
        Ok(Self {
            n,
            pitch,
            wavelength,
            samples,
        })
    }

    /// Builds a field by evaluating `f(x, y)` at every pixel center.
    pub fn from_fn<F>(n: usize, pitch: f64, wavelength: f64, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Complex64 + Sync,
    {
        let mut field = Self::zeros(n, pitch, wavelength)?;
        let c = (n as f64 - 1.0) / 2.0;
        field
            .samples
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| {
                let y = (c - i as f64) * pitch;
                for (j, s) in row.iter_mut().enumerate() {
                    *s = f((j as f64 - c) * pitch, y);
                }
            });
        field.ensure_finite("from_fn")?;
        Ok(field)
    }

    pub fn grid_size(&self) -> usize {
        self.n
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.pitch
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Side length of the frame in mm.
    pub fn extent(&self) -> f64 {
        self.n as f64 * self.pitch
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.samples[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.samples[row * self.n + col] = value;
    }

    pub fn x_of(&self, col: usize) -> f64 {
        (col as f64 - (self.n as f64 - 1.0) / 2.0) * self.pitch
    }

    pub fn y_of(&self, row: usize) -> f64 {
        ((self.n as f64 - 1.0) / 2.0 - row as f64) * self.pitch
    }

    /// Same grid, pitch and wavelength.
    pub fn same_geometry(&self, other: &Self) -> bool {
        self.n == other.n && self.pitch == other.pitch && self.wavelength == other.wavelength
    }

    fn check_compatible(&self, other: &Self, op: &str) -> Result<()> {
        if self.same_geometry(other) {
            Ok(())
        } else {
            config(format!(
                "{op}: field geometry mismatch ({}px/{}mm/{}mm vs {}px/{}mm/{}mm)",
                self.n, self.pitch, self.wavelength, other.n, other.pitch, other.wavelength
            ))
        }
    }

    pub(crate) fn ensure_finite(&self, op: &str) -> Result<()> {
        if self
            .samples
            .par_iter()
            .all(|s| s.re.is_finite() && s.im.is_finite())
        {
            Ok(())
        } else {
            Err(Error::Config(format!("{op} produced non-finite samples")))
        }
    }

    fn zip_with<F>(&self, other: &Self, op: &str, f: F) -> Result<Self>
    where
        F: Fn(Complex64, Complex64) -> Complex64 + Sync,
    {
        self.check_compatible(other, op)?;
        let mut out = self.clone();
        out.samples
            .par_chunks_mut(self.n)
            .zip(other.samples.par_chunks(self.n))
            .for_each(|(dst, src)| {
                for (d, s) in dst.iter_mut().zip(src) {
                    *d = f(*d, *s);
                }
            });
        out.ensure_finite(op)?;
        Ok(out)
    }

    /// Ideal spatial-light-modulator product.
    pub fn pointwise_mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "pointwise_mul", |a, b| a * b)
    }

    /// Coherent combination of two paths (beam splitter run in reverse).
    pub fn pointwise_add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "pointwise_add", |a, b| a + b)
    }

    /// Multiplies every sample by a real gain.
    pub fn scale(&self, gain: f64) -> Result<Self> {
        if !gain.is_finite() {
            return config(format!("gain must be finite, got {gain}"));
        }
        let mut out = self.clone();
        out.samples.par_iter_mut().for_each(|s| *s *= gain);
        Ok(out)
    }

    /// Keeps pixels whose normalized center lies in the closed box spanned by
    /// two corners; everything else goes dark. Coordinates are fractions of the
    /// frame extent measured from the center, so the frame is `[-0.5, 0.5]^2`.
    pub fn mask_rect(&self, corner1: (f64, f64), corner2: (f64, f64)) -> Result<Self> {
        for v in [corner1.0, corner1.1, corner2.0, corner2.1] {
            if !v.is_finite() || v.abs() > 0.5 + FRAME_EPS {
                return config(format!("mask coordinate {v} outside [-0.5, 0.5]"));
            }
        }
        let (x_lo, x_hi) = min_max(corner1.0, corner2.0);
        let (y_lo, y_hi) = min_max(corner1.1, corner2.1);
        let n = self.n;
        let nf = n as f64;
        let c = (nf - 1.0) / 2.0;
        let mut out = self.clone();
        out.samples
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| {
                let ny = (c - i as f64) / nf;
                let row_in = ny >= y_lo && ny <= y_hi;
                for (j, s) in row.iter_mut().enumerate() {
                    let nx = (j as f64 - c) / nf;
                    if !(row_in && nx >= x_lo && nx <= x_hi) {
                        *s = Complex64::new(0.0, 0.0);
                    }
                }
            });
        Ok(out)
    }

    /// Zeroes everything outside the centered `width x width` square (mm).
    pub fn crop(&self, width: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return config(format!("crop width must be positive, got {width}"));
        }
        let half = width / 2.0;
        let mut out = self.clone();
        let n = self.n;
        let pitch = self.pitch;
        let c = (n as f64 - 1.0) / 2.0;
        out.samples
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| {
                let y = ((c - i as f64) * pitch).abs();
                for (j, s) in row.iter_mut().enumerate() {
                    let x = ((j as f64 - c) * pitch).abs();
                    if x > half || y > half {
                        *s = Complex64::new(0.0, 0.0);
                    }
                }
            });
        Ok(out)
    }

    /// Point reflection through the frame center, `U(x, y) -> U(-x, -y)`.
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        out.samples.reverse();
        out
    }

    pub fn intensity(&self) -> IntensityImage {
        let samples = self.samples.par_iter().map(|s| s.norm_sqr()).collect();
        IntensityImage::from_parts(self.n, self.pitch, samples)
    }

    /// Total power, `sum |U|^2 * pitch^2`.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() * self.pitch * self.pitch
    }
}

fn min_max(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn validate_geometry(n: usize, pitch: f64, wavelength: f64) -> Result<()> {
    if n < 2 {
        return config(format!("grid size must be at least 2, got {n}"));
    }
    if !(pitch > 0.0) || !pitch.is_finite() {
        return config(format!("pixel pitch must be positive, got {pitch}"));
    }
    if !(wavelength > 0.0) || !wavelength.is_finite() {
        return config(format!("wavelength must be positive, got {wavelength}"));
    }
    Ok(())
}
