//! Square-aperture diffraction checked against numerical quadrature of the
//! continuous Fresnel integral.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{config, Result};
use crate::field::ComplexField;
use crate::propagate::{propagate, relative_l2, Backend};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApertureSetup {
    pub grid: usize,
    pub pitch: f64,
    pub wavelength: f64,
    pub distance: f64,
    /// Aperture side in pixels; edges fall on pixel boundaries.
    pub aperture_px: usize,
    /// Simpson intervals across the aperture (even).
    pub intervals: usize,
}

impl Default for ApertureSetup {
    fn default() -> Self {
        Self {
            grid: 128,
            pitch: 0.005,
            wavelength: 5e-4,
            distance: 100.0,
            aperture_px: 32,
            intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApertureReport {
    pub relative_l2: f64,
    pub fresnel_number: f64,
}

impl ApertureSetup {
    pub fn side(&self) -> f64 {
        self.aperture_px as f64 * self.pitch
    }

    pub fn aperture_field(&self) -> Result<ComplexField> {
        if self.aperture_px == 0 || self.aperture_px > self.grid || (self.grid - self.aperture_px) % 2 != 0 {
            return config("aperture must be a centered block of pixels inside the grid");
        }
        ComplexField::from_fn(self.grid, self.pitch, self.wavelength, |_, _| Complex64::new(1.0, 0.0))?
            .crop(self.side())
    }
}

/// `int_{-a/2}^{a/2} exp(-i pi (s - x)^2 / (lambda z)) ds` by composite Simpson.
pub fn fresnel_integral_1d(x: f64, side: f64, wavelength: f64, z: f64, intervals: usize) -> Complex64 {
    let m = intervals + intervals % 2;
    let h = side / m as f64;
    let g = |s: f64| Complex64::from_polar(1.0, -PI * (s - x) * (s - x) / (wavelength * z));
    let mut acc = g(-side / 2.0) + g(side / 2.0);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += g(-side / 2.0 + i as f64 * h) * w;
    }
    acc * (h / 3.0)
}

/// Continuous Fresnel pattern of the aperture sampled at the grid pixels.
pub fn aperture_oracle(setup: &ApertureSetup) -> Result<ComplexField> {
    let (n, lambda, z) = (setup.grid, setup.wavelength, setup.distance);
    let c = (n as f64 - 1.0) / 2.0;
    let line: Vec<Complex64> = (0..n)
        .map(|j| fresnel_integral_1d((j as f64 - c) * setup.pitch, setup.side(), lambda, z, setup.intervals))
        .collect();
    let pref = Complex64::new(0.0, 1.0 / (lambda * z)) * Complex64::from_polar(1.0, -2.0 * PI * (z / lambda).fract());
    let samples = (0..n * n)
        .map(|idx| pref * line[idx / n] * line[idx % n])
        .collect();
    // x and y grids coincide and the pattern is symmetric, so row order is immaterial
    ComplexField::from_samples(n, setup.pitch, lambda, samples)
}

pub fn validate_aperture(setup: &ApertureSetup, backend: Backend) -> Result<ApertureReport> {
    let field = setup.aperture_field()?;
    let sim = propagate(&field, setup.distance, backend)?;
    let oracle = aperture_oracle(setup)?;
    let side = setup.side();
    Ok(ApertureReport {
        relative_l2: relative_l2(sim.samples(), oracle.samples()),
        fresnel_number: side * side / (4.0 * setup.wavelength * setup.distance),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_matches_closed_form_in_far_field() {
        // tiny aperture: integral ~ side * exp(-i pi x^2 / (lambda z))
        let (side, lambda, z, x) = (1e-4, 5e-4, 1000.0, 0.3);
        let got = fresnel_integral_1d(x, side, lambda, z, 200);
        let want = Complex64::from_polar(side, -PI * x * x / (lambda * z));
        assert!((got - want).norm() / side < 1e-3);
    }

    #[test]
    fn aperture_has_requested_width() {
        let s = ApertureSetup::default();
        let f = s.aperture_field().unwrap();
        let lit = f.samples().iter().filter(|v| v.re == 1.0).count();
        assert_eq!(lit, 32 * 32);
    }

    #[test]
    fn small_aperture_validates() {
        let s = ApertureSetup {
            grid: 32,
            pitch: 0.005,
            wavelength: 5e-4,
            distance: 100.0,
            aperture_px: 8,
            intervals: 400,
        };
        let r = validate_aperture(&s, Backend::Fft).unwrap();
        assert!(r.relative_l2 < 1e-2, "{}", r.relative_l2);
    }
}
