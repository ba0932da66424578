//! Thin lenses, lens spacing and the two-lens cropping experiment.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{config, Result};
use crate::field::ComplexField;
use crate::image::xcorr;
use crate::propagate::{cis_turns, propagate, Backend};

/// One `lens` device: a thin lens described by its two surface radii, followed
/// by free-space propagation to the next plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensSpec {
    pub radius1: f64,
    pub radius2: f64,
    pub refractive_index: f64,
    pub thickness: f64,
    pub distance_after: f64,
    /// Side of a square stop in front of the lens (mm); `None` is unobstructed.
    pub aperture: Option<f64>,
    pub scale_x: f64,
    pub scale_y: f64,
}

impl LensSpec {
    /// Symmetric biconvex lens of focal length `f` (glass of index 1.5,
    /// 2 mm thick) followed by `distance` of free space.
    pub fn thin(f: f64, distance: f64) -> Self {
        let n = 1.5;
        let r = 2.0 * (n - 1.0) * f;
        Self {
            radius1: r,
            radius2: -r,
            refractive_index: n,
            thickness: 2.0,
            distance_after: distance,
            aperture: None,
            scale_x: 1.0,
            scale_y: 1.0,
        }
    }

    pub fn with_aperture(mut self, side: f64) -> Self {
        self.aperture = Some(side);
        self
    }

    /// Lensmaker's equation, `1/f = (n - 1)(1/R1 - 1/R2)`.
    pub fn focal_length(&self) -> f64 {
        1.0 / ((self.refractive_index - 1.0) * (1.0 / self.radius1 - 1.0 / self.radius2))
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.radius1,
            self.radius2,
            self.refractive_index,
            self.thickness,
            self.distance_after,
            self.scale_x,
            self.scale_y,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return config("lens parameters must be finite");
        }
        if self.radius1 == 0.0 || self.radius2 == 0.0 {
            return config("lens radii must be nonzero");
        }
        if !(self.refractive_index > 1.0) {
            return config(format!(
                "refractive index must exceed 1, got {}",
                self.refractive_index
            ));
        }
        let f = self.focal_length();
        if !f.is_finite() || f == 0.0 {
            return config("lens has no focal power (equal radii)");
        }
        if self.thickness < 0.0 {
            return config("lens thickness must be non-negative");
        }
        if self.distance_after == 0.0 {
            return config("distance after a lens must be nonzero");
        }
        if let Some(a) = self.aperture {
            if !(a > 0.0) || !a.is_finite() {
                return config(format!("aperture must be positive, got {a}"));
            }
        }
        if !(self.scale_x > 0.0 && self.scale_y > 0.0) {
            return config("lens scale factors must be positive");
        }
        Ok(())
    }
}

/// Aperture, lens phase `e^{-ik n thickness} e^{(ik/2|f|)(x^2+y^2)}`,
/// propagation over `distance_after`, then output coordinate dilation.
pub fn apply_lens(field: &ComplexField, spec: &LensSpec, backend: Backend) -> Result<ComplexField> {
    spec.validate()?;
    let mut cur = match spec.aperture {
        Some(a) => field.crop(a)?,
        None => field.clone(),
    };
    let lambda = field.wavelength();
    let f = spec.focal_length().abs();
    let piston = cis_turns(spec.refractive_index * spec.thickness / lambda);
    let n = field.grid_size();
    let pitch = field.pixel_pitch();
    let c = (n as f64 - 1.0) / 2.0;
    cur.samples_mut()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| {
            let y = (c - i as f64) * pitch;
            for (j, s) in row.iter_mut().enumerate() {
                let x = (j as f64 - c) * pitch;
                *s *= piston * cis_turns(-(x * x + y * y) / (2.0 * lambda * f));
            }
        });
    let out = propagate(&cur, spec.distance_after, backend)?;
    if spec.scale_x == 1.0 && spec.scale_y == 1.0 {
        Ok(out)
    } else {
        Ok(dilate(&out, spec.scale_x, spec.scale_y))
    }
}

/// `out(x, y) = in(x / sx, y / sy)`, nearest source pixel, dark outside.
fn dilate(field: &ComplexField, sx: f64, sy: f64) -> ComplexField {
    let n = field.grid_size();
    let c = (n as f64 - 1.0) / 2.0;
    let src = field.samples();
    let mut out = field.clone();
    out.samples_mut()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| {
            let si = (c + (i as f64 - c) / sy).round();
            for (j, s) in row.iter_mut().enumerate() {
                let sj = (c + (j as f64 - c) / sx).round();
                *s = if si >= 0.0 && sj >= 0.0 && (si as usize) < n && (sj as usize) < n {
                    src[si as usize * n + sj as usize]
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
        });
    out
}

/// Distance from lens `i` to the next plane so that the quadratic phases left
/// by `n_mults` earlier products are cancelled:
/// `z_i = -1 / (1/f_i - (n_mults + 1)/z_prev)`.
pub fn lens_spacing(f_i: f64, z_prev: f64, n_mults: u32) -> Result<f64> {
    if f_i == 0.0 || z_prev == 0.0 {
        return config("focal length and previous spacing must be nonzero");
    }
    let denom = 1.0 / f_i - (n_mults as f64 + 1.0) / z_prev;
    if denom == 0.0 || !denom.is_finite() {
        return config("lens spacing diverges (collimated output)");
    }
    Ok(-1.0 / denom)
}

/// `n_squares x n_squares` board of unit and dark squares over `extent` mm.
/// Square `(r, c)` covers the pixels with `floor(i * n_squares / grid) = r`.
pub fn checkerboard(n_squares: usize, extent: f64, grid: usize, wavelength: f64) -> Result<ComplexField> {
    if n_squares < 2 || n_squares > grid {
        return config(format!("cannot draw {n_squares} squares on a {grid}-pixel grid"));
    }
    if !(extent > 0.0) {
        return config("checkerboard extent must be positive");
    }
    let mut f = ComplexField::zeros(grid, extent / grid as f64, wavelength)?;
    f.samples_mut()
        .par_chunks_mut(grid)
        .enumerate()
        .for_each(|(i, row)| {
            let sr = i * n_squares / grid;
            for (j, s) in row.iter_mut().enumerate() {
                let sc = j * n_squares / grid;
                if (sr + sc) % 2 == 1 {
                    *s = Complex64::new(1.0, 0.0);
                }
            }
        });
    Ok(f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropSetup {
    pub extent: f64,
    pub n_squares: usize,
    pub backend: Backend,
}

impl Default for CropSetup {
    fn default() -> Self {
        Self {
            extent: 4.0,
            n_squares: 8,
            backend: Backend::Fft,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentResult {
    pub wavelength: f64,
    pub focal_length: f64,
    pub crop_width: f64,
    pub grid: usize,
    pub fidelity: f64,
}

/// Checkerboard at lens 1, lens 2 at `2f`, screen `2f` behind lens 2, with
/// the beam cropped at lens 2. Fidelity is the correlation of the screen
/// intensity with the point-reflected input.
pub fn cropping_experiment(
    wavelength: f64,
    focal: f64,
    crop_width: f64,
    grid: usize,
    setup: &CropSetup,
) -> Result<ExperimentResult> {
    if !(wavelength > 0.0 && focal > 0.0 && crop_width > 0.0) {
        return config("cropping experiment parameters must be positive");
    }
    let input = checkerboard(setup.n_squares, setup.extent, grid, wavelength)?;
    let lens = LensSpec::thin(focal, 2.0 * focal);
    let mid = apply_lens(&input, &lens, setup.backend)?.crop(crop_width)?;
    let out = apply_lens(&mid, &lens, setup.backend)?;
    let fidelity = xcorr(&out.intensity(), &input.intensity().mirrored())?;
    Ok(ExperimentResult {
        wavelength,
        focal_length: focal,
        crop_width,
        grid,
        fidelity,
    })
}

/// Wall time of one `lens` device on a `grid`-pixel random field.
pub fn bench_lens(grid: usize, backend: Backend) -> Result<Duration> {
    let pitch = 0.001;
    let field = ComplexField::from_fn(grid, pitch, 2e-4, |x, y| {
        Complex64::new((x * 977.0).sin(), (y * 613.0).cos())
    })?;
    let spec = LensSpec::thin(15.0, 15.0);
    let start = Instant::now();
    let out = apply_lens(&field, &spec, backend)?;
    let elapsed = start.elapsed();
    std::hint::black_box(out);
    Ok(elapsed)
}
