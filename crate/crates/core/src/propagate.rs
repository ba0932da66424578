//! Fresnel propagation between planes sampled on the same grid.
//!
//! Both backends evaluate the same discrete sum
//!
//! ```text
//! U1(x1, y1) = -1/(i lambda z) e^{-ikz} sum_{x0,y0} U0(x0, y0) e^{-(ik/2z)[(x0-x1)^2 + (y0-y1)^2]} pitch^2
//! ```
//!
//! `Direct` walks the double sum for every output pixel; `Fft` realizes it as
//! a linear convolution through a zero-padded transform of size >= 2N-1.

use std::f64::consts::PI;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{config, Error, Result};
use crate::field::ComplexField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    Direct,
    #[default]
    Fft,
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Backend::Direct),
            "fft" => Ok(Backend::Fft),
            other => config(format!("unknown backend `{other}` (expected direct|fft)")),
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Direct => "direct",
            Backend::Fft => "fft",
        })
    }
}

pub fn propagate(field: &ComplexField, z: f64, backend: Backend) -> Result<ComplexField> {
    match backend {
        Backend::Direct => fresnel_propagate_direct(field, z),
        Backend::Fft => fresnel_propagate_fft(field, z),
    }
}

/// `e^{-i 2 pi t}` with `t` reduced modulo one first, so large optical path
/// lengths do not lose phase precision.
pub(crate) fn cis_turns(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * t.fract())
}

/// Constant in front of the sum: `-1/(i lambda z) * e^{-ikz} * pitch^2`.
fn prefactor(field: &ComplexField, z: f64) -> Complex64 {
    let lambda = field.wavelength();
    let pitch = field.pixel_pitch();
    let amp = Complex64::new(0.0, 1.0 / (lambda * z));
    amp * cis_turns(z / lambda) * (pitch * pitch)
}

/// One-axis kernel `e^{-i pi (d pitch)^2 / (lambda z)}` for `d = -(N-1)..=N-1`,
/// stored at index `d + N - 1`.
fn axis_kernel(n: usize, pitch: f64, lambda: f64, z: f64) -> Vec<Complex64> {
    let rate = pitch * pitch / (lambda * z);
    (0..2 * n - 1)
        .map(|k| {
            let d = k as f64 - (n as f64 - 1.0);
            // exponent in turns: d^2 * rate / 2
            cis_turns(0.5 * d * d * rate)
        })
        .collect()
}

fn check_distance(z: f64) -> Result<()> {
    if z == 0.0 || !z.is_finite() {
        return config(format!("propagation distance must be finite and nonzero, got {z}"));
    }
    Ok(())
}

/// Direct quadrature of the Fresnel sum. Each output pixel accumulates its
/// source sum in a fixed row-major order, so the result does not depend on the
/// number of worker threads.
pub fn fresnel_propagate_direct(field: &ComplexField, z: f64) -> Result<ComplexField> {
    check_distance(z)?;
    let n = field.grid_size();
    let kern = axis_kernel(n, field.pixel_pitch(), field.wavelength(), z);
    let pref = prefactor(field, z);
    let src = field.samples();
    let mut out = ComplexField::zeros(n, field.pixel_pitch(), field.wavelength())?;
    out.samples_mut()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i1, row)| {
            for (j1, dst) in row.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for i0 in 0..n {
                    let ky = kern[i0 + n - 1 - i1];
                    let src_row = &src[i0 * n..(i0 + 1) * n];
                    let kx = &kern[n - 1 - j1..2 * n - 1 - j1];
                    let mut inner = Complex64::new(0.0, 0.0);
                    for (u, k) in src_row.iter().zip(kx) {
                        inner += u * k;
                    }
                    acc += inner * ky;
                }
                *dst = acc * pref;
            }
        });
    out.ensure_finite("fresnel_propagate_direct")?;
    Ok(out)
}

/// Smallest size `>= min` whose only prime factors are 2, 3 and 5.
pub(crate) fn smooth_size(min: usize) -> usize {
    let mut m = min.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

fn fft_rows(data: &mut [Complex64], width: usize, rows: usize, fft: &Arc<dyn Fft<f64>>) {
    let scratch_len = fft.get_inplace_scratch_len();
    data[..rows * width]
        .par_chunks_mut(width)
        .for_each_init(
            || vec![Complex64::new(0.0, 0.0); scratch_len],
            |scratch, row| fft.process_with_scratch(row, scratch),
        );
}

fn transpose(src: &[Complex64], m: usize) -> Vec<Complex64> {
    let mut dst = vec![Complex64::new(0.0, 0.0); m * m];
    dst.par_chunks_mut(m).enumerate().for_each(|(r, row)| {
        for (c, d) in row.iter_mut().enumerate() {
            *d = src[c * m + r];
        }
    });
    dst
}

/// Convolution-theorem evaluation of the same sum as
/// [`fresnel_propagate_direct`]. The kernel is separable, so its 2-D spectrum
/// is the outer product of one 1-D transform.
pub fn fresnel_propagate_fft(field: &ComplexField, z: f64) -> Result<ComplexField> {
    check_distance(z)?;
    let n = field.grid_size();
    let m = smooth_size(2 * n - 1);
    let kern = axis_kernel(n, field.pixel_pitch(), field.wavelength(), z);

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);

    // kernel sample for offset d lives at index d mod m
    let mut kspec = vec![Complex64::new(0.0, 0.0); m];
    for (k, v) in kern.iter().enumerate() {
        let d = k as isize - (n as isize - 1);
        kspec[d.rem_euclid(m as isize) as usize] = *v;
    }
    fwd.process(&mut kspec);

    let mut buf = vec![Complex64::new(0.0, 0.0); m * m];
    for (r, row) in field.samples().chunks(n).enumerate() {
        buf[r * m..r * m + n].copy_from_slice(row);
    }
    // rows beyond n are zero and stay zero under the row transform
    fft_rows(&mut buf, m, n, &fwd);
    let mut spec = transpose(&buf, m);
    fft_rows(&mut spec, m, m, &fwd);

    let norm = prefactor(field, z) / (m as f64 * m as f64);
    spec.par_chunks_mut(m).enumerate().for_each(|(v, row)| {
        let kv = kspec[v] * norm;
        for (s, ku) in row.iter_mut().zip(&kspec) {
            *s *= ku * kv;
        }
    });

    fft_rows(&mut spec, m, m, &inv);
    let mut back = transpose(&spec, m);
    fft_rows(&mut back, m, n, &inv);

    let mut out = ComplexField::zeros(n, field.pixel_pitch(), field.wavelength())?;
    out.samples_mut()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(r, row)| row.copy_from_slice(&back[r * m..r * m + n]));
    out.ensure_finite("fresnel_propagate_fft")?;
    Ok(out)
}

/// Relative L2 distance `||a - b|| / ||b||`.
pub fn relative_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LAMBDA: f64 = 2e-4;

    fn random_field(n: usize, pitch: f64, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = (0..n * n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        ComplexField::from_samples(n, pitch, LAMBDA, s).unwrap()
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(127), 128);
        assert_eq!(smooth_size(499), 500);
        assert_eq!(smooth_size(2009), 2025);
        assert_eq!(smooth_size(7), 8);
    }

    #[test]
    fn zero_distance_is_rejected() {
        let f = random_field(4, 0.01, 1);
        assert!(fresnel_propagate_direct(&f, 0.0).is_err());
        assert!(fresnel_propagate_fft(&f, 0.0).is_err());
    }

    #[test]
    fn zero_field_stays_zero() {
        let f = ComplexField::zeros(16, 0.01, LAMBDA).unwrap();
        for b in [Backend::Direct, Backend::Fft] {
            let out = propagate(&f, 15.0, b).unwrap();
            assert!(out.samples().iter().all(|s| s.norm() == 0.0));
        }
    }

    #[test]
    fn point_source_matches_hand_evaluated_kernel() {
        // N even: put the source on pixel (n/2, n/2) and evaluate the kernel by hand.
        let n = 64;
        let pitch = 0.004;
        let z = 15.0;
        let mut f = ComplexField::zeros(n, pitch, LAMBDA).unwrap();
        f.set(32, 32, Complex64::new(1.0, 0.0));
        let out = fresnel_propagate_direct(&f, z).unwrap();
        let k = 2.0 * PI / LAMBDA;
        let (x0, y0) = (f.x_of(32), f.y_of(32));
        for &(r, c) in &[(0usize, 0usize), (32, 32), (10, 50), (63, 1), (31, 40)] {
            let (x1, y1) = (f.x_of(c), f.y_of(r));
            let d2 = (x0 - x1).powi(2) + (y0 - y1).powi(2);
            let want = Complex64::new(0.0, 1.0 / (LAMBDA * z))
                * Complex64::from_polar(1.0, -k * z)
                * Complex64::from_polar(1.0, -k / (2.0 * z) * d2)
                * (pitch * pitch);
            let got = out.get(r, c);
            assert!((got - want).norm() <= 1e-12 * want.norm().max(1e-300) * 1e3, "({r},{c}) {got} vs {want}");
            assert!((got - want).norm() / want.norm() < 1e-9);
        }
    }

    #[test]
    fn linearity() {
        let f = random_field(16, 0.004, 2);
        let g = random_field(16, 0.004, 3);
        let (alpha, beta) = (0.7, -1.3);
        let combo = f.scale(alpha).unwrap().pointwise_add(&g.scale(beta).unwrap()).unwrap();
        for b in [Backend::Direct, Backend::Fft] {
            let lhs = propagate(&combo, 5.0, b).unwrap();
            let rhs = propagate(&f, 5.0, b)
                .unwrap()
                .scale(alpha)
                .unwrap()
                .pointwise_add(&propagate(&g, 5.0, b).unwrap().scale(beta).unwrap())
                .unwrap();
            assert!(relative_l2(lhs.samples(), rhs.samples()) < 1e-12);
        }
    }

    #[test]
    fn fft_matches_direct_on_small_grid() {
        let f = random_field(24, 0.004, 4);
        for z in [5.0, -15.0, 200.0] {
            let d = fresnel_propagate_direct(&f, z).unwrap();
            let q = fresnel_propagate_fft(&f, z).unwrap();
            assert!(relative_l2(q.samples(), d.samples()) < 1e-10, "z = {z}");
        }
    }

    #[test]
    fn odd_grid_matches_too() {
        let f = random_field(15, 0.002, 5);
        let d = fresnel_propagate_direct(&f, 15.0).unwrap();
        let q = fresnel_propagate_fft(&f, 15.0).unwrap();
        assert!(relative_l2(q.samples(), d.samples()) < 1e-10);
    }

    #[test]
    fn backend_parses() {
        assert_eq!("direct".parse::<Backend>().unwrap(), Backend::Direct);
        assert_eq!("fft".parse::<Backend>().unwrap(), Backend::Fft);
        assert!("gpu".parse::<Backend>().is_err());
    }
}
