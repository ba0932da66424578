//! Digit cells on the image diagonal, band encodings, and the detector that
//! turns cell intensities back into integer digits.
//!
//! Cell `0` is the lower-left cell of the diagonal and cell `n_cells - 1` the
//! upper-right one, so heavier digits sit further up and to the right.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{config, Error, Result};
use crate::field::ComplexField;
use crate::image::IntensityImage;
use crate::modmul::DigitVector;

/// Largest digit the detector will report without an expected vector
/// (twelve stops of dynamic range).
pub const MAX_DIGIT: u64 = 1 << 12;

/// RMS rounding residual accepted by the blind scale search.
const BLIND_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellLayout {
    pub grid: usize,
    pub n_cells: usize,
    pub cell_px: usize,
}

impl CellLayout {
    pub fn new(grid: usize, n_cells: usize, cell_px: usize) -> Result<Self> {
        if n_cells == 0 || cell_px == 0 || n_cells * cell_px > grid {
            return config(format!(
                "{n_cells} cells of {cell_px} px do not fit a {grid}-pixel grid"
            ));
        }
        Ok(Self {
            grid,
            n_cells,
            cell_px,
        })
    }

    /// Largest cell size whose block can be centered exactly on the grid.
    pub fn fit(grid: usize, n_cells: usize) -> Result<Self> {
        Self::fit_within(grid, n_cells, grid)
    }

    /// As [`CellLayout::fit`], but the block may span at most `width_px`.
    pub fn fit_within(grid: usize, n_cells: usize, width_px: usize) -> Result<Self> {
        if n_cells == 0 {
            return config("layout needs at least one cell");
        }
        let mut px = width_px.min(grid) / n_cells;
        if px > 1 && (grid - n_cells * px) % 2 == 1 {
            px -= 1;
        }
        Self::new(grid, n_cells, px)
    }

    /// First pixel row/column of the centered block.
    pub fn start(&self) -> usize {
        (self.grid - self.n_cells * self.cell_px) / 2
    }

    /// Top-left pixel `(row, col)` of cell `i`.
    pub fn cell_origin(&self, i: usize) -> (usize, usize) {
        let s = self.start();
        (s + (self.n_cells - 1 - i) * self.cell_px, s + i * self.cell_px)
    }

    /// Center pixel of cell `i` (the upper-left of the four for even cells).
    pub fn cell_center(&self, i: usize) -> (usize, usize) {
        let (r, c) = self.cell_origin(i);
        let h = (self.cell_px - 1) / 2;
        (r + h, c + h)
    }
}

/// Cell values for a digit vector whose digit of weight `2^e` goes to cell
/// `lsb_cell + stride * e`; all other cells are zero.
pub fn diagonal_cells(values: &DigitVector, n_cells: usize, lsb_cell: usize, stride: usize) -> Result<Vec<f64>> {
    let len = values.len();
    let top = lsb_cell + stride.max(1) * (len - 1);
    if top >= n_cells {
        return config(format!(
            "{len} digits from cell {lsb_cell} with stride {stride} overrun {n_cells} cells"
        ));
    }
    let mut cells = vec![0.0; n_cells];
    for (e, &d) in values.digits().iter().rev().enumerate() {
        cells[lsb_cell + stride.max(1) * e] = d as f64;
    }
    Ok(cells)
}

/// Uniform squares of amplitude `v / max(values)` along the diagonal.
pub fn encode_cells(cells: &[f64], layout: &CellLayout, pitch: f64, wavelength: f64) -> Result<ComplexField> {
    if cells.len() != layout.n_cells {
        return config(format!(
            "expected {} cell values, got {}",
            layout.n_cells,
            cells.len()
        ));
    }
    if cells.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return config("cell values must be finite and non-negative");
    }
    let mut field = ComplexField::zeros(layout.grid, pitch, wavelength)?;
    let max = cells.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(field);
    }
    for (i, &v) in cells.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let (r0, c0) = layout.cell_origin(i);
        for r in r0..r0 + layout.cell_px {
            for c in c0..c0 + layout.cell_px {
                field.set(r, c, Complex64::new(v / max, 0.0));
            }
        }
    }
    Ok(field)
}

/// Diagonal encoding with the most significant digit in the top cell; with
/// `interleave` every other cell is a dark guard cell.
pub fn encode_diagonal(
    values: &DigitVector,
    layout: &CellLayout,
    interleave: bool,
    pitch: f64,
    wavelength: f64,
) -> Result<ComplexField> {
    let stride = if interleave { 2 } else { 1 };
    let span = stride * (values.len() - 1) + 1;
    if span > layout.n_cells {
        return config(format!(
            "{} digits need {span} cells, layout has {}",
            values.len(),
            layout.n_cells
        ));
    }
    let cells = diagonal_cells(values, layout.n_cells, layout.n_cells - span, stride)?;
    encode_cells(&cells, layout, pitch, wavelength)
}

/// Full-width horizontal bands, most significant digit at the top.
pub fn encode_banded(values: &DigitVector, grid: usize, pitch: f64, wavelength: f64) -> Result<ComplexField> {
    let n = values.len();
    if n > grid {
        return config(format!("{n} bands do not fit {grid} rows"));
    }
    let max = values.max_digit() as f64;
    let mut field = ComplexField::zeros(grid, pitch, wavelength)?;
    if max == 0.0 {
        return Ok(field);
    }
    for (b, &d) in values.digits().iter().enumerate() {
        let amp = Complex64::new(d as f64 / max, 0.0);
        for r in b * grid / n..(b + 1) * grid / n {
            for c in 0..grid {
                field.set(r, c, amp);
            }
        }
    }
    Ok(field)
}

/// Cells read by a detector: `first, first + step, ...`, `count` of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectorSlots {
    pub first: usize,
    pub step: usize,
    pub count: usize,
}

impl DetectorSlots {
    pub fn all(n_cells: usize) -> Self {
        Self {
            first: 0,
            step: 1,
            count: n_cells,
        }
    }

    /// Cell indices from the heaviest slot down to the lightest.
    pub fn cells_msb_first(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.count).rev().map(move |j| self.first + j * self.step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorReadout {
    /// Integrated intensity per slot, most significant first.
    pub raw: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub fitted_scale: f64,
    pub digits: Vec<u64>,
    /// Present when an expected vector was supplied.
    pub max_abs_err: Option<f64>,
    pub rms_err: Option<f64>,
}

impl DetectorReadout {
    pub fn digit_vector(&self) -> DigitVector {
        DigitVector::new(self.digits.clone()).unwrap_or_else(|_| DigitVector::zero())
    }

    /// Key/value record, one field per line.
    pub fn to_record(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.6e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.6}"));
        let mut s = String::new();
        let _ = writeln!(s, "raw = {}", join(&self.raw));
        let _ = writeln!(s, "amplitudes = {}", join(&self.amplitudes));
        let _ = writeln!(
            s,
            "digits = {}",
            self.digits
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(" ")
        );
        let _ = writeln!(s, "fitted_scale = {:.6e}", self.fitted_scale);
        let _ = writeln!(s, "max_abs_err = {}", opt(self.max_abs_err));
        let _ = writeln!(s, "rms_err = {}", opt(self.rms_err));
        s
    }
}

fn integrate_cells(img: &IntensityImage, layout: &CellLayout, slots: &DetectorSlots) -> Result<Vec<f64>> {
    if img.grid_size() != layout.grid {
        return config(format!(
            "layout is for a {}-pixel grid, image has {}",
            layout.grid,
            img.grid_size()
        ));
    }
    let last = slots.first + slots.step * slots.count.saturating_sub(1);
    if slots.count == 0 || last >= layout.n_cells {
        return config(format!(
            "detector slots end at cell {last}, layout has {}",
            layout.n_cells
        ));
    }
    Ok(slots
        .cells_msb_first()
        .map(|i| {
            let (r0, c0) = layout.cell_origin(i);
            let mut acc = 0.0;
            for r in r0..r0 + layout.cell_px {
                for c in c0..c0 + layout.cell_px {
                    acc += img.get(r, c);
                }
            }
            acc
        })
        .collect())
}

fn round_digit(v: f64) -> u64 {
    v.round().max(0.0) as u64
}

/// Integrates each slot, takes square roots and fits one scale factor.
///
/// With `expected` the scale is the least-squares fit to it; `expected` is
/// left-padded with zeros to the slot count. Without it, the brightest slot
/// is tried as each integer `1..=4096` and the first scale whose rounding
/// residual is small enough wins.
pub fn detect(
    img: &IntensityImage,
    layout: &CellLayout,
    slots: &DetectorSlots,
    expected: Option<&DigitVector>,
) -> Result<DetectorReadout> {
    let raw = integrate_cells(img, layout, slots)?;
    let amplitudes: Vec<f64> = raw.iter().map(|v| v.sqrt()).collect();
    let aa: f64 = amplitudes.iter().map(|a| a * a).sum();

    if let Some(exp) = expected {
        if exp.len() > slots.count {
            return config(format!(
                "expected {} digits but the detector reads {} slots",
                exp.len(),
                slots.count
            ));
        }
        let e: Vec<f64> = exp.padded(slots.count).digits().iter().map(|&d| d as f64).collect();
        let nonzero = e.iter().any(|&v| v != 0.0);
        if aa == 0.0 && nonzero {
            return Err(Error::Detection("detector plane is dark".into()));
        }
        let s = if aa == 0.0 {
            0.0
        } else {
            amplitudes.iter().zip(&e).map(|(a, e)| a * e).sum::<f64>() / aa
        };
        let resid: Vec<f64> = amplitudes.iter().zip(&e).map(|(a, e)| s * a - e).collect();
        let max_abs = resid.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let rms = (resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64).sqrt();
        return Ok(DetectorReadout {
            digits: amplitudes.iter().map(|a| round_digit(s * a)).collect(),
            raw,
            amplitudes,
            fitted_scale: s,
            max_abs_err: Some(max_abs),
            rms_err: Some(rms),
        });
    }

    let a_max = amplitudes.iter().copied().fold(0.0, f64::max);
    let s = if a_max == 0.0 { 0.0 } else { blind_scale(&amplitudes, a_max) };
    Ok(DetectorReadout {
        digits: amplitudes.iter().map(|a| round_digit(s * a)).collect(),
        raw,
        amplitudes,
        fitted_scale: s,
        max_abs_err: None,
        rms_err: None,
    })
}

fn blind_scale(amplitudes: &[f64], a_max: f64) -> f64 {
    let residual = |s: f64| {
        let ss: f64 = amplitudes
            .iter()
            .map(|a| {
                let v = s * a;
                (v - v.round()).powi(2)
            })
            .sum();
        (ss / amplitudes.len() as f64).sqrt()
    };
    let mut best = (f64::INFINITY, 1.0 / a_max);
    for n in 1..=MAX_DIGIT {
        let s = n as f64 / a_max;
        let r = residual(s);
        if r <= BLIND_TOLERANCE {
            return s;
        }
        if r < best.0 {
            best = (r, s);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(d: &[u64]) -> DigitVector {
        DigitVector::new(d.to_vec()).unwrap()
    }

    #[test]
    fn fit_centers_block() {
        let l = CellLayout::fit(251, 19).unwrap();
        assert_eq!(l.cell_px, 13);
        assert_eq!(l.start(), 2);
        let l = CellLayout::fit(1005, 67).unwrap();
        assert_eq!((l.cell_px, l.start()), (15, 0));
        assert!(CellLayout::new(10, 11, 1).is_err());
    }

    #[test]
    fn cell_zero_is_lower_left() {
        let l = CellLayout::new(9, 3, 3).unwrap();
        assert_eq!(l.cell_origin(0), (6, 0));
        assert_eq!(l.cell_origin(2), (0, 6));
        assert_eq!(l.cell_center(1), (4, 4));
    }

    #[test]
    fn single_digit_lands_in_top_cell() {
        let l = CellLayout::new(12, 4, 3).unwrap();
        let f = encode_diagonal(&dv(&[1]), &l, false, 0.01, 2e-4).unwrap();
        let lit: Vec<_> = (0..144).filter(|&p| f.samples()[p].re == 1.0).collect();
        assert_eq!(lit.len(), 9);
        assert_eq!(f.get(0, 9).re, 1.0);
        let z = encode_diagonal(&dv(&[0, 0, 0]), &l, false, 0.01, 2e-4).unwrap();
        assert!(z.samples().iter().all(|s| s.norm() == 0.0));
    }

    #[test]
    fn interleave_and_overflow() {
        let l = CellLayout::new(20, 5, 4).unwrap();
        assert!(encode_diagonal(&dv(&[1, 1, 1]), &l, true, 0.01, 2e-4).is_ok());
        assert!(encode_diagonal(&dv(&[1, 1, 1, 1]), &l, true, 0.01, 2e-4).is_err());
        let cells = diagonal_cells(&dv(&[1, 0, 1]), 5, 0, 2).unwrap();
        assert_eq!(cells, vec![1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn bands() {
        let f = encode_banded(&dv(&[1, 0, 1]), 6, 0.01, 2e-4).unwrap();
        let col: Vec<f64> = (0..6).map(|r| f.get(r, 3).re).collect();
        assert_eq!(col, vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let u = encode_banded(&dv(&[2, 2]), 4, 0.01, 2e-4).unwrap();
        assert!(u.samples().iter().all(|s| s.re == 1.0));
    }

    #[test]
    fn round_trip_with_expected() {
        let l = CellLayout::new(9, 3, 3).unwrap();
        let v = dv(&[1, 0, 1]);
        let img = encode_diagonal(&v, &l, false, 0.01, 2e-4).unwrap().intensity();
        let r = detect(&img, &l, &DetectorSlots::all(3), Some(&v)).unwrap();
        assert_eq!(r.digits, vec![1, 0, 1]);
        assert!(r.max_abs_err.unwrap() < 1e-12);
        let r2 = detect(&img.scaled(2.0), &l, &DetectorSlots::all(3), Some(&v)).unwrap();
        assert_eq!(r2.digits, r.digits);
        assert!((r2.max_abs_err.unwrap() - r.max_abs_err.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn dark_plane_with_expected_fails() {
        let l = CellLayout::new(9, 3, 3).unwrap();
        let img = IntensityImage::new(9, 0.01, vec![0.0; 81]).unwrap();
        let r = detect(&img, &l, &DetectorSlots::all(3), Some(&dv(&[1])));
        assert!(matches!(r, Err(Error::Detection(_))));
        let r = detect(&img, &l, &DetectorSlots::all(3), None).unwrap();
        assert_eq!(r.digits, vec![0, 0, 0]);
    }

    #[test]
    fn blind_detection_finds_integer_scale() {
        let l = CellLayout::new(16, 4, 4).unwrap();
        let cells = vec![3.0, 0.0, 7.0, 5.0];
        let img = encode_cells(&cells, &l, 0.01, 2e-4).unwrap().intensity().scaled(0.37);
        let r = detect(&img, &l, &DetectorSlots::all(4), None).unwrap();
        assert_eq!(r.digits, vec![5, 7, 0, 3]);
    }

    #[test]
    fn record_has_every_key() {
        let l = CellLayout::new(9, 3, 3).unwrap();
        let v = dv(&[1, 1]);
        let img = encode_diagonal(&v, &l, false, 0.01, 2e-4).unwrap().intensity();
        let rec = detect(&img, &l, &DetectorSlots::all(3), Some(&v)).unwrap().to_record();
        for key in ["raw", "amplitudes", "digits", "fitted_scale", "max_abs_err", "rms_err"] {
            assert!(rec.lines().any(|l| l.starts_with(&format!("{key} = "))), "{key}");
        }
        assert!(rec.contains("digits = 1 1 0\n"));
    }
}
