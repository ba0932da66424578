//! Builds the eight-beam device program for one carry-free Montgomery
//! product.
//!
//! All beams share a diagonal of `4k - 1` cells; cell offsets are measured
//! from the central cell and digits sit on every second cell. Lens stages
//! use three focal lengths at a constant plane separation `z`:
//! `z` (plain transform), `z/3` (inverse transform after a product) and
//! `z/2` (transform of a beam that still carries the curvature of an earlier
//! inverse transform).

use std::fmt::Write as _;
use std::path::PathBuf;

use super::emit::{emit_instruction, fnum};
use super::{parse_program, Instruction, Program, DEFAULT_PITCH};
use crate::codec::CellLayout;
use crate::error::{config, Result};
use crate::modmul::{dropped_digits, montgomery_mul_conv, montgomery_setup, ConvTrace, DigitVector, MontgomeryContext};
use crate::optics::{lens_spacing, LensSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ModmulGeometry {
    pub grid: usize,
    pub pitch: f64,
    pub wavelength: f64,
    /// Plane separation between consecutive lenses (mm).
    pub separation: f64,
    pub overlap: u32,
    pub output_dir: PathBuf,
    pub tap_dir: PathBuf,
}

impl Default for ModmulGeometry {
    fn default() -> Self {
        Self {
            grid: 1005,
            pitch: DEFAULT_PITCH,
            wavelength: 2e-4,
            separation: 15.0,
            overlap: 6,
            output_dir: PathBuf::from("output"),
            tap_dir: PathBuf::from("tap"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModmulScript {
    pub text: String,
    pub program: Program,
    pub ctx: MontgomeryContext,
    pub trace: ConvTrace,
    pub layout: CellLayout,
    /// `k5_hi` padded to the detector slot count.
    pub expected: DigitVector,
    /// Amplitude of a unit digit at the detector relative to the inputs.
    pub gain: f64,
}

/// Cell values with digit `e` of `v` at offset `base + dir * 2e`.
fn place(v: &DigitVector, n_cells: usize, base: i64, dir: i64) -> Result<Vec<f64>> {
    let c = (n_cells as i64 - 1) / 2;
    let mut cells = vec![0.0; n_cells];
    for (e, &d) in v.digits().iter().rev().enumerate() {
        let idx = c + base + dir * 2 * e as i64;
        if idx < 0 || idx >= n_cells as i64 {
            return config(format!("digit {e} falls outside the {n_cells}-cell layout"));
        }
        cells[idx as usize] = d as f64;
    }
    Ok(cells)
}

fn unit(n_cells: usize, offset: i64) -> Vec<f64> {
    let c = (n_cells as i64 - 1) / 2;
    let mut cells = vec![0.0; n_cells];
    cells[(c + offset) as usize] = 1.0;
    cells
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

pub fn generate_modmul_script(a: u128, b: u128, m: u128, geom: &ModmulGeometry) -> Result<ModmulScript> {
    let ctx = montgomery_setup(m)?;
    let (a_bar, b_bar) = (ctx.to_montgomery(a), ctx.to_montgomery(b));
    let trace = montgomery_mul_conv(a_bar, b_bar, &ctx, geom.overlap)?;
    let k = ctx.k as i64;
    if k < 4 {
        return config(format!("modulus {m} is too small for the optical layout"));
    }
    let d = dropped_digits(ctx.k, geom.overlap) as i64;
    let n_cells = (4 * k - 1) as usize;
    let layout = CellLayout::fit(geom.grid, n_cells)?;
    if layout.cell_px < 2 {
        return config(format!(
            "{} pixels cannot hold {n_cells} cells of at least 2 px",
            geom.grid
        ));
    }
    let (z, px, grid) = (geom.separation, layout.cell_px as f64, geom.grid as f64);
    let boundary = |o: i64| round6(o as f64 * px / grid);

    let lens_at = |f: f64, mults: Option<u32>| -> Result<LensSpec> {
        let dist = match mults {
            None => f,
            Some(n) => -lens_spacing(f, z, n)?,
        };
        if (dist - z).abs() > 1e-9 * z {
            return config(format!("lens f = {f} does not refocus at {z} mm"));
        }
        Ok(LensSpec::thin(f, z))
    };
    let plain = lens_at(z, None)?;
    let after_product = lens_at(z / 3.0, Some(1))?;
    let refocus = lens_at(z / 2.0, Some(0))?;

    let u3 = k.min(2 * d + 5);
    let inputs = [
        place(&trace.a_bar, n_cells, 1, 1)?,
        place(&trace.b_bar, n_cells, -(2 * k - 3), 1)?,
        place(&trace.m_prime, n_cells, 1, -1)?,
        place(&trace.m, n_cells, 0, 1)?,
        unit(n_cells, -(2 * k - 8)),
        unit(n_cells, 2 * k - 6),
        unit(n_cells, u3),
        unit(n_cells, u3 - 1),
    ];

    use Instruction as I;
    let lens = |beam, spec: LensSpec| I::Lens { beam, spec };
    let lower_left = |beam, o: i64| {
        let v = boundary(o);
        I::Mask {
            beam,
            corner1: (-0.5, v),
            corner2: (v, -0.5),
        }
    };
    let mut body: Vec<I> = Vec::new();
    if geom.pitch != DEFAULT_PITCH {
        body.push(I::Pitch(geom.pitch));
    }
    for values in inputs {
        body.push(I::Generate {
            meta: layout.cell_px,
            n_cells,
            values,
        });
    }
    let lo = boundary(-3);
    let first_slot = (2 + 2 * d) as usize;
    #[rustfmt::skip]
    body.extend([
        I::Tap,
        lens(1, plain), lens(2, plain), I::Tap,
        // k1 = a (x) b
        I::PointwiseMul(1, 2), lens(1, after_product), I::Tap,
        I::BeamSplitter(1),
        lower_left(1, 2 * k - 3 - 2 * d),
        I::Mask { beam: 2, corner1: (lo, 0.5), corner2: (0.5, lo) },
        I::Tap,
        // k2 = k1_lo (x) M, k3 = low digits of k2
        lens(2, refocus), lens(3, plain), I::Tap,
        I::PointwiseMul(2, 3), lens(2, after_product), I::Tap,
        lower_left(2, 2), I::Tap,
        // k4 = k3 (x) m, keep the high digits
        lens(2, refocus), lens(3, plain), I::Tap,
        I::PointwiseMul(2, 3), lens(2, after_product), I::Tap,
        lower_left(2, 2 * k - 2 - 2 * d), I::Tap,
        // carry unit, added to k1_hi
        lens(3, plain), lens(4, plain), I::Tap,
        I::PointwiseMul(3, 4), lens(3, after_product), I::Tap,
        I::Filter { beam: 3, gain: 0.5 }, I::Tap,
        I::PointwiseAdd(1, 3), I::Tap,
        // two products by one so both summands share a history
        lens(1, refocus), lens(3, plain), I::Tap,
        I::PointwiseMul(1, 3), lens(1, after_product), I::Tap,
        lens(1, refocus), lens(3, plain), I::Tap,
        I::PointwiseMul(1, 3), lens(1, after_product), I::Tap,
        I::PointwiseAdd(1, 2), I::Tap,
        lens(1, refocus), lens(1, refocus), I::Tap,
        I::ReadOut(1),
        I::Detector {
            beam: 1,
            width: round6(grid * geom.pitch),
            n_cells,
            slots: Some((first_slot, 2)),
        },
    ]);

    let mut text = String::new();
    let _ = writeln!(text, "{}", geom.output_dir.display());
    let _ = writeln!(text, "{}", geom.tap_dir.display());
    let _ = writeln!(text, "{}", fnum(geom.wavelength));
    let _ = writeln!(text, "{}", geom.grid);
    let _ = writeln!(
        text,
        "#### Simulation: {a} * {b} mod {m} = {}",
        a % m * (b % m) % m
    );
    for instr in &body {
        let _ = writeln!(text, "{}", emit_instruction(instr));
    }
    let program = parse_program(&text)?;

    let slots = (n_cells - 1 - first_slot) / 2 + 1;
    if trace.k5_hi.len() > slots {
        return config("k5_hi does not fit the detector slots");
    }
    let expected = trace.k5_hi.padded(slots);
    Ok(ModmulScript {
        text,
        program,
        ctx,
        trace,
        layout,
        expected,
        gain: 0.5,
    })
}
