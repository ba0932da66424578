//! Cell-level interpretation of a program: each beam is a set of digit cells
//! rather than a sampled field, so script logic can be checked exactly.
//!
//! A lens toggles a beam between the image plane and the transform plane;
//! leaving the transform plane reflects every cell through the center. A
//! product of two transform-plane beams convolves their cell offsets. Masks
//! keep a cell when its center pixel passes the same test as `mask_rect`.

use std::collections::BTreeMap;

use super::{Instruction, Program};
use crate::codec::CellLayout;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IdealReadout {
    pub step: usize,
    pub beam: usize,
    /// Slot values, heaviest slot first.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
struct CellBeam {
    /// Offset from the central cell -> amplitude.
    cells: BTreeMap<i64, f64>,
    transformed: bool,
    lenses: u32,
}

fn fail(step: usize, instr: &Instruction, msg: impl Into<String>) -> Error {
    Error::Runtime {
        step,
        instr: instr.keyword().to_string(),
        msg: msg.into(),
    }
}

struct Geometry {
    grid: usize,
    layout: CellLayout,
    center: i64,
}

impl Geometry {
    /// Normalized `(x, y)` of the center pixel of the cell at offset `o`.
    fn position(&self, o: i64) -> (f64, f64) {
        let px = self.layout.cell_px as i64;
        let idx = o + self.center;
        let n = self.layout.n_cells as i64;
        let start = self.layout.start() as i64;
        let h = (px - 1) / 2;
        let col = start + idx * px + h;
        let row = start + (n - 1 - idx) * px + h;
        let c = (self.grid as f64 - 1.0) / 2.0;
        let g = self.grid as f64;
        ((col as f64 - c) / g, (c - row as f64) / g)
    }
}

pub fn execute_ideal(program: &Program) -> Result<Vec<IdealReadout>> {
    let grid = program.grid_size;
    let mut beams: Vec<CellBeam> = Vec::new();
    let mut geom: Option<Geometry> = None;
    let mut out = Vec::new();

    for (idx, instr) in program.instructions.iter().enumerate() {
        let step = idx + 1;
        let slot = |id: usize, beams: &Vec<CellBeam>| {
            if id == 0 || id > beams.len() {
                Err(fail(step, instr, format!("beam {id} is not live")))
            } else {
                Ok(id - 1)
            }
        };
        match instr {
            Instruction::Generate {
                meta,
                n_cells,
                values,
            } => {
                if n_cells % 2 == 0 {
                    return Err(fail(step, instr, "cell-level execution needs an odd cell count"));
                }
                let fit = CellLayout::fit(grid, *n_cells).map_err(|e| fail(step, instr, e.to_string()))?;
                let layout = CellLayout::new(grid, *n_cells, (*meta).clamp(1, fit.cell_px))
                    .map_err(|e| fail(step, instr, e.to_string()))?;
                match &geom {
                    Some(g) if g.layout != layout => {
                        return Err(fail(step, instr, "all beams must share one cell layout"));
                    }
                    Some(_) => {}
                    None => {
                        geom = Some(Geometry {
                            grid,
                            layout,
                            center: (*n_cells as i64 - 1) / 2,
                        })
                    }
                }
                let c = (*n_cells as i64 - 1) / 2;
                let cells = values
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, v)| (i as i64 - c, *v))
                    .collect();
                beams.push(CellBeam {
                    cells,
                    transformed: false,
                    lenses: 0,
                });
            }
            Instruction::Tap | Instruction::Pitch(_) | Instruction::ReadOut(_) => {
                if let Instruction::ReadOut(b) = instr {
                    slot(*b, &beams)?;
                }
            }
            Instruction::Lens { beam, .. } => {
                let i = slot(*beam, &beams)?;
                let b = &mut beams[i];
                if b.transformed {
                    b.cells = b.cells.iter().map(|(o, v)| (-o, *v)).collect();
                }
                b.transformed = !b.transformed;
                b.lenses += 1;
            }
            Instruction::PointwiseMul(a, bb) => {
                let (ia, ib) = (slot(*a, &beams)?, slot(*bb, &beams)?);
                if !beams[ia].transformed || !beams[ib].transformed {
                    return Err(fail(step, instr, "products need both beams in the transform plane"));
                }
                let mut prod = BTreeMap::new();
                for (oa, va) in &beams[ia].cells {
                    for (ob, vb) in &beams[ib].cells {
                        *prod.entry(oa + ob).or_insert(0.0) += va * vb;
                    }
                }
                beams[ia].cells = prod;
                beams.remove(ib);
            }
            Instruction::PointwiseAdd(a, bb) => {
                let (ia, ib) = (slot(*a, &beams)?, slot(*bb, &beams)?);
                if beams[ia].transformed != beams[ib].transformed {
                    return Err(fail(step, instr, "sum of beams in different planes"));
                }
                let other = beams.remove(ib).cells;
                let ia = if ib < ia { ia - 1 } else { ia };
                for (o, v) in other {
                    *beams[ia].cells.entry(o).or_insert(0.0) += v;
                }
            }
            Instruction::BeamSplitter(a) => {
                let i = slot(*a, &beams)?;
                for v in beams[i].cells.values_mut() {
                    *v *= 0.5;
                }
                let copy = beams[i].clone();
                beams.insert(i + 1, copy);
            }
            Instruction::Mask {
                beam,
                corner1,
                corner2,
            } => {
                let i = slot(*beam, &beams)?;
                if beams[i].transformed {
                    return Err(fail(step, instr, "masks act on image-plane beams"));
                }
                let g = geom.as_ref().ok_or_else(|| fail(step, instr, "no layout yet"))?;
                let (xl, xh) = (corner1.0.min(corner2.0), corner1.0.max(corner2.0));
                let (yl, yh) = (corner1.1.min(corner2.1), corner1.1.max(corner2.1));
                beams[i].cells.retain(|o, _| {
                    let (x, y) = g.position(*o);
                    x >= xl && x <= xh && y >= yl && y <= yh
                });
            }
            Instruction::Filter { beam, gain } => {
                let i = slot(*beam, &beams)?;
                for v in beams[i].cells.values_mut() {
                    *v *= gain;
                }
            }
            Instruction::Detector {
                beam,
                n_cells,
                slots,
                ..
            } => {
                let i = slot(*beam, &beams)?;
                let b = &beams[i];
                if b.transformed {
                    return Err(fail(step, instr, "detector reads an image-plane beam"));
                }
                let g = geom.as_ref().ok_or_else(|| fail(step, instr, "no layout yet"))?;
                if *n_cells != g.layout.n_cells {
                    return Err(fail(step, instr, "detector layout differs from the generated cells"));
                }
                let mirrored = (b.lenses / 2) % 2 == 1;
                let (first, stride) = slots.unwrap_or((0, 1));
                let count = (n_cells - 1 - first) / stride + 1;
                let values = (0..count)
                    .rev()
                    .map(|j| {
                        let o = (first + j * stride) as i64 - g.center;
                        let o = if mirrored { -o } else { o };
                        b.cells.get(&o).copied().unwrap_or(0.0)
                    })
                    .collect();
                out.push(IdealReadout {
                    step,
                    beam: *beam,
                    values,
                });
            }
        }
    }
    Ok(out)
}
