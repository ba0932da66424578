use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::{Instruction, Program};
use crate::codec::{detect, encode_cells, CellLayout, DetectorReadout, DetectorSlots};
use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::modmul::DigitVector;
use crate::optics::apply_lens;
use crate::propagate::Backend;

#[derive(Debug, Clone, Default)]
pub struct ExecOptions {
    pub backend: Backend,
    /// Write tap and read-out images.
    pub write_images: bool,
    /// Replace the program's output directory.
    pub output_dir: Option<PathBuf>,
    /// Replace the program's tap directory.
    pub tap_dir: Option<PathBuf>,
    /// Digits every detector is fitted against.
    pub expected: Option<DigitVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorEvent {
    pub step: usize,
    pub beam: usize,
    /// The image was point-reflected before reading.
    pub mirrored: bool,
    pub layout: CellLayout,
    pub slots: DetectorSlots,
    pub readout: DetectorReadout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepTiming {
    pub step: usize,
    pub keyword: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ExecutionReport {
    pub detectors: Vec<DetectorEvent>,
    pub timings: Vec<StepTiming>,
    /// Every image written, in order.
    pub images: Vec<PathBuf>,
    pub live_beams: usize,
}

impl ExecutionReport {
    /// Detector records; independent of timing and thread count.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "live_beams = {}", self.live_beams);
        let _ = writeln!(s, "images = {}", self.images.len());
        for ev in &self.detectors {
            let _ = writeln!(s, "[detector]");
            let _ = writeln!(s, "step = {}", ev.step);
            let _ = writeln!(s, "beam = {}", ev.beam);
            let _ = writeln!(s, "mirrored = {}", ev.mirrored);
            let _ = writeln!(s, "cells = {} x {} px", ev.layout.n_cells, ev.layout.cell_px);
            let _ = writeln!(
                s,
                "slots = {} {} {}",
                ev.slots.first, ev.slots.step, ev.slots.count
            );
            s.push_str(&ev.readout.to_record());
        }
        s
    }

    pub fn timing_text(&self) -> String {
        let mut s = String::new();
        for t in &self.timings {
            let _ = writeln!(s, "step {:>4} {:<14} {:>10.3} s", t.step, t.keyword, t.seconds);
        }
        s
    }
}

struct Beam {
    field: ComplexField,
    lenses: u32,
}

impl Beam {
    /// Every second lens closes a transform pair, which reflects the image.
    fn mirrored(&self) -> bool {
        (self.lenses / 2) % 2 == 1
    }
}

struct Machine<'a> {
    program: &'a Program,
    opts: &'a ExecOptions,
    beams: Vec<Beam>,
    pitch: f64,
    /// Layout of the latest `generate` for each cell count.
    layouts: Vec<CellLayout>,
    report: ExecutionReport,
}

impl Machine<'_> {
    fn fail(&self, step: usize, instr: &Instruction, msg: impl Into<String>) -> Error {
        Error::Runtime {
            step,
            instr: instr.keyword().to_string(),
            msg: msg.into(),
        }
    }

    fn slot(&self, step: usize, instr: &Instruction, id: usize) -> Result<usize> {
        if id == 0 || id > self.beams.len() {
            return Err(self.fail(
                step,
                instr,
                format!("beam {id} is not live ({} beams)", self.beams.len()),
            ));
        }
        Ok(id - 1)
    }

    fn out_dir(&self) -> &Path {
        self.opts
            .output_dir
            .as_deref()
            .unwrap_or(&self.program.output_dir)
    }

    fn tap_dir(&self) -> &Path {
        self.opts.tap_dir.as_deref().unwrap_or(&self.program.tap_dir)
    }

    fn write_image(&mut self, field: &ComplexField, dir: PathBuf, name: String) -> Result<()> {
        fs::create_dir_all(&dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
        let path = dir.join(name);
        field.intensity().write(&path)?;
        self.report.images.push(path);
        Ok(())
    }

    fn run_step(&mut self, step: usize, instr: &Instruction) -> Result<()> {
        let grid = self.program.grid_size;
        let backend = self.opts.backend;
        let wrap = |e: Error, m: &Self| match e {
            Error::Runtime { .. } | Error::Io { .. } => e,
            other => m.fail(step, instr, other.to_string()),
        };
        match instr {
            Instruction::Pitch(p) => {
                if !self.beams.is_empty() {
                    return Err(self.fail(step, instr, "pitch cannot change while beams are live"));
                }
                self.pitch = *p;
            }
            Instruction::Generate {
                meta,
                n_cells,
                values,
            } => {
                let fit = CellLayout::fit(grid, *n_cells).map_err(|e| wrap(e, self))?;
                let px = (*meta).clamp(1, fit.cell_px);
                let layout = CellLayout::new(grid, *n_cells, px).map_err(|e| wrap(e, self))?;
                let field = encode_cells(values, &layout, self.pitch, self.program.wavelength)
                    .map_err(|e| wrap(e, self))?;
                self.beams.push(Beam { field, lenses: 0 });
                self.layouts.retain(|l| l.n_cells != *n_cells);
                self.layouts.push(layout);
            }
            Instruction::Tap => {
                if self.opts.write_images {
                    let dir = self.tap_dir().to_path_buf();
                    let fields: Vec<ComplexField> = self.beams.iter().map(|b| b.field.clone()).collect();
                    for (i, f) in fields.iter().enumerate() {
                        self.write_image(f, dir.clone(), format!("tap_{step}_beam_{}.pgm", i + 1))?;
                    }
                }
            }
            Instruction::Lens { beam, spec } => {
                let i = self.slot(step, instr, *beam)?;
                let out = apply_lens(&self.beams[i].field, spec, backend).map_err(|e| wrap(e, self))?;
                self.beams[i].field = out;
                self.beams[i].lenses += 1;
            }
            Instruction::PointwiseMul(a, b) | Instruction::PointwiseAdd(a, b) => {
                let (ia, ib) = (self.slot(step, instr, *a)?, self.slot(step, instr, *b)?);
                let (fa, fb) = (&self.beams[ia].field, &self.beams[ib].field);
                let out = if matches!(instr, Instruction::PointwiseMul(..)) {
                    fa.pointwise_mul(fb)
                } else {
                    fa.pointwise_add(fb)
                }
                .map_err(|e| wrap(e, self))?;
                self.beams[ia].field = out;
                self.beams.remove(ib);
            }
            Instruction::BeamSplitter(a) => {
                let i = self.slot(step, instr, *a)?;
                let half = self.beams[i].field.scale(0.5).map_err(|e| wrap(e, self))?;
                let lenses = self.beams[i].lenses;
                self.beams[i].field = half.clone();
                self.beams.insert(i + 1, Beam { field: half, lenses });
            }
            Instruction::Mask {
                beam,
                corner1,
                corner2,
            } => {
                let i = self.slot(step, instr, *beam)?;
                let out = self.beams[i]
                    .field
                    .mask_rect(*corner1, *corner2)
                    .map_err(|e| wrap(e, self))?;
                self.beams[i].field = out;
            }
            Instruction::Filter { beam, gain } => {
                let i = self.slot(step, instr, *beam)?;
                let out = self.beams[i].field.scale(*gain).map_err(|e| wrap(e, self))?;
                self.beams[i].field = out;
            }
            Instruction::ReadOut(beam) => {
                let i = self.slot(step, instr, *beam)?;
                if self.opts.write_images {
                    let dir = self.out_dir().to_path_buf();
                    let f = self.beams[i].field.clone();
                    self.write_image(&f, dir, format!("readout_beam_{beam}.pgm"))?;
                }
            }
            Instruction::Detector {
                beam,
                width,
                n_cells,
                slots,
            } => {
                let i = self.slot(step, instr, *beam)?;
                let b = &self.beams[i];
                let width_px = (width / self.pitch).round().min(grid as f64) as usize;
                let layout = match self.layouts.iter().find(|l| l.n_cells == *n_cells) {
                    Some(l) if l.n_cells * l.cell_px <= width_px => *l,
                    _ => CellLayout::fit_within(grid, *n_cells, width_px).map_err(|e| wrap(e, self))?,
                };
                let slots = match slots {
                    Some((first, step)) => DetectorSlots {
                        first: *first,
                        step: *step,
                        count: (n_cells - 1 - first) / step + 1,
                    },
                    None => DetectorSlots::all(*n_cells),
                };
                let mirrored = b.mirrored();
                let mut img = b.field.intensity();
                if mirrored {
                    img = img.mirrored();
                }
                let readout = detect(&img, &layout, &slots, self.opts.expected.as_ref()).map_err(|e| wrap(e, self))?;
                self.report.detectors.push(DetectorEvent {
                    step,
                    beam: *beam,
                    mirrored,
                    layout,
                    slots,
                    readout,
                });
            }
        }
        Ok(())
    }
}

/// Runs the program top to bottom. Steps are numbered from 1.
pub fn execute(program: &Program, opts: &ExecOptions) -> Result<ExecutionReport> {
    let mut m = Machine {
        program,
        opts,
        beams: Vec::new(),
        pitch: super::DEFAULT_PITCH,
        layouts: Vec::new(),
        report: ExecutionReport::default(),
    };
    for (idx, instr) in program.instructions.iter().enumerate() {
        let step = idx + 1;
        let start = Instant::now();
        m.run_step(step, instr)?;
        m.report.timings.push(StepTiming {
            step,
            keyword: instr.keyword(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    m.report.live_beams = m.beams.len();
    Ok(m.report)
}
