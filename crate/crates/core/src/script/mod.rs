//! The instruction-file language: a four-line header followed by one device
//! per line, executed over a list of live beams.
//!
//! ```text
//! out                      # output directory
//! tap                      # tap directory
//! 0.000200                 # wavelength (mm)
//! 251                      # grid size (pixels)
//! generate 13 3 1 0 1
//! lens 1 15 -15 1.5 2 15 1 1
//! detector 1 0.502 3
//! ```
//!
//! Beams are numbered from 1 in creation order. `pointwise_mul a b` and
//! `pointwise_add a b` leave the result in `a` and remove `b`, so later beams
//! move down one id; `beam_splitter a` inserts the copy at `a + 1`.

use std::path::PathBuf;

use crate::optics::LensSpec;

mod emit;
mod exec;
mod generate;
mod ideal;
mod parse;

pub use emit::emit_program;
pub use exec::{execute, DetectorEvent, ExecOptions, ExecutionReport, StepTiming};
pub use generate::{generate_modmul_script, ModmulGeometry, ModmulScript};
pub use ideal::{execute_ideal, IdealReadout};
pub use parse::parse_program;

pub const DEFAULT_PITCH: f64 = 0.001;

#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    Generate {
        /// Cell size in pixels (clamped to what fits the grid).
        meta: usize,
        n_cells: usize,
        values: Vec<f64>,
    },
    Tap,
    Lens {
        beam: usize,
        spec: LensSpec,
    },
    PointwiseMul(usize, usize),
    PointwiseAdd(usize, usize),
    BeamSplitter(usize),
    Mask {
        beam: usize,
        corner1: (f64, f64),
        corner2: (f64, f64),
    },
    Filter {
        beam: usize,
        gain: f64,
    },
    ReadOut(usize),
    Detector {
        beam: usize,
        width: f64,
        n_cells: usize,
        /// `(first_cell, step)`; every cell when absent.
        slots: Option<(usize, usize)>,
    },
    Pitch(f64),
}

impl Instruction {
    pub fn keyword(&self) -> &'static str {
        match self {
            Instruction::Generate { .. } => "generate",
            Instruction::Tap => "tap",
            Instruction::Lens { .. } => "lens",
            Instruction::PointwiseMul(..) => "pointwise_mul",
            Instruction::PointwiseAdd(..) => "pointwise_add",
            Instruction::BeamSplitter(_) => "beam_splitter",
            Instruction::Mask { .. } => "mask",
            Instruction::Filter { .. } => "filter",
            Instruction::ReadOut(_) => "read_out",
            Instruction::Detector { .. } => "detector",
            Instruction::Pitch(_) => "pitch",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Program {
    pub output_dir: PathBuf,
    pub tap_dir: PathBuf,
    pub wavelength: f64,
    pub grid_size: usize,
    /// Pitch in force at the first `generate` (the last `pitch` before it).
    pub pixel_pitch: f64,
    pub instructions: Vec<Instruction>,
    /// Source line of each instruction; empty for programs built in memory.
    pub lines: Vec<usize>,
}

impl Program {
    pub fn line_of(&self, step: usize) -> Option<usize> {
        self.lines.get(step).copied()
    }

    pub fn count(&self, keyword: &str) -> usize {
        self.instructions
            .iter()
            .filter(|i| i.keyword() == keyword)
            .count()
    }
}

/// Source positions are not part of a program's identity.
impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.output_dir == other.output_dir
            && self.tap_dir == other.tap_dir
            && self.wavelength == other.wavelength
            && self.grid_size == other.grid_size
            && self.pixel_pitch == other.pixel_pitch
            && self.instructions == other.instructions
    }
}
