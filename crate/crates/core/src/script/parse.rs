use std::path::PathBuf;
use std::str::FromStr;

use super::{Instruction, Program, DEFAULT_PITCH};
use crate::error::{Error, Result};
use crate::optics::LensSpec;

fn perr<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line,
        msg: msg.into(),
    })
}

/// Whitespace tokens tagged with their 1-based line, comments removed.
struct Tokens<'a> {
    toks: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn peek_line(&self) -> Option<usize> {
        self.toks.get(self.pos).map(|t| t.0)
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        let t = self.toks.get(self.pos).copied();
        self.pos += 1;
        t
    }

    /// Remaining tokens on `line`.
    fn rest_of_line(&mut self, line: usize) -> Vec<&'a str> {
        let mut out = Vec::new();
        while let Some((l, t)) = self.toks.get(self.pos).copied() {
            if l != line {
                break;
            }
            out.push(t);
            self.pos += 1;
        }
        out
    }
}

fn num<T: FromStr>(line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .or_else(|_| perr(line, format!("{what}: expected a number, got `{tok}`")))
}

fn real(line: usize, tok: &str, what: &str) -> Result<f64> {
    let v: f64 = num(line, tok, what)?;
    if !v.is_finite() {
        return perr(line, format!("{what}: `{tok}` is not finite"));
    }
    Ok(v)
}

fn beam(line: usize, tok: &str) -> Result<usize> {
    let b: usize = num(line, tok, "beam id")?;
    if b == 0 {
        return perr(line, "beam ids start at 1");
    }
    Ok(b)
}

fn arity(line: usize, kw: &str, args: &[&str], allowed: &[usize]) -> Result<()> {
    if allowed.contains(&args.len()) {
        return Ok(());
    }
    let want = allowed
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(" or ");
    perr(
        line,
        format!("`{kw}` takes {want} arguments, got {}", args.len()),
    )
}

pub fn parse_program(text: &str) -> Result<Program> {
    let mut header = Vec::new();
    let mut toks = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if header.len() < 4 {
            header.push((line, trimmed));
        } else {
            toks.extend(trimmed.split_whitespace().map(|t| (line, t)));
        }
    }
    if header.len() < 4 {
        let line = header.last().map_or(1, |h| h.0);
        return perr(line, "header needs output dir, tap dir, wavelength and grid size");
    }
    let wavelength = real(header[2].0, header[2].1, "wavelength")?;
    if !(wavelength > 0.0) {
        return perr(header[2].0, "wavelength must be positive");
    }
    let grid_size: usize = num(header[3].0, header[3].1, "grid size")?;
    if grid_size < 2 {
        return perr(header[3].0, "grid size must be at least 2");
    }

    let mut stream = Tokens { toks, pos: 0 };
    let mut instructions = Vec::new();
    let mut lines = Vec::new();
    let mut pitch = DEFAULT_PITCH;
    let mut pitch_fixed = false;
    while let Some((line, kw)) = stream.next() {
        let instr = if kw == "generate" {
            let args = stream.rest_of_line(line);
            if args.len() < 2 {
                return perr(line, "`generate` needs a cell size and a cell count");
            }
            let meta: usize = num(line, args[0], "generate cell size")?;
            let n_cells: usize = num(line, args[1], "generate cell count")?;
            if n_cells == 0 {
                return perr(line, "`generate` needs at least one cell");
            }
            let mut vals: Vec<f64> = args[2..]
                .iter()
                .map(|t| real(line, t, "generate value"))
                .collect::<Result<_>>()?;
            while vals.len() < n_cells {
                let Some(next_line) = stream.peek_line() else {
                    return perr(line, format!("`generate` ended after {} of {n_cells} values", vals.len()));
                };
                let more = stream.rest_of_line(next_line);
                for t in more {
                    vals.push(real(next_line, t, "generate value")?);
                }
            }
            if vals.len() != n_cells {
                return perr(line, format!("`generate` lists {} values for {n_cells} cells", vals.len()));
            }
            if vals.iter().any(|v| *v < 0.0) {
                return perr(line, "generate values must be non-negative");
            }
            pitch_fixed = true;
            Instruction::Generate {
                meta,
                n_cells,
                values: vals,
            }
        } else {
            let args = stream.rest_of_line(line);
            parse_device(line, kw, &args)?
        };
        if let Instruction::Pitch(p) = instr {
            if !pitch_fixed {
                pitch = p;
            }
        }
        instructions.push(instr);
        lines.push(line);
    }
    if instructions.is_empty() {
        return perr(header[3].0, "program has no instructions");
    }
    let program = Program {
        output_dir: PathBuf::from(header[0].1),
        tap_dir: PathBuf::from(header[1].1),
        wavelength,
        grid_size,
        pixel_pitch: pitch,
        instructions,
        lines,
    };
    check_beams(&program)?;
    Ok(program)
}

fn parse_device(line: usize, kw: &str, args: &[&str]) -> Result<Instruction> {
    Ok(match kw {
        "tap" => {
            arity(line, kw, args, &[0])?;
            Instruction::Tap
        }
        "lens" => {
            arity(line, kw, args, &[8, 9])?;
            let r: Vec<f64> = args[1..]
                .iter()
                .map(|t| real(line, t, "lens parameter"))
                .collect::<Result<_>>()?;
            let spec = LensSpec {
                radius1: r[0],
                radius2: r[1],
                refractive_index: r[2],
                thickness: r[3],
                distance_after: r[4],
                scale_x: r[5],
                scale_y: r[6],
                aperture: r.get(7).copied(),
            };
            spec.validate().map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
            Instruction::Lens {
                beam: beam(line, args[0])?,
                spec,
            }
        }
        "pointwise_mul" | "pointwise_add" => {
            arity(line, kw, args, &[2])?;
            let (a, b) = (beam(line, args[0])?, beam(line, args[1])?);
            if a == b {
                return perr(line, format!("`{kw}` needs two different beams"));
            }
            if kw == "pointwise_mul" {
                Instruction::PointwiseMul(a, b)
            } else {
                Instruction::PointwiseAdd(a, b)
            }
        }
        "beam_splitter" => {
            arity(line, kw, args, &[1])?;
            Instruction::BeamSplitter(beam(line, args[0])?)
        }
        "mask" => {
            arity(line, kw, args, &[5])?;
            let c: Vec<f64> = args[1..]
                .iter()
                .map(|t| real(line, t, "mask corner"))
                .collect::<Result<_>>()?;
            if c.iter().any(|v| v.abs() > 0.5 + 1e-9) {
                return perr(line, "mask corners must lie in [-0.5, 0.5]");
            }
            Instruction::Mask {
                beam: beam(line, args[0])?,
                corner1: (c[0], c[1]),
                corner2: (c[2], c[3]),
            }
        }
        "filter" => {
            arity(line, kw, args, &[2])?;
            Instruction::Filter {
                beam: beam(line, args[0])?,
                gain: real(line, args[1], "filter gain")?,
            }
        }
        "read_out" => {
            arity(line, kw, args, &[1])?;
            Instruction::ReadOut(beam(line, args[0])?)
        }
        "detector" => {
            arity(line, kw, args, &[3, 5])?;
            let width = real(line, args[1], "detector width")?;
            if !(width > 0.0) {
                return perr(line, "detector width must be positive");
            }
            let n_cells: usize = num(line, args[2], "detector cell count")?;
            if n_cells == 0 {
                return perr(line, "detector needs at least one cell");
            }
            let slots = if args.len() == 5 {
                let first: usize = num(line, args[3], "detector first cell")?;
                let step: usize = num(line, args[4], "detector step")?;
                if step == 0 || first >= n_cells {
                    return perr(line, "detector slots must start inside the layout with a positive step");
                }
                Some((first, step))
            } else {
                None
            };
            Instruction::Detector {
                beam: beam(line, args[0])?,
                width,
                n_cells,
                slots,
            }
        }
        "pitch" => {
            arity(line, kw, args, &[1])?;
            let p = real(line, args[0], "pitch")?;
            if !(p > 0.0) {
                return perr(line, "pitch must be positive");
            }
            Instruction::Pitch(p)
        }
        other => return perr(line, format!("unknown instruction `{other}`")),
    })
}

/// Replays beam allocation to reject references to beams that cannot exist.
fn check_beams(p: &Program) -> Result<()> {
    let mut live = 0usize;
    for (instr, &line) in p.instructions.iter().zip(&p.lines) {
        let need = |b: usize| {
            if b > live {
                perr(line, format!("beam {b} does not exist here ({live} live)"))
            } else {
                Ok(())
            }
        };
        match instr {
            Instruction::Generate { .. } => live += 1,
            Instruction::PointwiseMul(a, b) | Instruction::PointwiseAdd(a, b) => {
                need(*a)?;
                need(*b)?;
                live -= 1;
            }
            Instruction::BeamSplitter(a) => {
                need(*a)?;
                live += 1;
            }
            Instruction::Lens { beam, .. }
            | Instruction::Mask { beam, .. }
            | Instruction::Filter { beam, .. }
            | Instruction::Detector { beam, .. }
            | Instruction::ReadOut(beam) => need(*beam)?,
            Instruction::Tap | Instruction::Pitch(_) => {}
        }
    }
    Ok(())
}
