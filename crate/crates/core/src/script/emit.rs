use std::fmt::Write as _;

use super::{Instruction, Program};

/// Six decimals when that reads back to the same value, else the shortest
/// exact form.
pub(crate) fn fnum(v: f64) -> String {
    let six = format!("{v:.6}");
    if six.parse::<f64>() == Ok(v) {
        six
    } else {
        format!("{v:?}")
    }
}

fn cell_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        fnum(v)
    }
}

/// Text that [`super::parse_program`] reads back to an equal program.
pub fn emit_program(p: &Program) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}", p.output_dir.display());
    let _ = writeln!(s, "{}", p.tap_dir.display());
    let _ = writeln!(s, "{}", fnum(p.wavelength));
    let _ = writeln!(s, "{}", p.grid_size);
    for instr in &p.instructions {
        let _ = writeln!(s, "{}", emit_instruction(instr));
    }
    s
}

pub(crate) fn emit_instruction(instr: &Instruction) -> String {
    let kw = instr.keyword();
    match instr {
        Instruction::Generate {
            meta,
            n_cells,
            values,
        } => {
            let vals: Vec<String> = values.iter().map(|v| cell_value(*v)).collect();
            format!("{kw} {meta} {n_cells} {}", vals.join(" "))
        }
        Instruction::Tap => kw.to_string(),
        Instruction::Lens { beam, spec } => {
            let mut line = format!(
                "{kw} {beam} {} {} {} {} {} {} {}",
                fnum(spec.radius1),
                fnum(spec.radius2),
                fnum(spec.refractive_index),
                fnum(spec.thickness),
                fnum(spec.distance_after),
                fnum(spec.scale_x),
                fnum(spec.scale_y)
            );
            if let Some(a) = spec.aperture {
                line.push(' ');
                line.push_str(&fnum(a));
            }
            line
        }
        Instruction::PointwiseMul(a, b) | Instruction::PointwiseAdd(a, b) => format!("{kw} {a} {b}"),
        Instruction::BeamSplitter(a) | Instruction::ReadOut(a) => format!("{kw} {a}"),
        Instruction::Mask {
            beam,
            corner1,
            corner2,
        } => format!(
            "{kw} {beam} {} {} {} {}",
            fnum(corner1.0),
            fnum(corner1.1),
            fnum(corner2.0),
            fnum(corner2.1)
        ),
        Instruction::Filter { beam, gain } => format!("{kw} {beam} {}", fnum(*gain)),
        Instruction::Detector {
            beam,
            width,
            n_cells,
            slots,
        } => {
            let mut line = format!("{kw} {beam} {} {n_cells}", fnum(*width));
            if let Some((first, step)) = slots {
                let _ = write!(line, " {first} {step}");
            }
            line
        }
        Instruction::Pitch(p) => format!("{kw} {}", fnum(*p)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(fnum(0.0002), "0.000200");
        assert_eq!(fnum(15.0), "15.000000");
        assert_eq!(fnum(-0.044776), "-0.044776");
        assert_eq!(fnum(11.0 / 67.0), "0.16417910447761194");
        assert_eq!(fnum(1e-9), "1e-9");
        assert_eq!(cell_value(1.0), "1");
        assert_eq!(cell_value(0.5), "0.500000");
    }
}
