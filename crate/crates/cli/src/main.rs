use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use opmul_core::modmul::{montgomery_mul_conv, montgomery_mul_exact, montgomery_mul_hilo, montgomery_setup, DigitVector};
use opmul_core::optics::{bench_lens, cropping_experiment, CropSetup};
use opmul_core::script::{execute, generate_modmul_script, parse_program, ExecOptions, ModmulGeometry};
use opmul_core::validation::{validate_aperture, ApertureSetup};
use opmul_core::Backend;

#[derive(Parser)]
#[command(name = "opmul", version, about = "Fourier-optics modular multiplication simulator")]
struct Cli {
    /// Worker threads for the optics kernels (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    #[arg(long, global = true, default_value = "fft")]
    backend: Backend,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Exact,
    Hilo,
    Conv,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an instruction file.
    Run {
        program: PathBuf,
        /// Replaces the program's output directory.
        #[arg(long, env = "OPMUL_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        tap_dir: Option<PathBuf>,
        /// Replaces the program's grid size.
        #[arg(long)]
        grid: Option<usize>,
        /// Digits (heaviest first) the detector is fitted against.
        #[arg(long)]
        expected: Option<PathBuf>,
        /// Skip writing tap and read-out images.
        #[arg(long)]
        no_images: bool,
    },
    /// Print the instruction file for one Montgomery product.
    Scriptgen {
        #[arg(long)]
        a: u128,
        #[arg(long)]
        b: u128,
        #[arg(long)]
        m: u128,
        #[arg(long, default_value_t = 1005)]
        grid: usize,
        /// Pixel pitch (mm).
        #[arg(long, default_value_t = 0.001)]
        pitch: f64,
        /// Wavelength (mm).
        #[arg(long, default_value_t = 2e-4)]
        wavelength: f64,
        /// Lens plane separation (mm).
        #[arg(long, default_value_t = 15.0)]
        separation: f64,
        #[arg(long, default_value_t = 6)]
        overlap: u32,
        #[arg(long, default_value = "output")]
        output_dir: PathBuf,
        #[arg(long, default_value = "tap")]
        tap_dir: PathBuf,
        /// Also write the expected detector digits to this file.
        #[arg(long)]
        expected_out: Option<PathBuf>,
    },
    /// Print a Montgomery product trace.
    Modmul {
        #[arg(long)]
        a: u128,
        #[arg(long)]
        b: u128,
        #[arg(long)]
        m: u128,
        #[arg(long, value_enum, default_value_t = Variant::Conv)]
        variant: Variant,
        #[arg(long, default_value_t = 6)]
        overlap: u32,
    },
    /// Two-lens imaging of a checkerboard with a cropped beam.
    CropExp {
        /// Wavelength (mm).
        #[arg(long, default_value_t = 2e-4)]
        lambda: f64,
        /// Focal length (mm).
        #[arg(long, default_value_t = 100.0)]
        focal: f64,
        /// Crop width at the second lens (mm).
        #[arg(long, default_value_t = 4.0)]
        crop: f64,
        #[arg(long, default_value_t = 250)]
        grid: usize,
    },
    /// Compare a square-aperture diffraction pattern with a quadrature oracle.
    ValidateAperture,
    /// Wall time of one lens device per grid size.
    Bench {
        #[arg(long, num_args = 1.., default_values_t = [250, 1005])]
        grid: Vec<usize>,
    },
}

fn read_expected(path: &PathBuf) -> Result<DigitVector> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let digits = text
        .split(|c: char| c.is_whitespace() || c == ',' || c == '(' || c == ')')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u64>().with_context(|| format!("bad digit `{t}` in {}", path.display())))
        .collect::<Result<Vec<_>>>()?;
    Ok(DigitVector::new(digits)?)
}

fn run(cli: Cli) -> Result<()> {
    let backend = cli.backend;
    match cli.cmd {
        Command::Run {
            program,
            output_dir,
            tap_dir,
            grid,
            expected,
            no_images,
        } => {
            let text =
                fs::read_to_string(&program).with_context(|| format!("cannot read {}", program.display()))?;
            let mut prog = parse_program(&text).with_context(|| format!("in {}", program.display()))?;
            if let Some(g) = grid {
                prog.grid_size = g;
            }
            let opts = ExecOptions {
                backend,
                write_images: !no_images,
                output_dir,
                tap_dir,
                expected: expected.as_ref().map(read_expected).transpose()?,
            };
            let report = execute(&prog, &opts)?;
            eprint!("{}", report.timing_text());
            print!("{}", report.to_text());
        }
        Command::Scriptgen {
            a,
            b,
            m,
            grid,
            pitch,
            wavelength,
            separation,
            overlap,
            output_dir,
            tap_dir,
            expected_out,
        } => {
            let geom = ModmulGeometry {
                grid,
                pitch,
                wavelength,
                separation,
                overlap,
                output_dir,
                tap_dir,
            };
            let s = generate_modmul_script(a, b, m, &geom)?;
            if let Some(p) = expected_out {
                fs::write(&p, format!("{}\n", s.expected)).with_context(|| format!("cannot write {}", p.display()))?;
            }
            print!("{}", s.text);
        }
        Command::Modmul {
            a,
            b,
            m,
            variant,
            overlap,
        } => {
            let ctx = montgomery_setup(m)?;
            let (a_bar, b_bar) = (ctx.to_montgomery(a), ctx.to_montgomery(b));
            println!("m = {}\nr = {}\nM = {}\nR = {}", ctx.m, ctx.r, ctx.m_prime, ctx.r_inv);
            println!("a_bar = {a_bar}\nb_bar = {b_bar}");
            let c_bar = match variant {
                Variant::Exact => {
                    let t = montgomery_mul_exact(a_bar, b_bar, &ctx)?;
                    println!("k1 = {}\nk2 = {}\nk3 = {}\nk4 = {}\nk5 = {}", t.k1, t.k2, t.k3, t.k4, t.k5);
                    println!("c_bar = {}", t.c_bar);
                    t.c_bar
                }
                Variant::Hilo => {
                    let t = montgomery_mul_hilo(a_bar, b_bar, &ctx)?;
                    println!(
                        "k1 = {}\nk1_lo = {}\nk1_hi = {}\nk2 = {}\nk3 = {}\nk4 = {}\nk4_hi = {}\nk5_hi = {}",
                        t.k1, t.k1_lo, t.k1_hi, t.k2, t.k3, t.k4, t.k4_hi, t.k5_hi
                    );
                    println!("c_bar = {}", t.c_bar);
                    t.c_bar
                }
                Variant::Conv => {
                    let t = montgomery_mul_conv(a_bar, b_bar, &ctx, overlap)?;
                    println!("max_digit = {}", t.max_digit());
                    print!("{}", t.report());
                    t.c_bar
                }
            };
            let c = ctx.from_montgomery(c_bar);
            println!("c = {c}");
            let want = a % m * (b % m) % m;
            if c != want {
                bail!("product {c} differs from {a} * {b} mod {m} = {want}");
            }
        }
        Command::CropExp {
            lambda,
            focal,
            crop,
            grid,
        } => {
            let setup = CropSetup {
                backend,
                ..CropSetup::default()
            };
            let r = cropping_experiment(lambda, focal, crop, grid, &setup)?;
            println!(
                "wavelength = {}\nfocal_length = {}\ncrop_width = {}\ngrid = {}\nfidelity = {:.6}",
                r.wavelength, r.focal_length, r.crop_width, r.grid, r.fidelity
            );
        }
        Command::ValidateAperture => {
            let setup = ApertureSetup::default();
            let r = validate_aperture(&setup, backend)?;
            println!(
                "grid = {}\nfresnel_number = {:.4}\nrelative_l2 = {:.3e}",
                setup.grid, r.fresnel_number, r.relative_l2
            );
            if r.relative_l2 > 1e-3 {
                bail!("relative L2 {:.3e} exceeds 1e-3", r.relative_l2);
            }
        }
        Command::Bench { grid } => {
            for g in grid {
                let t = bench_lens(g, backend)?;
                println!("grid {g} backend {backend}: {:.3} s per lens", t.as_secs_f64());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        let built = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global();
        if let Err(e) = built {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
