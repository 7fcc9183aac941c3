//! Command-line front end: full segmentation runs, one-shot denoising,
//! synthetic test data, and energy audits.
//!
//! Exit codes: 0 on success (including `--help`), 1 on usage or input
//! errors, 2 on numerical failure (a linear solve that did not converge).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use filament::config::{ConfigError, RunConfig};
use filament::denoiser::{compute_masks, discrete_energy, solve_masked};
use filament::energy::discrete_ms_energy;
use filament::geometry::{parse_snapshot, write_snapshot, Domain, GeometryError};
use filament::imaging::{
    generate_crack_tip, generate_two_region, GridImage, ImageError, RegionShape,
};
use filament::linalg::SolveError;
use filament::pipeline::{
    run_segmentation, seed_circle, seed_grid, seed_segment, PipelineError, RunStatus,
};
use filament::vec2::Vec2;

#[derive(Parser)]
#[command(name = "filament", version)]
#[command(about = "Segment and restore grayscale images with parametric contours")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full segmentation described by a config file.
    Segment {
        /// Path to a flat `key = value` configuration file.
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve the edge-preserving denoise problem once, curves held fixed.
    Denoise {
        /// Observed image (PGM).
        #[arg(long)]
        image: PathBuf,
        /// Curve snapshot whose crossed grid links are cut.
        #[arg(long)]
        curves: PathBuf,
        /// Fidelity weight, must be positive.
        #[arg(long)]
        lambda: f64,
        /// Where to write the denoised image (PGM).
        #[arg(long)]
        out: PathBuf,
    },
    /// Write synthetic test images and seed-curve snapshots.
    #[command(subcommand)]
    Generate(Generate),
    /// Print the discrete energy of an image / curves / approximation triple.
    Energy {
        /// Observed image (PGM).
        #[arg(long)]
        image: PathBuf,
        /// Curve snapshot.
        #[arg(long)]
        curves: PathBuf,
        /// Approximation image (PGM), same dimensions as the observed one.
        #[arg(long)]
        u: PathBuf,
        /// Length weight, must be positive.
        #[arg(long)]
        sigma: f64,
        /// Fidelity weight, must be positive.
        #[arg(long)]
        lambda: f64,
    },
}

#[derive(Subcommand)]
enum Generate {
    /// Square crack-tip image: a jump along the half-line left of the center
    /// whose height decays to zero at the tip.
    Crack {
        /// Image size in pixels (the node grid is size+1 per side).
        #[arg(long, default_value_t = 300)]
        size: usize,
        /// Uniform noise amplitude in [0, 1] intensity units.
        /// The PGM output quantizes to 8 bits (levels of 1/255).
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// RNG seed for the noise.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path (PGM).
        #[arg(long)]
        out: PathBuf,
    },
    /// Piecewise-constant two-region image.
    Tworegion {
        /// Image size in pixels.
        #[arg(long, default_value_t = 128)]
        size: usize,
        /// Region shape; geometry defaults scale with the size.
        #[arg(long, value_enum, default_value_t = ShapeArg::Disk)]
        shape: ShapeArg,
        /// Intensity inside the shape.
        #[arg(long, default_value_t = 0.8)]
        inside: f64,
        /// Intensity outside the shape.
        #[arg(long, default_value_t = 0.2)]
        outside: f64,
        /// Disk radius (shape `disk`; default size/4).
        #[arg(long)]
        radius: Option<f64>,
        /// Dividing line x = split (shape `halfplane`; default size/2).
        #[arg(long)]
        split: Option<f64>,
        /// Uniform noise amplitude.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// RNG seed for the noise.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path (PGM).
        #[arg(long)]
        out: PathBuf,
    },
    /// Seed-curve snapshot for the `segment` command.
    Seeds {
        /// Seed layout.
        #[arg(long, value_enum)]
        kind: SeedKind,
        /// Domain size (pixels) the seeds are laid out for.
        #[arg(long, default_value_t = 300)]
        size: usize,
        /// Height of the horizontal segment (kind `segment`;
        /// default size/2 − 1/2, the row midline next to the center).
        #[arg(long)]
        y: Option<f64>,
        /// Free-end abscissa of the segment (kind `segment`;
        /// default size/2 − 40, stopping 40 pixels short of the center).
        #[arg(long)]
        x_stop: Option<f64>,
        /// Approximate node spacing of the segment (kind `segment`).
        #[arg(long, default_value_t = 4.0)]
        spacing: f64,
        /// Circle radius (kind `circle`; default size/4).
        #[arg(long)]
        radius: Option<f64>,
        /// Number of circle nodes (kind `circle`).
        #[arg(long, default_value_t = 64)]
        nodes: usize,
        /// Lattice columns (kind `grid`).
        #[arg(long, default_value_t = 4)]
        cols: usize,
        /// Lattice rows (kind `grid`).
        #[arg(long, default_value_t = 4)]
        rows: usize,
        /// Length of each short segment (kind `grid`).
        #[arg(long, default_value_t = 8.0)]
        seg_len: f64,
        /// Output path (curve snapshot text).
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Disk,
    Halfplane,
    Stripe,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeedKind {
    Segment,
    Circle,
    Grid,
}

enum CliError {
    Usage(String),
    Numerical(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> CliError {
        CliError::Usage(e.to_string())
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> CliError {
        CliError::Usage(e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> CliError {
        CliError::Usage(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> CliError {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Usage(e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> CliError {
        CliError::Numerical(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; everything else is a
            // usage error.
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Segment { config } => cmd_segment(&config),
        Command::Denoise { image, curves, lambda, out } => {
            cmd_denoise(&image, &curves, lambda, &out)
        }
        Command::Generate(g) => cmd_generate(g),
        Command::Energy { image, curves, u, sigma, lambda } => {
            cmd_energy(&image, &curves, &u, sigma, lambda)
        }
    }
}

fn cmd_segment(path: &Path) -> Result<(), CliError> {
    let config = RunConfig::from_file(path)?;
    let state = run_segmentation(&config)?;
    let last = state.energy_log.last().expect("a run always logs at least the initial energy");
    println!("status: {}", state.status);
    println!("steps: {}", state.step);
    println!(
        "energy: {} (length {}, gradient {}, fidelity {})",
        last.energy.total, last.energy.length_term, last.energy.gradient_term, last.energy.fidelity_term
    );
    println!("outputs: {}", config.output_dir.display());
    if let RunStatus::Aborted { detail } = &state.status {
        return Err(CliError::Numerical(format!("aborted at step {}: {detail}", state.step)));
    }
    Ok(())
}

fn cmd_denoise(image: &Path, curves: &Path, lambda: f64, out: &Path) -> Result<(), CliError> {
    require_positive("lambda", lambda)?;
    let u0 = GridImage::load_pgm(image)?;
    let network = parse_snapshot(&fs::read_to_string(curves)?, Domain::of_image(&u0))?;
    let masks = compute_masks(&network);
    let u = solve_masked(&u0, &masks, lambda, None)?;
    let before = discrete_energy(&u0, &u0, &masks, lambda);
    let after = discrete_energy(&u0, &u, &masks, lambda);
    u.save_pgm(out)?;
    println!("energy: {before} -> {after}");
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_energy(
    image: &Path,
    curves: &Path,
    u_path: &Path,
    sigma: f64,
    lambda: f64,
) -> Result<(), CliError> {
    require_positive("sigma", sigma)?;
    require_positive("lambda", lambda)?;
    let u0 = GridImage::load_pgm(image)?;
    let u = GridImage::load_pgm(u_path)?;
    if (u.nx(), u.ny()) != (u0.nx(), u0.ny()) {
        return Err(CliError::Usage(format!(
            "image is {}x{} but u is {}x{}; dimensions must match",
            u0.nx(),
            u0.ny(),
            u.nx(),
            u.ny()
        )));
    }
    let network = parse_snapshot(&fs::read_to_string(curves)?, Domain::of_image(&u0))?;
    let b = discrete_ms_energy(&network, &u, &u0, sigma, lambda);
    println!("length_term = {}", b.length_term);
    println!("gradient_term = {}", b.gradient_term);
    println!("fidelity_term = {}", b.fidelity_term);
    println!("total = {}", b.total);
    Ok(())
}

fn cmd_generate(g: Generate) -> Result<(), CliError> {
    match g {
        Generate::Crack { size, noise, seed, out } => {
            require_size(size)?;
            let img = with_noise(generate_crack_tip(size, size), noise, seed)?;
            img.save_pgm(&out)?;
            println!("wrote {}", out.display());
        }
        Generate::Tworegion { size, shape, inside, outside, radius, split, noise, seed, out } => {
            require_size(size)?;
            let s = size as f64;
            let shape = match shape {
                ShapeArg::Disk => RegionShape::Disk {
                    center: Vec2::new(s / 2.0, s / 2.0),
                    radius: radius.unwrap_or(s / 4.0),
                },
                ShapeArg::Halfplane => RegionShape::HalfPlane { split_x: split.unwrap_or(s / 2.0) },
                ShapeArg::Stripe => RegionShape::Stripe {
                    y_min: 0.45 * s,
                    y_max: 0.55 * s,
                    x_stop: 0.6 * s,
                },
            };
            let img = generate_two_region(size, size, shape, inside, outside)?;
            let img = with_noise(img, noise, seed)?;
            img.save_pgm(&out)?;
            println!("wrote {}", out.display());
        }
        Generate::Seeds {
            kind,
            size,
            y,
            x_stop,
            spacing,
            radius,
            nodes,
            cols,
            rows,
            seg_len,
            out,
        } => {
            require_size(size)?;
            let s = size as f64;
            let domain = Domain { nx: size, ny: size, h: 1.0 };
            let network = match kind {
                SeedKind::Segment => {
                    let x_stop = x_stop.unwrap_or(s / 2.0 - 40.0);
                    require_positive("x-stop", x_stop)?;
                    require_positive("spacing", spacing)?;
                    seed_segment(domain, y.unwrap_or(s / 2.0 - 0.5), x_stop, spacing)?
                }
                SeedKind::Circle => {
                    let radius = radius.unwrap_or(s / 4.0);
                    require_positive("radius", radius)?;
                    if nodes < 3 {
                        return Err(CliError::Usage(format!(
                            "a closed circle needs at least 3 nodes, got {nodes}"
                        )));
                    }
                    seed_circle(domain, Vec2::new(s / 2.0, s / 2.0), radius, nodes)?
                }
                SeedKind::Grid => {
                    require_positive("seg-len", seg_len)?;
                    if cols < 1 || rows < 1 {
                        return Err(CliError::Usage(format!(
                            "the seed lattice needs at least one column and row, got {cols}x{rows}"
                        )));
                    }
                    seed_grid(domain, cols, rows, seg_len)?
                }
            };
            fs::write(&out, write_snapshot(&network))?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn with_noise(img: GridImage, noise: f64, seed: u64) -> Result<GridImage, CliError> {
    if noise < 0.0 {
        return Err(CliError::Usage(format!("noise amplitude must be nonnegative, got {noise}")));
    }
    Ok(if noise > 0.0 { img.add_noise(noise, seed) } else { img })
}

fn require_positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{name} must be positive, got {v}")))
    }
}

fn require_size(size: usize) -> Result<(), CliError> {
    if size >= 2 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("image size must be at least 2, got {size}")))
    }
}
