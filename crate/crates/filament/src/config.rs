//! Run configuration: a flat `key = value` text format.
//!
//! One setting per line, `#` starts a comment, keys are lowercase. Unknown
//! and duplicate keys are errors — a config that parses is a config that was
//! understood completely. [`RunConfig::echo`] writes the effective settings
//! back in the same format (every default made explicit), which the pipeline
//! drops into each run directory as `config.echo`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::imaging::{generate_crack_tip, GridImage, ImageError};

/// Where the observed image `u₀` comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImageSource {
    /// A PGM file on disk.
    File(PathBuf),
    /// The generated crack-tip image, written `crack:<nx>x<ny>` (or
    /// `crack:<n>` for a square). Generated images keep full floating-point
    /// precision, which matters for gradients far below the 8-bit PGM
    /// quantization step.
    Crack { nx: usize, ny: usize },
}

impl ImageSource {
    fn parse(value: &str) -> Result<ImageSource, String> {
        let Some(dims) = value.strip_prefix("crack:") else {
            return Ok(ImageSource::File(PathBuf::from(value)));
        };
        let (sx, sy) = match dims.split_once('x') {
            Some((a, b)) => (a, b),
            None => (dims, dims),
        };
        let nx = sx.parse().map_err(|_| format!("bad crack width `{sx}`"))?;
        let ny = sy.parse().map_err(|_| format!("bad crack height `{sy}`"))?;
        if nx < 2 || ny < 2 {
            return Err(format!("crack image {nx}x{ny} too small"));
        }
        Ok(ImageSource::Crack { nx, ny })
    }

    /// Loads or generates the image.
    ///
    /// # Errors
    /// [`ImageError`] from PGM reading.
    pub fn load(&self) -> Result<GridImage, ImageError> {
        match self {
            ImageSource::File(path) => GridImage::load_pgm(path),
            ImageSource::Crack { nx, ny } => Ok(generate_crack_tip(*nx, *ny)),
        }
    }

    fn echo(&self) -> String {
        match self {
            ImageSource::File(path) => path.display().to_string(),
            ImageSource::Crack { nx, ny } => format!("crack:{nx}x{ny}"),
        }
    }
}

/// Which variant of the algorithm a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Full model: denoised `u`, curves with free endpoints.
    FreeEnd,
    /// Piecewise-constant (Chan-Vese) reduction: `u` is painted with region
    /// means; curves must be closed or boundary-attached.
    ChanVesePc,
    /// Like [`Mode::FreeEnd`], but first deletes curve nodes whose image jump
    /// is below `tol`, opening curves up where the data shows no edge.
    Postprocess,
}

impl Mode {
    pub fn token(self) -> &'static str {
        match self {
            Mode::FreeEnd => "freeend",
            Mode::ChanVesePc => "chanvese-pc",
            Mode::Postprocess => "postprocess",
        }
    }

    pub fn from_token(token: &str) -> Option<Mode> {
        match token {
            "freeend" => Some(Mode::FreeEnd),
            "chanvese-pc" => Some(Mode::ChanVesePc),
            "postprocess" => Some(Mode::Postprocess),
            _ => None,
        }
    }
}

/// Everything one segmentation run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub image: ImageSource,
    /// Initial curves, in the snapshot format.
    pub curves: PathBuf,
    pub sigma: f64,
    pub lambda: f64,
    pub dt: f64,
    /// Probe distance (in grid units) for jumps across a curve.
    pub a: f64,
    pub max_steps: usize,
    /// Curve-evolution steps per bulk (denoise) solve.
    pub bulk_cadence: usize,
    pub mode: Mode,
    /// Jump threshold for postprocess node deletion, in (0, 1).
    pub tol: f64,
    /// Target node spacing for remeshing; the topology grid cell is twice
    /// this, and the default deletion length `l_min` four times.
    pub h_target: f64,
    pub l_min: f64,
    pub endpoint_normal_motion: bool,
    pub output_dir: PathBuf,
    /// Write a curve snapshot every this many steps; 0 = only the final one.
    pub snapshot_every: usize,
    pub seed: u64,
}

/// Errors from reading or validating a configuration.
#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    /// Malformed line, bad value, unknown or duplicate key.
    Parse { line: usize, detail: String },
    MissingKey { key: &'static str },
    /// A parsed value violating an invariant (sign, range).
    Invalid { key: &'static str, detail: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigError::Parse { line, detail } => write!(f, "config line {line}: {detail}"),
            ConfigError::MissingKey { key } => write!(f, "config is missing `{key}`"),
            ConfigError::Invalid { key, detail } => write!(f, "config `{key}`: {detail}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<std::io::Error> for ConfigError {
    fn from(e: std::io::Error) -> Self {
        ConfigError::Io(e)
    }
}

/// Raw string values per key, collected before typing.
struct RawConfig {
    entries: Vec<(&'static str, String)>,
}

const KEYS: [&str; 16] = [
    "image",
    "curves",
    "sigma",
    "lambda",
    "dt",
    "a",
    "max_steps",
    "bulk_cadence",
    "mode",
    "tol",
    "h_target",
    "l_min",
    "endpoint_normal_motion",
    "output_dir",
    "snapshot_every",
    "seed",
];

impl RawConfig {
    fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| *k == key).map(|(_, v)| v.as_str())
    }
}

impl RunConfig {
    /// Reads and parses a config file.
    ///
    /// # Errors
    /// [`ConfigError`] on IO, parse, or validation failure.
    pub fn from_file(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
        RunConfig::parse(&fs::read_to_string(path)?)
    }

    /// Parses config text. `image`, `curves`, `sigma`, `lambda`, and `dt`
    /// are required; every other key has a default (see [`RunConfig::echo`]
    /// output for the effective values).
    ///
    /// # Errors
    /// [`ConfigError`] on malformed lines, unknown or duplicate keys, bad
    /// values, or invariant violations.
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut entries: Vec<(&'static str, String)> = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = match raw_line.split_once('#') {
                Some((before, _)) => before,
                None => raw_line,
            }
            .trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Parse {
                    line,
                    detail: format!("expected `key = value`, got `{content}`"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            let Some(&known) = KEYS.iter().find(|k| **k == key) else {
                return Err(ConfigError::Parse { line, detail: format!("unknown key `{key}`") });
            };
            if entries.iter().any(|(k, _)| *k == known) {
                return Err(ConfigError::Parse {
                    line,
                    detail: format!("duplicate key `{key}`"),
                });
            }
            if value.is_empty() {
                return Err(ConfigError::Parse { line, detail: format!("empty value for `{key}`") });
            }
            entries.push((known, value.to_string()));
        }
        RunConfig::from_raw(&RawConfig { entries })
    }

    fn from_raw(raw: &RawConfig) -> Result<RunConfig, ConfigError> {
        let image = ImageSource::parse(require(raw, "image")?)
            .map_err(|detail| ConfigError::Invalid { key: "image", detail })?;
        let curves = PathBuf::from(require(raw, "curves")?);
        let sigma = positive(raw, "sigma", None)?;
        let lambda = positive(raw, "lambda", None)?;
        let dt = positive(raw, "dt", None)?;
        let a = positive(raw, "a", Some(1.5))?;
        let max_steps = count(raw, "max_steps", 1000)?;
        let bulk_cadence = count(raw, "bulk_cadence", 10)?;
        if bulk_cadence == 0 {
            return Err(ConfigError::Invalid {
                key: "bulk_cadence",
                detail: "must be at least 1".into(),
            });
        }
        let mode = match raw.get("mode") {
            None => Mode::FreeEnd,
            Some(v) => Mode::from_token(v).ok_or_else(|| ConfigError::Invalid {
                key: "mode",
                detail: format!("`{v}` is not freeend, chanvese-pc, or postprocess"),
            })?,
        };
        let tol = positive(raw, "tol", Some(0.3))?;
        if tol >= 1.0 {
            return Err(ConfigError::Invalid {
                key: "tol",
                detail: format!("{tol} outside (0, 1)"),
            });
        }
        let h_target = positive(raw, "h_target", Some(4.0))?;
        let l_min = positive(raw, "l_min", Some(4.0 * h_target))?;
        let endpoint_normal_motion = boolean(raw, "endpoint_normal_motion", true)?;
        let output_dir = PathBuf::from(raw.get("output_dir").unwrap_or("out"));
        let snapshot_every = count(raw, "snapshot_every", 0)?;
        let seed = match raw.get("seed") {
            None => 0,
            Some(v) => v.parse().map_err(|_| ConfigError::Invalid {
                key: "seed",
                detail: format!("`{v}` is not an unsigned integer"),
            })?,
        };
        Ok(RunConfig {
            image,
            curves,
            sigma,
            lambda,
            dt,
            a,
            max_steps,
            bulk_cadence,
            mode,
            tol,
            h_target,
            l_min,
            endpoint_normal_motion,
            output_dir,
            snapshot_every,
            seed,
        })
    }

    /// The effective configuration in the config file format, every key
    /// explicit, in fixed order. Parsing the echo reproduces `self`.
    pub fn echo(&self) -> String {
        format!(
            "image = {}\ncurves = {}\nsigma = {}\nlambda = {}\ndt = {}\na = {}\n\
             max_steps = {}\nbulk_cadence = {}\nmode = {}\ntol = {}\nh_target = {}\n\
             l_min = {}\nendpoint_normal_motion = {}\noutput_dir = {}\n\
             snapshot_every = {}\nseed = {}\n",
            self.image.echo(),
            self.curves.display(),
            self.sigma,
            self.lambda,
            self.dt,
            self.a,
            self.max_steps,
            self.bulk_cadence,
            self.mode.token(),
            self.tol,
            self.h_target,
            self.l_min,
            self.endpoint_normal_motion,
            self.output_dir.display(),
            self.snapshot_every,
            self.seed,
        )
    }
}

fn require<'a>(raw: &'a RawConfig, key: &'static str) -> Result<&'a str, ConfigError> {
    raw.get(key).ok_or(ConfigError::MissingKey { key })
}

/// A strictly positive real; `default = None` makes the key required.
fn positive(raw: &RawConfig, key: &'static str, default: Option<f64>) -> Result<f64, ConfigError> {
    let value = match raw.get(key) {
        Some(v) => v,
        None => return default.ok_or(ConfigError::MissingKey { key }),
    };
    let parsed: f64 = value.parse().map_err(|_| ConfigError::Invalid {
        key,
        detail: format!("`{value}` is not a number"),
    })?;
    if !parsed.is_finite() || parsed <= 0.0 {
        return Err(ConfigError::Invalid { key, detail: format!("{parsed} is not positive") });
    }
    Ok(parsed)
}

fn count(raw: &RawConfig, key: &'static str, default: usize) -> Result<usize, ConfigError> {
    match raw.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| ConfigError::Invalid {
            key,
            detail: format!("`{v}` is not a nonnegative integer"),
        }),
    }
}

fn boolean(raw: &RawConfig, key: &'static str, default: bool) -> Result<bool, ConfigError> {
    match raw.get(key) {
        None => Ok(default),
        Some("true") => Ok(true),
        Some("false") => Ok(false),
        Some(v) => Err(ConfigError::Invalid { key, detail: format!("`{v}` is not true/false") }),
    }
}
