//! Grid images: storage, PGM I/O, synthetic test images, bilinear sampling and
//! forward difference quotients.
//!
//! A [`GridImage`] stores values on the nodes of a rectangular grid. Node
//! `(i, j)` sits at physical coordinates `(i·h, j·h)` with `i ∈ 0..=N_x`,
//! `j ∈ 0..=N_y`, and `j = 0` is the *bottom* row (mathematical orientation).
//! PGM files store rows top-first, so file row `0` is grid row `N_y`.

use crate::vec2::Vec2;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand_core::{RngCore, SeedableRng};

/// A node index pair into a [`GridImage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridPoint {
    pub i: usize,
    pub j: usize,
}

impl GridPoint {
    pub fn new(i: usize, j: usize) -> Self {
        GridPoint { i, j }
    }
}

/// Coordinate axis for difference quotients: `X` is horizontal, `Y` vertical.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Errors from image I/O and generators.
#[derive(Debug)]
pub enum ImageError {
    Io(std::io::Error),
    /// The file is not a PGM this reader accepts.
    Format { detail: String },
    /// A generator parameter is out of its documented range.
    Parameter { detail: String },
}

impl fmt::Display for ImageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageError::Io(e) => write!(f, "i/o error: {e}"),
            ImageError::Format { detail } => write!(f, "bad image file: {detail}"),
            ImageError::Parameter { detail } => write!(f, "bad parameter: {detail}"),
        }
    }
}

impl std::error::Error for ImageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            ImageError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for ImageError {
    fn from(e: std::io::Error) -> Self {
        ImageError::Io(e)
    }
}

/// Grayscale image on grid nodes, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridImage {
    nx: usize,
    ny: usize,
    h: f64,
    values: Vec<f64>,
}

impl GridImage {
    /// Constant image. `nx`, `ny` are the largest node indices, so the image
    /// has `(nx+1) × (ny+1)` nodes.
    ///
    /// # Panics
    /// Panics if `value` is outside `[0, 1]` or `h ≤ 0`.
    pub fn constant(nx: usize, ny: usize, h: f64, value: f64) -> Self {
        assert!((0.0..=1.0).contains(&value), "image value {value} outside [0,1]");
        assert!(h > 0.0, "grid spacing must be positive");
        GridImage { nx, ny, h, values: vec![value; (nx + 1) * (ny + 1)] }
    }

    /// Builds an image by evaluating `f` at every node's physical coordinates;
    /// results are clamped to `[0, 1]`.
    ///
    /// # Panics
    /// Panics if `h ≤ 0`.
    pub fn from_fn(nx: usize, ny: usize, h: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(h > 0.0, "grid spacing must be positive");
        let mut values = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                values.push(f(i as f64 * h, j as f64 * h).clamp(0.0, 1.0));
            }
        }
        GridImage { nx, ny, h, values }
    }

    /// Wraps an existing value vector (row-major, bottom row first).
    ///
    /// # Panics
    /// Panics if the length is not `(nx+1)·(ny+1)`, a value falls outside
    /// `[0, 1]`, or `h ≤ 0`.
    pub fn from_values(nx: usize, ny: usize, h: f64, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), (nx + 1) * (ny + 1), "value vector length mismatch");
        assert!(h > 0.0, "grid spacing must be positive");
        assert!(
            values.iter().all(|v| (0.0..=1.0).contains(v)),
            "image values must lie in [0,1]"
        );
        GridImage { nx, ny, h, values }
    }

    /// Largest node index in x; the image has `nx() + 1` node columns.
    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Largest node index in y; the image has `ny() + 1` node rows.
    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Physical extent `(nx·h, ny·h)` of the node rectangle.
    pub fn extent(&self) -> (f64, f64) {
        (self.nx as f64 * self.h, self.ny as f64 * self.h)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.nx && j <= self.ny, "node ({i},{j}) out of grid");
        j * (self.nx + 1) + i
    }

    /// Value at node `(i, j)`.
    ///
    /// # Panics
    /// Panics if the node is outside the grid.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i <= self.nx && j <= self.ny, "node ({i},{j}) out of grid");
        self.values[j * (self.nx + 1) + i]
    }

    /// Overwrites the value at node `(i, j)`. The caller keeps the `[0, 1]`
    /// invariant; out-of-range values are a bug (checked in debug builds).
    ///
    /// # Panics
    /// Panics if the node is outside the grid.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!((0.0..=1.0).contains(&v), "image value {v} outside [0,1]");
        let k = self.idx(i, j);
        self.values[k] = v;
    }

    /// All node values, row-major with the bottom row first.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node_pos(&self, p: GridPoint) -> Vec2 {
        Vec2::new(p.i as f64 * self.h, p.j as f64 * self.h)
    }

    /// Bilinear interpolation at physical point `p`. Points outside the image
    /// rectangle are clamped onto its boundary first (documented behavior, used
    /// when a curve node sits near the border and its sampling offset leaves
    /// the domain).
    pub fn sample_bilinear(&self, p: Vec2) -> f64 {
        let (wx, wy) = self.extent();
        let x = p.x.clamp(0.0, wx);
        let y = p.y.clamp(0.0, wy);
        // Cell index, pulled back so x = wx still addresses the last cell; a
        // degenerate axis (single node line) contributes a constant factor.
        let cell = |coord: f64, n: usize| -> (usize, f64) {
            if n == 0 {
                return (0, 0.0);
            }
            let c = ((coord / self.h) as usize).min(n - 1);
            (c, (coord / self.h - c as f64).clamp(0.0, 1.0))
        };
        let (ci, fx) = cell(x, self.nx);
        let (cj, fy) = cell(y, self.ny);
        let i1 = (ci + 1).min(self.nx);
        let j1 = (cj + 1).min(self.ny);
        let v00 = self.get(ci, cj);
        let v10 = self.get(i1, cj);
        let v01 = self.get(ci, j1);
        let v11 = self.get(i1, j1);
        (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11)
    }

    /// Forward difference quotient `(u(z + h·e_axis) − u(z)) / h`.
    ///
    /// # Panics
    /// Panics if `z` or `z + e_axis` is outside the grid.
    pub fn forward_diff(&self, z: GridPoint, axis: Axis) -> f64 {
        let (i2, j2) = match axis {
            Axis::X => (z.i + 1, z.j),
            Axis::Y => (z.i, z.j + 1),
        };
        (self.get(i2, j2) - self.get(z.i, z.j)) / self.h
    }

    /// Reads a P2 (ASCII) or P5 (binary) PGM file. Values are scaled to
    /// `[0, 1]` by dividing by the header's maxval; maxval up to 65535 is
    /// accepted (P5 uses two big-endian bytes per sample above 255). File rows
    /// are top-first and become grid rows `ny`, `ny−1`, …, `0`.
    ///
    /// # Errors
    /// [`ImageError::Format`] on anything that is not a well-formed PGM within
    /// those bounds; [`ImageError::Io`] on read failure.
    pub fn load_pgm(path: impl AsRef<Path>) -> Result<GridImage, ImageError> {
        let data = fs::read(path)?;
        let mut cur = ByteCursor { data: &data, pos: 0 };

        let magic = cur.next_token().ok_or_else(|| fmt_err("missing magic number"))?;
        let binary = match magic {
            b"P2" => false,
            b"P5" => true,
            _ => return Err(fmt_err("not a P2/P5 PGM file")),
        };
        let width = cur.next_number("width")?;
        let height = cur.next_number("height")?;
        let maxval = cur.next_number("maxval")?;
        if width == 0 || height == 0 {
            return Err(fmt_err("zero image dimension"));
        }
        if width > 1 << 20 || height > 1 << 20 {
            return Err(fmt_err("image dimension overflow"));
        }
        if maxval == 0 || maxval > 65535 {
            return Err(fmt_err(&format!("maxval {maxval} outside 1..=65535")));
        }
        let n = (width as usize)
            .checked_mul(height as usize)
            .ok_or_else(|| fmt_err("image dimension overflow"))?;

        let mut samples = Vec::with_capacity(n);
        if binary {
            // Exactly one whitespace byte separates the header from the raster.
            if cur.pos >= data.len() || !data[cur.pos].is_ascii_whitespace() {
                return Err(fmt_err("missing raster separator"));
            }
            cur.pos += 1;
            let wide = maxval > 255;
            let need = n * if wide { 2 } else { 1 };
            let raster = data
                .get(cur.pos..cur.pos + need)
                .ok_or_else(|| fmt_err("truncated raster"))?;
            if wide {
                for pair in raster.chunks_exact(2) {
                    samples.push(u32::from(pair[0]) << 8 | u32::from(pair[1]));
                }
            } else {
                samples.extend(raster.iter().map(|&b| u32::from(b)));
            }
        } else {
            for _ in 0..n {
                samples.push(cur.next_number("sample")?);
            }
        }
        if samples.iter().any(|&s| s > maxval) {
            return Err(fmt_err("sample exceeds maxval"));
        }

        let nx = width as usize - 1;
        let ny = height as usize - 1;
        let scale = 1.0 / f64::from(maxval);
        let mut img = GridImage::constant(nx, ny, 1.0, 0.0);
        for (row, chunk) in samples.chunks_exact(nx + 1).enumerate() {
            let j = ny - row;
            for (i, &s) in chunk.iter().enumerate() {
                img.set(i, j, f64::from(s) * scale);
            }
        }
        Ok(img)
    }

    /// Writes a binary (P5) PGM with maxval 255, rounding samples half-up.
    ///
    /// # Errors
    /// [`ImageError::Io`] on write failure.
    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let mut out = Vec::with_capacity((self.nx + 1) * (self.ny + 1) + 32);
        write!(out, "P5\n{} {}\n255\n", self.nx + 1, self.ny + 1)?;
        for row in 0..=self.ny {
            let j = self.ny - row;
            for i in 0..=self.nx {
                let v = (self.get(i, j) * 255.0 + 0.5).floor();
                out.push(v.clamp(0.0, 255.0) as u8);
            }
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// Adds uniform noise in `[−amplitude, amplitude]` to every node, clamped
    /// back to `[0, 1]`. Deterministic in the seed: nodes are visited bottom
    /// row first, left to right.
    pub fn add_noise(&self, amplitude: f64, seed: u64) -> GridImage {
        assert!(amplitude >= 0.0, "noise amplitude must be nonnegative");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut img = self.clone();
        for v in &mut img.values {
            let delta = (2.0 * uniform01(&mut rng) - 1.0) * amplitude;
            *v = (*v + delta).clamp(0.0, 1.0);
        }
        img
    }
}

/// Uniform sample in `[0, 1)` with 53 random bits, shared by every consumer of
/// randomness in the crate so seeded runs are reproducible bit for bit.
pub fn uniform01(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * 2f64.powi(-53)
}

fn fmt_err(detail: &str) -> ImageError {
    ImageError::Format { detail: detail.to_string() }
}

struct ByteCursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn skip_filler(&mut self) {
        while self.pos < self.data.len() {
            let b = self.data[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Option<&'a [u8]> {
        self.skip_filler();
        if self.pos >= self.data.len() {
            return None;
        }
        let start = self.pos;
        while self.pos < self.data.len()
            && !self.data[self.pos].is_ascii_whitespace()
            && self.data[self.pos] != b'#'
        {
            self.pos += 1;
        }
        Some(&self.data[start..self.pos])
    }

    fn next_number(&mut self, what: &str) -> Result<u32, ImageError> {
        let tok = self.next_token().ok_or_else(|| fmt_err(&format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| fmt_err(&format!("invalid {what}")))
    }
}

/// Crack-tip test image: `u₀(x) = a·√r·sin(θ/2) + b` in polar coordinates
/// `(r, θ)` about the image center, `θ ∈ (−π, π]`, so the jump of the sine at
/// `θ = ±π` puts the discontinuity on the horizontal ray to the *left* of
/// center. The normalization `a = 1/(2√r_max)`, `b = 1/2` (with `r_max` the
/// largest center-to-node distance) keeps all values inside `[0, 1]`.
///
/// The jump across the crack at distance `r` from the tip is `2a√r = √(r/r_max)`.
///
/// # Panics
/// Panics if `nx < 3` or `ny < 3`.
pub fn generate_crack_tip(nx: usize, ny: usize) -> GridImage {
    assert!(nx >= 3 && ny >= 3, "crack-tip image needs at least a 4x4 node grid");
    let h = 1.0;
    let cx = nx as f64 * h / 2.0;
    let cy = ny as f64 * h / 2.0;
    // Largest center-to-node distance: one of the four corners.
    let r_max = [(0.0, 0.0), (nx as f64, 0.0), (0.0, ny as f64), (nx as f64, ny as f64)]
        .iter()
        .map(|&(x, y)| ((x - cx) * (x - cx) + (y - cy) * (y - cy)).sqrt())
        .fold(0.0, f64::max);
    let a = 1.0 / (2.0 * r_max.sqrt());
    let b = 0.5;
    GridImage::from_fn(nx, ny, h, |x, y| {
        let dx = x - cx;
        let dy = y - cy;
        let r = (dx * dx + dy * dy).sqrt();
        let theta = dy.atan2(dx);
        a * r.sqrt() * (theta / 2.0).sin() + b
    })
}

/// Shape of the bright/dark partition for [`generate_two_region`].
#[derive(Debug, Clone, Copy)]
pub enum RegionShape {
    /// Nodes with `|p − center| ≤ radius` are inside.
    Disk { center: Vec2, radius: f64 },
    /// Nodes with `x < split_x` are inside.
    HalfPlane { split_x: f64 },
    /// Horizontal band from the left boundary that stops inside the image:
    /// nodes with `y_min ≤ y ≤ y_max` and `x ≤ x_stop` are inside.
    Stripe { y_min: f64, y_max: f64, x_stop: f64 },
}

/// Piecewise-constant two-region image: `inside` intensity on the shape,
/// `outside` elsewhere. Spacing is `h = 1`.
///
/// # Errors
/// [`ImageError::Parameter`] if an intensity falls outside `[0, 1]`.
pub fn generate_two_region(
    nx: usize,
    ny: usize,
    shape: RegionShape,
    inside: f64,
    outside: f64,
) -> Result<GridImage, ImageError> {
    for v in [inside, outside] {
        if !(0.0..=1.0).contains(&v) {
            return Err(ImageError::Parameter { detail: format!("intensity {v} outside [0,1]") });
        }
    }
    Ok(GridImage::from_fn(nx, ny, 1.0, |x, y| {
        let is_inside = match shape {
            RegionShape::Disk { center, radius } => Vec2::new(x, y).dist(center) <= radius,
            RegionShape::HalfPlane { split_x } => x < split_x,
            RegionShape::Stripe { y_min, y_max, x_stop } => (y_min..=y_max).contains(&y) && x <= x_stop,
        };
        if is_inside {
            inside
        } else {
            outside
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_within_one_level() {
        let img = GridImage::from_values(2, 0, 1.0, vec![0.0, 0.5, 1.0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        img.save_pgm(&path).unwrap();
        let back = GridImage::load_pgm(&path).unwrap();
        assert_eq!((back.nx(), back.ny()), (2, 0));
        for i in 0..=2 {
            let d = (back.get(i, 0) - img.get(i, 0)).abs();
            assert!(d <= 1.0 / 255.0, "node {i} drifted by {d} in round trip");
        }
    }

    #[test]
    fn ascii_pgm_loads_with_top_row_first() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        fs::write(&path, "P2\n# comment\n2 2\n255\n0 255\n255 0\n").unwrap();
        let img = GridImage::load_pgm(&path).unwrap();
        // File row 0 is the top of the image, i.e. grid row j = 1.
        assert_eq!(img.get(0, 1), 0.0);
        assert_eq!(img.get(1, 1), 1.0);
        assert_eq!(img.get(0, 0), 1.0);
        assert_eq!(img.get(1, 0), 0.0);
    }

    #[test]
    fn sixteen_bit_binary_pgm_loads_big_endian() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.pgm");
        let mut bytes = b"P5\n2 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0x00, 0x00, 0xff, 0xff]);
        fs::write(&path, bytes).unwrap();
        let img = GridImage::load_pgm(&path).unwrap();
        assert_eq!(img.get(0, 0), 0.0);
        assert_eq!(img.get(1, 0), 1.0);
    }

    #[test]
    fn truncated_pgm_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        fs::write(&path, "P5\n4 4\n255\nab").unwrap();
        match GridImage::load_pgm(&path) {
            Err(ImageError::Format { .. }) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn crack_tip_center_node_is_the_offset_b() {
        // Odd node counts put a node exactly at the center, where r = 0.
        let img = generate_crack_tip(4, 4);
        assert_eq!(img.get(2, 2), 0.5, "center value should equal the offset b");
    }

    #[test]
    fn crack_tip_values_stay_in_unit_interval() {
        let img = generate_crack_tip(299, 299);
        let lo = img.values().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = img.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo >= 0.0 && hi <= 1.0, "range [{lo}, {hi}] escapes [0,1]");
        // The extremes sit at the left corners where √r·|sin(θ/2)| peaks:
        // |sin(3π/8)|·√r_max ≈ 0.924·√r_max, i.e. values ≈ 0.5 ∓ 0.462.
        assert!(lo < 0.05 && hi > 0.95, "range [{lo}, {hi}] narrower than expected");
    }

    #[test]
    fn crack_tip_jump_occurs_only_across_the_left_ray() {
        // 301 nodes per side → center node (150, 150); the ray θ = π runs along
        // y = 150, x < 150. The sine jumps between rows 149 and 150.
        let img = generate_crack_tip(300, 300);
        let r = 25.0;
        let i = 150 - 25;
        let jump = (img.get(i, 150) - img.get(i, 149)).abs();
        let r_max = 150.0 * std::f64::consts::SQRT_2;
        let expected = (r / r_max).sqrt();
        assert!(
            (jump - expected).abs() < 5e-3 * expected,
            "jump {jump} across the crack at r = {r}, expected ≈ {expected}"
        );
        // One row further up there is no discontinuity.
        let smooth = (img.get(i, 151) - img.get(i, 150)).abs();
        assert!(smooth < 0.01, "field should be continuous above the ray, saw step {smooth}");
        // And to the right of center the same row pair is continuous too.
        let right = (img.get(150 + 25, 150) - img.get(150 + 25, 149)).abs();
        assert!(right < 0.01, "field should be continuous right of center, saw step {right}");
    }

    #[test]
    fn forward_diff_on_crack_pair_matches_jump_law() {
        let img = generate_crack_tip(300, 300);
        let d = img.forward_diff(GridPoint::new(125, 149), Axis::Y);
        let r_max = 150.0 * std::f64::consts::SQRT_2;
        let expected = 2.0 * (1.0 / (2.0 * r_max.sqrt())) * 25.0f64.sqrt();
        assert!(
            (d.abs() - expected).abs() < 5e-3 * expected,
            "difference quotient {d} vs jump law {expected}"
        );
    }

    #[test]
    fn forward_diff_is_zero_on_constants_and_one_on_ramps() {
        let c = GridImage::constant(5, 5, 1.0, 0.3);
        assert_eq!(c.forward_diff(GridPoint::new(2, 2), Axis::X), 0.0);
        let h = 0.5;
        let ramp = GridImage::from_fn(5, 5, h, |x, _| x / 5.0);
        let d = ramp.forward_diff(GridPoint::new(1, 3), Axis::X);
        assert!((d - 0.2).abs() < 1e-12, "ramp slope came out {d}");
    }

    #[test]
    fn two_region_half_plane_and_degenerate_disk() {
        let img = generate_two_region(4, 4, RegionShape::HalfPlane { split_x: 2.0 }, 0.2, 0.8).unwrap();
        assert_eq!(img.get(0, 0), 0.2);
        assert_eq!(img.get(4, 0), 0.8);

        let disk = generate_two_region(
            4,
            4,
            RegionShape::Disk { center: Vec2::new(1.5, 1.5), radius: 0.0 },
            0.9,
            0.1,
        )
        .unwrap();
        assert!(disk.values().iter().all(|&v| v == 0.1), "radius-0 disk must give the background");

        assert!(matches!(
            generate_two_region(4, 4, RegionShape::HalfPlane { split_x: 2.0 }, 1.2, 0.8),
            Err(ImageError::Parameter { .. })
        ));
    }

    #[test]
    fn noise_amplitude_zero_is_identity_and_seeds_reproduce() {
        let img = generate_crack_tip(20, 20);
        assert_eq!(img.add_noise(0.0, 7), img);
        let n1 = img.add_noise(0.1, 7);
        let n2 = img.add_noise(0.1, 7);
        assert_eq!(n1, n2, "same seed must reproduce the same noise");
        assert_ne!(n1, img);
        assert!(n1.values().iter().all(|v| (0.0..=1.0).contains(v)));
        let max_dev = n1
            .values()
            .iter()
            .zip(img.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_dev <= 0.1 + 1e-15, "noise deviation {max_dev} exceeds the amplitude");
    }

    #[test]
    fn bilinear_sampling_matches_hand_evaluations() {
        // Unit cell with v00 = 0, v10 = 1, v01 = 0, v11 = 1.
        let img = GridImage::from_values(1, 1, 1.0, vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(img.sample_bilinear(Vec2::new(1.0, 1.0)), 1.0, "exact at nodes");
        assert_eq!(img.sample_bilinear(Vec2::new(0.5, 0.5)), 0.5);
        let v = img.sample_bilinear(Vec2::new(0.25, 0.75));
        assert!((v - 0.25).abs() < 1e-15, "hand-evaluated bilinear value is 0.25, got {v}");
        // Out-of-domain points clamp onto the boundary.
        assert_eq!(img.sample_bilinear(Vec2::new(-3.0, 0.5)), img.sample_bilinear(Vec2::new(0.0, 0.5)));
    }

    #[test]
    fn bilinear_reproduces_affine_functions() {
        let (alpha, beta, gamma) = (0.04, -0.03, 0.5);
        let h = 0.75;
        let img = GridImage::from_fn(8, 6, h, |x, y| alpha * x + beta * y + gamma);
        for &(x, y) in &[(0.1, 0.2), (3.7, 4.2), (5.99, 0.01), (6.0, 4.5), (2.5, 2.5)] {
            let exact = alpha * x + beta * y + gamma;
            let got = img.sample_bilinear(Vec2::new(x, y));
            assert!(
                (got - exact).abs() < 1e-12,
                "affine reproduction failed at ({x},{y}): {got} vs {exact}"
            );
        }
    }
}
