//! Piecewise-smooth image approximation: with the curves held fixed, `u`
//! minimizes a masked Dirichlet energy plus an L² fidelity term,
//!
//! ```text
//! E(u) = Σ A_x(i,j)·((u_{i,j}−u_{i−1,j})/h)² + A_y(i,j)·((u_{i,j}−u_{i,j−1})/h)²
//!      + λ Σ h²·(u₀ − u)²,
//! ```
//!
//! where the link weights `A_x, A_y ∈ {0, h²}` vanish exactly on pixel links
//! crossed by a curve. Cutting a link removes the coupling across it, so the
//! solve smooths each region separately and preserves jumps along the curves —
//! a discrete Neumann condition at the curve. The gradient sums run over
//! `i ∈ 1..=N_x`, `j ∈ 1..=N_y` for both families, so the horizontal links of
//! the bottom row and the vertical links of the left column carry no energy;
//! in particular the corner node `(0,0)` couples to nothing and keeps its
//! input value. Links beyond the image border simply do not exist in the sum,
//! which is the natural boundary condition.

use crate::geometry::{CrossingSets, CurveNetwork, Domain};
use crate::imaging::GridImage;
use crate::linalg::{solve_spd_warm, SolveError, SparseMatrix};

/// Relative tolerance of the conjugate-gradient solve.
pub const DENOISE_TOL: f64 = 1e-10;

/// Binary link weights: `a_x(i, j)` is `h²` when the horizontal link
/// `[(i−1)h, ih] × {jh}` is not crossed by any curve and `0` when it is;
/// `a_y(i, j)` likewise for the vertical link `{ih} × [(j−1)h, jh]`. Both
/// families are indexed with `i ∈ 1..=N_x`, `j ∈ 1..=N_y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkMasks {
    nx: usize,
    ny: usize,
    h_bits: u64,
    x_open: Vec<bool>,
    y_open: Vec<bool>,
}

impl LinkMasks {
    /// Builds masks from a precomputed crossing report (crossings outside the
    /// indexed ranges — bottom-row horizontal and left-column vertical links —
    /// are ignored, as those links carry no energy).
    pub fn from_crossings(domain: Domain, crossings: &CrossingSets) -> LinkMasks {
        let (nx, ny) = (domain.nx, domain.ny);
        let mut masks = LinkMasks {
            nx,
            ny,
            h_bits: domain.h.to_bits(),
            x_open: vec![true; nx * ny],
            y_open: vec![true; nx * ny],
        };
        for &(i, j) in &crossings.horizontal {
            if (1..=nx).contains(&i) && (1..=ny).contains(&j) {
                masks.x_open[(j - 1) * nx + (i - 1)] = false;
            }
        }
        for &(i, j) in &crossings.vertical {
            if (1..=nx).contains(&i) && (1..=ny).contains(&j) {
                masks.y_open[(j - 1) * nx + (i - 1)] = false;
            }
        }
        masks
    }

    fn h(&self) -> f64 {
        f64::from_bits(self.h_bits)
    }

    #[inline]
    fn lin(&self, i: usize, j: usize) -> usize {
        assert!(
            (1..=self.nx).contains(&i) && (1..=self.ny).contains(&j),
            "link index ({i},{j}) outside 1..={}, 1..={}",
            self.nx,
            self.ny
        );
        (j - 1) * self.nx + (i - 1)
    }

    /// Weight of the horizontal link `[(i−1)h, ih] × {jh}`: `h²` or `0`.
    ///
    /// # Panics
    /// Panics outside `i ∈ 1..=N_x`, `j ∈ 1..=N_y`.
    pub fn a_x(&self, i: usize, j: usize) -> f64 {
        if self.x_open[self.lin(i, j)] {
            self.h() * self.h()
        } else {
            0.0
        }
    }

    /// Weight of the vertical link `{ih} × [(j−1)h, jh]`: `h²` or `0`.
    ///
    /// # Panics
    /// Panics outside `i ∈ 1..=N_x`, `j ∈ 1..=N_y`.
    pub fn a_y(&self, i: usize, j: usize) -> f64 {
        if self.y_open[self.lin(i, j)] {
            self.h() * self.h()
        } else {
            0.0
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Number of cut (zero-weight) links.
    pub fn cut_count(&self) -> usize {
        self.x_open.iter().chain(&self.y_open).filter(|open| !**open).count()
    }
}

/// Computes the link masks of a curve network over its own domain.
pub fn compute_masks(network: &CurveNetwork) -> LinkMasks {
    LinkMasks::from_crossings(network.domain, &network.gridline_crossings())
}

/// Assembles the stationarity system of the masked energy: for each node,
/// `Σ_links (2A/h²)(u_node − u_neighbor) + 2λh²·u_node = 2λh²·u₀`. The matrix
/// is symmetric positive definite (the fidelity term bounds it from below).
/// Unknowns are ordered like image storage, `index = j·(N_x+1) + i`.
///
/// # Panics
/// Panics if the masks and image disagree about the grid, or `λ ≤ 0`.
pub fn assemble_denoise_system(
    u0: &GridImage,
    masks: &LinkMasks,
    lambda: f64,
) -> (SparseMatrix, Vec<f64>) {
    assert!(lambda > 0.0, "fidelity weight λ must be positive");
    assert_eq!((masks.nx, masks.ny), (u0.nx(), u0.ny()), "mask/image grid mismatch");
    let (nx, ny) = (u0.nx(), u0.ny());
    let h = u0.h();
    let n = (nx + 1) * (ny + 1);
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let fid = 2.0 * lambda * h * h;

    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(5 * n);
    let mut rhs = vec![0.0; n];
    for j in 0..=ny {
        for i in 0..=nx {
            let row = idx(i, j);
            let mut diag = fid;
            rhs[row] = fid * u0.get(i, j);
            // Each link in range contributes 2A/h² ∈ {0, 2} to the coupling.
            let mut couple = |a: f64, col: usize| {
                if a != 0.0 {
                    let w = 2.0 * a / (h * h);
                    triplets.push((row, col, -w));
                    diag += w;
                }
            };
            if i >= 1 && j >= 1 {
                couple(masks.a_x(i, j), idx(i - 1, j));
            }
            if i + 1 <= nx && j >= 1 {
                couple(masks.a_x(i + 1, j), idx(i + 1, j));
            }
            if i >= 1 && j >= 1 {
                couple(masks.a_y(i, j), idx(i, j - 1));
            }
            if i >= 1 && j + 1 <= ny {
                couple(masks.a_y(i, j + 1), idx(i, j + 1));
            }
            triplets.push((row, row, diag));
        }
    }
    (SparseMatrix::from_triplets(n, n, &triplets), rhs)
}

/// Solves the assembled system, optionally warm-starting from a previous
/// solution, and clamps the result into `[0, 1]`.
///
/// # Errors
/// Propagates solver failure.
pub fn solve_masked(
    u0: &GridImage,
    masks: &LinkMasks,
    lambda: f64,
    warm: Option<&GridImage>,
) -> Result<GridImage, SolveError> {
    let (a, b) = assemble_denoise_system(u0, masks, lambda);
    let zero;
    let x0: &[f64] = match warm {
        Some(prev) => {
            assert_eq!(
                (prev.nx(), prev.ny()),
                (u0.nx(), u0.ny()),
                "warm start grid mismatch"
            );
            prev.values()
        }
        None => {
            zero = vec![0.0; b.len()];
            &zero
        }
    };
    let x = solve_spd_warm(&a, &b, DENOISE_TOL, x0)?;
    let clamped: Vec<f64> = x.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(GridImage::from_values(u0.nx(), u0.ny(), u0.h(), clamped))
}

/// Denoises `u0` with the masks induced by `network`.
///
/// # Errors
/// Propagates solver failure.
pub fn denoise(u0: &GridImage, network: &CurveNetwork, lambda: f64) -> Result<GridImage, SolveError> {
    solve_masked(u0, &compute_masks(network), lambda, None)
}

/// The masked discrete energy `E(u)` itself, for audits and descent checks.
///
/// # Panics
/// Panics on grid mismatches.
pub fn discrete_energy(u0: &GridImage, u: &GridImage, masks: &LinkMasks, lambda: f64) -> f64 {
    assert_eq!((masks.nx, masks.ny), (u0.nx(), u0.ny()), "mask/image grid mismatch");
    assert_eq!((u.nx(), u.ny()), (u0.nx(), u0.ny()), "image grid mismatch");
    let (nx, ny) = (u0.nx(), u0.ny());
    let h = u0.h();
    let mut grad = 0.0;
    for j in 1..=ny {
        for i in 1..=nx {
            let dx = (u.get(i, j) - u.get(i - 1, j)) / h;
            let dy = (u.get(i, j) - u.get(i, j - 1)) / h;
            grad += masks.a_x(i, j) * dx * dx + masks.a_y(i, j) * dy * dy;
        }
    }
    let mut fid = 0.0;
    for j in 0..=ny {
        for i in 0..=nx {
            let d = u0.get(i, j) - u.get(i, j);
            fid += h * h * d * d;
        }
    }
    grad + lambda * fid
}
