//! Audit computation of the segmentation energies.
//!
//! Two functionals are evaluated here, both over the node grid. The masked
//! Mumford-Shah form drives the free-endpoint model: a length term, a
//! gradient sum over grid links whose weight drops to zero where a curve
//! crosses, and a fidelity sum against the observed image. The
//! piecewise-constant (Chan-Vese) form replaces the denoised image by
//! per-region means and is used by the comparison mode and the
//! postprocessing decision.
//!
//! The link weights are `1 − α` with `α ∈ [0, 1]`: binary on ordinary links
//! (`α = 1` crossed, `α = 0` untouched), fractional exactly at the one
//! designated vertical and horizontal link of each free endpoint, where `α`
//! measures how far the endpoint has entered its grid cell. That fractional
//! weight is what makes the energy continuous — and therefore auditable — as
//! an endpoint slides through a cell.

use std::collections::BTreeMap;
use std::collections::VecDeque;

use crate::denoiser::compute_masks;
use crate::evolver::endpoint_stencil;
use crate::geometry::{CrossingSets, CurveEnd, CurveNetwork, EndpointKind, PolygonalCurve};
use crate::imaging::GridImage;

/// Additive parts of the masked Mumford-Shah energy.
///
/// `total` is always the sum of the three terms; each term is nonnegative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    /// σ times the total polygonal length of the network.
    pub length_term: f64,
    /// Masked sum of squared difference quotients over grid links.
    pub gradient_term: f64,
    /// λ Σ h²(u₀ − u)² over every grid node.
    pub fidelity_term: f64,
    pub total: f64,
}

/// Evaluates the masked Mumford-Shah energy of a curve network.
///
/// Link weights start from the binary crossing masks; afterwards the two
/// designated links of every free endpoint are overwritten with their
/// fractional weights, whether or not a crossing marked them. When several
/// endpoints designate the same link the one on the later curve (end after
/// start) wins; the situation only arises for endpoints sharing a grid cell,
/// which the minimum-spacing rules keep rare.
///
/// # Panics
/// Panics if `u` and `u0` disagree with the network's domain about the grid.
pub fn discrete_ms_energy(
    network: &CurveNetwork,
    u: &GridImage,
    u0: &GridImage,
    sigma: f64,
    lambda: f64,
) -> EnergyBreakdown {
    let domain = &network.domain;
    assert_eq!((u.nx(), u.ny()), (domain.nx, domain.ny), "image/domain grid mismatch");
    assert_eq!((u0.nx(), u0.ny()), (domain.nx, domain.ny), "image/domain grid mismatch");
    let (nx, ny) = (domain.nx, domain.ny);
    let h = domain.h;
    let h2 = h * h;

    let masks = compute_masks(network);

    // Fractional weights at the designated endpoint links, keyed by the same
    // link indices the masks use: horizontal link (i, j) = [(i−1)h, ih] × {jh},
    // vertical link (i, j) = {ih} × [(j−1)h, jh].
    let mut horizontal: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut vertical: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for curve in &network.curves {
        for end in [CurveEnd::Start, CurveEnd::End] {
            let kind = match end {
                CurveEnd::Start => curve.kind_start,
                CurveEnd::End => curve.kind_end,
            };
            if kind != EndpointKind::Free {
                continue;
            }
            let x = match end {
                CurveEnd::Start => curve.node_at(0),
                CurveEnd::End => curve.node_at(curve.n_nodes() as isize - 1),
            };
            let tau = curve.endpoint_tangent(end);
            let st = endpoint_stencil(x, tau, end, domain)
                .expect("network validity keeps endpoints inside the domain");
            // The vertical link growing up from z¹ and the horizontal link
            // growing right from z²; links outside the masked index range
            // carry no energy and are skipped.
            if st.z1.i >= 1 {
                vertical.insert((st.z1.i, st.z1.j + 1), 1.0 - st.alpha_x);
            }
            if st.z2.j >= 1 {
                horizontal.insert((st.z2.i + 1, st.z2.j), 1.0 - st.alpha_y);
            }
        }
    }

    let mut gradient = 0.0;
    for j in 1..=ny {
        for i in 1..=nx {
            let dx = (u.get(i, j) - u.get(i - 1, j)) / h;
            let dy = (u.get(i, j) - u.get(i, j - 1)) / h;
            let wx = match horizontal.get(&(i, j)) {
                Some(&w) => w * h2,
                None => masks.a_x(i, j),
            };
            let wy = match vertical.get(&(i, j)) {
                Some(&w) => w * h2,
                None => masks.a_y(i, j),
            };
            gradient += wx * dx * dx + wy * dy * dy;
        }
    }

    let mut fidelity = 0.0;
    for j in 0..=ny {
        for i in 0..=nx {
            let d = u0.get(i, j) - u.get(i, j);
            fidelity += h2 * d * d;
        }
    }

    let length_term = sigma * network.total_length();
    let fidelity_term = lambda * fidelity;
    EnergyBreakdown {
        length_term,
        gradient_term: gradient,
        fidelity_term,
        total: length_term + gradient + fidelity_term,
    }
}

/// Labels every grid node with a region index by flood fill. Two 4-neighbors
/// are connected when no curve crosses the link between them. Connectivity is
/// decided on the full crossing sets — including the border rows that carry
/// no gradient energy — so a curve running wall to wall genuinely separates
/// its sides. Labels are assigned in scan order (row by row from the origin),
/// so the outermost region is label 0 whenever node (0,0) is outside all
/// curves.
fn region_labels(crossings: &CrossingSets, nx: usize, ny: usize) -> (Vec<usize>, usize) {
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut labels = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for j0 in 0..=ny {
        for i0 in 0..=nx {
            if labels[idx(i0, j0)] != usize::MAX {
                continue;
            }
            labels[idx(i0, j0)] = next;
            queue.push_back((i0, j0));
            while let Some((i, j)) = queue.pop_front() {
                // Left, right, down, up — guarded by the link between.
                if i > 0
                    && labels[idx(i - 1, j)] == usize::MAX
                    && !crossings.horizontal.contains(&(i, j))
                {
                    labels[idx(i - 1, j)] = next;
                    queue.push_back((i - 1, j));
                }
                if i < nx
                    && labels[idx(i + 1, j)] == usize::MAX
                    && !crossings.horizontal.contains(&(i + 1, j))
                {
                    labels[idx(i + 1, j)] = next;
                    queue.push_back((i + 1, j));
                }
                if j > 0
                    && labels[idx(i, j - 1)] == usize::MAX
                    && !crossings.vertical.contains(&(i, j))
                {
                    labels[idx(i, j - 1)] = next;
                    queue.push_back((i, j - 1));
                }
                if j < ny
                    && labels[idx(i, j + 1)] == usize::MAX
                    && !crossings.vertical.contains(&(i, j + 1))
                {
                    labels[idx(i, j + 1)] = next;
                    queue.push_back((i, j + 1));
                }
            }
            next += 1;
        }
    }
    (labels, next)
}

/// Mean of `u0` over each labeled region, in label order.
fn region_means(labels: &[usize], n_regions: usize, u0: &GridImage) -> Vec<f64> {
    let mut sums = vec![0.0; n_regions];
    let mut counts = vec![0usize; n_regions];
    for (lin, &label) in labels.iter().enumerate() {
        sums[label] += u0.values()[lin];
        counts[label] += 1;
    }
    sums.iter().zip(&counts).map(|(s, &c)| s / c.max(1) as f64).collect()
}

fn assert_pc_network(network: &CurveNetwork, u0: &GridImage) {
    assert!(
        network
            .curves
            .iter()
            .all(|c| c.kind_start != EndpointKind::Free && c.kind_end != EndpointKind::Free),
        "piecewise-constant energy requires curves without free endpoints"
    );
    let domain = &network.domain;
    assert_eq!((u0.nx(), u0.ny()), (domain.nx, domain.ny), "image/domain grid mismatch");
}

/// Piecewise-constant energy of a network of closed or boundary-attached
/// curves: regions are the flood-fill components behind the crossed links,
/// each takes the mean of `u0` over its nodes, and the energy is
/// `σ|Γ| + λ Σ_k Σ_{z ∈ Ω_k} h²(u₀(z) − c_k)²`.
///
/// Returns the energy and the per-region means in label order. The curves
/// must not intersect each other; that precondition is not checked.
///
/// # Panics
/// Panics if any curve has a free endpoint or the image disagrees with the
/// domain.
pub fn pc_energy(
    network: &CurveNetwork,
    u0: &GridImage,
    sigma: f64,
    lambda: f64,
) -> (f64, Vec<f64>) {
    assert_pc_network(network, u0);
    let (labels, n_regions) =
        region_labels(&network.gridline_crossings(), network.domain.nx, network.domain.ny);
    let means = region_means(&labels, n_regions, u0);

    let h2 = network.domain.h * network.domain.h;
    let mut fidelity = 0.0;
    for (lin, &label) in labels.iter().enumerate() {
        let d = u0.values()[lin] - means[label];
        fidelity += h2 * d * d;
    }
    (sigma * network.total_length() + lambda * fidelity, means)
}

/// The piecewise-constant approximation itself: every grid node painted with
/// the mean of `u0` over its region. This is the `u` of the Chan-Vese
/// reduction; feeding it to the evolver makes the driving force
/// `λ[(u₀ − c⁺)² − (u₀ − c⁻)²]` with the region constants `c±`.
///
/// # Panics
/// As [`pc_energy`].
pub fn region_means_image(network: &CurveNetwork, u0: &GridImage) -> GridImage {
    assert_pc_network(network, u0);
    let (labels, n_regions) =
        region_labels(&network.gridline_crossings(), network.domain.nx, network.domain.ny);
    let means = region_means(&labels, n_regions, u0);
    let values = labels.iter().map(|&label| means[label]).collect();
    GridImage::from_values(u0.nx(), u0.ny(), u0.h(), values)
}

/// Absolute difference of the field sampled on both sides of node `j`:
/// `|field(X_j + a·ω_j) − field(X_j − a·ω_j)|` with bilinear interpolation
/// (clamped at the image border). On a closed curve any node works; on an
/// open curve the end nodes fall back to the adjacent segment's normal.
pub fn jump_across(curve: &PolygonalCurve, j: usize, field: &GridImage, a: f64) -> f64 {
    let x = curve.node_at(j as isize);
    let w = curve.weighted_normal(j as isize);
    (field.sample_bilinear(x + w * a) - field.sample_bilinear(x - w * a)).abs()
}
