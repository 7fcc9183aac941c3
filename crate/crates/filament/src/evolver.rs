//! One semi-implicit time step of the curve evolution.
//!
//! Interior nodes obey the normal-velocity law `V_n = σκ + F` through the
//! coupled update
//!
//! ```text
//! (X_j^{m+1} − X_j^m)·ω_j^m / Δt = σ κ_j^{m+1} + F_j^m,
//! κ_j^{m+1} ω_j^m = Δ₂ X_j^{m+1},
//! ```
//!
//! where ω is the weighted node normal, Δ₂ the second difference quotient on
//! the old spacings, and `F = λ[(u₀−u⁺)² − (u₀−u⁻)²]` samples the image jump
//! across the curve. Eliminating κ gives, per node, the 2×2-block equation
//! `(ω ωᵀ/(σΔt)) X_j^{m+1} − Δ₂X_j^{m+1} = ω[(X_j^m·ω)/Δt + F_j]/σ`, a banded
//! linear system (periodic for closed curves) solved implicitly. Free
//! endpoints then move explicitly with the tangential velocity
//! `V_tan(0) = σ − |τ·e₁|(∇_h²u(z^{0,1}))² − |τ·e₂|(∇_h¹u(z^{0,2}))²` (and the
//! mirrored `V_tan(1)`), plus sign-weighted normal terms — the two sub-steps:
//! first the interior with endpoints pinned, then the endpoints themselves.

use std::collections::BTreeSet;

use crate::geometry::{
    remesh, BoundaryEdge, CurveEnd, CurveNetwork, Domain, EndpointKind, GeometryError,
    PolygonalCurve,
};
use crate::imaging::{Axis, GridImage, GridPoint};
use crate::linalg::{solve_general, SolveError, SparseMatrix};
use crate::vec2::Vec2;

/// Parameters of one evolution step.
#[derive(Debug, Clone)]
pub struct EvolveParams {
    /// Length-penalty weight σ > 0.
    pub sigma: f64,
    /// Fidelity weight λ > 0 in the external term.
    pub lambda: f64,
    /// Time step Δt > 0.
    pub dt: f64,
    /// Normal sampling offset for the external term: samples at `X ± a·ω`.
    /// Default 1.5·h so both samples clear the nearest pixel row.
    pub a: f64,
    /// Value of sign(0) in the endpoint normal velocities; the case splits of
    /// the stencil selection use ≥ 0, and this keeps sign() aligned (+1).
    pub sign_zero: f64,
    /// Apply the endpoint normal velocities (off keeps ends tangential).
    pub endpoint_normal_motion: bool,
    /// Target node spacing; each step remeshes into [h_target, 2·h_target].
    /// Keeping spacing at or above the target bounds the number of nodes any
    /// topology-detection cell (sized 2·h_target) can hold, so the neighbor
    /// suppression window covers all along-curve cellmates.
    pub h_target: f64,
    /// Free endpoints pinned in place (typically junction members); a curve
    /// id / end pair listed here skips the endpoint update entirely.
    pub frozen_ends: BTreeSet<(u64, CurveEnd)>,
}

impl EvolveParams {
    /// Parameters with the default sampling offset (1.5), sign convention
    /// (+1), endpoint normal motion enabled, and target spacing 4.
    pub fn new(sigma: f64, lambda: f64, dt: f64) -> EvolveParams {
        EvolveParams {
            sigma,
            lambda,
            dt,
            a: 1.5,
            sign_zero: 1.0,
            endpoint_normal_motion: true,
            h_target: 4.0,
            frozen_ends: BTreeSet::new(),
        }
    }

    fn validate(&self) {
        assert!(self.sigma > 0.0, "sigma must be positive");
        assert!(self.lambda > 0.0, "lambda must be positive");
        assert!(self.dt > 0.0, "dt must be positive");
        assert!(self.a > 0.0, "sampling offset a must be positive");
        assert!(self.h_target > 0.0, "h_target must be positive");
        assert!(self.sign_zero == 1.0 || self.sign_zero == -1.0, "sign_zero must be ±1");
    }

    fn sign(&self, v: f64) -> f64 {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            self.sign_zero
        }
    }
}

/// The grid points carrying the fractional α factors of a free endpoint:
/// `z1 = z^{ρ,1}` anchors the vertical-link term `(∇_h²u)²`, `z2 = z^{ρ,2}`
/// the horizontal-link term `(∇_h¹u)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointStencil {
    pub z1: GridPoint,
    pub z2: GridPoint,
    /// α_x(z^{ρ,1}) ∈ [0, 1].
    pub alpha_x: f64,
    /// α_y(z^{ρ,2}) ∈ [0, 1].
    pub alpha_y: f64,
}

/// Selects `z^{ρ,1} ∈ {z_−−, z_+−}` and `z^{ρ,2} ∈ {z_−−, z_−+}` among the
/// four grid points around the endpoint, by the four sign cases on τ·e₁ and
/// τ·e₂ (ρ = start uses ≥ 0 where ρ = end uses < 0), and computes the
/// fractional factors `α = 1 − distance/h`. An endpoint exactly on a grid
/// line takes the ≥ branch and yields α exactly 0 or 1.
///
/// # Errors
/// [`GeometryError::OutsideDomain`] if the endpoint is not in the domain.
pub fn endpoint_stencil(
    x: Vec2,
    tau: Vec2,
    rho: CurveEnd,
    domain: &Domain,
) -> Result<EndpointStencil, GeometryError> {
    if !domain.contains(x) {
        return Err(GeometryError::OutsideDomain { curve_id: 0, j: 0 });
    }
    let h = domain.h;
    let (ci, cj) = surrounding_cell(x, domain);
    let start = rho == CurveEnd::Start;

    let (z1, alpha_x) = if (start && tau.x >= 0.0) || (!start && tau.x < 0.0) {
        let z = GridPoint::new(ci, cj);
        (z, 1.0 - (x.x - ci as f64 * h) / h)
    } else {
        let z = GridPoint::new(ci + 1, cj);
        (z, 1.0 - ((ci + 1) as f64 * h - x.x) / h)
    };
    let (z2, alpha_y) = if (start && tau.y >= 0.0) || (!start && tau.y < 0.0) {
        let z = GridPoint::new(ci, cj);
        (z, 1.0 - (x.y - cj as f64 * h) / h)
    } else {
        let z = GridPoint::new(ci, cj + 1);
        (z, 1.0 - ((cj + 1) as f64 * h - x.y) / h)
    };
    Ok(EndpointStencil {
        z1,
        z2,
        alpha_x: alpha_x.clamp(0.0, 1.0),
        alpha_y: alpha_y.clamp(0.0, 1.0),
    })
}

/// Cell indices `(ci, cj)` of the grid cell containing `x` (points on the far
/// border fall into the last cell), so the surrounding grid points are
/// `(ci..ci+1) × (cj..cj+1)`.
fn surrounding_cell(x: Vec2, domain: &Domain) -> (usize, usize) {
    let cell = |coord: f64, n: usize| -> usize {
        ((coord / domain.h).floor() as usize).min(n.saturating_sub(1))
    };
    (cell(x.x, domain.nx), cell(x.y, domain.ny))
}

/// The growth criterion at a free endpoint:
/// `|τ·e₁|(∇_h²u(z1))² + |τ·e₂|(∇_h¹u(z2))² − σ`. Positive means the image
/// gradient outweighs the length penalty and the endpoint extends.
pub fn growth_indicator(stencil: &EndpointStencil, tau: Vec2, u: &GridImage, sigma: f64) -> f64 {
    let g2 = u.forward_diff(stencil.z1, Axis::Y);
    let g1 = u.forward_diff(stencil.z2, Axis::X);
    tau.x.abs() * g2 * g2 + tau.y.abs() * g1 * g1 - sigma
}

/// External term `F_j = λ[(u₀(X_j) − u(X_j + a·ω_j))² − (u₀(X_j) − u(X_j − a·ω_j))²]`
/// with bilinear samples (clamped at the image border).
///
/// # Panics
/// Panics if `j` is an endpoint index of an open curve — there F is defined
/// as zero and must not be requested through this evaluation.
pub fn external_term(
    curve: &PolygonalCurve,
    j: usize,
    u0: &GridImage,
    u: &GridImage,
    params: &EvolveParams,
) -> f64 {
    if !curve.is_closed() {
        assert!(
            j != 0 && j != curve.n_nodes() - 1,
            "F is zero by definition at open-curve endpoints"
        );
    }
    let x = curve.node_at(j as isize);
    let w = curve.weighted_normal(j as isize);
    let u0x = u0.sample_bilinear(x);
    let up = u.sample_bilinear(x + w * params.a);
    let um = u.sample_bilinear(x - w * params.a);
    params.lambda * ((u0x - up) * (u0x - up) - (u0x - um) * (u0x - um))
}

/// Everything one step produced: the evolved network, the largest node
/// displacement measured before remeshing (the pipeline's convergence
/// signal), and the per-node events the caller may want to log.
#[derive(Debug)]
pub struct StepReport {
    pub network: CurveNetwork,
    pub max_displacement: f64,
    /// Nodes pulled back into the domain, as (curve id, node index).
    pub clamped: Vec<(u64, usize)>,
    /// Free endpoints whose normal motion was frozen because a surrounding
    /// grid point lies on the image border.
    pub frozen: Vec<(u64, CurveEnd)>,
}

/// One full evolution step over every curve: implicit interior solve with
/// endpoints pinned, explicit endpoint update, domain clamping, remesh.
///
/// # Errors
/// Propagates linear-solver failure.
pub fn step(
    network: &CurveNetwork,
    u0: &GridImage,
    u: &GridImage,
    params: &EvolveParams,
) -> Result<CurveNetwork, SolveError> {
    step_report(network, u0, u, params).map(|r| r.network)
}

/// [`step`] with the displacement measure and event list attached.
///
/// # Errors
/// Propagates linear-solver failure.
pub fn step_report(
    network: &CurveNetwork,
    u0: &GridImage,
    u: &GridImage,
    params: &EvolveParams,
) -> Result<StepReport, SolveError> {
    params.validate();
    let domain = network.domain;
    let mut curves = Vec::with_capacity(network.curves.len());
    let mut max_displacement = 0.0f64;
    let mut clamped = Vec::new();
    let mut frozen = Vec::new();

    for curve in &network.curves {
        let mut new_nodes = evolve_interior(curve, u0, u, params)?;

        if !curve.is_closed() {
            let last = curve.n_nodes() - 1;
            let ends = [(CurveEnd::Start, 0usize, 1usize), (CurveEnd::End, last, last - 1)];
            // Free endpoints move first so a boundary projection always sees
            // its neighbor's finished displacement.
            for (end, j, _) in ends {
                if end_kind(curve, end) == EndpointKind::Free
                    && !params.frozen_ends.contains(&(curve.id, end))
                {
                    let (pos, froze) = free_endpoint_update(curve, end, u, params, &domain);
                    new_nodes[j] = pos;
                    if froze {
                        frozen.push((curve.id, end));
                    }
                }
            }
            for (end, j, neighbor) in ends {
                if let EndpointKind::Boundary(edge) = end_kind(curve, end) {
                    let dir = edge_direction(edge);
                    let delta = new_nodes[neighbor] - curve.node_at(neighbor as isize);
                    new_nodes[j] = curve.node_at(j as isize) + dir * delta.dot(dir);
                }
            }
        }

        for (j, p) in new_nodes.iter_mut().enumerate() {
            let c = domain.clamp(*p);
            if c != *p {
                clamped.push((curve.id, j));
                *p = c;
            }
        }
        for (j, &p) in new_nodes.iter().enumerate() {
            max_displacement = max_displacement.max(p.dist(curve.node_at(j as isize)));
        }

        let mut updated = curve.clone();
        updated.set_nodes(new_nodes);
        curves.push(remesh(&updated, params.h_target, 2.0 * params.h_target));
    }

    let network = CurveNetwork::new(curves, domain)
        .expect("evolution step must preserve network validity");
    Ok(StepReport { network, max_displacement, clamped, frozen })
}

fn end_kind(curve: &PolygonalCurve, end: CurveEnd) -> EndpointKind {
    match end {
        CurveEnd::Start => curve.kind_start,
        CurveEnd::End => curve.kind_end,
    }
}

fn edge_direction(edge: BoundaryEdge) -> Vec2 {
    match edge {
        BoundaryEdge::Left | BoundaryEdge::Right => Vec2::new(0.0, 1.0),
        BoundaryEdge::Top | BoundaryEdge::Bottom => Vec2::new(1.0, 0.0),
    }
}

/// Solves the implicit interior system of one curve and returns the full new
/// node list (open-curve endpoints still at their old positions).
fn evolve_interior(
    curve: &PolygonalCurve,
    u0: &GridImage,
    u: &GridImage,
    params: &EvolveParams,
) -> Result<Vec<Vec2>, SolveError> {
    let n = curve.n_nodes();
    let mut new_nodes: Vec<Vec2> = curve.nodes().to_vec();
    let closed = curve.is_closed();
    let m = if closed { n } else { n.saturating_sub(2) };
    if m == 0 {
        return Ok(new_nodes);
    }

    let (a, rhs) = assemble_interior(curve, u0, u, params);
    let x = solve_general(&a, &rhs)?;
    for k in 0..m {
        let j = if closed { k } else { k + 1 };
        new_nodes[j] = Vec2::new(x[2 * k], x[2 * k + 1]);
    }
    Ok(new_nodes)
}

/// Assembles the reduced interior system: unknowns are the flattened new
/// positions (x₀, y₀, x₁, y₁, …) of the moving nodes (all nodes when closed,
/// the interior when open, with pinned endpoints folded into the right-hand
/// side).
///
/// # Panics
/// Panics when the curve has no moving nodes (open with fewer than 3 nodes).
pub(crate) fn assemble_interior(
    curve: &PolygonalCurve,
    u0: &GridImage,
    u: &GridImage,
    params: &EvolveParams,
) -> (SparseMatrix, Vec<f64>) {
    let n = curve.n_nodes();
    let closed = curve.is_closed();
    let m = if closed { n } else { n - 2 };
    assert!(m > 0, "no interior unknowns to assemble");

    let inv_sdt = 1.0 / (params.sigma * params.dt);
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(8 * m);
    let mut rhs = vec![0.0; 2 * m];

    for k in 0..m {
        // Unknown k is node j; open curves skip the pinned endpoints.
        let j = if closed { k as isize } else { k as isize + 1 };
        let w = curve.weighted_normal(j);
        let f = external_term(curve, j as usize, u0, u, params);
        let hm = curve.spacing(j);
        let hp = curve.spacing(j + 1);
        let cm = 2.0 / ((hm + hp) * hm);
        let cp = 2.0 / ((hm + hp) * hp);
        let c0 = cm + cp; // −Δ₂ contributes +c0 on the diagonal

        let s = (curve.node_at(j).dot(w) / params.dt + f) / params.sigma;
        let (rx, ry) = (2 * k, 2 * k + 1);
        rhs[rx] = w.x * s;
        rhs[ry] = w.y * s;

        let m00 = w.x * w.x * inv_sdt;
        let m01 = w.x * w.y * inv_sdt;
        let m11 = w.y * w.y * inv_sdt;
        triplets.push((rx, rx, m00 + c0));
        triplets.push((rx, ry, m01));
        triplets.push((ry, rx, m01));
        triplets.push((ry, ry, m11 + c0));

        let (km, kp) = if closed {
            (Some((k + m - 1) % m), Some((k + 1) % m))
        } else {
            (k.checked_sub(1), if k + 1 < m { Some(k + 1) } else { None })
        };
        match km {
            Some(km) => {
                triplets.push((rx, 2 * km, -cm));
                triplets.push((ry, 2 * km + 1, -cm));
            }
            None => {
                let x0 = curve.node_at(j - 1);
                rhs[rx] += cm * x0.x;
                rhs[ry] += cm * x0.y;
            }
        }
        match kp {
            Some(kp) => {
                triplets.push((rx, 2 * kp, -cp));
                triplets.push((ry, 2 * kp + 1, -cp));
            }
            None => {
                let xn = curve.node_at(j + 1);
                rhs[rx] += cp * xn.x;
                rhs[ry] += cp * xn.y;
            }
        }
    }

    (SparseMatrix::from_triplets(2 * m, 2 * m, &triplets), rhs)
}

/// Explicit update of one free endpoint: `X += Δt·(V_tan·τ + V_n·ω)` with ω
/// the adjacent segment normal. Returns the new position and whether the
/// normal component was frozen for border proximity.
fn free_endpoint_update(
    curve: &PolygonalCurve,
    end: CurveEnd,
    u: &GridImage,
    params: &EvolveParams,
    domain: &Domain,
) -> (Vec2, bool) {
    let n = curve.n_nodes() as isize;
    let j = match end {
        CurveEnd::Start => 0,
        CurveEnd::End => n - 1,
    };
    let x = curve.node_at(j);
    let tau = curve.endpoint_tangent(end);
    let w = curve.weighted_normal(j);
    let stencil = endpoint_stencil(x, tau, end, domain)
        .expect("validated curves keep endpoints inside the domain");
    let g2 = u.forward_diff(stencil.z1, Axis::Y);
    let g1 = u.forward_diff(stencil.z2, Axis::X);
    let (g2s, g1s) = (g2 * g2, g1 * g1);

    let v_tan = match end {
        CurveEnd::Start => params.sigma - tau.x.abs() * g2s - tau.y.abs() * g1s,
        CurveEnd::End => -params.sigma + tau.x.abs() * g2s + tau.y.abs() * g1s,
    };
    let mut v_n = match end {
        CurveEnd::Start => -params.sign(tau.x) * w.x * g2s - params.sign(tau.y) * w.y * g1s,
        CurveEnd::End => params.sign(tau.x) * w.x * g2s + params.sign(tau.y) * w.y * g1s,
    };
    if !params.endpoint_normal_motion {
        v_n = 0.0;
    }

    let mut froze = false;
    if v_n != 0.0 {
        let (ci, cj) = surrounding_cell(x, domain);
        let interior = ci > 0 && ci + 1 < domain.nx && cj > 0 && cj + 1 < domain.ny;
        if !interior {
            v_n = 0.0;
            froze = true;
        }
    }

    (x + (tau * v_tan + w * v_n) * params.dt, froze)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEST_DOMAIN: Domain = Domain { nx: 10, ny: 10, h: 1.0 };

    fn free_curve(nodes: Vec<Vec2>) -> PolygonalCurve {
        PolygonalCurve::new(0, EndpointKind::Free, EndpointKind::Free, nodes).unwrap()
    }

    fn regular_polygon(n: usize, center: Vec2, r: f64) -> PolygonalCurve {
        let nodes = (0..n)
            .map(|k| {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                center + Vec2::new(r * phi.cos(), r * phi.sin())
            })
            .collect();
        PolygonalCurve::closed(0, nodes).unwrap()
    }

    fn mean_radius(curve: &PolygonalCurve) -> f64 {
        let n = curve.n_nodes() as f64;
        let c = curve.nodes().iter().fold(Vec2::ZERO, |a, &p| a + p) / n;
        curve.nodes().iter().map(|p| p.dist(c)).sum::<f64>() / n
    }

    #[test]
    fn stencil_mid_cell_rightward_tau_selects_lower_left() {
        let st = endpoint_stencil(Vec2::new(3.25, 2.5), Vec2::new(1.0, 0.0), CurveEnd::Start, &TEST_DOMAIN)
            .unwrap();
        assert_eq!(st.z1, GridPoint::new(3, 2));
        assert!((st.alpha_x - 0.75).abs() < 1e-15, "alpha_x = {}", st.alpha_x);
        // τ·e₂ = 0 takes the ≥ branch: z2 is also the lower-left point.
        assert_eq!(st.z2, GridPoint::new(3, 2));
        assert!((st.alpha_y - 0.5).abs() < 1e-15, "alpha_y = {}", st.alpha_y);
    }

    #[test]
    fn stencil_alpha_equals_entered_fraction_near_right_neighbor() {
        let eps = 0.125;
        let st = endpoint_stencil(Vec2::new(4.0 - eps, 2.5), Vec2::new(1.0, 0.0), CurveEnd::Start, &TEST_DOMAIN)
            .unwrap();
        assert_eq!(st.z1, GridPoint::new(3, 2));
        assert_eq!(st.alpha_x, eps, "entered fraction must be exact for eighth multiples");
    }

    #[test]
    fn stencil_downward_tau_at_end_selects_lower_left_for_y() {
        let st = endpoint_stencil(Vec2::new(2.5, 3.5), Vec2::new(0.0, -1.0), CurveEnd::End, &TEST_DOMAIN)
            .unwrap();
        assert_eq!(st.z2, GridPoint::new(2, 3));
        assert!((st.alpha_y - 0.5).abs() < 1e-15, "alpha_y = {}", st.alpha_y);
        // τ·e₁ = 0 at the end takes the second x-branch: the lower-right point.
        assert_eq!(st.z1, GridPoint::new(3, 3));
        assert!((st.alpha_x - 0.5).abs() < 1e-15, "alpha_x = {}", st.alpha_x);
    }

    #[test]
    fn stencil_rejects_points_outside_the_domain() {
        let r = endpoint_stencil(Vec2::new(-0.5, 2.0), Vec2::new(1.0, 0.0), CurveEnd::Start, &TEST_DOMAIN);
        assert!(matches!(r, Err(GeometryError::OutsideDomain { .. })));
    }

    #[test]
    fn external_term_vanishes_on_a_constant_field() {
        let u = GridImage::constant(10, 10, 1.0, 0.5);
        let c = free_curve(vec![Vec2::new(2.0, 5.0), Vec2::new(4.0, 5.0), Vec2::new(6.0, 5.0)]);
        let f = external_term(&c, 1, &u, &u, &EvolveParams::new(1.0, 2.0, 0.1));
        assert_eq!(f, 0.0, "equal samples must cancel exactly");
    }

    #[test]
    fn external_term_with_one_sided_match_is_nonpositive() {
        // u rises with y; the +ω sample (above) matches u₀ = 0.4 exactly, so
        // F = −λ(u₀ − u(X − aω))² = −λ(0.4 − 0.1)².
        let u0 = GridImage::constant(10, 10, 1.0, 0.4);
        let u = GridImage::from_fn(10, 10, 1.0, |_, y| y / 10.0);
        let c = free_curve(vec![Vec2::new(2.0, 2.5), Vec2::new(4.0, 2.5), Vec2::new(6.0, 2.5)]);
        let params = EvolveParams::new(1.0, 2.0, 0.1); // a = 1.5 samples y = 4 and y = 1
        let f = external_term(&c, 1, &u0, &u, &params);
        let expected = -params.lambda * (0.4 - 0.1) * (0.4 - 0.1);
        assert!((f - expected).abs() < 1e-12, "F = {f}, expected {expected}");
        assert!(f < 0.0);
    }

    #[test]
    fn external_term_pushes_a_displaced_curve_toward_the_step_edge() {
        // Horizontal two-level image with the jump at y = 10; the curve runs
        // 3 px below it. With a = 4 the upper sample crosses the edge:
        // F = λ[(0.2 − 0.8)² − 0] > 0, motion along +ω = e₂, toward the edge.
        let img = GridImage::from_fn(19, 19, 1.0, |_, y| if y < 10.0 { 0.2 } else { 0.8 });
        let mut params = EvolveParams::new(1.0, 1.0, 0.1);
        params.a = 4.0;
        let c = free_curve(vec![Vec2::new(3.0, 7.0), Vec2::new(8.0, 7.0), Vec2::new(13.0, 7.0)]);
        let f = external_term(&c, 1, &img, &img, &params);
        assert!((f - 0.36).abs() < 1e-12, "F = {f}");
        assert!(c.weighted_normal(1).y > 0.0, "left-to-right curve has upward normal");

        // Reversed orientation flips ω and the sign of F: still toward the edge.
        let rev = c.reversed();
        let f_rev = external_term(&rev, 1, &img, &img, &params);
        assert!((f_rev + 0.36).abs() < 1e-12, "F reversed = {f_rev}");
    }

    #[test]
    #[should_panic(expected = "endpoints")]
    fn external_term_rejects_open_curve_endpoints() {
        let u = GridImage::constant(10, 10, 1.0, 0.5);
        let c = free_curve(vec![Vec2::new(2.0, 5.0), Vec2::new(4.0, 5.0)]);
        external_term(&c, 0, &u, &u, &EvolveParams::new(1.0, 1.0, 0.1));
    }

    #[test]
    fn growth_indicator_is_minus_sigma_on_constant_images() {
        let u = GridImage::constant(10, 10, 1.0, 0.3);
        let st = endpoint_stencil(Vec2::new(4.5, 4.5), Vec2::new(1.0, 0.0), CurveEnd::Start, &TEST_DOMAIN)
            .unwrap();
        let g = growth_indicator(&st, Vec2::new(1.0, 0.0), &u, 0.07);
        assert_eq!(g, -0.07);
    }

    #[test]
    fn growth_indicator_flips_sign_as_sigma_crosses_the_gradient_term() {
        let u = crate::imaging::generate_crack_tip(40, 40);
        let domain = Domain { nx: 40, ny: 40, h: 1.0 };
        // Just below the crack line left of center, pointing along it, so the
        // stencil's vertical link straddles the jump.
        let x = Vec2::new(10.5, 19.75);
        let tau = Vec2::new(1.0, 0.0);
        let st = endpoint_stencil(x, tau, CurveEnd::Start, &domain).unwrap();
        let g2 = u.forward_diff(st.z1, Axis::Y);
        let gate = g2 * g2;
        assert!(gate > 0.1, "crack jump must dominate the vertical gradient, got {gate}");
        assert!(growth_indicator(&st, tau, &u, 0.5 * gate) > 0.0);
        assert!(growth_indicator(&st, tau, &u, 2.0 * gate) < 0.0);
    }

    #[test]
    fn interior_rows_reduce_to_plain_second_differences_for_equal_spacing() {
        // Equispaced open zigzag (all segment lengths √5): the assembled
        // neighbor coefficients must be the plain −1/h² and the diagonal the
        // normal-mass block plus 2/h².
        let nodes: Vec<Vec2> = (0..6)
            .map(|k| Vec2::new(4.0 + 2.0 * k as f64, if k % 2 == 0 { 8.0 } else { 9.0 }))
            .collect();
        let c = free_curve(nodes);
        let u = GridImage::constant(30, 30, 1.0, 0.5);
        let params = EvolveParams::new(1.0, 1.0, 0.1);
        let h2 = 5.0; // squared spacing
        let inv = 1.0 / (params.sigma * params.dt);

        let (a, _) = assemble_interior(&c, &u, &u, &params);
        let m = c.n_nodes() - 2;
        for k in 0..m {
            let w = c.weighted_normal(k as isize + 1);
            let diag = a.get(2 * k, 2 * k);
            let expect = w.x * w.x * inv + 2.0 / h2;
            assert!(
                (diag - expect).abs() < 1e-13,
                "row {k}: diagonal {diag} vs ωₓ²/(σΔt) + 2/h² = {expect}"
            );
            if k > 0 {
                let left = a.get(2 * k, 2 * (k - 1));
                assert!(
                    (left + 1.0 / h2).abs() < 1e-13,
                    "row {k}: left coefficient {left} should be −1/h² = {}",
                    -1.0 / h2
                );
            }
            if k + 1 < m {
                let right = a.get(2 * k + 1, 2 * (k + 1) + 1);
                assert!(
                    (right + 1.0 / h2).abs() < 1e-13,
                    "row {k}: right coefficient {right} should be −1/h²"
                );
            }
        }

        // The scheme itself: a straight equispaced segment stays fixed.
        let line = free_curve((0..6).map(|k| Vec2::new(4.0 + k as f64 * 2.0, 9.0)).collect());
        let net = CurveNetwork::new(vec![line.clone()], Domain { nx: 30, ny: 30, h: 1.0 }).unwrap();
        let mut params = params;
        params.h_target = 1.8; // unit spacing 2.0 stays in [1.8, 3.6] after the ends retreat
        let report = step_report(&net, &u, &u, &params).unwrap();
        for (j, &p) in report.network.curves[0].nodes().iter().enumerate().skip(1).take(4) {
            assert!(
                p.dist(line.node_at(j as isize)) < 1e-9,
                "interior node {j} of a straight line moved to {p:?}"
            );
        }
    }

    #[test]
    fn closed_polygon_shrinks_along_the_curvature_flow_radius_law() {
        let (n, r0) = (32, 10.0);
        let center = Vec2::new(15.0, 15.0);
        let u = GridImage::constant(30, 30, 1.0, 0.5);
        let mut params = EvolveParams::new(1.0, 0.5, 1e-3);
        params.h_target = 1.7; // keeps spacings 1.7..2.0 inside the remesh band [1.7, 3.4]
        let mut net =
            CurveNetwork::new(vec![regular_polygon(n, center, r0)], Domain { nx: 30, ny: 30, h: 1.0 })
                .unwrap();

        let steps = 9500; // R: 10 → 9 under R(t) = √(R₀² − 2t)
        for s in 1..=steps {
            net = step(&net, &u, &u, &params).unwrap();
            if s % 1000 == 0 || s == steps {
                let t = s as f64 * params.dt;
                let expect = (r0 * r0 - 2.0 * t).sqrt();
                let got = mean_radius(&net.curves[0]);
                let rel = (got - expect).abs() / expect;
                assert!(rel < 0.01, "step {s}: radius {got} vs analytic {expect}, rel err {rel}");
            }
        }
        assert_eq!(net.curves[0].n_nodes(), n, "no remesh activity expected in band");
    }

    #[test]
    fn closed_curve_length_never_increases_without_external_force() {
        let u = GridImage::constant(40, 40, 1.0, 0.7);
        // Irregular closed hexagon-ish loop.
        let nodes = vec![
            Vec2::new(12.0, 10.0),
            Vec2::new(24.0, 11.0),
            Vec2::new(30.0, 18.0),
            Vec2::new(25.0, 27.0),
            Vec2::new(14.0, 28.0),
            Vec2::new(8.0, 19.0),
        ];
        let mut net = CurveNetwork::new(
            vec![PolygonalCurve::closed(0, nodes).unwrap()],
            Domain { nx: 40, ny: 40, h: 1.0 },
        )
        .unwrap();
        let params = EvolveParams::new(1.0, 0.5, 0.05);
        let mut prev = net.total_length();
        for s in 0..50 {
            net = step(&net, &u, &u, &params).unwrap();
            let len = net.total_length();
            assert!(len <= prev + 1e-8, "length grew {prev} → {len} at step {s}");
            prev = len;
        }
    }

    #[test]
    fn semi_implicit_step_survives_ten_times_the_explicit_limit() {
        let (n, r0) = (32, 10.0);
        let u = GridImage::constant(30, 30, 1.0, 0.5);
        let h_curve = 2.0 * std::f64::consts::PI * r0 / n as f64;
        let mut params = EvolveParams::new(1.0, 0.5, 10.0 * h_curve * h_curve / 2.0);
        params.h_target = 2.0;
        let mut net = CurveNetwork::new(
            vec![regular_polygon(n, Vec2::new(15.0, 15.0), r0)],
            Domain { nx: 30, ny: 30, h: 1.0 },
        )
        .unwrap();
        let mut prev = net.total_length();
        for _ in 0..3 {
            net = step(&net, &u, &u, &params).unwrap();
            let len = net.total_length();
            assert!(len.is_finite() && len > 0.0, "length must stay finite and positive");
            assert!(len < prev, "large-step shrinking must still reduce length");
            net.validate().expect("network stays valid at 10× the explicit limit");
            prev = len;
        }
    }

    #[test]
    fn straight_segment_ends_retreat_at_speed_sigma() {
        let u = GridImage::constant(20, 20, 1.0, 0.5);
        let nodes: Vec<Vec2> = (0..=10).map(|k| Vec2::new(5.0 + k as f64, 10.0)).collect();
        let net =
            CurveNetwork::new(vec![free_curve(nodes)], Domain { nx: 20, ny: 20, h: 1.0 }).unwrap();
        let mut params = EvolveParams::new(0.25, 1.0, 0.01);
        params.h_target = 0.9; // unit spacing sits in [0.9, 1.8] even after the ends retreat
        let report = step_report(&net, &u, &u, &params).unwrap();
        let c = &report.network.curves[0];
        let retreat = params.sigma * params.dt;
        assert!(
            (c.node_at(0).x - (5.0 + retreat)).abs() < 1e-12,
            "start end at {}, expected {}",
            c.node_at(0).x,
            5.0 + retreat
        );
        let last = c.n_nodes() as isize - 1;
        assert!(
            (c.node_at(last).x - (15.0 - retreat)).abs() < 1e-12,
            "far end at {}, expected {}",
            c.node_at(last).x,
            15.0 - retreat
        );
        assert!((c.node_at(0).y - 10.0).abs() < 1e-12, "retreat must be purely tangential");
        // Interior nodes of a straight curve satisfy the old equations exactly.
        for j in 1..c.n_nodes() - 1 {
            let p = c.node_at(j as isize);
            assert!(
                p.dist(Vec2::new(5.0 + j as f64, 10.0)) < 1e-9,
                "interior node {j} drifted to {p:?}"
            );
        }
    }

    #[test]
    fn two_node_curve_steps_without_an_interior_system() {
        let u = GridImage::constant(20, 20, 1.0, 0.5);
        let net = CurveNetwork::new(
            vec![free_curve(vec![Vec2::new(8.0, 10.0), Vec2::new(12.0, 10.0)])],
            Domain { nx: 20, ny: 20, h: 1.0 },
        )
        .unwrap();
        let params = EvolveParams::new(0.5, 1.0, 0.01);
        let out = step(&net, &u, &u, &params).unwrap();
        let c = &out.curves[0];
        assert_eq!(c.n_nodes(), 2);
        assert!((c.node_at(0).x - 8.005).abs() < 1e-12);
        assert!((c.node_at(1).x - 11.995).abs() < 1e-12);
    }

    #[test]
    fn disabled_normal_motion_keeps_endpoint_displacement_tangential() {
        // Non-constant image so V_n would be nonzero if enabled.
        let u = GridImage::from_fn(20, 20, 1.0, |x, y| (x * 0.31).sin() * (y * 0.17).cos() * 0.4 + 0.5);
        let nodes = vec![Vec2::new(6.0, 8.0), Vec2::new(9.0, 10.0), Vec2::new(12.0, 11.0)];
        let curve = free_curve(nodes.clone());
        let net = CurveNetwork::new(vec![curve.clone()], Domain { nx: 20, ny: 20, h: 1.0 }).unwrap();
        let mut params = EvolveParams::new(0.3, 1.0, 0.01);
        params.h_target = 3.0; // node spacings ≈3.2..3.6 stay inside [3, 6]
        params.endpoint_normal_motion = false;
        let out = step(&net, &u, &u, &params).unwrap();

        for (end, j) in [(CurveEnd::Start, 0isize), (CurveEnd::End, 2)] {
            let disp = out.curves[0].node_at(j) - curve.node_at(j);
            let tau = curve.endpoint_tangent(end);
            let off_axis = disp.x * tau.y - disp.y * tau.x;
            assert!(
                off_axis.abs() <= 1e-12 * disp.norm().max(1e-30),
                "endpoint {end:?} displacement {disp:?} not parallel to τ {tau:?}"
            );
        }

        // And with motion enabled the same endpoint gains a normal component.
        params.endpoint_normal_motion = true;
        let out2 = step(&net, &u, &u, &params).unwrap();
        let disp = out2.curves[0].node_at(0) - curve.node_at(0);
        let tau = curve.endpoint_tangent(CurveEnd::Start);
        assert!(
            (disp.x * tau.y - disp.y * tau.x).abs() > 1e-9,
            "normal motion enabled should bend the endpoint path"
        );
    }

    #[test]
    fn endpoint_update_commutes_with_transposition() {
        let g = |x: f64, y: f64| (x * 0.23).sin() * 0.3 + (y * 0.4).cos() * 0.2 + 0.5;
        let u = GridImage::from_fn(20, 20, 1.0, g);
        let ut = GridImage::from_fn(20, 20, 1.0, |x, y| g(y, x));
        let swap = |v: Vec2| Vec2::new(v.y, v.x);

        let nodes = vec![
            Vec2::new(5.25, 8.5),
            Vec2::new(8.0, 9.25),
            Vec2::new(11.0, 9.5),
            Vec2::new(13.5, 11.0),
        ];
        let curve = free_curve(nodes.clone());
        let curve_t = free_curve(nodes.iter().map(|&p| swap(p)).collect());
        let dom = Domain { nx: 20, ny: 20, h: 1.0 };
        let params = EvolveParams::new(0.2, 1.5, 0.02);

        let out = step(&CurveNetwork::new(vec![curve], dom).unwrap(), &u, &u, &params).unwrap();
        let out_t = step(&CurveNetwork::new(vec![curve_t], dom).unwrap(), &ut, &ut, &params).unwrap();

        let a = &out.curves[0];
        let b = &out_t.curves[0];
        assert_eq!(a.n_nodes(), b.n_nodes());
        for j in 0..a.n_nodes() {
            let d = swap(a.node_at(j as isize)).dist(b.node_at(j as isize));
            assert!(d < 1e-12, "node {j} transposition mismatch by {d}");
        }
    }

    #[test]
    fn boundary_attached_endpoint_slides_only_along_its_edge() {
        // A bowed curve attached to the left edge; curvature pulls the
        // interior, and the attached end must follow along x = 0 exactly.
        let nodes = vec![
            Vec2::new(0.0, 8.0),
            Vec2::new(3.0, 9.5),
            Vec2::new(6.0, 10.5),
            Vec2::new(9.0, 10.8),
        ];
        let c = PolygonalCurve::new(
            0,
            EndpointKind::Boundary(BoundaryEdge::Left),
            EndpointKind::Free,
            nodes.clone(),
        )
        .unwrap();
        let u = GridImage::constant(20, 20, 1.0, 0.5);
        let net = CurveNetwork::new(vec![c], Domain { nx: 20, ny: 20, h: 1.0 }).unwrap();
        let mut params = EvolveParams::new(0.5, 1.0, 0.5);
        params.h_target = 2.5; // node spacings ≈3.0..3.4 stay inside [2.5, 5]
        let out = step(&net, &u, &u, &params).unwrap();
        let end = out.curves[0].node_at(0);
        assert_eq!(end.x, 0.0, "attached endpoint must stay on the left edge");
        let neighbor_dy = out.curves[0].node_at(1).y - nodes[1].y;
        assert!(neighbor_dy.abs() > 1e-6, "interior neighbor should move under curvature");
        assert!(
            (end.y - (8.0 + neighbor_dy)).abs() < 1e-12,
            "endpoint slide {} must equal the neighbor's projected shift {}",
            end.y - 8.0,
            neighbor_dy
        );
        out.validate().expect("attachment preserved");
    }

    #[test]
    fn endpoint_near_border_freezes_normal_motion_and_reports_it() {
        // Mild unsaturated slope: nonzero x-gradient at the stencil keeps the
        // normal velocity away from zero so the freeze rule actually fires.
        let u = GridImage::from_fn(20, 20, 1.0, |x, y| (x + y) * 0.02);
        // Start endpoint inside the first cell column (ci = 0).
        let nodes = vec![Vec2::new(0.5, 10.5), Vec2::new(3.5, 10.5), Vec2::new(6.5, 10.5)];
        let curve = free_curve(nodes.clone());
        let net = CurveNetwork::new(vec![curve.clone()], Domain { nx: 20, ny: 20, h: 1.0 }).unwrap();
        let params = EvolveParams::new(0.3, 1.0, 0.01);
        let report = step_report(&net, &u, &u, &params).unwrap();
        assert!(
            report.frozen.contains(&(0, CurveEnd::Start)),
            "border-adjacent endpoint must be reported frozen, got {:?}",
            report.frozen
        );
        let disp = report.network.curves[0].node_at(0) - nodes[0];
        let tau = curve.endpoint_tangent(CurveEnd::Start);
        assert!(
            (disp.x * tau.y - disp.y * tau.x).abs() <= 1e-12 * disp.norm().max(1e-30),
            "frozen endpoint must move tangentially only"
        );
    }

    #[test]
    fn escaping_endpoint_is_clamped_to_the_domain_and_reported() {
        // Strong vertical jump makes the growth term dominate σ, so the start
        // endpoint extends in −τ = −e₁ past the left border in one large step.
        let u = GridImage::from_fn(20, 20, 1.0, |_, y| if y < 10.5 { 0.0 } else { 1.0 });
        let nodes = vec![Vec2::new(0.4, 10.25), Vec2::new(3.4, 10.25), Vec2::new(6.4, 10.25)];
        let net = CurveNetwork::new(vec![free_curve(nodes)], Domain { nx: 20, ny: 20, h: 1.0 }).unwrap();
        let mut params = EvolveParams::new(1e-4, 1.0, 1.0);
        params.h_target = 3.0;
        let report = step_report(&net, &u, &u, &params).unwrap();
        assert!(
            report.clamped.contains(&(0, 0)),
            "escaped endpoint must be clamped and reported, got {:?}",
            report.clamped
        );
        let p = report.network.curves[0].node_at(0);
        assert_eq!(p.x, 0.0, "clamp lands on the border, got {p:?}");
    }
}
