//! Run orchestration: the alternating-minimization loop and its artifacts.
//!
//! A run alternates bulk solves (recomputing the approximation `u` with the
//! curves frozen) with curve-evolution steps (moving the curves with `u`
//! frozen), detecting topology events after every step. Three modes share the
//! loop: `freeend` denoises `u`, `chanvese-pc` paints `u` with region means
//! (requiring curves without free endpoints), and `postprocess` first deletes
//! curve nodes sitting on no real image edge, then runs like `freeend`.
//!
//! The bulk solve is skipped whenever the set of crossed grid links is
//! unchanged since the last solve — the linear system would be identical, so
//! the skip is exact, not an approximation. Solver failures do not tear down
//! the process: the run stops with [`RunStatus::Aborted`] and the state
//! gathered so far is still written to the output directory.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;

use crate::config::{Mode, RunConfig};
use crate::denoiser::{compute_masks, solve_masked};
use crate::energy::{discrete_ms_energy, jump_across, region_means_image, EnergyBreakdown};
use crate::evolver::{step_report, EvolveParams};
use crate::geometry::{
    parse_snapshot, write_snapshot, CurveEnd, CurveNetwork, Domain, EndpointKind, GeometryError,
    PolygonalCurve,
};
use crate::imaging::{GridImage, ImageError};
use crate::topology::{apply, detect_with, TopologyEvent};
use crate::vec2::Vec2;

/// Displacement threshold (times the grid spacing) below which a step counts
/// as quiet; [`CONVERGED_AFTER`] consecutive quiet steps end the run.
const QUIET_FACTOR: f64 = 1e-4;
const CONVERGED_AFTER: usize = 50;

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    /// Ran the configured number of steps.
    MaxSteps,
    /// Maximum node displacement stayed below the quiet threshold for
    /// [`CONVERGED_AFTER`] consecutive steps.
    Converged,
    /// Every curve fell below the deletion thresholds.
    AllCurvesDeleted,
    /// A linear solve failed; the state is whatever the run had built.
    Aborted { detail: String },
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::MaxSteps => write!(f, "max steps"),
            RunStatus::Converged => write!(f, "converged"),
            RunStatus::AllCurvesDeleted => write!(f, "all curves deleted"),
            RunStatus::Aborted { detail } => write!(f, "aborted: {detail}"),
        }
    }
}

/// One row of the energy log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    /// Number of evolution steps taken when the state was measured.
    pub step: usize,
    pub energy: EnergyBreakdown,
}

/// Everything a finished (or aborted) run hands back.
#[derive(Debug)]
pub struct SegmentationState {
    /// Evolution steps actually taken.
    pub step: usize,
    pub network: CurveNetwork,
    pub u: GridImage,
    /// Energy before each step, plus the final state; strictly increasing
    /// step indices.
    pub energy_log: Vec<EnergyRecord>,
    /// Text records: `event <step> <kind> <curve ids>` for topology events,
    /// `node_clamped` / `endpoint_frozen` / `postprocess` / `abort`
    /// diagnostics.
    pub event_log: Vec<String>,
    /// Curve snapshots taken at the configured cadence, as (step, text).
    pub snapshots: Vec<(usize, String)>,
    pub status: RunStatus,
}

/// Errors that prevent a run from starting (bad inputs) or persisting its
/// outputs. Numerical failures during the run are a [`RunStatus`], not an
/// error — the partial state is still returned and written.
#[derive(Debug)]
pub enum PipelineError {
    Image(ImageError),
    Geometry(GeometryError),
    Io(std::io::Error),
    /// A mode/input combination that is disallowed, e.g. `chanvese-pc` with
    /// free endpoints.
    Usage(String),
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Image(e) => write!(f, "image: {e}"),
            PipelineError::Geometry(e) => write!(f, "curves: {e}"),
            PipelineError::Io(e) => write!(f, "io: {e}"),
            PipelineError::Usage(detail) => write!(f, "{detail}"),
        }
    }
}

impl std::error::Error for PipelineError {}

impl From<ImageError> for PipelineError {
    fn from(e: ImageError) -> Self {
        PipelineError::Image(e)
    }
}

impl From<GeometryError> for PipelineError {
    fn from(e: GeometryError) -> Self {
        PipelineError::Geometry(e)
    }
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Io(e)
    }
}

/// Runs a full segmentation from a configuration: loads the image and the
/// initial curves, executes the loop, and writes `energy.csv`, `events.log`,
/// curve snapshots, `u_final.pgm`, and `config.echo` into the output
/// directory.
///
/// # Errors
/// [`PipelineError`] when inputs cannot be loaded or outputs cannot be
/// written. A failing linear solve is reported through
/// [`SegmentationState::status`] instead, with the partial state on disk.
pub fn run_segmentation(config: &RunConfig) -> Result<SegmentationState, PipelineError> {
    let u0 = config.image.load()?;
    let text = fs::read_to_string(&config.curves)?;
    let network = parse_snapshot(&text, Domain::of_image(&u0))?;
    let state = run_in_memory(config, &u0, network)?;
    write_outputs(config, &state)?;
    Ok(state)
}

/// The run loop on already-loaded inputs; no filesystem access.
///
/// # Errors
/// As [`run_segmentation`], minus the IO.
pub fn run_in_memory(
    config: &RunConfig,
    u0: &GridImage,
    initial: CurveNetwork,
) -> Result<SegmentationState, PipelineError> {
    let domain = initial.domain;
    assert_eq!((u0.nx(), u0.ny()), (domain.nx, domain.ny), "image/domain grid mismatch");
    if config.mode == Mode::ChanVesePc {
        let free = initial.curves.iter().any(|c| {
            c.kind_start == EndpointKind::Free || c.kind_end == EndpointKind::Free
        });
        if free {
            return Err(PipelineError::Usage(
                "chanvese-pc requires closed or boundary-attached curves".into(),
            ));
        }
    }

    let mut event_log: Vec<String> = Vec::new();
    let mut network = initial;
    if config.mode == Mode::Postprocess {
        let before: usize = network.curves.iter().map(PolygonalCurve::n_nodes).sum();
        network = postprocess_delete_nodes(&network, u0, config.tol, config.a)?;
        let after: usize = network.curves.iter().map(PolygonalCurve::n_nodes).sum();
        event_log.push(format!("postprocess 0 deleted {} nodes", before - after));
    }

    let mut params = EvolveParams::new(config.sigma, config.lambda, config.dt);
    params.a = config.a;
    params.endpoint_normal_motion = config.endpoint_normal_motion;
    params.h_target = config.h_target;
    let cell = 2.0 * config.h_target;

    let mut energy_log: Vec<EnergyRecord> = Vec::new();
    let mut snapshots: Vec<(usize, String)> = Vec::new();
    let mut frozen_ends: BTreeSet<(u64, CurveEnd)> = BTreeSet::new();
    let mut border_frozen: BTreeSet<(u64, CurveEnd)> = BTreeSet::new();
    let mut quiet_streak = 0usize;
    let mut steps_done = 0usize;
    let mut status = RunStatus::MaxSteps;

    // Initial bulk solve; u₀ itself is the warm start.
    let mut solved_crossings = network.gridline_crossings();
    let mut u = match bulk_solve(config, u0, &network, Some(u0)) {
        Ok(u) => u,
        Err(e) => {
            let detail = format!("initial bulk solve: {e}");
            event_log.push(format!("abort 0 {detail}"));
            let mut state = SegmentationState {
                step: 0,
                network,
                u: u0.clone(),
                energy_log,
                event_log,
                snapshots,
                status: RunStatus::Aborted { detail },
            };
            state.energy_log.push(record(0, &state.network, &state.u, u0, config));
            return Ok(state);
        }
    };

    for m in 0..config.max_steps {
        // (1) Bulk solve at the configured cadence (step 0 is done above).
        if m > 0 && m % config.bulk_cadence == 0 {
            let crossings = network.gridline_crossings();
            if crossings != solved_crossings {
                match bulk_solve(config, u0, &network, Some(&u)) {
                    Ok(next) => {
                        u = next;
                        solved_crossings = crossings;
                    }
                    Err(e) => {
                        let detail = format!("bulk solve at step {m}: {e}");
                        event_log.push(format!("abort {m} {detail}"));
                        status = RunStatus::Aborted { detail };
                        break;
                    }
                }
            }
        }

        energy_log.push(record(m, &network, &u, u0, config));
        if config.snapshot_every > 0 && m % config.snapshot_every == 0 {
            snapshots.push((m, write_snapshot(&network)));
        }

        // (2) One curve-evolution step.
        params.frozen_ends = frozen_ends.clone();
        let report = match step_report(&network, u0, &u, &params) {
            Ok(report) => report,
            Err(e) => {
                let detail = format!("curve solve at step {m}: {e}");
                event_log.push(format!("abort {m} {detail}"));
                status = RunStatus::Aborted { detail };
                break;
            }
        };
        for &(id, node) in &report.clamped {
            event_log.push(format!("node_clamped {m} {id} {node}"));
        }
        let frozen_now: BTreeSet<(u64, CurveEnd)> = report.frozen.iter().copied().collect();
        for &(id, end) in frozen_now.difference(&border_frozen) {
            event_log.push(format!("endpoint_frozen {m} {id} {}", end_token(end)));
        }
        border_frozen = frozen_now;
        network = report.network;
        steps_done = m + 1;

        // (3) Topology events, applied in their sorted order; an event made
        // stale by an earlier apply simply fails validation and is skipped.
        for event in detect_with(&network, cell, config.l_min) {
            if let TopologyEvent::TripleJunction { free_end, .. } = event {
                let end = junction_end(&network, free_end.curve, free_end.node);
                let Some(end) = end else { continue };
                if !frozen_ends.insert((free_end.curve, end)) {
                    continue; // already-established junction, keep quiet
                }
            }
            match apply(&network, &event) {
                Ok(next) => {
                    let ids: Vec<String> =
                        event.curve_ids().iter().map(u64::to_string).collect();
                    event_log.push(format!(
                        "event {m} {} {}",
                        event.kind_token(),
                        ids.join(" ")
                    ));
                    if !matches!(event, TopologyEvent::TripleJunction { .. }) {
                        // Restructured curves invalidate junction bookkeeping
                        // tied to their ids.
                        for id in event.curve_ids() {
                            frozen_ends.retain(|(c, _)| *c != id);
                        }
                    }
                    network = next;
                }
                Err(_) => {
                    if let TopologyEvent::TripleJunction { free_end, .. } = event {
                        frozen_ends.remove(&(free_end.curve, junction_end(
                            &network,
                            free_end.curve,
                            free_end.node,
                        )
                        .unwrap_or(CurveEnd::Start)));
                    }
                }
            }
        }

        if network.curves.is_empty() {
            status = RunStatus::AllCurvesDeleted;
            break;
        }

        // Convergence: a long streak of quiet steps.
        if report.max_displacement < QUIET_FACTOR * domain.h {
            quiet_streak += 1;
            if quiet_streak >= CONVERGED_AFTER {
                status = RunStatus::Converged;
                break;
            }
        } else {
            quiet_streak = 0;
        }
    }

    // Final record, unless the abort path already recorded this exact state.
    if energy_log.last().map(|r| r.step) != Some(steps_done) {
        energy_log.push(record(steps_done, &network, &u, u0, config));
    }

    Ok(SegmentationState {
        step: steps_done,
        network,
        u,
        energy_log,
        event_log,
        snapshots,
        status,
    })
}

fn record(
    step: usize,
    network: &CurveNetwork,
    u: &GridImage,
    u0: &GridImage,
    config: &RunConfig,
) -> EnergyRecord {
    EnergyRecord { step, energy: discrete_ms_energy(network, u, u0, config.sigma, config.lambda) }
}

fn bulk_solve(
    config: &RunConfig,
    u0: &GridImage,
    network: &CurveNetwork,
    warm: Option<&GridImage>,
) -> Result<GridImage, crate::linalg::SolveError> {
    match config.mode {
        Mode::ChanVesePc => Ok(region_means_image(network, u0)),
        Mode::FreeEnd | Mode::Postprocess => {
            solve_masked(u0, &compute_masks(network), config.lambda, warm)
        }
    }
}

fn end_token(end: CurveEnd) -> &'static str {
    match end {
        CurveEnd::Start => "start",
        CurveEnd::End => "end",
    }
}

/// Which end of the curve a junction node index denotes, if it is an end.
fn junction_end(network: &CurveNetwork, curve: u64, node: usize) -> Option<CurveEnd> {
    let c = network.curves.iter().find(|c| c.id == curve)?;
    if node == 0 {
        Some(CurveEnd::Start)
    } else if node == c.n_nodes() - 1 {
        Some(CurveEnd::End)
    } else {
        None
    }
}

/// Deletes every maximal run of curve nodes whose image jump across the curve
/// is below `tol`. A closed curve losing nodes opens up into free-ended
/// pieces; an open curve splits into pieces keeping its outer endpoint kinds;
/// pieces with fewer than two nodes vanish; a curve losing every node is
/// removed. Curves losing nothing are returned unchanged.
///
/// # Errors
/// [`GeometryError`] if a resulting piece fails validation.
///
/// # Panics
/// Panics unless `tol ∈ (0, 1)`.
pub fn postprocess_delete_nodes(
    network: &CurveNetwork,
    u0: &GridImage,
    tol: f64,
    a: f64,
) -> Result<CurveNetwork, GeometryError> {
    assert!(tol > 0.0 && tol < 1.0, "tol must lie in (0, 1), got {tol}");
    let mut next_id = network.curves.iter().map(|c| c.id + 1).max().unwrap_or(0);
    let mut curves: Vec<PolygonalCurve> = Vec::new();

    for curve in &network.curves {
        let n = curve.n_nodes();
        let keep: Vec<bool> =
            (0..n).map(|j| jump_across(curve, j, u0, a) >= tol).collect();
        let kept = keep.iter().filter(|k| **k).count();
        if kept == n {
            curves.push(curve.clone());
            continue;
        }
        if kept == 0 {
            continue;
        }

        // Maximal kept runs, as (start, length) in node indices. For closed
        // curves the scan starts after some deleted node so no run wraps.
        let runs: Vec<(usize, usize)> = if curve.is_closed() {
            let first_gone = keep.iter().position(|k| !k).expect("kept < n");
            collect_runs((1..=n).map(|d| (first_gone + d) % n), &keep)
        } else {
            collect_runs(0..n, &keep)
        };

        let mut first_piece = true;
        for (start, len) in runs {
            if len < 2 {
                continue; // a single marooned node cannot form a curve
            }
            let nodes: Vec<Vec2> =
                (0..len).map(|d| curve.node_at(((start + d) % n) as isize)).collect();
            let kind_start = if !curve.is_closed() && start == 0 {
                curve.kind_start
            } else {
                EndpointKind::Free
            };
            let kind_end = if !curve.is_closed() && (start + len) == n {
                curve.kind_end
            } else {
                EndpointKind::Free
            };
            let id = if first_piece {
                curve.id
            } else {
                let id = next_id;
                next_id += 1;
                id
            };
            first_piece = false;
            curves.push(PolygonalCurve::new(id, kind_start, kind_end, nodes)?);
        }
    }
    CurveNetwork::new(curves, network.domain)
}

/// Collects maximal runs of `true` along the given index walk.
fn collect_runs(walk: impl Iterator<Item = usize>, keep: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    for j in walk {
        if keep[j] {
            match &mut current {
                Some((_, len)) => *len += 1,
                None => current = Some((j, 1)),
            }
        } else if let Some(run) = current.take() {
            runs.push(run);
        }
    }
    if let Some(run) = current {
        runs.push(run);
    }
    runs
}

/// Writes the run artifacts into the configured output directory.
fn write_outputs(config: &RunConfig, state: &SegmentationState) -> Result<(), PipelineError> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.echo"), config.echo())?;

    let mut csv = String::from("step,length_term,gradient_term,fidelity_term,total\n");
    for r in &state.energy_log {
        let e = &r.energy;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.step, e.length_term, e.gradient_term, e.fidelity_term, e.total
        ));
    }
    fs::write(dir.join("energy.csv"), csv)?;

    let mut log = state.event_log.join("\n");
    if !log.is_empty() {
        log.push('\n');
    }
    fs::write(dir.join("events.log"), log)?;

    for (step, text) in &state.snapshots {
        fs::write(dir.join(format!("curves_{step}.txt")), text)?;
    }
    fs::write(dir.join(format!("curves_{}.txt", state.step)), write_snapshot(&state.network))?;
    state.u.save_pgm(dir.join("u_final.pgm"))?;
    Ok(())
}

/// Horizontal open seed along height `y`: attached to the left image border,
/// free end at `(x_stop, y)`, nodes about `spacing` apart.
///
/// # Errors
/// [`GeometryError`] if the segment leaves the domain.
///
/// # Panics
/// Panics unless `0 < spacing` and `0 < x_stop`.
pub fn seed_segment(
    domain: Domain,
    y: f64,
    x_stop: f64,
    spacing: f64,
) -> Result<CurveNetwork, GeometryError> {
    assert!(spacing > 0.0 && x_stop > 0.0, "segment seed needs positive extent and spacing");
    let segments = (x_stop / spacing).ceil().max(1.0) as usize;
    let nodes: Vec<Vec2> = (0..=segments)
        .map(|k| Vec2::new(x_stop * k as f64 / segments as f64, y))
        .collect();
    let curve = PolygonalCurve::new(
        0,
        EndpointKind::Boundary(crate::geometry::BoundaryEdge::Left),
        EndpointKind::Free,
        nodes,
    )?;
    CurveNetwork::new(vec![curve], domain)
}

/// Closed circular seed: `n` nodes counterclockwise around `center`.
///
/// # Errors
/// [`GeometryError`] if the circle leaves the domain.
///
/// # Panics
/// Panics unless `n ≥ 3` and `radius > 0`.
pub fn seed_circle(
    domain: Domain,
    center: Vec2,
    radius: f64,
    n: usize,
) -> Result<CurveNetwork, GeometryError> {
    assert!(n >= 3 && radius > 0.0, "circle seed needs n ≥ 3 and a positive radius");
    let nodes: Vec<Vec2> = (0..n)
        .map(|k| {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            center + Vec2::new(radius * phi.cos(), radius * phi.sin())
        })
        .collect();
    let curve = PolygonalCurve::closed(0, nodes)?;
    CurveNetwork::new(vec![curve], domain)
}

/// A `cols × rows` lattice of short horizontal free-free segments (three
/// nodes each), evenly spread over the domain — the "many small seeds"
/// initialization.
///
/// # Errors
/// [`GeometryError`] if a segment leaves the domain (overlong `seg_len`).
///
/// # Panics
/// Panics unless `cols`, `rows` ≥ 1 and `seg_len > 0`.
pub fn seed_grid(
    domain: Domain,
    cols: usize,
    rows: usize,
    seg_len: f64,
) -> Result<CurveNetwork, GeometryError> {
    assert!(cols >= 1 && rows >= 1 && seg_len > 0.0, "grid seed needs positive counts and length");
    let mut curves = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            let cx = domain.width() * (c as f64 + 0.5) / cols as f64;
            let cy = domain.height() * (r as f64 + 0.5) / rows as f64;
            let half = seg_len / 2.0;
            curves.push(PolygonalCurve::new(
                (r * cols + c) as u64,
                EndpointKind::Free,
                EndpointKind::Free,
                vec![
                    Vec2::new(cx - half, cy),
                    Vec2::new(cx, cy),
                    Vec2::new(cx + half, cy),
                ],
            )?);
        }
    }
    CurveNetwork::new(curves, domain)
}
