//! Detection and execution of topology changes.
//!
//! Detection hashes every node into a coarse background grid covering the
//! domain; any two nodes sharing a cell that are not near neighbors along
//! one curve signal a collision. The pair's roles pick the event: two free
//! ends of one curve close it, free ends of two curves merge them, a free
//! end on another strand makes a triple junction, and interior pairs split
//! one curve or reconnect two. Curves that have become too short are
//! deleted, and free endpoints drifting against the image boundary attach
//! to it.
//!
//! Execution turns one event into a new network value, re-running the full
//! geometric validation; a stale event — the network changed since
//! detection — fails with an error instead of corrupting the curves, so
//! callers apply event lists sequentially and simply skip failures.

use std::collections::{BTreeMap, BTreeSet};

use crate::geometry::{
    BoundaryEdge, CurveEnd, CurveNetwork, EndpointKind, GeometryError, PolygonalCurve,
};
use crate::vec2::Vec2;

/// A node addressed by curve id and node index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct NodeRef {
    pub curve: u64,
    pub node: usize,
}

/// One detected topology change. The variant order is the application
/// priority: deletions first, then endpoint attachments, closings, merges,
/// junctions, and interior collisions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum TopologyEvent {
    /// Curve shorter than the deletion threshold (or down to 2 nodes).
    CurveDelete { curve: u64 },
    /// A free endpoint within one background cell of the image boundary.
    BoundaryAttach { curve: u64, end: CurveEnd, edge: BoundaryEdge },
    /// Both free ends of one open curve met: it becomes a closed curve.
    FreeEndsClose { curve: u64 },
    /// Free ends of two different curves met: they merge into one curve.
    FreeEndsMerge { a: NodeRef, b: NodeRef },
    /// A free end met an interior node; the endpoint is reported so the
    /// caller can pin it (junction evolution is out of scope).
    TripleJunction { free_end: NodeRef, interior: NodeRef },
    /// Two interior nodes of one curve met: the curve splits there.
    Split { curve: u64, nodes: (usize, usize) },
    /// Interior nodes of two curves met: the curves reconnect.
    CurvePairMerge { a: NodeRef, b: NodeRef },
}

impl TopologyEvent {
    /// Short lowercase kind token for log lines.
    pub fn kind_token(&self) -> &'static str {
        match self {
            TopologyEvent::CurveDelete { .. } => "curve_delete",
            TopologyEvent::BoundaryAttach { .. } => "boundary_attach",
            TopologyEvent::FreeEndsClose { .. } => "free_ends_close",
            TopologyEvent::FreeEndsMerge { .. } => "free_ends_merge",
            TopologyEvent::TripleJunction { .. } => "triple_junction",
            TopologyEvent::Split { .. } => "split",
            TopologyEvent::CurvePairMerge { .. } => "curve_pair_merge",
        }
    }

    /// Ids of the curves the event touches, in participant order.
    pub fn curve_ids(&self) -> Vec<u64> {
        match *self {
            TopologyEvent::CurveDelete { curve }
            | TopologyEvent::BoundaryAttach { curve, .. }
            | TopologyEvent::FreeEndsClose { curve }
            | TopologyEvent::Split { curve, .. } => vec![curve],
            TopologyEvent::FreeEndsMerge { a, b } | TopologyEvent::CurvePairMerge { a, b } => {
                vec![a.curve, b.curve]
            }
            TopologyEvent::TripleJunction { free_end, interior } => {
                vec![free_end.curve, interior.curve]
            }
        }
    }
}

/// Errors from applying an event to a network it no longer matches.
#[derive(Debug)]
pub enum TopologyError {
    UnknownCurve { curve: u64 },
    NodeOutOfRange { curve: u64, node: usize },
    /// The referenced end or node does not have the role the event needs
    /// (e.g. a merge node that is not a free endpoint).
    WrongRole { curve: u64, detail: &'static str },
    /// The resulting curves failed geometric validation.
    Geometry(GeometryError),
}

impl std::fmt::Display for TopologyError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TopologyError::UnknownCurve { curve } => write!(f, "no curve with id {curve}"),
            TopologyError::NodeOutOfRange { curve, node } => {
                write!(f, "curve {curve} has no node {node}")
            }
            TopologyError::WrongRole { curve, detail } => write!(f, "curve {curve}: {detail}"),
            TopologyError::Geometry(e) => write!(f, "resulting network invalid: {e}"),
        }
    }
}

impl std::error::Error for TopologyError {}

impl From<GeometryError> for TopologyError {
    fn from(e: GeometryError) -> Self {
        TopologyError::Geometry(e)
    }
}

/// The background grid: nodes hashed into square cells of size `cell`.
/// Collision candidates are node pairs sharing a cell, so any two nodes
/// closer than `cell` in both coordinates land together unless the cell
/// boundary separates them; pairs at least `2·cell` apart never do.
#[derive(Debug)]
pub struct BackgroundGrid {
    cell: f64,
    cells: BTreeMap<(i64, i64), Vec<NodeRef>>,
}

impl BackgroundGrid {
    /// Hashes every node of the network. `cell > 0` required.
    pub fn build(network: &CurveNetwork, cell: f64) -> BackgroundGrid {
        assert!(cell > 0.0, "background cell size must be positive");
        let mut cells: BTreeMap<(i64, i64), Vec<NodeRef>> = BTreeMap::new();
        for curve in &network.curves {
            for j in 0..curve.n_nodes() {
                let p = curve.node_at(j as isize);
                let key = ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
                cells.entry(key).or_default().push(NodeRef { curve: curve.id, node: j });
            }
        }
        BackgroundGrid { cell, cells }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Cells holding more than one node, in grid order.
    fn crowded(&self) -> impl Iterator<Item = &Vec<NodeRef>> {
        self.cells.values().filter(|nodes| nodes.len() > 1)
    }
}

/// Detects topology changes with the default deletion threshold `2·cell`
/// (see [`detect_with`]).
pub fn detect(network: &CurveNetwork, cell: f64) -> Vec<TopologyEvent> {
    detect_with(network, cell, 2.0 * cell)
}

/// Detects topology changes, returning a sorted, deduplicated event list.
///
/// Collision events come from node pairs sharing a background cell whose
/// index distance along a common curve exceeds 2 (so chains of consecutive
/// nodes never self-report). Additionally, curves shorter than `l_min` or
/// reduced to fewer than 3 nodes are flagged for deletion, and free
/// endpoints within `cell` of the image boundary attach to their nearest
/// edge. The result is independent of the order of the network's curve
/// list.
pub fn detect_with(network: &CurveNetwork, cell: f64, l_min: f64) -> Vec<TopologyEvent> {
    let grid = BackgroundGrid::build(network, cell);
    let by_id: BTreeMap<u64, &PolygonalCurve> =
        network.curves.iter().map(|c| (c.id, c)).collect();
    let mut events = BTreeSet::new();

    for nodes in grid.crowded() {
        for (k, &a) in nodes.iter().enumerate() {
            for &b in &nodes[k + 1..] {
                if let Some(event) = classify(a, b, &by_id) {
                    events.insert(event);
                }
            }
        }
    }

    for curve in &network.curves {
        if curve.length() < l_min || curve.n_nodes() < 3 {
            events.insert(TopologyEvent::CurveDelete { curve: curve.id });
        }
        for end in [CurveEnd::Start, CurveEnd::End] {
            if end_kind(curve, end) != EndpointKind::Free {
                continue;
            }
            let p = end_node(curve, end);
            if let Some(edge) = nearest_edge_within(p, network, cell) {
                events.insert(TopologyEvent::BoundaryAttach { curve: curve.id, end, edge });
            }
        }
    }

    events.into_iter().collect()
}

/// Classifies one colliding node pair, or suppresses it (near neighbors on
/// one curve). Participants are ordered canonically so the result does not
/// depend on scan order.
fn classify(
    a: NodeRef,
    b: NodeRef,
    by_id: &BTreeMap<u64, &PolygonalCurve>,
) -> Option<TopologyEvent> {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let ca = by_id[&a.curve];
    let cb = by_id[&b.curve];
    if a.curve == b.curve {
        let n = ca.n_nodes();
        let d = b.node - a.node;
        let dist = if ca.is_closed() { d.min(n - d) } else { d };
        if dist <= 2 {
            return None;
        }
    }

    let a_free = is_free_end(ca, a.node);
    let b_free = is_free_end(cb, b.node);
    Some(match (a_free, b_free) {
        (true, true) if a.curve == b.curve => TopologyEvent::FreeEndsClose { curve: a.curve },
        (true, true) => TopologyEvent::FreeEndsMerge { a, b },
        (true, false) => TopologyEvent::TripleJunction { free_end: a, interior: b },
        (false, true) => TopologyEvent::TripleJunction { free_end: b, interior: a },
        (false, false) if a.curve == b.curve => {
            TopologyEvent::Split { curve: a.curve, nodes: (a.node, b.node) }
        }
        (false, false) => TopologyEvent::CurvePairMerge { a, b },
    })
}

fn is_free_end(curve: &PolygonalCurve, node: usize) -> bool {
    (node == 0 && curve.kind_start == EndpointKind::Free)
        || (node == curve.n_nodes() - 1 && curve.kind_end == EndpointKind::Free)
}

fn end_kind(curve: &PolygonalCurve, end: CurveEnd) -> EndpointKind {
    match end {
        CurveEnd::Start => curve.kind_start,
        CurveEnd::End => curve.kind_end,
    }
}

fn end_node(curve: &PolygonalCurve, end: CurveEnd) -> Vec2 {
    match end {
        CurveEnd::Start => curve.node_at(0),
        CurveEnd::End => curve.node_at(curve.n_nodes() as isize - 1),
    }
}

/// The boundary edge closer than `within` to `p`, nearest first; ties pick
/// the fixed order left, right, bottom, top.
fn nearest_edge_within(p: Vec2, network: &CurveNetwork, within: f64) -> Option<BoundaryEdge> {
    let w = network.domain.width();
    let h = network.domain.height();
    let candidates = [
        (p.x, BoundaryEdge::Left),
        (w - p.x, BoundaryEdge::Right),
        (p.y, BoundaryEdge::Bottom),
        (h - p.y, BoundaryEdge::Top),
    ];
    candidates
        .iter()
        .filter(|(d, _)| *d < within)
        .min_by(|(d1, _), (d2, _)| d1.total_cmp(d2))
        .map(|&(_, e)| e)
}

/// Applies one event, producing the changed network. The input network is
/// not modified.
///
/// # Errors
/// [`TopologyError`] when the event does not match the network (unknown
/// curve, node index out of range, role mismatch) or when the resulting
/// curves fail validation. Callers running event lists should skip failed
/// events — they are stale descriptions of a network that no longer exists.
pub fn apply(network: &CurveNetwork, event: &TopologyEvent) -> Result<CurveNetwork, TopologyError> {
    match *event {
        TopologyEvent::CurveDelete { curve } => {
            let k = index_of(network, curve)?;
            let mut curves = network.curves.clone();
            curves.remove(k);
            Ok(CurveNetwork::new(curves, network.domain)?)
        }
        TopologyEvent::BoundaryAttach { curve, end, edge } => {
            let k = index_of(network, curve)?;
            let c = &network.curves[k];
            if end_kind(c, end) != EndpointKind::Free {
                return Err(TopologyError::WrongRole { curve, detail: "end is not free" });
            }
            let mut nodes: Vec<Vec2> = (0..c.n_nodes()).map(|j| c.node_at(j as isize)).collect();
            let j = match end {
                CurveEnd::Start => 0,
                CurveEnd::End => nodes.len() - 1,
            };
            match edge {
                BoundaryEdge::Left => nodes[j].x = 0.0,
                BoundaryEdge::Right => nodes[j].x = network.domain.width(),
                BoundaryEdge::Bottom => nodes[j].y = 0.0,
                BoundaryEdge::Top => nodes[j].y = network.domain.height(),
            }
            let (ks, ke) = match end {
                CurveEnd::Start => (EndpointKind::Boundary(edge), c.kind_end),
                CurveEnd::End => (c.kind_start, EndpointKind::Boundary(edge)),
            };
            let replaced = PolygonalCurve::new(curve, ks, ke, nodes)?;
            Ok(replace(network, k, vec![replaced])?)
        }
        TopologyEvent::FreeEndsClose { curve } => {
            let k = index_of(network, curve)?;
            let c = &network.curves[k];
            if c.is_closed()
                || c.kind_start != EndpointKind::Free
                || c.kind_end != EndpointKind::Free
            {
                return Err(TopologyError::WrongRole {
                    curve,
                    detail: "needs an open curve with two free ends",
                });
            }
            let n = c.n_nodes();
            let mid = (c.node_at(0) + c.node_at(n as isize - 1)) * 0.5;
            let mut nodes = vec![mid];
            nodes.extend((1..n - 1).map(|j| c.node_at(j as isize)));
            let closed = PolygonalCurve::closed(curve, nodes)?;
            Ok(replace(network, k, vec![closed])?)
        }
        TopologyEvent::FreeEndsMerge { a, b } => {
            let (ka, kb) = (index_of(network, a.curve)?, index_of(network, b.curve)?);
            if ka == kb {
                return Err(TopologyError::WrongRole {
                    curve: a.curve,
                    detail: "free-end merge needs two distinct curves",
                });
            }
            let ca = oriented_end_last(&network.curves[ka], a.node)?;
            let cb = oriented_end_first(&network.curves[kb], b.node)?;
            let na = ca.n_nodes();
            let mid = (ca.node_at(na as isize - 1) + cb.node_at(0)) * 0.5;
            let mut nodes: Vec<Vec2> = (0..na - 1).map(|j| ca.node_at(j as isize)).collect();
            nodes.push(mid);
            nodes.extend((1..cb.n_nodes()).map(|j| cb.node_at(j as isize)));
            let merged = PolygonalCurve::new(a.curve, ca.kind_start, cb.kind_end, nodes)?;
            Ok(replace2(network, ka, kb, vec![merged])?)
        }
        TopologyEvent::TripleJunction { free_end, interior } => {
            // Geometry is left untouched; the caller records the junction and
            // pins the endpoint. Validate the references all the same so a
            // stale event still errors.
            let kf = index_of(network, free_end.curve)?;
            if !is_free_end(&network.curves[kf], free_end.node) {
                return Err(TopologyError::WrongRole {
                    curve: free_end.curve,
                    detail: "junction node is not a free end",
                });
            }
            let ki = index_of(network, interior.curve)?;
            if interior.node >= network.curves[ki].n_nodes() {
                return Err(TopologyError::NodeOutOfRange {
                    curve: interior.curve,
                    node: interior.node,
                });
            }
            Ok(network.clone())
        }
        TopologyEvent::Split { curve, nodes: (j1, j2) } => {
            let k = index_of(network, curve)?;
            let c = &network.curves[k];
            let n = c.n_nodes();
            if j2 >= n {
                return Err(TopologyError::NodeOutOfRange { curve, node: j2 });
            }
            if j1 >= j2 {
                return Err(TopologyError::WrongRole { curve, detail: "split pair not ordered" });
            }
            let fresh = fresh_id(network);
            let parts = if c.is_closed() {
                // Two closed loops, cut at the colliding pair.
                let first: Vec<Vec2> = (j1..=j2).map(|j| c.node_at(j as isize)).collect();
                let second: Vec<Vec2> =
                    (j2..j1 + n + 1).map(|j| c.node_at(j as isize)).collect();
                vec![
                    PolygonalCurve::closed(curve, first)?,
                    PolygonalCurve::closed(fresh, second)?,
                ]
            } else {
                if j1 == 0 || j2 == n - 1 {
                    return Err(TopologyError::WrongRole {
                        curve,
                        detail: "split pair must be interior",
                    });
                }
                let first: Vec<Vec2> = (0..=j1).map(|j| c.node_at(j as isize)).collect();
                let second: Vec<Vec2> = (j2..n).map(|j| c.node_at(j as isize)).collect();
                vec![
                    PolygonalCurve::new(curve, c.kind_start, EndpointKind::Free, first)?,
                    PolygonalCurve::new(fresh, EndpointKind::Free, c.kind_end, second)?,
                ]
            };
            Ok(replace(network, k, parts)?)
        }
        TopologyEvent::CurvePairMerge { a, b } => {
            let (ka, kb) = (index_of(network, a.curve)?, index_of(network, b.curve)?);
            if ka == kb {
                return Err(TopologyError::WrongRole {
                    curve: a.curve,
                    detail: "pair merge needs two distinct curves",
                });
            }
            let ca = &network.curves[ka];
            let cb = &network.curves[kb];
            check_node(ca, a.node)?;
            check_node(cb, b.node)?;
            let merged = match (ca.is_closed(), cb.is_closed()) {
                (true, true) => merge_closed_closed(ca, a.node, cb, b.node)?,
                (false, true) => merge_open_closed(ca, a.node, cb, b.node)?,
                (true, false) => merge_open_closed(cb, b.node, ca, a.node)?,
                (false, false) => {
                    let swapped = merge_open_open(ca, a.node, cb, b.node)?;
                    return Ok(replace2(network, ka, kb, swapped)?);
                }
            };
            Ok(replace2(network, ka, kb, vec![merged])?)
        }
    }
}

fn index_of(network: &CurveNetwork, id: u64) -> Result<usize, TopologyError> {
    network
        .curves
        .iter()
        .position(|c| c.id == id)
        .ok_or(TopologyError::UnknownCurve { curve: id })
}

fn fresh_id(network: &CurveNetwork) -> u64 {
    network.curves.iter().map(|c| c.id + 1).max().unwrap_or(0)
}

fn check_node(curve: &PolygonalCurve, node: usize) -> Result<(), TopologyError> {
    if node >= curve.n_nodes() {
        return Err(TopologyError::NodeOutOfRange { curve: curve.id, node });
    }
    if !curve.is_closed() && (node == 0 || node == curve.n_nodes() - 1) {
        return Err(TopologyError::WrongRole {
            curve: curve.id,
            detail: "merge node must be interior on an open curve",
        });
    }
    Ok(())
}

/// Returns the curve oriented so that the referenced free end is the LAST
/// node; errors if the node is not a free end.
fn oriented_end_last(
    curve: &PolygonalCurve,
    node: usize,
) -> Result<PolygonalCurve, TopologyError> {
    if !is_free_end(curve, node) {
        return Err(TopologyError::WrongRole {
            curve: curve.id,
            detail: "merge node is not a free end",
        });
    }
    Ok(if node == 0 { curve.reversed() } else { curve.clone() })
}

/// Returns the curve oriented so that the referenced free end is the FIRST
/// node; errors if the node is not a free end.
fn oriented_end_first(
    curve: &PolygonalCurve,
    node: usize,
) -> Result<PolygonalCurve, TopologyError> {
    if !is_free_end(curve, node) {
        return Err(TopologyError::WrongRole {
            curve: curve.id,
            detail: "merge node is not a free end",
        });
    }
    Ok(if node == 0 { curve.clone() } else { curve.reversed() })
}

/// Two closed curves touching at one node pair become a single closed curve:
/// both colliding nodes are replaced by their midpoint, visited once, with
/// the second cycle inserted there.
fn merge_closed_closed(
    ca: &PolygonalCurve,
    ja: usize,
    cb: &PolygonalCurve,
    jb: usize,
) -> Result<PolygonalCurve, TopologyError> {
    let (na, nb) = (ca.n_nodes(), cb.n_nodes());
    let mid = (ca.node_at(ja as isize) + cb.node_at(jb as isize)) * 0.5;
    let mut nodes = vec![mid];
    nodes.extend((1..na).map(|d| ca.node_at((ja + d) as isize)));
    nodes.extend((1..nb).map(|d| cb.node_at((jb + d) as isize)));
    Ok(PolygonalCurve::closed(ca.id, nodes)?)
}

/// A closed curve absorbed into an open one at interior node `ja`: the cycle
/// is spliced in at the fused midpoint. The merged curve keeps the open
/// curve's id and endpoint kinds.
fn merge_open_closed(
    open: &PolygonalCurve,
    ja: usize,
    closed: &PolygonalCurve,
    jb: usize,
) -> Result<PolygonalCurve, TopologyError> {
    let (na, nb) = (open.n_nodes(), closed.n_nodes());
    let mid = (open.node_at(ja as isize) + closed.node_at(jb as isize)) * 0.5;
    let mut nodes: Vec<Vec2> = (0..ja).map(|j| open.node_at(j as isize)).collect();
    nodes.push(mid);
    nodes.extend((1..nb).map(|d| closed.node_at((jb + d) as isize)));
    nodes.extend((ja + 1..na).map(|j| open.node_at(j as isize)));
    Ok(PolygonalCurve::new(open.id, open.kind_start, open.kind_end, nodes)?)
}

/// Two open curves crossing at interior nodes reconnect by swapping strands;
/// the colliding nodes themselves are dropped (they are nearly coincident).
/// Outer endpoint kinds travel with their strands.
fn merge_open_open(
    ca: &PolygonalCurve,
    ja: usize,
    cb: &PolygonalCurve,
    jb: usize,
) -> Result<Vec<PolygonalCurve>, TopologyError> {
    let (na, nb) = (ca.n_nodes(), cb.n_nodes());
    let mut first: Vec<Vec2> = (0..ja).map(|j| ca.node_at(j as isize)).collect();
    first.extend((jb + 1..nb).map(|j| cb.node_at(j as isize)));
    let mut second: Vec<Vec2> = (0..jb).map(|j| cb.node_at(j as isize)).collect();
    second.extend((ja + 1..na).map(|j| ca.node_at(j as isize)));
    Ok(vec![
        PolygonalCurve::new(ca.id, ca.kind_start, cb.kind_end, first)?,
        PolygonalCurve::new(cb.id, cb.kind_start, ca.kind_end, second)?,
    ])
}

/// Rebuilds the network with curve index `k` replaced by `with` (possibly
/// several curves, possibly none).
fn replace(
    network: &CurveNetwork,
    k: usize,
    with: Vec<PolygonalCurve>,
) -> Result<CurveNetwork, GeometryError> {
    let mut curves = network.curves.clone();
    curves.splice(k..k + 1, with);
    CurveNetwork::new(curves, network.domain)
}

/// Rebuilds the network with curves `ka` and `kb` replaced by `with`; the
/// replacement list lands at the smaller index.
fn replace2(
    network: &CurveNetwork,
    ka: usize,
    kb: usize,
    with: Vec<PolygonalCurve>,
) -> Result<CurveNetwork, GeometryError> {
    let (lo, hi) = if ka < kb { (ka, kb) } else { (kb, ka) };
    let mut curves = network.curves.clone();
    curves.remove(hi);
    curves.splice(lo..lo + 1, with);
    CurveNetwork::new(curves, network.domain)
}
