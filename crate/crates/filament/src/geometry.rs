//! Polygonal curves, their discrete differential geometry, remeshing,
//! grid-link crossing detection, and the text snapshot format.
//!
//! A curve is a polygon `X_0, …, X_N`. Closed curves are stored without the
//! duplicated wrap node and indexed periodically. Open curves carry a kind for
//! each end: free (inside the image) or attached to one of the four boundary
//! edges. All discrete operators follow the convention that the normal of the
//! segment from `X_{j−1}` to `X_j` is its anticlockwise-rotated direction,
//! `ν_{j−1/2} = (X_j − X_{j−1})^⊥ / h_{j−1/2}`.

use crate::imaging::GridImage;
use crate::vec2::Vec2;
use std::collections::BTreeSet;
use std::fmt;

/// Which boundary edge an attached endpoint lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BoundaryEdge {
    Left,
    Right,
    Top,
    Bottom,
}

/// Kind of a curve end; `Closed` marks the whole curve as having no ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndpointKind {
    Closed,
    Free,
    Boundary(BoundaryEdge),
}

impl EndpointKind {
    pub fn token(&self) -> &'static str {
        match self {
            EndpointKind::Closed => "closed",
            EndpointKind::Free => "free",
            EndpointKind::Boundary(BoundaryEdge::Left) => "left",
            EndpointKind::Boundary(BoundaryEdge::Right) => "right",
            EndpointKind::Boundary(BoundaryEdge::Top) => "top",
            EndpointKind::Boundary(BoundaryEdge::Bottom) => "bottom",
        }
    }

    pub fn from_token(tok: &str) -> Option<EndpointKind> {
        Some(match tok {
            "closed" => EndpointKind::Closed,
            "free" => EndpointKind::Free,
            "left" => EndpointKind::Boundary(BoundaryEdge::Left),
            "right" => EndpointKind::Boundary(BoundaryEdge::Right),
            "top" => EndpointKind::Boundary(BoundaryEdge::Top),
            "bottom" => EndpointKind::Boundary(BoundaryEdge::Bottom),
            _ => return None,
        })
    }
}

/// One of the two ends of an open curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CurveEnd {
    Start,
    End,
}

/// Errors from curve construction, validation and snapshot parsing.
#[derive(Debug)]
pub enum GeometryError {
    TooFewNodes { curve_id: u64, n: usize, closed: bool },
    DegenerateSegment { curve_id: u64, j: usize },
    MixedClosedKind { curve_id: u64 },
    OutsideDomain { curve_id: u64, j: usize },
    DetachedEndpoint { curve_id: u64, end: &'static str },
    DuplicateId { curve_id: u64 },
    Snapshot { line: usize, detail: String },
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::TooFewNodes { curve_id, n, closed } => {
                let need = if *closed { 3 } else { 2 };
                write!(f, "curve {curve_id} has {n} nodes, needs at least {need}")
            }
            GeometryError::DegenerateSegment { curve_id, j } => {
                write!(f, "curve {curve_id} has coincident nodes around segment {j}")
            }
            GeometryError::MixedClosedKind { curve_id } => {
                write!(f, "curve {curve_id} mixes the closed kind with an open end kind")
            }
            GeometryError::OutsideDomain { curve_id, j } => {
                write!(f, "curve {curve_id} node {j} lies outside the image domain")
            }
            GeometryError::DetachedEndpoint { curve_id, end } => {
                write!(f, "curve {curve_id} {end} endpoint is not on its declared boundary edge")
            }
            GeometryError::DuplicateId { curve_id } => write!(f, "duplicate curve id {curve_id}"),
            GeometryError::Snapshot { line, detail } => {
                write!(f, "snapshot line {line}: {detail}")
            }
        }
    }
}

impl std::error::Error for GeometryError {}

/// The rectangular image domain `[0, N_x·h] × [0, N_y·h]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
}

impl Domain {
    pub fn of_image(img: &GridImage) -> Domain {
        Domain { nx: img.nx(), ny: img.ny(), h: img.h() }
    }

    pub fn width(&self) -> f64 {
        self.nx as f64 * self.h
    }

    pub fn height(&self) -> f64 {
        self.ny as f64 * self.h
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (0.0..=self.width()).contains(&p.x) && (0.0..=self.height()).contains(&p.y)
    }

    /// The coordinate an endpoint must satisfy exactly on the given edge.
    pub fn on_edge(&self, p: Vec2, edge: BoundaryEdge) -> bool {
        match edge {
            BoundaryEdge::Left => p.x == 0.0,
            BoundaryEdge::Right => p.x == self.width(),
            BoundaryEdge::Bottom => p.y == 0.0,
            BoundaryEdge::Top => p.y == self.height(),
        }
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(p.x.clamp(0.0, self.width()), p.y.clamp(0.0, self.height()))
    }
}

/// A polygonal curve: closed (periodic, no duplicated wrap node) or open with
/// two typed ends.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalCurve {
    pub id: u64,
    pub kind_start: EndpointKind,
    pub kind_end: EndpointKind,
    nodes: Vec<Vec2>,
}

impl PolygonalCurve {
    /// Builds and validates a curve: node-count minimum (3 stored nodes closed,
    /// 2 open), distinct consecutive nodes (including the closing segment), and
    /// consistent endpoint kinds.
    ///
    /// # Errors
    /// See [`GeometryError`]. Domain membership is validated at the network
    /// level, where the domain is known.
    pub fn new(
        id: u64,
        kind_start: EndpointKind,
        kind_end: EndpointKind,
        nodes: Vec<Vec2>,
    ) -> Result<PolygonalCurve, GeometryError> {
        let closed = kind_start == EndpointKind::Closed;
        if closed != (kind_end == EndpointKind::Closed) {
            return Err(GeometryError::MixedClosedKind { curve_id: id });
        }
        let min = if closed { 3 } else { 2 };
        if nodes.len() < min {
            return Err(GeometryError::TooFewNodes { curve_id: id, n: nodes.len(), closed });
        }
        let curve = PolygonalCurve { id, kind_start, kind_end, nodes };
        for j in 1..=curve.n_segments() {
            if curve.spacing(j as isize) == 0.0 {
                return Err(GeometryError::DegenerateSegment { curve_id: id, j });
            }
        }
        Ok(curve)
    }

    pub fn closed(id: u64, nodes: Vec<Vec2>) -> Result<PolygonalCurve, GeometryError> {
        Self::new(id, EndpointKind::Closed, EndpointKind::Closed, nodes)
    }

    pub fn is_closed(&self) -> bool {
        self.kind_start == EndpointKind::Closed
    }

    /// Number of stored nodes.
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of segments: `n_nodes − 1` open, `n_nodes` closed (wrap included).
    pub fn n_segments(&self) -> usize {
        if self.is_closed() {
            self.nodes.len()
        } else {
            self.nodes.len() - 1
        }
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    /// Replaces all node positions, keeping the count.
    ///
    /// # Panics
    /// Panics if the length changes; coincident consecutive nodes are caught in
    /// debug builds (evolution keeps spacings positive, remeshing enforces it).
    pub fn set_nodes(&mut self, nodes: Vec<Vec2>) {
        assert_eq!(nodes.len(), self.nodes.len(), "set_nodes must preserve the node count");
        self.nodes = nodes;
        #[cfg(debug_assertions)]
        for j in 1..=self.n_segments() {
            debug_assert!(self.spacing(j as isize) > 0.0, "coincident nodes after update");
        }
    }

    /// Node `X_j`; periodic for closed curves (any integer `j`), bounds-checked
    /// for open curves.
    ///
    /// # Panics
    /// Panics if an open curve is indexed outside `0..=N`.
    pub fn node_at(&self, j: isize) -> Vec2 {
        let n = self.nodes.len() as isize;
        if self.is_closed() {
            self.nodes[(((j % n) + n) % n) as usize]
        } else {
            assert!((0..n).contains(&j), "node index {j} outside open curve 0..{n}");
            self.nodes[j as usize]
        }
    }

    /// Segment length `h_{j−1/2} = |X_j − X_{j−1}|`.
    pub fn spacing(&self, j: isize) -> f64 {
        self.node_at(j).dist(self.node_at(j - 1))
    }

    /// Unit normal `ν_{j−1/2} = (X_j − X_{j−1})^⊥ / h_{j−1/2}` of the segment
    /// ending at node `j` (anticlockwise rotation).
    ///
    /// # Panics
    /// Panics on a degenerate segment, which validated curves exclude.
    pub fn segment_normal(&self, j: isize) -> Vec2 {
        let d = self.node_at(j) - self.node_at(j - 1);
        let h = d.norm();
        assert!(h > 0.0, "degenerate segment at j = {j}");
        d.perp() / h
    }

    /// Weighted normal `ω_j = (X_{j+1} − X_{j−1})^⊥ / (h_{j−1/2} + h_{j+1/2})`
    /// at node `j`; at the ends of an open curve it falls back to the adjacent
    /// segment normal (`ω_0 = ν_{1/2}`, `ω_N = ν_{N−1/2}`).
    pub fn weighted_normal(&self, j: isize) -> Vec2 {
        if !self.is_closed() {
            let n = self.nodes.len() as isize;
            if j == 0 {
                return self.segment_normal(1);
            }
            if j == n - 1 {
                return self.segment_normal(n - 1);
            }
        }
        let d = self.node_at(j + 1) - self.node_at(j - 1);
        let hsum = self.spacing(j) + self.spacing(j + 1);
        d.perp() / hsum
    }

    /// Unit tangent at an open end, pointing from `X_0` toward `X_1`
    /// (`τ_0 = (X_1 − X_0)/h_{1/2}`) respectively from `X_{N−1}` toward `X_N`.
    ///
    /// # Panics
    /// Panics on a closed curve.
    pub fn endpoint_tangent(&self, end: CurveEnd) -> Vec2 {
        assert!(!self.is_closed(), "closed curves have no endpoint tangents");
        let n = self.nodes.len() as isize;
        let d = match end {
            CurveEnd::Start => self.node_at(1) - self.node_at(0),
            CurveEnd::End => self.node_at(n - 1) - self.node_at(n - 2),
        };
        d / d.norm()
    }

    /// Total polygon length (wrap segment included for closed curves).
    pub fn length(&self) -> f64 {
        (1..=self.n_segments()).map(|j| self.spacing(j as isize)).sum()
    }

    /// Reverses node order; endpoint kinds swap with the ends.
    pub fn reversed(&self) -> PolygonalCurve {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        PolygonalCurve {
            id: self.id,
            kind_start: self.kind_end,
            kind_end: self.kind_start,
            nodes,
        }
    }

    fn validate_in(&self, domain: &Domain) -> Result<(), GeometryError> {
        for (j, &p) in self.nodes.iter().enumerate() {
            if !domain.contains(p) {
                return Err(GeometryError::OutsideDomain { curve_id: self.id, j });
            }
        }
        if let EndpointKind::Boundary(edge) = self.kind_start {
            if !domain.on_edge(self.nodes[0], edge) {
                return Err(GeometryError::DetachedEndpoint { curve_id: self.id, end: "start" });
            }
        }
        if let EndpointKind::Boundary(edge) = self.kind_end {
            if !domain.on_edge(*self.nodes.last().unwrap(), edge) {
                return Err(GeometryError::DetachedEndpoint { curve_id: self.id, end: "end" });
            }
        }
        Ok(())
    }
}

/// Second difference quotient `Δ₂X_j` using OLD spacings and NEW positions:
/// `2/(h_{j−1/2}+h_{j+1/2}) · [(X_{j+1}−X_j)/h_{j+1/2} − (X_j−X_{j−1})/h_{j−1/2}]`.
/// With equal spacing `h` this reduces to `(X_{j−1} − 2X_j + X_{j+1})/h²`.
///
/// `new_nodes` must have the old node count; indexing is periodic when `old`
/// is closed, and `j` must be interior (`1..N`) when it is open.
///
/// # Panics
/// Panics on index misuse or node-count mismatch.
pub fn discrete_laplacian(new_nodes: &[Vec2], old: &PolygonalCurve, j: usize) -> Vec2 {
    assert_eq!(new_nodes.len(), old.n_nodes(), "node count changed under the laplacian");
    let n = new_nodes.len();
    let (jm, jp) = if old.is_closed() {
        ((j + n - 1) % n, (j + 1) % n)
    } else {
        assert!(j >= 1 && j + 1 < n, "open-curve laplacian needs an interior node");
        (j - 1, j + 1)
    };
    let hm = old.spacing(j as isize);
    let hp = old.spacing(j as isize + 1);
    let d = (new_nodes[jp] - new_nodes[j]) / hp - (new_nodes[j] - new_nodes[jm]) / hm;
    d * (2.0 / (hm + hp))
}

/// A set of curves sharing one image domain.
#[derive(Debug, Clone)]
pub struct CurveNetwork {
    pub curves: Vec<PolygonalCurve>,
    pub domain: Domain,
    next_id: u64,
}

impl CurveNetwork {
    /// Builds and validates a network: unique ids, every node inside the
    /// domain, boundary-attached endpoints exactly on their edge.
    ///
    /// # Errors
    /// See [`GeometryError`].
    pub fn new(curves: Vec<PolygonalCurve>, domain: Domain) -> Result<CurveNetwork, GeometryError> {
        let mut ids = BTreeSet::new();
        for c in &curves {
            if !ids.insert(c.id) {
                return Err(GeometryError::DuplicateId { curve_id: c.id });
            }
            c.validate_in(&domain)?;
        }
        let next_id = curves.iter().map(|c| c.id + 1).max().unwrap_or(0);
        Ok(CurveNetwork { curves, domain, next_id })
    }

    /// A fresh id, strictly above every id ever seen in this network.
    pub fn allocate_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    pub fn total_length(&self) -> f64 {
        self.curves.iter().map(|c| c.length()).sum()
    }

    /// Re-runs full validation (used after topology changes).
    ///
    /// # Errors
    /// See [`GeometryError`].
    pub fn validate(&self) -> Result<(), GeometryError> {
        let mut ids = BTreeSet::new();
        for c in &self.curves {
            if !ids.insert(c.id) {
                return Err(GeometryError::DuplicateId { curve_id: c.id });
            }
            let closed = c.is_closed();
            let min = if closed { 3 } else { 2 };
            if c.n_nodes() < min {
                return Err(GeometryError::TooFewNodes { curve_id: c.id, n: c.n_nodes(), closed });
            }
            for j in 1..=c.n_segments() {
                if c.spacing(j as isize) == 0.0 {
                    return Err(GeometryError::DegenerateSegment { curve_id: c.id, j });
                }
            }
            c.validate_in(&self.domain)?;
        }
        Ok(())
    }

    /// Every pixel link crossed by any curve segment. See [`CrossingSets`].
    pub fn gridline_crossings(&self) -> CrossingSets {
        let mut sets = CrossingSets::default();
        for curve in &self.curves {
            for s in 1..=curve.n_segments() {
                let p = curve.node_at(s as isize - 1);
                let q = curve.node_at(s as isize);
                segment_crossings(p, q, &self.domain, &mut sets);
            }
        }
        sets
    }
}

/// Grid links crossed by the curves.
///
/// `horizontal` holds `(i, j)` for the link `[(i−1)h, ih] × {jh}`
/// (`1 ≤ i ≤ N_x`, `0 ≤ j ≤ N_y`); `vertical` holds `(i, j)` for
/// `{ih} × [(j−1)h, jh]` (`0 ≤ i ≤ N_x`, `1 ≤ j ≤ N_y`). Ordered sets keep
/// iteration deterministic. A crossing exactly at a grid node counts for both
/// adjacent links — masking is conservative, never smoothing across an edge.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CrossingSets {
    pub horizontal: BTreeSet<(usize, usize)>,
    pub vertical: BTreeSet<(usize, usize)>,
}

impl CrossingSets {
    pub fn is_empty(&self) -> bool {
        self.horizontal.is_empty() && self.vertical.is_empty()
    }
}

/// Marks every link on the grid line `coord = k·h` hit by the segment `p→q`.
///
/// `axis_coord` extracts the coordinate normal to the family of lines being
/// tested (y for horizontal links) and `along` the one running along them.
fn segment_crossings(p: Vec2, q: Vec2, domain: &Domain, sets: &mut CrossingSets) {
    let h = domain.h;
    // Horizontal links lie on lines y = j·h; crossing position measured in x.
    mark_family(
        (p.y, p.x),
        (q.y, q.x),
        h,
        domain.ny,
        domain.nx,
        &mut |j, i| {
            sets.horizontal.insert((i, j));
        },
    );
    // Vertical links lie on lines x = i·h; crossing position measured in y.
    mark_family(
        (p.x, p.y),
        (q.x, q.y),
        h,
        domain.nx,
        domain.ny,
        &mut |i, j| {
            sets.vertical.insert((i, j));
        },
    );
}

/// Shared crossing logic for one family of grid lines. Points are given as
/// `(normal coordinate, along coordinate)`; `n_lines` is the largest line
/// index and `n_links` the largest link index along a line. `mark(line, link)`
/// records a hit.
fn mark_family(
    p: (f64, f64),
    q: (f64, f64),
    h: f64,
    n_lines: usize,
    n_links: usize,
    mark: &mut impl FnMut(usize, usize),
) {
    let (pn, pa) = p;
    let (qn, qa) = q;
    let lo = pn.min(qn);
    let hi = pn.max(qn);
    let k_lo = (lo / h).ceil() as usize;
    let k_hi = ((hi / h).floor() as usize).min(n_lines);

    if pn == qn {
        // Collinear with a grid line: every link the along-extent [a_lo, a_hi]
        // touches is crossed (inclusive — link i covers [(i−1)h, ih]).
        let s = pn / h;
        if s == s.floor() && (s as usize) <= n_lines {
            let k = s as usize;
            let a_lo = pa.min(qa);
            let a_hi = pa.max(qa);
            let i_min = ((a_lo / h).ceil() as usize).max(1);
            let i_max = (((a_hi / h) + 1.0).floor() as usize).min(n_links);
            for i in i_min..=i_max {
                mark(k, i);
            }
        }
        return;
    }

    if k_lo > k_hi {
        return;
    }
    for k in k_lo..=k_hi {
        let line = k as f64 * h;
        let t = (line - pn) / (qn - pn);
        if !(0.0..=1.0).contains(&t) {
            continue;
        }
        let a = pa + t * (qa - pa);
        let s = a / h;
        let nearest = s.round();
        if s == nearest {
            // Exactly on a grid node: both adjacent links are crossed.
            let i = nearest as usize;
            if (1..=n_links).contains(&i) {
                mark(k, i);
            }
            if i + 1 <= n_links {
                mark(k, i + 1);
            }
        } else {
            let i = s.floor() as usize + 1;
            if (1..=n_links).contains(&i) {
                mark(k, i);
            }
        }
    }
}

/// Splits segments longer than `h_max` and merges away nodes surrounded by
/// short segments, keeping endpoints fixed. Iterates to a fixed point.
///
/// Guarantees on the output: no segment exceeds `h_max`; no two *adjacent*
/// segments are both shorter than `h_min` (an isolated short segment between
/// long neighbors is left alone — removing its nodes would move the curve by
/// more than the merge tolerance); endpoints of open curves are untouched;
/// closed curves keep at least 3 nodes, open curves at least 2.
///
/// Node removal drops an interior node whose two adjacent segments are both
/// shorter than `h_min`, provided the merged chord stays within `h_max` and
/// positive. Next to an open end, where the endpoint itself may never move,
/// the rule instead drops the endpoint's interior neighbor when the end
/// segment is shorter than `h_min` and the merged chord is admissible.
///
/// # Panics
/// Panics unless `0 < h_min < h_max`. With `h_max ≥ 2·h_min` (the configured
/// band always has ratio 3) midpoint splits can never create short segments.
pub fn remesh(curve: &PolygonalCurve, h_min: f64, h_max: f64) -> PolygonalCurve {
    assert!(h_min > 0.0 && h_min < h_max, "remesh band must satisfy 0 < h_min < h_max");
    let closed = curve.is_closed();
    let mut nodes: Vec<Vec2> = curve.nodes().to_vec();

    loop {
        let mut changed = false;

        // Split pass: insert midpoints into over-long segments.
        let mut split: Vec<Vec2> = Vec::with_capacity(nodes.len());
        let n = nodes.len();
        let seg_count = if closed { n } else { n - 1 };
        for s in 0..n {
            split.push(nodes[s]);
            if s < seg_count {
                let next = nodes[(s + 1) % n];
                if nodes[s].dist(next) > h_max {
                    split.push(nodes[s].midpoint(next));
                    changed = true;
                }
            }
        }
        nodes = split;

        // Merge pass, in increasing node order. A node goes only while both of
        // its original neighbors are still present (removing one node disables
        // its neighbors for the rest of the pass), so every decision is made on
        // real current spacings; the outer loop rescans until stable.
        let n = nodes.len();
        let min_nodes = if closed { 3 } else { 2 };
        let mut keep = vec![true; n];
        let mut kept = n;
        for j in 0..n {
            if kept <= min_nodes {
                break;
            }
            if !closed && (j == 0 || j == n - 1) {
                continue;
            }
            let jm = (j + n - 1) % n;
            let jp = (j + 1) % n;
            if !keep[jm] || !keep[jp] {
                continue;
            }
            let h_prev = nodes[j].dist(nodes[jm]);
            let h_next = nodes[j].dist(nodes[jp]);
            let chord = nodes[jm].dist(nodes[jp]);
            let both_short = h_prev < h_min && h_next < h_min;
            // Endpoint-neighbor rule: the node next to an open end goes when
            // its end segment collapses (the endpoint itself may never move).
            let end_neighbor =
                !closed && ((j == 1 && h_prev < h_min) || (j == n - 2 && h_next < h_min));
            if (both_short || end_neighbor) && chord <= h_max && chord > 0.0 {
                keep[j] = false;
                kept -= 1;
                changed = true;
            }
        }
        if kept < n {
            let mut k = 0;
            nodes.retain(|_| {
                let keep_it = keep[k];
                k += 1;
                keep_it
            });
        }

        if !changed {
            break;
        }
    }

    PolygonalCurve {
        id: curve.id,
        kind_start: curve.kind_start,
        kind_end: curve.kind_end,
        nodes,
    }
}

/// Serializes a network in the snapshot format: per curve a header line
/// `curve <id> <kind_start> <kind_end> <count>` followed by `count` lines
/// `x y` (shortest round-trip decimal). Closed curves list their stored nodes
/// without repeating the first one.
pub fn write_snapshot(network: &CurveNetwork) -> String {
    let mut out = String::new();
    for c in &network.curves {
        out.push_str(&format!(
            "curve {} {} {} {}\n",
            c.id,
            c.kind_start.token(),
            c.kind_end.token(),
            c.n_nodes()
        ));
        for p in c.nodes() {
            out.push_str(&format!("{} {}\n", p.x, p.y));
        }
    }
    out
}

/// Parses the snapshot format produced by [`write_snapshot`] and validates the
/// result against `domain`. Blank lines and `#` comment lines are skipped.
///
/// # Errors
/// [`GeometryError::Snapshot`] with a 1-based line number on malformed input;
/// validation errors as in [`CurveNetwork::new`].
pub fn parse_snapshot(text: &str, domain: Domain) -> Result<CurveNetwork, GeometryError> {
    let mut curves = Vec::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    });

    while let Some((ln, line)) = lines.next() {
        let snap_err = |detail: String| GeometryError::Snapshot { line: ln + 1, detail };
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 5 || parts[0] != "curve" {
            return Err(snap_err(format!("expected `curve <id> <start> <end> <count>`, got `{line}`")));
        }
        let id: u64 = parts[1].parse().map_err(|_| snap_err(format!("bad curve id `{}`", parts[1])))?;
        let ks = EndpointKind::from_token(parts[2])
            .ok_or_else(|| snap_err(format!("unknown endpoint kind `{}`", parts[2])))?;
        let ke = EndpointKind::from_token(parts[3])
            .ok_or_else(|| snap_err(format!("unknown endpoint kind `{}`", parts[3])))?;
        let count: usize =
            parts[4].parse().map_err(|_| snap_err(format!("bad node count `{}`", parts[4])))?;

        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            let (ln2, nl) = lines.next().ok_or_else(|| GeometryError::Snapshot {
                line: ln + 1,
                detail: format!("curve {id} promises {count} nodes but the file ends early"),
            })?;
            let nerr = |detail: String| GeometryError::Snapshot { line: ln2 + 1, detail };
            let mut it = nl.split_whitespace();
            let x: f64 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| nerr(format!("bad node line `{nl}`")))?;
            let y: f64 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| nerr(format!("bad node line `{nl}`")))?;
            if it.next().is_some() {
                return Err(nerr(format!("trailing tokens on node line `{nl}`")));
            }
            nodes.push(Vec2::new(x, y));
        }
        curves.push(PolygonalCurve::new(id, ks, ke, nodes)?);
    }
    CurveNetwork::new(curves, domain)
}
