//! Exact distance, geodesic, antipode and antipodal-distance computations on
//! spherical graphs and discrete π-sets.
//!
//! Restricted to an edge, the distance from a fixed source is the lower
//! envelope of at most three lines, so every maximisation and level-set
//! computation here is done at envelope crossings and endpoints.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DistanceField, GraphPoint, Heading, MetricMode, SphericalGraph, UserPoint, TAU};
use crate::pl::{self, Line};

/// Threshold slack used when solving `d >= π` for antipodes.
const ANTIPODE_SLACK: f64 = 1e-12;
/// Antipodal intervals narrower than this collapse to a single point.
const COLLAPSE_WIDTH: f64 = 1e-9;
/// Initial probing cell width for [`pl::trace`] searches on edges.
pub(crate) const TRACE_CELL: f64 = 0.25;

/// Distance between two graph points, optionally π-truncated.
pub fn distance(graph: &SphericalGraph, x: &GraphPoint, y: &GraphPoint, truncated: bool) -> Result<f64> {
    graph.check_point(x)?;
    graph.check_point(y)?;
    let d = graph.intrinsic_distance(x, y);
    Ok(if truncated { d.min(PI) } else { d })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Traversal {
    pub edge: usize,
    pub from: f64,
    pub to: f64,
}

impl Traversal {
    pub fn len(&self) -> f64 {
        (self.to - self.from).abs()
    }

    pub fn heading(&self) -> Heading {
        Heading { edge: self.edge, forward: self.to > self.from }
    }
}

/// A locally shortest path, stored as the edge traversals it makes.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    pub start: GraphPoint,
    pub end: GraphPoint,
    pub steps: Vec<Traversal>,
    pub length: f64,
}

impl GeodesicPath {
    fn new(start: GraphPoint, end: GraphPoint, steps: Vec<Traversal>) -> Self {
        let length = steps.iter().map(Traversal::len).sum();
        Self { start, end, steps, length }
    }

    pub fn initial_heading(&self) -> Option<Heading> {
        self.steps.iter().find(|s| s.len() > 0.0).map(Traversal::heading)
    }

    /// Point at arclength `s` from the start (clamped to the path).
    pub fn point_at(&self, graph: &SphericalGraph, s: f64) -> GraphPoint {
        let mut left = s.max(0.0);
        for step in &self.steps {
            let l = step.len();
            if left <= l {
                let off = if step.to > step.from { step.from + left } else { step.from - left };
                return graph.snap(step.edge, off);
            }
            left -= l;
        }
        self.end
    }

    /// Vertices crossed strictly inside the path, with their arclength.
    pub fn interior_vertices(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut acc = 0.0;
        for step in &self.steps[..self.steps.len().saturating_sub(1)] {
            acc += step.len();
            out.push(acc);
        }
        out
    }
}

fn start_offset(graph: &SphericalGraph, p: &GraphPoint, h: Heading) -> f64 {
    match *p {
        GraphPoint::Edge { offset, .. } => offset,
        GraphPoint::Vertex(_) => {
            if h.forward {
                0.0
            } else {
                graph.edge(h.edge).len
            }
        }
    }
}

/// All locally shortest paths from `x` to `y` of length at most `max_len`,
/// sorted by length then by their initial heading.
pub fn geodesics(graph: &SphericalGraph, x: &GraphPoint, y: &GraphPoint, max_len: f64) -> Result<Vec<GeodesicPath>> {
    graph.check_point(x)?;
    graph.check_point(y)?;
    if max_len > 2.0 * PI + TAU {
        return Err(Error::InvalidArgument(format!("max_len {max_len} exceeds 2π")));
    }
    let limit = max_len + TAU;
    let mut out = Vec::new();
    if same_point(x, y) {
        out.push(GeodesicPath::new(*x, *y, Vec::new()));
    }
    let mut steps = Vec::new();
    for h in graph.headings(x) {
        walk(graph, y, start_offset(graph, x, h), h, 0.0, limit, &mut steps, x, &mut out);
    }
    out.sort_by(|a, b| {
        a.length
            .total_cmp(&b.length)
            .then_with(|| a.initial_heading().cmp(&b.initial_heading()))
    });
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn walk(
    graph: &SphericalGraph,
    y: &GraphPoint,
    from: f64,
    h: Heading,
    len: f64,
    limit: f64,
    steps: &mut Vec<Traversal>,
    x: &GraphPoint,
    out: &mut Vec<GeodesicPath>,
) {
    let e = *graph.edge(h.edge);
    let to = if h.forward { e.len } else { 0.0 };
    if let GraphPoint::Edge { edge, offset } = *y {
        let ahead = if h.forward { offset > from } else { offset < from };
        if edge == h.edge && ahead && len + (offset - from).abs() <= limit {
            let mut path = steps.clone();
            path.push(Traversal { edge, from, to: offset });
            out.push(GeodesicPath::new(*x, *y, path));
        }
    }
    let reach = len + (to - from).abs();
    if reach > limit {
        return;
    }
    let w = if h.forward { e.b } else { e.a };
    steps.push(Traversal { edge: h.edge, from, to });
    if *y == GraphPoint::Vertex(w) {
        out.push(GeodesicPath::new(*x, *y, steps.clone()));
    }
    let back = h.reversed();
    for &next in graph.headings_at_vertex(w) {
        if next == back {
            continue;
        }
        let off = if next.forward { 0.0 } else { graph.edge(next.edge).len };
        walk(graph, y, off, next, reach, limit, steps, x, out);
    }
    steps.pop();
}

fn same_point(x: &GraphPoint, y: &GraphPoint) -> bool {
    match (*x, *y) {
        (GraphPoint::Vertex(a), GraphPoint::Vertex(b)) => a == b,
        (GraphPoint::Edge { edge: a, offset: s }, GraphPoint::Edge { edge: b, offset: t }) => a == b && s == t,
        _ => false,
    }
}

/// One shortest path, read off the shortest-path tree. Ties are broken
/// towards the direct route, then the lower-offset end of the final edge.
pub fn shortest_path(graph: &SphericalGraph, x: &GraphPoint, y: &GraphPoint) -> GeodesicPath {
    let field = graph.distance_field(x);
    shortest_path_in(graph, &field, y)
}

pub(crate) fn shortest_path_in(graph: &SphericalGraph, field: &DistanceField, y: &GraphPoint) -> GeodesicPath {
    let x = field.source;
    let steps = match *y {
        GraphPoint::Vertex(v) => backtrack(graph, field, v),
        GraphPoint::Edge { edge, offset } => {
            let e = *graph.edge(edge);
            let via_a = field.dist[e.a] + offset;
            let via_b = field.dist[e.b] + e.len - offset;
            let direct = match x {
                GraphPoint::Edge { edge: se, offset: so } if se == edge => Some((offset - so).abs()),
                _ => None,
            };
            match direct {
                Some(d) if d <= via_a && d <= via_b => match x {
                    GraphPoint::Edge { offset: so, .. } => vec![Traversal { edge, from: so, to: offset }],
                    GraphPoint::Vertex(_) => unreachable!(),
                },
                _ if via_a <= via_b => {
                    let mut s = backtrack(graph, field, e.a);
                    s.push(Traversal { edge, from: 0.0, to: offset });
                    s
                }
                _ => {
                    let mut s = backtrack(graph, field, e.b);
                    s.push(Traversal { edge, from: e.len, to: offset });
                    s
                }
            }
        }
    };
    GeodesicPath::new(x, *y, steps)
}

fn backtrack(graph: &SphericalGraph, field: &DistanceField, mut v: usize) -> Vec<Traversal> {
    use crate::model::Pred;
    let mut rev = Vec::new();
    loop {
        match field.pred[v] {
            Pred::Source | Pred::None => break,
            Pred::Start(h) => {
                let from = match field.source {
                    GraphPoint::Edge { offset, .. } => offset,
                    GraphPoint::Vertex(_) => unreachable!(),
                };
                let e = graph.edge(h.edge);
                rev.push(Traversal { edge: h.edge, from, to: if h.forward { e.len } else { 0.0 } });
                break;
            }
            Pred::Via { from, heading } => {
                let e = graph.edge(heading.edge);
                let (a, b) = if heading.forward { (0.0, e.len) } else { (e.len, 0.0) };
                rev.push(Traversal { edge: heading.edge, from: a, to: b });
                v = from;
            }
        }
    }
    rev.reverse();
    rev
}

/// Extends a path by `extra` beyond its end, continuing straight through
/// edges and taking the lowest-id heading at vertices.
pub fn extend(graph: &SphericalGraph, path: &GeodesicPath, extra: f64) -> Result<GeodesicPath> {
    let mut heading = path
        .steps
        .iter()
        .rev()
        .find(|s| s.len() > 0.0)
        .map(Traversal::heading)
        .ok_or_else(|| Error::InvalidArgument("cannot extend a constant path".into()))?;
    let mut steps = path.steps.clone();
    let mut at = steps.last().map(|s| s.to).unwrap_or(0.0);
    let mut left = extra;
    // Resume from the end point; if it is a vertex, pick the continuation.
    let mut pos = path.end;
    while left > 0.0 {
        if let GraphPoint::Vertex(w) = pos {
            let back = heading.reversed();
            heading = *graph
                .headings_at_vertex(w)
                .iter()
                .find(|&&h| h != back)
                .ok_or_else(|| Error::Internal(format!("vertex {w} has no continuation")))?;
            at = if heading.forward { 0.0 } else { graph.edge(heading.edge).len };
        }
        let e = *graph.edge(heading.edge);
        let room = if heading.forward { e.len - at } else { at };
        let step = left.min(room);
        let to = if heading.forward { at + step } else { at - step };
        steps.push(Traversal { edge: heading.edge, from: at, to });
        left -= step;
        pos = graph.snap(heading.edge, to);
        at = to;
    }
    Ok(GeodesicPath::new(path.start, pos, steps))
}

/// A piece of an antipode set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AntipodePiece {
    Point(GraphPoint),
    Segment { edge: usize, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AntipodeSet {
    pub pieces: Vec<AntipodePiece>,
}

/// User-facing antipode piece, merged across internal subdivisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum UserAntipodePiece {
    Point { point: UserPoint },
    Segment { edge: usize, lo: f64, hi: f64 },
}

impl AntipodeSet {
    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn to_user(&self, graph: &SphericalGraph) -> Vec<UserAntipodePiece> {
        let mut segs: Vec<(usize, f64, f64)> = Vec::new();
        let mut points = Vec::new();
        for piece in &self.pieces {
            match *piece {
                AntipodePiece::Point(p) => points.push(graph.to_user(&p)),
                AntipodePiece::Segment { edge, lo, hi } => {
                    let (a, b) = (graph.to_user(&graph.snap(edge, lo)), graph.to_user(&graph.snap(edge, hi)));
                    let ue = match (a, b) {
                        (UserPoint::Edge { edge, .. }, _) | (_, UserPoint::Edge { edge, .. }) => edge,
                        _ => unreachable!("segment with both ends at described vertices is a whole edge"),
                    };
                    let off = |p: UserPoint, at_start: bool| match p {
                        UserPoint::Edge { offset, .. } => offset,
                        UserPoint::Vertex { .. } => {
                            if at_start {
                                0.0
                            } else {
                                graph.user_edges().nth(ue).map(|e| e.2).unwrap_or(0.0)
                            }
                        }
                    };
                    segs.push((ue, off(a, true), off(b, false)));
                }
            }
        }
        segs.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
        let mut merged: Vec<(usize, f64, f64)> = Vec::new();
        for s in segs {
            match merged.last_mut() {
                Some(m) if m.0 == s.0 && s.1 <= m.2 + 1e-12 => m.2 = m.2.max(s.2),
                _ => merged.push(s),
            }
        }
        let mut out: Vec<_> = merged.into_iter().map(|(edge, lo, hi)| UserAntipodePiece::Segment { edge, lo, hi }).collect();
        out.extend(points.into_iter().map(|point| UserAntipodePiece::Point { point }));
        out
    }

    /// Every point of the set, with segments sampled at `per_segment` points.
    pub fn sample(&self, graph: &SphericalGraph, per_segment: usize) -> Vec<GraphPoint> {
        let mut out = Vec::new();
        for piece in &self.pieces {
            match *piece {
                AntipodePiece::Point(p) => out.push(p),
                AntipodePiece::Segment { edge, lo, hi } => {
                    let n = per_segment.max(2);
                    for i in 0..n {
                        out.push(graph.snap(edge, lo + (hi - lo) * i as f64 / (n - 1) as f64));
                    }
                }
            }
        }
        out
    }
}

/// Distance data about one source reused across many antipodal-distance
/// evaluations.
#[derive(Debug, Clone)]
pub struct PreparedSource {
    pub field: DistanceField,
    pub antipodes: AntipodeSet,
}

impl PreparedSource {
    pub fn new(graph: &SphericalGraph, xi: &GraphPoint) -> Result<Self> {
        let field = graph.distance_field(xi);
        let antipodes = antipodes_from_field(graph, &field)?;
        Ok(Self { field, antipodes })
    }
}

pub fn antipode_set(graph: &SphericalGraph, xi: &GraphPoint) -> Result<AntipodeSet> {
    graph.check_point(xi)?;
    antipodes_from_field(graph, &graph.distance_field(xi))
}

fn antipodes_from_field(graph: &SphericalGraph, field: &DistanceField) -> Result<AntipodeSet> {
    let level = PI - ANTIPODE_SLACK;
    let mut pieces = Vec::new();
    let mut vertex_points: Vec<usize> = Vec::new();
    for edge in 0..graph.edges().len() {
        let ef = field.on_edge(graph, edge);
        for (lo, hi, lines) in ef.pieces() {
            let Some((a, b)) = pl::envelope_superlevel(lines, level, lo, hi) else {
                continue;
            };
            if b - a < COLLAPSE_WIDTH {
                // collapse onto the envelope maximum inside [a, b]
                let mut cands = Vec::new();
                pl::crossing_candidates(lines, a, b, &mut cands);
                let t = cands
                    .into_iter()
                    .max_by(|s, t| pl::envelope(lines, *s).total_cmp(&pl::envelope(lines, *t)))
                    .unwrap_or(a);
                match graph.snap(edge, t) {
                    GraphPoint::Vertex(v) => vertex_points.push(v),
                    p => pieces.push(AntipodePiece::Point(p)),
                }
            } else {
                pieces.push(AntipodePiece::Segment { edge, lo: a, hi: b });
            }
        }
    }
    vertex_points.sort_unstable();
    vertex_points.dedup();
    for v in vertex_points {
        let covered = pieces.iter().any(|p| match *p {
            AntipodePiece::Segment { edge, lo, hi } => {
                let e = graph.edge(edge);
                (e.a == v && lo <= SNAP_END) || (e.b == v && hi >= e.len - SNAP_END)
            }
            AntipodePiece::Point(_) => false,
        });
        if !covered {
            pieces.push(AntipodePiece::Point(GraphPoint::Vertex(v)));
        }
    }
    if pieces.is_empty() {
        return Err(Error::Internal(format!(
            "no antipode of {:?}; the space is not geodesically complete",
            graph.to_user(&field.source)
        )));
    }
    Ok(AntipodeSet { pieces })
}

const SNAP_END: f64 = 1e-12;

/// Both evaluations of the antipodal distance and their disagreement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AntipodalDistance {
    /// Farthest truncated distance from `η` to an antipode of `ξ`.
    pub value: f64,
    /// `sup_x d̄(ξ,x) + d̄(η,x) − π`.
    pub sup_value: f64,
    pub method_gap: f64,
}

pub fn antipodal_distance(graph: &SphericalGraph, xi: &GraphPoint, eta: &GraphPoint) -> Result<AntipodalDistance> {
    if graph.mode() != MetricMode::PiTruncated {
        return Err(Error::InvalidArgument("antipodal distance needs the pi_truncated metric".into()));
    }
    graph.check_point(xi)?;
    graph.check_point(eta)?;
    let prep = PreparedSource::new(graph, xi)?;
    let eta_field = graph.distance_field(eta);
    let value = antipodal_value(graph, &prep, &eta_field);
    let sup_value = sup_formula(graph, &prep.field, &eta_field);
    Ok(AntipodalDistance { value, sup_value, method_gap: (value - sup_value).abs() })
}

/// Max over the antipodes of `ξ` of the truncated distance to the source of
/// `eta_field`.
pub fn antipodal_value(graph: &SphericalGraph, xi: &PreparedSource, eta_field: &DistanceField) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut cands = Vec::with_capacity(16);
    for piece in &xi.antipodes.pieces {
        match *piece {
            AntipodePiece::Point(p) => best = best.max(eta_field.at(graph, &p)),
            AntipodePiece::Segment { edge, lo, hi } => {
                let ef = eta_field.on_edge(graph, edge);
                for (plo, phi, lines) in ef.pieces() {
                    let (a, b) = (lo.max(plo), hi.min(phi));
                    if a > b {
                        continue;
                    }
                    cands.clear();
                    pl::crossing_candidates(lines, a, b, &mut cands);
                    for &t in &cands {
                        best = best.max(pl::envelope(lines, t));
                    }
                }
            }
        }
        if best >= PI {
            break;
        }
    }
    best.min(PI)
}

fn sup_formula(graph: &SphericalGraph, a: &DistanceField, b: &DistanceField) -> f64 {
    let cap = Line::constant(PI);
    let mut best = f64::NEG_INFINITY;
    let mut cands = Vec::with_capacity(32);
    let mut lines: Vec<Line> = Vec::with_capacity(8);
    for edge in 0..graph.edges().len() {
        let fa = a.on_edge(graph, edge);
        let fb = b.on_edge(graph, edge);
        for (alo, ahi, la) in fa.pieces() {
            for (blo, bhi, lb) in fb.pieces() {
                let (lo, hi) = (alo.max(blo), ahi.min(bhi));
                if lo > hi {
                    continue;
                }
                lines.clear();
                lines.extend_from_slice(la);
                lines.extend_from_slice(lb);
                lines.push(cap);
                cands.clear();
                pl::crossing_candidates(&lines, lo, hi, &mut cands);
                for &t in &cands {
                    let v = pl::envelope(la, t).min(PI) + pl::envelope(lb, t).min(PI) - PI;
                    best = best.max(v);
                }
            }
        }
    }
    best
}

/// Finite set of points at pairwise distance π (a 0-dimensional model).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePiSet {
    /// Graph headings realising the points when the set is a space of
    /// directions of a graph.
    pub headings: Vec<Heading>,
}

impl DiscretePiSet {
    pub fn with_size(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("a discrete π-set needs at least two points".into()));
        }
        Ok(Self { headings: (0..n).map(|edge| Heading { edge, forward: true }).collect() })
    }

    pub fn len(&self) -> usize {
        self.headings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.headings.is_empty()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        if a == b {
            0.0
        } else {
            PI
        }
    }

    /// `sup` over the other points of their distance to `eta`.
    pub fn antipodal_distance(&self, xi: usize, eta: usize) -> f64 {
        (0..self.len()).filter(|&z| z != xi).map(|z| self.distance(z, eta)).fold(0.0, f64::max)
    }
}

/// Space of directions of a graph at `x`: one point per heading.
pub fn direction_space_graph(graph: &SphericalGraph, x: &GraphPoint) -> Result<DiscretePiSet> {
    graph.check_point(x)?;
    let headings = graph.headings(x);
    if headings.len() < 2 {
        return Err(Error::Validation(format!("{:?} has fewer than two directions", graph.to_user(x))));
    }
    Ok(DiscretePiSet { headings })
}

/// Indices (into [`direction_space_graph`]) of the initial directions of all
/// shortest paths from `x` to `xi`.
pub fn direction_of(graph: &SphericalGraph, x: &GraphPoint, xi: &GraphPoint) -> Result<Vec<usize>> {
    let space = direction_space_graph(graph, x)?;
    graph.check_point(xi)?;
    if same_point(x, xi) {
        return Err(Error::InvalidArgument("direction to the point itself is undefined".into()));
    }
    let d = graph.intrinsic_distance(x, xi);
    let mut out: Vec<usize> = geodesics(graph, x, xi, d.min(2.0 * PI))?
        .into_iter()
        .filter(|p| p.length <= d + TAU)
        .filter_map(|p| p.initial_heading())
        .filter_map(|h| space.headings.iter().position(|&s| s == h))
        .collect();
    out.sort_unstable();
    out.dedup();
    if out.is_empty() {
        return Err(Error::Internal("no shortest path found".into()));
    }
    Ok(out)
}

/// A compact CAT(1) model with the π-truncated metric, on which the
/// noncriticality machinery operates.
pub trait PiSpace: Sync {
    type Point: Clone + Copy + std::fmt::Debug + PartialEq + Send + Sync;

    fn truncated_distance(&self, a: &Self::Point, b: &Self::Point) -> f64;
    fn antipodal(&self, a: &Self::Point, b: &Self::Point) -> Result<f64>;
    /// 0 for finite sets, 1 for graphs.
    fn dimension(&self) -> usize;
    fn contains(&self, p: &Self::Point) -> Result<()>;
    /// Global maximiser; ties keep the lexicographically smallest point.
    fn maximize(&self, f: &(dyn Fn(&Self::Point) -> f64 + Sync)) -> (Self::Point, f64);
    /// `{v : d̄(center, v) = level}`.
    fn distance_level_set(&self, center: &Self::Point, level: f64) -> Vec<Self::Point>;
}

impl PiSpace for SphericalGraph {
    type Point = GraphPoint;

    fn truncated_distance(&self, a: &GraphPoint, b: &GraphPoint) -> f64 {
        self.intrinsic_distance(a, b).min(PI)
    }

    fn antipodal(&self, a: &GraphPoint, b: &GraphPoint) -> Result<f64> {
        if self.mode() != MetricMode::PiTruncated {
            return Err(Error::InvalidArgument("antipodal distance needs the pi_truncated metric".into()));
        }
        let prep = PreparedSource::new(self, a)?;
        Ok(antipodal_value(self, &prep, &self.distance_field(b)))
    }

    fn dimension(&self) -> usize {
        1
    }

    fn contains(&self, p: &GraphPoint) -> Result<()> {
        self.check_point(p)
    }

    fn maximize(&self, f: &(dyn Fn(&GraphPoint) -> f64 + Sync)) -> (GraphPoint, f64) {
        maximize_on_graph(self, f)
    }

    fn distance_level_set(&self, center: &GraphPoint, level: f64) -> Vec<GraphPoint> {
        level_set(self, &self.distance_field(center), level)
    }
}

pub(crate) fn maximize_on_graph(graph: &SphericalGraph, f: &dyn Fn(&GraphPoint) -> f64) -> (GraphPoint, f64) {
    let mut best = (GraphPoint::Vertex(0), f64::NEG_INFINITY);
    for v in 0..graph.vertex_count() {
        let val = f(&GraphPoint::Vertex(v));
        if val > best.1 + 1e-12 {
            best = (GraphPoint::Vertex(v), val);
        }
    }
    for (edge, e) in graph.edges().iter().enumerate() {
        let verts = pl::trace(|t| f(&graph.snap(edge, t)), 0.0, e.len, TRACE_CELL);
        let (t, val) = pl::argmax(&verts);
        if val > best.1 + 1e-12 {
            best = (graph.snap(edge, t), val);
        }
    }
    best
}

/// Points at truncated distance exactly `level` from the field's source.
pub fn level_set(graph: &SphericalGraph, field: &DistanceField, level: f64) -> Vec<GraphPoint> {
    let mut out: Vec<GraphPoint> = Vec::new();
    for edge in 0..graph.edges().len() {
        let ef = field.on_edge(graph, edge);
        for (lo, hi, lines) in ef.pieces() {
            for l in lines {
                if let Some(t) = l.root(level) {
                    if t >= lo - 1e-15 && t <= hi + 1e-15 {
                        let t = t.clamp(lo, hi);
                        if (ef.eval(t).min(PI) - level).abs() <= 1e-12 {
                            let p = graph.snap(edge, t);
                            if !out.iter().any(|q| same_point(q, &p)) {
                                out.push(p);
                            }
                        }
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| a.cmp_key(b));
    out
}

impl PiSpace for DiscretePiSet {
    type Point = usize;

    fn truncated_distance(&self, a: &usize, b: &usize) -> f64 {
        self.distance(*a, *b)
    }

    fn antipodal(&self, a: &usize, b: &usize) -> Result<f64> {
        Ok(self.antipodal_distance(*a, *b))
    }

    fn dimension(&self) -> usize {
        0
    }

    fn contains(&self, p: &usize) -> Result<()> {
        if *p < self.len() {
            Ok(())
        } else {
            Err(Error::InvalidPoint(format!("no point {p} in a {}-point set", self.len())))
        }
    }

    fn maximize(&self, f: &(dyn Fn(&usize) -> f64 + Sync)) -> (usize, f64) {
        let mut best = (0, f(&0));
        for p in 1..self.len() {
            let v = f(&p);
            if v > best.1 + 1e-12 {
                best = (p, v);
            }
        }
        best
    }

    fn distance_level_set(&self, center: &usize, level: f64) -> Vec<usize> {
        (0..self.len()).filter(|p| (self.distance(*center, *p) - level).abs() <= 1e-12).collect()
    }
}

/// Point reached by walking `len` from `x` along `heading`, continuing
/// through vertices on the lowest-id heading that does not turn back.
pub fn travel(graph: &SphericalGraph, x: &GraphPoint, heading: Heading, len: f64) -> GraphPoint {
    let mut heading = heading;
    let mut at = start_offset(graph, x, heading);
    let mut left = len.max(0.0);
    let mut pos = *x;
    let mut first = true;
    while left > 0.0 {
        if let (GraphPoint::Vertex(w), false) = (pos, first) {
            let back = heading.reversed();
            match graph.headings_at_vertex(w).iter().find(|&&h| h != back) {
                Some(&h) => heading = h,
                None => return pos,
            }
            at = if heading.forward { 0.0 } else { graph.edge(heading.edge).len };
        }
        first = false;
        let e = *graph.edge(heading.edge);
        let room = if heading.forward { e.len - at } else { at };
        let step = left.min(room);
        at = if heading.forward { at + step } else { at - step };
        left -= step;
        pos = graph.snap(heading.edge, at);
    }
    pos
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UserPoint;

    fn at(g: &SphericalGraph, edge: usize, offset: f64) -> GraphPoint {
        g.from_user(&UserPoint::Edge { edge, offset }).unwrap()
    }

    fn mid(g: &SphericalGraph, arc: usize) -> GraphPoint {
        at(g, arc, PI / 2.0)
    }

    #[test]
    fn distances() {
        let c = SphericalGraph::circle(2.0 * PI + 0.5).unwrap();
        let d = distance(&c, &at(&c, 0, 0.0), &at(&c, 0, 4.0), true).unwrap();
        assert!((d - 2.7832).abs() < 1e-4);
        let s = SphericalGraph::suspension(3).unwrap();
        assert!((distance(&s, &GraphPoint::Vertex(0), &mid(&s, 1), true).unwrap() - PI / 2.0).abs() < 1e-12);
        assert!((distance(&s, &mid(&s, 1), &mid(&s, 2), true).unwrap() - PI).abs() < 1e-12);
        let far = distance(&c, &at(&c, 0, 0.0), &at(&c, 0, 3.3), false).unwrap();
        assert!((far - 3.3).abs() < 1e-12);
        assert_eq!(distance(&c, &at(&c, 0, 0.0), &at(&c, 0, 3.3), true).unwrap(), PI);
        assert!(distance(&c, &GraphPoint::Vertex(7), &GraphPoint::Vertex(0), true).is_err());
    }

    #[test]
    fn geodesic_enumeration() {
        let c = SphericalGraph::circle(2.0 * PI).unwrap();
        let paths = geodesics(&c, &at(&c, 0, 0.3), &at(&c, 0, 0.3 + PI), PI).unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths.iter().all(|p| (p.length - PI).abs() < 1e-12));
        let s = SphericalGraph::suspension(3).unwrap();
        let paths = geodesics(&s, &mid(&s, 1), &mid(&s, 2), PI).unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths.iter().all(|p| (p.length - PI).abs() < 1e-12));
        let w = SphericalGraph::circle(2.0 * PI + 0.5).unwrap();
        let paths = geodesics(&w, &at(&w, 0, 0.0), &at(&w, 0, 2.8), PI).unwrap();
        assert_eq!(paths.len(), 1);
        assert!((paths[0].length - 2.8).abs() < 1e-12);
        for p in &paths {
            let total: f64 = p.steps.iter().map(Traversal::len).sum();
            assert!((total - p.length).abs() < 1e-12);
        }
    }

    #[test]
    fn extension_is_deterministic() {
        let s = SphericalGraph::suspension(3).unwrap();
        let path = shortest_path(&s, &mid(&s, 1), &GraphPoint::Vertex(0));
        let ext = extend(&s, &path, 1.0).unwrap();
        assert!((ext.length - (PI / 2.0 + 1.0)).abs() < 1e-12);
        // lowest heading leaving N other than the arrival is arc 0
        assert_eq!(ext.end, GraphPoint::Edge { edge: 0, offset: 1.0 });
        assert_eq!(extend(&s, &path, 1.0).unwrap(), ext);
    }

    #[test]
    fn shortest_paths_match_distance() {
        let g = SphericalGraph::from_edges(2, &[(0, 1, 3.0), (0, 1, 3.5), (0, 1, 4.0)], Default::default()).unwrap();
        let pts = [at(&g, 0, 1.0), at(&g, 1, 2.0), at(&g, 2, 0.5), GraphPoint::Vertex(1), at(&g, 2, 3.9)];
        for x in &pts {
            for y in &pts {
                let p = shortest_path(&g, x, y);
                assert!((p.length - g.intrinsic_distance(x, y)).abs() < 1e-12);
                let end = p.point_at(&g, p.length);
                assert!(g.intrinsic_distance(&end, y) < 1e-12);
            }
        }
    }

    #[test]
    fn antipode_sets() {
        let c = SphericalGraph::circle(2.0 * PI).unwrap();
        let a = antipode_set(&c, &at(&c, 0, 0.0)).unwrap();
        let user = a.to_user(&c);
        assert_eq!(user.len(), 1);
        match user[0] {
            UserAntipodePiece::Point { point: UserPoint::Edge { offset, .. } } => assert!((offset - PI).abs() < 1e-9),
            ref other => panic!("{other:?}"),
        }
        let w = SphericalGraph::circle(2.0 * PI + 0.5).unwrap();
        let user = antipode_set(&w, &at(&w, 0, 0.0)).unwrap().to_user(&w);
        assert_eq!(user.len(), 1);
        match user[0] {
            UserAntipodePiece::Segment { edge: 0, lo, hi } => {
                assert!((lo - PI).abs() < 1e-9 && (hi - PI - 0.5).abs() < 1e-9)
            }
            ref other => panic!("{other:?}"),
        }
        let s = SphericalGraph::suspension(3).unwrap();
        let set = antipode_set(&s, &mid(&s, 1)).unwrap();
        let mut got: Vec<_> = set.sample(&s, 2).iter().map(|p| s.to_user(p)).collect();
        got.dedup();
        assert_eq!(
            got,
            vec![UserPoint::Edge { edge: 0, offset: PI / 2.0 }, UserPoint::Edge { edge: 2, offset: PI / 2.0 }]
        );
    }

    #[test]
    fn antipode_set_agrees_with_sampling() {
        let w = SphericalGraph::circle(2.0 * PI + 0.5).unwrap();
        let xi = at(&w, 0, 0.0);
        let total = 2.0 * PI + 0.5;
        let n = 20_000;
        for i in 0..n {
            let t = total * i as f64 / n as f64;
            let p = at(&w, 0, t);
            let far = w.intrinsic_distance(&xi, &p) >= PI;
            let inside = (PI - 1e-9..=PI + 0.5 + 1e-9).contains(&t);
            assert_eq!(far, inside, "t = {t}");
        }
    }

    #[test]
    fn antipodal_distance_examples() {
        let c = SphericalGraph::circle(2.0 * PI).unwrap();
        let r = antipodal_distance(&c, &at(&c, 0, 0.0), &at(&c, 0, 1.0)).unwrap();
        assert!((r.value - (PI - 1.0)).abs() < 1e-12 && r.method_gap < 1e-12);
        let w = SphericalGraph::circle(2.0 * PI + 0.5).unwrap();
        let r = antipodal_distance(&w, &at(&w, 0, 0.0), &at(&w, 0, 2.8)).unwrap();
        assert!((r.value - (PI + 0.5 - 2.8)).abs() < 1e-12, "{r:?}");
        assert!(r.method_gap < 1e-12);
        let s = SphericalGraph::suspension(3).unwrap();
        for p in [mid(&s, 0), GraphPoint::Vertex(1), at(&s, 2, 0.3)] {
            assert!((antipodal_distance(&s, &p, &p).unwrap().value - PI).abs() < 1e-12);
        }
        let intrinsic = c.clone().with_mode(MetricMode::Intrinsic);
        assert!(antipodal_distance(&intrinsic, &GraphPoint::Vertex(0), &GraphPoint::Vertex(0)).is_err());
    }

    #[test]
    fn antipodal_distance_matches_sampled_sup() {
        let w = SphericalGraph::circle(2.0 * PI + 0.5).unwrap();
        let total = 2.0 * PI + 0.5;
        for &(a, b) in &[(0.0, 2.8), (0.4, 1.1), (6.0, 3.1), (1.0, 4.9)] {
            let (xi, eta) = (at(&w, 0, a), at(&w, 0, b));
            let sampled = (0..50_000)
                .map(|i| at(&w, 0, total * i as f64 / 50_000.0))
                .map(|x| w.intrinsic_distance(&xi, &x).min(PI) + w.intrinsic_distance(&eta, &x).min(PI) - PI)
                .fold(f64::NEG_INFINITY, f64::max);
            let got = antipodal_distance(&w, &xi, &eta).unwrap().value;
            assert!(got >= sampled - 1e-12 && got - sampled < 1e-3, "{got} vs {sampled}");
        }
    }

    #[test]
    fn directions_of_paths() {
        let c = SphericalGraph::circle(2.0 * PI).unwrap();
        assert_eq!(direction_of(&c, &at(&c, 0, 0.5), &at(&c, 0, 1.5)).unwrap().len(), 1);
        assert_eq!(direction_of(&c, &at(&c, 0, 0.5), &at(&c, 0, 0.5 + PI)).unwrap().len(), 2);
        let s = SphericalGraph::suspension(3).unwrap();
        assert_eq!(direction_space_graph(&s, &GraphPoint::Vertex(0)).unwrap().len(), 3);
        assert_eq!(direction_space_graph(&s, &mid(&s, 0)).unwrap().len(), 2);
        assert_eq!(direction_of(&s, &GraphPoint::Vertex(0), &GraphPoint::Vertex(1)).unwrap(), vec![0, 1, 2]);
        assert!(direction_of(&s, &GraphPoint::Vertex(0), &GraphPoint::Vertex(0)).is_err());
    }

    #[test]
    fn discrete_sets() {
        let two = DiscretePiSet::with_size(2).unwrap();
        let three = DiscretePiSet::with_size(3).unwrap();
        assert_eq!(two.antipodal_distance(0, 0), PI);
        assert_eq!(two.antipodal_distance(0, 1), 0.0);
        assert_eq!(three.antipodal_distance(0, 1), PI);
        assert!(DiscretePiSet::with_size(1).is_err());
        assert_eq!(three.distance_level_set(&0, PI), vec![1, 2]);
    }

    #[test]
    fn level_sets_and_maximize() {
        let w = SphericalGraph::circle(2.0 * PI + 0.5).unwrap();
        let xi = at(&w, 0, 0.0);
        let lv: Vec<_> = w.distance_level_set(&xi, PI / 2.0).iter().map(|p| w.to_user(p)).collect();
        assert_eq!(lv.len(), 2);
        let (p, v) = w.maximize(&|p: &GraphPoint| -(w.intrinsic_distance(p, &at(&w, 0, 2.0)) - 0.7).abs());
        assert!(v.abs() < 1e-9);
        assert!((w.intrinsic_distance(&p, &at(&w, 0, 2.0)) - 0.7).abs() < 1e-9);
    }
}
