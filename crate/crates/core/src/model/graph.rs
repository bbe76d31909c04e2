use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pl::Line;

/// Offsets this close to an edge end are snapped onto the vertex.
pub(crate) const SNAP: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    Intrinsic,
    #[default]
    PiTruncated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub len: f64,
}

/// A direction of travel along an edge: `forward` means increasing offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Heading {
    pub edge: usize,
    pub forward: bool,
}

impl Heading {
    pub fn reversed(self) -> Self {
        Heading { edge: self.edge, forward: !self.forward }
    }
}

/// A location on a spherical graph, in internal (subdivided) coordinates.
///
/// Offsets are strictly inside `(0, len)`; endpoints are always stored as
/// [`GraphPoint::Vertex`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphPoint {
    Vertex(usize),
    Edge { edge: usize, offset: f64 },
}

impl GraphPoint {
    /// Lexicographic order used for deterministic tie-breaking.
    pub fn order_key(&self) -> (usize, usize, f64) {
        match *self {
            GraphPoint::Vertex(v) => (0, v, 0.0),
            GraphPoint::Edge { edge, offset } => (1, edge, offset),
        }
    }

    pub fn cmp_key(&self, other: &Self) -> Ordering {
        let (a0, a1, a2) = self.order_key();
        let (b0, b1, b2) = other.order_key();
        a0.cmp(&b0).then(a1.cmp(&b1)).then(a2.total_cmp(&b2))
    }
}

/// User-facing point coordinates: original edge ids with offsets along the
/// full original edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UserPoint {
    Vertex { vertex: usize },
    Edge { edge: usize, offset: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct UserEdge {
    pub a: usize,
    pub b: usize,
    pub len: f64,
    /// First internal edge id; pieces are consecutive.
    pub first: usize,
    /// Start offset of each piece (`cuts[0] == 0`).
    pub cuts: Vec<f64>,
}

/// Compact metric graph used as a CAT(1) model.
///
/// Edges longer than π are split at load into equal pieces, so every
/// internal edge has length at most π. All public coordinates
/// ([`UserPoint`]) refer to the edges as described; [`GraphPoint`] refers to
/// the internal pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalGraph {
    user_vertices: usize,
    vertex_count: usize,
    edges: Vec<Edge>,
    user_edges: Vec<UserEdge>,
    /// Internal edge -> (user edge, start offset within it).
    origin: Vec<(usize, f64)>,
    /// Headings leaving each vertex, sorted.
    adjacency: Vec<Vec<Heading>>,
    mode: MetricMode,
}

impl SphericalGraph {
    /// Builds a graph from explicit edges `(a, b, len)`; no invariant beyond
    /// structural sanity is checked here (see `validate_space`).
    pub fn from_edges(vertices: usize, edges: &[(usize, usize, f64)], mode: MetricMode) -> Result<Self> {
        let parts = edges
            .iter()
            .map(|&(a, b, len)| {
                let pieces = if len > PI { (len / PI - 1e-12).ceil() as usize } else { 1 };
                let step = len / pieces as f64;
                (a, b, len, (0..pieces).map(|j| step * j as f64).collect())
            })
            .collect();
        Self::from_parts(vertices, parts, mode)
    }

    fn from_parts(vertices: usize, parts: Vec<(usize, usize, f64, Vec<f64>)>, mode: MetricMode) -> Result<Self> {
        if vertices == 0 {
            return Err(Error::Validation("graph has no vertices".into()));
        }
        let mut vertex_count = vertices;
        let mut edges = Vec::new();
        let mut origin = Vec::new();
        let mut user_edges = Vec::with_capacity(parts.len());
        for (id, (a, b, len, cuts)) in parts.into_iter().enumerate() {
            if a >= vertices || b >= vertices {
                return Err(Error::Validation(format!("edge {id} references a missing vertex")));
            }
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::Validation(format!("edge {id} has non-positive length {len}")));
            }
            let first = edges.len();
            let n = cuts.len();
            let mut prev = a;
            for j in 0..n {
                let start = cuts[j];
                let end = if j + 1 < n { cuts[j + 1] } else { len };
                let next = if j + 1 < n {
                    vertex_count += 1;
                    vertex_count - 1
                } else {
                    b
                };
                edges.push(Edge { a: prev, b: next, len: end - start });
                origin.push((id, start));
                prev = next;
            }
            user_edges.push(UserEdge { a, b, len, first, cuts });
        }
        let mut adjacency = vec![Vec::new(); vertex_count];
        for (id, e) in edges.iter().enumerate() {
            adjacency[e.a].push(Heading { edge: id, forward: true });
            adjacency[e.b].push(Heading { edge: id, forward: false });
        }
        for adj in &mut adjacency {
            adj.sort();
        }
        Ok(Self { user_vertices: vertices, vertex_count, edges, user_edges, origin, adjacency, mode })
    }

    /// Circle of the given length: one vertex and one loop edge.
    pub fn circle(length: f64) -> Result<Self> {
        Self::from_edges(1, &[(0, 0, length)], MetricMode::PiTruncated)
    }

    /// `arcs` edges of length π joining two poles (vertex 0 = N, 1 = S).
    pub fn suspension(arcs: usize) -> Result<Self> {
        let edges: Vec<_> = (0..arcs).map(|_| (0, 1, PI)).collect();
        Self::from_edges(2, &edges, MetricMode::PiTruncated)
    }

    /// Copy with an extra internal vertex inserted at `offset` along the
    /// described edge. Public coordinates are unchanged.
    pub fn with_extra_cut(&self, user_edge: usize, offset: f64) -> Result<Self> {
        let ue = self
            .user_edges
            .get(user_edge)
            .ok_or_else(|| Error::InvalidPoint(format!("no edge {user_edge}")))?;
        if !(offset > SNAP && offset < ue.len - SNAP) || ue.cuts.iter().any(|c| (c - offset).abs() < SNAP) {
            return Err(Error::InvalidArgument(format!("cannot cut edge {user_edge} at {offset}")));
        }
        let parts = self
            .user_edges
            .iter()
            .enumerate()
            .map(|(id, u)| {
                let mut cuts = u.cuts.clone();
                if id == user_edge {
                    cuts.push(offset);
                    cuts.sort_by(f64::total_cmp);
                }
                (u.a, u.b, u.len, cuts)
            })
            .collect();
        Self::from_parts(self.user_vertices, parts, self.mode)
    }

    pub fn with_mode(mut self, mode: MetricMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> MetricMode {
        self.mode
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn user_vertex_count(&self) -> usize {
        self.user_vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn user_edge_count(&self) -> usize {
        self.user_edges.len()
    }

    /// `(a, b, len)` of each edge as described.
    pub fn user_edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.user_edges.iter().map(|u| (u.a, u.b, u.len))
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.len).sum()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Headings leaving vertex `v`, sorted by `(edge, forward)`.
    pub fn headings_at_vertex(&self, v: usize) -> &[Heading] {
        &self.adjacency[v]
    }

    /// Directions available at a point: two at an edge-interior point, one per
    /// incident edge end at a vertex.
    pub fn headings(&self, p: &GraphPoint) -> Vec<Heading> {
        match *p {
            GraphPoint::Vertex(v) => self.adjacency[v].clone(),
            GraphPoint::Edge { edge, .. } => {
vec![Heading { edge, forward: false }, Heading { edge, forward: true }]
            }
        }
    }

    /// Internal point, snapping offsets at the ends onto vertices.
    pub fn point_on_edge(&self, edge: usize, offset: f64) -> Result<GraphPoint> {
        let e = self
            .edges
            .get(edge)
            .ok_or_else(|| Error::InvalidPoint(format!("no internal edge {edge}")))?;
        if !offset.is_finite() || offset < -SNAP || offset > e.len + SNAP {
            return Err(Error::InvalidPoint(format!("offset {offset} outside edge of length {}", e.len)));
        }
        Ok(self.snap(edge, offset))
    }

    pub(crate) fn snap(&self, edge: usize, offset: f64) -> GraphPoint {
        let e = &self.edges[edge];
        if offset <= SNAP {
            GraphPoint::Vertex(e.a)
        } else if offset >= e.len - SNAP {
            GraphPoint::Vertex(e.b)
        } else {
            GraphPoint::Edge { edge, offset }
        }
    }

    pub fn vertex(&self, v: usize) -> Result<GraphPoint> {
        if v < self.vertex_count {
            Ok(GraphPoint::Vertex(v))
        } else {
            Err(Error::InvalidPoint(format!("no vertex {v}")))
        }
    }

    pub fn check_point(&self, p: &GraphPoint) -> Result<()> {
        match *p {
            GraphPoint::Vertex(v) => self.vertex(v).map(|_| ()),
            GraphPoint::Edge { edge, offset } => match self.edges.get(edge) {
                Some(e) if offset > 0.0 && offset < e.len => Ok(()),
                _ => Err(Error::InvalidPoint(format!("{p:?} is not on the graph"))),
            },
        }
    }

    /// Converts described coordinates to an internal point.
    pub fn from_user(&self, p: &UserPoint) -> Result<GraphPoint> {
        match *p {
            UserPoint::Vertex { vertex } => {
                if vertex < self.user_vertices {
                    Ok(GraphPoint::Vertex(vertex))
                } else {
                    Err(Error::InvalidPoint(format!("no vertex {vertex}")))
                }
            }
            UserPoint::Edge { edge, offset } => {
                let ue = self
                    .user_edges
                    .get(edge)
                    .ok_or_else(|| Error::InvalidPoint(format!("no edge {edge}")))?;
                if !offset.is_finite() || offset < -SNAP || offset > ue.len + SNAP {
                    return Err(Error::InvalidPoint(format!(
                        "offset {offset} outside edge {edge} of length {}",
                        ue.len
                    )));
                }
                let j = ue.cuts.partition_point(|&c| c <= offset).saturating_sub(1);
                Ok(self.snap(ue.first + j, offset - ue.cuts[j]))
            }
        }
    }

    /// Converts an internal point back to described coordinates.
    pub fn to_user(&self, p: &GraphPoint) -> UserPoint {
        match *p {
            GraphPoint::Vertex(v) if v < self.user_vertices => UserPoint::Vertex { vertex: v },
            GraphPoint::Vertex(v) => {
                // subdivision vertex: start of the piece that leaves it forward
                let h = self.adjacency[v].iter().find(|h| h.forward).expect("subdivision vertex has an outgoing piece");
                let (ue, start) = self.origin[h.edge];
                UserPoint::Edge { edge: ue, offset: start }
            }
            GraphPoint::Edge { edge, offset } => {
                let (ue, start) = self.origin[edge];
                UserPoint::Edge { edge: ue, offset: start + offset }
            }
        }
    }

    /// Shortest-path distances from `source` to every vertex.
    pub fn distance_field(&self, source: &GraphPoint) -> DistanceField {
        let mut dist = vec![f64::INFINITY; self.vertex_count];
        let mut pred = vec![Pred::None; self.vertex_count];
        let mut heap = BinaryHeap::new();
        match *source {
            GraphPoint::Vertex(v) => {
                dist[v] = 0.0;
                pred[v] = Pred::Source;
                heap.push(Item(0.0, v));
            }
            GraphPoint::Edge { edge, offset } => {
                let e = self.edges[edge];
                let da = offset;
                let db = e.len - offset;
                // ties prefer the lower-offset end
                for (v, d, h) in [(e.a, da, Heading { edge, forward: false }), (e.b, db, Heading { edge, forward: true })] {
                    if d < dist[v] {
                        dist[v] = d;
                        pred[v] = Pred::Start(h);
                        heap.push(Item(d, v));
                    }
                }
            }
        }
        while let Some(Item(d, v)) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &h in &self.adjacency[v] {
                let e = &self.edges[h.edge];
                let w = if h.forward { e.b } else { e.a };
                let nd = d + e.len;
                if nd < dist[w] {
                    dist[w] = nd;
                    pred[w] = Pred::Via { from: v, heading: h };
                    heap.push(Item(nd, w));
                }
            }
        }
        DistanceField { source: *source, dist, pred }
    }

    /// Intrinsic (untruncated) distance.
    pub fn intrinsic_distance(&self, x: &GraphPoint, y: &GraphPoint) -> f64 {
        self.distance_field(x).at(self, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Pred {
    None,
    Source,
    /// Reached directly from the edge-interior source, leaving it with this heading.
    Start(Heading),
    Via { from: usize, heading: Heading },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Distances from one source to all vertices, with the shortest-path tree.
#[derive(Debug, Clone)]
pub struct DistanceField {
    pub source: GraphPoint,
    pub dist: Vec<f64>,
    pub(crate) pred: Vec<Pred>,
}

/// The distance from a fixed source restricted to one edge: on each piece
/// `[lo, hi]` it is the lower envelope of at most three lines.
#[derive(Debug, Clone, Copy)]
pub struct EdgeFunction {
    pub pieces: [(f64, f64, [Line; 3], usize); 2],
    pub count: usize,
}

impl EdgeFunction {
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, &[Line])> {
        self.pieces[..self.count].iter().map(|(lo, hi, lines, n)| (*lo, *hi, &lines[..*n]))
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut best = f64::INFINITY;
        for (lo, hi, lines) in self.pieces() {
            if t >= lo - 1e-15 && t <= hi + 1e-15 {
                best = best.min(crate::pl::envelope(lines, t));
            }
        }
        best
    }
}

impl DistanceField {
    pub fn to_vertex(&self, v: usize) -> f64 {
        self.dist[v]
    }

    pub fn on_edge(&self, graph: &SphericalGraph, edge: usize) -> EdgeFunction {
        let e = graph.edges[edge];
        let up = Line::new(1.0, self.dist[e.a]);
        let down = Line::new(-1.0, self.dist[e.b] + e.len);
        let filler = Line::constant(f64::INFINITY);
        match self.source {
            GraphPoint::Edge { edge: se, offset } if se == edge => EdgeFunction {
                pieces: [
                    (0.0, offset, [up, down, Line::new(-1.0, offset)], 3),
                    (offset, e.len, [up, down, Line::new(1.0, -offset)], 3),
                ],
                count: 2,
            },
            _ => EdgeFunction {
                pieces: [(0.0, e.len, [up, down, filler], 2), (0.0, 0.0, [filler; 3], 0)],
                count: 1,
            },
        }
    }

    pub fn at(&self, graph: &SphericalGraph, p: &GraphPoint) -> f64 {
        match *p {
            GraphPoint::Vertex(v) => self.dist[v],
            GraphPoint::Edge { edge, offset } => {
                let e = graph.edges[edge];
                let mut d = (self.dist[e.a] + offset).min(self.dist[e.b] + e.len - offset);
                if let GraphPoint::Edge { edge: se, offset: so } = self.source {
                    if se == edge {
                        d = d.min((offset - so).abs());
                    }
                }
                d
            }
        }
    }
}
