//! Model spaces: spherical graphs (compact CAT(1)) and Euclidean cones over
//! them (CAT(0)), their JSON descriptions and validation.

mod description;
mod graph;

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use description::{ConePointDescription, EdgeDescription, SpaceDescription};
pub(crate) use graph::Pred;
pub use graph::{DistanceField, Edge, EdgeFunction, GraphPoint, Heading, MetricMode, SphericalGraph, UserPoint};

use crate::cone;
use crate::error::{Error, Result};

/// Tolerance for piecewise-linear comparisons.
pub const TAU: f64 = 1e-9;

/// Euclidean cone over a spherical graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSpace {
    base: SphericalGraph,
}

impl ConeSpace {
    pub fn new(base: SphericalGraph) -> Self {
        Self { base }
    }

    pub fn base(&self) -> &SphericalGraph {
        &self.base
    }

    /// `θ` for a cone over a circle of length `2π + θ`.
    pub fn theta_excess(&self) -> Option<f64> {
        let mut edges = self.base.user_edges();
        match (edges.next(), edges.next()) {
            (Some((a, b, len)), None) if a == b && self.base.user_vertex_count() == 1 => Some(len - 2.0 * PI),
            _ => None,
        }
    }

    pub fn apex(&self) -> ConePoint {
        ConePoint::apex()
    }

    pub fn point(&self, base: GraphPoint, radius: f64) -> Result<ConePoint> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidPoint(format!("radius {radius} must be finite and non-negative")));
        }
        self.base.check_point(&base)?;
        Ok(if radius == 0.0 { ConePoint::apex() } else { ConePoint { base, radius } })
    }

    pub fn from_user(&self, p: &ConePointDescription) -> Result<ConePoint> {
        if p.radius == 0.0 && p.vertex.is_none() && p.edge.is_none() {
            return Ok(ConePoint::apex());
        }
        let base = self.base.from_user(&p.base()?)?;
        self.point(base, p.radius)
    }

    pub fn to_user(&self, p: &ConePoint) -> ConePointDescription {
        if p.is_apex() {
            return ConePointDescription { vertex: None, edge: None, offset: None, radius: 0.0 };
        }
        ConePointDescription::new(self.base.to_user(&p.base), p.radius)
    }
}

/// A point of a cone: base point and radius. Radius zero is the apex
/// whatever the stored base point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConePoint {
    pub base: GraphPoint,
    pub radius: f64,
}

impl ConePoint {
    pub fn apex() -> Self {
        ConePoint { base: GraphPoint::Vertex(0), radius: 0.0 }
    }

    pub fn is_apex(&self) -> bool {
        self.radius <= 0.0
    }
}

/// A tiny ball in a cone model. Cones are globally CAT(0), so only the
/// `radius < 1` clause can bind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TinyBallSpec {
    pub center: ConePoint,
    pub radius: f64,
}

impl TinyBallSpec {
    pub fn new(center: ConePoint, radius: f64) -> Result<Self> {
        if radius > 0.0 && radius < 1.0 {
            Ok(Self { center, radius })
        } else {
            Err(Error::InvalidArgument(format!("tiny ball radius {radius} must lie in (0, 1)")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Space {
    Graph(SphericalGraph),
    Cone(ConeSpace),
}

impl Space {
    pub fn graph(&self) -> &SphericalGraph {
        match self {
            Space::Graph(g) => g,
            Space::Cone(c) => c.base(),
        }
    }
}

/// Parses and validates a space description.
pub fn make_space(description: &str) -> Result<Space> {
    let space = SpaceDescription::parse(description)?.build()?;
    let report = validate_space(&space);
    if report.passed {
        Ok(space)
    } else {
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| c.detail.clone()).collect();
        Err(Error::Validation(failed.join("; ")))
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Signed slack: non-negative when the check passes.
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FourPointReport {
    pub samples: usize,
    /// Worst excess of `|xz|² + |yw|²` over the sum of the four side squares.
    pub worst_quadrilateral_violation: f64,
    /// Worst excess in the midpoint (CN) inequality.
    pub worst_midpoint_violation: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub four_point: Option<FourPointReport>,
}

pub fn validate_space(space: &Space) -> ValidationReport {
    validate_space_with(space, 10_000, 0x5eed)
}

pub fn validate_space_with(space: &Space, samples: usize, seed: u64) -> ValidationReport {
    let graph = space.graph();
    let mut checks = graph_checks(graph);
    let four_point = match space {
        Space::Graph(_) => None,
        Space::Cone(cone) => {
            let r = four_point_check(cone, samples, seed);
            checks.push(Check {
                name: "four_point",
                passed: r.passed,
                margin: -r.worst_quadrilateral_violation.max(r.worst_midpoint_violation),
                detail: format!(
                    "worst four-point violation {:.3e} over {} samples",
                    r.worst_quadrilateral_violation.max(r.worst_midpoint_violation),
                    r.samples
                ),
            });
            Some(r)
        }
    };
    ValidationReport { passed: checks.iter().all(|c| c.passed), checks, four_point }
}

fn graph_checks(graph: &SphericalGraph) -> Vec<Check> {
    let mut checks = Vec::new();
    let n = graph.vertex_count();

    let (min_deg, worst_v) = (0..n).map(|v| (graph.degree(v), v)).min().unwrap_or((0, 0));
    checks.push(Check {
        name: "degree",
        passed: min_deg >= 2,
        margin: min_deg as f64 - 2.0,
        detail: if min_deg >= 2 {
            format!("minimum degree {min_deg}")
        } else {
            let shown = serde_json::to_string(&graph.to_user(&GraphPoint::Vertex(worst_v))).unwrap_or_default();
            format!("vertex {shown} has degree {min_deg} < 2")
        },
    });

    let field = graph.distance_field(&GraphPoint::Vertex(0));
    let unreachable = field.dist.iter().filter(|d| !d.is_finite()).count();
    checks.push(Check {
        name: "connected",
        passed: unreachable == 0,
        margin: -(unreachable as f64),
        detail: if unreachable == 0 {
            "connected".into()
        } else {
            format!("{unreachable} vertices unreachable from vertex 0")
        },
    });

    let girth = girth(graph);
    let (passed, margin, detail) = match girth {
        Some(g) => (g >= 2.0 * PI - TAU, g - 2.0 * PI, format!("shortest cycle {g:.12}, need >= 2π")),
        None => (false, -2.0 * PI, "graph has no cycle".into()),
    };
    checks.push(Check { name: "girth", passed, margin, detail });

    let longest = graph.edges().iter().map(|e| e.len).fold(0.0, f64::max);
    checks.push(Check {
        name: "edge_length",
        passed: longest <= PI + TAU,
        margin: PI - longest,
        detail: format!("longest internal edge {longest:.12}"),
    });
    checks
}

/// Length of the shortest embedded cycle, if any.
pub fn girth(graph: &SphericalGraph) -> Option<f64> {
    let mut best = f64::INFINITY;
    for (id, e) in graph.edges().iter().enumerate() {
        if e.a == e.b {
            best = best.min(e.len);
            continue;
        }
        // shortest a-b path avoiding edge `id`
        let d = shortest_avoiding(graph, e.a, e.b, id);
        best = best.min(e.len + d);
    }
    best.is_finite().then_some(best)
}

fn shortest_avoiding(graph: &SphericalGraph, from: usize, to: usize, skip: usize) -> f64 {
    let n = graph.vertex_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[from] = 0.0;
    for _ in 0..n {
        let Some(v) = (0..n).filter(|&v| !done[v] && dist[v].is_finite()).min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
        else {
            break;
        };
        if v == to {
            return dist[v];
        }
        done[v] = true;
        for h in graph.headings_at_vertex(v) {
            if h.edge == skip {
                continue;
            }
            let e = graph.edge(h.edge);
            let w = if h.forward { e.b } else { e.a };
            dist[w] = dist[w].min(dist[v] + e.len);
        }
    }
    dist[to]
}

/// Uniform point of the graph with respect to length.
pub fn sample_graph_point<R: Rng>(graph: &SphericalGraph, rng: &mut R) -> GraphPoint {
    let mut u = rng.gen::<f64>() * graph.total_length();
    for (id, e) in graph.edges().iter().enumerate() {
        if u < e.len {
            return graph.snap(id, u);
        }
        u -= e.len;
    }
    GraphPoint::Vertex(0)
}

fn four_point_check(cone: &ConeSpace, samples: usize, seed: u64) -> FourPointReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = cone.base();
    let draw = |rng: &mut ChaCha8Rng| ConePoint { base: sample_graph_point(g, rng), radius: 3.0 * rng.gen::<f64>() };
    let mut worst_quad = f64::NEG_INFINITY;
    let mut worst_mid = f64::NEG_INFINITY;
    for _ in 0..samples {
        let [x, y, z, w] = [draw(&mut rng), draw(&mut rng), draw(&mut rng), draw(&mut rng)];
        let d = |a: &ConePoint, b: &ConePoint| cone::cone_distance(cone, a, b);
        let sq = |v: f64| v * v;
        let lhs = sq(d(&x, &z)) + sq(d(&y, &w));
        let rhs = sq(d(&x, &y)) + sq(d(&y, &z)) + sq(d(&z, &w)) + sq(d(&w, &x));
        worst_quad = worst_quad.max(lhs - rhs);

        // midpoint inequality: |xm|² <= (|xy|² + |xz|²)/2 - |yz|²/4
        let dyz = d(&y, &z);
        if dyz > 0.0 {
            let m = cone::cone_geodesic(cone, &y, &z).point_at(cone, 0.5 * dyz);
            let excess = sq(d(&x, &m)) - (0.5 * sq(d(&x, &y)) + 0.5 * sq(d(&x, &z)) - 0.25 * sq(dyz));
            worst_mid = worst_mid.max(excess);
        }
    }
    FourPointReport {
        samples,
        worst_quadrilateral_violation: worst_quad.max(0.0),
        worst_midpoint_violation: worst_mid.max(0.0),
        passed: worst_quad <= 1e-9 && worst_mid <= 1e-9,
    }
}
