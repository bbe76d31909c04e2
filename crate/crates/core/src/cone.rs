//! Metric, geodesics and directions on Euclidean cones over spherical graphs.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodesy::{self, DiscretePiSet, GeodesicPath};
use crate::model::{ConePoint, ConeSpace, DistanceField, GraphPoint, Heading, SphericalGraph};

/// Base distance capped at π, the angle of the cone sector between two rays.
pub fn base_angle(cone: &ConeSpace, u: &ConePoint, v: &ConePoint) -> f64 {
    if u.is_apex() || v.is_apex() {
        return 0.0;
    }
    cone.base().intrinsic_distance(&u.base, &v.base).min(PI)
}

pub fn cone_distance(cone: &ConeSpace, u: &ConePoint, v: &ConePoint) -> f64 {
    if u.is_apex() || v.is_apex() {
        return u.radius.max(0.0) + v.radius.max(0.0);
    }
    radial_distance(u.radius, v.radius, base_angle(cone, u, v))
}

/// Distances from one fixed cone point, reusing its base distance field.
#[derive(Debug, Clone)]
pub struct ConeDistanceFrom {
    pub point: ConePoint,
    field: Option<DistanceField>,
}

impl ConeDistanceFrom {
    pub fn new(cone: &ConeSpace, point: &ConePoint) -> Self {
        let field = (!point.is_apex()).then(|| cone.base().distance_field(&point.base));
        Self { point: *point, field }
    }

    pub fn base_angle(&self, cone: &ConeSpace, x: &ConePoint) -> f64 {
        match &self.field {
            Some(f) if !x.is_apex() => f.at(cone.base(), &x.base).min(PI),
            _ => 0.0,
        }
    }

    pub fn to(&self, cone: &ConeSpace, x: &ConePoint) -> f64 {
        radial_distance(self.point.radius, x.radius, self.base_angle(cone, x))
    }
}

/// Cone distance between radii `s`, `t` whose rays are `l` apart.
pub fn radial_distance(s: f64, t: f64, l: f64) -> f64 {
    let (s, t) = (s.max(0.0), t.max(0.0));
    if s == 0.0 || t == 0.0 {
        return s + t;
    }
    if l >= PI {
        return s + t;
    }
    // (s-t)^2 + 4st sin^2(l/2) avoids cancellation for nearby points
    let h = (0.5 * l).sin();
    ((s - t) * (s - t) + 4.0 * s * t * h * h).sqrt()
}

/// Points of `B(p, rho)` minus `p` forming an `h`-net: every point of the
/// ball lies within about `h` of a net point.
pub fn ball_net(cone: &ConeSpace, p: &ConePoint, rho: f64, h: f64) -> Result<Vec<ConePoint>> {
    if !(rho > 0.0 && h > 0.0 && h <= rho) {
        return Err(Error::InvalidArgument(format!("net needs 0 < h <= rho (h = {h}, rho = {rho})")));
    }
    let base = cone.base();
    let from = ConeDistanceFrom::new(cone, p);
    let s = p.radius.max(0.0);
    let r_lo = (s - rho).max(0.0);
    let r_hi = s + rho;
    let max_angle = if s > rho { (rho / s).asin() + 1e-12 } else { PI };
    let mut out = Vec::new();
    let steps = ((r_hi - r_lo) / h).ceil() as usize;
    for j in 0..=steps {
        let r = (r_lo + j as f64 * h).min(r_hi);
        if r <= 0.0 {
            continue;
        }
        let spacing = h / r;
        for v in 0..base.vertex_count() {
            push_net_point(cone, &from, GraphPoint::Vertex(v), r, rho, max_angle, &mut out);
        }
        for (edge, e) in base.edges().iter().enumerate() {
            let n = (e.len / spacing).ceil().max(1.0) as usize;
            for i in 1..n {
                let q = base.snap(edge, e.len * i as f64 / n as f64);
                push_net_point(cone, &from, q, r, rho, max_angle, &mut out);
            }
        }
    }
    Ok(out)
}

fn push_net_point(
    cone: &ConeSpace,
    from: &ConeDistanceFrom,
    base: GraphPoint,
    r: f64,
    rho: f64,
    max_angle: f64,
    out: &mut Vec<ConePoint>,
) {
    let x = ConePoint { base, radius: r };
    if from.base_angle(cone, &x) > max_angle {
        return;
    }
    let d = from.to(cone, &x);
    if d > 1e-12 && d <= rho {
        out.push(x);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeodesicKind {
    /// Straight chord in the development of the base path.
    Chord { base_path: GeodesicPath, angle: f64 },
    /// Radially in to the apex, then radially out.
    ThroughApex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeGeodesic {
    pub start: ConePoint,
    pub end: ConePoint,
    pub length: f64,
    pub kind: GeodesicKind,
}

/// A sample along a cone geodesic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicSample {
    pub arclength: f64,
    pub point: ConePoint,
}

pub fn cone_geodesic(cone: &ConeSpace, u: &ConePoint, v: &ConePoint) -> ConeGeodesic {
    let length = cone_distance(cone, u, v);
    let kind = if u.is_apex() || v.is_apex() {
        GeodesicKind::ThroughApex
    } else {
        let field = cone.base().distance_field(&u.base);
        let d = field.at(cone.base(), &v.base);
        if d >= PI {
            GeodesicKind::ThroughApex
        } else {
            let base_path = geodesy::shortest_path_in(cone.base(), &field, &v.base);
            GeodesicKind::Chord { base_path, angle: d }
        }
    };
    ConeGeodesic { start: *u, end: *v, length, kind }
}

impl ConeGeodesic {
    fn plane_point(&self, r: f64) -> (f64, f64) {
        let (s, t) = (self.start.radius, self.end.radius);
        let l = match &self.kind {
            GeodesicKind::Chord { angle, .. } => *angle,
            GeodesicKind::ThroughApex => PI,
        };
        let f = if self.length > 0.0 { (r / self.length).clamp(0.0, 1.0) } else { 0.0 };
        let (vx, vy) = (t * l.cos(), t * l.sin());
        (s + f * (vx - s), f * vy)
    }

    /// Point at arclength `r` from the start.
    pub fn point_at(&self, cone: &ConeSpace, r: f64) -> ConePoint {
        let r = r.clamp(0.0, self.length);
        match &self.kind {
            GeodesicKind::ThroughApex => {
                let s = self.start.radius.max(0.0);
                if r < s {
                    ConePoint { base: self.start.base, radius: s - r }
                } else if r > s {
                    ConePoint { base: self.end.base, radius: r - s }
                } else {
                    ConePoint::apex()
                }
            }
            GeodesicKind::Chord { base_path, .. } => {
                if r <= 0.0 {
                    return self.start;
                }
                if r >= self.length {
                    return self.end;
                }
                let (x, y) = self.plane_point(r);
                let radius = x.hypot(y);
                if radius <= 0.0 {
                    return ConePoint::apex();
                }
                let phi = y.atan2(x).max(0.0);
                ConePoint { base: base_path.point_at(cone.base(), phi), radius }
            }
        }
    }

    /// Endpoints plus the points where the chord crosses a vertex ray.
    pub fn samples(&self, cone: &ConeSpace) -> Vec<GeodesicSample> {
        let mut out = vec![GeodesicSample { arclength: 0.0, point: self.start }];
        match &self.kind {
            GeodesicKind::ThroughApex => {
                let s = self.start.radius.max(0.0);
                if s > 0.0 && s < self.length {
                    out.push(GeodesicSample { arclength: s, point: ConePoint::apex() });
                }
            }
            GeodesicKind::Chord { base_path, .. } => {
                let (s, t) = (self.start.radius, self.end.radius);
                let l = match &self.kind {
                    GeodesicKind::Chord { angle, .. } => *angle,
                    _ => unreachable!(),
                };
                for phi in base_path.interior_vertices() {
                    // chord from (s,0) to t·e^{il} meets the ray at angle phi
                    let (vx, vy) = (t * l.cos() - s, t * l.sin());
                    let (c, sn) = (phi.cos(), phi.sin());
                    let denom = vy * c - vx * sn;
                    if denom.abs() < 1e-300 {
                        continue;
                    }
                    let f = s * sn / denom;
                    let r = f * self.length;
                    if r > 0.0 && r < self.length {
                        out.push(GeodesicSample { arclength: r, point: self.point_at(cone, r) });
                    }
                }
            }
        }
        out.push(GeodesicSample { arclength: self.length, point: self.end });
        out
    }

    /// Smallest radius reached along the path.
    pub fn min_radius(&self) -> f64 {
        let (s, t) = (self.start.radius.max(0.0), self.end.radius.max(0.0));
        match &self.kind {
            GeodesicKind::ThroughApex => 0.0,
            GeodesicKind::Chord { angle, .. } => {
                let d = self.length;
                if d <= 0.0 {
                    return s;
                }
                // foot of the perpendicular from the apex lies on the chord
                // iff both base angles are at most π/2
                let inside = s * s + d * d - t * t >= 0.0 && t * t + d * d - s * s >= 0.0;
                if inside {
                    s * t * angle.sin() / d
                } else {
                    s.min(t)
                }
            }
        }
    }
}

/// Which model realises a space of directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionKind {
    BaseGraph,
    Circle2pi,
    SuspensionD,
    DiscretePi,
}

/// Space of directions `Σ_p` at a point of a cone (or a graph).
///
/// Away from the apex the model is the suspension over the base headings at
/// the point: vertex 0 is the outward radial direction, vertex 1 the inward
/// one, and arc `j` rises along base heading `headings[j]` with the offset
/// measuring the angle from outward.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionModel {
    pub kind: DirectionKind,
    pub graph: Option<SphericalGraph>,
    pub discrete: Option<DiscretePiSet>,
    pub headings: Vec<Heading>,
}

pub const OUTWARD: GraphPoint = GraphPoint::Vertex(0);
pub const INWARD: GraphPoint = GraphPoint::Vertex(1);

impl DirectionModel {
    /// The spherical graph realising the model (not available for discrete sets).
    pub fn graph(&self) -> Result<&SphericalGraph> {
        self.graph
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("discrete direction models have no graph".into()))
    }

    pub fn arc_of(&self, heading: Heading) -> Option<usize> {
        self.headings.iter().position(|&h| h == heading)
    }
}

pub fn space_of_directions(cone: &ConeSpace, p: &ConePoint) -> Result<DirectionModel> {
    if p.is_apex() {
        return Ok(DirectionModel {
            kind: DirectionKind::BaseGraph,
            graph: Some(cone.base().clone()),
            discrete: None,
            headings: Vec::new(),
        });
    }
    cone.base().check_point(&p.base)?;
    let headings = cone.base().headings(&p.base);
    let d = headings.len();
    let kind = if d == 2 { DirectionKind::Circle2pi } else { DirectionKind::SuspensionD };
    Ok(DirectionModel { kind, graph: Some(SphericalGraph::suspension(d)?), discrete: None, headings })
}

/// Space of directions of a graph at one of its points.
pub fn graph_directions(graph: &SphericalGraph, x: &GraphPoint) -> Result<DirectionModel> {
    let set = geodesy::direction_space_graph(graph, x)?;
    Ok(DirectionModel { kind: DirectionKind::DiscretePi, graph: None, headings: set.headings.clone(), discrete: Some(set) })
}

/// Initial directions of the shortest paths from `p` to `a`.
pub fn direction_at(cone: &ConeSpace, p: &ConePoint, a: &ConePoint) -> Result<Vec<GraphPoint>> {
    let d = cone_distance(cone, p, a);
    if d <= 0.0 {
        return Err(Error::InvalidArgument("direction from a point to itself is undefined".into()));
    }
    if p.is_apex() {
        return Ok(vec![a.base]);
    }
    let base = cone.base();
    if a.is_apex() {
        return Ok(vec![INWARD]);
    }
    let field = base.distance_field(&p.base);
    let l = field.at(base, &a.base);
    if l >= PI {
        return Ok(vec![INWARD]);
    }
    let (s, t) = (p.radius, a.radius);
    if l == 0.0 {
        return Ok(vec![if t > s { OUTWARD } else { INWARD }]);
    }
    let cos_alpha = ((s * s + d * d - t * t) / (2.0 * s * d)).clamp(-1.0, 1.0);
    let alpha = cos_alpha.acos();
    let offset = PI - alpha;
    let path = geodesy::shortest_path_in(base, &field, &a.base);
    let heading = path
        .initial_heading()
        .ok_or_else(|| Error::Internal("empty base path between distinct rays".into()))?;
    let arc = base
        .headings(&p.base)
        .iter()
        .position(|&h| h == heading)
        .ok_or_else(|| Error::Internal("base heading not found at point".into()))?;
    let model = SphericalGraph::suspension(base.headings(&p.base).len())?;
    model.point_on_edge(arc, offset).map(|q| vec![q])
}

/// Point reached from `p` after `r` along direction `dir` of `Σ_p`.
pub fn exp(cone: &ConeSpace, p: &ConePoint, dir: &GraphPoint, r: f64) -> Result<ConePoint> {
    let base = cone.base();
    if r <= 0.0 {
        return Ok(*p);
    }
    if p.is_apex() {
        base.check_point(dir)?;
        return Ok(ConePoint { base: *dir, radius: r });
    }
    let headings = base.headings(&p.base);
    let s = p.radius;
    let (arc, phi) = match *dir {
        GraphPoint::Vertex(0) => return Ok(ConePoint { base: p.base, radius: s + r }),
        GraphPoint::Vertex(1) => {
            if r <= s {
                return Ok(if r == s { ConePoint::apex() } else { ConePoint { base: p.base, radius: s - r } });
            }
            // any continuation through the apex is a geodesic; go on along arc 0
            let far = geodesy::travel(base, &p.base, headings[0], PI);
            return Ok(ConePoint { base: far, radius: r - s });
        }
        GraphPoint::Edge { edge, offset } if edge < headings.len() => (edge, offset),
        _ => return Err(Error::InvalidPoint(format!("{dir:?} is not a direction at this point"))),
    };
    let (x, y) = (s + r * phi.cos(), r * phi.sin());
    let radius = x.hypot(y);
    if radius <= 0.0 {
        return Ok(ConePoint::apex());
    }
    let psi = y.atan2(x);
    Ok(ConePoint { base: geodesy::travel(base, &p.base, headings[arc], psi), radius })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonModel {
    Euclidean,
    Spherical,
}

const TRIANGLE_SLACK: f64 = 1e-9;

/// Angle at `p` of the comparison triangle with sides `|ap|`, `|px|`, `|ax|`.
pub fn comparison_angle(d_ap: f64, d_px: f64, d_ax: f64, model: ComparisonModel) -> Result<f64> {
    if !(d_ap > 0.0 && d_px > 0.0) {
        return Err(Error::InvalidArgument(format!("degenerate comparison triangle ({d_ap}, {d_px}, {d_ax})")));
    }
    if d_ax < 0.0
        || d_ax > d_ap + d_px + TRIANGLE_SLACK
        || d_ap > d_px + d_ax + TRIANGLE_SLACK
        || d_px > d_ap + d_ax + TRIANGLE_SLACK
    {
        return Err(Error::InvalidArgument(format!(
            "sides ({d_ap}, {d_px}, {d_ax}) violate the triangle inequality"
        )));
    }
    let c = match model {
        ComparisonModel::Euclidean => (d_ap * d_ap + d_px * d_px - d_ax * d_ax) / (2.0 * d_ap * d_px),
        ComparisonModel::Spherical => {
            if d_ap > PI + TRIANGLE_SLACK || d_px > PI + TRIANGLE_SLACK || d_ap + d_px + d_ax > 2.0 * PI + TRIANGLE_SLACK {
                return Err(Error::InvalidArgument("spherical comparison needs sides ≤ π and perimeter ≤ 2π".into()));
            }
            let den = d_ap.sin() * d_px.sin();
            if den.abs() < 1e-300 {
                return Err(Error::InvalidArgument("degenerate spherical comparison triangle".into()));
            }
            (d_ax.cos() - d_ap.cos() * d_px.cos()) / den
        }
    };
    Ok(c.clamp(-1.0, 1.0).acos())
}

/// Angle between two directions at `p` (the truncated distance in `Σ_p`).
pub fn angle_between(model: &DirectionModel, a: &GraphPoint, b: &GraphPoint) -> Result<f64> {
    match (&model.graph, &model.discrete) {
        (Some(g), _) => {
            g.check_point(a)?;
            g.check_point(b)?;
            Ok(g.intrinsic_distance(a, b).min(PI))
        }
        _ => Err(Error::InvalidArgument("angles need a graph direction model".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plane() -> ConeSpace {
        ConeSpace::new(SphericalGraph::circle(2.0 * PI).unwrap())
    }

    fn polar(cone: &ConeSpace, pos: f64, r: f64) -> ConePoint {
        let p = cone.base().from_user(&crate::model::UserPoint::Edge { edge: 0, offset: pos }).unwrap();
        cone.point(p, r).unwrap()
    }

    fn pos_of(cone: &ConeSpace, p: &ConePoint) -> f64 {
        match cone.base().to_user(&p.base) {
            crate::model::UserPoint::Edge { offset, .. } => offset,
            crate::model::UserPoint::Vertex { .. } => 0.0,
        }
    }

    fn xy(cone: &ConeSpace, p: &ConePoint) -> (f64, f64) {
        let a = pos_of(cone, p);
        (p.radius * a.cos(), p.radius * a.sin())
    }

    #[test]
    fn trivial_distances() {
        let k = plane();
        assert_eq!(cone_distance(&k, &k.apex(), &polar(&k, 1.0, 2.5)), 2.5);
        let d = cone_distance(&k, &polar(&k, 0.0, 1.0), &polar(&k, PI / 2.0, 1.0));
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
        let wide = ConeSpace::new(SphericalGraph::circle(2.0 * PI + 1.0).unwrap());
        let d = cone_distance(&wide, &polar(&wide, 0.0, 1.0), &polar(&wide, 3.3, 2.0));
        assert!((d - 3.0).abs() < 1e-12);
    }

    #[test]
    fn plane_oracle_distances_and_midpoints() {
        let k = plane();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let u = polar(&k, rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.01..3.0));
            let v = polar(&k, rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.01..3.0));
            let (a, b) = (xy(&k, &u), xy(&k, &v));
            let exact = (a.0 - b.0).hypot(a.1 - b.1);
            assert!((cone_distance(&k, &u, &v) - exact).abs() <= 1e-9);
            let g = cone_geodesic(&k, &u, &v);
            let m = xy(&k, &g.point_at(&k, g.length / 2.0));
            let mm = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
            assert!((m.0 - mm.0).hypot(m.1 - mm.1) <= 1e-9, "{m:?} vs {mm:?}");
        }
    }

    #[test]
    fn chord_minimum_radius() {
        let k = plane();
        let g = cone_geodesic(&k, &polar(&k, 0.0, 1.0), &polar(&k, PI / 2.0, 1.0));
        assert!((g.min_radius() - 0.5f64.sqrt()).abs() < 1e-12);
        let wide = ConeSpace::new(SphericalGraph::circle(2.0 * PI + 1.0).unwrap());
        let g = cone_geodesic(&wide, &polar(&wide, 0.0, 1.0), &polar(&wide, 3.5, 2.0));
        assert_eq!(g.kind, GeodesicKind::ThroughApex);
        assert!((g.length - 3.0).abs() < 1e-12);
        assert_eq!(g.min_radius(), 0.0);
    }

    #[test]
    fn chord_crosses_one_ray() {
        // theta graph: u over vertex 0, v inside edge 1
        let base = SphericalGraph::from_edges(2, &[(0, 1, 3.0), (0, 1, 3.5), (0, 1, 4.0)], Default::default()).unwrap();
        let k = ConeSpace::new(base);
        let v_on = k.point(k.base().point_on_edge(0, 1.0).unwrap(), 1.0).unwrap();
        let u = k.point(GraphPoint::Vertex(0), 1.0).unwrap();
        let g = cone_geodesic(&k, &u, &v_on);
        assert_eq!(g.samples(&k).len(), 2);
        // start inside edge 1, end inside edge 0: crosses the ray over vertex 0
        let a = k.point(k.base().point_on_edge(1, 0.5).unwrap(), 1.0).unwrap();
        let g = cone_geodesic(&k, &a, &v_on);
        let s = g.samples(&k);
        assert_eq!(s.len(), 3);
        assert_eq!(s[1].point.base, GraphPoint::Vertex(0));
        let expect = 1.0 * 1.0 * 1.5f64.sin() / g.length;
        assert!((g.min_radius() - expect).abs() < 1e-12);
    }

    #[test]
    fn direction_spaces() {
        let k = ConeSpace::new(SphericalGraph::circle(2.0 * PI + 0.5).unwrap());
        let m = space_of_directions(&k, &k.apex()).unwrap();
        assert_eq!(m.kind, DirectionKind::BaseGraph);
        assert!((m.graph().unwrap().total_length() - 6.7832).abs() < 1e-4);
        let m = space_of_directions(&k, &polar(&k, 1.0, 1.0)).unwrap();
        assert_eq!(m.kind, DirectionKind::Circle2pi);
        assert!((m.graph().unwrap().total_length() - 2.0 * PI).abs() < 1e-12);
        let t = ConeSpace::new(SphericalGraph::suspension(3).unwrap());
        let m = space_of_directions(&t, &t.point(GraphPoint::Vertex(0), 1.0).unwrap()).unwrap();
        assert_eq!(m.kind, DirectionKind::SuspensionD);
        assert_eq!(m.graph().unwrap().user_edge_count(), 3);
    }

    #[test]
    fn directions() {
        let k = plane();
        let a = polar(&k, 2.2, 1.0);
        assert_eq!(direction_at(&k, &k.apex(), &a).unwrap(), vec![a.base]);
        let p = polar(&k, 0.0, 1.0);
        let dirs = direction_at(&k, &p, &polar(&k, PI / 2.0, 1.0)).unwrap();
        let m = space_of_directions(&k, &p).unwrap();
        let ang = angle_between(&m, &dirs[0], &INWARD).unwrap();
        assert!((ang - PI / 4.0).abs() < 1e-12);
        let wide = ConeSpace::new(SphericalGraph::circle(2.0 * PI + 1.0).unwrap());
        let dirs = direction_at(&wide, &polar(&wide, 0.0, 1.0), &polar(&wide, 3.5, 1.0)).unwrap();
        assert_eq!(dirs, vec![INWARD]);
        assert!(direction_at(&k, &p, &p).is_err());
    }

    #[test]
    fn exp_follows_direction() {
        let k = ConeSpace::new(SphericalGraph::circle(2.0 * PI + 0.7).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let p = polar(&k, rng.gen_range(0.0..6.9), rng.gen_range(0.2..2.0));
            let a = polar(&k, rng.gen_range(0.0..6.9), rng.gen_range(0.2..2.0));
            if cone_distance(&k, &p, &a) < 1e-6 {
                continue;
            }
            let dir = direction_at(&k, &p, &a).unwrap()[0];
            let d = cone_distance(&k, &p, &a);
            if dir == INWARD && d > p.radius {
                // past the apex every continuation is a geodesic
                continue;
            }
            let q = exp(&k, &p, &dir, d).unwrap();
            assert!(cone_distance(&k, &q, &a) < 1e-8, "{:?} {:?} {:?} {:?}", p, dir, q, a);
        }
    }

    #[test]
    fn first_variation() {
        let k = ConeSpace::new(SphericalGraph::suspension(3).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut checked = 0;
        while checked < 1000 {
            let bp = crate::model::sample_graph_point(k.base(), &mut rng);
            let ba = crate::model::sample_graph_point(k.base(), &mut rng);
            let p = k.point(bp, rng.gen_range(0.5..2.0)).unwrap();
            let a = k.point(ba, rng.gen_range(0.5..2.0)).unwrap();
            let model = space_of_directions(&k, &p).unwrap();
            let g = model.graph().unwrap();
            let xi = crate::model::sample_graph_point(g, &mut rng);
            let Ok(dir_a) = direction_at(&k, &p, &a) else { continue };
            if cone_distance(&k, &p, &a) < 0.1 {
                continue;
            }
            let h = 1e-4;
            let f = |t: f64| cone_distance(&k, &exp(&k, &p, &xi, t).unwrap(), &a);
            // one-sided: the geodesic only exists forward from p
            let deriv = (-3.0 * f(0.0) + 4.0 * f(h) - f(2.0 * h)) / (2.0 * h);
            let ang = dir_a.iter().map(|d| angle_between(&model, d, &xi).unwrap()).fold(PI, f64::min);
            assert!((deriv + ang.cos()).abs() < 1e-6, "{deriv} vs {}", -ang.cos());
            checked += 1;
        }
    }

    #[test]
    fn comparison_angles() {
        use ComparisonModel::*;
        assert!((comparison_angle(1.0, 1.0, 2f64.sqrt(), Euclidean).unwrap() - PI / 2.0).abs() < 1e-12);
        assert!((comparison_angle(1.0, 1.0, 2.0, Euclidean).unwrap() - PI).abs() < 1e-12);
        let h = PI / 2.0;
        assert!((comparison_angle(h, h, h, Spherical).unwrap() - h).abs() < 1e-12);
        assert!(comparison_angle(0.0, 1.0, 1.0, Euclidean).is_err());
        assert!(comparison_angle(1.0, 1.0, 3.0, Euclidean).is_err());
    }

    #[test]
    fn triangle_comparison_and_sum_bound() {
        let k = ConeSpace::new(SphericalGraph::circle(2.0 * PI + 1.3).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut n = 0;
        while n < 2000 {
            let pick = |rng: &mut ChaCha8Rng| polar(&k, rng.gen_range(0.0..7.5), rng.gen_range(0.1..2.0));
            let (a, p, x) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
            let (dap, dpx, dax) = (cone_distance(&k, &a, &p), cone_distance(&k, &p, &x), cone_distance(&k, &a, &x));
            if dap < 1e-3 || dpx < 1e-3 || dax < 1e-3 {
                continue;
            }
            let model = space_of_directions(&k, &p).unwrap();
            let da = direction_at(&k, &p, &a).unwrap()[0];
            let dx = direction_at(&k, &p, &x).unwrap()[0];
            let angle = angle_between(&model, &da, &dx).unwrap();
            let cmp = comparison_angle(dap, dpx, dax, ComparisonModel::Euclidean).unwrap();
            assert!(angle <= cmp + 1e-9, "{angle} > {cmp}");
            let at_x = comparison_angle(dax, dpx, dap, ComparisonModel::Euclidean).unwrap();
            let at_p = comparison_angle(dap, dpx, dax, ComparisonModel::Euclidean).unwrap();
            assert!(at_x + at_p <= PI + 1e-9);
            n += 1;
        }
    }
}
