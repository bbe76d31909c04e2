//! Retraction of a small ball onto the fiber of a noncritical distance map,
//! `R = R₂ ∘ R₁`: first push along the shortest path to `b` until every
//! coordinate is comparably positive, then take the nearest point of the
//! sublevel set `Π₋`.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::Serialize;

use crate::cone::{self, ConeDistanceFrom};
use crate::error::{Error, Result};
use crate::model::{ConePoint, ConePointDescription, ConeSpace, GraphPoint, TAU};
use crate::regularity;

/// Bisection tolerance for the exit point of `R₁`.
const R1_TOL: f64 = 1e-10;
/// End-to-end tolerance on `|f(x) − f(p)|`.
pub const FIBER_TOL: f64 = 1e-6;
/// Proxy tolerance on the first-order condition `∠̃pyx ≥ π/2`.
const FIRST_ORDER_SLACK: f64 = 1e-4;
const MAX_PROJECTIONS: usize = 10_000;

/// Everything needed to retract onto the fiber `f⁻¹(f(p))` of
/// `f = (|a_1·|, …, |a_k·|)`.
#[derive(Debug, Clone)]
pub struct FiberSpec {
    pub cone: ConeSpace,
    pub p: ConePoint,
    pub a_list: Vec<ConePoint>,
    pub b: ConePoint,
    pub eps: f64,
    pub delta: f64,
    pub rho: f64,
    /// Velocity constant used for `s` and `L`.
    pub c: f64,
    pub s: f64,
    pub lipschitz: f64,
    /// Times `s` was halved to keep points beyond `R₁(x)` strictly inside `Π₊ˢ`.
    pub s_halvings: usize,
    a_from: Vec<ConeDistanceFrom>,
    a_p: Vec<f64>,
    p_from: ConeDistanceFrom,
}

/// `s = (1 + 2/c)⁻¹` and `L = 2/c + 1`.
pub fn default_constants(c: f64) -> Result<(f64, f64)> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidArgument(format!("constant c = {c} must lie in (0, 1]")));
    }
    Ok((1.0 / (1.0 + 2.0 / c), 2.0 / c + 1.0))
}

/// `min_i (−cos |a_i′ b′|)` at `p`, worst case over direction choices: the
/// rate at which every `f_i` grows when moving from `p` toward `b`.
pub fn measured_velocity(cone: &ConeSpace, p: &ConePoint, a_list: &[ConePoint], b: &ConePoint) -> Result<f64> {
    let model = cone::space_of_directions(cone, p)?;
    let a_dirs = a_list.iter().map(|a| cone::direction_at(cone, p, a)).collect::<Result<Vec<_>>>()?;
    let b_dirs = cone::direction_at(cone, p, b)?;
    let mut worst = f64::INFINITY;
    for ds in &a_dirs {
        for d in ds {
            for e in &b_dirs {
                worst = worst.min(-cone::angle_between(&model, d, e)?.cos());
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PiClassification {
    pub in_pi_plus: bool,
    /// `min_{i≠j} (f_i − s f_j)`, or `f_1` when `k = 1`.
    pub plus_margin: f64,
    pub in_pi_minus: bool,
    /// `max_i f_i`.
    pub minus_margin: f64,
    pub s: f64,
}

impl PiClassification {
    pub fn on_fiber(&self) -> bool {
        self.in_pi_plus && self.in_pi_minus
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct R1Result {
    #[serde(skip)]
    pub point: ConePoint,
    pub travel: f64,
    /// `2|px|/c`, the travel the proof guarantees suffices.
    pub travel_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RetractReport {
    pub input: ConePointDescription,
    pub after_r1: ConePointDescription,
    pub output: ConePointDescription,
    pub travel: f64,
    pub travel_bound: f64,
    /// `max_i |f_i(R(x))|`.
    pub residual: f64,
    pub dist_p_input: f64,
    pub dist_p_output: f64,
    /// `L·|px|`.
    pub range_bound: f64,
    /// `∠̃ p y x` at the output of `R₂` (absent when undefined).
    pub first_order_angle: Option<f64>,
    #[serde(skip)]
    pub point: ConePoint,
}

impl FiberSpec {
    /// Builds the spec and checks the comparison-angle noncriticality at `p`
    /// on a `ρ/8`-net of `B(p, ρ)`. `c` defaults to [`measured_velocity`].
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        cone: ConeSpace,
        p: ConePoint,
        a_list: Vec<ConePoint>,
        b: ConePoint,
        eps: f64,
        delta: f64,
        rho: f64,
        c: Option<f64>,
    ) -> Result<Self> {
        if a_list.is_empty() {
            return Err(Error::InvalidArgument("need at least one a_i".into()));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho = {rho} must be positive")));
        }
        let report = regularity::check_map_rho(&cone, &p, &a_list, &b, eps, delta, rho, rho / 8.0, false)?;
        if !report.verdict {
            return Err(Error::Precondition(format!(
                "map is not ({eps}, {delta}, {rho})-noncritical at p (eps margin {:.6}, delta margin {:?})",
                report.eps_margin, report.delta_margin
            )));
        }
        let c = match c {
            Some(c) => c,
            None => {
                let v = measured_velocity(&cone, &p, &a_list, &b)?;
                if v <= 0.0 {
                    return Err(Error::Precondition(format!("moving toward b does not increase every f_i (velocity {v})")));
                }
                v.min(1.0)
            }
        };
        let (s, lipschitz) = default_constants(c)?;
        let a_from: Vec<_> = a_list.iter().map(|a| ConeDistanceFrom::new(&cone, a)).collect();
        let a_p: Vec<_> = a_from.iter().map(|a| a.to(&cone, &p)).collect();
        let p_from = ConeDistanceFrom::new(&cone, &p);
        let mut spec = Self { cone, p, a_list, b, eps, delta, rho, c, s, lipschitz, s_halvings: 0, a_from, a_p, p_from };
        spec.tune_s();
        Ok(spec)
    }

    pub fn k(&self) -> usize {
        self.a_list.len()
    }

    /// `f_i(x) = |a_i x| − |a_i p|`.
    pub fn f(&self, x: &ConePoint) -> Vec<f64> {
        self.a_from.iter().zip(&self.a_p).map(|(a, ap)| a.to(&self.cone, x) - ap).collect()
    }

    pub fn residual(&self, x: &ConePoint) -> f64 {
        self.f(x).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dist_p(&self, x: &ConePoint) -> f64 {
        self.p_from.to(&self.cone, x)
    }

    fn plus_margin(&self, f: &[f64]) -> f64 {
        if f.len() == 1 {
            return f[0];
        }
        let mut m = f64::INFINITY;
        for (i, fi) in f.iter().enumerate() {
            for (j, fj) in f.iter().enumerate() {
                if i != j {
                    m = m.min(fi - self.s * fj);
                }
            }
        }
        m
    }

    pub fn classify(&self, x: &ConePoint) -> PiClassification {
        let f = self.f(x);
        let plus_margin = self.plus_margin(&f);
        let minus_margin = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        PiClassification {
            in_pi_plus: plus_margin >= -TAU,
            plus_margin,
            in_pi_minus: minus_margin <= TAU,
            minus_margin,
            s: self.s,
        }
    }

    /// Halves `s` while a point past `R₁(x)` on the path to `b` fails to be
    /// strictly inside `Π₊ˢ` (checked on a few deterministic seeds).
    fn tune_s(&mut self) {
        if self.k() == 1 {
            return;
        }
        let r = 0.5 * (self.rho * self.delta).min(self.rho / 2.0);
        let Ok(net) = cone::ball_net(&self.cone, &self.p, r, r / 2.0) else { return };
        let seeds: Vec<_> = net.iter().step_by((net.len() / 12).max(1)).copied().collect();
        while self.s_halvings < 30 {
            let ok = seeds.iter().all(|x| match self.r1(x) {
                Ok(res) => self.strictly_inside_beyond(&res.point, 10).unwrap_or(false),
                Err(_) => true,
            });
            if ok {
                return;
            }
            self.s *= 0.5;
            self.s_halvings += 1;
        }
    }

    /// The `Π₊ˢ` margin increases strictly at `n` parameters past `y` toward `b`
    /// (within `B(p, 2ρ)`).
    pub fn strictly_inside_beyond(&self, y: &ConePoint, n: usize) -> Result<bool> {
        let g = cone::cone_geodesic(&self.cone, y, &self.b);
        let span = g.length.min(self.rho * self.delta);
        let mut prev = self.plus_margin(&self.f(y));
        for i in 1..=n {
            let q = g.point_at(&self.cone, span * i as f64 / n as f64);
            let m = self.plus_margin(&self.f(&q));
            if m <= prev || m <= 0.0 {
                return Ok(false);
            }
            prev = m;
        }
        Ok(true)
    }

    /// Moves `x` toward `b` until it enters `Π₊ˢ`.
    pub fn r1(&self, x: &ConePoint) -> Result<R1Result> {
        let r = self.dist_p(x);
        let bound = 2.0 * r / self.c;
        if self.plus_margin(&self.f(x)) >= 0.0 {
            return Ok(R1Result { point: *x, travel: 0.0, travel_bound: bound });
        }
        let g = cone::cone_geodesic(&self.cone, x, &self.b);
        let margin = |t: f64| self.plus_margin(&self.f(&g.point_at(&self.cone, t)));
        let step = (g.length / 400.0).min((r / 16.0).max(1e-6));
        let mut lo = 0.0;
        let mut hi = None;
        let mut t = 0.0;
        while t < g.length {
            let next = (t + step).min(g.length);
            if margin(next) >= 0.0 {
                hi = Some(next);
                break;
            }
            lo = next;
            t = next;
        }
        let Some(mut hi) = hi else {
            return Err(Error::Precondition("reached b without entering Π₊ˢ; lower c".into()));
        };
        while hi - lo > R1_TOL {
            let mid = 0.5 * (lo + hi);
            if margin(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(R1Result { point: g.point_at(&self.cone, hi), travel: hi, travel_bound: bound })
    }

    /// Nearest point of `Π₋ = ∩ B̄(a_i, |a_i p|)` to `x`.
    pub fn r2(&self, x: &ConePoint) -> Result<ConePoint> {
        let f = self.f(x);
        if f.iter().all(|v| *v <= 0.0) {
            return Ok(*x);
        }
        let y = if self.k() == 1 {
            self.project_ball(0, x)
        } else {
            let y0 = self.cyclic_projection(x)?;
            self.refine(x, y0)?
        };
        self.first_order_angle(x, &y)?;
        Ok(y)
    }

    fn project_ball(&self, i: usize, x: &ConePoint) -> ConePoint {
        let d = self.a_from[i].to(&self.cone, x);
        let excess = d - self.a_p[i];
        if excess <= 0.0 {
            return *x;
        }
        cone::cone_geodesic(&self.cone, x, &self.a_list[i]).point_at(&self.cone, excess)
    }

    fn cyclic_projection(&self, x: &ConePoint) -> Result<ConePoint> {
        let mut y = *x;
        for _ in 0..MAX_PROJECTIONS {
            if self.f(&y).iter().all(|v| *v <= 1e-13) {
                return Ok(y);
            }
            for i in 0..self.k() {
                y = self.project_ball(i, &y);
            }
        }
        Err(Error::Internal("cyclic projection onto Π₋ did not converge".into()))
    }

    fn feasible(&self, y: &ConePoint) -> bool {
        self.f(y).iter().all(|v| *v <= 1e-13)
    }

    /// Projected pattern search for the nearest feasible point.
    fn refine(&self, x: &ConePoint, mut y: ConePoint) -> Result<ConePoint> {
        let from_x = ConeDistanceFrom::new(&self.cone, x);
        let mut best = from_x.to(&self.cone, &y);
        let mut step = best.max(1e-3);
        while step > 1e-12 {
            let mut improved = false;
            for dir in self.probe_directions(&y, x)? {
                let z = cone::exp(&self.cone, &y, &dir, step)?;
                let z = if self.feasible(&z) { z } else { self.cyclic_projection(&z)? };
                let d = from_x.to(&self.cone, &z);
                if d < best - 1e-15 {
                    y = z;
                    best = d;
                    improved = true;
                    break;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        Ok(y)
    }

    fn probe_directions(&self, y: &ConePoint, x: &ConePoint) -> Result<Vec<GraphPoint>> {
        let model = cone::space_of_directions(&self.cone, y)?;
        let sigma = model.graph()?;
        let mut out = Vec::new();
        for target in std::iter::once(x).chain(self.a_list.iter()) {
            if cone::cone_distance(&self.cone, y, target) > 0.0 {
                out.extend(cone::direction_at(&self.cone, y, target)?);
            }
        }
        for v in 0..sigma.vertex_count() {
            out.push(GraphPoint::Vertex(v));
        }
        for (edge, e) in sigma.edges().iter().enumerate() {
            for i in 1..16 {
                out.push(sigma.point_on_edge(edge, e.len * i as f64 / 16.0)?);
            }
        }
        Ok(out)
    }

    /// `∠̃pyx`, erroring when it falls short of `π/2`.
    fn first_order_angle(&self, x: &ConePoint, y: &ConePoint) -> Result<Option<f64>> {
        let (py, yx, px) = (self.dist_p(y), cone::cone_distance(&self.cone, y, x), self.dist_p(x));
        if py < 1e-9 || yx < 1e-9 {
            return Ok(None);
        }
        let c = ((py * py + yx * yx - px * px) / (2.0 * py * yx)).clamp(-1.0, 1.0);
        let angle = c.acos();
        if angle < FRAC_PI_2 - FIRST_ORDER_SLACK {
            return Err(Error::Internal(format!("nearest point of Π₋ fails the first-order check (∠̃pyx = {angle})")));
        }
        Ok(Some(angle))
    }

    /// `R₂ ∘ R₁`.
    pub fn retract(&self, x: &ConePoint) -> Result<RetractReport> {
        let r1 = self.r1(x)?;
        let y = self.r2(&r1.point)?;
        let dist_in = self.dist_p(x);
        Ok(RetractReport {
            input: self.cone.to_user(x),
            after_r1: self.cone.to_user(&r1.point),
            output: self.cone.to_user(&y),
            travel: r1.travel,
            travel_bound: r1.travel_bound,
            residual: self.residual(&y),
            dist_p_input: dist_in,
            dist_p_output: self.dist_p(&y),
            range_bound: self.lipschitz * dist_in,
            first_order_angle: self.first_order_angle(&r1.point, &y)?,
            point: y,
        })
    }

    /// `n` fiber points from retracting a net of `B(p, r)`.
    pub fn sample_fiber(&self, r: f64, n: usize) -> Result<Vec<ConePoint>> {
        if self.k() >= 2 {
            return Err(Error::Precondition(format!(
                "k = {} equals dim T_p = 2: the fiber is locally the single point p",
                self.k()
            )));
        }
        if !(r > 0.0) || n == 0 {
            return Err(Error::InvalidArgument("sample_fiber needs r > 0 and n > 0".into()));
        }
        let seeds = self.seeds(r, n)?;
        let out: Vec<ConePoint> = seeds
            .par_iter()
            .map(|x| self.retract(x).map(|rep| rep.point))
            .collect::<Result<Vec<_>>>()?;
        let far = out.iter().map(|y| self.dist_p(y)).fold(0.0, f64::max);
        if far < r / (2.0 * self.lipschitz) {
            return Err(Error::Internal(format!(
                "fiber samples stay within {far} of p, below r/(2L) = {}",
                r / (2.0 * self.lipschitz)
            )));
        }
        Ok(out)
    }

    /// `n` evenly spread points of the boundary-heavy net of `B(p, r)`.
    fn seeds(&self, r: f64, n: usize) -> Result<Vec<ConePoint>> {
        let mut h = r / 4.0;
        let mut net = cone::ball_net(&self.cone, &self.p, r, h)?;
        while net.len() < n && h > r * 1e-4 {
            h *= 0.5;
            net = cone::ball_net(&self.cone, &self.p, r, h)?;
        }
        // prefer the outer shell so the witness condition is informative
        net.sort_by(|a, b| self.dist_p(b).total_cmp(&self.dist_p(a)).then(a.base.cmp_key(&b.base)));
        let shell: Vec<_> = net.iter().filter(|x| self.dist_p(x) >= 0.75 * r).copied().collect();
        let pool = if shell.len() >= n { shell } else { net };
        let stride = pool.len() as f64 / n as f64;
        Ok((0..n.min(pool.len())).map(|i| pool[(i as f64 * stride) as usize]).collect())
    }

    /// Discrete contraction of sampled fiber points to `p` inside the fiber.
    pub fn contract_fiber_ball(&self, r: f64, points: usize, steps: usize) -> Result<ContractionTrace> {
        let fiber = self.sample_fiber(r, points)?;
        self.contract_points(&fiber, r, steps)
    }

    pub fn contract_points(&self, fiber: &[ConePoint], r: f64, steps: usize) -> Result<ContractionTrace> {
        let steps = steps.max(1);
        let rows: Vec<Vec<TraceRow>> = fiber
            .par_iter()
            .enumerate()
            .map(|(id, x)| {
                let g = cone::cone_geodesic(&self.cone, x, &self.p);
                (0..=steps)
                    .map(|j| {
                        let t = j as f64 / steps as f64;
                        let z = g.point_at(&self.cone, t * g.length);
                        let y = self.retract(&z)?.point;
                        Ok(TraceRow::new(&self.cone, id, t, &y, self.residual(&y), self.dist_p(&y)))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<TraceRow> = rows.into_iter().flatten().collect();
        let max_distance = rows.iter().map(|r| r.dist_p).fold(0.0, f64::max);
        let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
        let bound = self.lipschitz * r + FIBER_TOL;
        Ok(ContractionTrace {
            points: fiber.len(),
            steps,
            bound,
            max_distance,
            max_residual,
            within_bounds: max_distance <= bound && max_residual <= FIBER_TOL,
            rows,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub point_id: usize,
    pub t: f64,
    pub vertex: Option<usize>,
    pub edge: Option<usize>,
    pub offset: Option<f64>,
    pub radius: f64,
    pub residual: f64,
    pub dist_p: f64,
}

impl TraceRow {
    fn new(cone: &ConeSpace, point_id: usize, t: f64, y: &ConePoint, residual: f64, dist_p: f64) -> Self {
        let d = cone.to_user(y);
        Self { point_id, t, vertex: d.vertex, edge: d.edge, offset: d.offset, radius: d.radius, residual, dist_p }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionTrace {
    pub points: usize,
    pub steps: usize,
    /// `L r + 10⁻⁶`.
    pub bound: f64,
    pub max_distance: f64,
    pub max_residual: f64,
    pub within_bounds: bool,
    #[serde(skip)]
    pub rows: Vec<TraceRow>,
}

impl ContractionTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("point_id,t,vertex,edge,offset,radius,residual\n");
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:e}\n",
                r.point_id,
                r.t,
                opt(r.vertex.map(|v| v.to_string())),
                opt(r.edge.map(|v| v.to_string())),
                opt(r.offset.map(|v| v.to_string())),
                r.radius,
                r.residual
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SphericalGraph, UserPoint};
    use std::f64::consts::PI;

    fn plane() -> ConeSpace {
        ConeSpace::new(SphericalGraph::circle(2.0 * PI).unwrap())
    }

    fn xy(k: &ConeSpace, x: f64, y: f64) -> ConePoint {
        let r = x.hypot(y);
        if r == 0.0 {
            return ConePoint::apex();
        }
        let a = y.atan2(x).rem_euclid(2.0 * PI);
        k.point(k.base().from_user(&UserPoint::Edge { edge: 0, offset: a }).unwrap(), r).unwrap()
    }

    fn to_xy(k: &ConeSpace, p: &ConePoint) -> (f64, f64) {
        let a = match k.base().to_user(&p.base) {
            UserPoint::Edge { offset, .. } => offset,
            UserPoint::Vertex { .. } => 0.0,
        };
        (p.radius * a.cos(), p.radius * a.sin())
    }

    fn plane_spec() -> FiberSpec {
        let k = plane();
        let a = xy(&k, 3.0, 0.0);
        let b = xy(&k, -2.0, 0.0);
        FiberSpec::new(k.clone(), k.apex(), vec![a], b, 0.1, 0.1, 1.0, None).unwrap()
    }

    #[test]
    fn constants() {
        assert_eq!(default_constants(1.0).unwrap(), (1.0 / 3.0, 3.0));
        let (s, l) = default_constants(0.5).unwrap();
        assert!((s - 0.2).abs() < 1e-15 && (l - 5.0).abs() < 1e-15);
        assert!(default_constants(0.0).is_err());
        let spec = plane_spec();
        assert_eq!(spec.c, 1.0);
        assert_eq!(spec.lipschitz, 3.0);
    }

    #[test]
    fn classification() {
        let spec = plane_spec();
        let k = &spec.cone;
        let at_p = spec.classify(&k.apex());
        assert!(at_p.on_fiber() && at_p.plus_margin.abs() < 1e-15 && at_p.minus_margin.abs() < 1e-15);
        let c = spec.classify(&xy(k, 0.3, 0.4));
        assert!((c.plus_margin - (7.45f64.sqrt() - 3.0)).abs() < 1e-12);
        assert!(c.in_pi_minus && !c.in_pi_plus);
        let c = spec.classify(&xy(k, -1.0, 0.0));
        assert!((c.plus_margin - 1.0).abs() < 1e-12);
        assert!(c.in_pi_plus && !c.in_pi_minus);
    }

    #[test]
    fn plane_r1_and_r2() {
        let spec = plane_spec();
        let k = &spec.cone;
        let r = spec.r1(&xy(k, 0.3, 0.4)).unwrap();
        let (x, y) = to_xy(k, &r.point);
        assert!((x - 0.0206).abs() < 1e-4 && (y - 0.3514).abs() < 1e-4, "{x} {y}");
        assert!((r.travel - 0.2836).abs() < 1e-4);
        assert!(r.travel <= r.travel_bound);
        let id = spec.r1(&xy(k, -1.0, 0.0)).unwrap();
        assert_eq!(id.travel, 0.0);
        assert_eq!(spec.r1(&k.apex()).unwrap().point, k.apex());

        let y = spec.r2(&r.point).unwrap();
        assert!(cone::cone_distance(k, &y, &r.point) < 1e-9);
        let y = spec.r2(&xy(k, -1.0, 0.0)).unwrap();
        assert!(y.radius < 1e-12);
        let inside = xy(k, 0.3, 0.4);
        assert_eq!(spec.r2(&inside).unwrap(), inside);
    }

    #[test]
    fn plane_retract() {
        let spec = plane_spec();
        let k = &spec.cone;
        let rep = spec.retract(&xy(k, 0.3, 0.4)).unwrap();
        let (x, y) = to_xy(k, &rep.point);
        assert!((x - 0.0206).abs() < 1e-4 && (y - 0.3514).abs() < 1e-4);
        assert!(rep.residual < 1e-6);
        assert!((rep.dist_p_output - 0.352).abs() < 1e-3);
        assert!(rep.dist_p_output <= 3.0 * 0.5);
        assert_eq!(spec.retract(&k.apex()).unwrap().point, k.apex());
    }

    #[test]
    fn plane_closed_form() {
        let spec = plane_spec();
        let k = &spec.cone;
        for i in 0..60 {
            let a = 2.0 * PI * i as f64 / 60.0;
            let r = 0.05 + 0.4 * ((i * 7) % 11) as f64 / 11.0;
            let (x, y) = (r * a.cos(), r * a.sin());
            let got = to_xy(k, &spec.retract(&xy(k, x, y)).unwrap().point);
            let expect = if (x - 3.0).hypot(y) < 3.0 {
                // walk toward (-2, 0) until |q - (3,0)| = 3
                let (dx, dy) = (-2.0 - x, -y);
                let n = dx.hypot(dy);
                let (ux, uy) = (dx / n, dy / n);
                let (wx, wy) = (x - 3.0, y);
                let bq = wx * ux + wy * uy;
                let t = -bq + (bq * bq - (wx * wx + wy * wy - 9.0)).sqrt();
                (x + t * ux, y + t * uy)
            } else {
                let (wx, wy) = (x - 3.0, y);
                let n = wx.hypot(wy);
                (3.0 + 3.0 * wx / n, 3.0 * wy / n)
            };
            assert!((got.0 - expect.0).hypot(got.1 - expect.1) <= 1e-8, "{got:?} vs {expect:?}");
        }
    }

    #[test]
    fn plane_fiber_samples_and_contraction() {
        let spec = plane_spec();
        let k = &spec.cone;
        let pts = spec.sample_fiber(0.5, 12).unwrap();
        assert_eq!(pts.len(), 12);
        for p in &pts {
            let (x, y) = to_xy(k, p);
            assert!(((x - 3.0).hypot(y) - 3.0).abs() < 1e-6);
        }
        let trace = spec.contract_points(&pts, 0.5, 8).unwrap();
        assert!(trace.within_bounds);
        for row in &trace.rows {
            assert!(row.residual < 1e-6);
        }
        let flat = spec.contract_points(&[k.apex()], 0.5, 4).unwrap();
        assert!(flat.rows.iter().all(|r| r.dist_p == 0.0));
    }

    #[test]
    fn plane_k2_has_point_fibers() {
        let k = plane();
        let a = vec![xy(&k, 3.0, 0.0), xy(&k, 0.0, 3.0)];
        let b = xy(&k, -2.0, -2.0);
        let spec = FiberSpec::new(k.clone(), k.apex(), a, b, 0.1, 0.1, 1.0, None).unwrap();
        assert!(matches!(spec.sample_fiber(0.3, 4), Err(Error::Precondition(_))));
        // the fiber is {p}: every retraction lands on p
        for &(x, y) in &[(0.1, 0.05), (-0.1, 0.2), (0.2, -0.2)] {
            let rep = spec.retract(&xy(&k, x, y)).unwrap();
            assert!(rep.dist_p_output < 1e-6, "{rep:?}");
        }
    }

    #[test]
    fn apex_retractions_land_on_fiber() {
        let k = ConeSpace::new(SphericalGraph::circle(2.0 * PI + 0.5).unwrap());
        let at = |t: f64, r: f64| k.point(k.base().from_user(&UserPoint::Edge { edge: 0, offset: t }).unwrap(), r).unwrap();
        let spec = FiberSpec::new(k.clone(), k.apex(), vec![at(0.0, 1.0)], at(4.45, 1.0), 0.15, 0.2, 0.3, None).unwrap();
        for x in cone::ball_net(&k, &k.apex(), 0.05, 0.01).unwrap() {
            let rep = spec.retract(&x).unwrap();
            assert!(rep.residual <= 1e-6);
            assert!(rep.dist_p_output <= spec.lipschitz * 0.05 + 1e-6);
        }
        let trace = spec.contract_fiber_ball(0.05, 8, 6).unwrap();
        assert!(trace.within_bounds, "{trace:?}");
    }
}
