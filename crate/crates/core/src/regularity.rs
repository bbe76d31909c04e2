//! Noncriticality checks for collections of directions and for distance maps
//! on cones, with the searches that produce regular directions and the
//! auxiliary point `v`.
//!
//! Checks never fail for a bad verdict: margins are measured and reported,
//! and the verdict is derived from the caller's `(ε, δ)`.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::Serialize;

use crate::cone::{self, ComparisonModel, ConeDistanceFrom, DirectionModel};
use crate::error::{Error, Result};
use crate::geodesy::{self, DiscretePiSet, PiSpace};
use crate::model::{ConePoint, ConeSpace, GraphPoint, SphericalGraph, TAU};
use crate::pl;

/// Slack on the derived inequalities of a passing collection.
const REMARK_SLACK: f64 = 1e-9;

/// Directions `ξ_1..ξ_k` and an optional regular direction `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct Collection<P> {
    pub xis: Vec<P>,
    pub eta: Option<P>,
}

impl<P> Collection<P> {
    pub fn new(xis: Vec<P>, eta: Option<P>) -> Self {
        Self { xis, eta }
    }

    pub fn k(&self) -> usize {
        self.xis.len()
    }
}

/// One consequence of a passing collection that follows from the triangle
/// inequality; a failure here falsifies the implementation.
#[derive(Debug, Clone, Serialize)]
pub struct Consequence {
    pub name: &'static str,
    pub applicable: bool,
    pub holds: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginReport {
    pub k: usize,
    pub eps: f64,
    pub delta: f64,
    /// `min_i (π/2 − |ξ_i η|‾)`, or its comparison-angle analogue.
    pub eps_margin: f64,
    /// `max_{i≠j} |ξ_i ξ_j|‾ − π/2`; absent when `k = 1`.
    pub delta_margin: Option<f64>,
    pub verdict: bool,
    pub max_pair_antipodal: Option<f64>,
    pub max_eta_antipodal: f64,
    pub consequences: Vec<Consequence>,
    /// Number of direction combinations examined (worst case reported).
    pub combinations: usize,
    /// `k ≤ dim T_p` at a cone point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension_ok: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Net point realising the worst slack (ρ-form checks only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_point: Option<crate::model::ConePointDescription>,
    /// Point-form checks over `B(p, ρδ)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub companion: Option<Box<MarginReport>>,
}

fn verdict(eps_margin: f64, delta_margin: Option<f64>, eps: f64, delta: f64) -> bool {
    eps_margin > eps && delta_margin.is_none_or(|m| m < delta)
}

impl MarginReport {
    fn from_margins(k: usize, eps: f64, delta: f64, eps_margin: f64, delta_margin: Option<f64>) -> Self {
        Self {
            k,
            eps,
            delta,
            eps_margin,
            delta_margin,
            verdict: verdict(eps_margin, delta_margin, eps, delta),
            max_pair_antipodal: delta_margin.map(|m| m + FRAC_PI_2),
            max_eta_antipodal: FRAC_PI_2 - eps_margin,
            consequences: Vec::new(),
            combinations: 1,
            dimension_ok: None,
            resolution: None,
            samples: None,
            worst_point: None,
            companion: None,
        }
    }

    /// Keeps the worse of two reports for the same `(ε, δ)`.
    fn worst_of(mut self, other: MarginReport) -> MarginReport {
        let combinations = self.combinations + other.combinations;
        let eps_margin = self.eps_margin.min(other.eps_margin);
        let delta_margin = match (self.delta_margin, other.delta_margin) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        self.consequences.extend(other.consequences);
        let mut out = MarginReport::from_margins(self.k, self.eps, self.delta, eps_margin, delta_margin);
        out.consequences = merge_consequences(self.consequences);
        out.combinations = combinations;
        out
    }

    pub fn consequences_hold(&self) -> bool {
        self.consequences.iter().all(|c| c.holds)
    }
}

fn merge_consequences(all: Vec<Consequence>) -> Vec<Consequence> {
    let mut out: Vec<Consequence> = Vec::new();
    for c in all {
        match out.iter_mut().find(|o| o.name == c.name) {
            Some(o) => {
                o.applicable |= c.applicable;
                o.holds &= c.holds;
                o.margin = o.margin.min(c.margin);
            }
            None => out.push(c),
        }
    }
    out
}

fn check_params(eps: f64, delta: f64) -> Result<()> {
    if !(eps.is_finite() && delta.is_finite() && eps >= 0.0 && delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} and delta = {delta} must be finite and non-negative")));
    }
    Ok(())
}

/// Checks whether `ξ_1..ξ_k` is `(ε, δ)`-noncritical with regular direction `η`.
pub fn check_collection<S: PiSpace>(space: &S, coll: &Collection<S::Point>, eps: f64, delta: f64) -> Result<MarginReport> {
    check_params(eps, delta)?;
    let eta = coll
        .eta
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("the collection has no regular direction η".into()))?;
    if coll.xis.is_empty() {
        return Err(Error::InvalidArgument("the collection is empty".into()));
    }
    space.contains(eta)?;
    for xi in &coll.xis {
        space.contains(xi)?;
    }
    let k = coll.k();
    let mut eta_ad = Vec::with_capacity(k);
    for xi in &coll.xis {
        eta_ad.push(space.antipodal(xi, eta)?);
    }
    let mut pair_max: Option<f64> = None;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                let v = space.antipodal(&coll.xis[i], &coll.xis[j])?;
                pair_max = Some(pair_max.map_or(v, |m: f64| m.max(v)));
            }
        }
    }
    let eps_margin = eta_ad.iter().map(|a| FRAC_PI_2 - a).fold(f64::INFINITY, f64::min);
    let delta_margin = pair_max.map(|m| m - FRAC_PI_2);
    let mut report = MarginReport::from_margins(k, eps, delta, eps_margin, delta_margin);
    report.consequences = consequences(space, coll, eta, report.verdict, eps, delta);
    Ok(report)
}

fn consequences<S: PiSpace>(space: &S, coll: &Collection<S::Point>, eta: &S::Point, passed: bool, eps: f64, delta: f64) -> Vec<Consequence> {
    let k = coll.k();
    let mut pair_min = f64::INFINITY;
    let mut pair_max = f64::NEG_INFINITY;
    for i in 0..k {
        for j in (i + 1)..k {
            let d = space.truncated_distance(&coll.xis[i], &coll.xis[j]);
            pair_min = pair_min.min(d);
            pair_max = pair_max.max(d);
        }
    }
    let eta_d: Vec<f64> = coll.xis.iter().map(|x| space.truncated_distance(x, eta)).collect();
    let eta_min = eta_d.iter().copied().fold(f64::INFINITY, f64::min);
    let eta_max = eta_d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let strong = passed && k >= 2 && delta < eps / 2.0;
    let mut out = Vec::new();
    let mut push = |name, applicable: bool, margin: f64| {
        out.push(Consequence { name, applicable, holds: !applicable || margin > -REMARK_SLACK, margin: if applicable { margin } else { f64::INFINITY } });
    };
    push("pair_distance_lower", passed && k >= 2, pair_min - (FRAC_PI_2 - delta));
    push("eta_distance_lower", passed, eta_min - (FRAC_PI_2 + eps));
    push("pair_distance_upper", strong, (PI - 2.0 * eps) - pair_max);
    push("eta_distance_upper", strong, (PI - eps / 2.0) - eta_max);
    out
}

/// Best regular direction: maximises `min_i (π/2 − |ξ_i η|‾)` over `η`.
pub fn search_regular_direction<S: PiSpace>(space: &S, xis: &[S::Point]) -> Result<(S::Point, f64)>
where
    S: RegularSearch,
{
    if xis.is_empty() {
        return Err(Error::InvalidArgument("need at least one ξ".into()));
    }
    for xi in xis {
        space.contains(xi)?;
    }
    space.best_eta(xis)
}

/// Space-specific fast path for [`search_regular_direction`].
pub trait RegularSearch: PiSpace {
    fn best_eta(&self, xis: &[Self::Point]) -> Result<(Self::Point, f64)>;
}

impl RegularSearch for SphericalGraph {
    fn best_eta(&self, xis: &[GraphPoint]) -> Result<(GraphPoint, f64)> {
        let preps = xis.iter().map(|x| geodesy::PreparedSource::new(self, x)).collect::<Result<Vec<_>>>()?;
        let objective = |eta: &GraphPoint| {
            let field = self.distance_field(eta);
            preps
                .iter()
                .map(|p| FRAC_PI_2 - geodesy::antipodal_value(self, p, &field))
                .fold(f64::INFINITY, f64::min)
        };
        Ok(self.maximize(&objective))
    }
}

impl RegularSearch for DiscretePiSet {
    fn best_eta(&self, xis: &[usize]) -> Result<(usize, f64)> {
        Ok(self.maximize(&|eta: &usize| {
            xis.iter().map(|x| FRAC_PI_2 - self.antipodal_distance(*x, *eta)).fold(f64::INFINITY, f64::min)
        }))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FindVReport<P> {
    pub v: P,
    pub dist_xi1: f64,
    pub dist_eta: f64,
    /// `|vξ_i| − π/2` for `i ≥ 2`.
    pub equality_residuals: Vec<f64>,
    /// `π/2 − |vξ_1|`.
    pub m1: f64,
    /// `|vη| − π/2`.
    pub m2: f64,
    /// How `v` was obtained: `xi1`, `level_set` or `path_bisection`.
    pub method: &'static str,
}

/// Finds `v` with `|vξ_1| < π/2`, `|vξ_i| = π/2` for `i ≥ 2` and `|vη| > π/2`.
pub fn find_v<S: PiSpace + FindVPath>(
    space: &S,
    coll: &Collection<S::Point>,
    eps: f64,
    delta: f64,
) -> Result<FindVReport<S::Point>> {
    let report = check_collection(space, coll, eps, delta)?;
    if !report.verdict {
        return Err(Error::Precondition(format!(
            "collection is not ({eps}, {delta})-noncritical (eps margin {:.6}, delta margin {:?})",
            report.eps_margin, report.delta_margin
        )));
    }
    let eta = coll.eta.expect("checked above");
    let xi1 = coll.xis[0];
    let make = |v: S::Point, method| {
        let d1 = space.truncated_distance(&v, &xi1);
        let de = space.truncated_distance(&v, &eta);
        let residuals: Vec<f64> = coll.xis[1..].iter().map(|x| space.truncated_distance(&v, x) - FRAC_PI_2).collect();
        FindVReport { v, dist_xi1: d1, dist_eta: de, equality_residuals: residuals, m1: FRAC_PI_2 - d1, m2: de - FRAC_PI_2, method }
    };
    let valid = |r: &FindVReport<S::Point>| r.m1 > 0.0 && r.m2 > 0.0 && r.equality_residuals.iter().all(|e| e.abs() <= TAU);
    if coll.k() == 1 {
        let r = make(xi1, "xi1");
        return if valid(&r) {
            Ok(r)
        } else {
            Err(Error::Internal(format!("falsifying instance: v = ξ1 gives m1 = {}, m2 = {}", r.m1, r.m2)))
        };
    }
    let pick = |cands: Vec<S::Point>, method| {
        cands
            .into_iter()
            .map(|v| make(v, method))
            .filter(|r| valid(r))
            .fold(None, |best: Option<FindVReport<S::Point>>, r| match best {
                Some(b) if r.m1.min(r.m2) <= b.m1.min(b.m2) + 1e-12 => Some(b),
                _ => Some(r),
            })
    };
    let best = pick(space.distance_level_set(&coll.xis[1], FRAC_PI_2), "level_set")
        .or_else(|| pick(space.path_roots(&xi1, &eta, &coll.xis[1]), "path_bisection"));
    best.ok_or_else(|| Error::Internal("falsifying instance: no v satisfies the constraints at tolerance".into()))
}

/// Fallback for [`find_v`]: points on a shortest path `ξ_1 → η` at
/// distance π/2 from `target`.
pub trait FindVPath: PiSpace {
    fn path_roots(&self, from: &Self::Point, to: &Self::Point, target: &Self::Point) -> Vec<Self::Point>;
}

impl FindVPath for SphericalGraph {
    fn path_roots(&self, from: &GraphPoint, to: &GraphPoint, target: &GraphPoint) -> Vec<GraphPoint> {
        let path = geodesy::shortest_path(self, from, to);
        let field = self.distance_field(target);
        let verts = pl::trace(|s| field.at(self, &path.point_at(self, s)).min(PI), 0.0, path.length, geodesy::TRACE_CELL);
        pl::level_crossings(&verts, FRAC_PI_2)
            .into_iter()
            .map(|s| {
                // polish the root by bisection on the exact function
                let g = |s: f64| field.at(self, &path.point_at(self, s)).min(PI) - FRAC_PI_2;
                let (mut lo, mut hi) = ((s - 1e-6).max(0.0), (s + 1e-6).min(path.length));
                if g(lo) * g(hi) < 0.0 {
                    for _ in 0..80 {
                        let mid = 0.5 * (lo + hi);
                        if g(lo) * g(mid) <= 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    path.point_at(self, 0.5 * (lo + hi))
                } else {
                    path.point_at(self, s)
                }
            })
            .collect()
    }
}

impl FindVPath for DiscretePiSet {
    fn path_roots(&self, _: &usize, _: &usize, _: &usize) -> Vec<usize> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InductionCase {
    Near,
    Far,
}

#[derive(Debug, Clone, Serialize)]
pub struct InductionReport {
    /// Size of the space of directions at `x`.
    pub directions: usize,
    /// Direction indices of each `ξ_i` at `x`, then those of `η`.
    pub xi_directions: Vec<Vec<usize>>,
    pub eta_directions: Vec<usize>,
    /// Worst case over every choice of directions.
    pub report: MarginReport,
}

/// Passes a collection in a graph to the space of directions at `x`.
pub fn induction_step(
    graph: &SphericalGraph,
    coll: &Collection<GraphPoint>,
    x: &GraphPoint,
    case: InductionCase,
    eps: f64,
    delta: f64,
) -> Result<InductionReport> {
    check_params(eps, delta)?;
    let eta = coll.eta.ok_or_else(|| Error::InvalidArgument("the collection has no regular direction η".into()))?;
    graph.check_point(x)?;
    let all: Vec<GraphPoint> = coll.xis.iter().copied().chain(std::iter::once(eta)).collect();
    for p in &all {
        let d = graph.intrinsic_distance(x, p).min(PI);
        let ok = match case {
            InductionCase::Near => d < FRAC_PI_2 + delta,
            InductionCase::Far => d >= FRAC_PI_2 - delta,
        };
        if !ok {
            return Err(Error::Precondition(format!(
                "{case:?} case needs every point {} π/2 ± δ from x; found distance {d}",
                if case == InductionCase::Near { "within" } else { "beyond" }
            )));
        }
    }
    let sigma = geodesy::direction_space_graph(graph, x)?;
    let xi_dirs = coll.xis.iter().map(|p| geodesy::direction_of(graph, x, p)).collect::<Result<Vec<_>>>()?;
    let eta_dirs = geodesy::direction_of(graph, x, &eta)?;
    let mut worst: Option<MarginReport> = None;
    for combo in combinations(&xi_dirs) {
        for &e in &eta_dirs {
            let derived = Collection::new(combo.clone(), Some(e));
            let r = check_collection(&sigma, &derived, eps, delta)?;
            worst = Some(match worst {
                None => r,
                Some(w) => w.worst_of(r),
            });
        }
    }
    Ok(InductionReport {
        directions: sigma.len(),
        xi_directions: xi_dirs,
        eta_directions: eta_dirs,
        report: worst.expect("at least one combination"),
    })
}

/// Cartesian product of option lists.
pub(crate) fn combinations<T: Clone>(options: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for opts in options {
        let mut next = Vec::with_capacity(out.len() * opts.len());
        for prefix in &out {
            for o in opts {
                let mut v = prefix.clone();
                v.push(o.clone());
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Directions at `p` of each target, as lists (several when the shortest
/// path is not unique).
fn direction_sets(cone: &ConeSpace, p: &ConePoint, targets: &[ConePoint]) -> Result<Vec<Vec<GraphPoint>>> {
    targets.iter().map(|a| cone::direction_at(cone, p, a)).collect()
}

/// Checks the distance map `(|a_1·|, …, |a_k·|)` at `p`, with `b` supplying the
/// regular direction.
pub fn check_map_at_point(
    cone: &ConeSpace,
    p: &ConePoint,
    a_list: &[ConePoint],
    b: &ConePoint,
    eps: f64,
    delta: f64,
) -> Result<MarginReport> {
    check_params(eps, delta)?;
    if a_list.is_empty() {
        return Err(Error::InvalidArgument("need at least one a_i".into()));
    }
    for (i, a) in a_list.iter().enumerate() {
        if cone::cone_distance(cone, p, a) <= 0.0 {
            return Err(Error::InvalidArgument(format!("a_{} coincides with p", i + 1)));
        }
    }
    if cone::cone_distance(cone, p, b) <= 0.0 {
        return Err(Error::InvalidArgument("b coincides with p".into()));
    }
    let model = cone::space_of_directions(cone, p)?;
    let sigma = model.graph()?;
    let a_dirs = direction_sets(cone, p, a_list)?;
    let b_dirs = cone::direction_at(cone, p, b)?;
    let mut worst: Option<MarginReport> = None;
    for combo in combinations(&a_dirs) {
        for &e in &b_dirs {
            let r = check_collection(sigma, &Collection::new(combo.clone(), Some(e)), eps, delta)?;
            worst = Some(match worst {
                None => r,
                Some(w) => w.worst_of(r),
            });
        }
    }
    let mut report = worst.expect("at least one combination");
    report.dimension_ok = Some(a_list.len() <= 2);
    Ok(report)
}

/// Comparison-angle form of noncriticality on an `h`-net of `B(p, ρ)`.
#[allow(clippy::too_many_arguments)]
pub fn check_map_rho(
    cone: &ConeSpace,
    p: &ConePoint,
    a_list: &[ConePoint],
    b: &ConePoint,
    eps: f64,
    delta: f64,
    rho: f64,
    h: f64,
    companion: bool,
) -> Result<MarginReport> {
    check_params(eps, delta)?;
    if a_list.is_empty() {
        return Err(Error::InvalidArgument("need at least one a_i".into()));
    }
    let a_from: Vec<ConeDistanceFrom> = a_list.iter().map(|a| ConeDistanceFrom::new(cone, a)).collect();
    let b_from = ConeDistanceFrom::new(cone, b);
    let a_p: Vec<f64> = a_from.iter().map(|a| a.to(cone, p)).collect();
    let b_p = b_from.to(cone, p);
    if let Some(i) = a_p.iter().position(|&d| d <= rho) {
        return Err(Error::Precondition(format!("|a_{} p| = {} is not larger than rho = {rho}", i + 1, a_p[i])));
    }
    if b_p <= rho {
        return Err(Error::Precondition(format!("|b p| = {b_p} is not larger than rho = {rho}")));
    }
    let net = cone::ball_net(cone, p, rho, h)?;
    if net.is_empty() {
        return Err(Error::Internal("empty net".into()));
    }
    let p_from = ConeDistanceFrom::new(cone, p);
    let k = a_list.len();
    // (eps sum, delta sum) per net point
    let sums: Vec<(f64, Option<f64>)> = net
        .par_iter()
        .map(|x| {
            let px = p_from.to(cone, x);
            let angle = |from: &ConeDistanceFrom, dp: f64| {
                let dx = from.to(cone, x);
                cone::comparison_angle(dp, px, dx, ComparisonModel::Euclidean).unwrap_or_else(|_| {
                    // rounding beyond the triangle slack: clamp the cosine directly
                    let c = (dp * dp + px * px - dx * dx) / (2.0 * dp * px);
                    c.clamp(-1.0, 1.0).acos()
                })
            };
            let a_ang: Vec<f64> = a_from.iter().zip(&a_p).map(|(a, &d)| angle(a, d)).collect();
            let b_ang = angle(&b_from, b_p);
            let eps_sum = a_ang.iter().map(|a| a + b_ang).fold(f64::NEG_INFINITY, f64::max);
            let mut pair: Option<f64> = None;
            for i in 0..k {
                for j in (i + 1)..k {
                    let s = a_ang[i] + a_ang[j];
                    pair = Some(pair.map_or(s, |m: f64| m.max(s)));
                }
            }
            (eps_sum, pair)
        })
        .collect();
    let (worst_idx, worst_eps) = sums
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s.0))
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let worst_pair = sums.iter().filter_map(|s| s.1).fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |m| m.max(v))));
    let three_half = 1.5 * PI;
    let mut report = MarginReport::from_margins(k, eps, delta, three_half - worst_eps, worst_pair.map(|m| m - three_half));
    report.max_pair_antipodal = None;
    report.max_eta_antipodal = worst_eps;
    report.combinations = net.len();
    report.resolution = Some(h);
    report.samples = Some(net.len());
    report.worst_point = Some(cone.to_user(&net[worst_idx]));
    report.dimension_ok = Some(k <= 2);
    if companion {
        let inner = rho * delta;
        if inner > 0.0 {
            let step = h.min(inner);
            let mut worst: Option<MarginReport> = None;
            let mut pts = vec![*p];
            pts.extend(cone::ball_net(cone, p, inner, step)?);
            for x in &pts {
                let r = check_map_at_point(cone, x, a_list, b, eps, delta)?;
                worst = Some(match worst {
                    None => r,
                    Some(w) => w.worst_of(r),
                });
            }
            let mut w = worst.expect("net contains p");
            w.samples = Some(pts.len());
            w.resolution = Some(step);
            report.companion = Some(Box::new(w));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct PointCertificate {
    pub point: crate::model::ConePointDescription,
    pub certified: bool,
    /// `min_i (−f_i′(ξ_i)) − ε`, over the best `ξ_i` satisfying the equalities.
    pub first_margin: f64,
    /// `min_j f_j′(η) − ε` at the best `η`.
    pub second_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub eps: f64,
    pub samples: usize,
    pub certified: usize,
    pub fraction: f64,
    pub worst_first_margin: f64,
    pub worst_second_margin: f64,
    pub points: Vec<PointCertificate>,
}

/// Directional-derivative certificate for `f = (|a_1·| − |a_1 p|, …)`:
/// (1) each `ξ_i` has `f_i′(ξ_i) < −ε` and `f_j′(ξ_i) = 0` for `j ≠ i`;
/// (2) some `η` has `ε < f_j′(η) < 1/ε` for all `j`.
pub fn differential_certificate(
    cone: &ConeSpace,
    sample: &[ConePoint],
    a_list: &[ConePoint],
    b: &ConePoint,
    eps: f64,
) -> Result<CertificateReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} must lie in (0, 1)")));
    }
    if a_list.is_empty() {
        return Err(Error::InvalidArgument("need at least one a_i".into()));
    }
    let points: Vec<PointCertificate> = sample
        .par_iter()
        .map(|p| certify_point(cone, p, a_list, b, eps))
        .collect::<Result<Vec<_>>>()?;
    let certified = points.iter().filter(|c| c.certified).count();
    Ok(CertificateReport {
        eps,
        samples: points.len(),
        certified,
        fraction: if points.is_empty() { 0.0 } else { certified as f64 / points.len() as f64 },
        worst_first_margin: points.iter().map(|c| c.first_margin).fold(f64::INFINITY, f64::min),
        worst_second_margin: points.iter().map(|c| c.second_margin).fold(f64::INFINITY, f64::min),
        points,
    })
}

fn certify_point(cone: &ConeSpace, p: &ConePoint, a_list: &[ConePoint], b: &ConePoint, eps: f64) -> Result<PointCertificate> {
    for a in a_list.iter().chain(std::iter::once(b)) {
        if cone::cone_distance(cone, p, a) <= 0.0 {
            return Err(Error::Precondition("sample point coincides with a_i or b".into()));
        }
    }
    let model: DirectionModel = cone::space_of_directions(cone, p)?;
    let sigma = model.graph()?;
    let dirs = direction_sets(cone, p, a_list)?;
    let fields: Vec<Vec<_>> = dirs.iter().map(|ds| ds.iter().map(|d| sigma.distance_field(d)).collect()).collect();
    // angle from the direction set of a_j: the closest branch governs f_j′
    let angle = |j: usize, xi: &GraphPoint| fields[j].iter().map(|f| f.at(sigma, xi).min(PI)).fold(PI, f64::min);
    let deriv = |j: usize, xi: &GraphPoint| -angle(j, xi).cos();
    let k = a_list.len();
    let mut first = f64::INFINITY;
    for i in 0..k {
        let mut best = f64::NEG_INFINITY;
        let candidates: Vec<GraphPoint> = if k == 1 {
            dirs[0].clone()
        } else {
            let j0 = if i == 0 { 1 } else { 0 };
            let mut c = Vec::new();
            for f in &fields[j0] {
                c.extend(geodesy::level_set(sigma, f, FRAC_PI_2));
            }
            c
        };
        for xi in candidates {
            let ok = (0..k).filter(|&j| j != i).all(|j| deriv(j, &xi).abs() <= TAU);
            if ok {
                best = best.max(-deriv(i, &xi));
            }
        }
        first = first.min(best - eps);
    }
    let (_, second) = sigma.maximize(&|eta: &GraphPoint| (0..k).map(|j| deriv(j, eta)).fold(f64::INFINITY, f64::min));
    let second_margin = second.min(1.0 / eps - 1e-12) - eps;
    Ok(PointCertificate {
        point: cone.to_user(p),
        certified: first > 0.0 && second_margin > 0.0,
        first_margin: first,
        second_margin,
    })
}
