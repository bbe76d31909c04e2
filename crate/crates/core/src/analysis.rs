//! Empirical checks of the theorem-level statements: openness and
//! bi-Lipschitz bounds of noncritical maps, noncriticality on fiber spheres,
//! the threshold sweep on cones over long circles, and the circle-to-circle
//! sphere map.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cone::{self, ConeDistanceFrom};
use crate::error::{Error, Result};
use crate::geodesy::{self, PiSpace, PreparedSource};
use crate::model::{sample_graph_point, ConePoint, ConePointDescription, ConeSpace, GraphPoint, SphericalGraph, UserPoint};
use crate::pl;
use crate::regularity::{self, combinations, search_regular_direction, MarginReport};
use crate::retraction::FiberSpec;

/// Residual below which a target counts as attained.
const PREIMAGE_TOL: f64 = 1e-6;

/// A distance map `(|a_1·|, …, |a_k·|)` on a cone.
#[derive(Debug, Clone)]
pub struct DistanceMap {
    pub cone: ConeSpace,
    pub a_list: Vec<ConePoint>,
    from: Vec<ConeDistanceFrom>,
}

impl DistanceMap {
    pub fn new(cone: ConeSpace, a_list: Vec<ConePoint>) -> Self {
        let from = a_list.iter().map(|a| ConeDistanceFrom::new(&cone, a)).collect();
        Self { cone, a_list, from }
    }

    pub fn k(&self) -> usize {
        self.a_list.len()
    }

    pub fn eval(&self, x: &ConePoint) -> Vec<f64> {
        self.from.iter().map(|a| a.to(&self.cone, x)).collect()
    }

    /// Local planar chart at a point whose space of directions is a circle of
    /// length 2π: `(u, v)` with `u` radial outward.
    fn chart(&self, y: &ConePoint, u: f64, v: f64) -> Result<ConePoint> {
        let len = u.hypot(v);
        if len == 0.0 {
            return Ok(*y);
        }
        let phi = v.atan2(u);
        let dir = if phi >= 0.0 {
            self.cone_dir(1, phi)?
        } else {
            self.cone_dir(0, -phi)?
        };
        cone::exp(&self.cone, y, &dir, len)
    }

    fn cone_dir(&self, arc: usize, angle: f64) -> Result<GraphPoint> {
        let model = SphericalGraph::suspension(2)?;
        model.point_on_edge(arc, angle.clamp(0.0, PI))
    }

    fn is_flat(&self, y: &ConePoint) -> bool {
        !y.is_apex() && self.cone.base().headings(&y.base).len() == 2
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Finds `y ∈ B̄(x, r)` with `f(y)` close to `target`: damped Gauss–Newton in
/// flat charts, projected pattern search elsewhere, multistart over `seeds`.
pub fn preimage(map: &DistanceMap, x: &ConePoint, r: f64, target: &[f64], seeds: &[ConePoint]) -> Result<(ConePoint, f64)> {
    let from_x = ConeDistanceFrom::new(&map.cone, x);
    let project = |y: ConePoint| -> ConePoint {
        let d = from_x.to(&map.cone, &y);
        if d <= r {
            y
        } else {
            cone::cone_geodesic(&map.cone, x, &y).point_at(&map.cone, r)
        }
    };
    let resid = |y: &ConePoint| dist2(&map.eval(y), target);
    let mut best = (*x, resid(x));
    for seed in seeds {
        let mut y = project(*seed);
        let mut res = resid(&y);
        for _ in 0..60 {
            if res <= 1e-12 {
                break;
            }
            let next = if map.is_flat(&y) { newton_step(map, &y, target, res, &project)? } else { None };
            match next {
                Some((z, rz)) if rz < res => {
                    y = z;
                    res = rz;
                }
                _ => {
                    let (z, rz) = pattern_search(map, y, res, target, &project, r)?;
                    let stalled = rz >= res * (1.0 - 1e-12);
                    y = z;
                    res = rz;
                    if stalled {
                        break;
                    }
                }
            }
        }
        if res < best.1 {
            best = (y, res);
        }
        if best.1 <= PREIMAGE_TOL {
            break;
        }
    }
    Ok(best)
}

fn newton_step(
    map: &DistanceMap,
    y: &ConePoint,
    target: &[f64],
    res: f64,
    project: &dyn Fn(ConePoint) -> ConePoint,
) -> Result<Option<(ConePoint, f64)>> {
    let h = 1e-7 * y.radius.max(1e-3);
    let k = map.k();
    let fy = map.eval(y);
    let mut jac = vec![[0.0; 2]; k];
    for (col, (du, dv)) in [(h, 0.0), (0.0, h)].into_iter().enumerate() {
        let plus = map.eval(&map.chart(y, du, dv)?);
        let minus = map.eval(&map.chart(y, -du, -dv)?);
        for i in 0..k {
            jac[i][col] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    let rhs: Vec<f64> = target.iter().zip(&fy).map(|(t, f)| t - f).collect();
    let step = match k {
        1 => {
            let n = jac[0][0] * jac[0][0] + jac[0][1] * jac[0][1];
            if n < 1e-14 {
                return Ok(None);
            }
            [jac[0][0] * rhs[0] / n, jac[0][1] * rhs[0] / n]
        }
        2 => {
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det.abs() < 1e-12 {
                return Ok(None);
            }
            [
                (jac[1][1] * rhs[0] - jac[0][1] * rhs[1]) / det,
                (jac[0][0] * rhs[1] - jac[1][0] * rhs[0]) / det,
            ]
        }
        _ => return Ok(None),
    };
    let mut scale = 1.0;
    for _ in 0..30 {
        let z = project(map.chart(y, scale * step[0], scale * step[1])?);
        let rz = dist2(&map.eval(&z), target);
        if rz < res {
            return Ok(Some((z, rz)));
        }
        scale *= 0.5;
    }
    Ok(None)
}

fn pattern_search(
    map: &DistanceMap,
    mut y: ConePoint,
    mut res: f64,
    target: &[f64],
    project: &dyn Fn(ConePoint) -> ConePoint,
    r: f64,
) -> Result<(ConePoint, f64)> {
    let mut step = (res.max(1e-6)).min(r);
    let mut moves = 0;
    while step > 1e-13 && res > 1e-12 && moves < 400 {
        let model = cone::space_of_directions(&map.cone, &y)?;
        let sigma = model.graph()?;
        let mut dirs: Vec<GraphPoint> = (0..sigma.vertex_count()).map(GraphPoint::Vertex).collect();
        for (edge, e) in sigma.edges().iter().enumerate() {
            for i in 1..24 {
                dirs.push(sigma.snap(edge, e.len * i as f64 / 24.0));
            }
        }
        let mut improved = false;
        for d in &dirs {
            let z = project(cone::exp(&map.cone, &y, d, step)?);
            let rz = dist2(&map.eval(&z), target);
            if rz < res {
                y = z;
                res = rz;
                improved = true;
                moves += 1;
                break;
            }
        }
        if improved {
            step *= 1.5;
        } else {
            step *= 0.5;
        }
    }
    Ok((y, res))
}

/// Random point of `B(p, r)` (not uniform; rejection on a box around `p`).
pub fn random_ball_point<R: Rng>(cone: &ConeSpace, p: &ConePoint, r: f64, rng: &mut R) -> ConePoint {
    let s = p.radius.max(0.0);
    let from = ConeDistanceFrom::new(cone, p);
    loop {
        let radius = rng.gen_range((s - r).max(0.0)..=(s + r));
        let base = if p.is_apex() || r >= s {
            sample_graph_point(cone.base(), rng)
        } else {
            let headings = cone.base().headings(&p.base);
            let h = headings[rng.gen_range(0..headings.len())];
            geodesy::travel(cone.base(), &p.base, h, rng.gen_range(0.0..=(r / s).asin()))
        };
        let x = if radius == 0.0 { ConePoint::apex() } else { ConePoint { base, radius } };
        if from.to(cone, &x) <= r {
            return x;
        }
    }
}

#[derive(Debug, Clone)]
pub struct OpennessConfig {
    pub samples: usize,
    pub targets: usize,
    pub validation_samples: usize,
    pub validation_targets: usize,
    pub injectivity_points: usize,
    pub bisection_steps: usize,
    pub seed: u64,
}

impl Default for OpennessConfig {
    fn default() -> Self {
        Self {
            samples: 6,
            targets: 12,
            validation_samples: 25,
            validation_targets: 40,
            injectivity_points: 142,
            bisection_steps: 8,
            seed: 0x0de5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RadiusOpenness {
    pub r: f64,
    pub c_emp: f64,
    /// Targets on `∂B(f(x), c_emp r / 2)` checked after the bisection.
    pub validation_targets: usize,
    pub validation_failures: usize,
    pub max_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BiLipschitz {
    pub pairs: usize,
    pub lower: f64,
    pub upper: f64,
    pub injective: bool,
    /// Smallest `|f(x) − f(y)|∞` over the pairs.
    pub min_separation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OpennessReport {
    pub k: usize,
    pub radii: Vec<f64>,
    /// Minimum over the radii.
    pub c_emp: f64,
    pub per_radius: Vec<RadiusOpenness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bi_lipschitz: Option<BiLipschitz>,
}

/// Largest `c` (on a bisection grid in `[0, 1]`) with `B(f(x), c r) ⊂ f(B(x, r))`
/// at the sampled `x`, plus injectivity and bi-Lipschitz bounds when `k = 2`.
#[allow(clippy::too_many_arguments)]
pub fn openness_estimate(
    cone: &ConeSpace,
    p: &ConePoint,
    a_list: &[ConePoint],
    b: &ConePoint,
    eps: f64,
    delta: f64,
    radii: &[f64],
    config: &OpennessConfig,
) -> Result<OpennessReport> {
    let check = regularity::check_map_at_point(cone, p, a_list, b, eps, delta)?;
    if !check.verdict {
        return Err(Error::Precondition(format!(
            "map is not ({eps}, {delta})-noncritical at p (eps margin {:.6}, delta margin {:?})",
            check.eps_margin, check.delta_margin
        )));
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidArgument("radii must be positive".into()));
    }
    let k = a_list.len();
    if k > 2 {
        return Err(Error::InvalidArgument("k exceeds dim T_p = 2".into()));
    }
    let map = DistanceMap::new(cone.clone(), a_list.to_vec());
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut draw = |n: usize| -> Vec<ConePoint> {
        let mut pts = vec![*p];
        while pts.len() < n.max(1) {
            pts.push(random_ball_point(cone, p, r_max, &mut rng));
        }
        pts
    };
    let bisect_pts = draw(config.samples);
    let valid_pts = draw(config.validation_samples);
    let mut per_radius = Vec::new();
    for &r in radii {
        let passes = |c: f64, pts: &[ConePoint], m: usize| -> Result<(usize, usize, f64)> {
            inclusion_failures(&map, pts, r, c, m)
        };
        let mut lo = 0.0;
        let mut hi = 1.0;
        if passes(hi, &bisect_pts, config.targets)?.0 == 0 {
            lo = hi;
        } else {
            for _ in 0..config.bisection_steps {
                let mid = 0.5 * (lo + hi);
                if passes(mid, &bisect_pts, config.targets)?.0 == 0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let (failures, total, max_residual) = if lo > 0.0 {
            passes(lo / 2.0, &valid_pts, config.validation_targets)?
        } else {
            (0, 0, 0.0)
        };
        per_radius.push(RadiusOpenness { r, c_emp: lo, validation_targets: total, validation_failures: failures, max_residual });
    }
    let bi_lipschitz = if k == 2 {
        let r_min = radii.iter().copied().fold(f64::INFINITY, f64::min);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x1c7);
        let pts: Vec<ConePoint> = (0..config.injectivity_points).map(|_| random_ball_point(cone, p, r_min, &mut rng)).collect();
        Some(bi_lipschitz_bounds(&map, &pts))
    } else {
        None
    };
    Ok(OpennessReport {
        k,
        radii: radii.to_vec(),
        c_emp: per_radius.iter().map(|r| r.c_emp).fold(f64::INFINITY, f64::min),
        per_radius,
        bi_lipschitz,
    })
}

/// Counts targets on `∂B(f(x), c r)` without a preimage in `B̄(x, r)`.
fn inclusion_failures(map: &DistanceMap, pts: &[ConePoint], r: f64, c: f64, m: usize) -> Result<(usize, usize, f64)> {
    let results: Vec<(usize, usize, f64)> = pts
        .par_iter()
        .map(|x| {
            let fx = map.eval(x);
            let targets: Vec<Vec<f64>> = match map.k() {
                1 => vec![vec![fx[0] + c * r], vec![fx[0] - c * r]],
                _ => (0..m)
                    .map(|j| {
                        let a = 2.0 * PI * j as f64 / m as f64;
                        vec![fx[0] + c * r * a.cos(), fx[1] + c * r * a.sin()]
                    })
                    .collect(),
            };
            let seeds = multistart_seeds(map, x, r)?;
            let mut fails = 0;
            let mut worst = 0.0f64;
            for t in &targets {
                let (_, res) = preimage(map, x, r, t, &seeds)?;
                if res > PREIMAGE_TOL {
                    fails += 1;
                } else {
                    worst = worst.max(res);
                }
            }
            Ok((fails, targets.len(), worst))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(results.into_iter().fold((0, 0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1, acc.2.max(v.2))))
}

/// `x` plus seven points at distance `r/2` spread over the directions at `x`.
fn multistart_seeds(map: &DistanceMap, x: &ConePoint, r: f64) -> Result<Vec<ConePoint>> {
    let model = cone::space_of_directions(&map.cone, x)?;
    let sigma = model.graph()?;
    let total = sigma.total_length();
    let mut out = vec![*x];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for j in 0..7 {
        // spread by arclength along the direction graph
        let mut left = total * j as f64 / 7.0;
        let mut dir = None;
        for (edge, e) in sigma.edges().iter().enumerate() {
            if left < e.len {
                dir = Some(sigma.snap(edge, left));
                break;
            }
            left -= e.len;
        }
        let d = dir.unwrap_or_else(|| sample_graph_point(sigma, &mut rng));
        out.push(cone::exp(&map.cone, x, &d, 0.5 * r)?);
    }
    Ok(out)
}

fn bi_lipschitz_bounds(map: &DistanceMap, pts: &[ConePoint]) -> BiLipschitz {
    let values: Vec<Vec<f64>> = pts.iter().map(|x| map.eval(x)).collect();
    let froms: Vec<ConeDistanceFrom> = pts.iter().map(|x| ConeDistanceFrom::new(&map.cone, x)).collect();
    let rows: Vec<(usize, f64, f64, bool, f64)> = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut lower = f64::INFINITY;
            let mut upper = 0.0f64;
            let mut injective = true;
            let mut min_sep = f64::INFINITY;
            let mut pairs = 0;
            for j in (i + 1)..pts.len() {
                let d = froms[i].to(&map.cone, &pts[j]);
                let sep = values[i].iter().zip(&values[j]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                min_sep = min_sep.min(sep);
                if d > 1e-9 {
                    let ratio = dist2(&values[i], &values[j]) / d;
                    lower = lower.min(ratio);
                    upper = upper.max(ratio);
                    if sep <= 1e-9 {
                        injective = false;
                    }
                }
                pairs += 1;
            }
            (pairs, lower, upper, injective, min_sep)
        })
        .collect();
    BiLipschitz {
        pairs: rows.iter().map(|r| r.0).sum(),
        lower: rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min),
        upper: rows.iter().map(|r| r.2).fold(0.0, f64::max),
        injective: rows.iter().all(|r| r.3),
        min_separation: rows.iter().map(|r| r.4).fold(f64::INFINITY, f64::min),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberPointCheck {
    pub point: ConePointDescription,
    pub dist_p: f64,
    /// Regular direction found for the extended map.
    pub eta: UserPoint,
    pub report: MarginReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberSphereReport {
    pub r: f64,
    pub points: usize,
    /// `δ(r)`: worst `max |ξ_i ξ_j|‾ − π/2` over the fiber sphere.
    pub delta_r: f64,
    /// `ε(r)`: worst `min (π/2 − |ξ_i η|‾)` over the fiber sphere.
    pub eps_r: f64,
    pub checks: Vec<FiberPointCheck>,
}

/// Noncriticality of `(f, |p·|)` on `∂B(p, r) ∩ f⁻¹(f(p))`, for each `r`.
pub fn fiber_sphere_check(spec: &FiberSpec, radii: &[f64], per_radius: usize) -> Result<Vec<FiberSphereReport>> {
    if spec.k() >= 2 {
        return Err(Error::Precondition(format!("k = {} equals dim T_p = 2", spec.k())));
    }
    radii
        .iter()
        .map(|&r| {
            let pts = fiber_sphere_points(spec, r, per_radius)?;
            let checks = pts.iter().map(|x| fiber_point_check(spec, x)).collect::<Result<Vec<_>>>()?;
            Ok(FiberSphereReport {
                r,
                points: checks.len(),
                delta_r: checks.iter().filter_map(|c| c.report.delta_margin).fold(f64::NEG_INFINITY, f64::max),
                eps_r: checks.iter().map(|c| c.report.eps_margin).fold(f64::INFINITY, f64::min),
                checks,
            })
        })
        .collect()
}

/// Fiber points at distance `r` from `p`, found by bisection along
/// contraction paths of sampled fiber points.
pub fn fiber_sphere_points(spec: &FiberSpec, r: f64, n: usize) -> Result<Vec<ConePoint>> {
    let mut scale = 1.5;
    for _ in 0..8 {
        let seeds = spec.sample_fiber(scale * r, n.max(4))?;
        let far: Vec<_> = seeds.iter().filter(|y| spec.dist_p(y) >= r).copied().collect();
        if !far.is_empty() {
            let mut out: Vec<ConePoint> = Vec::new();
            for y in far {
                let g = cone::cone_geodesic(&spec.cone, &y, &spec.p);
                let at = |t: f64| -> Result<ConePoint> { Ok(spec.retract(&g.point_at(&spec.cone, t * g.length))?.point) };
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if spec.dist_p(&at(mid)?) >= r {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let x = at(lo)?;
                if (spec.dist_p(&x) - r).abs() <= 1e-9 && !out.iter().any(|q| cone::cone_distance(&spec.cone, q, &x) < 1e-6) {
                    out.push(x);
                }
            }
            if !out.is_empty() {
                out.truncate(n.max(1));
                return Ok(out);
            }
        }
        scale *= 2.0;
    }
    Err(Error::Precondition(format!("no fiber point found at distance {r} from p")))
}

/// Checks the extended map `(|a_1·|, …, |a_k·|, |p·|)` at fiber point `x`,
/// moving `b′` toward antipodes of `p′` to find the best regular direction.
pub fn fiber_point_check(spec: &FiberSpec, x: &ConePoint) -> Result<FiberPointCheck> {
    let cone = &spec.cone;
    let model = cone::space_of_directions(cone, x)?;
    let sigma = model.graph()?;
    let mut targets = spec.a_list.clone();
    targets.push(spec.p);
    let xi_sets = targets.iter().map(|a| cone::direction_at(cone, x, a)).collect::<Result<Vec<_>>>()?;
    let combos = combinations(&xi_sets);
    let preps: Vec<Vec<PreparedSource>> = combos
        .iter()
        .map(|c| c.iter().map(|xi| PreparedSource::new(sigma, xi)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let objective = |eta: &GraphPoint| {
        let field = sigma.distance_field(eta);
        preps
            .iter()
            .map(|ps| ps.iter().map(|p| FRAC_PI_2 - geodesy::antipodal_value(sigma, p, &field)).fold(f64::INFINITY, f64::min))
            .fold(f64::INFINITY, f64::min)
    };
    let b_dir = cone::direction_at(cone, x, &spec.b)?[0];
    let p_dir = *xi_sets.last().expect("p is a target").first().expect("direction exists");
    let mut best = (b_dir, objective(&b_dir));
    for z in geodesy::antipode_set(sigma, &p_dir)?.sample(sigma, 5) {
        let path = geodesy::shortest_path(sigma, &b_dir, &z);
        let verts = pl::trace(|t| objective(&path.point_at(sigma, t)), 0.0, path.length, geodesy::TRACE_CELL);
        let (t, v) = pl::argmax(&verts);
        if v > best.1 + 1e-12 {
            best = (path.point_at(sigma, t), v);
        }
    }
    let mut worst: Option<MarginReport> = None;
    for combo in &combos {
        let r = regularity::check_collection(sigma, &regularity::Collection::new(combo.clone(), Some(best.0)), spec.eps, spec.delta)?;
        worst = Some(match worst {
            None => r,
            Some(w) => {
                if r.eps_margin < w.eps_margin || r.delta_margin > w.delta_margin {
                    let mut merged = r.clone();
                    merged.eps_margin = r.eps_margin.min(w.eps_margin);
                    merged.delta_margin = match (r.delta_margin, w.delta_margin) {
                        (Some(a), Some(b)) => Some(a.max(b)),
                        (a, b) => a.or(b),
                    };
                    merged
                } else {
                    w
                }
            }
        });
    }
    let mut report = worst.expect("at least one combination");
    report.dimension_ok = Some(targets.len() <= 2);
    Ok(FiberPointCheck { point: cone.to_user(x), dist_p: spec.dist_p(x), eta: sigma.to_user(&best.0), report })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub theta: f64,
    pub k: usize,
    pub best_margin: f64,
    pub xi1: f64,
    pub xi2: Option<f64>,
    pub eta: f64,
}

/// Slack allowed on `|ξ_1 ξ_2|‾ ≤ π/2` when optimising two directions.
const SWEEP_DELTA: f64 = 1e-9;

/// Best noncriticality margin over configurations on `circle(2π + θ)`
/// with `ξ_1` at 0, for each `θ`.
pub fn example14_sweep(thetas: &[f64], k: usize) -> Result<Vec<SweepRow>> {
    if !(k == 1 || k == 2) {
        return Err(Error::InvalidArgument(format!("k = {k}: the sweep covers k = 1 and k = 2")));
    }
    if thetas.iter().any(|t| !(0.0..=3.5).contains(t)) {
        return Err(Error::InvalidArgument("theta grid must lie in [0, 3.5]".into()));
    }
    thetas.par_iter().map(|&theta| sweep_point(theta, k)).collect()
}

fn position(g: &SphericalGraph, p: &GraphPoint) -> f64 {
    match g.to_user(p) {
        UserPoint::Edge { offset, .. } => offset,
        UserPoint::Vertex { .. } => 0.0,
    }
}

fn sweep_point(theta: f64, k: usize) -> Result<SweepRow> {
    let g = SphericalGraph::circle(2.0 * PI + theta)?;
    let xi1 = GraphPoint::Vertex(0);
    if k == 1 {
        let (eta, margin) = search_regular_direction(&g, &[xi1])?;
        return Ok(SweepRow { theta, k, best_margin: margin, xi1: 0.0, xi2: None, eta: position(&g, &eta) });
    }
    let prep1 = PreparedSource::new(&g, &xi1)?;
    let ad1 = |p: &GraphPoint| geodesy::antipodal_value(&g, &prep1, &g.distance_field(p));
    // feasible ξ_2: |ξ_1 ξ_2|‾ ≤ π/2 + slack, traced edge by edge
    let mut feasible: Vec<(usize, f64, f64)> = Vec::new();
    for (edge, e) in g.edges().iter().enumerate() {
        let verts = pl::trace(|t| ad1(&g.snap(edge, t)), 0.0, e.len, geodesy::TRACE_CELL);
        for (lo, hi) in pl::sublevel_intervals(&verts, FRAC_PI_2 + SWEEP_DELTA) {
            feasible.push((edge, lo, hi));
        }
    }
    if feasible.is_empty() {
        // no admissible pair: report how far the pair condition is violated
        let (_, v) = g.maximize(&|p: &GraphPoint| -ad1(p));
        return Ok(SweepRow { theta, k, best_margin: FRAC_PI_2 + v, xi1: 0.0, xi2: None, eta: f64::NAN });
    }
    let inner = |xi2: &GraphPoint| -> (GraphPoint, f64) {
        search_regular_direction(&g, &[xi1, *xi2]).expect("points are on the circle")
    };
    let mut best: Option<(f64, GraphPoint, GraphPoint)> = None;
    for (edge, lo, hi) in feasible {
        let verts = if hi - lo < 1e-12 {
            vec![(lo, inner(&g.snap(edge, lo)).1)]
        } else {
            pl::trace(|t| inner(&g.snap(edge, t)).1, lo, hi, geodesy::TRACE_CELL)
        };
        let (t, v) = pl::argmax(&verts);
        if best.as_ref().is_none_or(|b| v > b.0 + 1e-12) {
            let xi2 = g.snap(edge, t);
            best = Some((v, xi2, inner(&xi2).0));
        }
    }
    let (margin, xi2, eta) = best.expect("feasible set is non-empty");
    Ok(SweepRow { theta, k, best_margin: margin, xi1: 0.0, xi2: Some(position(&g, &xi2)), eta: position(&g, &eta) })
}

/// First grid interval where the best margin turns non-positive.
pub fn sign_change(rows: &[SweepRow]) -> Option<(f64, f64)> {
    rows.windows(2).find(|w| w[0].best_margin > 0.0 && w[1].best_margin <= 0.0).map(|w| (w[0].theta, w[1].theta))
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("theta,k,best_margin,xi1,xi2,eta\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_csv(r.theta),
            r.k,
            fmt_csv(r.best_margin),
            fmt_csv(r.xi1),
            r.xi2.map(fmt_csv).unwrap_or_default(),
            if r.eta.is_nan() { String::new() } else { fmt_csv(r.eta) }
        ));
    }
    out
}

fn fmt_csv(v: f64) -> String {
    let s = format!("{:.12e}", v);
    // 12 significant digits, printed in shortest form
    s.parse::<f64>().map(|x| format!("{x}")).unwrap_or(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct SphereMapRow {
    pub x: f64,
    pub ftilde_1: f64,
    pub ftilde_2: f64,
    pub local_distortion: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SphereMapResult {
    pub hypotheses: MarginReport,
    pub resolution: f64,
    pub samples: usize,
    /// `max(Lip, 1/lower Lip)` of `f̃` for chordal metrics.
    pub distortion: f64,
    pub lipschitz_upper: f64,
    pub lipschitz_lower: f64,
    pub winding: i64,
    /// Angle increments of `f̃` all have one sign.
    pub monotone: bool,
    pub bijective: bool,
    /// `max_x min d̄(x, {ξ_i, η})`.
    pub density: f64,
    /// `density − π/2`.
    pub density_margin: f64,
    pub max_norm_error: f64,
    #[serde(skip)]
    pub rows: Vec<SphereMapRow>,
}

impl SphereMapResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,ftilde_1,ftilde_2,local_distortion\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", fmt_csv(r.x), fmt_csv(r.ftilde_1), fmt_csv(r.ftilde_2), fmt_csv(r.local_distortion)));
        }
        out
    }
}

/// `f̃ = f/|f|` with `f = (−cos d̄(ξ_1, ·), −cos d̄(ξ_2, ·))` on a circle.
pub fn sphere_map(
    graph: &SphericalGraph,
    xis: &[GraphPoint],
    eta: &GraphPoint,
    eps: f64,
    delta: f64,
    resolution: f64,
) -> Result<SphereMapResult> {
    let mut loops = graph.user_edges();
    let length = match (loops.next(), loops.next()) {
        (Some((0, 0, len)), None) if graph.user_vertex_count() == 1 => len,
        _ => return Err(Error::InvalidArgument("sphere_map needs a circle".into())),
    };
    if xis.len() != 2 {
        return Err(Error::InvalidArgument(format!("a circle needs n + 1 = 2 directions, got {}", xis.len())));
    }
    if !(resolution > 0.0 && resolution < 0.1) {
        return Err(Error::InvalidArgument(format!("resolution {resolution} must lie in (0, 0.1)")));
    }
    let hypotheses = regularity::check_collection(graph, &regularity::Collection::new(xis.to_vec(), Some(*eta)), eps, delta)?;
    if !hypotheses.verdict {
        return Err(Error::Precondition(format!(
            "hypotheses fail: max |ξ_i ξ_j|‾ = {:.6} (needs < π/2 + {delta}), max |ξ_i η|‾ = {:.6} (needs < π/2 − {eps})",
            hypotheses.max_pair_antipodal.unwrap_or(f64::NAN),
            hypotheses.max_eta_antipodal
        )));
    }
    let n = (length / resolution).ceil() as usize;
    let h = length / n as f64;
    let points: Vec<GraphPoint> =
        (0..n).map(|i| graph.from_user(&UserPoint::Edge { edge: 0, offset: i as f64 * h })).collect::<Result<Vec<_>>>()?;
    let f1 = graph.distance_field(&xis[0]);
    let f2 = graph.distance_field(&xis[1]);
    let fe = graph.distance_field(eta);
    let mut values = Vec::with_capacity(n);
    let mut density = 0.0f64;
    let mut max_norm_error = 0.0f64;
    for p in &points {
        let d1 = f1.at(graph, p).min(PI);
        let d2 = f2.at(graph, p).min(PI);
        let v = (-d1.cos(), -d2.cos());
        let norm = v.0.hypot(v.1);
        if norm < 1e-12 {
            return Err(Error::Internal("f vanishes on the circle".into()));
        }
        let u = (v.0 / norm, v.1 / norm);
        max_norm_error = max_norm_error.max((u.0.hypot(u.1) - 1.0).abs());
        values.push(u);
        density = density.max(d1.min(d2).min(fe.at(graph, p).min(PI)));
    }
    let chord = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).hypot(a.1 - b.1);
    // winding and monotonicity from consecutive increments
    let mut total = 0.0;
    let mut pos = 0;
    let mut neg = 0;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let a = values[i];
        let b = values[(i + 1) % n];
        let inc = (a.0 * b.1 - a.1 * b.0).atan2(a.0 * b.0 + a.1 * b.1);
        total += inc;
        if inc > 0.0 {
            pos += 1;
        } else if inc < 0.0 {
            neg += 1;
        }
        let base = 2.0 * (0.5 * h).sin();
        rows.push(SphereMapRow { x: i as f64 * h, ftilde_1: a.0, ftilde_2: a.1, local_distortion: chord(a, b) / base });
    }
    let winding = (total / (2.0 * PI)).round() as i64;
    if winding.abs() != 1 {
        return Err(Error::Internal(format!("winding number {winding} of the sphere map is not ±1")));
    }
    // global distortion over all pairs of a coarser subnet
    let stride = (n / 700).max(1);
    let sub: Vec<usize> = (0..n).step_by(stride).collect();
    let (upper, lower) = sub
        .par_iter()
        .enumerate()
        .map(|(ii, &i)| {
            let mut up = 0.0f64;
            let mut lo = f64::INFINITY;
            for &j in &sub[ii + 1..] {
                let d = graph.intrinsic_distance(&points[i], &points[j]).min(PI);
                let dom = 2.0 * (0.5 * d).sin();
                let img = chord(values[i], values[j]);
                up = up.max(img / dom);
                lo = lo.min(img / dom);
            }
            (up, lo)
        })
        .reduce(|| (0.0, f64::INFINITY), |a, b| (a.0.max(b.0), a.1.min(b.1)));
    let local_up = rows.iter().map(|r| r.local_distortion).fold(0.0, f64::max);
    let local_lo = rows.iter().map(|r| r.local_distortion).fold(f64::INFINITY, f64::min);
    let lipschitz_upper = upper.max(local_up);
    let lipschitz_lower = lower.min(local_lo);
    let monotone = pos == 0 || neg == 0;
    Ok(SphereMapResult {
        hypotheses,
        resolution: h,
        samples: n,
        distortion: lipschitz_upper.max(1.0 / lipschitz_lower),
        lipschitz_upper,
        lipschitz_lower,
        winding,
        monotone,
        bijective: monotone && winding.abs() == 1,
        density,
        density_margin: density - FRAC_PI_2,
        max_norm_error,
        rows,
    })
}
