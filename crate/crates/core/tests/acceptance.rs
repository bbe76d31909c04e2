//! Acceptance criteria. Runs without the libtest harness so every criterion
//! prints its `PASS`/`FAIL` line; exits non-zero if any criterion fails.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::time::{Duration, Instant};

use gcba_core::analysis::{self, OpennessConfig};
use gcba_core::cone::{cone_distance, cone_geodesic};
use gcba_core::generators::random_spherical_graph;
use gcba_core::geodesy::{antipodal_distance, PiSpace};
use gcba_core::model::{sample_graph_point, ConePoint, ConeSpace, GraphPoint, SphericalGraph, UserPoint};
use gcba_core::regularity::{check_collection, find_v, search_regular_direction, Collection};
use gcba_core::retraction::FiberSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: usize, what: &str, pass: bool, detail: String, elapsed: Duration, limit: Duration) -> bool {
    let ok = pass && elapsed <= limit;
    println!(
        "acceptance {id} [{}] {what}: {detail}; {:.2}s (limit {}s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    ok
}

fn circle_point(g: &SphericalGraph, t: f64) -> GraphPoint {
    let len = g.user_edges().next().unwrap().2;
    g.from_user(&UserPoint::Edge { edge: 0, offset: t.rem_euclid(len) }).unwrap()
}

fn at(k: &ConeSpace, t: f64, r: f64) -> ConePoint {
    k.point(circle_point(k.base(), t), r).unwrap()
}

fn plane() -> ConeSpace {
    ConeSpace::new(SphericalGraph::circle(2.0 * PI).unwrap())
}

fn wide() -> ConeSpace {
    ConeSpace::new(SphericalGraph::circle(2.0 * PI + 0.5).unwrap())
}

fn angle_of(k: &ConeSpace, p: &ConePoint) -> f64 {
    match k.base().to_user(&p.base) {
        UserPoint::Edge { offset, .. } => offset,
        UserPoint::Vertex { .. } => 0.0,
    }
}

fn xy(k: &ConeSpace, p: &ConePoint) -> (f64, f64) {
    let a = angle_of(k, p);
    (p.radius * a.cos(), p.radius * a.sin())
}

fn from_xy(k: &ConeSpace, x: f64, y: f64) -> ConePoint {
    let r = x.hypot(y);
    if r == 0.0 {
        k.apex()
    } else {
        at(k, y.atan2(x).rem_euclid(2.0 * PI), r)
    }
}

fn plane_spec() -> FiberSpec {
    let k = plane();
    FiberSpec::new(k.clone(), k.apex(), vec![at(&k, 0.0, 3.0)], at(&k, PI, 2.0), 0.1, 0.1, 1.0, None).unwrap()
}

fn criterion_1_threshold_sweep() -> bool {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let grid = |hi: f64| (0..=((hi / 0.01).round() as usize)).map(|i| i as f64 * 0.01).collect::<Vec<_>>();
    let (k2, k1) = pool.install(|| {
        (analysis::example14_sweep(&grid(1.2), 2).unwrap(), analysis::example14_sweep(&grid(3.5), 1).unwrap())
    });
    let elapsed = start.elapsed();
    let b2 = analysis::sign_change(&k2);
    let b1 = analysis::sign_change(&k1);
    let inside = |b: Option<(f64, f64)>, c: f64| b.is_some_and(|(lo, hi)| lo >= c - 0.02 && hi <= c + 0.02);
    let pass = inside(b2, FRAC_PI_4) && inside(b1, PI);
    report(
        1,
        "threshold sweep on circle(2π+θ)",
        pass,
        format!("k=2 boundary in {b2:?} (π/4 = {FRAC_PI_4:.4}), k=1 boundary in {b1:?} (π = {PI:.4}), single thread"),
        elapsed,
        Duration::from_secs(60),
    )
}

fn criterion_2_antipodal_duality() -> bool {
    let start = Instant::now();
    let mut graphs = vec![
        ("circle(2π)", SphericalGraph::circle(2.0 * PI).unwrap()),
        ("circle(2π+0.5)", SphericalGraph::circle(2.0 * PI + 0.5).unwrap()),
        ("suspension(3)", SphericalGraph::suspension(3).unwrap()),
        ("suspension(5)", SphericalGraph::suspension(5).unwrap()),
    ];
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        graphs.push(("random", random_spherical_graph(&mut rng)));
    }
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for (i, (_, g)) in graphs.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        for _ in 0..1000 {
            let (a, b) = (sample_graph_point(g, &mut rng), sample_graph_point(g, &mut rng));
            worst = worst.max(antipodal_distance(g, &a, &b).unwrap().method_gap);
            pairs += 1;
        }
    }
    let elapsed = start.elapsed();
    report(
        2,
        "dual antipodal-distance formulas",
        worst <= 1e-9,
        format!("max method_gap {worst:.3e} over {pairs} pairs on {} graphs (tol 1e-9)", graphs.len()),
        elapsed,
        Duration::from_secs(10),
    )
}

fn criterion_3_plane_oracle() -> bool {
    let start = Instant::now();
    let k = plane();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut dist_err = 0.0f64;
    let mut mid_err = 0.0f64;
    for _ in 0..10_000 {
        let (ax, ay, bx, by): (f64, f64, f64, f64) =
            (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let (u, v) = (from_xy(&k, ax, ay), from_xy(&k, bx, by));
        dist_err = dist_err.max((cone_distance(&k, &u, &v) - (ax - bx).hypot(ay - by)).abs());
        let g = cone_geodesic(&k, &u, &v);
        let m = xy(&k, &g.point_at(&k, 0.5 * g.length));
        mid_err = mid_err.max((m.0 - 0.5 * (ax + bx)).hypot(m.1 - 0.5 * (ay + by)));
    }
    let spec = plane_spec();
    let mut retract_err = 0.0f64;
    for _ in 0..1000 {
        let (a, r): (f64, f64) = (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..0.5));
        let (x, y) = (r * a.cos(), r * a.sin());
        let got = xy(&k, &spec.retract(&from_xy(&k, x, y)).unwrap().point);
        let expect = if (x - 3.0).hypot(y) < 3.0 {
            // straight toward b = (-2, 0) until the circle |q - a| = 3
            let (dx, dy) = (-2.0 - x, -y);
            let n = dx.hypot(dy);
            let (ux, uy) = (dx / n, dy / n);
            let (wx, wy) = (x - 3.0, y);
            let bq = wx * ux + wy * uy;
            let t = -bq + (bq * bq - (wx * wx + wy * wy - 9.0)).sqrt();
            (x + t * ux, y + t * uy)
        } else {
            // radial projection onto the circle
            let (wx, wy) = (x - 3.0, y);
            let n = wx.hypot(wy);
            (3.0 + 3.0 * wx / n, 3.0 * wy / n)
        };
        retract_err = retract_err.max((got.0 - expect.0).hypot(got.1 - expect.1));
    }
    let elapsed = start.elapsed();
    let pass = dist_err <= 1e-9 && mid_err <= 1e-9 && retract_err <= 1e-8;
    report(
        3,
        "plane oracle",
        pass,
        format!("distance err {dist_err:.2e}, midpoint err {mid_err:.2e} (tol 1e-9, 1e4 pairs); retraction err {retract_err:.2e} (tol 1e-8, 1e3 points)"),
        elapsed,
        Duration::from_secs(10),
    )
}

fn criterion_4_find_v() -> bool {
    let start = Instant::now();
    let (eps, delta) = (0.05, 0.05);
    let mut found = 0;
    let mut seed = 0u64;
    let mut worst_eq = 0.0f64;
    let mut worst_1 = f64::INFINITY;
    let mut worst_eta = f64::INFINITY;
    while found < 100 && seed < 20_000 {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_spherical_graph(&mut rng);
        let k = if seed % 3 == 0 { 1 } else { 2 };
        let xis: Vec<_> = (0..k).map(|_| sample_graph_point(&g, &mut rng)).collect();
        let (eta, _) = search_regular_direction(&g, &xis).unwrap();
        let coll = Collection::new(xis, Some(eta));
        if !check_collection(&g, &coll, eps, delta).unwrap().verdict {
            continue;
        }
        let v = find_v(&g, &coll, eps, delta).unwrap().v;
        for x in &coll.xis[1..] {
            worst_eq = worst_eq.max((g.truncated_distance(&v, x) - FRAC_PI_2).abs());
        }
        worst_1 = worst_1.min(FRAC_PI_2 - g.truncated_distance(&v, &coll.xis[0]));
        worst_eta = worst_eta.min(g.truncated_distance(&v, &eta) - FRAC_PI_2);
        found += 1;
    }
    let mut too_many = 0;
    for seed in 0..300u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(50_000 + seed);
        let g = random_spherical_graph(&mut rng);
        let xis: Vec<_> = (0..3).map(|_| sample_graph_point(&g, &mut rng)).collect();
        let (eta, _) = search_regular_direction(&g, &xis).unwrap();
        if check_collection(&g, &Collection::new(xis, Some(eta)), eps, delta).unwrap().verdict {
            too_many += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = found == 100 && worst_eq <= 1e-9 && worst_1 >= 0.01 && worst_eta >= 0.01 && too_many == 0;
    report(
        4,
        "find_v on noncritical collections",
        pass,
        format!(
            "{found} instances: max |d(v,ξi)−π/2| {worst_eq:.2e}, min π/2−d(v,ξ1) {worst_1:.4}, min d(v,η)−π/2 {worst_eta:.4}; {too_many} of 300 k=3 graph collections noncritical"
        ),
        elapsed,
        Duration::from_secs(30),
    )
}

fn criterion_5_retraction() -> bool {
    let start = Instant::now();
    let w = wide();
    let specs = vec![
        ("plane k=1", plane_spec(), 0.5),
        (
            "apex θ=0.5 k=1",
            FiberSpec::new(w.clone(), w.apex(), vec![at(&w, 0.0, 1.0)], at(&w, 4.45, 1.0), 0.15, 0.2, 0.3, None).unwrap(),
            0.05,
        ),
        (
            "off-apex θ=0.5 k=1",
            FiberSpec::new(w.clone(), at(&w, 1.0, 0.6), vec![at(&w, 1.0, 2.0)], at(&w, 4.0, 0.8), 0.1, 0.1, 0.2, None).unwrap(),
            0.04,
        ),
    ];
    let mut details = Vec::new();
    let mut pass = true;
    for (name, spec, r) in &specs {
        let k = &spec.cone;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut res, mut ident, mut range, mut r2) = (0.0f64, 0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for _ in 0..200 {
            let x = analysis::random_ball_point(k, &spec.p, *r, &mut rng);
            let rep = spec.retract(&x).unwrap();
            res = res.max(rep.residual);
            ident = ident.max(cone_distance(k, &spec.retract(&rep.point).unwrap().point, &rep.point));
            range = range.max(spec.dist_p(&rep.point) - spec.lipschitz * r);
            let y1 = spec.r1(&x).unwrap().point;
            r2 = r2.max(spec.dist_p(&spec.r2(&y1).unwrap()) - spec.dist_p(&y1));
        }
        let trace = spec.contract_fiber_ball(*r, 8, 20).unwrap();
        let ok = res <= 1e-6 && ident <= 1e-9 && range <= 1e-6 && r2 <= 1e-6 && trace.max_residual <= 1e-6;
        pass &= ok;
        details.push(format!(
            "{name}: residual {res:.1e}, identity {ident:.1e}, range excess {range:.1e}, r2 growth {r2:.1e}, trace residual {:.1e}",
            trace.max_residual
        ));
    }
    let elapsed = start.elapsed();
    report(5, "retraction onto fibers", pass, details.join("; "), elapsed, Duration::from_secs(30))
}

fn criterion_6_openness() -> bool {
    let start = Instant::now();
    let k = wide();
    let a = [at(&k, 0.0, 1.0), at(&k, 2.2, 1.0)];
    let cfg = OpennessConfig::default();
    let r = analysis::openness_estimate(&k, &k.apex(), &a, &at(&k, 4.45, 1.0), 0.15, 0.2, &[0.05], &cfg).unwrap();
    let elapsed = start.elapsed();
    let row = &r.per_radius[0];
    let bl = r.bi_lipschitz.as_ref().unwrap();
    let pass = r.c_emp > 0.0 && row.validation_failures == 0 && row.validation_targets >= 1000 && bl.injective && bl.pairs >= 10_000;
    report(
        6,
        "openness and injectivity (θ=0.5 apex, k=2)",
        pass,
        format!(
            "c_emp {:.4}, {} failures of {} targets at c_emp/2; injective {} on {} pairs, bi-Lipschitz [{:.4}, {:.4}]",
            r.c_emp, row.validation_failures, row.validation_targets, bl.injective, bl.pairs, bl.lower, bl.upper
        ),
        elapsed,
        Duration::from_secs(60),
    )
}

fn criterion_7_fiber_sphere() -> bool {
    let start = Instant::now();
    let spec = plane_spec();
    let radii = [0.4, 0.2, 0.1, 0.05, 0.025];
    let reps = analysis::fiber_sphere_check(&spec, &radii, 4).unwrap();
    let deltas: Vec<f64> = reps.iter().map(|r| r.delta_r).collect();
    let k = &spec.cone;
    let witness = spec.retract(&from_xy(k, 0.3, 0.4)).unwrap().point;
    let w = analysis::fiber_point_check(&spec, &witness).unwrap();
    let wd = w.report.delta_margin.unwrap();
    let elapsed = start.elapsed();
    let positive_decreasing = deltas.iter().all(|d| *d > 0.0) && deltas.windows(2).all(|p| p[1] < p[0]);
    let pass = positive_decreasing && (wd - 0.059).abs() <= 0.005;
    report(
        7,
        "noncriticality on fiber spheres (plane k=1)",
        pass,
        format!("δ(r) at {radii:?} = {deltas:.4?}; witness |px| = {:.4}, δ = {wd:.4} (0.059 ± 0.005)", w.dist_p),
        elapsed,
        Duration::from_secs(10),
    )
}

fn criterion_8_sphere_map() -> bool {
    let start = Instant::now();
    let round = SphericalGraph::circle(2.0 * PI).unwrap();
    let r = analysis::sphere_map(
        &round,
        &[circle_point(&round, 0.0), circle_point(&round, FRAC_PI_2)],
        &circle_point(&round, 1.25 * PI),
        0.1,
        0.1,
        1e-3,
    )
    .unwrap();
    let g = SphericalGraph::circle(2.0 * PI + 0.5).unwrap();
    let w = analysis::sphere_map(&g, &[circle_point(&g, 0.0), circle_point(&g, 2.2)], &circle_point(&g, 4.45), 0.15, 0.2, 1e-3).unwrap();
    let elapsed = start.elapsed();
    let pass = (r.distortion - 1.0).abs() <= 1e-6
        && r.winding.abs() == 1
        && w.bijective
        && w.distortion.is_finite()
        && w.density <= FRAC_PI_2 + 0.3;
    report(
        8,
        "sphere map on circles",
        pass,
        format!(
            "round: distortion {:.9}, winding {}; θ=0.5: bijective {}, distortion {:.4}, density {:.4} (≤ π/2 + 0.3)",
            r.distortion, r.winding, w.bijective, w.distortion, w.density
        ),
        elapsed,
        Duration::from_secs(10),
    )
}

fn main() {
    let criteria: [fn() -> bool; 8] = [
        criterion_1_threshold_sweep,
        criterion_2_antipodal_duality,
        criterion_3_plane_oracle,
        criterion_4_find_v,
        criterion_5_retraction,
        criterion_6_openness,
        criterion_7_fiber_sphere,
        criterion_8_sphere_map,
    ];
    let failed = criteria.iter().filter(|c| !c()).count();
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
