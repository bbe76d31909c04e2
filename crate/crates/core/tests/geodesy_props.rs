use std::f64::consts::PI;

use gcba_core::generators::random_spherical_graph;
use gcba_core::geodesy::{antipodal_distance, antipode_set, PreparedSource};
use gcba_core::model::{sample_graph_point, validate_space, GraphPoint, Space, SphericalGraph, UserPoint};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn graph_and_points(seed: u64, n: usize) -> (SphericalGraph, Vec<GraphPoint>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_spherical_graph(&mut rng);
    let pts = (0..n).map(|_| sample_graph_point(&g, &mut rng)).collect();
    (g, pts)
}

#[test]
fn dual_formulas_agree_on_many_pairs() {
    for seed in 0..4u64 {
        let (g, pts) = graph_and_points(seed, 80);
        assert!(validate_space(&Space::Graph(g.clone())).passed);
        let mut pairs = 0;
        for (i, xi) in pts.iter().enumerate() {
            for eta in pts.iter().skip(i).take(16) {
                let r = antipodal_distance(&g, xi, eta).unwrap();
                assert!(r.method_gap <= 1e-9, "seed {seed}: {r:?}");
                pairs += 1;
            }
        }
        assert!(pairs >= 1000);
    }
}

#[test]
fn round_circle_closed_form() {
    let c = SphericalGraph::circle(2.0 * PI).unwrap();
    for i in 0..200 {
        let a = 2.0 * PI * i as f64 / 200.0;
        let b = (a * 1.7 + 0.3) % (2.0 * PI);
        let xi = c.from_user(&UserPoint::Edge { edge: 0, offset: a }).unwrap();
        let eta = c.from_user(&UserPoint::Edge { edge: 0, offset: b }).unwrap();
        let d = c.intrinsic_distance(&xi, &eta);
        let r = antipodal_distance(&c, &xi, &eta).unwrap();
        assert!((r.value - (PI - d)).abs() <= 1e-12, "{a} {b}: {r:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetric_and_bounded(seed in 0u64..10_000) {
        let (g, pts) = graph_and_points(seed, 2);
        let (xi, eta) = (pts[0], pts[1]);
        let ab = antipodal_distance(&g, &xi, &eta).unwrap();
        let ba = antipodal_distance(&g, &eta, &xi).unwrap();
        prop_assert!((ab.value - ba.value).abs() <= 1e-9);
        prop_assert!(ab.method_gap <= 1e-9);
        let d = g.intrinsic_distance(&xi, &eta).min(PI);
        prop_assert!(ab.value >= PI - d - 1e-9);
        prop_assert!(ab.value <= PI + 1e-12);
        let set = antipode_set(&g, &xi).unwrap();
        for z in set.sample(&g, 7) {
            prop_assert!(g.intrinsic_distance(&xi, &z) >= PI - 1e-9);
            prop_assert!(ab.value >= g.intrinsic_distance(&z, &eta).min(PI) - 1e-9);
        }
    }

    #[test]
    fn self_antipodal_distance_is_pi(seed in 0u64..10_000) {
        let (g, pts) = graph_and_points(seed, 1);
        let prep = PreparedSource::new(&g, &pts[0]).unwrap();
        let v = gcba_core::geodesy::antipodal_value(&g, &prep, &prep.field);
        prop_assert!((v - PI).abs() <= 1e-12);
    }

    #[test]
    fn subdivision_preserves_distances(seed in 0u64..10_000, cut in 0.05f64..0.95) {
        let (g, pts) = graph_and_points(seed, 2);
        let len = g.user_edges().next().unwrap().2;
        let Ok(h) = g.with_extra_cut(0, cut * len) else { return Ok(()) };
        let (a, b) = (g.to_user(&pts[0]), g.to_user(&pts[1]));
        let (ha, hb) = (h.from_user(&a).unwrap(), h.from_user(&b).unwrap());
        prop_assert!((g.intrinsic_distance(&pts[0], &pts[1]) - h.intrinsic_distance(&ha, &hb)).abs() <= 1e-12);
        let r1 = antipodal_distance(&g, &pts[0], &pts[1]).unwrap().value;
        let r2 = antipodal_distance(&h, &ha, &hb).unwrap().value;
        prop_assert!((r1 - r2).abs() <= 1e-9);
    }
}
