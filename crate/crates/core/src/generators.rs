//! Random valid spherical graphs for property tests and sweeps.

use std::f64::consts::PI;

use rand::Rng;

use crate::model::{GraphPoint, MetricMode, SphericalGraph};

/// A random connected graph with minimum degree 2 and girth at least 2π.
///
/// Starts from a subdivided circle of length in `[2π, 2π + 2]` and adds up
/// to three handles; a handle between `u` and `v` gets length at least
/// `2π - d(u, v)`, which keeps every new cycle long enough.
pub fn random_spherical_graph<R: Rng>(rng: &mut R) -> SphericalGraph {
    let total = 2.0 * PI + 2.0 * rng.gen::<f64>();
    let ring = rng.gen_range(2..=4usize);
    let mut weights: Vec<f64> = (0..ring).map(|_| 0.5 + rng.gen::<f64>()).collect();
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w *= total / sum);
    let mut edges: Vec<(usize, usize, f64)> = (0..ring).map(|i| (i, (i + 1) % ring, weights[i])).collect();
    let vertices = ring;
    let mut graph = SphericalGraph::from_edges(vertices, &edges, MetricMode::PiTruncated).expect("ring is well formed");

    let handles = rng.gen_range(0..=3usize);
    for _ in 0..handles {
        let u = rng.gen_range(0..vertices);
        let v = rng.gen_range(0..vertices);
        let d = graph.intrinsic_distance(&GraphPoint::Vertex(u), &GraphPoint::Vertex(v));
        let len = (2.0 * PI - d).max(0.3) + rng.gen::<f64>();
        edges.push((u, v, len));
        graph = SphericalGraph::from_edges(vertices, &edges, MetricMode::PiTruncated).expect("handle is well formed");
    }
    graph
}
