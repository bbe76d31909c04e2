//! Python bindings. Spaces and points cross the boundary as JSON text in the
//! same vocabulary as the command-line tool; reports come back as JSON text.

use gcba_core::analysis;
use gcba_core::geodesy;
use gcba_core::model::{make_space, validate_space, ConePoint, ConePointDescription, ConeSpace, GraphPoint, Space, SpaceDescription, SphericalGraph, UserPoint};
use gcba_core::regularity::{self, Collection};
use gcba_core::retraction::FiberSpec;
use gcba_core::{Error, Result};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    if e.is_internal() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn parse<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

fn dump<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string(v).map_err(|e| Error::Internal(e.to_string()))
}

fn graph(space: &str) -> Result<SphericalGraph> {
    match make_space(space)? {
        Space::Graph(g) => Ok(g),
        Space::Cone(_) => Err(Error::InvalidArgument("expected a graph space".into())),
    }
}

fn cone(space: &str) -> Result<ConeSpace> {
    match make_space(space)? {
        Space::Cone(k) => Ok(k),
        Space::Graph(_) => Err(Error::InvalidArgument("expected a cone space".into())),
    }
}

fn gpoint(g: &SphericalGraph, text: &str) -> Result<GraphPoint> {
    g.from_user(&parse::<UserPoint>(text)?)
}

fn gpoints(g: &SphericalGraph, text: &str) -> Result<Vec<GraphPoint>> {
    parse::<Vec<UserPoint>>(text)?.iter().map(|p| g.from_user(p)).collect()
}

fn cpoint(k: &ConeSpace, text: &str) -> Result<ConePoint> {
    k.from_user(&parse::<ConePointDescription>(text)?)
}

fn validate_impl(space: &str) -> Result<String> {
    dump(&validate_space(&SpaceDescription::parse(space)?.build()?))
}

fn distance_impl(space: &str, x: &str, y: &str) -> Result<f64> {
    match make_space(space)? {
        Space::Graph(g) => geodesy::distance(&g, &gpoint(&g, x)?, &gpoint(&g, y)?, true),
        Space::Cone(k) => Ok(gcba_core::cone::cone_distance(&k, &cpoint(&k, x)?, &cpoint(&k, y)?)),
    }
}

fn antipodal_impl(space: &str, xi: &str, eta: &str) -> Result<String> {
    let g = graph(space)?;
    dump(&geodesy::antipodal_distance(&g, &gpoint(&g, xi)?, &gpoint(&g, eta)?)?)
}

fn check_impl(space: &str, xis: &str, eta: &str, eps: f64, delta: f64) -> Result<String> {
    let g = graph(space)?;
    let coll = Collection::new(gpoints(&g, xis)?, Some(gpoint(&g, eta)?));
    dump(&regularity::check_collection(&g, &coll, eps, delta)?)
}

fn search_impl(space: &str, xis: &str) -> Result<String> {
    let g = graph(space)?;
    let (eta, margin) = regularity::search_regular_direction(&g, &gpoints(&g, xis)?)?;
    dump(&serde_json::json!({ "eta": g.to_user(&eta), "margin": margin }))
}

#[allow(clippy::too_many_arguments)]
fn retract_impl(space: &str, p: &str, a: &str, b: &str, eps: f64, delta: f64, rho: f64, x: &str, c: Option<f64>) -> Result<String> {
    let k = cone(space)?;
    let a_list = parse::<Vec<ConePointDescription>>(a)?.iter().map(|q| k.from_user(q)).collect::<Result<Vec<_>>>()?;
    let spec = FiberSpec::new(k.clone(), cpoint(&k, p)?, a_list, cpoint(&k, b)?, eps, delta, rho, c)?;
    dump(&spec.retract(&cpoint(&k, x)?)?)
}

fn sphere_map_impl(space: &str, xis: &str, eta: &str, eps: f64, delta: f64, resolution: f64) -> Result<String> {
    let g = graph(space)?;
    dump(&analysis::sphere_map(&g, &gpoints(&g, xis)?, &gpoint(&g, eta)?, eps, delta, resolution)?)
}

/// Validation report for a space description.
#[pyfunction]
fn validate(space: &str) -> PyResult<String> {
    validate_impl(space).map_err(to_py)
}

/// Truncated distance on a graph, cone distance on a cone.
#[pyfunction]
fn distance(space: &str, x: &str, y: &str) -> PyResult<f64> {
    distance_impl(space, x, y).map_err(to_py)
}

#[pyfunction]
fn antipodal_distance(space: &str, xi: &str, eta: &str) -> PyResult<String> {
    antipodal_impl(space, xi, eta).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (space, xis, eta, eps = 0.1, delta = 0.1))]
fn check_noncritical(space: &str, xis: &str, eta: &str, eps: f64, delta: f64) -> PyResult<String> {
    check_impl(space, xis, eta, eps, delta).map_err(to_py)
}

#[pyfunction]
fn search_eta(space: &str, xis: &str) -> PyResult<String> {
    search_impl(space, xis).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (space, p, a, b, eps, delta, rho, x, c = None))]
#[allow(clippy::too_many_arguments)]
fn retract(space: &str, p: &str, a: &str, b: &str, eps: f64, delta: f64, rho: f64, x: &str, c: Option<f64>) -> PyResult<String> {
    retract_impl(space, p, a, b, eps, delta, rho, x, c).map_err(to_py)
}

type SweepTuple = (f64, usize, f64, f64, Option<f64>, f64);

/// Rows `(theta, k, best_margin, xi1, xi2, eta)` of the circle sweep.
#[pyfunction]
fn example14_sweep(thetas: Vec<f64>, k: usize) -> PyResult<Vec<SweepTuple>> {
    let rows = analysis::example14_sweep(&thetas, k).map_err(to_py)?;
    Ok(rows.into_iter().map(|r| (r.theta, r.k, r.best_margin, r.xi1, r.xi2, r.eta)).collect())
}

#[pyfunction]
#[pyo3(signature = (space, xis, eta, eps = 0.1, delta = 0.1, resolution = 1e-3))]
fn sphere_map(space: &str, xis: &str, eta: &str, eps: f64, delta: f64, resolution: f64) -> PyResult<String> {
    sphere_map_impl(space, xis, eta, eps, delta, resolution).map_err(to_py)
}

#[pymodule]
fn gcba(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(antipodal_distance, m)?)?;
    m.add_function(wrap_pyfunction!(check_noncritical, m)?)?;
    m.add_function(wrap_pyfunction!(search_eta, m)?)?;
    m.add_function(wrap_pyfunction!(retract, m)?)?;
    m.add_function(wrap_pyfunction!(example14_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(sphere_map, m)?)?;
    Ok(())
}
