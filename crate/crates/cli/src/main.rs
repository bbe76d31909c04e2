use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gcba_core::analysis::{self, OpennessConfig};
use gcba_core::cone::cone_distance;
use gcba_core::geodesy::{self, antipodal_distance};
use gcba_core::model::{
    make_space, validate_space_with, ConePoint, ConePointDescription, ConeSpace, GraphPoint, Space, SpaceDescription,
    SphericalGraph, UserPoint,
};
use gcba_core::regularity::{self, Collection};
use gcba_core::retraction::FiberSpec;
use gcba_core::Error;
use serde::Serialize;
use serde_json::Value;

#[derive(Parser)]
#[command(name = "gcba-kit", version, about = "Antipodal distances, noncritical maps and fiber retractions on graph and cone models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SpaceArg {
    /// Space description file (JSON).
    #[arg(long)]
    space: PathBuf,
}

#[derive(Args)]
struct Margins {
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
}

/// A distance map `(|a_1·|, …, |a_k·|)` at `p` with regular point `b`.
#[derive(Args)]
struct MapArgs {
    #[command(flatten)]
    space: SpaceArg,
    /// Base point, e.g. '{"radius":0}' for the apex.
    #[arg(long)]
    p: String,
    /// JSON list of cone points.
    #[arg(long)]
    a: String,
    #[arg(long)]
    b: String,
    #[command(flatten)]
    margins: Margins,
}

#[derive(Args)]
struct FiberArgs {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long)]
    rho: f64,
    /// Velocity constant; measured from the directions at `p` when absent.
    #[arg(long)]
    c: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a space description.
    Validate {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
    },
    /// Distance between two points.
    Distance {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
    /// Antipode set of a point of a graph.
    Antipodes {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        xi: String,
    },
    /// Antipodal distance by both formulas.
    AntipodalDistance {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        xi: String,
        #[arg(long)]
        eta: String,
    },
    /// Noncriticality of a collection on a graph, or of a distance map on a cone.
    CheckNoncritical {
        #[command(flatten)]
        space: SpaceArg,
        /// Graph spaces: JSON list of directions.
        #[arg(long)]
        xis: Option<String>,
        /// Graph spaces: regular direction.
        #[arg(long)]
        eta: Option<String>,
        /// Cone spaces: base point and map.
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        a: Option<String>,
        #[arg(long)]
        b: Option<String>,
        /// Cone spaces: check on the ball B(p, rho).
        #[arg(long)]
        rho: Option<f64>,
        /// Net spacing for --rho (default rho/8).
        #[arg(long)]
        h: Option<f64>,
        /// Also report the companion map (f, |p·|).
        #[arg(long)]
        companion: bool,
        #[command(flatten)]
        margins: Margins,
    },
    /// Best regular direction for a collection on a graph.
    SearchEta {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        xis: String,
    },
    /// Point at distance π/2 from ξ_2..ξ_k, inside the ξ_1 ball and outside the η ball.
    FindV {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        xis: String,
        #[arg(long)]
        eta: String,
        #[command(flatten)]
        margins: Margins,
    },
    /// Retract a point onto the fiber through p.
    Retract {
        #[command(flatten)]
        fiber: FiberArgs,
        #[arg(long)]
        x: String,
    },
    /// Sample fiber points near p (k = 1).
    SampleFiber {
        #[command(flatten)]
        fiber: FiberArgs,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Contract sampled fiber points to p through the retraction.
    Contract {
        #[command(flatten)]
        fiber: FiberArgs,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 8)]
        points: usize,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical openness constant and bi-Lipschitz bounds.
    Openness {
        #[command(flatten)]
        map: MapArgs,
        /// JSON list of radii.
        #[arg(long, default_value = "[0.05]")]
        radii: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Noncriticality of (f, |p·|) on fiber spheres.
    FiberSphere {
        #[command(flatten)]
        fiber: FiberArgs,
        #[arg(long, default_value = "[0.4,0.2,0.1,0.05,0.025]")]
        radii: String,
        #[arg(long, default_value_t = 4)]
        per_radius: usize,
    },
    /// Best margin over configurations on circle(2π+θ).
    Example14 {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.0)]
        theta_min: f64,
        #[arg(long)]
        theta_max: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Normalized map f̃ from a circle to the unit circle.
    SphereMap {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        xis: String,
        #[arg(long)]
        eta: String,
        #[command(flatten)]
        margins: Margins,
        #[arg(long, default_value_t = 1e-3)]
        resolution: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Input(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_internal() {
            Failure::Internal(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

type Outcome = std::result::Result<Value, Failure>;

fn input<T>(msg: impl Into<String>) -> std::result::Result<T, Failure> {
    Err(Failure::Input(msg.into()))
}

fn load_space(arg: &SpaceArg) -> std::result::Result<Space, Failure> {
    let text = fs::read_to_string(&arg.space).map_err(|e| Failure::Input(format!("{}: {e}", arg.space.display())))?;
    Ok(make_space(&text)?)
}

fn graph_of(arg: &SpaceArg) -> std::result::Result<SphericalGraph, Failure> {
    match load_space(arg)? {
        Space::Graph(g) => Ok(g),
        Space::Cone(_) => input("this command needs a graph space"),
    }
}

fn cone_of(arg: &SpaceArg) -> std::result::Result<ConeSpace, Failure> {
    match load_space(arg)? {
        Space::Cone(k) => Ok(k),
        Space::Graph(_) => input("this command needs a cone space"),
    }
}

fn parse<T: serde::de::DeserializeOwned>(what: &str, text: &str) -> std::result::Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::Input(format!("--{what}: {e}")))
}

fn graph_point(g: &SphericalGraph, what: &str, text: &str) -> std::result::Result<GraphPoint, Failure> {
    Ok(g.from_user(&parse::<UserPoint>(what, text)?)?)
}

fn graph_points(g: &SphericalGraph, what: &str, text: &str) -> std::result::Result<Vec<GraphPoint>, Failure> {
    parse::<Vec<UserPoint>>(what, text)?.iter().map(|p| g.from_user(p).map_err(Failure::from)).collect()
}

fn cone_point(k: &ConeSpace, what: &str, text: &str) -> std::result::Result<ConePoint, Failure> {
    Ok(k.from_user(&parse::<ConePointDescription>(what, text)?)?)
}

fn cone_points(k: &ConeSpace, what: &str, text: &str) -> std::result::Result<Vec<ConePoint>, Failure> {
    parse::<Vec<ConePointDescription>>(what, text)?.iter().map(|p| k.from_user(p).map_err(Failure::from)).collect()
}

struct Map {
    cone: ConeSpace,
    p: ConePoint,
    a: Vec<ConePoint>,
    b: ConePoint,
    eps: f64,
    delta: f64,
}

fn map_of(m: &MapArgs) -> std::result::Result<Map, Failure> {
    let cone = cone_of(&m.space)?;
    Ok(Map {
        p: cone_point(&cone, "p", &m.p)?,
        a: cone_points(&cone, "a", &m.a)?,
        b: cone_point(&cone, "b", &m.b)?,
        eps: m.margins.eps,
        delta: m.margins.delta,
        cone,
    })
}

fn fiber_of(f: &FiberArgs) -> std::result::Result<FiberSpec, Failure> {
    let m = map_of(&f.map)?;
    Ok(FiberSpec::new(m.cone, m.p, m.a, m.b, m.eps, m.delta, f.rho, f.c)?)
}

fn json<T: Serialize>(v: &T) -> Outcome {
    serde_json::to_value(v).map_err(|e| Failure::Internal(e.to_string()))
}

fn write_atomic(path: &Path, text: &str) -> std::result::Result<(), Failure> {
    let tmp = path.with_extension("tmp~");
    fs::write(&tmp, text)
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn fiber_point_rows(cone: &ConeSpace, pts: &[ConePoint], spec: &FiberSpec) -> (Vec<Value>, String) {
    let mut csv = String::from("vertex,edge,offset,radius,residual,dist_p\n");
    let mut rows = Vec::new();
    for x in pts {
        let d = cone.to_user(x);
        let opt = |v: Option<String>| v.unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            opt(d.vertex.map(|v| v.to_string())),
            opt(d.edge.map(|v| v.to_string())),
            opt(d.offset.map(|v| v.to_string())),
            d.radius,
            spec.residual(x),
            spec.dist_p(x)
        ));
        rows.push(serde_json::json!({ "point": d, "residual": spec.residual(x), "dist_p": spec.dist_p(x) }));
    }
    (rows, csv)
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Validate { space, samples, seed } => {
            let text = fs::read_to_string(&space.space).map_err(|e| Failure::Input(format!("{}: {e}", space.space.display())))?;
            let built = SpaceDescription::parse(&text)?.build()?;
            json(&validate_space_with(&built, samples, seed))
        }
        Command::Distance { space, x, y } => match load_space(&space)? {
            Space::Graph(g) => {
                let (x, y) = (graph_point(&g, "x", &x)?, graph_point(&g, "y", &y)?);
                Ok(serde_json::json!({
                    "distance": geodesy::distance(&g, &x, &y, g.mode() == gcba_core::model::MetricMode::PiTruncated)?,
                    "intrinsic": geodesy::distance(&g, &x, &y, false)?,
                    "truncated": geodesy::distance(&g, &x, &y, true)?,
                }))
            }
            Space::Cone(k) => {
                let (x, y) = (cone_point(&k, "x", &x)?, cone_point(&k, "y", &y)?);
                Ok(serde_json::json!({ "distance": cone_distance(&k, &x, &y) }))
            }
        },
        Command::Antipodes { space, xi } => {
            let g = graph_of(&space)?;
            let xi = graph_point(&g, "xi", &xi)?;
            let set = geodesy::antipode_set(&g, &xi)?;
            Ok(serde_json::json!({ "xi": g.to_user(&xi), "antipodes": set.to_user(&g) }))
        }
        Command::AntipodalDistance { space, xi, eta } => {
            let g = graph_of(&space)?;
            let (xi, eta) = (graph_point(&g, "xi", &xi)?, graph_point(&g, "eta", &eta)?);
            let r = antipodal_distance(&g, &xi, &eta)?;
            if r.method_gap > 1e-6 {
                return Err(Failure::Internal(format!("dual formulas disagree: {r:?}")));
            }
            json(&r)
        }
        Command::CheckNoncritical { space, xis, eta, p, a, b, rho, h, companion, margins } => match load_space(&space)? {
            Space::Graph(g) => {
                let (Some(xis), Some(eta)) = (xis, eta) else {
                    return input("graph spaces need --xis and --eta");
                };
                let coll = Collection::new(graph_points(&g, "xis", &xis)?, Some(graph_point(&g, "eta", &eta)?));
                json(&regularity::check_collection(&g, &coll, margins.eps, margins.delta)?)
            }
            Space::Cone(k) => {
                let (Some(p), Some(a), Some(b)) = (p, a, b) else {
                    return input("cone spaces need --p, --a and --b");
                };
                let (p, a, b) = (cone_point(&k, "p", &p)?, cone_points(&k, "a", &a)?, cone_point(&k, "b", &b)?);
                match rho {
                    None => json(&regularity::check_map_at_point(&k, &p, &a, &b, margins.eps, margins.delta)?),
                    Some(rho) => json(&regularity::check_map_rho(
                        &k,
                        &p,
                        &a,
                        &b,
                        margins.eps,
                        margins.delta,
                        rho,
                        h.unwrap_or(rho / 8.0),
                        companion,
                    )?),
                }
            }
        },
        Command::SearchEta { space, xis } => {
            let g = graph_of(&space)?;
            let xis = graph_points(&g, "xis", &xis)?;
            let (eta, margin) = regularity::search_regular_direction(&g, &xis)?;
            Ok(serde_json::json!({ "eta": g.to_user(&eta), "margin": margin }))
        }
        Command::FindV { space, xis, eta, margins } => {
            let g = graph_of(&space)?;
            let coll = Collection::new(graph_points(&g, "xis", &xis)?, Some(graph_point(&g, "eta", &eta)?));
            let r = regularity::find_v(&g, &coll, margins.eps, margins.delta)?;
            json(&regularity::FindVReport {
                v: g.to_user(&r.v),
                dist_xi1: r.dist_xi1,
                dist_eta: r.dist_eta,
                equality_residuals: r.equality_residuals,
                m1: r.m1,
                m2: r.m2,
                method: r.method,
            })
        }
        Command::Retract { fiber, x } => {
            let spec = fiber_of(&fiber)?;
            let x = cone_point(&spec.cone, "x", &x)?;
            json(&spec.retract(&x)?)
        }
        Command::SampleFiber { fiber, r, n, out } => {
            let spec = fiber_of(&fiber)?;
            let pts = spec.sample_fiber(r, n)?;
            let (rows, csv) = fiber_point_rows(&spec.cone, &pts, &spec);
            if let Some(out) = out {
                write_atomic(&out, &csv)?;
            }
            Ok(serde_json::json!({ "r": r, "points": rows, "lipschitz": spec.lipschitz, "c": spec.c }))
        }
        Command::Contract { fiber, r, points, steps, out } => {
            let spec = fiber_of(&fiber)?;
            let trace = spec.contract_fiber_ball(r, points, steps)?;
            if let Some(out) = out {
                write_atomic(&out, &trace.to_csv())?;
            }
            json(&trace)
        }
        Command::Openness { map, radii, seed } => {
            let m = map_of(&map)?;
            let radii: Vec<f64> = parse("radii", &radii)?;
            let mut config = OpennessConfig::default();
            if let Some(seed) = seed {
                config.seed = seed;
            }
            json(&analysis::openness_estimate(&m.cone, &m.p, &m.a, &m.b, m.eps, m.delta, &radii, &config)?)
        }
        Command::FiberSphere { fiber, radii, per_radius } => {
            let spec = fiber_of(&fiber)?;
            let radii: Vec<f64> = parse("radii", &radii)?;
            json(&analysis::fiber_sphere_check(&spec, &radii, per_radius)?)
        }
        Command::Example14 { k, theta_min, theta_max, step, out } => {
            if !(step > 0.0) || theta_max < theta_min {
                return input("need step > 0 and theta-max ≥ theta-min");
            }
            let n = ((theta_max - theta_min) / step + 1e-9).floor() as usize;
            let grid: Vec<f64> = (0..=n).map(|i| theta_min + i as f64 * step).collect();
            let rows = analysis::example14_sweep(&grid, k)?;
            if let Some(out) = &out {
                write_atomic(out, &analysis::sweep_csv(&rows))?;
            }
            let boundary = analysis::sign_change(&rows);
            Ok(serde_json::json!({
                "k": k,
                "points": rows.len(),
                "sign_change": boundary.map(|(lo, hi)| [lo, hi]),
                "rows": if out.is_none() { json(&rows)? } else { Value::Null },
            }))
        }
        Command::SphereMap { space, xis, eta, margins, resolution, out } => {
            let g = graph_of(&space)?;
            let xis = graph_points(&g, "xis", &xis)?;
            let eta = graph_point(&g, "eta", &eta)?;
            let r = analysis::sphere_map(&g, &xis, &eta, margins.eps, margins.delta, resolution)?;
            if let Some(out) = out {
                write_atomic(&out, &r.to_csv())?;
            }
            json(&r)
        }
    }
}

/// Rounds every float to 12 significant digits, except point coordinates,
/// which are echoed at full precision so they re-parse exactly.
fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or_default();
            if let Some(r) = format!("{x:.11e}").parse::<f64>().ok().and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => {
            let is_point = map.contains_key("offset") && map.contains_key("edge") || map.contains_key("radius") && map.len() <= 4;
            if !is_point {
                map.values_mut().for_each(round_floats);
            }
        }
        _ => {}
    }
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("GCBA_KIT_THREADS").ok().and_then(|s| s.parse::<usize>().ok()).filter(|n| *n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(mut v) => {
            round_floats(&mut v);
            match serde_json::to_string_pretty(&v) {
                Ok(text) => {
                    println!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("gcba-kit: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Err(Failure::Input(msg)) => {
            eprintln!("gcba-kit: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("gcba-kit: {msg}");
            ExitCode::from(2)
        }
    }
}
