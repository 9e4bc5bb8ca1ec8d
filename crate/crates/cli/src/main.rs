use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use polyrig::generators::{self, verify_equal_face_diagonals};
use polyrig::io::{self, MeasurementSet};
use polyrig::measure::Point;
use polyrig::polygon::{self, OracleResult, Point2, PointConfig2D};
use polyrig::rigidity::{self, FlexOptions, Mode, Pool};
use polyrig::witness::{point_set_witness, Admissibility, PointProblem, WitnessOptions, WitnessReport};
use polyrig::Error;

#[derive(Parser)]
#[command(name = "polyrig", version, about = "Measurement sufficiency for convex polyhedra and planar point sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank test of a measurement pool on an OFF polyhedron.
    Analyze {
        file: PathBuf,
        #[command(flatten)]
        rank: RankArgs,
        #[arg(long, default_value = "face-distances")]
        pool: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy extraction of a sufficient subset of a pool.
    Select {
        file: PathBuf,
        #[command(flatten)]
        rank: RankArgs,
        #[arg(long, default_value = "face-distances")]
        pool: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank test of an explicit measurement set.
    Check {
        file: PathBuf,
        measurements: PathBuf,
        #[command(flatten)]
        rank: RankArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a solid (OFF) or a planar configuration (JSON).
    Generate {
        name: String,
        #[command(flatten)]
        params: GenerateArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Look for a non-congruent configuration with the same measurements.
    Witness {
        /// OFF polyhedron, or point-configuration JSON.
        input: PathBuf,
        measurements: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, default_value = "congruence")]
        mode: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Planar configurations and oracles.
    Polygon {
        #[command(subcommand)]
        command: PolygonCommand,
    },
}

#[derive(Args)]
struct RankArgs {
    #[arg(long, default_value = "congruence")]
    mode: String,
    /// Relative singular-value threshold.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, allow_hyphen_values = true)]
    q1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    q2: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    side: f64,
    #[arg(long, default_value_t = 1.0)]
    a12: f64,
    /// Comma-separated staircase angles α_2..α_(n-1), radians.
    #[arg(long, value_delimiter = ',')]
    angles: Vec<f64>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, env = "POLYRIG_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    restarts: usize,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    /// Cluster modulo reflections too.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    allow_reflection: bool,
}

#[derive(Subcommand)]
enum PolygonCommand {
    /// First-order sufficiency of a planar measurement set.
    Analyze {
        config: PathBuf,
        measurements: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximization oracles.
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
    /// Build a staircase polygon and search for competitors.
    Staircase {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        a12: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        angles: Vec<f64>,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    Square {
        #[arg(long, default_value_t = 1.0)]
        d: f64,
    },
    RightQuad {
        #[arg(long)]
        ab: f64,
        #[arg(long)]
        ad: f64,
        #[arg(long)]
        ac: f64,
    },
    MaxDiag {
        #[arg(long)]
        bd: f64,
        #[arg(long)]
        theta1: f64,
        #[arg(long)]
        theta2: f64,
    },
    Octagon,
}

/// Exit status of a command that ran to completion.
enum Verdict {
    Positive,
    Negative,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Verdict::Positive) => ExitCode::SUCCESS,
        Ok(Verdict::Negative) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> polyrig::Result<Verdict> {
    match cmd {
        Command::Analyze { file, rank, pool, out } => {
            let (poly, r) = load_off(&file)?;
            let (mode, tol) = rank.parse()?;
            let pool = pool_for(&pool, &poly, mode)?;
            let rep = rigidity::is_sufficient(&poly, &r, &pool, mode, tol)?;
            emit(&io::report_json(&rep), out.as_deref())?;
            Ok(verdict(rep.sufficient))
        }
        Command::Select { file, rank, pool, out } => {
            let (poly, r) = load_off(&file)?;
            let (mode, tol) = rank.parse()?;
            let pool = pool_for(&pool, &poly, mode)?;
            let rep = rigidity::greedy_minimal_subset(&poly, &r, &pool, mode, tol)?;
            if !rep.sufficient {
                eprintln!("error: {}", Error::PoolInsufficient { achieved: rep.achieved_rank, target: rep.target_rank });
                return Ok(Verdict::Negative);
            }
            emit(&io::measurement_set_json(&MeasurementSet::Polyhedral(rep.selected.clone())), out.as_deref())?;
            eprintln!("selected {} measurements", rep.selected.len());
            Ok(Verdict::Positive)
        }
        Command::Check { file, measurements, rank, out } => {
            let (poly, r) = load_off(&file)?;
            let (mode, tol) = rank.parse()?;
            let MeasurementSet::Polyhedral(s) = io::parse_measurements(&read(&measurements)?)? else {
                return Err(Error::InvalidArgument("check needs face_distance / face_angle / dihedral measurements".into()));
            };
            let rep = rigidity::is_sufficient(&poly, &r, &s, mode, tol)?;
            emit(&io::report_json(&rep), out.as_deref())?;
            Ok(verdict(rep.sufficient))
        }
        Command::Generate { name, params, out } => generate(&name, &params, out.as_deref()),
        Command::Witness { input, measurements, search, mode, out } => {
            let set = io::parse_measurements(&read(&measurements)?)?;
            let is_off = input.extension().is_some_and(|e| e.eq_ignore_ascii_case("off"));
            match (is_off, set) {
                (true, MeasurementSet::Polyhedral(s)) => {
                    let (poly, r) = load_off(&input)?;
                    let mode: Mode = mode.parse()?;
                    let w = rigidity::flex_witness(&poly, &r, &s, mode, &FlexOptions::default())?;
                    let value = match &w {
                        Some(w) => json!({
                            "kind": "flex",
                            "witness": io::points_json(3, &w.realization.vertices),
                            "separation": w.separation,
                            "residual": w.residual,
                            "iterations": w.iterations,
                        }),
                        None => json!({"kind": "flex", "witness": null, "note": "projection returned to the input; possible second-order rigidity"}),
                    };
                    emit(&value, out.as_deref())?;
                    eprintln!("{}", if w.is_some() { "witness found" } else { "none" });
                    Ok(verdict(w.is_some()))
                }
                (false, MeasurementSet::Points { dim, measurements }) => {
                    let cfg = io::parse_config(&read(&input)?)?;
                    if cfg.dim != dim {
                        return Err(Error::InvalidArgument(format!("configuration has dim {} but measurements dim {dim}", cfg.dim)));
                    }
                    let mut problem = PointProblem::new(dim, cfg.points, measurements);
                    if !cfg.faces.is_empty() {
                        problem = problem
                            .with_coplanar(cfg.faces.iter().filter(|f| f.len() >= 4).cloned().collect())
                            .with_admissibility(Admissibility::ConvexPolyhedron(cfg.faces.clone()));
                    } else if cfg.convex {
                        problem = problem.with_admissibility(Admissibility::ConvexPolygon);
                    }
                    let rep = point_set_witness(&problem, &search.options())?;
                    emit(&witness_json(dim, &rep), out.as_deref())?;
                    eprintln!("{}", witness_summary(&rep));
                    Ok(verdict(rep.witness.is_some()))
                }
                (true, _) => Err(Error::InvalidArgument("an OFF input needs polyhedral measurements".into())),
                (false, _) => Err(Error::InvalidArgument("a point configuration needs distance / angle measurements".into())),
            }
        }
        Command::Polygon { command } => polygon_command(command),
    }
}

impl RankArgs {
    fn parse(&self) -> polyrig::Result<(Mode, f64)> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidArgument(format!("--tol must lie in (0, 1), got {}", self.tol)));
        }
        Ok((self.mode.parse()?, self.tol))
    }
}

impl SearchArgs {
    fn options(&self) -> WitnessOptions {
        WitnessOptions {
            restarts: self.restarts,
            seed: self.seed,
            noise: self.noise,
            allow_reflection: self.allow_reflection,
            ..WitnessOptions::default()
        }
    }
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Positive
    } else {
        Verdict::Negative
    }
}

fn read(path: &Path) -> polyrig::Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_off(path: &Path) -> polyrig::Result<(polyrig::AbstractPolyhedron, polyrig::Realization)> {
    io::load_polyhedron(&read(path)?)
}

fn pool_for(name: &str, poly: &polyrig::AbstractPolyhedron, mode: Mode) -> polyrig::Result<Vec<polyrig::Measurement3D>> {
    let pool: Pool = name.parse()?;
    let ms = pool.measurements(poly, mode);
    if ms.is_empty() {
        return Err(Error::InvalidArgument(format!("pool `{name}` is empty in {mode:?} mode")));
    }
    Ok(ms)
}

fn emit(v: &Value, out: Option<&Path>) -> polyrig::Result<()> {
    write_text(&io::to_canonical_json(v), out)
}

fn write_text(text: &str, out: Option<&Path>) -> polyrig::Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn generate(name: &str, a: &GenerateArgs, out: Option<&Path>) -> polyrig::Result<Verdict> {
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| Error::InvalidArgument(format!("{name} needs --{flag}")));
    let (poly, r) = match name {
        "hexa-a" => generators::hexahedron_family_a(need(a.q1, "q1")?)?,
        "hexa-b" => generators::hexahedron_family_b(need(a.q1, "q1")?, need(a.q2, "q2")?)?,
        "staircase-ngon" | "regular-ngon" => {
            let n = a.n.ok_or_else(|| Error::InvalidArgument(format!("{name} needs --n")))?;
            let cfg = if name == "regular-ngon" {
                polygon::regular_ngon(n, a.side)?
            } else {
                polygon::staircase_polygon(n, a.a12, &a.angles)?
            };
            emit(&io::config_json(2, &cfg.to_points3(), &[], true), out)?;
            return Ok(Verdict::Positive);
        }
        other => generators::platonic(other, a.scale)?,
    };
    if name.starts_with("hexa") {
        eprintln!("face diagonal deviation {:.3e}", verify_equal_face_diagonals(&poly, &r)?);
    }
    write_text(&io::write_off(&r.vertices, poly.faces()), out)?;
    Ok(Verdict::Positive)
}

fn witness_json(dim: usize, rep: &WitnessReport) -> Value {
    json!({
        "kind": "point-set",
        "restarts": rep.restarts,
        "converged": rep.converged,
        "rejected": rep.rejected,
        "clusters": rep.clusters.iter().map(|c| json!({"size": c.size, "containsReference": c.contains_reference})).collect::<Vec<_>>(),
        "witness": rep.witness.as_ref().map(|w| io::points_json(dim, w)),
        "witnessResidual": rep.witness_residual,
    })
}

fn witness_summary(rep: &WitnessReport) -> String {
    match rep.witness {
        Some(_) => format!("witness found ({} clusters from {}/{} converged restarts)", rep.clusters.len(), rep.converged, rep.restarts),
        None => format!("none: {}/{} restarts converged to the reference cluster", rep.reference_hits(), rep.restarts),
    }
}

fn points2_json(p: &[Point2]) -> Value {
    Value::Array(p.iter().map(|q| json!([q.x, q.y])).collect())
}

fn oracle_json(r: &OracleResult) -> Value {
    json!({"value": r.value, "params": r.params, "argmax": points2_json(&r.argmax), "nearMaximizers": r.near_maximizers.len()})
}

fn polygon_command(cmd: PolygonCommand) -> polyrig::Result<Verdict> {
    match cmd {
        PolygonCommand::Analyze { config, measurements, tol, out } => {
            let cfg = io::parse_config(&read(&config)?)?;
            if cfg.dim != 2 {
                return Err(Error::InvalidArgument("polygon analyze needs a dim 2 configuration".into()));
            }
            let MeasurementSet::Points { dim: 2, measurements } = io::parse_measurements(&read(&measurements)?)? else {
                return Err(Error::InvalidArgument("polygon analyze needs dim 2 distance / angle measurements".into()));
            };
            let pts = PointConfig2D::new(cfg.points.iter().map(|p| Point2::new(p.x, p.y)).collect())?;
            let r = polygon::sufficiency2d(&pts, &measurements, tol)?;
            let note = if r.sufficient { "first-order sufficient" } else { "not first-order sufficient; candidate for second-order determination" };
            emit(&json!({"rank": r.rank, "target": r.target, "sufficient": r.sufficient, "note": note}), out.as_deref())?;
            Ok(verdict(r.sufficient))
        }
        PolygonCommand::Oracle { which, out } => {
            let value = match which {
                OracleCommand::Square { d } => oracle_json(&polygon::square_angle_oracle(d)?),
                OracleCommand::RightQuad { ab, ad, ac } => oracle_json(&polygon::right_angle_quad_oracle(ab, ad, ac)?),
                OracleCommand::MaxDiag { bd, theta1, theta2 } => oracle_json(&polygon::max_diagonal_oracle(bd, theta1, theta2)?),
                OracleCommand::Octagon => {
                    let r = polygon::octagon_distance_oracle()?;
                    json!({
                        "regularDistance": r.regular_distance,
                        "maxDistance": r.max_distance,
                        "argmax": points2_json(&r.argmax),
                        "argmaxDeviation": r.argmax_deviation,
                        "midpointAngles": [r.midpoint_angles.0, r.midpoint_angles.1],
                        "midpointDistance": r.midpoint_distance,
                    })
                }
            };
            emit(&value, out.as_deref())?;
            Ok(Verdict::Positive)
        }
        PolygonCommand::Staircase { n, a12, angles, search, out } => {
            let cfg = polygon::staircase_polygon(n, a12, &angles)?;
            let pts: Vec<Point> = cfg.to_points3();
            let problem = PointProblem::new(2, pts.clone(), polygon::staircase_measurements(n))
                .with_admissibility(Admissibility::ConvexPolygon);
            let rep = point_set_witness(&problem, &search.options())?;
            emit(&json!({"points": io::points_json(2, &pts), "search": witness_json(2, &rep)}), out.as_deref())?;
            eprintln!("{}", witness_summary(&rep));
            Ok(verdict(rep.witness.is_none()))
        }
    }
}
