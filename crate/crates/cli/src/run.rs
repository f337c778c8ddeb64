use std::fs;
use std::path::Path;

use anyhow::Context;
use freebound::checks::{full_report, GeometryReport, Status};
use freebound::exemplars::{conformal_catenoid_rings, critical_catenoid, equatorial_disk, perturb};
use freebound::mesh::io::{read_mesh, write_mesh};
use freebound::solver::{minimize_area, ConvergenceReport, SolverConfig};
use freebound::steklov::steklov_spectrum;
use freebound::{AmbientConfig, ConvexAmbient, Error, Topology, TriMesh};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{Command, Exemplar, MeshArgs, RunConfig, SolveArgs};
use crate::schema;

pub const SCHEMA: u32 = 1;

/// Why a run did not exit cleanly.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments, unreadable input, invalid mesh or config.
    Usage(anyhow::Error),
    /// The run completed but a check or the solver failed.
    Checks(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::Usage(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Usage(e.into())
    }
}

pub type Outcome = Result<(), Failure>;

/// Result of one command before anything is written.
pub struct Produced {
    pub report: Option<Value>,
    pub failures: Vec<String>,
    pub summary: String,
}

#[derive(Debug, Serialize)]
struct MeshSummary {
    vertices: usize,
    faces: usize,
    topology: Topology,
    area: f64,
    boundary_length: f64,
}

fn summarize(mesh: &TriMesh) -> Result<MeshSummary, Error> {
    Ok(MeshSummary {
        vertices: mesh.num_vertices(),
        faces: mesh.num_faces(),
        topology: mesh.topology()?,
        area: mesh.area(),
        boundary_length: mesh.boundary_length()?,
    })
}

fn load_ambient(path: Option<&Path>) -> anyhow::Result<ConvexAmbient> {
    let Some(path) = path else {
        return Ok(ConvexAmbient::unit_ball());
    };
    let text = fs::read_to_string(path).with_context(|| format!("cannot read ambient config {}", path.display()))?;
    let config: AmbientConfig =
        serde_json::from_str(&text).with_context(|| format!("malformed ambient config {}", path.display()))?;
    ConvexAmbient::from_config(&config).with_context(|| format!("invalid ambient config {}", path.display()))
}

fn load_mesh(path: &Path) -> anyhow::Result<TriMesh> {
    read_mesh(path).with_context(|| format!("cannot load mesh {}", path.display()))
}

fn build_mesh(args: &MeshArgs, seed: u64) -> Result<TriMesh, Error> {
    let ball = ConvexAmbient::unit_ball();
    let mut mesh = match args.exemplar {
        Exemplar::Disk => equatorial_disk(args.n_radial, args.n_angular)?,
        Exemplar::Catenoid => {
            let n_s = match args.n_s {
                Some(n) => n,
                None => conformal_catenoid_rings(args.n_theta)?,
            };
            critical_catenoid(n_s, args.n_theta)?
        }
    };
    for _ in 0..args.refine {
        mesh = mesh.refine(&ball)?;
    }
    if let Some(a) = args.perturb {
        mesh = perturb(&mesh, &ball, a, seed)?;
    }
    Ok(mesh)
}

fn solver_config(args: &SolveArgs) -> SolverConfig {
    SolverConfig {
        max_iters: args.max_iters,
        tol_h: args.tol_h,
        tol_orth: args.tol_orth,
        smoothing: !args.no_smoothing,
        ..SolverConfig::default()
    }
}

/// Step underflow is a solver outcome, not a usage error.
fn solve(mesh: &TriMesh, ambient: &ConvexAmbient, args: &SolveArgs) -> Result<(TriMesh, Value, bool), Error> {
    match minimize_area(mesh, ambient, &solver_config(args)) {
        Ok((m, rep)) => {
            let ok = rep.converged;
            Ok((m, convergence_json(&rep), ok))
        }
        Err(Error::StepUnderflow(it)) => Ok((
            mesh.clone(),
            json!({ "converged": false, "error": format!("line search step underflow at iteration {it}") }),
            false,
        )),
        Err(e) => Err(e),
    }
}

fn convergence_json(rep: &ConvergenceReport) -> Value {
    serde_json::to_value(rep).expect("convergence report serializes")
}

fn spectrum_json(mesh: &TriMesh, num_eigs: usize) -> Result<Value, Error> {
    let spec = steklov_spectrum(mesh, num_eigs)?;
    let length = mesh.boundary_length()?;
    let sigma1 = spec.sigma1();
    let clusters = spec.multiplicities();
    let mut repeated = vec![false];
    for c in &clusters {
        repeated.extend(std::iter::repeat_n(*c > 1, *c));
    }
    Ok(json!({
        "eigenvalues": spec.eigenvalues,
        "sigma1": sigma1,
        "boundary_length": length,
        "sigma1_times_length": sigma1.map(|s| s * length),
        "multiplicities": clusters,
        "repeated": repeated,
    }))
}

fn check_failures(report: &GeometryReport) -> Vec<String> {
    report
        .checks
        .iter()
        .filter(|c| c.status == Status::Fail)
        .map(|c| format!("check {} failed (margin {:?})", c.name, c.margin))
        .collect()
}

fn envelope(run: &RunConfig, body: Value) -> Value {
    let mut out = json!({
        "schema": SCHEMA,
        "tool": "freebound",
        "version": run.version,
        "run": run,
    });
    if let (Value::Object(o), Value::Object(b)) = (&mut out, body) {
        o.extend(b);
    }
    out
}

fn check_table(report: &GeometryReport) -> String {
    let mut s = String::new();
    for c in &report.checks {
        let status = match c.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Skipped => "skip",
        };
        let margin = c.margin.map_or("-".to_string(), |m| format!("{m:+.6e}"));
        s.push_str(&format!("  {status:<4} {:<28} margin {margin}\n", c.name));
    }
    s
}

/// Runs a command and returns its report without touching output files.
pub fn produce(run: &RunConfig, write_files: bool) -> Result<Produced, Failure> {
    match &run.command {
        Command::Generate { mesh, out } => {
            let m = build_mesh(mesh, run.seed)?;
            if write_files {
                write_mesh(&m, out).with_context(|| format!("cannot write {}", out.display()))?;
            }
            let s = summarize(&m)?;
            Ok(Produced {
                report: None,
                failures: vec![],
                summary: format!(
                    "wrote {} ({} vertices, {} faces, chi {})",
                    out.display(),
                    s.vertices,
                    s.faces,
                    s.topology.euler_characteristic
                ),
            })
        }
        Command::Solve {
            input,
            solver,
            output,
            ..
        } => {
            let mesh = load_mesh(input)?;
            let ambient = load_ambient(solver.ambient.as_deref())?;
            let (relaxed, convergence, ok) = solve(&mesh, &ambient, solver)?;
            if let (true, Some(out)) = (write_files, output) {
                write_mesh(&relaxed, out).with_context(|| format!("cannot write {}", out.display()))?;
            }
            let summary = format!(
                "converged: {ok}, area {:.10}, boundary length {:.10}",
                relaxed.area(),
                relaxed.boundary_length()?
            );
            Ok(Produced {
                report: Some(envelope(
                    run,
                    json!({ "mesh": summarize(&relaxed)?, "convergence": convergence }),
                )),
                failures: if ok { vec![] } else { vec!["solver did not converge".into()] },
                summary,
            })
        }
        Command::Spectrum { input, num_eigs, .. } => {
            let mesh = load_mesh(input)?;
            let spectrum = spectrum_json(&mesh, *num_eigs)?;
            let summary = format!("eigenvalues {}", spectrum["eigenvalues"]);
            Ok(Produced {
                report: Some(envelope(run, json!({ "mesh": summarize(&mesh)?, "spectrum": spectrum }))),
                failures: vec![],
                summary,
            })
        }
        Command::Verify { input, ambient, .. } => {
            let mesh = load_mesh(input)?;
            let ambient = load_ambient(ambient.as_deref())?;
            let geometry = full_report(&mesh, &ambient)?;
            Ok(Produced {
                failures: check_failures(&geometry),
                summary: check_table(&geometry),
                report: Some(envelope(run, json!({ "geometry": geometry }))),
            })
        }
        Command::Pipeline {
            mesh,
            solver,
            num_eigs,
            output,
            ..
        } => {
            let start = build_mesh(mesh, run.seed)?;
            let ambient = load_ambient(solver.ambient.as_deref())?;
            let (relaxed, convergence, ok) = solve(&start, &ambient, solver)?;
            if let (true, Some(out)) = (write_files, output) {
                write_mesh(&relaxed, out).with_context(|| format!("cannot write {}", out.display()))?;
            }
            let spectrum = spectrum_json(&relaxed, *num_eigs)?;
            let geometry = full_report(&relaxed, &ambient)?;
            let mut failures = check_failures(&geometry);
            if !ok {
                failures.push("solver did not converge".into());
            }
            let summary = format!(
                "converged: {ok}, sigma1 {}, sigma1 L {}\n{}",
                spectrum["sigma1"],
                spectrum["sigma1_times_length"],
                check_table(&geometry)
            );
            Ok(Produced {
                report: Some(envelope(
                    run,
                    json!({
                        "initial_mesh": summarize(&start)?,
                        "mesh": summarize(&relaxed)?,
                        "convergence": convergence,
                        "spectrum": spectrum,
                        "geometry": geometry,
                    }),
                )),
                failures,
                summary,
            })
        }
        Command::Report { .. } => Err(Failure::Usage(anyhow::anyhow!("a report cannot replay another report"))),
    }
}

fn report_path(command: &Command) -> Option<&Path> {
    match command {
        Command::Solve { report, .. }
        | Command::Spectrum { report, .. }
        | Command::Verify { report, .. }
        | Command::Pipeline { report, .. } => report.as_deref(),
        _ => None,
    }
}

fn finish(failures: Vec<String>) -> Outcome {
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failures.join("; ")))
    }
}

pub fn execute(run: &RunConfig, schema_check: bool) -> Outcome {
    if let Command::Report {
        input,
        replay,
        tolerance,
    } = &run.command
    {
        return summarize_report(input, *replay, *tolerance, schema_check);
    }
    let produced = produce(run, true)?;
    if let Some(report) = &produced.report {
        if schema_check {
            schema::validate(report)?;
        }
        let text = serde_json::to_string_pretty(report).context("cannot serialize report")?;
        match report_path(&run.command) {
            Some(path) => fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?,
            None => println!("{text}"),
        }
    }
    if report_path(&run.command).is_some() || produced.report.is_none() {
        println!("{}", produced.summary.trim_end());
    }
    finish(produced.failures)
}

fn summarize_report(path: &Path, replay: bool, tolerance: f64, schema_check: bool) -> Outcome {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read report {}", path.display()))?;
    let stored: Value = serde_json::from_str(&text).with_context(|| format!("malformed report {}", path.display()))?;
    if schema_check {
        schema::validate(&stored)?;
    }
    let run: RunConfig = serde_json::from_value(stored.get("run").cloned().unwrap_or(Value::Null))
        .context("report has no valid run configuration")?;
    println!("freebound {} report, schema {}", run.version, stored["schema"]);
    println!("command: {}", serde_json::to_string(&run.command).unwrap_or_default());
    let mut failures = Vec::new();
    if let Some(geometry) = stored.get("geometry") {
        let geometry: GeometryReport =
            serde_json::from_value(geometry.clone()).context("report has a malformed geometry section")?;
        print!("{}", check_table(&geometry));
        failures.extend(check_failures(&geometry));
    }
    if let Some(c) = stored.get("convergence") {
        println!("converged: {}", c["converged"]);
        if c["converged"] != Value::Bool(true) {
            failures.push("solver did not converge".into());
        }
    }
    if replay {
        if run.version != env!("CARGO_PKG_VERSION") {
            eprintln!(
                "warning: report was written by version {}, replaying with {}",
                run.version,
                env!("CARGO_PKG_VERSION")
            );
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(run.threads.max(1))
            .build()
            .context("cannot start worker pool")?;
        let fresh = pool.install(|| produce(&run, false))?;
        let fresh = fresh.report.context("command produces no report to compare")?;
        let mut diffs = Vec::new();
        compare(&stored, &fresh, tolerance, "", &mut diffs);
        if diffs.is_empty() {
            println!("replay: all values reproduced within {tolerance:e}");
        } else {
            for d in diffs.iter().take(20) {
                println!("replay mismatch: {d}");
            }
            failures.push(format!("replay differs in {} values", diffs.len()));
        }
    }
    finish(failures)
}

/// Collects paths where two reports differ beyond `tol` (relative).
fn compare(a: &Value, b: &Value, tol: f64, path: &str, out: &mut Vec<String>) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
            if (x - y).abs() > tol * x.abs().max(y.abs()) {
                out.push(format!("{path}: {x} vs {y}"));
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            for (i, (u, v)) in x.iter().zip(y).enumerate() {
                compare(u, v, tol, &format!("{path}[{i}]"), out);
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            for (k, u) in x {
                match y.get(k) {
                    Some(v) => compare(u, v, tol, &format!("{path}.{k}"), out),
                    None => out.push(format!("{path}.{k}: missing")),
                }
            }
            for k in y.keys().filter(|k| !x.contains_key(*k)) {
                out.push(format!("{path}.{k}: unexpected"));
            }
        }
        _ if a == b => {}
        _ => out.push(format!("{path}: {a} vs {b}")),
    }
}
