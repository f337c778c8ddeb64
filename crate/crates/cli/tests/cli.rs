use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn freebound(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freebound"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SPHERE: &str = "OFF\n6 8 0\n1 0 0\n-1 0 0\n0 1 0\n0 -1 0\n0 0 1\n0 0 -1\n\
3 0 2 4\n3 2 1 4\n3 1 3 4\n3 3 0 4\n3 2 0 5\n3 1 2 5\n3 3 1 5\n3 0 3 5\n";

#[test]
fn disk_pipeline() {
    let dir = TempDir::new().unwrap();
    let out = freebound(
        dir.path(),
        &["pipeline", "--exemplar", "disk", "--refine", "4", "--report", "p.json", "--schema-check"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = read_json(&dir.path().join("p.json"));
    assert_eq!(r["schema"], 1);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["run"]["command"]["subcommand"], "pipeline");
    assert_eq!(r["run"]["command"]["refine"], 4);
    assert_eq!(r["run"]["threads"], 1);
    let s1 = r["spectrum"]["sigma1"].as_f64().unwrap();
    assert!((s1 - 1.0).abs() <= 0.02, "{s1}");
    assert_eq!(r["spectrum"]["multiplicities"][0], 2);
    assert_eq!(r["convergence"]["converged"], true);
    let checks = r["geometry"]["checks"].as_array().unwrap();
    assert!(checks.iter().all(|c| c["status"] == "pass"));
}

#[test]
fn generate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    for name in ["a.off", "b.off"] {
        let out = freebound(dir.path(), &["generate", "--exemplar", "catenoid", "--out", name]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let a = fs::read(dir.path().join("a.off")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.off")).unwrap());
    let out = freebound(
        dir.path(),
        &["generate", "--exemplar", "disk", "--perturb", "0.05", "--seed", "3", "--out", "d.obj"],
    );
    assert_eq!(code(&out), 0);
    assert!(fs::read_to_string(dir.path().join("d.obj")).unwrap().contains("\nf "));
}

#[test]
fn closed_surface_is_rejected() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("sphere.off"), SPHERE).unwrap();
    let out = freebound(dir.path(), &["verify", "--input", "sphere.off"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("closed surface rejected"), "{}", stderr(&out));
}

#[test]
fn usage_and_io_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    assert_eq!(code(&freebound(p, &["verify", "--bogus"])), 1);
    assert_eq!(code(&freebound(p, &["frobnicate"])), 1);
    assert_eq!(code(&freebound(p, &["verify", "--input", "missing.off"])), 1);
    assert_eq!(code(&freebound(p, &["--threads", "0", "verify", "--input", "x.off"])), 1);
    freebound(p, &["generate", "--exemplar", "disk", "--out", "d.off"]);
    fs::write(p.join("bad.json"), r#"{"kind":"ball"}"#).unwrap();
    let out = freebound(p, &["verify", "--input", "d.off", "--ambient", "bad.json"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("malformed ambient config"));
    fs::write(p.join("neg.json"), r#"{"kind":"ball","radius":-1}"#).unwrap();
    assert_eq!(code(&freebound(p, &["verify", "--input", "d.off", "--ambient", "neg.json"])), 1);
}

#[test]
fn spectrum_report() {
    let dir = TempDir::new().unwrap();
    freebound(dir.path(), &["generate", "--exemplar", "disk", "--refine", "2", "--out", "d.off"]);
    let out = freebound(
        dir.path(),
        &["spectrum", "--input", "d.off", "--num-eigs", "6", "--report", "s.json", "--schema-check"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = read_json(&dir.path().join("s.json"));
    assert_eq!(r["spectrum"]["eigenvalues"].as_array().unwrap().len(), 6);
    let pl = r["spectrum"]["sigma1_times_length"].as_f64().unwrap();
    assert!((pl - 2.0 * PI).abs() <= 0.02 * 2.0 * PI, "{pl}");
    assert_eq!(r["spectrum"]["repeated"].as_array().unwrap().len(), 6);
    assert_eq!(r["spectrum"]["repeated"][1], true);
}

#[test]
fn ellipsoid_ambient() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    freebound(p, &["generate", "--exemplar", "disk", "--n-radial", "8", "--n-angular", "48", "--out", "d.off"]);
    fs::write(p.join("e.json"), r#"{"kind":"level_set","name":"ellipsoid","semiaxes":[1,1,2]}"#).unwrap();
    let out = freebound(p, &["verify", "--input", "d.off", "--ambient", "e.json", "--report", "v.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = read_json(&p.join("v.json"));
    let checks = r["geometry"]["checks"].as_array().unwrap();
    let ball = checks.iter().find(|c| c["name"] == "ball_identity").unwrap();
    assert_eq!(ball["status"], "skipped");
}

#[test]
fn solve_replay_and_failure_codes() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    freebound(
        p,
        &[
            "generate", "--exemplar", "disk", "--n-radial", "8", "--n-angular", "32", "--perturb", "0.05", "--seed",
            "7", "--out", "pd.off",
        ],
    );
    let out = freebound(p, &["solve", "--input", "pd.off", "--output", "r.off", "--report", "s.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = read_json(&p.join("s.json"));
    let area = r["mesh"]["area"].as_f64().unwrap();
    assert!((area - PI).abs() <= 0.01 * PI);
    assert!(p.join("r.off").exists());

    let out = freebound(p, &["report", "--input", "s.json", "--replay", "--schema-check"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("reproduced"));

    let mut tampered = r.clone();
    tampered["mesh"]["area"] = Value::from(area * (1.0 + 1e-9));
    fs::write(p.join("t.json"), serde_json::to_string(&tampered).unwrap()).unwrap();
    assert_eq!(code(&freebound(p, &["report", "--input", "t.json", "--replay"])), 2);

    let out = freebound(p, &["solve", "--input", "pd.off", "--max-iters", "1", "--report", "n.json"]);
    assert_eq!(code(&out), 2);
    assert_eq!(read_json(&p.join("n.json"))["convergence"]["converged"], false);
    assert_eq!(code(&freebound(p, &["report", "--input", "n.json"])), 2);
}

#[test]
fn report_to_stdout() {
    let dir = TempDir::new().unwrap();
    freebound(dir.path(), &["generate", "--exemplar", "catenoid", "--n-theta", "96", "--out", "c.obj"]);
    let out = freebound(dir.path(), &["verify", "--input", "c.obj"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["run"]["command"]["input"], "c.obj");
    assert_eq!(r["geometry"]["topology"]["euler_characteristic"], 0);
}
