use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn breatherlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_breatherlab")).current_dir(dir).args(args).output().expect("spawn binary")
}

fn breatherlab_threads(dir: &Path, threads: &str, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_breatherlab"))
        .current_dir(dir)
        .env("BREATHERLAB_THREADS", threads)
        .args(args)
        .output()
        .expect("spawn binary")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const LINDSTEDT: [&str; 11] =
    ["lindstedt", "--modes", "4", "--epsilon", "0.01", "--amplitude", "1", "--tol", "1e-10", "--out", "s.json"];
const EVOLVE: [&str; 11] =
    ["evolve", "--init", "s.json", "--dt", "0.01", "--steps", "300", "--record-every", "25", "--out", "e.csv"];
const FLOQUET: [&str; 9] = ["floquet", "--background", "s.json", "--modes", "8", "--dt", "0.02", "--out", "f.json"];

fn pipeline(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for (args, file) in [(&LINDSTEDT[..], "s.json"), (&EVOLVE[..], "e.csv"), (&FLOQUET[..], "f.json")] {
        let o = breatherlab(dir, args);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        out.push((file.to_string(), fs::read(dir.join(file)).unwrap()));
    }
    out
}

#[test]
fn acceptance_criterion_9_pipeline_round_trip() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let first = pipeline(a.path());
    let second = pipeline(b.path());
    let identical = first == second;
    let csv = String::from_utf8(first[1].1.clone()).unwrap();
    let rows = csv.lines().count();
    let floquet: serde_json::Value = serde_json::from_slice(&first[2].1).unwrap();
    let n_mult = floquet["multipliers"].as_array().map_or(0, Vec::len);
    let ok = identical && rows == 13 && n_mult == 16;
    println!(
        "{} criterion 9: lindstedt -> evolve -> floquet exit 0, byte-identical reruns={identical}, csv rows {rows}, multipliers {n_mult}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok);
}

#[test]
fn lindstedt_output_matches_schema() {
    let d = TempDir::new().unwrap();
    assert_eq!(breatherlab(d.path(), &LINDSTEDT).status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(d.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(v["epsilon"], 0.01);
    assert_eq!(v["mass"], 0.0);
    assert_eq!(v["omega"].as_array().unwrap().len(), 1);
    let orders = v["orders"].as_array().unwrap();
    assert_eq!(orders.len(), 2);
    for o in orders {
        let (k, l) = (o["kmax"].as_u64().unwrap(), o["lmax"].as_u64().unwrap());
        assert_eq!(o["coeffs"].as_array().unwrap().len() as u64, k * l);
    }
    let sol: breatherlab::lindstedt::LindstedtSolution = serde_json::from_value(v).unwrap();
    assert!(sol.validate().is_ok());
}

#[test]
fn floquet_output_is_thread_count_independent() {
    let d = TempDir::new().unwrap();
    assert_eq!(breatherlab(d.path(), &LINDSTEDT).status.code(), Some(0));
    let mut files = Vec::new();
    for threads in ["1", "3"] {
        let o = breatherlab_threads(d.path(), threads, &FLOQUET);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        files.push(fs::read(d.path().join("f.json")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let o = breatherlab_threads(d.path(), "zero", &FLOQUET);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn light_cone_velocity_exits_2() {
    let d = TempDir::new().unwrap();
    let o = breatherlab(d.path(), &["twave", "--mass", "1", "--epsilon", "0.1", "--velocity", "1.0", "--out", "t.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr(&o), "error: light-cone degenerate velocity\n");
}

#[test]
fn traveling_wave_round_trip() {
    let d = TempDir::new().unwrap();
    let o = breatherlab(d.path(), &["twave", "--mass", "1", "--epsilon", "0.1", "--velocity", "2", "--out", "t.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let p: breatherlab::elliptic::TravelingWaveProfile =
        serde_json::from_slice(&fs::read(d.path().join("t.json")).unwrap()).unwrap();
    assert!(p.ode_residual(256) < 1e-9);
    let args = ["evolve", "--init", "t.json", "--dt", "0.01", "--steps", "20", "--record-every", "10", "--out", "e.csv"];
    assert_eq!(breatherlab(d.path(), &args).status.code(), Some(0));
    let args = ["floquet", "--background", "t.json", "--modes", "6", "--dt", "0.05", "--out", "f.json"];
    let o = breatherlab(d.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn zero_steps_writes_header_only() {
    let d = TempDir::new().unwrap();
    assert_eq!(breatherlab(d.path(), &LINDSTEDT).status.code(), Some(0));
    let o = breatherlab(d.path(), &["evolve", "--init", "s.json", "--dt", "0.01", "--steps", "0", "--out", "z.csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(d.path().join("z.csv")).unwrap(), "step,time,energy,momentum\n");
}

#[test]
fn evolve_accepts_its_own_state_format() {
    let d = TempDir::new().unwrap();
    let phi: Vec<f64> = (0..32).map(|j| (j as f64 * std::f64::consts::PI / 16.0).sin()).collect();
    let state = breatherlab::dynamics::FieldState::new(
        breatherlab::spectral::Boundary::Periodic,
        phi,
        vec![0.0; 32],
        1.0,
        0.1,
    )
    .unwrap();
    fs::write(d.path().join("state.json"), serde_json::to_string(&state).unwrap()).unwrap();
    let o = breatherlab(d.path(), &["evolve", "--init", "state.json", "--dt", "0.01", "--steps", "5", "--out", "e.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(d.path().join("e.csv")).unwrap().lines().count(), 6);
}

#[test]
fn unstable_step_exits_2() {
    let d = TempDir::new().unwrap();
    assert_eq!(breatherlab(d.path(), &LINDSTEDT).status.code(), Some(0));
    let o = breatherlab(d.path(), &["evolve", "--init", "s.json", "--dt", "5", "--steps", "3", "--out", "z.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: "));
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn validation_errors_exit_1() {
    let d = TempDir::new().unwrap();
    for args in [
        &["lindstedt", "--epsilon", "abc", "--out", "x.json"][..],
        &["lindstedt", "--modes", "0", "--epsilon", "0.1", "--out", "x.json"],
        &["lindstedt", "--epsilon", "0.1", "--mass", "-1", "--out", "x.json"],
        &["evolve", "--init", "missing.json", "--dt", "0.01", "--steps", "1", "--out", "x.csv"],
        &["bogus"],
    ] {
        let o = breatherlab(d.path(), args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        let err = stderr(&o);
        assert!(err.starts_with("error: ") && err.lines().count() == 1, "{err}");
    }
}

#[test]
fn help_exits_0() {
    let d = TempDir::new().unwrap();
    let o = breatherlab(d.path(), &["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("BREATHERLAB_THREADS"));
}

const BELL: &str = r#"{"dim":4,"re":[[0.5,0,0,0.5],[0,0,0,0],[0,0,0,0],[0.5,0,0,0.5]],"im":[[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]]}"#;
const KET0: &str = r#"{"dim":2,"re":[[1,0],[0,0]],"im":[[0,0],[0,0]]}"#;
const KET1: &str = r#"{"dim":2,"re":[[0,0],[0,1]],"im":[[0,0],[0,0]]}"#;
const PAULI_Z: &str = r#"{"dim":2,"re":[[1,0],[0,-1]],"im":[[0,0],[0,0]]}"#;

#[test]
fn qcond_bell_state() {
    let d = TempDir::new().unwrap();
    for (name, body) in [("bell.json", BELL), ("p0.json", KET0), ("z.json", PAULI_Z)] {
        fs::write(d.path().join(name), body).unwrap();
    }
    let args = [
        "qcond", "--state", "bell.json", "--projector", "p0.json", "--d1", "2", "--d2", "2", "--observable", "z.json",
        "--out", "q.json",
    ];
    let o = breatherlab(d.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(d.path().join("q.json")).unwrap()).unwrap();
    assert!((v["probability"].as_f64().unwrap() - 0.5).abs() < 1e-15);
    assert!((v["expectation"]["value"].as_f64().unwrap() - 0.5).abs() < 1e-15);
    assert!((v["expectation"]["conditional"].as_f64().unwrap() - 1.0).abs() < 1e-15);
    // the conditional state is itself a valid state file
    let cond: breatherlab::qcond::DensityMatrix = serde_json::from_value(v["conditional"].clone()).unwrap();
    assert!((cond.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
}

#[test]
fn qcond_zero_probability_and_mismatch() {
    let d = TempDir::new().unwrap();
    let product = r#"{"dim":4,"re":[[1,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]],"im":[[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]]}"#;
    fs::write(d.path().join("s.json"), product).unwrap();
    fs::write(d.path().join("p1.json"), KET1).unwrap();
    let base = ["qcond", "--state", "s.json", "--projector", "p1.json", "--out", "q.json"];
    let o = breatherlab(d.path(), &[&base[..], &["--d1", "2", "--d2", "2"]].concat());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("probability"));
    let o = breatherlab(d.path(), &[&base[..], &["--d1", "1", "--d2", "2"]].concat());
    assert_eq!(o.status.code(), Some(1));
}
