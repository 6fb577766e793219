use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zeromass"))
        .args(args)
        .env("ZEROMASS_OUT", out)
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn file_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn classify_reports_d_star() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["classify", "--p", "4", "--q", "3", "--dim", "3", "--domain", "entire"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["result"]["d_star"].as_f64(), Some(-18.0));
    assert_eq!(v["result"]["predicted_second_derivative_sign"], "Negative");
    let saved = file_json(&dir.path().join("classify.json"));
    assert_eq!(saved["run_config"]["subcommand"], "classify");
    assert_eq!(saved["run_config"]["params"]["p"].as_f64(), Some(4.0));
}

#[test]
fn fiber_fold_roots() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["fiber", "--p", "3", "--q", "4", "--lambda", "2.5", "--T", "1", "--A", "1", "--B", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    let r: Vec<f64> = v["result"]["stationary_points"].as_array().unwrap().iter().map(|p| p["r"].as_f64().unwrap()).collect();
    assert_eq!(r.len(), 2);
    assert!((r[0] - 0.5).abs() < 1e-10 && (r[1] - 2.0).abs() < 1e-10);
    assert!((v["result"]["lambda_u"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn domain_error_is_json_with_exit_one() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["classify", "--p", "3", "--q", "3"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "EqualExponents");

    let o = run(dir.path(), &["solve", "--p", "4", "--q", "5", "--dim", "3"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "InvalidParameter");
}

#[test]
fn usage_errors_name_the_flag() {
    let dir = TempDir::new().unwrap();
    for (args, flag) in [
        (vec!["classify", "--p", "x", "--q", "3"], "--p"),
        (vec!["atlas", "--steps", "1"], "--steps"),
        (vec!["fiber", "--p", "3", "--q", "4", "--lambda", "1", "--T", "1", "--A", "1"], "--B"),
        (vec!["solve", "--p", "4", "--q", "3", "--tol", "bogus=1"], "--tol"),
        (vec!["evolve", "--profile", "missing.csv", "--dt", "-1"], "--dt"),
        (vec!["verify", "--suite", "nope"], "--suite"),
    ] {
        let o = run(dir.path(), &args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(flag), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = run(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_dir_from_environment_and_flag() {
    let env_dir = TempDir::new().unwrap();
    let flag_dir = TempDir::new().unwrap();
    let o = run(env_dir.path(), &["classify", "--p", "4", "--q", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(env_dir.path().join("classify.json").exists());
    let o = run(env_dir.path(), &["classify", "--p", "4", "--q", "3", "--out", flag_dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_dir.path().join("classify.json").exists());
}

#[test]
fn atlas_artifacts_are_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["atlas", "--steps", "60", "--dim", "3", "--seed", "7"];
    assert_eq!(run(a.path(), &args).status.code(), Some(0));
    assert_eq!(run(b.path(), &args).status.code(), Some(0));
    let csv = std::fs::read_to_string(a.path().join("atlas.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# run_config: "));
    assert_eq!(lines.next().unwrap(), "p,q,dim,domain,d_star,existence,sign,fibering_case");
    assert_eq!(csv.lines().count(), 2 + 60 * 60);
    let svg = std::fs::read_to_string(a.path().join("atlas.svg")).unwrap();
    assert!(svg.contains("run_config") && svg.contains("d-star-zero"));
    // Output directories differ, so compare everything but the config line.
    let strip = |s: String| s.lines().filter(|l| !l.contains("run_config")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(svg), strip(std::fs::read_to_string(b.path().join("atlas.svg")).unwrap()));
    assert_eq!(strip(csv), strip(std::fs::read_to_string(b.path().join("atlas.csv")).unwrap()));
}

#[test]
fn solve_then_spectrum_then_evolve() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["solve", "--p", "4", "--q", "3", "--dim", "3", "--domain", "ball", "--lambda", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["result"]["validated"], true);
    let profile = dir.path().join("profile.csv");
    let text = std::fs::read_to_string(&profile).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("# run_config: "));

    let o = run(dir.path(), &["spectrum", "--profile", profile.to_str().unwrap(), "--nodes", "1024"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!(v["result"]["mu1"].as_f64().unwrap() < 0.0);
    assert!(dir.path().join("eigenfunction.csv").exists());

    let o = run(
        dir.path(),
        &["evolve", "--profile", profile.to_str().unwrap(), "--dt", "1e-3", "--t-end", "0.05", "--record-every", "10", "--nodes", "128"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = file_json(&dir.path().join("trajectory/trajectory.json"));
    let snaps = traj["result"]["snapshots"].as_array().unwrap();
    assert_eq!(snaps.len(), traj["result"]["times"].as_array().unwrap().len());
    for s in snaps {
        assert!(dir.path().join("trajectory").join(s.as_str().unwrap()).exists());
    }
    assert_eq!(traj["run_config"]["subcommand"], "evolve");
    assert!(traj["result"]["energies"].as_array().unwrap().len() >= 2);
}

#[test]
fn threshold_and_nehari() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["lambda-star", "--p", "3", "--q", "4", "--dim", "3", "--nodes", "256", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!((v["result"]["ratio"].as_f64().unwrap() - 1.5 / 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(v["result"]["certificate_passed"], true);
    let lambda_e = v["result"]["estimate"]["lambda_e_star"].as_f64().unwrap();

    let below = format!("{}", 0.5 * v["result"]["estimate"]["lambda_star"].as_f64().unwrap());
    let o = run(dir.path(), &["nehari", "--p", "3", "--q", "4", "--nodes", "256", "--lambda", &below]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "FoldEmpty");

    let above = format!("{}", 1.1 * lambda_e);
    let o = run(dir.path(), &["nehari", "--p", "3", "--q", "4", "--nodes", "256", "--lambda", &above]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["result"]["is_negative_energy"], true);
}
