use std::path::Path;
use std::process::{Command, Output};

use phshift::case_studies::{build_rigid_body, build_sync_gen, sync_gen_default_params, RigidBodyParams};
use phshift::io::ModelFile;
use serde_json::Value;

fn phshift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phshift"))
        .args(args)
        .env_remove("PHSHIFT_TAU_PSD")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn write_rigid_body(dir: &Path, gains: [f64; 3], disturbance: [f64; 3]) -> String {
    let p = RigidBodyParams {
        inertia: [1.0, 2.0, 3.0],
        gains,
        disturbance,
    };
    let path = dir.join("body.json");
    let file = ModelFile::from_system(&build_rigid_body(&p).unwrap(), Some(&p.input()));
    std::fs::write(&path, file.to_json()).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn check_exit_codes_follow_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_rigid_body(dir.path(), [1.0; 3], [1.0, 0.0, 0.0]);

    let out = phshift(&["check", &model]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json = report(&out);
    assert_eq!(json["result"]["report"]["verdict"], "satisfied_strictly");
    assert_eq!(json["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(json["config"]["command"], "check");
    assert_eq!(json["config"]["model"], model.as_str());
    assert_eq!(json["config"]["tolerances"]["psd_rel"], 1e-9);

    let out = phshift(&["check", &model, "--u-bar", "3,0,0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["result"]["report"]["verdict"], "violated");
}

#[test]
fn general_check_is_labelled_as_sampled() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_rigid_body(dir.path(), [1.0; 3], [1.0, 0.0, 0.0]);
    let out = phshift(&["check", &model, "--general", "--samples", "50", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let json = report(&out);
    assert_eq!(json["result"]["report"]["sample_info"]["note"], "sampled, not a proof");
    assert_eq!(json["result"]["report"]["sample_info"]["evaluated"], 50);
}

#[test]
fn gamma_of_lossless_body_and_designed_gain() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_rigid_body(dir.path(), [0.0; 3], [0.0; 3]);
    let out = phshift(&["gamma", &model, "--x-bar", "1,0,0", "--delta", "0.1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json = report(&out);
    let gamma = json["result"]["report"]["gamma"].as_f64().unwrap();
    assert!((gamma - 0.5).abs() < 1e-6);
    let k00 = json["result"]["k_p"][0][0].as_f64().unwrap();
    assert!((k00 - 0.6).abs() < 1e-6);
}

#[test]
fn infeasible_gamma_exits_with_two() {
    // A generator spinning fast: speed-induced coupling between unactuated
    // windings cannot be compensated through the field and torque ports.
    let out = phshift(&["case", "sync-gen"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["result"]["report"]["gamma"], "inf");
}

#[test]
fn margin_reports_epsilon_and_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_rigid_body(dir.path(), [1.0; 3], [1.0, 0.0, 0.0]);
    let out = phshift(&["margin", &model]);
    assert_eq!(out.status.code(), Some(0));
    let json = report(&out);
    let eps = json["result"]["report"]["epsilon"].as_f64().unwrap();
    assert!((eps - 0.5).abs() < 1e-9);
    assert_eq!(json["result"]["report"]["branch"], "global");
    assert!((json["result"]["convergence_horizon"].as_f64().unwrap() - 40.0).abs() < 1e-6);
}

#[test]
fn equilibrium_and_validate_commands() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_rigid_body(dir.path(), [2.0, 1.0, 1.0], [3.0, 0.0, 0.0]);
    let out = phshift(&["equilibrium", &model]);
    assert_eq!(out.status.code(), Some(0));
    let x_bar = report(&out)["result"]["x_bar"].clone();
    assert!((x_bar[0].as_f64().unwrap() - 1.5).abs() < 1e-9);

    let out = phshift(&["equilibrium", &model, "--x-bar", "1,0,0"]);
    assert_eq!(out.status.code(), Some(1));

    let out = phshift(&["validate", &model, "--samples", "20"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["result"]["passed"], true);
}

#[test]
fn case_models_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let rb = dir.path().join("rb.json");
    let sg = dir.path().join("sg.json");
    phshift(&["case", "rigid-body", "--write-model", rb.to_str().unwrap()]);
    phshift(&["case", "sync-gen", "--write-model", sg.to_str().unwrap()]);
    let p = RigidBodyParams {
        inertia: [1.0, 2.0, 3.0],
        gains: [1.0; 3],
        disturbance: [1.0, 0.0, 0.0],
    };
    let read = ModelFile::read(&rb).unwrap();
    assert_eq!(read.to_system().unwrap(), build_rigid_body(&p).unwrap());
    assert_eq!(read.u_bar().unwrap().as_slice(), &[1.0, 0.0, 0.0]);
    let read = ModelFile::read(&sg).unwrap();
    assert_eq!(read.to_system().unwrap(), build_sync_gen(&sync_gen_default_params()).unwrap());
}

#[test]
fn case_with_parameter_file() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("params.json");
    std::fs::write(&params, r#"{"inertia": [1, 2, 3], "gains": [1, 1, 1], "disturbance": [3, 0, 0]}"#).unwrap();
    let out = phshift(&["case", "rigid-body", "--params", params.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let json = report(&out);
    assert_eq!(json["result"]["case"]["single_axis_threshold"]["stable"], false);
}

#[test]
fn lossless_simulation_keeps_storage_constant() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_rigid_body(dir.path(), [0.0; 3], [0.0; 3]);
    let csv = dir.path().join("traj.csv");
    let out = phshift(&[
        "simulate", &model, "--x0", "1,2,3", "--t-end", "5", "--h", "1e-3", "-o", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,x1,x2,x3,u1,u2,u3,y1,y2,y3,Hshift");
    let storage: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(storage.len(), 5001);
    assert!(storage.iter().all(|h| (h - storage[0]).abs() < 1e-8));
}

#[test]
fn closed_loop_simulation_with_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_rigid_body(dir.path(), [0.0; 3], [0.0; 3]);
    let input = dir.path().join("v.csv");
    std::fs::write(&input, "t,v1,v2,v3\n0,0,0,0\n1,0.1,0,-0.1\n").unwrap();
    let spec = format!("file:{}", input.display());
    let out = phshift(&[
        "simulate", &model, "--x-bar", "1,0,0", "--x0", "1,0.5,0", "--t-end", "2", "--h", "0.01", "--kp", "auto", "--u", &spec,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 202);
}

#[test]
fn malformed_model_names_field_and_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"n\": 1, \"m\": 1,\n \"F0\": [[0]], \"F\": [[[0]]], \"R0\": [[0]], \"G\": [[1]]}").unwrap();
    let out = phshift(&["check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`Q`") && err.contains("line 2"), "{err}");

    std::fs::write(&path, r#"{"n": 2, "m": 1, "F0": [[0, 0], [0]], "F": [], "Q": [], "R0": [], "G": []}"#).unwrap();
    let out = phshift(&["check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`F0`"));
}

#[test]
fn tolerance_overrides_from_environment_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_rigid_body(dir.path(), [1.0; 3], [1.0, 0.0, 0.0]);
    let out = Command::new(env!("CARGO_BIN_EXE_phshift"))
        .args(["check", &model])
        .env("PHSHIFT_TAU_PSD", "1e-6")
        .output()
        .unwrap();
    assert_eq!(report(&out)["config"]["tolerances"]["psd_rel"], 1e-6);
    let out = Command::new(env!("CARGO_BIN_EXE_phshift"))
        .args(["check", &model, "--tau-psd", "1e-7"])
        .env("PHSHIFT_TAU_PSD", "1e-6")
        .output()
        .unwrap();
    assert_eq!(report(&out)["config"]["tolerances"]["psd_rel"], 1e-7);
}

#[test]
fn missing_model_file_is_an_error() {
    let out = phshift(&["check", "/nonexistent/model.json"]);
    assert_eq!(out.status.code(), Some(1));
}
