use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use uda_core::gme::MeasuredMarginals;
use uda_core::linalg::DensityMatrix;
use uda_core::runlog;
use uda_core::states::build_dicke_state;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn uda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uda"))
        .args(args)
        .env_remove("MC_CONFIG")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_marginals(dir: &Path, name: &str, rho: &DensityMatrix, drop_last: bool) -> PathBuf {
    let mut input = MeasuredMarginals::from_state(rho).unwrap().to_input(None);
    if drop_last {
        input.marginals.pop();
    }
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(&input).unwrap()).unwrap();
    p
}

#[test]
fn certify_exit_codes_follow_the_verdict() {
    let s3 = data("pairs3.json");
    let o = uda(&["certify", "--state", path_str(&data("dicke_3_1.json")), "--subsystems", path_str(&s3)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["verdict"], "ROBUST");

    let o = uda(&["certify", "--state", path_str(&data("ghz3.json")), "--subsystems", path_str(&s3)]);
    assert_eq!(code(&o), 20);
    assert_eq!(stdout_json(&o)["verdict"], "NOT_UDA");
}

#[test]
fn certify_writes_the_witness_next_to_the_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("d42.json");
    let o = uda(&[
        "certify",
        "--state",
        path_str(&data("dicke_4_2.json")),
        "--subsystems",
        path_str(&data("pairs4.json")),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 10);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["verdict"], "NOT_ROBUST");
    assert_eq!(v["stage"], "P_L");
    assert!(dir.path().join("d42.witness.json").exists());
}

#[test]
fn malformed_input_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"kind":"dicke","n":"four","k":2}"#).unwrap();
    let o = uda(&["certify", "--state", path_str(&bad), "--subsystems", path_str(&data("pairs4.json"))]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error:"), "{err}");

    let o = uda(&["certify", "--state", path_str(&data("dicke_4_2.json"))]);
    assert_eq!(code(&o), 1);
    let o = uda(&["no-such-command"]);
    assert_eq!(code(&o), 1);
    let o = uda(&["--help"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn qubit_count_mismatch_is_an_error() {
    let o = uda(&[
        "certify",
        "--state",
        path_str(&data("dicke_4_2.json")),
        "--subsystems",
        path_str(&data("pairs3.json")),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn gme_exit_codes() {
    let dir = TempDir::new().unwrap();
    let rho = build_dicke_state(4, 2).unwrap();
    let noisy = rho.mix(&DensityMatrix::maximally_mixed(4), 0.05).unwrap();
    let good = write_marginals(dir.path(), "good.json", &noisy, false);
    let o = uda(&["gme", "--data", path_str(&good), "--n", "4", "--k", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["certified"], true);

    let mut bits = nalgebra::DVector::zeros(16);
    bits[0b0101] = num_complex::Complex64::new(1.0, 0.0);
    let prod = DensityMatrix::pure(4, &bits).unwrap();
    let bad = write_marginals(dir.path(), "prod.json", &prod, false);
    let o = uda(&["gme", "--data", path_str(&bad), "--n", "4", "--k", "2"]);
    assert_eq!(code(&o), 10);

    let partial = write_marginals(dir.path(), "partial.json", &noisy, true);
    let o = uda(&["gme", "--data", path_str(&partial), "--n", "4", "--k", "2"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("[3,4]"));
}

#[test]
fn kernel_dim_reports_both_constructions() {
    let o = uda(&["kernel-dim", "--subsystems", path_str(&data("pairs3.json"))]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["pauli"], 27);
    assert_eq!(v["svd"], 27);
}

#[test]
fn table1_csv_has_the_expected_shape() {
    let o = uda(&["table1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "family,n,alpha_star,verdict,stage,kernel_dim,justification,status"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().any(|r| r.starts_with("cluster,4,1,ROBUST")));
    assert!(rows.iter().any(|r| r.starts_with("ring,6,1/2,NOT_ROBUST")));
}

#[test]
fn probe_counterexample_lands_in_the_windows() {
    let o = uda(&["probe", "--family", "dicke-counterexample", "--n", "5", "--k", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["within_windows"], true);
}

#[test]
fn run_log_records_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("runs");
    for _ in 0..2 {
        let o = uda(&[
            "--run-log",
            path_str(&log),
            "certify",
            "--state",
            path_str(&data("dicke_4_2.json")),
            "--subsystems",
            path_str(&data("pairs4.json")),
        ]);
        assert_eq!(code(&o), 10);
    }
    let recs = runlog::read_all(&log).unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0].payload, recs[1].payload);
    assert_eq!(recs[0].exit_code, 10);
    assert_eq!(recs[0].command, "certify");
}

#[test]
fn config_from_environment_and_flag_override() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "output_format = \"text\"\nrank_tolerance = 1e-8\n").unwrap();
    let (state, subs) = (data("dicke_3_1.json"), data("pairs3.json"));
    let args = ["certify", "--state", path_str(&state), "--subsystems", path_str(&subs)];
    let o = Command::new(env!("CARGO_BIN_EXE_uda"))
        .args(args)
        .env("MC_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("ROBUST at"), "{text}");

    let o = Command::new(env!("CARGO_BIN_EXE_uda"))
        .args(args)
        .args(["--format", "json"])
        .env("MC_CONFIG", &cfg)
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["tolerances"]["rank"], 1e-8);

    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_uda"))
        .args(args)
        .env("MC_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}
