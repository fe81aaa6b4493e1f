use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vnlab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_vnlab"));
    c.env_remove("VNLAB_TOL");
    c
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output {
        status,
        stdout,
        stderr,
    } = cmd.output().expect("binary runs");
    (
        status.code().expect("exit code"),
        String::from_utf8_lossy(&stdout).into_owned(),
        String::from_utf8_lossy(&stderr).into_owned(),
    )
}

#[test]
fn scalar_fixture_verifies_with_tiny_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let (code, out, _) = run(vnlab()
        .arg("verify")
        .arg(fixture("scalar.json"))
        .arg("--report")
        .arg(&report));
    assert_eq!(code, 0, "{out}");
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["verdict"], true);
    for c in r["checks"].as_array().unwrap() {
        let name = c["check_name"].as_str().unwrap();
        if name.starts_with("functional.norm") {
            continue;
        }
        assert!(c["residual"].as_f64().unwrap() < 1e-12, "{name}");
    }
}

#[test]
fn gen_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.json");
    let (code, _, err) = run(vnlab()
        .args(["gen", "--blocks", "2x1", "--k", "1", "--seed", "7", "--out"])
        .arg(&path));
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["dim_G"], 2);
    let (code, out, _) = run(vnlab().arg("verify").arg(&path));
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("dim B = 4"));
}

#[test]
fn diagonal_instance_has_two_dimensional_algebra() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.json");
    let (code, _, _) = run(vnlab()
        .args(["gen", "--blocks", "1x1,1x1", "--k", "2", "--seed", "1", "--out"])
        .arg(&path));
    assert_eq!(code, 0);
    let (code, out, _) = run(vnlab()
        .arg("verify")
        .arg(&path)
        .args(["--checks", "algebra.invariants"]));
    assert_eq!(code, 0);
    assert!(out.contains("dim B = 2"), "{out}");
}

#[test]
fn gen_without_out_is_a_usage_error() {
    let (code, _, err) = run(vnlab().args(["gen", "--blocks", "2x1", "--k", "1"]));
    assert_eq!(code, 2);
    assert!(err.contains("--out"));
}

#[test]
fn gen_rejects_bad_blocks_and_caps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    for blocks in ["2by1", "3x3", "0x1"] {
        let (code, _, _) = run(vnlab().args(["gen", "--blocks", blocks, "--out"]).arg(&out));
        assert_eq!(code, 2, "{blocks}");
    }
    let (code, _, _) = run(vnlab().args(["gen", "--blocks", "2x1", "--k", "5", "--out"]).arg(&out));
    assert_eq!(code, 2);
}

#[test]
fn corrupted_gram_is_an_input_error() {
    let (code, _, err) = run(vnlab().arg("verify").arg(fixture("nonhermitian_gram.json")));
    assert_eq!(code, 2);
    assert!(err.contains("gram hermiticity"), "{err}");
}

#[test]
fn malformed_file_reports_position() {
    let (code, _, err) = run(vnlab().arg("verify").arg(fixture("malformed.json")));
    assert_eq!(code, 2);
    assert!(err.contains("line 5"), "{err}");
}

#[test]
fn missing_file_is_an_input_error() {
    let (code, _, _) = run(vnlab().args(["verify", "/nonexistent/instance.json"]));
    assert_eq!(code, 2);
}

#[test]
fn tolerance_flag_and_environment() {
    let (code, _, err) = run(vnlab()
        .arg("verify")
        .arg(fixture("scalar.json"))
        .env("VNLAB_TOL", "-1"));
    assert_eq!(code, 2, "{err}");
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let (code, _, _) = run(vnlab()
        .arg("verify")
        .arg(fixture("scalar.json"))
        .env("VNLAB_TOL", "1e-6")
        .arg("--report")
        .arg(&report));
    assert_eq!(code, 0);
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert!((r["rel_tol"].as_f64().unwrap() - 1e-6).abs() < 1e-20);
    // The flag wins over the environment.
    let (code, _, _) = run(vnlab()
        .arg("verify")
        .arg(fixture("scalar.json"))
        .env("VNLAB_TOL", "-1")
        .args(["--tol", "1e-9"]));
    assert_eq!(code, 0);
}

#[test]
fn several_paths_give_an_array_report_and_worst_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let (code, _, _) = run(vnlab()
        .arg("verify")
        .arg(fixture("scalar.json"))
        .arg(fixture("scalar.json"))
        .arg("--report")
        .arg(&report));
    assert_eq!(code, 0);
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(r.as_array().unwrap().len(), 2);
    let (code, _, _) = run(vnlab()
        .arg("verify")
        .arg(fixture("scalar.json"))
        .arg(fixture("nonhermitian_gram.json")));
    assert_eq!(code, 2);
}

#[test]
fn unknown_check_is_an_input_error() {
    let (code, _, err) = run(vnlab()
        .arg("verify")
        .arg(fixture("scalar.json"))
        .args(["--checks", "no.such.check"]));
    assert_eq!(code, 2);
    assert!(err.contains("no.such.check"));
}

#[test]
fn list_checks_names_the_pipeline() {
    let (code, out, _) = run(vnlab().arg("list-checks"));
    assert_eq!(code, 0);
    let names: Vec<&str> = out.lines().filter_map(|l| l.split_whitespace().next()).collect();
    assert_eq!(names.first(), Some(&"algebra.invariants"));
    assert!(names.contains(&"linking.bicommutant"));
    assert_eq!(names.last(), Some(&"functional.norm"));
}
