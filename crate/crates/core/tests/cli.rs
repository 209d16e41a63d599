use std::fs;
use std::path::Path;
use std::process::Command;

fn nmqj(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_nmqj")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap()
}

fn column(csv: &[u8], name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_reader(csv);
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

const SMALL: &[&str] = &["--ntraj", "300", "--points", "31", "--t-end", "1.5"];

#[test]
fn full_run_writes_everything_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    let mut args = SMALL.to_vec();
    args.extend(["--out", a.to_str().unwrap(), "--workers", "1"]);
    let (code, stdout, stderr) = nmqj(&args);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("mc_estimate.csv"));
    for f in ["tcl.csv", "embedded.csv", "mc_estimate.csv", "manifest.json"] {
        assert!(a.join(f).is_file(), "{f}");
    }

    let mut args = SMALL.to_vec();
    args.extend(["--out", b.to_str().unwrap(), "--workers", "3"]);
    assert_eq!(nmqj(&args).0, 0);
    assert_eq!(read(&a, "mc_estimate.csv"), read(&b, "mc_estimate.csv"));
    assert_eq!(read(&a, "tcl.csv"), read(&b, "tcl.csv"));

    let manifest = a.join("manifest.json");
    let (code, _, stderr) = nmqj(&["--from-manifest", manifest.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    for f in ["tcl.csv", "embedded.csv", "mc_estimate.csv"] {
        assert_eq!(read(&a, f), read(&c, f), "{f}");
    }
    let ma: serde_json::Value = serde_json::from_slice(&read(&a, "manifest.json")).unwrap();
    let mc: serde_json::Value = serde_json::from_slice(&read(&c, "manifest.json")).unwrap();
    assert_eq!(ma["input_hash"], mc["input_hash"]);
    assert_eq!(ma["seed"], 1);

    // the two deterministic solvers agree on the population
    let tcl = read(&a, "tcl.csv");
    let emb = read(&a, "embedded.csv");
    for (x, y) in column(&tcl, "re_00").iter().zip(column(&emb, "re_00")) {
        assert!((x - y).abs() < 1e-6);
    }
    let mc = read(&a, "mc_estimate.csv");
    let exact = column(&mc, "pg_exact");
    for (x, y) in column(&tcl, "re_00").iter().zip(exact) {
        assert!((x - y).abs() < 1e-6);
    }
}

#[test]
fn unitary_model_file_keeps_purity() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    fs::write(
        &model,
        r#"{"dim": 2,
            "hamiltonian": [[[0.5, 0.0], [0.3, -0.2]], [[0.3, 0.2], [-0.5, 0.0]]],
            "initial_state": [[1.0, 0.0], [0.0, 1.0]]}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let (code, _, stderr) = nmqj(&[
        "--model",
        model.to_str().unwrap(),
        "--mode",
        "tcl",
        "--tol",
        "1e-10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    assert!(!out.join("mc_estimate.csv").exists());
    let purity = column(&read(&out, "tcl.csv"), "purity");
    assert_eq!(purity.len(), 200);
    assert!(purity.iter().all(|p| (p - 1.0).abs() < 1e-8));
}

#[test]
fn tabulated_model_runs_all_modes() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("table.json");
    // decay rate ramping from 1 to 0.2; C = D
    fs::write(
        &model,
        r#"{"dim": 2,
            "hamiltonian": [[[0, 0], [0, 0]], [[0, 0], [1, 0]]],
            "channels": [{
                "C": {"times": [0, 2], "matrices": [[[[0,0],[0.7,0]],[[0,0],[0,0]]], [[[0,0],[0.3,0]],[[0,0],[0,0]]]]},
                "D": {"times": [0, 2], "matrices": [[[[0,0],[0.7,0]],[[0,0],[0,0]]], [[[0,0],[0.3,0]],[[0,0],[0,0]]]]}
            }]}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let (code, _, stderr) = nmqj(&[
        "--model", model.to_str().unwrap(), "--t-end", "2", "--points", "11", "--ntraj", "200",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    let mc = read(&out, "mc_estimate.csv");
    assert!(column(&mc, "denom_mc").iter().all(|d| (d - 1.0).abs() < 1e-12));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    for args in [
        vec!["--points", "1", "--out", o],
        vec!["--ntraj", "0", "--out", o],
        vec!["--tol", "1", "--out", o],
        vec!["--t-end", "-1", "--out", o],
        vec!["--model", "no_such_model", "--out", o],
        vec!["--mode", "sideways", "--out", o],
        vec!["--lambda", "0", "--out", o],
    ] {
        let (code, _, stderr) = nmqj(&args);
        assert_eq!(code, 2, "{args:?}: {stderr}");
    }
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"dim\": 2}").unwrap();
    assert_eq!(nmqj(&["--model", bad.to_str().unwrap(), "--out", o]).0, 2);
}

#[test]
fn numerical_failure_exits_with_three() {
    // a = 4 per unit time drives tr W₁₂ below the extraction floor
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    fs::write(
        &model,
        r#"{"dim": 2,
            "hamiltonian": [[[0, 0], [0, 0]], [[0, 0], [0, 0]]],
            "channels": [{"C": [[[0,0],[1,0]],[[0,0],[0,0]]], "D": [[[0,0],[-1,0]],[[0,0],[0,0]]]}]}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let (code, _, stderr) = nmqj(&[
        "--model", model.to_str().unwrap(), "--mode", "embedded", "--t-end", "8",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 3, "{stderr}");
    assert!(stderr.contains("embedded solver"), "{stderr}");
}
