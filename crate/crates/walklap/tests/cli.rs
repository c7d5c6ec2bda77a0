use std::process::Command;

fn walklap(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_walklap"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn reproduce_trap_panels() {
    let out = walklap(&["reproduce", "trap"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# walklap "), "header line: {header}");
    assert!(header.contains("reproduce trap"));
    // hub of the standard panel carries 10/24 of the mass
    let hub: f64 = lines
        .clone()
        .find(|l| l.starts_with("standard,2,"))
        .and_then(|l| l.rsplit(',').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((hub - 10.0 / 24.0).abs() < 1e-9, "hub mass {hub}");
    for panel in ["resolvent", "exp", "exp_nbt", "kpath_exp"] {
        assert!(
            text.lines().any(|l| l.starts_with(&format!("{panel},"))),
            "missing panel {panel}"
        );
    }
}

#[test]
fn info_json_roundtrip() {
    let out = walklap(&["--json", "info", "--gen", "grid:4x5"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["meta"].as_str().unwrap().starts_with("walklap "));
    let rows = v["rows"].as_array().unwrap();
    let nodes = rows
        .iter()
        .find(|r| r["key"] == "nodes")
        .and_then(|r| r["value"].as_f64())
        .unwrap();
    assert_eq!(nodes, 20.0);
}

#[test]
fn errors_exit_nonzero_without_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let out = walklap(&[
        "--output",
        path.to_str().unwrap(),
        "stationary",
        "--gen",
        "path:5",
        "--mu",
        "2.0",
    ]);
    assert!(!out.status.success());
    assert!(!path.exists(), "partial output left behind");
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("error"), "stderr: {err}");
}

#[test]
fn return_prob_exact_small_graph() {
    let out = walklap(&[
        "return-prob",
        "--gen",
        "complete:4",
        "--times",
        "0",
        "--method",
        "exact",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().find(|l| l.starts_with("0")).unwrap();
    let p: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((p - 1.0).abs() < 1e-12);
}
