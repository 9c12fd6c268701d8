use std::path::Path;

use selfsim::cli::{load_config, parse_and_dispatch};
use selfsim::io::{load_path, sidecar_path};
use selfsim::synthesis::ProcessKind;

fn run(args: &[&str]) -> i32 {
    parse_and_dispatch(std::iter::once("selfsim").chain(args.iter().copied()))
}

/// Runs a whitespace-separated command line.
fn sh(line: &str) -> i32 {
    run(&line.split_whitespace().collect::<Vec<_>>())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_then_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let est = dir.path().join("est.json");
    let code = sh(&format!(
        "synth --process rosenblatt --H 0.7 --N 2000 --m 20 --seed 3 --out {}",
        s(&path)
    ));
    assert_eq!(code, 0);
    let p = load_path(&path).unwrap();
    assert_eq!(p.len(), 2000);
    assert_eq!(p.kind(), ProcessKind::Rosenblatt);
    assert_eq!(p.refinement(), Some(20));
    assert!(sidecar_path(&path).exists());

    assert_eq!(
        sh(&format!(
            "estimate --in {} --scale 20 --levels 4 --out {}",
            s(&path),
            s(&est)
        )),
        0
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&est).unwrap()).unwrap();
    let h = json["H_hat"].as_f64().unwrap();
    assert!(h > 0.3 && h < 1.1, "H_hat = {h}");
    assert_eq!(json["regime"], "rosenblatt");
    assert_eq!(json["scales_used"].as_array().unwrap().len(), 4);
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        assert_eq!(
            sh(&format!(
                "synth --process fbm --H 0.4 --N 300 --seed 11 --out {}",
                s(out)
            )),
            0
        );
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    assert_eq!(
        sh(&format!(
            "synth --process fbm --H 1.5 --N 100 --out {}",
            s(&out)
        )),
        2
    );
    assert_eq!(
        sh(&format!(
            "synth --process rosenblatt --H 0.4 --N 100 --out {}",
            s(&out)
        )),
        2
    );
    assert_eq!(sh("synth --process fbm --H 0.5"), 2);
    assert_eq!(sh("no-such-command"), 2);
    assert_eq!(
        run(&[
            "estimate",
            "--in",
            s(&dir.path().join("missing.csv")),
            "--scale",
            "4"
        ]),
        1
    );
    assert_eq!(
        sh(&format!(
            "coeffs --in {} --scale 2 --wavelet morlet",
            s(&out)
        )),
        2
    );
}

#[test]
fn coefficient_export_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    let out = dir.path().join("c.csv");
    assert_eq!(
        sh(&format!(
            "synth --process fbm --H 0.6 --N 64 --out {}",
            s(&path)
        )),
        0
    );
    assert_eq!(
        sh(&format!(
            "coeffs --in {} --wavelet haar --scale 4 --levels 2 --out {}",
            s(&path),
            s(&out)
        )),
        0
    );
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("scale,shift,value"));
    assert_eq!(lines.count(), 15 + 7);
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn config_defaults_are_filled_in() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "c.json",
        r#"{"process":"rosenblatt","H_list":[0.7],"N_list":[500]}"#,
    );
    let c = load_config(&p).unwrap();
    assert_eq!(c.replications, 100);
    assert_eq!(c.m, 100);
    assert_eq!(c.master_seed, 0);
    assert_eq!(c.wavelet.name(), "psi_c");
    assert_eq!(c.scale_exponent_list, None);
}

#[test]
fn malformed_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = [
        r#"{"process":"rosenblatt","H_list":[0.7],"H_list":[0.8],"N_list":[500]}"#,
        r#"{"process":"rosenblatt","H_list":[0.7],"N_list":[500],"replications":0}"#,
        r#"{"process":"rosenblatt","H_list":[0.7],"N_list":[500],"colour":"red"}"#,
        r#"{"process":"rosenblatt","H_list":[0.4],"N_list":[500]}"#,
    ];
    for (i, body) in bad.iter().enumerate() {
        let p = write(dir.path(), &format!("bad{i}.json"), body);
        assert!(load_config(&p).is_err(), "{body}");
        assert_eq!(sh(&format!("table1 --config {}", s(&p))), 2, "{body}");
    }
}

#[test]
fn table2_rejects_bad_hurst_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "t2.json",
        r#"{"process":"rosenblatt","H_list":[1.2],"N_list":[500]}"#,
    );
    let err = load_config(&p).unwrap_err().to_string();
    assert!(err.contains('H'), "{err}");
    assert_eq!(sh(&format!("table2 --config {}", s(&p))), 2);
}

#[test]
fn table1_writes_report_and_raw_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "t1.json",
        r#"{"process":"rosenblatt","H_list":[0.8],"N_list":[400],"scale_exponent_list":[0.5],"replications":6,"m":10,"master_seed":1}"#,
    );
    let out = dir.path().join("report.json");
    let raw = dir.path().join("raw.csv");
    let code = sh(&format!(
        "--workers 2 table1 --config {} --out {} --raw {} --format json",
        s(&cfg),
        s(&out),
        s(&raw)
    ));
    assert_eq!(code, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(report.to_string().contains("sqrt_mse"));
    let raw = std::fs::read_to_string(&raw).unwrap();
    assert_eq!(raw.lines().count(), 1 + 6);
}
