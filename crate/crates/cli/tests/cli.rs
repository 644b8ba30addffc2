use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use framebound_cli::{scenario, RunConfig, NAMES};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_framebound")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_text(dir: &Path, text: &str) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, text).unwrap();
    bin(&["run", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()])
}

#[test]
fn malformed_json_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_text(dir.path(), "{\n  \"version\": 1,\n  \"name\": \"x\",\n  \"system\": {\"type\": \"nadic\", \"n\": 2,, }\n}\n");
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("reason=syntax"), "{e}");
    assert!(e.contains("line=4"), "{e}");
    assert!(e.contains("column="), "{e}");
}

#[test]
fn unknown_field_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_text(dir.path(), r#"{"version": 1, "name": "x", "system": {"type": "nadic", "n": 2, "j_max": 6}, "colour": "red"}"#);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("reason=schema") && e.contains("colour"), "{e}");
}

#[test]
fn wrong_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_text(dir.path(), r#"{"version": 7, "name": "x", "system": {"type": "nadic", "n": 2, "j_max": 6}, "grid": {"resolution": 64}}"#);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("reason=version"), "{}", stderr(&o));
}

#[test]
fn singular_lattice_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"version": 1, "name": "x",
        "system": {"type": "shift_invariant", "generators": [{"name": "gaussian"}], "gamma": [[1, 2], [2, 4]]}, "grid": {"resolution": 64}}"#;
    let o = run_text(dir.path(), text);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("reason=invalid_value"), "{}", stderr(&o));
}

#[test]
fn missing_file_exits_with_config_code() {
    let o = bin(&["run", "/nonexistent/framebound.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn nadic3_exits_with_divergence_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("n3");
    let o = bin(&["scenario", "nadic3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains(framebound::oracle::HYPOTHESIS_VIOLATED), "{report}");
    assert!(report.contains("exit: 3"), "{report}");
}

#[test]
fn unknown_scenario_lists_available_names() {
    let o = bin(&["scenario", "wobble"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    for n in NAMES {
        assert!(e.contains(n), "{e}");
    }
}

#[test]
fn every_scenario_config_round_trips() {
    for n in NAMES {
        let cfg = scenario(n).unwrap();
        let back = RunConfig::parse(&cfg.to_json()).unwrap();
        assert_eq!(back.to_json(), cfg.to_json(), "{n}");
    }
}

#[test]
fn emitted_config_runs_like_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["scenario", "meyer", "--emit-config"]);
    assert!(o.status.success());
    let cfg = dir.path().join("meyer.json");
    fs::write(&cfg, &o.stdout).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(bin(&["run", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(bin(&["scenario", "meyer", "--out", b.to_str().unwrap()]).status.code(), Some(0));
    for f in ["report.txt", "bounds.csv", "t_alpha.csv", "oracle.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn csv_output_is_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(bin(&["scenario", "gabor_gauss", "--out", a.to_str().unwrap(), "--threads", "1"]).status.code(), Some(0));
    assert_eq!(bin(&["scenario", "gabor_gauss", "--out", b.to_str().unwrap(), "--threads", "4"]).status.code(), Some(0));
    for f in ["bounds.csv", "t_alpha.csv", "oracle.csv"] {
        let x = fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn csv_headers_and_float_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    assert_eq!(bin(&["scenario", "shannon", "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let bounds = fs::read_to_string(out.join("bounds.csv")).unwrap();
    let mut lines = bounds.lines();
    assert_eq!(lines.next(), Some("omega_1,t0,R,R_abs,l2_norm"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 5);
    for v in row {
        assert!(v.contains('e') && v.parse::<f64>().is_ok(), "{v}");
    }
}

#[test]
fn sweep_writes_one_directory_per_scale() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"version": 1, "name": "sweep",
        "system": {"type": "wavelet", "generators": [{"name": "meyer"}], "gamma": [[1]], "dilation": [[2]], "j_min": -6, "j_max": 6},
        "grid": {"resolution": 128},
        "sweep": {"gamma_scale": [0.5, 1]}}"#;
    let o = run_text(dir.path(), text);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("out");
    assert!(out.join("report.txt").exists());
    for c in ["c=0.5", "c=1"] {
        assert!(out.join(c).join("bounds.csv").exists(), "{c}");
    }
}

#[test]
fn undersampled_grid_with_zero_tolerance_violates_the_chain() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"version": 1, "name": "phase",
        "system": {"type": "wavelet", "generators": [{"name": "meyer"}, {"name": "meyer", "transforms": [{"phase": [0.5]}]}],
                   "gamma": [[1]], "dilation": [[2]], "j_min": -6, "j_max": 6},
        "grid": {"resolution": 64, "refine": false},
        "oracle": {"n": 1024, "rate": 32, "tol": 0}}"#;
    let o = run_text(dir.path(), text);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let report = fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(report.contains("B_opt <= B1      VIOLATED"), "{report}");
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let text = fs::read_to_string(&p).unwrap();
        RunConfig::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        n += 1;
    }
    assert!(n >= 5);
}
