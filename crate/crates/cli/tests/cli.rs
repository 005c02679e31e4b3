use lindscat::pipeline::{fmt_e12, run, Command};
use lindscat::presets;
use lindscat::scenario::{parse_scenario, CouplingSpec, Scenario};
use lindscat_core::model::FieldPreset;
use std::path::Path;
use std::process::Command as Process;
use std::time::Instant;

const BIN: &str = env!("CARGO_BIN_EXE_lindscat");

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn schema() -> serde_json::Value {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/schema/report-v1.schema.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn assert_valid(report: &serde_json::Value) {
    let validator = jsonschema::validator_for(&schema()).unwrap();
    let errors: Vec<String> = validator.iter_errors(report).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "schema violations: {errors:#?}");
}

#[test]
fn minimal_file_gets_defaults() {
    let s = parse_scenario(
        "[model]\nsites = 8\ncoupling = { family = \"position\", field = { kind = \"gaussian\", width = 1.0, amplitude = 0.1 } }\n",
    )
    .unwrap();
    let mut expect = Scenario::base();
    expect.model.coupling = CouplingSpec::Position { field: FieldPreset::Gaussian { width: 1.0, amplitude: 0.1 } };
    assert_eq!(s, expect);
    assert_eq!(s.t_max(), 0.6 * 8.0);
}

#[test]
fn negative_tolerance_names_line_and_field() {
    let e = parse_scenario("seed = 3\n\n[tolerances]\nresidual = 1e-5\nlimit = -1\n").unwrap_err();
    assert_eq!(e.line, Some(5));
    assert_eq!(e.field.as_deref(), Some("tolerances.limit"));
    assert!(e.to_string().contains("line 5"), "{e}");
}

#[test]
fn unknown_key_names_line_and_field() {
    let e = parse_scenario("[model]\nsites = 8\nsights = 9\n").unwrap_err();
    assert_eq!(e.line, Some(3));
    assert!(e.field.as_deref().is_some_and(|f| f.starts_with("model")), "{e:?}");
    assert!(e.message.contains("sights"), "{e}");
}

#[test]
fn wrong_type_names_line_and_field() {
    let e = parse_scenario("[schedule]\ncheckpoints = \"many\"\n").unwrap_err();
    assert_eq!(e.line, Some(2));
    assert_eq!(e.field.as_deref(), Some("schedule.checkpoints"));
}

#[test]
fn unknown_preset_is_rejected() {
    let e = parse_scenario("preset = \"nope\"\n").unwrap_err();
    assert_eq!(e.line, Some(1));
    assert_eq!(e.field.as_deref(), Some("preset"));
}

#[test]
fn preset_keys_are_overridden() {
    let s = parse_scenario("preset = \"capture-well\"\n[model]\nsites = 10\npotential = \"none\"\n[capture]\neps = 0.25\n").unwrap();
    assert_eq!(s.model.sites, 10);
    assert!(s.model.potential.is_none());
    let c = s.capture.unwrap();
    assert_eq!(c.eps, 0.25);
    assert_eq!(c.amplitudes.len(), 5);
}

#[test]
fn siegmann_demo_matches_golden_file() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/siegmann-demo.toml")).unwrap();
    let golden: Scenario = toml::from_str(&text).unwrap();
    assert_eq!(presets::expand("siegmann-demo").unwrap(), golden);
    // The file route agrees with direct expansion.
    assert_eq!(parse_scenario("preset = \"siegmann-demo\"\n").unwrap(), golden);
}

#[test]
fn every_preset_expands_and_validates() {
    for name in presets::NAMES {
        let s = parse_scenario(&format!("preset = \"{name}\"\n")).unwrap();
        assert_eq!(s.preset.as_deref(), Some(name));
    }
}

#[test]
fn csv_numbers_use_twelve_digit_exponent_form() {
    assert_eq!(fmt_e12(0.0), "0.000000000000e+00");
    assert_eq!(fmt_e12(1.5), "1.500000000000e+00");
    assert_eq!(fmt_e12(-2.5e-7), "-2.500000000000e-07");
    assert_eq!(fmt_e12(6.02214076e123), "6.022140760000e+123");
}

#[test]
fn free_preset_passes_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "free.toml", "preset = \"free\"\n");
    let out = dir.path().join("out");
    let start = Instant::now();
    let st = Process::new(BIN).arg("run").arg(&f).arg("--out").arg(&out).status().unwrap();
    let secs = start.elapsed().as_secs_f64();
    assert_eq!(st.code(), Some(0));
    assert!(secs < 5.0, "free preset took {secs:.1} s");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_valid(&report);
    let verdicts = report["verdicts"].as_array().unwrap();
    assert!(!verdicts.is_empty());
    assert!(verdicts.iter().all(|v| v["verdict"] == "pass"));
    assert!(out.join("report.meta.json").exists());
}

#[test]
fn report_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "pd.toml", "preset = \"position-decoherence\"\nseed = 11\n");
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("out{k}"));
        Process::new(BIN).arg("run").arg(&f).arg("--out").arg(&out).arg("--format").arg("json+csv").status().unwrap();
        outputs.push((std::fs::read(out.join("report.json")).unwrap(), std::fs::read(out.join("timeseries.csv")).unwrap()));
    }
    assert!(outputs[0] == outputs[1]);
}

#[test]
fn position_decoherence_reports_completeness() {
    let s = presets::expand("position-decoherence").unwrap();
    let start = Instant::now();
    let r = run(&s, Command::Run);
    assert!(start.elapsed().as_secs() < 180);
    assert!(r.errors.is_empty(), "{:?}", r.errors);
    for name in ["omega_plus * omega_minus = id", "omega_minus * omega_plus = id", "W+(H,H0) W+(H0,H) = 1"] {
        assert!(r.verdicts.iter().any(|c| c.name == name), "missing verdict {name}");
    }
    assert_valid(&serde_json::to_value(&r).unwrap());
}

#[test]
fn timeseries_header_and_format() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "pd.toml", "preset = \"position-decoherence\"\n");
    let out = dir.path().join("out");
    Process::new(BIN).arg("wave-op").arg(&f).arg("--out").arg(&out).arg("--format").arg("json+csv").status().unwrap();
    let text = std::fs::read_to_string(out.join("timeseries.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "t");
    assert!(header[1..].iter().all(|h| h.ends_with("_residual") || h.ends_with("_norm")));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), header.len());
    let re = |s: &str| {
        let (m, e) = s.split_once('e').unwrap();
        m.trim_start_matches('-').split_once('.').unwrap().1.len() == 12 && (e.starts_with('+') || e.starts_with('-'))
    };
    assert!(row.iter().filter(|c| !c.is_empty()).all(|c| re(c)), "{row:?}");
}

#[test]
fn capture_well_sweep_has_five_rows() {
    let dir = tempfile::tempdir().unwrap();
    // Shorter lattice keeps the test quick; the sweep itself is unchanged.
    let f = write(dir.path(), "cw.toml", "preset = \"capture-well\"\n[model]\nsites = 10\n");
    let out = dir.path().join("out");
    let st = Process::new(BIN).arg("capture").arg(&f).arg("--out").arg(&out).arg("--format").arg("json+csv").status().unwrap();
    assert!(matches!(st.code(), Some(0..=2)));
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6, "{text}");
    assert!(lines[0].starts_with("amplitude,c_v,"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_valid(&report);
    let escapes = report["capture"]["sweep"][0]["escape"].as_array().unwrap();
    assert!(escapes.iter().all(|e| e.as_f64().is_some_and(|x| (-1e-8..=1.0 + 1e-8).contains(&x))));
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "free.toml", "preset = \"free\"\n");
    let out = Process::new(BIN)
        .args(["smoothness"])
        .arg(&f)
        .args(["--t-max", "2.5", "--dt", "0.02", "--tol", "1e-7", "--seed", "9"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let s = &report["scenario"];
    assert_eq!(s["schedule"]["t_max"], 2.5);
    assert_eq!(s["tolerances"]["smoothness_dt"], 0.02);
    assert_eq!(s["tolerances"]["limit"], 1e-7);
    assert_eq!(s["seed"], 9);
}

#[test]
fn bad_flag_value_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "free.toml", "preset = \"free\"\n");
    let out = Process::new(BIN).arg("run").arg(&f).args(["--tol", "-1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tolerances.limit"));
}

#[test]
fn parse_error_exits_two_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.toml", "[tolerances]\nresidual = -1\n");
    let out = Process::new(BIN).arg("run").arg(&f).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("tolerances.residual"), "{err}");
}

#[test]
fn verify_qds_passes() {
    let out = Process::new(BIN).args(["verify", "qds"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    let lines: Vec<&str> = stdout.lines().collect();
    assert!(lines[0].starts_with("criterion 1 ") && lines[0].contains("PASS"));
    assert!(lines[1].starts_with("criterion 9 ") && lines[1].contains("PASS"));
    let summary: serde_json::Value = serde_json::from_str(lines[2]).unwrap();
    assert_eq!(summary["passed"], true);
}

#[test]
fn verify_with_corrupted_dissipator_names_choi() {
    let out = Process::new(BIN).args(["verify", "qds", "--corrupt-dissipator"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(1), "{stdout}");
    let first = stdout.lines().next().unwrap();
    assert!(first.contains("FAIL") && first.contains("Choi min eigenvalue"), "{first}");
}
