use std::path::Path;
use std::process::Command;

use necklab::cli::{
    run, run_criterion, write_outputs, Grids, Overrides, PlotData, Relation, Suite, SuiteConfig, SCHEMA_VERSION,
};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_neck-lab");

fn small_cones(seed: u64) -> SuiteConfig {
    SuiteConfig {
        suite: Suite::Cones4d,
        seed,
        grids: Grids {
            cone_starts: 40,
            trace_trajectories: 10,
            ..Grids::default()
        },
        ..SuiteConfig::default()
    }
}

fn read_report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn neck_lab(args: &[&str]) -> Command {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("NECK_LAB_OUT");
    cmd
}

#[test]
fn fixed_seed_gives_identical_report_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = small_cones(7);
    write_outputs(&run(&cfg).unwrap(), a.path()).unwrap();
    let single = SuiteConfig { jobs: 1, ..cfg };
    write_outputs(&run(&single).unwrap(), b.path()).unwrap();
    let ra = std::fs::read(a.path().join("report.json")).unwrap();
    let rb = std::fs::read(b.path().join("report.json")).unwrap();
    assert_eq!(ra, rb);
    let other = run(&small_cones(8)).unwrap();
    assert_ne!(other.report.to_json().into_bytes(), ra);
}

#[test]
fn report_schema_and_anchors() {
    let cfg = SuiteConfig {
        suite: Suite::Warped,
        ..SuiteConfig::default()
    };
    let out = run(&cfg).unwrap();
    let v: Value = serde_json::from_str(&out.report.to_json()).unwrap();
    assert_eq!(v["schema_version"], SCHEMA_VERSION);
    assert_eq!(v["suite"], "warped");
    assert_eq!(v["L"], 80.0);
    let cases = v["cases"].as_array().unwrap();
    assert_eq!(cases.len(), 15);
    for c in cases {
        assert!(!c["anchor"].as_str().unwrap().is_empty());
        for key in ["name", "status", "measured", "expected", "tolerance", "relation", "criterion"] {
            assert!(c.get(key).is_some(), "{key}");
        }
    }
    assert_eq!(out.timing.criteria.len(), 1);
}

#[test]
fn relations() {
    assert!(Relation::Within.holds(1.0, 1.05, 0.1));
    assert!(!Relation::Within.holds(1.0, 1.2, 0.1));
    assert!(Relation::AtMost.holds(1.05, 1.0, 0.1) && !Relation::AtMost.holds(1.2, 1.0, 0.1));
    assert!(Relation::AtLeast.holds(0.95, 1.0, 0.1) && !Relation::AtLeast.holds(0.8, 1.0, 0.1));
    assert!(Relation::Above.holds(1e-300, 0.0, 1.0) && !Relation::Above.holds(0.0, 0.0, 1.0));
    assert!(Relation::Below.holds(0.99, 1.0, 0.0) && !Relation::Below.holds(1.0, 1.0, 5.0));
    for r in [Relation::Within, Relation::AtMost, Relation::AtLeast, Relation::Above, Relation::Below] {
        assert!(!r.holds(f64::NAN, 0.0, 1.0));
    }
}

#[test]
fn suites_map_onto_criteria() {
    let mut seen: Vec<u8> = Suite::ALL.iter().filter(|s| **s != Suite::All).flat_map(|s| s.criteria()).collect();
    seen.sort();
    assert_eq!(seen, (1..=10).collect::<Vec<_>>());
    assert_eq!(Suite::All.criteria().len(), 10);
    assert_eq!("lichnerowicz".parse::<Suite>().unwrap().criteria(), vec![2, 3, 10]);
    assert!("curvatures".parse::<Suite>().is_err());
}

#[test]
fn unknown_criterion_is_a_failing_case() {
    let r = run_criterion(11, &SuiteConfig::default());
    assert!(!r.passed());
    assert!(r.cases[0].error.is_some());
}

#[test]
fn config_resolution_order() {
    let json = r#"{"suite": "heat", "n": 5, "seed": 3, "L": 40, "out": "from-config", "tolerances": {"representation": 1e-6}}"#;
    let flags = Overrides {
        seed: Some(9),
        out: Some("from-flag".into()),
        ..Overrides::default()
    };
    let cfg = SuiteConfig::resolve(Some(json), &flags, None).unwrap();
    assert_eq!((cfg.suite, cfg.n, cfg.seed, cfg.l), (Suite::Heat, 5, 9, 40.0));
    assert_eq!(cfg.out, Path::new("from-flag"));
    assert_eq!(cfg.tolerances.representation, 1e-6);
    assert_eq!(cfg.tolerances.newton, 1e-10);
    let cfg = SuiteConfig::resolve(Some(json), &flags, Some("from-env")).unwrap();
    assert_eq!(cfg.out, Path::new("from-env"));

    assert!(SuiteConfig::resolve(Some(r#"{"n": 9}"#), &Overrides::default(), None).is_err());
    assert!(SuiteConfig::resolve(Some(r#"{"bogus": 1}"#), &Overrides::default(), None).is_err());
    assert!(SuiteConfig::resolve(Some(r#"{"tol_scale": 0}"#), &Overrides::default(), None).is_err());
    assert!(SuiteConfig::resolve(Some("not json"), &Overrides::default(), None).is_err());
}

#[test]
fn default_config_round_trips() {
    let cfg = SuiteConfig::default();
    let s = serde_json::to_string(&cfg).unwrap();
    let back: SuiteConfig = serde_json::from_str(&s).unwrap();
    assert_eq!(back, cfg);
    let v: Value = serde_json::from_str(&s).unwrap();
    assert_eq!(v["L"], 80.0);
    assert_eq!(v["suite"], "all");
}

#[test]
fn csv_has_header_and_round_trip_values() {
    let p = PlotData::new("x.csv", &["L", "residual", "slope"], vec![vec![20.0, 0.1, -0.3], vec![40.0, 1e-17, -0.3]]);
    let csv = p.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "L,residual,slope");
    assert_eq!(lines.len(), 3);
    let vals: Vec<f64> = lines[2].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(vals, vec![40.0, 1e-17, -0.3]);
}

#[test]
fn binary_runs_warped_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let status = neck_lab(&["warped", "--out", out.to_str().unwrap()]).output().unwrap();
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stdout));
    let v = read_report(&out);
    assert_eq!(v["failed"], 0);
    assert!(out.join("timing.json").exists());
}

#[test]
fn binary_usage_errors_exit_2() {
    assert_eq!(neck_lab(&["nonsense"]).output().unwrap().status.code(), Some(2));
    assert_eq!(neck_lab(&[]).output().unwrap().status.code(), Some(2));
    assert_eq!(neck_lab(&["warped", "--n", "9"]).output().unwrap().status.code(), Some(2));
    assert_eq!(neck_lab(&["warped", "--frobnicate"]).output().unwrap().status.code(), Some(2));
    assert_eq!(neck_lab(&["warped", "--config", "/nonexistent/c.json"]).output().unwrap().status.code(), Some(2));
}

#[test]
fn binary_flags_override_config_and_env_overrides_out() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{"suite": "warped", "seed": 5, "n": 5}"#).unwrap();
    let flag_out = dir.path().join("flag");
    let env_out = dir.path().join("env");
    let status = neck_lab(&["--config", config.to_str().unwrap(), "--seed", "11", "--out", flag_out.to_str().unwrap()])
        .env("NECK_LAB_OUT", &env_out)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert!(!flag_out.exists());
    let v = read_report(&env_out);
    assert_eq!((v["seed"].as_u64(), v["n"].as_u64(), v["suite"].as_str()), (Some(11), Some(5), Some("warped")));
}

#[test]
fn binary_failure_exits_1_with_itemized_report() {
    let dir = tempfile::tempdir().unwrap();
    let status = neck_lab(&["warped", "--tol-scale", "1e-10", "--out", dir.path().to_str().unwrap()]).output().unwrap();
    assert_eq!(status.status.code(), Some(1));
    let v = read_report(dir.path());
    assert!(v["failed"].as_u64().unwrap() > 0);
    assert!(v["cases"].as_array().unwrap().iter().any(|c| c["status"] == "fail"));
}

#[test]
fn binary_unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    let status = neck_lab(&["warped", "--out", file.join("sub").to_str().unwrap()]).output().unwrap();
    assert_eq!(status.status.code(), Some(3));
}
