use std::path::{Path, PathBuf};
use std::process::Command;

use rta_core::filters::FilterKind;
use rta_core::scenario::{run_simulation, InspectionConfig};
use rta_sim::logfile::{read_log, write_log, HEADER};
use rta_sim::{bench, load_config, parse_config, run, CliError, Overrides, RunSummary, OUT_ENV};

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn short(duration: f64) -> InspectionConfig {
    let mut cfg = InspectionConfig::default();
    cfg.scenario.duration = duration;
    cfg
}

fn sim() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rta-sim"));
    c.env_remove(OUT_ENV);
    c
}

#[test]
fn log_round_trips_exactly() {
    let cfg = short(100.0);
    let log = run_simulation(&cfg).unwrap();
    let mut buf = Vec::new();
    write_log(&log.records, &mut buf).unwrap();
    let back = read_log(buf.as_slice()).unwrap();
    assert_eq!(back, log.records);
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), HEADER.join(","));
    assert_eq!(text.lines().count(), 1 + log.records.len());
}

#[test]
fn single_deputy_log_keeps_infinite_phi2() {
    let mut cfg = short(20.0);
    cfg.scenario.deputies = 1;
    let log = run_simulation(&cfg).unwrap();
    let mut buf = Vec::new();
    write_log(&log.records, &mut buf).unwrap();
    let back = read_log(buf.as_slice()).unwrap();
    assert!(back.iter().all(|r| r.phi[1] == f64::INFINITY));
    assert_eq!(back, log.records);
}

#[test]
fn malformed_log_reports_the_line() {
    let cfg = short(3.0);
    let log = run_simulation(&cfg).unwrap();
    let mut buf = Vec::new();
    write_log(&log.records, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap().replacen("optimal", "bogus", 1);
    let text = if text.contains("bogus") {
        text
    } else {
        text.replacen(",none", ",bogus", 1)
    };
    match read_log(text.as_bytes()) {
        Err(CliError::LogFormat { line, .. }) => assert!(line >= 2),
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn shipped_default_config_equals_builtin_defaults() {
    let text = std::fs::read_to_string(repo_config("default.toml")).unwrap();
    assert_eq!(parse_config(&text).unwrap(), InspectionConfig::default());
}

#[test]
fn hocbf_config_differs_only_in_phi1() {
    let text = std::fs::read_to_string(repo_config("hocbf.toml")).unwrap();
    let cfg = parse_config(&text).unwrap();
    let mut expected = InspectionConfig::default();
    expected.constraints.phi_1 = cfg.constraints.phi_1;
    assert_eq!(cfg, expected);
    assert!(cfg.constraints.phi_1.hocbf);
    assert_ne!(
        cfg.constraints.phi_1,
        InspectionConfig::default().constraints.phi_1
    );
}

#[test]
fn partial_config_keeps_defaults_and_rejects_unknown_keys() {
    let cfg = parse_config("[scenario]\ndeputies = 3\n").unwrap();
    assert_eq!(cfg.scenario.deputies, 3);
    assert_eq!(cfg.filter, InspectionConfig::default().filter);
    let err = parse_config("[scenario]\ndeputys = 3\n").unwrap_err();
    assert!(err.to_string().contains("deputys"));
    let err = parse_config("[filter]\nkind = \"fast\"\n").unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
}

#[test]
fn overrides_take_precedence_and_are_validated() {
    let o = Overrides {
        filter: Some(FilterKind::ImplicitSimplex),
        seed: Some(9),
        duration: Some(10.0),
        dt: Some(0.5),
        deputies: Some(2),
        no_rta: true,
    };
    let cfg = load_config(Some(&repo_config("default.toml")), &o).unwrap();
    assert_eq!(cfg.filter.kind, FilterKind::ImplicitSimplex);
    assert_eq!((cfg.scenario.seed, cfg.scenario.deputies), (9, 2));
    assert_eq!((cfg.scenario.duration, cfg.scenario.dt), (10.0, 0.5));
    assert!(!cfg.filter.enabled);
    let bad = Overrides {
        deputies: Some(0),
        ..Overrides::default()
    };
    let err = load_config(None, &bad).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn run_writes_log_and_summary_consistent_with_each_other() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short(200.0);
    let art = run(&cfg, dir.path()).unwrap();
    let records = read_log(std::fs::File::open(&art.log_path).unwrap()).unwrap();
    let json: RunSummary = serde_json::from_reader(std::fs::File::open(&art.summary_path).unwrap()).unwrap();
    assert_eq!(json, art.summary);
    assert_eq!(json.rows, records.len());
    for k in 0..7 {
        let m = records.iter().map(|r| r.phi[k]).fold(f64::INFINITY, f64::min);
        assert_eq!(json.min_phi[k], Some(m));
    }
    assert_eq!(
        json.interventions,
        records.iter().filter(|r| r.intervening).count()
    );
    let max_u = records
        .iter()
        .flat_map(|r| r.u_act)
        .fold(0.0f64, |a, u| a.max(u.abs()));
    assert_eq!(json.max_abs_u_act, max_u);
    assert!(json.safe);
}

#[test]
fn bench_reports_one_row_per_repeat() {
    let cfg = short(50.0);
    let one = bench(&cfg, 1, false).unwrap();
    assert_eq!(one.runs.len(), 1);
    assert!(one.min_s <= one.mean_s && one.mean_s <= one.max_s);
    let same = bench(&cfg, 2, true).unwrap();
    assert_eq!(same.runs[0].min_phi_overall, same.runs[1].min_phi_overall);
    assert_eq!(same.runs[0].seed, same.runs[1].seed);
    let distinct = bench(&cfg, 2, false).unwrap();
    assert_eq!(distinct.runs[1].seed, cfg.scenario.seed + 1);
    assert_eq!(bench(&cfg, 0, false).unwrap_err().exit_code(), 2);
}

#[test]
fn binary_exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ok");
    let status = sim()
        .args(["run", "--config"])
        .arg(repo_config("default.toml"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    assert!(out.join("log.csv").exists() && out.join("summary.json").exists());

    let status = sim()
        .args(["run", "--deputies", "0", "--out"])
        .arg(dir.path().join("zero"))
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[scenario]\nu_max = \"one\"\n").unwrap();
    let res = sim().args(["run", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("u_max"));

    let status = sim()
        .args(["run", "--no-rta", "--out"])
        .arg(dir.path().join("unsafe"))
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(1));

    let status = sim()
        .args(["run", "--config"])
        .arg(dir.path().join("missing.toml"))
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(3));
}

#[test]
fn simplex_override_produces_a_valid_log() {
    let dir = tempfile::tempdir().unwrap();
    let status = sim()
        .args(["run", "--filter", "explicit-simplex", "--out"])
        .arg(dir.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let records = read_log(std::fs::File::open(dir.path().join("log.csv")).unwrap()).unwrap();
    let cfg = InspectionConfig::default();
    assert_eq!(records.len(), cfg.steps() * cfg.scenario.deputies);
    assert!(records.iter().flat_map(|r| r.u_act).all(|u| u.abs() <= 1.0));
    assert!(records.iter().all(|r| r.qp_status.is_none()));
    let summary: RunSummary =
        serde_json::from_reader(std::fs::File::open(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.filter, "explicit-simplex");
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from-env");
    let status = sim()
        .env(OUT_ENV, &out)
        .args(["bench", "--repeats", "2", "--duration", "20"])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let report: rta_sim::BenchReport =
        serde_json::from_reader(std::fs::File::open(out.join("bench.json")).unwrap()).unwrap();
    assert_eq!(report.runs.len(), 2);
}
