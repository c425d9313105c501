//! Runs the spacecraft inspection scenario from a TOML config and writes a
//! CSV log plus a JSON summary.

pub mod config;
pub mod logfile;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rta_core::scenario::{run_simulation, InspectionConfig, LogSummary, ScenarioError, NUM_PHI};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{load_config, parse_config, Overrides};

pub const LOG_FILE: &str = "log.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const BENCH_FILE: &str = "bench.json";

/// Environment variable that overrides the output directory.
pub const OUT_ENV: &str = "RTA_SIM_OUT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("log line {line}: {msg}")]
    LogFormat { line: u64, msg: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 3 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Scenario(ScenarioError::Config(_)) => 2,
            _ => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Summary written next to the log. Non-finite minima (`φ₂` with a single
/// deputy) are stored as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub filter: String,
    pub rta_enabled: bool,
    pub seed: u64,
    pub deputies: usize,
    pub rows: usize,
    pub min_phi: [Option<f64>; NUM_PHI],
    pub min_phi_overall: Option<f64>,
    pub interventions: usize,
    pub qp_relaxations: usize,
    pub max_abs_u_act: f64,
    pub wall_clock_s: f64,
    pub safe: bool,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl RunSummary {
    pub fn new(cfg: &InspectionConfig, s: &LogSummary) -> Self {
        Self {
            filter: cfg.filter.kind.to_string(),
            rta_enabled: cfg.filter.enabled,
            seed: cfg.scenario.seed,
            deputies: cfg.scenario.deputies,
            rows: s.rows,
            min_phi: s.min_phi.map(finite),
            min_phi_overall: finite(s.min_phi_overall),
            interventions: s.interventions,
            qp_relaxations: s.relaxations,
            max_abs_u_act: s.max_abs_u_act,
            wall_clock_s: s.wall_clock,
            safe: s.is_safe(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub log_path: PathBuf,
    pub summary_path: PathBuf,
    pub summary: RunSummary,
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let f = File::create(path).map_err(io_err(path))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)?;
    Ok(())
}

/// Runs one simulation and writes `log.csv` and `summary.json` into `out_dir`.
pub fn run(cfg: &InspectionConfig, out_dir: &Path) -> Result<RunArtifacts, CliError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let log = run_simulation(cfg)?;
    let log_path = out_dir.join(LOG_FILE);
    let f = File::create(&log_path).map_err(io_err(&log_path))?;
    logfile::write_log(&log.records, BufWriter::new(f))?;
    let summary = RunSummary::new(cfg, &log.summary());
    let summary_path = out_dir.join(SUMMARY_FILE);
    write_json(&summary_path, &summary)?;
    Ok(RunArtifacts {
        log_path,
        summary_path,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRun {
    pub seed: u64,
    pub wall_clock_s: f64,
    pub min_phi_overall: Option<f64>,
    pub safe: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub filter: String,
    pub runs: Vec<BenchRun>,
    pub mean_s: f64,
    pub min_s: f64,
    pub max_s: f64,
}

impl BenchReport {
    pub fn all_safe(&self) -> bool {
        self.runs.iter().all(|r| r.safe)
    }
}

/// Runs the simulation `repeats` times with seeds `seed, seed+1, …` (or the
/// config seed every time when `same_seed` is set) and reports wall-clock
/// statistics.
pub fn bench(cfg: &InspectionConfig, repeats: usize, same_seed: bool) -> Result<BenchReport, CliError> {
    if repeats == 0 {
        return Err(CliError::Config("repeats must be at least 1".into()));
    }
    let mut runs = Vec::with_capacity(repeats);
    for k in 0..repeats {
        let mut c = cfg.clone();
        if !same_seed {
            c.scenario.seed = cfg.scenario.seed.wrapping_add(k as u64);
        }
        let s = run_simulation(&c)?.summary();
        runs.push(BenchRun {
            seed: c.scenario.seed,
            wall_clock_s: s.wall_clock,
            min_phi_overall: finite(s.min_phi_overall),
            safe: s.is_safe(),
        });
    }
    let times: Vec<f64> = runs.iter().map(|r| r.wall_clock_s).collect();
    Ok(BenchReport {
        filter: cfg.filter.kind.to_string(),
        mean_s: times.iter().sum::<f64>() / times.len() as f64,
        min_s: times.iter().copied().fold(f64::INFINITY, f64::min),
        max_s: times.iter().copied().fold(0.0, f64::max),
        runs,
    })
}

pub fn write_bench(report: &BenchReport, out_dir: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let path = out_dir.join(BENCH_FILE);
    write_json(&path, report)?;
    Ok(path)
}
