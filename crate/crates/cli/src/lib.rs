//! Scenario runner behind the `lab` binary.
//!
//! A run parses and validates the whole configuration before touching the
//! file system, so a bad config never leaves partial output behind.

pub mod config;
pub mod scenario;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{parse, CheckId, Config, ConfigError, Scenario};
pub use scenario::{run_scenario, ScenarioReport, ScenarioRun};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILURE: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Io(PathBuf, std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl std::error::Error for RunError {}

pub fn load_config(path: &Path) -> Result<Config, RunError> {
    let text = fs::read_to_string(path)
        .map_err(|e| RunError::Config(ConfigError { line: None, column: None, message: format!("{}: {e}", path.display()) }))?;
    parse(&text).map_err(RunError::Config)
}

/// Runs every scenario, in parallel on `threads` workers when given, and
/// returns them in configuration order.
pub fn run_all(config: &Config, threads: Option<usize>) -> Vec<ScenarioRun> {
    let work = || config.scenarios.par_iter().map(run_scenario).collect::<Vec<_>>();
    match threads.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(work),
        None => work(),
    }
}

/// Writes each run under `out/<output_dir>/`, one scenario at a time.
pub fn write_runs(config: &Config, runs: &[ScenarioRun], out: &Path) -> Result<(), RunError> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |e| RunError::Io(p, e)
    };
    for (s, run) in config.scenarios.iter().zip(runs) {
        let dir = out.join(s.output_dir());
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        for a in &run.artifacts {
            let path = dir.join(&a.path);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(io(parent))?;
            }
            fs::write(&path, &a.contents).map_err(io(&path))?;
        }
        let path = dir.join("report.json");
        let mut json = serde_json::to_string_pretty(&run.report).expect("reports serialize");
        json.push('\n');
        fs::write(&path, json).map_err(io(&path))?;
    }
    Ok(())
}

/// `lab run`: returns the process exit code.
pub fn run_command(config_path: &Path, out: &Path, threads: Option<usize>) -> i32 {
    let config = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG_ERROR;
        }
    };
    let runs = run_all(&config, threads);
    if let Err(e) = write_runs(&config, &runs, out) {
        eprintln!("{e}");
        return EXIT_CONFIG_ERROR;
    }
    let mut all_passed = true;
    for run in &runs {
        let r = &run.report;
        println!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.scenario);
        if let Some(e) = &r.error {
            println!("  error: {e}");
        }
        for c in &r.checks {
            let status = if c.passed { "ok  " } else { "fail" };
            let failed: Vec<&str> = c.verdicts.iter().filter(|(_, v)| !**v).map(|(k, _)| k.as_str()).collect();
            let detail = match (&c.error, failed.is_empty()) {
                (Some(e), _) => format!(" ({e})"),
                (None, false) => format!(" (failed: {})", failed.join(", ")),
                (None, true) => String::new(),
            };
            println!("  {status} {:<12} tol {:e}{detail}", c.check, c.tolerance);
        }
        all_passed &= r.passed;
    }
    if all_passed {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILURE
    }
}
