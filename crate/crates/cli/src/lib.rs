//! Config-driven experiment runner for mixed-state projected ensembles.
//!
//! [`config`] parses and validates experiment files, [`run`] executes sweeps
//! and [`output`] writes result files. [`execute`] ties them together the way
//! the `mspe` binary does.

pub mod config;
pub mod output;
pub mod run;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use config::{ConfigIssue, ExperimentConfig, IssueKind, Mode};
use mspe_core::MspeError;
use serde_json::json;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Config(Vec<ConfigIssue>),
    Core(MspeError),
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(issues) if issues.iter().all(|i| i.kind == IssueKind::Resource) => EXIT_RESOURCE,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(MspeError::Argument(_)) => EXIT_CONFIG,
            CliError::Core(MspeError::Resource(_)) => EXIT_RESOURCE,
            CliError::Core(MspeError::Numeric(_) | MspeError::EmptyEnsemble(_)) => EXIT_NUMERIC,
            CliError::Io { .. } => EXIT_RESOURCE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(issues) => {
                for (i, issue) in issues.iter().enumerate() {
                    if i > 0 {
                        writeln!(f)?;
                    }
                    write!(f, "{issue}")?;
                }
                Ok(())
            }
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<MspeError> for CliError {
    fn from(e: MspeError) -> Self {
        CliError::Core(e)
    }
}

/// Reads, overrides and parses a config file; issues carry the file name.
pub fn load_config(
    path: &Path,
    overrides: &[(String, serde_json::Value)],
) -> Result<(ExperimentConfig, String), CliError> {
    let raw = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(vec![ConfigIssue {
            kind: IssueKind::Config,
            field: "<file>".into(),
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        }])
    })?;
    let cfg = config::parse_config(&raw, overrides).map_err(|i| CliError::Config(vec![i]))?;
    Ok((cfg, raw))
}

pub fn check(cfg: &ExperimentConfig, raw: Option<&str>, mode: Mode) -> Result<(), CliError> {
    let issues = config::validate_config(cfg, raw, mode);
    if issues.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(issues))
    }
}

/// Validates, runs and writes one experiment. Returns the data file written.
pub fn execute(cfg: &ExperimentConfig, raw: Option<&str>, mode: Mode, command: &str) -> Result<PathBuf, CliError> {
    check(cfg, raw, mode)?;
    let output = cfg.output.clone().ok_or_else(|| {
        CliError::Config(vec![ConfigIssue {
            kind: IssueKind::Config,
            field: "output".into(),
            line: None,
            message: "no output path: set output or pass --output".into(),
        }])
    })?;
    let start = Instant::now();
    let (data, summary) = match mode {
        Mode::Distance => (run::distance_csv(&run::run_distance(cfg)?), serde_json::Value::Null),
        Mode::Entropy => (run::entropy_csv(&run::run_entropy(cfg)?), serde_json::Value::Null),
        Mode::Spectrum => {
            let points = run::run_spectrum(cfg)?;
            let summary: Vec<_> = points
                .iter()
                .map(|p| {
                    json!({
                        "N": p.n,
                        "t": p.t,
                        "rank_cap": p.rank_cap,
                        "n_values": p.histogram.n_values,
                        "mean": p.histogram.mean,
                        "variance": p.histogram.variance,
                    })
                })
                .collect();
            (run::spectrum_csv(cfg, &points), json!(summary))
        }
    };
    let mut meta = json!({
        "command": command,
        "config": cfg,
        "seed": cfg.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_seconds": start.elapsed().as_secs_f64(),
    });
    if !summary.is_null() {
        meta["summary"] = summary;
    }
    output::write_results(&output, &data, &meta).map_err(|source| CliError::Io {
        path: output.clone(),
        source,
    })?;
    Ok(output)
}
