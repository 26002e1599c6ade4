//! Batch front-end: JSON run configurations in, JSON or CSV reports out.

pub mod commands;
pub mod config;
pub mod error;
pub mod family;
pub mod output;
pub mod selftest;

use serde::{Deserialize, Serialize};

use commands::Status;
use config::{Command, Format, RunConfig};
pub use error::{CliError, EXIT_NUMERIC, EXIT_OK, EXIT_PARTIAL, EXIT_VALIDATION};
pub use family::{family_instantiate, limit_system, FamilyTemplate};

/// Rendered report plus the exit code it maps to.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub text: String,
    pub exit_code: i32,
    /// Human-readable lines printed to stdout alongside a file report.
    pub lines: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub command: Option<String>,
    pub partial: bool,
    pub error: ErrorBody,
}

fn exit_for(status: Status) -> i32 {
    match status {
        Status::Ok => EXIT_OK,
        Status::Failed => EXIT_NUMERIC,
        Status::Partial => EXIT_PARTIAL,
    }
}

/// Validates and runs one configuration.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let tol = cfg.tolerances()?;
    let csv = cfg.output.format == Format::Csv;
    let (text, status, lines) = match cfg.command()? {
        Command::Solve => {
            let r = commands::solve(cfg, &tol)?;
            (if csv { output::solve_csv(&r)? } else { output::to_json(&r)? }, r.status, Vec::new())
        }
        Command::Connect => {
            let r = commands::connect(cfg, &tol)?;
            (if csv { output::connect_csv(&r)? } else { output::to_json(&r)? }, r.status, Vec::new())
        }
        Command::Conflue => {
            let r = commands::conflue(cfg, &tol)?;
            (if csv { output::conflue_csv(&r)? } else { output::to_json(&r)? }, r.status, Vec::new())
        }
        Command::Monodromy => {
            let r = commands::monodromy_command(cfg, &tol)?;
            (output::to_json(&r)?, r.status, Vec::new())
        }
        Command::Selftest => {
            let r = selftest::selftest()?;
            let lines = r.criteria.iter().map(|c| c.line()).collect();
            (output::to_json(&r)?, r.status, lines)
        }
    };
    Ok(Outcome { text, exit_code: exit_for(status), lines })
}

pub fn error_report(cfg: Option<&RunConfig>, e: &CliError) -> ErrorReport {
    ErrorReport {
        command: cfg.and_then(|c| c.command).map(|c| c.name().to_string()),
        partial: false,
        error: ErrorBody { kind: e.kind().into(), message: e.to_string() },
    }
}

/// Runs a configuration and writes its report; returns the process exit code.
pub fn run(cfg: &RunConfig) -> i32 {
    let path = cfg.output.path.as_deref();
    match execute(cfg) {
        Ok(out) => {
            for line in &out.lines {
                println!("{line}");
            }
            if out.lines.is_empty() || path.is_some() {
                if let Err(e) = output::write_text(path, &out.text) {
                    eprintln!("error: {e}");
                    return EXIT_NUMERIC;
                }
            }
            out.exit_code
        }
        Err(e) => report_error(Some(cfg), &e),
    }
}

/// Emits a structured error report on stdout (and to the output path, if any).
pub fn report_error(cfg: Option<&RunConfig>, e: &CliError) -> i32 {
    let report = error_report(cfg, e);
    let text = output::to_json(&report).unwrap_or_else(|_| format!("{{\"error\":{{\"message\":{:?}}}}}", e.to_string()));
    eprintln!("error: {e}");
    let path = cfg.and_then(|c| c.output.path.as_deref());
    if path.is_some() && cfg.is_some_and(|c| c.output.format == Format::Json) {
        let _ = output::write_text(path, &text);
    }
    let _ = output::write_text(None, &text);
    e.exit_code()
}

/// Sizes the global rayon pool from CONFLUX_THREADS; 0 or unset keeps the default.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("CONFLUX_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| CliError::Validation(format!("CONFLUX_THREADS={v} is not a count")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    Ok(())
}
