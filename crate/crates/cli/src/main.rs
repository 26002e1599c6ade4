use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use conflux_cli::config::{parse_tolerance, Command, Format, RunConfig};
use conflux_cli::{configure_threads, report_error, run, CliError};

/// Connection matrices, confluence limits and monodromies of fuchsian difference systems.
#[derive(Parser, Debug)]
#[command(name = "conflux", version)]
struct Args {
    /// Overrides the command named in the configuration.
    command: Option<Command>,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
    /// Truncation order N of the factorial series.
    #[arg(long)]
    order: Option<usize>,
    /// Tolerance override NAME=VALUE; repeatable.
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    tol: Vec<String>,
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(c) = args.command {
        cfg.command = Some(c);
    }
    if let Some(p) = &args.out {
        cfg.output.path = Some(p.clone());
    }
    if let Some(f) = args.format {
        cfg.output.format = f;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.order {
        cfg.truncation = n;
    }
    for t in &args.tol {
        let (name, v) = parse_tolerance(t)?;
        cfg.tolerances.insert(name, v);
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    if let Err(e) = configure_threads() {
        return ExitCode::from(report_error(None, &e) as u8);
    }
    let code = match load(&args) {
        Ok(cfg) => run(&cfg),
        Err(e) => report_error(None, &e),
    };
    ExitCode::from(code as u8)
}
