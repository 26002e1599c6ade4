use std::collections::BTreeMap;
use std::path::PathBuf;

use conflux_core::io::{ComplexJson, RationalJson, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::family::FamilyTemplate;

pub const MIN_TRUNCATION: usize = 8;
pub const DEFAULT_TRUNCATION: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Connect,
    Conflue,
    Monodromy,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Connect => "connect",
            Command::Conflue => "conflue",
            Command::Monodromy => "monodromy",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub family: Option<FamilyTemplate>,
    /// Limit system for strip and oracle computations; derived from the family when absent.
    #[serde(default)]
    pub limit_system: Option<RationalJson>,
    #[serde(default)]
    pub h_sequence: Vec<f64>,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub grid: Vec<ComplexJson>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_levels")]
    pub richardson_levels: usize,
}

fn default_truncation() -> usize {
    DEFAULT_TRUNCATION
}

fn default_levels() -> usize {
    1
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            system: None,
            family: None,
            limit_system: None,
            h_sequence: Vec::new(),
            truncation: DEFAULT_TRUNCATION,
            tolerances: BTreeMap::new(),
            grid: Vec::new(),
            output: OutputSpec::default(),
            seed: 0,
            richardson_levels: 1,
        }
    }
}

/// Named acceptance gates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub periodicity: f64,
    pub determinant: f64,
    pub residual: f64,
    pub order: f64,
    pub constancy: f64,
    pub oracle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { periodicity: 1e-9, determinant: 1e-12, residual: 1e-9, order: 0.8, constancy: 1e-3, oracle: 1e-4 }
    }
}

pub const TOLERANCE_NAMES: [&str; 6] = ["periodicity", "determinant", "residual", "order", "constancy", "oracle"];

impl Tolerances {
    pub fn from_map(map: &BTreeMap<String, f64>) -> Result<Self, CliError> {
        let mut t = Tolerances::default();
        for (name, &v) in map {
            if !v.is_finite() || v < 0.0 {
                return Err(CliError::Validation(format!("tolerance {name} must be a non-negative number")));
            }
            let slot = match name.as_str() {
                "periodicity" => &mut t.periodicity,
                "determinant" => &mut t.determinant,
                "residual" => &mut t.residual,
                "order" => &mut t.order,
                "constancy" => &mut t.constancy,
                "oracle" => &mut t.oracle,
                _ => {
                    return Err(CliError::Validation(format!(
                        "unknown tolerance {name}; expected one of {}",
                        TOLERANCE_NAMES.join(", ")
                    )))
                }
            };
            *slot = v;
        }
        Ok(t)
    }
}

/// Parses `NAME=VALUE`.
pub fn parse_tolerance(arg: &str) -> Result<(String, f64), CliError> {
    let (name, value) = arg
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("--tol expects NAME=VALUE, got {arg}")))?;
    let v = value
        .trim()
        .parse::<f64>()
        .map_err(|_| CliError::Validation(format!("tolerance {name} has a non-numeric value {value}")))?;
    Ok((name.trim().to_string(), v))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn command(&self) -> Result<Command, CliError> {
        self.command.ok_or_else(|| CliError::Validation("no command given".into()))
    }

    pub fn tolerances(&self) -> Result<Tolerances, CliError> {
        Tolerances::from_map(&self.tolerances)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let command = self.command()?;
        if self.truncation < MIN_TRUNCATION {
            return Err(CliError::Validation(format!("truncation must be at least {MIN_TRUNCATION}")));
        }
        if self.richardson_levels == 0 {
            return Err(CliError::Validation("richardson_levels must be at least 1".into()));
        }
        self.tolerances()?;
        if self.h_sequence.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(CliError::Validation("h_sequence entries must be positive".into()));
        }
        match command {
            Command::Selftest => {}
            Command::Solve | Command::Connect => {
                match (&self.system, &self.family) {
                    (Some(_), None) => {}
                    (None, Some(_)) if !self.h_sequence.is_empty() => {}
                    (None, Some(_)) => return Err(CliError::Validation("a family needs an h_sequence".into())),
                    _ => return Err(CliError::Validation("give exactly one of system and family".into())),
                }
                if self.grid.is_empty() {
                    return Err(CliError::Validation("grid must contain at least one point".into()));
                }
                if self.output.format == Format::Csv && self.system.is_none() && self.h_sequence.len() > 1 {
                    return Err(CliError::Validation("csv output holds a single step; use json for several h".into()));
                }
            }
            Command::Conflue | Command::Monodromy => {
                if self.family.is_none() {
                    return Err(CliError::Validation(format!("{} needs a family", command.name())));
                }
                if self.h_sequence.len() < 2 {
                    return Err(CliError::Validation("h_sequence needs at least two steps".into()));
                }
                if self.h_sequence.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(CliError::Validation("h_sequence must be strictly decreasing".into()));
                }
                if command == Command::Monodromy && self.output.format == Format::Csv {
                    return Err(CliError::Validation("monodromy reports are json only".into()));
                }
            }
        }
        Ok(())
    }
}
