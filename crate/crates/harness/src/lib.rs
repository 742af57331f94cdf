//! Experiment layer for the gossip simulator: config files, single runs,
//! seeded sweeps, bound verification and figure datasets.

pub mod figures;
pub mod record;
pub mod spec;
pub mod sweep;
pub mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};

use gossip_core::{OracleError, SimError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// The config file is unreadable, malformed or describes an invalid run.
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    /// Results do not fit the requested check.
    #[error("refused: {0}")]
    Refused(String),
    /// A results file could not be parsed.
    #[error("{path}: {message}")]
    Results { path: String, message: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// 2 for bad input (config, results, refusals), 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config { .. }
            | HarnessError::Refused(_)
            | HarnessError::Results { .. } => 2,
            HarnessError::Sim(SimError::Config(_)) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Creates `path` and its parents.
pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| HarnessError::io(path, e))
}

/// Writes a CSV file whose first line is `#schema <schema>`, followed by a
/// header row and `rows`.
pub fn write_csv<S: serde::Serialize>(path: &Path, schema: &str, rows: &[S]) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    writeln!(file, "#schema {schema}").map_err(|e| HarnessError::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

/// Reads a CSV file written by [`write_csv`], skipping the schema line.
pub fn read_csv<D: serde::de::DeserializeOwned>(path: &Path) -> Result<(String, Vec<D>)> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let (first, body) = text.split_once('\n').unwrap_or((&text, ""));
    let schema = first
        .strip_prefix("#schema ")
        .ok_or_else(|| HarnessError::Results {
            path: path.display().to_string(),
            message: "missing `#schema` line".into(),
        })?
        .trim()
        .to_string();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<D>, _>>()?;
    Ok((schema, rows))
}
