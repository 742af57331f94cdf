//! TOML config files.
//!
//! ```toml
//! schema_version = 1
//!
//! [run]
//! n = 500
//! k = 1000
//! protocol = "interleave"      # random-pull | sequential-pull | random-push
//!                              # | priority-push | interleave | advocate
//! spacing = 1                  # priority-push only
//! constraint = "hard"          # hard | soft
//! contacts = 8                 # contact-list size; omit for a full view
//! initial_state = "single-source"  # | eta-seeded | one-unique-per-user
//! eta = 0.5                    # eta-seeded only
//! seed = 7
//! max_slots = 200000           # optional
//! failure_epsilon = 0.1        # optional
//! trace = false                # write every transfer to trace.csv
//!
//! [sweep]                      # only read by `sweep`
//! seeds = 10
//! master_seed = 1
//! [sweep.axes]                 # any subset; crossed with each other
//! n = [64, 256]
//! k = [8, 32]
//! m = [2, 8, 0]                # 0 = full view
//! l = [1, 2]
//! protocol = ["random-pull", "sequential-pull"]
//! constraint = ["hard", "soft"]
//! eta = [0.5]
//! ```

use std::path::Path;

use gossip_core::{Constraint, ContactModel, InitialState, ProtocolSpec, SimulationConfig};
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

const PROTOCOL_IDS: &str =
    "random-pull, sequential-pull, random-push, priority-push, interleave, advocate";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    SingleSource,
    EtaSeeded,
    OneUniquePerUser,
}

/// One run as written in a config file. `n` and `k` may be left to sweep
/// axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    pub protocol: String,
    #[serde(default)]
    pub spacing: Option<u32>,
    #[serde(default = "default_constraint")]
    pub constraint: Constraint,
    #[serde(default)]
    pub contacts: Option<usize>,
    #[serde(default = "default_start")]
    pub initial_state: StartKind,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub max_slots: Option<u64>,
    #[serde(default)]
    pub failure_epsilon: Option<f64>,
    #[serde(default)]
    pub trace: bool,
}

fn default_constraint() -> Constraint {
    Constraint::Hard
}

fn default_start() -> StartKind {
    StartKind::SingleSource
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axes {
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub k: Vec<usize>,
    /// Contact-list sizes; 0 stands for a full view.
    #[serde(default)]
    pub m: Vec<usize>,
    #[serde(default)]
    pub l: Vec<u32>,
    #[serde(default)]
    pub protocol: Vec<String>,
    #[serde(default)]
    pub constraint: Vec<Constraint>,
    #[serde(default)]
    pub eta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub seeds: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub axes: Axes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub run: RunSpec,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| HarnessError::Config {
            path: origin.to_string(),
            message: e.to_string().trim_end().to_string(),
        })?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Config {
                path: origin.to_string(),
                message: format!(
                    "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
                    file.schema_version
                ),
            });
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }
}

fn field_error(origin: &str, field: &str, message: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config {
        path: origin.to_string(),
        message: format!("run.{field}: {message}"),
    }
}

impl RunSpec {
    /// Converts to a validated engine config.
    pub fn to_config(&self, origin: &str) -> Result<SimulationConfig> {
        let n = self.n.ok_or_else(|| field_error(origin, "n", "missing"))?;
        let k = self.k.ok_or_else(|| field_error(origin, "k", "missing"))?;
        let is_priority = self.protocol == "priority-push";
        if self.spacing.is_some() && !is_priority {
            return Err(field_error(origin, "spacing", "only used by priority-push"));
        }
        let protocol = ProtocolSpec::from_id(&self.protocol, self.spacing.unwrap_or(1))
            .ok_or_else(|| {
                field_error(
                    origin,
                    "protocol",
                    format!(
                        "unknown protocol `{}`; expected one of {PROTOCOL_IDS}",
                        self.protocol
                    ),
                )
            })?;
        let initial_state = match (self.initial_state, self.eta) {
            (StartKind::EtaSeeded, Some(eta)) => InitialState::EtaSeeded { eta },
            (StartKind::EtaSeeded, None) => {
                return Err(field_error(origin, "eta", "required by eta-seeded"))
            }
            (_, Some(_)) => return Err(field_error(origin, "eta", "only used by eta-seeded")),
            (StartKind::SingleSource, None) => InitialState::SingleSource,
            (StartKind::OneUniquePerUser, None) => InitialState::OneUniquePerUser,
        };
        let contact_model = match self.contacts {
            Some(m) => ContactModel::FixedLists { m },
            None => ContactModel::Uniform,
        };
        let mut config = SimulationConfig::new(n, k, protocol)
            .with_constraint(self.constraint)
            .with_contacts(contact_model)
            .with_initial_state(initial_state)
            .with_seed(self.seed)
            .with_trace(self.trace);
        config.max_slots = self.max_slots;
        if let Some(eps) = self.failure_epsilon {
            config.failure_epsilon = eps;
        }
        config
            .validate()
            .map_err(|e| field_error(origin, e.field, e.message))?;
        Ok(config)
    }

    /// Inverse of [`RunSpec::to_config`].
    pub fn from_config(config: &SimulationConfig) -> Self {
        let spacing = match config.protocol {
            ProtocolSpec::PriorityPush { spacing } => Some(spacing),
            _ => None,
        };
        let (initial_state, eta) = match config.initial_state {
            InitialState::SingleSource => (StartKind::SingleSource, None),
            InitialState::EtaSeeded { eta } => (StartKind::EtaSeeded, Some(eta)),
            InitialState::OneUniquePerUser => (StartKind::OneUniquePerUser, None),
        };
        let contacts = match config.contact_model {
            ContactModel::Uniform => None,
            ContactModel::FixedLists { m } => Some(m),
        };
        Self {
            n: Some(config.n),
            k: Some(config.k),
            protocol: config.protocol.id().to_string(),
            spacing,
            constraint: config.constraint,
            contacts,
            initial_state,
            eta,
            seed: config.seed,
            max_slots: config.max_slots,
            failure_epsilon: Some(config.failure_epsilon),
            trace: config.record_trace,
        }
    }
}
