//! Run configuration.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Piece-selection rule and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum ProtocolSpec {
    RandomPull,
    SequentialPull,
    RandomPush,
    PriorityPush { spacing: u32 },
    Interleave,
    Advocate,
}

impl ProtocolSpec {
    /// Identifier used in configuration files.
    pub fn id(&self) -> &'static str {
        match self {
            ProtocolSpec::RandomPull => "random-pull",
            ProtocolSpec::SequentialPull => "sequential-pull",
            ProtocolSpec::RandomPush => "random-push",
            ProtocolSpec::PriorityPush { .. } => "priority-push",
            ProtocolSpec::Interleave => "interleave",
            ProtocolSpec::Advocate => "advocate",
        }
    }

    /// Parses an identifier; `spacing` is only consulted for priority push.
    pub fn from_id(id: &str, spacing: u32) -> Option<Self> {
        Some(match id {
            "random-pull" => ProtocolSpec::RandomPull,
            "sequential-pull" => ProtocolSpec::SequentialPull,
            "random-push" => ProtocolSpec::RandomPush,
            "priority-push" => ProtocolSpec::PriorityPush { spacing },
            "interleave" => ProtocolSpec::Interleave,
            "advocate" => ProtocolSpec::Advocate,
            _ => return None,
        })
    }

    pub fn is_pull_only(&self) -> bool {
        matches!(
            self,
            ProtocolSpec::RandomPull | ProtocolSpec::SequentialPull | ProtocolSpec::Advocate
        )
    }

    pub fn is_push_only(&self) -> bool {
        matches!(
            self,
            ProtocolSpec::RandomPush | ProtocolSpec::PriorityPush { .. }
        )
    }

    /// Protocols whose source releases pieces on a fixed schedule.
    pub fn has_release_schedule(&self) -> bool {
        matches!(
            self,
            ProtocolSpec::PriorityPush { .. } | ProtocolSpec::Interleave
        )
    }
}

impl std::fmt::Display for ProtocolSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProtocolSpec::PriorityPush { spacing } => write!(f, "priority-push(l={spacing})"),
            other => f.write_str(other.id()),
        }
    }
}

/// Upload bandwidth model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    /// At most one upload per user per slot.
    Hard,
    /// Unlimited simultaneous uploads.
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ContactModel {
    /// Targets drawn uniformly from all other users.
    Uniform,
    /// Each user contacts only a fixed random list of `m` others.
    FixedLists { m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialState {
    /// User 0 holds every piece.
    SingleSource,
    /// Each piece held by `ceil(eta * n)` uniformly chosen users.
    EtaSeeded { eta: f64 },
    /// User `i` holds exactly piece `i + 1`; requires `k == n`.
    OneUniquePerUser,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: usize,
    pub k: usize,
    pub protocol: ProtocolSpec,
    pub constraint: Constraint,
    pub contact_model: ContactModel,
    pub initial_state: InitialState,
    pub seed: u64,
    /// Slot cap; `None` uses [`SimulationConfig::default_max_slots`].
    pub max_slots: Option<u64>,
    /// Slack for failed-piece diagnostics.
    pub failure_epsilon: f64,
    /// Keep every transfer event in the result.
    pub record_trace: bool,
}

impl SimulationConfig {
    /// Uniform contacts, hard constraint, single source, seed 0.
    pub fn new(n: usize, k: usize, protocol: ProtocolSpec) -> Self {
        Self {
            n,
            k,
            protocol,
            constraint: Constraint::Hard,
            contact_model: ContactModel::Uniform,
            initial_state: InitialState::SingleSource,
            seed: 0,
            max_slots: None,
            failure_epsilon: 0.1,
            record_trace: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_constraint(mut self, constraint: Constraint) -> Self {
        self.constraint = constraint;
        self
    }

    pub fn with_contacts(mut self, contact_model: ContactModel) -> Self {
        self.contact_model = contact_model;
        self
    }

    pub fn with_initial_state(mut self, initial_state: InitialState) -> Self {
        self.initial_state = initial_state;
        self
    }

    pub fn with_trace(mut self, record_trace: bool) -> Self {
        self.record_trace = record_trace;
        self
    }

    pub fn with_max_slots(mut self, max_slots: u64) -> Self {
        self.max_slots = Some(max_slots);
        self
    }

    /// `20 * (k + ceil(log2 n)) * ceil(ln n)`.
    pub fn default_max_slots(n: usize, k: usize) -> u64 {
        let log2 = (n as f64).log2().ceil() as u64;
        let ln = (n as f64).ln().ceil().max(1.0) as u64;
        20 * (k as u64 + log2) * ln
    }

    pub fn effective_max_slots(&self) -> u64 {
        self.max_slots
            .unwrap_or_else(|| Self::default_max_slots(self.n, self.k))
    }

    /// Number of holders per piece under `eta_seeded`.
    pub fn eta_holders(eta: f64, n: usize) -> usize {
        // Guard against products like 0.3 * 10 = 3.0000000000000004.
        let exact = eta * n as f64;
        let rounded = exact.round();
        if (exact - rounded).abs() < 1e-9 {
            rounded as usize
        } else {
            exact.ceil() as usize
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 2 {
            return Err(ConfigError::new(
                "n",
                format!("need n >= 2, got {}", self.n),
            ));
        }
        if self.k < 1 {
            return Err(ConfigError::new("k", "need k >= 1"));
        }
        if self.k > u32::MAX as usize - 1 {
            return Err(ConfigError::new("k", "too many pieces"));
        }
        if let ContactModel::FixedLists { m } = self.contact_model {
            if m < 1 || m > self.n - 1 {
                return Err(ConfigError::new(
                    "m",
                    format!("contact list size must be in 1..={}, got {m}", self.n - 1),
                ));
            }
        }
        match self.initial_state {
            InitialState::SingleSource => {}
            InitialState::EtaSeeded { eta } => {
                if !(eta > 0.0 && eta < 1.0) {
                    return Err(ConfigError::new(
                        "eta",
                        format!("need 0 < eta < 1, got {eta}"),
                    ));
                }
            }
            InitialState::OneUniquePerUser => {
                if self.k != self.n {
                    return Err(ConfigError::new(
                        "k",
                        format!(
                            "one-unique-per-user needs k == n, got k={} n={}",
                            self.k, self.n
                        ),
                    ));
                }
            }
        }
        match self.protocol {
            ProtocolSpec::PriorityPush { spacing } if spacing < 1 => {
                return Err(ConfigError::new("spacing", "spacing must be >= 1"));
            }
            ProtocolSpec::PriorityPush { .. } | ProtocolSpec::Interleave
                if self.initial_state != InitialState::SingleSource =>
            {
                return Err(ConfigError::new(
                    "initial_state",
                    format!("{} needs a single source", self.protocol.id()),
                ));
            }
            ProtocolSpec::Advocate if self.initial_state != InitialState::OneUniquePerUser => {
                return Err(ConfigError::new(
                    "initial_state",
                    "advocate needs one-unique-per-user",
                ));
            }
            _ => {}
        }
        if self.failure_epsilon.is_nan() || self.failure_epsilon <= 0.0 {
            return Err(ConfigError::new("failure_epsilon", "must be positive"));
        }
        if self.max_slots == Some(0) {
            return Err(ConfigError::new("max_slots", "must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_single_user() {
        let err = SimulationConfig::new(1, 1, ProtocolSpec::RandomPush)
            .validate()
            .unwrap_err();
        assert_eq!(err.field, "n");
    }

    #[test]
    fn unique_start_requires_k_equals_n() {
        let cfg = SimulationConfig::new(4, 3, ProtocolSpec::Advocate)
            .with_initial_state(InitialState::OneUniquePerUser);
        assert_eq!(cfg.validate().unwrap_err().field, "k");
    }

    #[test]
    fn contact_list_bounds() {
        let base = SimulationConfig::new(5, 2, ProtocolSpec::RandomPull);
        assert!(base
            .clone()
            .with_contacts(ContactModel::FixedLists { m: 4 })
            .validate()
            .is_ok());
        for m in [0, 5] {
            let err = base
                .clone()
                .with_contacts(ContactModel::FixedLists { m })
                .validate()
                .unwrap_err();
            assert_eq!(err.field, "m");
        }
    }

    #[test]
    fn advocate_needs_unique_start() {
        let err = SimulationConfig::new(4, 4, ProtocolSpec::Advocate)
            .validate()
            .unwrap_err();
        assert_eq!(err.field, "initial_state");
    }

    #[test]
    fn eta_holder_count() {
        assert_eq!(SimulationConfig::eta_holders(0.5, 10), 5);
        assert_eq!(SimulationConfig::eta_holders(0.3, 10), 3);
        assert_eq!(SimulationConfig::eta_holders(0.31, 10), 4);
        assert_eq!(SimulationConfig::eta_holders(0.5, 1000), 500);
    }

    #[test]
    fn protocol_ids_round_trip() {
        for p in [
            ProtocolSpec::RandomPull,
            ProtocolSpec::SequentialPull,
            ProtocolSpec::RandomPush,
            ProtocolSpec::PriorityPush { spacing: 3 },
            ProtocolSpec::Interleave,
            ProtocolSpec::Advocate,
        ] {
            assert_eq!(ProtocolSpec::from_id(p.id(), 3), Some(p));
        }
        assert_eq!(ProtocolSpec::from_id("rarest-first", 1), None);
    }
}
