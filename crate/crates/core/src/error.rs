use thiserror::Error;

use crate::engine::UserId;
use crate::pieces::Piece;

/// A configuration that violates a model precondition.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid `{field}`: {message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

/// Internal consistency failures. Any of these indicates an engine bug.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("user {user} pushes piece {piece} it does not hold")]
    PushWithoutPiece { user: UserId, piece: Piece },
    #[error("user {user} pulls piece {piece} it already holds")]
    PullOfHeldPiece { user: UserId, piece: Piece },
    #[error("user {user} targets itself")]
    SelfTarget { user: UserId },
    #[error("advocate target {target} has no initial piece")]
    MissingInitialPiece { target: UserId },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("internal consistency error: {0}")]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("failed-piece diagnostics need source release slots; protocol `{0}` has none")]
    UnsupportedProtocol(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{name} = {value} is outside {range}")]
    Domain {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
}

impl OracleError {
    pub(crate) fn domain(name: &'static str, value: f64, range: &'static str) -> Self {
        OracleError::Domain { name, value, range }
    }
}
