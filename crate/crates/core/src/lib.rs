//! Multi-piece gossip dissemination: a slot-synchronous simulator for
//! piece-selection protocols over random contacts, the observables used to
//! judge them, and the analytic bounds they are checked against.

pub mod audit;
pub mod config;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod pieces;
pub mod protocols;

pub use config::{Constraint, ContactModel, InitialState, ProtocolSpec, SimulationConfig};
pub use engine::{
    init_state, run, ArrivalTable, RunResult, Slot, SystemState, Termination, TransferEvent,
    TransferKind, UserId, UserState,
};
pub use error::{ConfigError, EngineError, MetricsError, OracleError, SimError};
pub use pieces::{Piece, PieceSet};
pub use protocols::Action;
