use aimd_core::{DynamicsError, GameError, ReplicatorError, TopologyError};
use thiserror::Error;

/// Everything that can stop a run, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: unreadable file, schema violation, or a value the model rejects.
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
    /// The model itself reports an inconsistency for otherwise valid input.
    #[error("model inconsistency: {0}")]
    Model(String),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

impl CliError {
    pub fn invalid(field: impl Into<String>, message: impl ToString) -> Self {
        Self::Validation {
            field: field.into(),
            message: message.to_string(),
        }
    }

    pub fn model(message: impl ToString) -> Self {
        Self::Model(message.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Validation { .. } | Self::Output { .. } => 1,
            Self::Model(_) => 2,
        }
    }
}

pub fn topology_error(e: TopologyError) -> CliError {
    match e {
        TopologyError::RateLength { .. } | TopologyError::NegativeRate { .. } => {
            CliError::invalid("rates", e)
        }
        _ => CliError::invalid("topology", e),
    }
}

pub fn game_error(e: GameError) -> CliError {
    match e {
        GameError::Alpha { index, .. } => {
            CliError::invalid(format!("strategies[{index}].alpha"), e)
        }
        GameError::Beta { index, .. } => CliError::invalid(format!("strategies[{index}].beta"), e),
        GameError::Capacity(_) => CliError::invalid("capacity", e),
        GameError::Lambda(_) => CliError::invalid("lambda", e),
        GameError::TooFewStrategies { .. }
        | GameError::DuplicateStrategy(..)
        | GameError::EmptyProfile
        | GameError::EmptyOpponents(_)
        | GameError::NotOrdered => CliError::invalid("strategies", e),
        GameError::NeverDominant | GameError::Degenerate | GameError::LambdaIndependent => {
            CliError::model(e)
        }
    }
}

pub fn dynamics_error(e: DynamicsError) -> CliError {
    match e {
        DynamicsError::ProfileLength { .. }
        | DynamicsError::EmptyProfile
        | DynamicsError::Length { .. } => CliError::invalid("strategies", e),
        DynamicsError::Alpha { index, .. } => {
            CliError::invalid(format!("strategies[{index}].alpha"), e)
        }
        DynamicsError::Beta { index, .. } => {
            CliError::invalid(format!("strategies[{index}].beta"), e)
        }
        DynamicsError::NegativeRate { .. } | DynamicsError::OutsideAdmissible { .. } => {
            CliError::invalid("simulation.initial_rates", e)
        }
        DynamicsError::NotOnBoundary { .. }
        | DynamicsError::DecreaseNotInterior { .. }
        | DynamicsError::NeverOverloads
        | DynamicsError::TooFewDrops(_)
        | DynamicsError::NoConvergence(_) => CliError::model(e),
    }
}

pub fn replicator_error(e: ReplicatorError) -> CliError {
    match e {
        ReplicatorError::Game(g) => game_error(g),
        ReplicatorError::ShareCount { .. }
        | ReplicatorError::NegativeInitialShare { .. }
        | ReplicatorError::NotOnSimplex(_) => CliError::invalid("replicator.initial_shares", e),
        ReplicatorError::Gain(_) => CliError::invalid("replicator.gain", e),
        ReplicatorError::Delay(_) => CliError::invalid("replicator.delay", e),
        ReplicatorError::Horizon(_) => CliError::invalid("replicator.horizon", e),
        ReplicatorError::Step(_) | ReplicatorError::StepDoesNotDivideDelay { .. } => {
            CliError::invalid("replicator.step", e)
        }
        ReplicatorError::PayoffShape { .. }
        | ReplicatorError::Length { .. }
        | ReplicatorError::NegativeShare { .. }
        | ReplicatorError::Divergence(_) => CliError::model(e),
    }
}
