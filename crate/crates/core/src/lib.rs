//! Fluid model of `N` AIMD connections sharing a network.
//!
//! * [`net_model`]: topology matrices, the load matrix and the lossless-rate test.
//! * [`dynamics`]: exact event-driven simulation of the impulsive AIMD dynamics and
//!   the closed-form limit cycle every trajectory converges to.
//! * [`game`]: the protocol-selection game induced by the limit cycle, with dominance,
//!   mixed equilibria and regime boundaries in the loss sensitivity `lambda`.
//! * [`replicator`]: delayed replicator dynamics over population shares of protocols.

pub mod dynamics;
pub mod game;
pub mod net_model;
pub mod replicator;

pub use dynamics::{
    average_throughput, drop_map, fixed_point, next_drop, simulate, verify_convergence,
    ConvergenceReport, DropEvent, DynamicsError, FixedPoint, Hit, Stop, StrategyProfile,
    Trajectory,
};
pub use game::{
    best_response, classify_equilibrium, dominance_threshold, lambda_bounds, mixed_probability,
    profile_payoffs, EquilibriumKind, EquilibriumResult, GameConfig, GameError, LambdaBounds,
    PayoffMatrix, PayoffTensor, Strategy,
};
pub use net_model::{LoadMatrix, NetworkTopology, StabilityReport, TopologyError};
pub use replicator::{
    fitness, integrate, rest_point_check, InteractionMode, Outcome, Payoffs, ReplicatorConfig,
    ReplicatorError, RestPointReport, ShareTrajectory,
};
