//! Matrix selection, dispatch, and the replica scaling loop.

mod dispatch;
mod log;
mod scaling;
mod selection;

pub use dispatch::{dispatch, BackendPool, DispatchError, InferenceOutcome};
pub use log::{read_log, DecisionLog, LogEntry, RequestStatus};
pub use scaling::{
    active_set, plan_target, scaling_tick, Autoscaler, ReplicaState, ScaleCommand, ScaleReason, ScalingPolicy,
};
pub use selection::{
    latency_estimate, select_service, select_with, RoutingDecision, SelectionOptions, SelectionStrategy,
    DEFAULT_COLD_START_SURCHARGE,
};

use crate::scoring::ScoringError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OrchestratorError {
    #[error("no healthy service can take the request")]
    RoutingUnavailable,
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}
