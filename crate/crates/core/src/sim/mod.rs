//! Deterministic discrete-event simulation of the backend pool.
//!
//! One run is a single-threaded event loop over a fresh [`Registry`]: each
//! arrival is classified and routed with the configured strategy, queued
//! FIFO on its service, and served by replicas with fixed concurrency. The
//! scaling loop ticks every evaluation period and its commands are applied
//! as events. Per-request random draws (failure, output length) depend only
//! on the seed and request index, so strategies compared on one trace see
//! the same luck.
//!
//! [`Registry`]: crate::registry::Registry

mod config;
mod engine;

pub use config::{ClassifierSpec, RouterSettings, Scenario, SimServiceConfig, SuccessLimits, TokenDistribution};
pub(crate) use engine::request_draws;
pub use engine::{EventKind, ScaleRecord, ServiceReport, SimClock, SimReport, Simulation, TraceEntry};

use crate::orchestrator::SelectionStrategy;
use crate::router::RoutingMode;
use crate::scoring::WeightProfile;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("scenario: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    /// Replicas fixed for the whole run; cold services are never used.
    Static,
    #[default]
    Dynamic,
}

/// One selection strategy, routing mode and scaling mode.
///
/// Parsed from `selection[:profile][+static|+dynamic]`, where selection is
/// `random`, `latency-only`, `multi-objective` (hybrid routing), or one of
/// `keyword`, `semantic`, `hybrid` (multi-objective with that routing mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub selection: SelectionStrategy,
    pub profile: WeightProfile,
    pub routing: RoutingMode,
    pub scaling: ScalingMode,
}

impl StrategySpec {
    pub fn new(selection: SelectionStrategy) -> Self {
        Self {
            selection,
            profile: WeightProfile::balanced(),
            routing: RoutingMode::Hybrid,
            scaling: ScalingMode::Dynamic,
        }
    }

    pub fn random() -> Self {
        Self::new(SelectionStrategy::Random)
    }

    pub fn latency_only() -> Self {
        Self::new(SelectionStrategy::LatencyOnly)
    }

    pub fn multi_objective(profile: WeightProfile) -> Self {
        Self {
            profile,
            ..Self::new(SelectionStrategy::MultiObjective)
        }
    }

    pub fn with_routing(mut self, routing: RoutingMode) -> Self {
        self.routing = routing;
        self
    }

    pub fn with_scaling(mut self, scaling: ScalingMode) -> Self {
        self.scaling = scaling;
        self
    }

    /// Parses a strategy, resolving profile names against `profiles`.
    pub fn parse_with(s: &str, profiles: &[WeightProfile]) -> Result<Self, String> {
        let (body, scaling) = match s.split_once('+') {
            Some((b, "static")) => (b, ScalingMode::Static),
            Some((b, "dynamic")) => (b, ScalingMode::Dynamic),
            Some((_, other)) => return Err(format!("unknown scaling mode `{other}` (expected static|dynamic)")),
            None => (s, ScalingMode::Dynamic),
        };
        let (name, profile_name) = match body.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (body, None),
        };
        let profile = match profile_name {
            None => WeightProfile::balanced(),
            Some(p) => profiles.iter().find(|x| x.name == p).cloned().ok_or_else(|| {
                let known: Vec<&str> = profiles.iter().map(|x| x.name.as_str()).collect();
                format!("unknown profile `{p}` (known: {})", known.join(", "))
            })?,
        };
        let (selection, routing) = match name {
            "keyword" | "semantic" | "hybrid" => (SelectionStrategy::MultiObjective, name.parse()?),
            other => (other.parse()?, RoutingMode::Hybrid),
        };
        if selection != SelectionStrategy::MultiObjective && profile_name.is_some() {
            return Err(format!("`{name}` does not take a profile"));
        }
        Ok(Self {
            selection,
            profile,
            routing,
            scaling,
        })
    }
}

impl FromStr for StrategySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_with(s, &WeightProfile::defaults())
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.selection, self.routing) {
            (SelectionStrategy::MultiObjective, RoutingMode::Hybrid) => {
                write!(f, "multi-objective:{}", self.profile.name)?
            }
            (SelectionStrategy::MultiObjective, RoutingMode::Keyword) => write!(f, "keyword:{}", self.profile.name)?,
            (SelectionStrategy::MultiObjective, RoutingMode::Semantic) => write!(f, "semantic:{}", self.profile.name)?,
            (other, _) => write!(f, "{other}")?,
        }
        if self.scaling == ScalingMode::Static {
            f.write_str("+static")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
