//! Routing and orchestration for a model x backend service matrix.
//!
//! Requests are scored against every healthy service with a convex
//! combination of estimated relevance, latency and cost; replicas are sized
//! per service with Little's Law and idle services fall back to a warm
//! floor (possibly zero).
//!
//! - [`scoring`]: weight profiles, normalization and the selection rule
//! - [`router`]: prompt complexity classification and relevance
//! - [`registry`]: the service matrix with rolling telemetry
//! - [`orchestrator`]: selection, dispatch and the scaling loop
//! - [`sim`]: deterministic discrete-event simulation of the whole system
//! - [`gateway`]: HTTP front end
//! - [`bench`]: metrics, strategy comparison and weight search

pub mod bench;
pub mod gateway;
pub mod orchestrator;
pub mod registry;
pub mod router;
pub mod scoring;
pub mod sim;
pub mod workload;
