//! TOML matrix definition: models, backends and the deployable cells.
//!
//! ```toml
//! telemetry_window = 300.0
//!
//! [[models]]
//! id = "gemma-3"
//! tier = "small"
//! unit_cost = 0.004
//! latency_prior = 1.2
//!
//! [[backends]]
//! id = "vllm"
//! throughput_class = 3
//! latency_class = 2
//! memory_class = 2
//!
//! [[cells]]
//! model = "gemma-3"
//! backend = "vllm"
//! replicas = 1
//! ```

use super::{BackendSpec, Health, ModelSpec, RegistryError, ServiceInstance, DEFAULT_WINDOW_SECS};
use crate::router::ModelTier;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub id: String,
    pub tier: ModelTier,
    #[serde(default)]
    pub parameter_count: u64,
    #[serde(default)]
    pub warm_pool_floor: Option<u32>,
    pub unit_cost: f64,
    pub latency_prior: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendEntry {
    pub id: String,
    pub throughput_class: u8,
    pub latency_class: u8,
    pub memory_class: u8,
}

fn default_concurrency() -> u32 {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub model: String,
    pub backend: String,
    /// Overrides the model's unit cost.
    #[serde(default)]
    pub unit_cost: Option<f64>,
    /// Overrides the model's latency prior.
    #[serde(default)]
    pub latency_prior: Option<f64>,
    #[serde(default = "default_concurrency")]
    pub concurrency_per_replica: u32,
    /// Initial ready replicas.
    #[serde(default)]
    pub replicas: u32,
    #[serde(default)]
    pub cold_start: Option<f64>,
    #[serde(default)]
    pub health: Health,
    /// Base URL of an OpenAI-compatible upstream, used in proxy mode.
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Model name sent upstream; defaults to the model id.
    #[serde(default)]
    pub upstream_model: Option<String>,
}

fn default_window() -> f64 {
    DEFAULT_WINDOW_SECS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixConfig {
    #[serde(default = "default_window")]
    pub telemetry_window: f64,
    pub models: Vec<ModelEntry>,
    pub backends: Vec<BackendEntry>,
    pub cells: Vec<CellEntry>,
}

impl MatrixConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, RegistryError> {
        toml::from_str(text).map_err(|e| RegistryError::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| RegistryError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("matrix config serializes")
    }

    pub fn model(&self, id: &str) -> Option<&ModelEntry> {
        self.models.iter().find(|m| m.id == id)
    }

    pub fn cell(&self, service_id: &str) -> Option<&CellEntry> {
        self.cells
            .iter()
            .find(|c| super::service_id(&c.model, &c.backend) == service_id)
    }

    /// Resolves every cell to the specs used for registration.
    pub fn cells(&self) -> Result<Vec<(ModelSpec, BackendSpec, ServiceInstance)>, RegistryError> {
        if !(self.telemetry_window > 0.0) {
            return Err(RegistryError::Config("telemetry_window must be positive".into()));
        }
        self.cells
            .iter()
            .map(|cell| {
                let model = self
                    .model(&cell.model)
                    .ok_or_else(|| RegistryError::Config(format!("cell references unknown model `{}`", cell.model)))?;
                let backend = self.backends.iter().find(|b| b.id == cell.backend).ok_or_else(|| {
                    RegistryError::Config(format!("cell references unknown backend `{}`", cell.backend))
                })?;
                let mut instance = ServiceInstance::new(
                    &model.id,
                    &backend.id,
                    cell.unit_cost.unwrap_or(model.unit_cost),
                    cell.latency_prior.unwrap_or(model.latency_prior),
                )
                .with_replicas(cell.replicas)
                .with_concurrency(cell.concurrency_per_replica);
                instance.cold_start_estimate = cell.cold_start;
                instance.health = cell.health;
                Ok((
                    ModelSpec {
                        model_id: model.id.clone(),
                        tier: model.tier,
                        parameter_count: model.parameter_count,
                        warm_pool_floor: model.warm_pool_floor,
                    },
                    BackendSpec {
                        backend_id: backend.id.clone(),
                        throughput_class: backend.throughput_class,
                        latency_class: backend.latency_class,
                        memory_class: backend.memory_class,
                    },
                    instance,
                ))
            })
            .collect()
    }
}
