//! The model x backend service matrix with health, load, cost and rolling
//! telemetry.
//!
//! [`Registry`] is shared behind a lock and mutated through `&self`.
//! Readers take [`Snapshot`]s: owned, versioned values that never change
//! after they are taken.

mod matrix;
mod telemetry;

pub use matrix::{CellEntry, MatrixConfig, ModelEntry};
pub use telemetry::{Sample, TelemetryWindow, DEFAULT_WINDOW_SECS};

use crate::router::ModelTier;
use crate::scoring::NormalizationStats;
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegistryError {
    #[error("service `{0}` is already registered")]
    Conflict(String),
    #[error("service `{0}` not found")]
    NotFound(String),
    #[error("invalid spec: {0}")]
    Invalid(String),
    #[error("matrix file: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model_id: String,
    pub tier: ModelTier,
    #[serde(default)]
    pub parameter_count: u64,
    /// Overrides the policy's per-tier warm pool size when set.
    #[serde(default)]
    pub warm_pool_floor: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendSpec {
    pub backend_id: String,
    pub throughput_class: u8,
    pub latency_class: u8,
    pub memory_class: u8,
}

impl BackendSpec {
    pub fn validate(&self) -> Result<(), RegistryError> {
        for (name, v) in [
            ("throughput_class", self.throughput_class),
            ("latency_class", self.latency_class),
            ("memory_class", self.memory_class),
        ] {
            if !(1..=3).contains(&v) {
                return Err(RegistryError::Invalid(format!(
                    "{}: {name} must be in 1..=3",
                    self.backend_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Health {
    #[default]
    Healthy,
    Degraded,
    Down,
}

impl FromStr for Health {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "healthy" => Ok(Self::Healthy),
            "degraded" => Ok(Self::Degraded),
            "down" => Ok(Self::Down),
            other => Err(format!("unknown health state `{other}`")),
        }
    }
}

impl fmt::Display for Health {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Health::Healthy => "healthy",
            Health::Degraded => "degraded",
            Health::Down => "down",
        })
    }
}

pub fn service_id(model_id: &str, backend_id: &str) -> String {
    format!("{model_id}:{backend_id}")
}

/// One deployable model x backend cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceInstance {
    pub service_id: String,
    pub model_id: String,
    pub backend_id: String,
    pub health: Health,
    /// Ready replicas.
    pub replicas: u32,
    /// Replicas provisioned but not yet ready.
    #[serde(default)]
    pub starting_replicas: u32,
    pub inflight: u32,
    pub concurrency_per_replica: u32,
    pub unit_cost: f64,
    /// Latency estimate used before telemetry exists, seconds.
    pub latency_prior: f64,
    /// Expected cold-start duration, seconds.
    #[serde(default)]
    pub cold_start_estimate: Option<f64>,
    #[serde(default)]
    pub latency_stats: NormalizationStats,
    #[serde(default)]
    pub cost_stats: NormalizationStats,
}

impl ServiceInstance {
    pub fn new(model_id: &str, backend_id: &str, unit_cost: f64, latency_prior: f64) -> Self {
        Self {
            service_id: service_id(model_id, backend_id),
            model_id: model_id.to_string(),
            backend_id: backend_id.to_string(),
            health: Health::Healthy,
            replicas: 0,
            starting_replicas: 0,
            inflight: 0,
            concurrency_per_replica: 4,
            unit_cost,
            latency_prior,
            cold_start_estimate: None,
            latency_stats: NormalizationStats::default(),
            cost_stats: NormalizationStats::default(),
        }
    }

    pub fn with_replicas(mut self, replicas: u32) -> Self {
        self.replicas = replicas;
        self
    }

    pub fn with_concurrency(mut self, concurrency: u32) -> Self {
        self.concurrency_per_replica = concurrency;
        self
    }

    pub fn capacity(&self) -> u32 {
        self.replicas * self.concurrency_per_replica
    }

    /// `inflight / (replicas * concurrency)`; zero-capacity services report
    /// 1.0 when anything is in flight.
    pub fn utilization(&self) -> f64 {
        match self.capacity() {
            0 if self.inflight > 0 => 1.0,
            0 => 0.0,
            cap => self.inflight as f64 / cap as f64,
        }
    }
}

/// A service as seen in a snapshot: static data plus telemetry summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceView {
    #[serde(flatten)]
    pub instance: ServiceInstance,
    pub tier: ModelTier,
    pub avg_latency: f64,
    pub avg_ttft: Option<f64>,
    pub has_latency_samples: bool,
    pub request_rate: f64,
    pub last_request_time: Option<f64>,
    pub window_successes: u64,
    pub window_failures: u64,
    pub utilization: f64,
}

impl ServiceView {
    pub fn id(&self) -> &str {
        &self.instance.service_id
    }

    pub fn is_cold(&self) -> bool {
        self.instance.replicas == 0
    }
}

/// Immutable view of the registry at one version.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u64,
    pub taken_at: f64,
    pub window_duration: f64,
    pub models: Vec<ModelSpec>,
    pub backends: Vec<BackendSpec>,
    pub services: Vec<ServiceView>,
}

impl Snapshot {
    pub fn get(&self, service_id: &str) -> Option<&ServiceView> {
        self.services.iter().find(|s| s.id() == service_id)
    }

    pub fn model(&self, model_id: &str) -> Option<&ModelSpec> {
        self.models.iter().find(|m| m.model_id == model_id)
    }

    pub fn row<'a>(&'a self, model_id: &'a str) -> impl Iterator<Item = &'a ServiceView> + 'a {
        self.services.iter().filter(move |s| s.instance.model_id == model_id)
    }

    /// Latency range across the whole matrix: every service's window stats
    /// plus its prior, so ranges exist before traffic arrives.
    pub fn latency_norm_stats(&self) -> NormalizationStats {
        self.services
            .iter()
            .fold(NormalizationStats::empty(self.window_duration), |acc, s| {
                let prior = NormalizationStats::from_values([s.instance.latency_prior], self.window_duration);
                acc.merge(&s.instance.latency_stats).merge(&prior)
            })
    }

    /// Cost range across the matrix, seeded with configured unit costs.
    pub fn cost_norm_stats(&self) -> NormalizationStats {
        self.services
            .iter()
            .fold(NormalizationStats::empty(self.window_duration), |acc, s| {
                let unit = NormalizationStats::from_values([s.instance.unit_cost], self.window_duration);
                acc.merge(&s.instance.cost_stats).merge(&unit)
            })
    }
}

/// Which services may receive traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePolicy {
    pub allow_cold_start: bool,
    pub include_degraded: bool,
}

impl Default for CandidatePolicy {
    fn default() -> Self {
        Self {
            allow_cold_start: true,
            include_degraded: false,
        }
    }
}

/// Healthy services that either have ready replicas or may be cold-started.
/// Replicas still starting count as a pending cold start.
pub fn healthy_candidates<'a>(snapshot: &'a Snapshot, policy: &CandidatePolicy) -> Vec<&'a ServiceView> {
    snapshot
        .services
        .iter()
        .filter(|s| match s.instance.health {
            Health::Healthy => true,
            Health::Degraded => policy.include_degraded,
            Health::Down => false,
        })
        .filter(|s| s.instance.replicas > 0 || policy.allow_cold_start)
        .collect()
}

struct Entry {
    instance: ServiceInstance,
    tier: ModelTier,
    telemetry: TelemetryWindow,
    last_request: Option<f64>,
}

struct Inner {
    version: u64,
    window: f64,
    models: Vec<ModelSpec>,
    backends: Vec<BackendSpec>,
    services: BTreeMap<String, Entry>,
    order: Vec<String>,
}

pub struct Registry {
    inner: RwLock<Inner>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW_SECS)
    }
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = self.inner.read();
        f.debug_struct("Registry")
            .field("version", &inner.version)
            .field("services", &inner.order)
            .finish()
    }
}

impl Registry {
    pub fn new(window_duration: f64) -> Self {
        Self {
            inner: RwLock::new(Inner {
                version: 0,
                window: window_duration,
                models: Vec::new(),
                backends: Vec::new(),
                services: BTreeMap::new(),
                order: Vec::new(),
            }),
        }
    }

    pub fn from_config(config: &MatrixConfig) -> Result<Self, RegistryError> {
        let registry = Self::new(config.telemetry_window);
        for (model, backend, instance) in config.cells()? {
            registry.register(model, backend, instance)?;
        }
        Ok(registry)
    }

    pub fn window_duration(&self) -> f64 {
        self.inner.read().window
    }

    pub fn version(&self) -> u64 {
        self.inner.read().version
    }

    pub fn len(&self) -> usize {
        self.inner.read().order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn service_ids(&self) -> Vec<String> {
        self.inner.read().order.clone()
    }

    #[must_use = "the registered service id"]
    pub fn register(
        &self,
        model: ModelSpec,
        backend: BackendSpec,
        mut instance: ServiceInstance,
    ) -> Result<String, RegistryError> {
        backend.validate()?;
        if instance.concurrency_per_replica == 0 {
            return Err(RegistryError::Invalid(
                "concurrency_per_replica must be positive".into(),
            ));
        }
        let id = service_id(&model.model_id, &backend.backend_id);
        let mut inner = self.inner.write();
        if inner.services.contains_key(&id) {
            return Err(RegistryError::Conflict(id));
        }
        match inner.models.iter().find(|m| m.model_id == model.model_id) {
            Some(existing) if *existing != model => {
                return Err(RegistryError::Conflict(format!(
                    "model `{}` registered with a different spec",
                    model.model_id
                )))
            }
            Some(_) => {}
            None => inner.models.push(model.clone()),
        }
        match inner.backends.iter().find(|b| b.backend_id == backend.backend_id) {
            Some(existing) if *existing != backend => {
                return Err(RegistryError::Conflict(format!(
                    "backend `{}` registered with a different spec",
                    backend.backend_id
                )))
            }
            Some(_) => {}
            None => inner.backends.push(backend.clone()),
        }
        instance.service_id = id.clone();
        instance.model_id = model.model_id.clone();
        instance.backend_id = backend.backend_id.clone();
        let window = inner.window;
        inner.services.insert(
            id.clone(),
            Entry {
                instance,
                tier: model.tier,
                telemetry: TelemetryWindow::new(window),
                last_request: None,
            },
        );
        inner.order.push(id.clone());
        inner.version += 1;
        Ok(id)
    }

    fn with_entry<T>(&self, service_id: &str, f: impl FnOnce(&mut Entry) -> T) -> Result<T, RegistryError> {
        let mut inner = self.inner.write();
        let entry = inner
            .services
            .get_mut(service_id)
            .ok_or_else(|| RegistryError::NotFound(service_id.to_string()))?;
        let out = f(entry);
        inner.version += 1;
        Ok(out)
    }

    fn read_entry<T>(&self, service_id: &str, f: impl FnOnce(&Entry) -> T) -> Result<T, RegistryError> {
        let inner = self.inner.read();
        inner
            .services
            .get(service_id)
            .map(f)
            .ok_or_else(|| RegistryError::NotFound(service_id.to_string()))
    }

    /// Records an arrival routed to `service_id`.
    pub fn record_request(&self, service_id: &str, timestamp: f64) -> Result<(), RegistryError> {
        self.with_entry(service_id, |e| {
            e.telemetry.record_request(timestamp);
            e.last_request = Some(e.last_request.map_or(timestamp, |t| t.max(timestamp)));
        })
    }

    /// Records a finished request; its cost is the service's unit cost.
    pub fn record_sample(
        &self,
        service_id: &str,
        latency: f64,
        ttft: f64,
        success: bool,
        timestamp: f64,
    ) -> Result<(), RegistryError> {
        self.with_entry(service_id, |e| {
            e.telemetry.record(Sample {
                timestamp,
                latency,
                ttft,
                success,
                cost: e.instance.unit_cost,
            });
            e.instance.latency_stats = e.telemetry.latency_stats();
            e.instance.cost_stats = e.telemetry.cost_stats();
        })
    }

    pub fn prune(&self, now: f64) {
        let mut inner = self.inner.write();
        for e in inner.services.values_mut() {
            e.telemetry.prune(now);
            e.instance.latency_stats = e.telemetry.latency_stats();
            e.instance.cost_stats = e.telemetry.cost_stats();
        }
        inner.version += 1;
    }

    pub fn set_health(&self, service_id: &str, health: Health) -> Result<(), RegistryError> {
        self.with_entry(service_id, |e| e.instance.health = health)
    }

    pub fn set_replicas(&self, service_id: &str, ready: u32, starting: u32) -> Result<(), RegistryError> {
        self.with_entry(service_id, |e| {
            e.instance.replicas = ready;
            e.instance.starting_replicas = starting;
        })
    }

    pub fn set_inflight(&self, service_id: &str, inflight: u32) -> Result<(), RegistryError> {
        self.with_entry(service_id, |e| e.instance.inflight = inflight)
    }

    pub fn adjust_inflight(&self, service_id: &str, delta: i64) -> Result<u32, RegistryError> {
        self.with_entry(service_id, |e| {
            e.instance.inflight = (i64::from(e.instance.inflight) + delta).max(0) as u32;
            e.instance.inflight
        })
    }

    pub fn instance(&self, service_id: &str) -> Result<ServiceInstance, RegistryError> {
        self.read_entry(service_id, |e| e.instance.clone())
    }

    /// Requests per second routed to one service over `(now - window, now]`.
    pub fn get_avg_request_rate(&self, service_id: &str, window: f64, now: f64) -> Result<f64, RegistryError> {
        self.read_entry(service_id, |e| e.telemetry.request_rate(window, now))
    }

    /// Sum of the request rates across a model's row.
    pub fn model_request_rate(&self, model_id: &str, window: f64, now: f64) -> f64 {
        let inner = self.inner.read();
        inner
            .services
            .values()
            .filter(|e| e.instance.model_id == model_id)
            .map(|e| e.telemetry.request_rate(window, now))
            .sum()
    }

    /// Mean successful latency in the window, or the configured prior.
    pub fn get_avg_latency(&self, service_id: &str) -> Result<f64, RegistryError> {
        self.read_entry(service_id, |e| {
            e.telemetry.mean_success_latency().unwrap_or(e.instance.latency_prior)
        })
    }

    pub fn telemetry_samples(&self, service_id: &str) -> Result<Vec<Sample>, RegistryError> {
        self.read_entry(service_id, |e| e.telemetry.samples().copied().collect())
    }

    /// Snapshot with request rates evaluated at `now`.
    pub fn snapshot(&self, now: f64) -> Snapshot {
        let inner = self.inner.read();
        let services = inner
            .order
            .iter()
            .map(|id| {
                let e = &inner.services[id];
                let mean = e.telemetry.mean_success_latency();
                ServiceView {
                    instance: e.instance.clone(),
                    tier: e.tier,
                    avg_latency: mean.unwrap_or(e.instance.latency_prior),
                    avg_ttft: e.telemetry.mean_success_ttft(),
                    has_latency_samples: mean.is_some(),
                    request_rate: e.telemetry.request_rate(inner.window, now),
                    last_request_time: e.last_request,
                    window_successes: e.telemetry.success_count(),
                    window_failures: e.telemetry.failure_count(),
                    utilization: e.instance.utilization(),
                }
            })
            .collect();
        Snapshot {
            version: inner.version,
            taken_at: now,
            window_duration: inner.window,
            models: inner.models.clone(),
            backends: inner.backends.clone(),
            services,
        }
    }
}
