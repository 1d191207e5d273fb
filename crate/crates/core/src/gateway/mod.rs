//! HTTP front end: classify, select, dispatch, log, respond.
//!
//! Handlers share one [`Registry`]; each request scores against an
//! immutable snapshot, and side effects (telemetry, counters plus the
//! decision log, scale commands) go through their own serialized writers.
//! Counters and the decision log are updated under the same lock, so the
//! log and `/metrics` always reconcile.

mod config;
mod pool;

pub use config::{GatewayConfig, GatewayMode, ENV_PREFIX};
pub use pool::{ProxyPool, SimulatedPool};

use crate::bench::metrics::nearest_rank;
use crate::orchestrator::{
    dispatch, select_service, Autoscaler, BackendPool, DecisionLog, DispatchError, LogEntry, OrchestratorError,
    RequestStatus, RoutingDecision,
};
use crate::registry::{Health, MatrixConfig, Registry, Snapshot};
use crate::router::{
    ClassifierHandle, ComplexityClass, ComplexityRouter, KeywordRuleSet, ModelTier, Prompt, RouterError, RoutingMode,
};
use crate::scoring::{ScoreComponents, WeightProfile, Weights};
use axum::extract::{Path as AxPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Router(#[from] RouterError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteRequest {
    pub prompt: String,
    #[serde(default)]
    pub profile: Option<String>,
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default)]
    pub request_id: Option<String>,
}

impl RouteRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            profile: None,
            mode: None,
            request_id: None,
        }
    }
}

/// Routing fields are omitted when the gateway is configured not to expose
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteResponse {
    pub request_id: String,
    pub completion: String,
    pub ttft: f64,
    pub latency: f64,
    pub cold_start: bool,
    /// True when the backend did not stream, so `ttft` is the full latency.
    pub ttft_estimated: bool,
    pub cost: f64,
    pub output_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier: Option<ModelTier>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complexity_class: Option<ComplexityClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<ScoreComponents>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Weights>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_profiles: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error: error.into(),
                message: message.into(),
                request_id: None,
                service_id: None,
                known_profiles: None,
            },
        }
    }

    fn for_request(mut self, id: &str) -> Self {
        self.body.request_id = Some(id.to_string());
        self
    }

    fn on_service(mut self, id: &str) -> Self {
        self.body.service_id = Some(id.to_string());
        self
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {}", self.status.as_u16(), self.body.error, self.body.message)
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

#[derive(Debug, Default)]
struct Counters {
    successes: u64,
    failures: u64,
    cold_start_timeouts: u64,
    routing_unavailable: u64,
    rejected: u64,
    ttfts: Vec<f64>,
    latency_sum: f64,
    total_cost: f64,
    overhead_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    /// Handled requests: `successes + failures`.
    pub requests_total: u64,
    pub successes: u64,
    /// Every unsuccessful handled request, including the two kinds below.
    pub failures: u64,
    pub cold_start_timeouts: u64,
    pub routing_unavailable: u64,
    /// Invalid requests; not handled, logged or counted above.
    pub rejected: u64,
    pub success_rate: Option<f64>,
    pub avg_latency: Option<f64>,
    pub ttft_p50: Option<f64>,
    pub ttft_p95: Option<f64>,
    pub ttft_p99: Option<f64>,
    pub total_cost: f64,
    /// Wall-clock handling time outside the backend call.
    pub overhead_p99_ms: Option<f64>,
    pub uptime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileView {
    pub name: String,
    pub alpha: f64,
    pub lambda: f64,
    pub mu: f64,
    pub weights: Weights,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegistryView {
    pub cells: usize,
    pub snapshot: Snapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthUpdate {
    pub health: Health,
}

struct Inner {
    config: GatewayConfig,
    registry: Arc<Registry>,
    router: ComplexityRouter,
    pool: Arc<dyn BackendPool>,
    log: Option<DecisionLog>,
    counters: Mutex<Counters>,
    autoscaler: tokio::sync::Mutex<Autoscaler>,
    started: Instant,
    sequence: AtomicU64,
}

/// Cheap to clone; all clones share state.
#[derive(Clone)]
pub struct Gateway {
    inner: Arc<Inner>,
}

impl Gateway {
    /// Loads the matrix, keyword rules, classifier and pool named by
    /// `config`.
    pub fn from_config(config: GatewayConfig) -> Result<Self, GatewayError> {
        let matrix = config.load_matrix()?;
        Self::new(config, &matrix)
    }

    pub fn new(config: GatewayConfig, matrix: &MatrixConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let registry = Arc::new(Registry::from_config(matrix).map_err(|e| GatewayError::Config(e.to_string()))?);
        let rules = match &config.keywords {
            Some(p) => KeywordRuleSet::from_toml_file(config.resolve(p))?,
            None => KeywordRuleSet::default(),
        };
        let classifier = match &config.classifier {
            Some(p) => ClassifierHandle::load_artifact(config.resolve(p))?,
            None => ClassifierHandle::empty(),
        };
        let router = ComplexityRouter {
            rules,
            classifier,
            relevance: config.relevance.clone(),
            confidence_threshold: config.confidence_threshold,
            mode: config.routing_mode,
        };
        let pool: Arc<dyn BackendPool> = match config.mode {
            GatewayMode::Simulated => Arc::new(
                SimulatedPool::new(
                    config.sim_services.clone(),
                    registry.clone(),
                    config.limits,
                    config.seed,
                    config.time_scale,
                )
                .with_defaults(matrix),
            ),
            GatewayMode::Proxy => Arc::new(ProxyPool::new(matrix, config.limits).map_err(GatewayError::Config)?),
        };
        Ok(Self::with_parts(config, registry, router, pool)?)
    }

    /// Assembles a gateway around an existing registry and pool.
    pub fn with_parts(
        config: GatewayConfig,
        registry: Arc<Registry>,
        router: ComplexityRouter,
        pool: Arc<dyn BackendPool>,
    ) -> Result<Self, GatewayError> {
        let log = match &config.decision_log {
            Some(p) => Some(DecisionLog::create(config.resolve(p))?),
            None => None,
        };
        let autoscaler = tokio::sync::Mutex::new(Autoscaler::new(config.policy.clone()));
        Ok(Self {
            inner: Arc::new(Inner {
                config,
                registry,
                router,
                pool,
                log,
                counters: Mutex::new(Counters::default()),
                autoscaler,
                started: Instant::now(),
                sequence: AtomicU64::new(0),
            }),
        })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.inner.config
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.inner.registry
    }

    /// Seconds since the gateway started; the registry's clock.
    pub fn now(&self) -> f64 {
        self.inner.started.elapsed().as_secs_f64()
    }

    fn finish(&self, entry: LogEntry, overhead: Option<Duration>) {
        let mut c = self.inner.counters.lock();
        if let Some(log) = &self.inner.log {
            if let Err(e) = log.append(&entry) {
                tracing::error!(request = %entry.request_id, "decision log write failed: {e}");
            }
        }
        match entry.status {
            RequestStatus::Success => {
                c.successes += 1;
                if let Some(t) = entry.ttft {
                    c.ttfts.push(t);
                }
                c.latency_sum += entry.latency.unwrap_or(0.0);
            }
            RequestStatus::Failure => c.failures += 1,
            RequestStatus::ColdStartTimeout => {
                c.failures += 1;
                c.cold_start_timeouts += 1;
            }
            RequestStatus::RoutingUnavailable => {
                c.failures += 1;
                c.routing_unavailable += 1;
            }
        }
        c.total_cost += entry.cost;
        if let Some(d) = overhead {
            c.overhead_ms.push(d.as_secs_f64() * 1e3);
        }
    }

    fn reject(&self, err: ApiError) -> ApiError {
        self.inner.counters.lock().rejected += 1;
        err
    }

    /// classify -> select -> dispatch -> log. Invalid requests are rejected
    /// before anything is logged; every other request yields exactly one
    /// log entry and one counter increment.
    pub async fn handle_route(&self, req: RouteRequest) -> Result<RouteResponse, ApiError> {
        let wall = Instant::now();
        let config = &self.inner.config;
        if req.prompt.trim().is_empty() {
            return Err(self.reject(ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid_request",
                "prompt is empty",
            )));
        }
        let profile_name = req.profile.as_deref().unwrap_or(&config.default_profile);
        let Some(profile) = config.profile(profile_name) else {
            let known: Vec<String> = config.profiles.iter().map(|p| p.name.clone()).collect();
            let mut err = ApiError::new(
                StatusCode::BAD_REQUEST,
                "unknown_profile",
                format!("unknown profile `{profile_name}`; known: {}", known.join(", ")),
            );
            err.body.known_profiles = Some(known);
            return Err(self.reject(err));
        };
        let mode = match req.mode.as_deref() {
            None => self.inner.router.mode,
            Some(m) => m
                .parse::<RoutingMode>()
                .map_err(|e| self.reject(ApiError::new(StatusCode::BAD_REQUEST, "invalid_mode", e)))?,
        };
        let request_id = req
            .request_id
            .clone()
            .unwrap_or_else(|| format!("g{}", self.inner.sequence.fetch_add(1, Ordering::Relaxed)));
        let now = self.now();
        let prompt = Prompt::new(&request_id, req.prompt).at(now);
        let output = self.inner.router.classify_with(&prompt, mode);
        let snapshot = self.inner.registry.snapshot(now);
        let decision = match select_service(
            &prompt,
            &snapshot,
            profile,
            &output,
            &self.inner.router.relevance,
            &config.selection,
        ) {
            Ok(d) => d,
            Err(e) => {
                let status = match e {
                    OrchestratorError::RoutingUnavailable => StatusCode::SERVICE_UNAVAILABLE,
                    OrchestratorError::Scoring(_) => StatusCode::INTERNAL_SERVER_ERROR,
                };
                self.finish(
                    LogEntry {
                        request_id: request_id.clone(),
                        decision: None,
                        status: RequestStatus::RoutingUnavailable,
                        ttft: None,
                        latency: None,
                        cost: 0.0,
                    },
                    Some(wall.elapsed()),
                );
                return Err(ApiError::new(status, "routing_unavailable", e.to_string()).for_request(&request_id));
            }
        };
        let backend_start = Instant::now();
        let result = dispatch(
            &decision,
            &prompt,
            self.inner.pool.as_ref(),
            &self.inner.registry,
            now,
            config.cold_start_timeout,
        )
        .await;
        let overhead = wall.elapsed().saturating_sub(backend_start.elapsed());
        let cost = decision.raw_cost;
        let entry = |status, ttft, latency| LogEntry {
            request_id: request_id.clone(),
            decision: Some(decision.clone()),
            status,
            ttft,
            latency,
            cost,
        };
        match result {
            Ok(o) => {
                self.finish(
                    entry(RequestStatus::Success, Some(o.ttft), Some(o.latency)),
                    Some(overhead),
                );
                Ok(self.response(&request_id, &decision, &snapshot, o))
            }
            Err(e) => {
                let sid = decision.service_id.as_str();
                let (status, code, http) = match &e {
                    DispatchError::ColdStartTimeout { .. } => (
                        RequestStatus::ColdStartTimeout,
                        "cold_start_timeout",
                        StatusCode::GATEWAY_TIMEOUT,
                    ),
                    DispatchError::Timeout { .. } => (RequestStatus::Failure, "timeout", StatusCode::GATEWAY_TIMEOUT),
                    DispatchError::Backend { .. } | DispatchError::UnknownService(_) => {
                        (RequestStatus::Failure, "backend_error", StatusCode::BAD_GATEWAY)
                    }
                };
                let latency = match &e {
                    DispatchError::ColdStartTimeout { waited, .. } => Some(*waited),
                    DispatchError::Timeout { latency, .. } | DispatchError::Backend { latency, .. } => Some(*latency),
                    DispatchError::UnknownService(_) => None,
                };
                self.finish(entry(status, None, latency), Some(overhead));
                Err(ApiError::new(http, code, e.to_string())
                    .for_request(&request_id)
                    .on_service(sid))
            }
        }
    }

    fn response(
        &self,
        request_id: &str,
        d: &RoutingDecision,
        snapshot: &Snapshot,
        o: crate::orchestrator::InferenceOutcome,
    ) -> RouteResponse {
        let expose = self.inner.config.expose_routing_metadata;
        let class = ComplexityClass::from_index(crate::router::argmax(&d.classifier_output.probabilities));
        RouteResponse {
            request_id: request_id.to_string(),
            completion: o.completion,
            ttft: o.ttft,
            latency: o.latency,
            cold_start: d.cold_start,
            ttft_estimated: o.ttft_estimated,
            cost: d.raw_cost,
            output_tokens: o.output_tokens,
            service_id: expose.then(|| d.service_id.clone()),
            tier: if expose {
                snapshot.get(&d.service_id).map(|v| v.tier)
            } else {
                None
            },
            complexity_class: if expose { class } else { None },
            probabilities: expose.then_some(d.classifier_output.probabilities),
            profile: expose.then(|| d.profile.clone()),
            score: expose.then_some(d.score),
            components: expose.then_some(d.components),
            weights: expose.then_some(d.weights),
        }
    }

    pub fn metrics(&self) -> MetricsSnapshot {
        let c = self.inner.counters.lock();
        let total = c.successes + c.failures;
        let mut ttfts = c.ttfts.clone();
        ttfts.sort_by(f64::total_cmp);
        let mut overhead = c.overhead_ms.clone();
        overhead.sort_by(f64::total_cmp);
        MetricsSnapshot {
            requests_total: total,
            successes: c.successes,
            failures: c.failures,
            cold_start_timeouts: c.cold_start_timeouts,
            routing_unavailable: c.routing_unavailable,
            rejected: c.rejected,
            success_rate: (total > 0).then(|| c.successes as f64 / total as f64),
            avg_latency: (c.successes > 0).then(|| c.latency_sum / c.successes as f64),
            ttft_p50: nearest_rank(&ttfts, 50.0),
            ttft_p95: nearest_rank(&ttfts, 95.0),
            ttft_p99: nearest_rank(&ttfts, 99.0),
            total_cost: c.total_cost,
            overhead_p99_ms: nearest_rank(&overhead, 99.0),
            uptime: self.now(),
        }
    }

    pub fn profiles(&self) -> Vec<ProfileView> {
        self.inner
            .config
            .profiles
            .iter()
            .filter_map(|p: &WeightProfile| {
                Some(ProfileView {
                    name: p.name.clone(),
                    alpha: p.alpha,
                    lambda: p.lambda,
                    mu: p.mu,
                    weights: p.weights().ok()?,
                })
            })
            .collect()
    }

    pub fn registry_view(&self) -> RegistryView {
        let snapshot = self.inner.registry.snapshot(self.now());
        RegistryView {
            cells: snapshot.services.len(),
            snapshot,
        }
    }

    pub fn set_health(&self, service_id: &str, health: Health) -> Result<(), ApiError> {
        self.inner.registry.set_health(service_id, health).map_err(|_| {
            ApiError::new(
                StatusCode::NOT_FOUND,
                "unknown_service",
                format!("no service `{service_id}`"),
            )
            .on_service(service_id)
        })
    }

    /// One evaluation of the scaling loop; commands are applied to the pool
    /// in order.
    pub async fn scaling_tick(&self) -> Vec<crate::orchestrator::ScaleCommand> {
        let now = self.now();
        self.inner.registry.prune(now);
        let snapshot = self.inner.registry.snapshot(now);
        let commands = self.inner.autoscaler.lock().await.tick(&snapshot, now);
        for cmd in &commands {
            if let Err(e) = self.inner.pool.apply_scale(cmd).await {
                tracing::warn!(service = %cmd.model_id, "scale command failed: {e}");
            }
        }
        commands
    }

    /// Runs [`Gateway::scaling_tick`] every evaluation period until the
    /// task is aborted.
    pub fn spawn_scaling_loop(&self) -> tokio::task::JoinHandle<()> {
        let gw = self.clone();
        let period = Duration::from_secs_f64(self.inner.config.policy.evaluation_period);
        tokio::spawn(async move {
            let mut interval = tokio::time::interval(period);
            loop {
                interval.tick().await;
                for cmd in gw.scaling_tick().await {
                    tracing::info!(service = %cmd.model_id, to = cmd.new_replica_count, reason = ?cmd.reason, "scaled");
                }
            }
        })
    }

    pub fn http_router(&self) -> Router {
        Router::new()
            .route("/v1/route", post(route_handler))
            .route(
                "/registry",
                get(|State(g): State<Gateway>| async move { Json(g.registry_view()) }),
            )
            .route(
                "/metrics",
                get(|State(g): State<Gateway>| async move { Json(g.metrics()) }),
            )
            .route(
                "/profiles",
                get(|State(g): State<Gateway>| async move { Json(g.profiles()) }),
            )
            .route("/health/:id", post(health_handler))
            .with_state(self.clone())
    }

    /// Serves on `listener` until the future is dropped; starts the scaling
    /// loop when enabled.
    pub async fn serve(self, listener: tokio::net::TcpListener) -> std::io::Result<()> {
        let scaler = self.inner.config.scaling.then(|| self.spawn_scaling_loop());
        let result = axum::serve(listener, self.http_router()).await;
        if let Some(h) = scaler {
            h.abort();
        }
        result
    }

    /// Binds an ephemeral port and serves in the background.
    pub async fn spawn(
        self,
        addr: &str,
    ) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<std::io::Result<()>>)> {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        let local = listener.local_addr()?;
        Ok((local, tokio::spawn(self.serve(listener))))
    }
}

async fn route_handler(
    State(g): State<Gateway>,
    Json(req): Json<RouteRequest>,
) -> Result<Json<RouteResponse>, ApiError> {
    g.handle_route(req).await.map(Json)
}

async fn health_handler(
    State(g): State<Gateway>,
    AxPath(id): AxPath<String>,
    Json(update): Json<HealthUpdate>,
) -> Result<Json<HealthUpdate>, ApiError> {
    g.set_health(&id, update.health)?;
    Ok(Json(update))
}
