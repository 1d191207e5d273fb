use crate::bench::metrics::{compute_metrics, FailureKind, MetricsReport, OutcomeStatus, RequestOutcome};
use crate::orchestrator::{select_with, Autoscaler, OrchestratorError, ScaleReason, SelectionOptions};
use crate::registry::{CandidatePolicy, Registry};
use crate::router::{ComplexityRouter, ModelTier};
use crate::workload::Arrival;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use super::{ScalingMode, Scenario, SimError, SimServiceConfig, StrategySpec, SuccessLimits};

/// Same-time events are processed in this order, then by sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ReplicaReady,
    FirstToken,
    Completion,
    Failure,
    ScaleApplied,
    Tick,
    Arrival,
}

#[derive(Debug, Clone, Copy)]
enum Payload {
    Request(usize),
    Replica {
        service: usize,
        replica: u64,
    },
    Scale {
        service: usize,
        count: u32,
        reason: ScaleReason,
    },
    None,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: EventKind,
    seq: u64,
    payload: Payload,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            .then(self.seq.cmp(&other.seq))
    }
}

/// Simulated clock with a deterministic event queue.
#[derive(Debug, Default)]
pub struct SimClock {
    pub current_time: f64,
    queue: BinaryHeap<Reverse<Event>>,
    seq: u64,
}

impl SimClock {
    fn push(&mut self, time: f64, kind: EventKind, payload: Payload) {
        debug_assert!(time >= self.current_time, "event scheduled in the past");
        self.seq += 1;
        self.queue.push(Reverse(Event {
            time,
            kind,
            seq: self.seq,
            payload,
        }));
    }

    fn pop(&mut self) -> Option<Event> {
        let Reverse(e) = self.queue.pop()?;
        self.current_time = self.current_time.max(e.time);
        Some(e)
    }

    fn peek_time(&self) -> Option<f64> {
        self.queue.peek().map(|Reverse(e)| e.time)
    }
}

/// One line of the optional full event trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub time: f64,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
    /// Requests holding a replica slot on the service after the event.
    pub in_service: u32,
    /// Slots across ready replicas, including draining ones.
    pub capacity: u32,
    pub ready_replicas: u32,
    pub starting_replicas: u32,
    pub queued: u32,
}

/// A change in a service's provisioned replica count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRecord {
    pub time: f64,
    pub service_id: String,
    pub from: u32,
    pub to: u32,
    /// `None` for an on-demand activation of a cold service.
    pub reason: Option<ScaleReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceReport {
    pub tier: ModelTier,
    pub requests: u64,
    pub successes: u64,
    pub failures: u64,
    pub mean_latency: Option<f64>,
    pub query_cost: f64,
    pub replica_seconds: f64,
    pub busy_seconds: f64,
    pub infrastructure_cost: f64,
    pub cold_starts: u64,
    pub peak_replicas: u32,
    pub final_replicas: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub scenario: String,
    pub strategy: String,
    pub seed: u64,
    pub horizon: f64,
    /// Time of the last processed event.
    pub end_time: f64,
    pub metrics: MetricsReport,
    pub services: BTreeMap<String, ServiceReport>,
    pub scale_events: Vec<ScaleRecord>,
    pub outcomes: Vec<RequestOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEntry>>,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Starting,
    Ready,
    Draining,
}

#[derive(Debug, Clone)]
struct Replica {
    id: u64,
    phase: Phase,
    busy: u32,
    provisioned_at: f64,
}

struct ServiceState {
    id: String,
    tier: ModelTier,
    cfg: SimServiceConfig,
    concurrency: u32,
    unit_cost: f64,
    replicas: Vec<Replica>,
    queue: VecDeque<usize>,
    report: ServiceReport,
    latency_sum: f64,
}

impl ServiceState {
    fn count(&self, phase: Phase) -> u32 {
        self.replicas.iter().filter(|r| r.phase == phase).count() as u32
    }

    fn provisioned(&self) -> u32 {
        self.count(Phase::Ready) + self.count(Phase::Starting)
    }

    fn in_service(&self) -> u32 {
        self.replicas.iter().map(|r| r.busy).sum()
    }

    fn capacity(&self) -> u32 {
        (self.count(Phase::Ready) + self.count(Phase::Draining)) * self.concurrency
    }
}

struct Request {
    arrival: Arrival,
    u_fail: f64,
    u_tokens: f64,
    z_tokens: f64,
    service: Option<usize>,
    replica: Option<u64>,
    outcome: RequestOutcome,
}

/// Per-request random draws, independent of strategy and event order.
pub(crate) fn request_draws(seed: u64, index: usize) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    (rng.gen(), rng.gen(), rng.sample(StandardNormal))
}

/// A configured scenario ready to run strategies against traces.
pub struct Simulation {
    scenario: Scenario,
    router: ComplexityRouter,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let router = scenario.build_router()?;
        Ok(Self { scenario, router })
    }

    pub fn with_router(scenario: Scenario, router: ComplexityRouter) -> Result<Self, SimError> {
        scenario.validate()?;
        Ok(Self { scenario, router })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn router(&self) -> &ComplexityRouter {
        &self.router
    }

    /// The scenario's own arrival stream.
    pub fn arrivals(&self, seed: u64) -> Result<Vec<Arrival>, SimError> {
        let s = &self.scenario;
        let mut arrivals = match &s.arrivals {
            crate::workload::ArrivalProcess::Replay { path } => {
                crate::workload::read_trace(s.resolve(path)).map_err(|e| SimError::Config(e.to_string()))?
            }
            process => crate::workload::generate_trace(process, s.horizon, &s.prompts, seed),
        };
        if let Some(n) = s.max_requests {
            arrivals.truncate(n);
        }
        Ok(arrivals)
    }

    /// Runs `strategy` over `arrivals` until `horizon`.
    pub fn run(
        &self,
        arrivals: &[Arrival],
        strategy: &StrategySpec,
        horizon: f64,
        seed: u64,
    ) -> Result<SimReport, SimError> {
        if !(horizon > 0.0) {
            return Err(SimError::Config("horizon must be positive".into()));
        }
        Run::new(self, strategy, horizon, seed)?.execute(arrivals)
    }
}

struct Run<'a> {
    sim: &'a Simulation,
    strategy: &'a StrategySpec,
    options: SelectionOptions,
    horizon: f64,
    seed: u64,
    limits: SuccessLimits,
    registry: Registry,
    autoscaler: Autoscaler,
    services: Vec<ServiceState>,
    index: BTreeMap<String, usize>,
    clock: SimClock,
    requests: Vec<Request>,
    next_replica: u64,
    scale_events: Vec<ScaleRecord>,
    trace: Option<Vec<TraceEntry>>,
    pick_rng: ChaCha8Rng,
}

impl<'a> Run<'a> {
    fn new(sim: &'a Simulation, strategy: &'a StrategySpec, horizon: f64, seed: u64) -> Result<Self, SimError> {
        let s = &sim.scenario;
        let cells = s.matrix.cells().map_err(|e| SimError::Config(e.to_string()))?;
        let registry = Registry::new(s.matrix.telemetry_window);
        let mut services = Vec::new();
        let mut index = BTreeMap::new();
        let mut next_replica = 0;
        for (model, backend, mut inst) in cells {
            let cfg = s
                .service(&inst.service_id)
                .ok_or_else(|| SimError::Config(format!("no simulated service for `{}`", inst.service_id)))?
                .clone();
            if let Some(c) = cfg.unit_cost {
                inst.unit_cost = c;
            }
            if let Some(c) = cfg.concurrency_per_replica {
                inst.concurrency_per_replica = c;
            }
            if s.derive_priors {
                inst.latency_prior = cfg.expected_latency();
                inst.cold_start_estimate = Some(cfg.cold_start_duration);
            }
            let initial = match strategy.scaling {
                ScalingMode::Static => s.static_replicas.unwrap_or(inst.replicas),
                ScalingMode::Dynamic => inst.replicas,
            };
            inst.replicas = initial;
            let replicas = (0..initial)
                .map(|_| {
                    next_replica += 1;
                    Replica {
                        id: next_replica,
                        phase: Phase::Ready,
                        busy: 0,
                        provisioned_at: 0.0,
                    }
                })
                .collect();
            index.insert(inst.service_id.clone(), services.len());
            services.push(ServiceState {
                id: inst.service_id.clone(),
                tier: model.tier,
                concurrency: inst.concurrency_per_replica,
                unit_cost: inst.unit_cost,
                cfg,
                replicas,
                queue: VecDeque::new(),
                report: ServiceReport {
                    tier: model.tier,
                    requests: 0,
                    successes: 0,
                    failures: 0,
                    mean_latency: None,
                    query_cost: 0.0,
                    replica_seconds: 0.0,
                    busy_seconds: 0.0,
                    infrastructure_cost: 0.0,
                    cold_starts: 0,
                    peak_replicas: initial,
                    final_replicas: initial,
                },
                latency_sum: 0.0,
            });
            registry
                .register(model, backend, inst)
                .map_err(|e| SimError::Config(e.to_string()))?;
        }
        let mut options = s.selection;
        if strategy.scaling == ScalingMode::Static {
            options.candidates = CandidatePolicy {
                allow_cold_start: false,
                ..options.candidates
            };
        }
        let mut pick_rng = ChaCha8Rng::seed_from_u64(seed);
        pick_rng.set_stream(0);
        Ok(Self {
            sim,
            strategy,
            options,
            horizon,
            seed,
            limits: s.limits,
            registry,
            autoscaler: Autoscaler::new(s.policy.clone()),
            services,
            index,
            clock: SimClock::default(),
            requests: Vec::new(),
            next_replica,
            scale_events: Vec::new(),
            trace: s.record_trace.then(Vec::new),
            pick_rng,
        })
    }

    fn execute(mut self, arrivals: &[Arrival]) -> Result<SimReport, SimError> {
        for (i, a) in arrivals.iter().enumerate() {
            if a.time() >= self.horizon {
                continue;
            }
            let (u_fail, u_tokens, z_tokens) = request_draws(self.seed, i);
            let k = self.requests.len();
            self.requests.push(Request {
                arrival: a.clone(),
                u_fail,
                u_tokens,
                z_tokens,
                service: None,
                replica: None,
                outcome: RequestOutcome {
                    request_id: a.prompt.id.clone(),
                    benchmark_tag: a.prompt.benchmark_tag.clone(),
                    service_id: None,
                    tier: None,
                    label: a.label,
                    predicted: None,
                    arrival: a.time(),
                    first_token: None,
                    end: None,
                    status: OutcomeStatus::InFlight,
                    failure: None,
                    output_tokens: 0,
                    cost: 0.0,
                    cold_start: false,
                    accuracy: None,
                },
            });
            self.clock.push(a.time(), EventKind::Arrival, Payload::Request(k));
        }
        if self.strategy.scaling == ScalingMode::Dynamic {
            self.clock.push(0.0, EventKind::Tick, Payload::None);
        }
        while let Some(t) = self.clock.peek_time() {
            if t > self.horizon && !self.sim.scenario.drain {
                break;
            }
            let e = self.clock.pop().expect("peeked");
            self.handle(e);
        }
        Ok(self.finish())
    }

    fn handle(&mut self, e: Event) {
        let now = e.time;
        let touched = match (e.kind, e.payload) {
            (EventKind::Arrival, Payload::Request(k)) => self.on_arrival(k, now),
            (EventKind::FirstToken, Payload::Request(k)) => {
                self.requests[k].outcome.first_token = Some(now);
                self.requests[k].service
            }
            (EventKind::Completion | EventKind::Failure, Payload::Request(k)) => self.on_finish(k, now),
            (EventKind::ReplicaReady, Payload::Replica { service, replica }) => {
                self.on_ready(service, replica, now);
                Some(service)
            }
            (EventKind::ScaleApplied, Payload::Scale { service, count, reason }) => {
                self.apply_scale(service, count, Some(reason), now);
                Some(service)
            }
            (EventKind::Tick, _) => {
                self.on_tick(now);
                None
            }
            _ => None,
        };
        if let Some(trace) = &mut self.trace {
            let request_id = match e.payload {
                Payload::Request(k) => Some(self.requests[k].outcome.request_id.clone()),
                _ => None,
            };
            let svc = touched.map(|s| &self.services[s]);
            trace.push(TraceEntry {
                time: now,
                kind: e.kind,
                service_id: svc.map(|s| s.id.clone()),
                request_id,
                in_service: svc.map_or(0, ServiceState::in_service),
                capacity: svc.map_or(0, ServiceState::capacity),
                ready_replicas: svc.map_or(0, |s| s.count(Phase::Ready) + s.count(Phase::Draining)),
                starting_replicas: svc.map_or(0, |s| s.count(Phase::Starting)),
                queued: svc.map_or(0, |s| s.queue.len() as u32),
            });
        }
    }

    fn sync_registry(&self, s: usize) {
        let svc = &self.services[s];
        let _ = self
            .registry
            .set_replicas(&svc.id, svc.count(Phase::Ready), svc.count(Phase::Starting));
        let _ = self
            .registry
            .set_inflight(&svc.id, svc.in_service() + svc.queue.len() as u32);
    }

    fn on_arrival(&mut self, k: usize, now: f64) -> Option<usize> {
        let router = &self.sim.router;
        let prompt = &self.requests[k].arrival.prompt;
        let output = router.classify_with(prompt, self.strategy.routing);
        let snapshot = self.registry.snapshot(now);
        let decision = select_with(
            self.strategy.selection,
            prompt,
            &snapshot,
            &self.strategy.profile,
            &output,
            &router.relevance,
            &self.options,
            &mut self.pick_rng,
        );
        let decision = match decision {
            Ok(d) => d,
            Err(OrchestratorError::RoutingUnavailable) | Err(OrchestratorError::Scoring(_)) => {
                let o = &mut self.requests[k].outcome;
                o.predicted = Some(output.predicted);
                o.status = OutcomeStatus::Failure;
                o.failure = Some(FailureKind::NoService);
                o.end = Some(now);
                o.accuracy = o.label.map(|_| 0.0);
                return None;
            }
        };
        let s = self.index[&decision.service_id];
        let label = self.requests[k].arrival.label;
        {
            let svc = &mut self.services[s];
            svc.report.requests += 1;
            svc.report.query_cost += svc.unit_cost;
            let r = &mut self.requests[k];
            r.service = Some(s);
            r.outcome.service_id = Some(svc.id.clone());
            r.outcome.tier = Some(svc.tier);
            r.outcome.predicted = Some(output.predicted);
            r.outcome.cost = svc.unit_cost;
            r.outcome.cold_start = svc.count(Phase::Ready) == 0;
            r.outcome.accuracy = label.map(|l| router.relevance.get(l, svc.tier));
        }
        let _ = self.registry.record_request(&decision.service_id, now);
        if self.services[s].provisioned() == 0 {
            self.services[s].report.cold_starts += 1;
            self.add_replicas(s, 1, None, now);
        }
        self.services[s].queue.push_back(k);
        self.start_queued(s, now);
        Some(s)
    }

    fn add_replicas(&mut self, s: usize, n: u32, reason: Option<ScaleReason>, now: f64) {
        let from = self.services[s].provisioned();
        let cold = self.services[s].cfg.cold_start_duration;
        for _ in 0..n {
            self.next_replica += 1;
            let id = self.next_replica;
            self.services[s].replicas.push(Replica {
                id,
                phase: Phase::Starting,
                busy: 0,
                provisioned_at: now,
            });
            self.clock.push(
                now + cold,
                EventKind::ReplicaReady,
                Payload::Replica {
                    service: s,
                    replica: id,
                },
            );
        }
        let svc = &mut self.services[s];
        svc.report.peak_replicas = svc.report.peak_replicas.max(svc.provisioned());
        self.scale_events.push(ScaleRecord {
            time: now,
            service_id: svc.id.clone(),
            from,
            to: from + n,
            reason,
        });
        self.sync_registry(s);
    }

    fn retire(&mut self, s: usize, replica_index: usize, now: f64) {
        let r = self.services[s].replicas.remove(replica_index);
        self.services[s].report.replica_seconds += now - r.provisioned_at;
    }

    /// Moves the provisioned count (ready + starting) to `target`: new
    /// replicas start cold; removals cancel starting replicas first, then
    /// drop idle ready ones, then drain busy ones.
    fn apply_scale(&mut self, s: usize, target: u32, reason: Option<ScaleReason>, now: f64) {
        let current = self.services[s].provisioned();
        match target.cmp(&current) {
            Ordering::Equal => {}
            Ordering::Greater => self.add_replicas(s, target - current, reason, now),
            Ordering::Less => {
                let mut excess = current - target;
                while excess > 0 {
                    let svc = &self.services[s];
                    let pick = svc
                        .replicas
                        .iter()
                        .rposition(|r| r.phase == Phase::Starting)
                        .or_else(|| {
                            svc.replicas
                                .iter()
                                .rposition(|r| r.phase == Phase::Ready && r.busy == 0)
                        });
                    match pick {
                        Some(i) => self.retire(s, i, now),
                        None => {
                            let i = svc
                                .replicas
                                .iter()
                                .rposition(|r| r.phase == Phase::Ready)
                                .expect("provisioned replicas remain");
                            self.services[s].replicas[i].phase = Phase::Draining;
                        }
                    }
                    excess -= 1;
                }
                self.scale_events.push(ScaleRecord {
                    time: now,
                    service_id: self.services[s].id.clone(),
                    from: current,
                    to: target,
                    reason,
                });
                // never strand queued work without capacity on the way
                if !self.services[s].queue.is_empty() && self.services[s].provisioned() == 0 {
                    self.add_replicas(s, 1, None, now);
                }
                self.sync_registry(s);
            }
        }
    }

    fn on_ready(&mut self, s: usize, replica: u64, now: f64) {
        if let Some(r) = self.services[s]
            .replicas
            .iter_mut()
            .find(|r| r.id == replica && r.phase == Phase::Starting)
        {
            r.phase = Phase::Ready;
            self.sync_registry(s);
            self.start_queued(s, now);
        }
    }

    fn start_queued(&mut self, s: usize, now: f64) {
        loop {
            let Some(&k) = self.services[s].queue.front() else {
                break;
            };
            let deadline = self.requests[k].outcome.arrival + self.limits.request_timeout;
            if now >= deadline {
                self.services[s].queue.pop_front();
                self.clock.push(now, EventKind::Failure, Payload::Request(k));
                self.requests[k].outcome.failure = Some(FailureKind::Timeout);
                continue;
            }
            let concurrency = self.services[s].concurrency;
            let slot = self.services[s]
                .replicas
                .iter_mut()
                .filter(|r| r.phase == Phase::Ready && r.busy < concurrency)
                .min_by_key(|r| (r.busy, r.id));
            let Some(replica) = slot else { break };
            replica.busy += 1;
            let replica_id = replica.id;
            self.services[s].queue.pop_front();
            let cfg = &self.services[s].cfg;
            let req = &mut self.requests[k];
            req.replica = Some(replica_id);
            let wanted = cfg.output_tokens.tokens(req.u_tokens, req.z_tokens);
            let tokens = wanted.min(self.limits.max_output_tokens);
            let first = now + cfg.base_ttft;
            let done = first + f64::from(tokens) * cfg.per_token_latency;
            let (end, failure) = if done > deadline {
                (deadline, Some(FailureKind::Timeout))
            } else if wanted > self.limits.max_output_tokens {
                (done, Some(FailureKind::TokenLimit))
            } else if req.u_fail < cfg.failure_probability {
                (done, Some(FailureKind::Backend))
            } else {
                (done, None)
            };
            req.outcome.output_tokens = tokens;
            req.outcome.failure = failure;
            if first <= end {
                self.clock.push(first, EventKind::FirstToken, Payload::Request(k));
            }
            let kind = if failure.is_some() {
                EventKind::Failure
            } else {
                EventKind::Completion
            };
            self.clock.push(end, kind, Payload::Request(k));
            self.services[s].report.busy_seconds += end - now;
        }
        self.sync_registry(s);
    }

    fn on_finish(&mut self, k: usize, now: f64) -> Option<usize> {
        let s = self.requests[k].service?;
        let success = self.requests[k].outcome.failure.is_none();
        {
            let o = &mut self.requests[k].outcome;
            o.end = Some(now);
            o.status = if success {
                OutcomeStatus::Success
            } else {
                OutcomeStatus::Failure
            };
            if !success {
                o.accuracy = o.accuracy.map(|_| 0.0);
            }
        }
        if let Some(id) = self.requests[k].replica {
            let svc = &mut self.services[s];
            if let Some(i) = svc.replicas.iter().position(|r| r.id == id) {
                svc.replicas[i].busy -= 1;
                if svc.replicas[i].phase == Phase::Draining && svc.replicas[i].busy == 0 {
                    self.retire(s, i, now);
                }
            }
        }
        let o = &self.requests[k].outcome;
        let latency = now - o.arrival;
        let ttft = o.first_token.map_or(latency, |t| t - o.arrival);
        let svc = &mut self.services[s];
        if success {
            svc.report.successes += 1;
            svc.latency_sum += latency;
        } else {
            svc.report.failures += 1;
        }
        let _ = self.registry.record_sample(&svc.id, latency, ttft, success, now);
        self.start_queued(s, now);
        Some(s)
    }

    fn on_tick(&mut self, now: f64) {
        self.registry.prune(now);
        let snapshot = self.registry.snapshot(now);
        for cmd in self.autoscaler.tick(&snapshot, now) {
            if let Some(&s) = self.index.get(&cmd.model_id) {
                self.clock.push(
                    now,
                    EventKind::ScaleApplied,
                    Payload::Scale {
                        service: s,
                        count: cmd.new_replica_count,
                        reason: cmd.reason,
                    },
                );
            }
        }
        let next = now + self.autoscaler.policy.evaluation_period;
        if next < self.horizon {
            self.clock.push(next, EventKind::Tick, Payload::None);
        }
    }

    fn finish(mut self) -> SimReport {
        let end_time = self.clock.current_time.max(self.horizon);
        let mut infra = 0.0;
        let mut services = BTreeMap::new();
        for svc in &mut self.services {
            for r in &svc.replicas {
                svc.report.replica_seconds += end_time - r.provisioned_at;
            }
            svc.report.final_replicas = svc.provisioned();
            svc.report.infrastructure_cost = svc.report.replica_seconds * svc.cfg.replica_cost_per_hour / 3600.0;
            svc.report.mean_latency = (svc.report.successes > 0).then(|| svc.latency_sum / svc.report.successes as f64);
            infra += svc.report.infrastructure_cost;
            services.insert(svc.id.clone(), svc.report.clone());
        }
        let outcomes: Vec<RequestOutcome> = self.requests.into_iter().map(|r| r.outcome).collect();
        let metrics = match compute_metrics(&outcomes) {
            Ok(m) => m.with_infrastructure_cost(infra),
            Err(_) => empty_metrics(infra),
        };
        SimReport {
            scenario: self.sim.scenario.name.clone(),
            strategy: self.strategy.to_string(),
            seed: self.seed,
            horizon: self.horizon,
            end_time,
            metrics,
            services,
            scale_events: self.scale_events,
            outcomes,
            trace: self.trace,
        }
    }
}

fn empty_metrics(infra: f64) -> MetricsReport {
    MetricsReport {
        n_total: 0,
        n_success: 0,
        n_failure: 0,
        n_inflight: 0,
        success_rate: 0.0,
        avg_latency: None,
        ttft_p50: None,
        ttft_p95: None,
        ttft_p99: None,
        throughput: 0.0,
        query_cost: 0.0,
        infrastructure_cost: infra,
        total_cost: infra,
        cost_per_query: 0.0,
        accuracy: None,
        cold_starts: 0,
        by_tag: BTreeMap::new(),
    }
}
