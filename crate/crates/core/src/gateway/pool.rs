use crate::orchestrator::{BackendPool, DispatchError, InferenceOutcome, ScaleCommand};
use crate::registry::{MatrixConfig, Registry};
use crate::router::Prompt;
use crate::sim::{request_draws, SimServiceConfig, SuccessLimits};
use async_trait::async_trait;
use futures::StreamExt;
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

fn sleep_virtual(seconds: f64, time_scale: f64) -> Option<tokio::time::Sleep> {
    let wall = seconds * time_scale;
    (wall > 0.0 && wall.is_finite()).then(|| tokio::time::sleep(Duration::from_secs_f64(wall)))
}

/// In-process backends using the simulator's per-service latency model.
///
/// Latencies are virtual: they are reported as computed and only slept
/// for `latency * time_scale` of wall time. Completions are deterministic
/// placeholders.
pub struct SimulatedPool {
    services: BTreeMap<String, SimServiceConfig>,
    registry: Arc<Registry>,
    limits: SuccessLimits,
    seed: u64,
    time_scale: f64,
    counter: AtomicU64,
}

impl SimulatedPool {
    pub fn new(
        services: Vec<SimServiceConfig>,
        registry: Arc<Registry>,
        limits: SuccessLimits,
        seed: u64,
        time_scale: f64,
    ) -> Self {
        Self {
            services: services.into_iter().map(|s| (s.service_id.clone(), s)).collect(),
            registry,
            limits,
            seed,
            time_scale,
            counter: AtomicU64::new(0),
        }
    }

    /// Default behaviour for cells without a configured sim service: the
    /// model's latency prior split into a fixed first-token share.
    pub fn with_defaults(mut self, matrix: &MatrixConfig) -> Self {
        if let Ok(cells) = matrix.cells() {
            for (_, _, inst) in cells {
                self.services.entry(inst.service_id.clone()).or_insert_with(|| {
                    let mut s =
                        SimServiceConfig::new(&inst.service_id, inst.latency_prior * 0.2, inst.latency_prior * 0.008);
                    s.cold_start_duration = inst.cold_start_estimate.unwrap_or(0.0);
                    s
                });
            }
        }
        self
    }

    fn service(&self, id: &str) -> Result<&SimServiceConfig, DispatchError> {
        self.services
            .get(id)
            .ok_or_else(|| DispatchError::UnknownService(id.to_string()))
    }
}

fn placeholder(service_id: &str, prompt: &Prompt, tokens: u32) -> String {
    let digest = prompt.text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    });
    format!("[simulated completion from {service_id}: {tokens} tokens, prompt {digest:016x}]")
}

#[async_trait]
impl BackendPool for SimulatedPool {
    async fn ensure_ready(&self, service_id: &str, timeout: f64) -> Result<f64, DispatchError> {
        let svc = self.service(service_id)?;
        let inst = self
            .registry
            .instance(service_id)
            .map_err(|_| DispatchError::UnknownService(service_id.to_string()))?;
        if inst.replicas > 0 {
            return Ok(0.0);
        }
        let wait = svc.cold_start_duration;
        if wait > timeout {
            if let Some(s) = sleep_virtual(timeout, self.time_scale) {
                s.await;
            }
            return Err(DispatchError::ColdStartTimeout {
                service_id: service_id.to_string(),
                waited: timeout,
            });
        }
        if let Some(s) = sleep_virtual(wait, self.time_scale) {
            s.await;
        }
        let now = self
            .registry
            .instance(service_id)
            .map_err(|_| DispatchError::UnknownService(service_id.into()))?;
        let _ = self
            .registry
            .set_replicas(service_id, now.replicas.max(1), now.starting_replicas.saturating_sub(1));
        Ok(wait)
    }

    async fn infer(&self, service_id: &str, prompt: &Prompt) -> Result<InferenceOutcome, DispatchError> {
        let svc = self.service(service_id)?;
        let index = self.counter.fetch_add(1, Ordering::Relaxed) as usize;
        let (u_fail, u_tokens, z) = request_draws(self.seed, index);
        let tokens = svc.output_tokens.tokens(u_tokens, z);
        let served = tokens.min(self.limits.max_output_tokens);
        let ttft = svc.base_ttft;
        let latency = svc.base_ttft + f64::from(served) * svc.per_token_latency;
        let fail_at = |latency: f64, message: String| DispatchError::Backend {
            service_id: service_id.to_string(),
            message,
            latency,
        };
        if latency > self.limits.request_timeout {
            if let Some(s) = sleep_virtual(self.limits.request_timeout, self.time_scale) {
                s.await;
            }
            return Err(DispatchError::Timeout {
                service_id: service_id.to_string(),
                latency: self.limits.request_timeout,
            });
        }
        if let Some(s) = sleep_virtual(latency, self.time_scale) {
            s.await;
        }
        if u_fail < svc.failure_probability {
            return Err(fail_at(latency, "simulated backend error".into()));
        }
        if tokens > self.limits.max_output_tokens {
            return Err(fail_at(
                latency,
                format!("output truncated at {} tokens", self.limits.max_output_tokens),
            ));
        }
        Ok(InferenceOutcome {
            completion: placeholder(service_id, prompt, served),
            ttft,
            latency,
            output_tokens: served,
            ttft_estimated: false,
            cold_start_wait: 0.0,
        })
    }

    async fn apply_scale(&self, command: &ScaleCommand) -> Result<(), DispatchError> {
        let id = command.model_id.as_str();
        let inst = self
            .registry
            .instance(id)
            .map_err(|_| DispatchError::UnknownService(id.to_string()))?;
        let target = command.new_replica_count;
        if target <= inst.replicas {
            let _ = self.registry.set_replicas(id, target, 0);
            return Ok(());
        }
        let adding = target - inst.replicas;
        let _ = self.registry.set_replicas(id, inst.replicas, adding);
        let cold = self.service(id).map(|s| s.cold_start_duration).unwrap_or(0.0);
        let registry = self.registry.clone();
        let id = id.to_string();
        let delay = sleep_virtual(cold, self.time_scale);
        tokio::spawn(async move {
            if let Some(s) = delay {
                s.await;
            }
            if let Ok(now) = registry.instance(&id) {
                let ready = now.replicas + now.starting_replicas.min(adding);
                let _ = registry.set_replicas(&id, ready, now.starting_replicas.saturating_sub(adding));
            }
        });
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Upstream {
    endpoint: String,
    model: String,
}

/// Forwards to OpenAI-compatible chat-completion endpoints, one per cell.
///
/// Requests ask for a streamed response; TTFT is taken at the first body
/// chunk carrying content. Non-streaming responses report TTFT equal to the
/// full latency and are flagged as estimated.
pub struct ProxyPool {
    client: reqwest::Client,
    upstreams: BTreeMap<String, Upstream>,
    limits: SuccessLimits,
}

impl ProxyPool {
    pub fn new(matrix: &MatrixConfig, limits: SuccessLimits) -> Result<Self, String> {
        let mut upstreams = BTreeMap::new();
        for cell in &matrix.cells {
            let id = crate::registry::service_id(&cell.model, &cell.backend);
            let endpoint = cell
                .endpoint
                .clone()
                .ok_or_else(|| format!("cell `{id}` has no endpoint (required in proxy mode)"))?;
            upstreams.insert(
                id,
                Upstream {
                    endpoint: endpoint.trim_end_matches('/').to_string(),
                    model: cell.upstream_model.clone().unwrap_or_else(|| cell.model.clone()),
                },
            );
        }
        let client = reqwest::Client::builder().build().map_err(|e| e.to_string())?;
        Ok(Self {
            client,
            upstreams,
            limits,
        })
    }

    async fn call(
        &self,
        service_id: &str,
        up: &Upstream,
        prompt: &Prompt,
        start: Instant,
    ) -> Result<InferenceOutcome, DispatchError> {
        let fail = |message: String| DispatchError::Backend {
            service_id: service_id.to_string(),
            message,
            latency: start.elapsed().as_secs_f64(),
        };
        let body = serde_json::json!({
            "model": up.model,
            "messages": [{"role": "user", "content": prompt.text}],
            "stream": true,
            "max_tokens": self.limits.max_output_tokens,
        });
        let resp = self
            .client
            .post(format!("{}/v1/chat/completions", up.endpoint))
            .json(&body)
            .send()
            .await
            .map_err(|e| fail(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(fail(format!("upstream returned {status}")));
        }
        let streaming = resp
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .is_some_and(|v| v.starts_with("text/event-stream"));
        if !streaming {
            let v: serde_json::Value = resp.json().await.map_err(|e| fail(e.to_string()))?;
            let latency = start.elapsed().as_secs_f64();
            let completion = v["choices"][0]["message"]["content"]
                .as_str()
                .unwrap_or_default()
                .to_string();
            let tokens = v["usage"]["completion_tokens"]
                .as_u64()
                .map_or_else(|| crate::router::count_tokens(&completion) as u32, |t| t as u32);
            return finish(service_id, completion, latency, latency, tokens, true, &self.limits);
        }
        let mut stream = resp.bytes_stream();
        let mut buf = String::new();
        let mut completion = String::new();
        let mut chunks = 0u32;
        let mut ttft = None;
        let mut done = false;
        while let Some(chunk) = stream.next().await {
            let chunk = chunk.map_err(|e| fail(e.to_string()))?;
            buf.push_str(&String::from_utf8_lossy(&chunk));
            while let Some(pos) = buf.find('\n') {
                let line: String = buf.drain(..=pos).collect();
                let Some(data) = line.trim().strip_prefix("data:").map(str::trim) else {
                    continue;
                };
                if data == "[DONE]" {
                    done = true;
                    break;
                }
                let Ok(v) = serde_json::from_str::<serde_json::Value>(data) else {
                    continue;
                };
                if let Some(text) = v["choices"][0]["delta"]["content"].as_str() {
                    ttft.get_or_insert_with(|| start.elapsed().as_secs_f64());
                    completion.push_str(text);
                    chunks += 1;
                }
            }
            if done {
                break;
            }
        }
        let latency = start.elapsed().as_secs_f64();
        finish(
            service_id,
            completion,
            ttft.unwrap_or(latency),
            latency,
            chunks,
            ttft.is_none(),
            &self.limits,
        )
    }
}

fn finish(
    service_id: &str,
    completion: String,
    ttft: f64,
    latency: f64,
    tokens: u32,
    ttft_estimated: bool,
    limits: &SuccessLimits,
) -> Result<InferenceOutcome, DispatchError> {
    let fail = |message: String| DispatchError::Backend {
        service_id: service_id.to_string(),
        message,
        latency,
    };
    if completion.trim().is_empty() {
        return Err(fail("empty completion".into()));
    }
    if tokens > limits.max_output_tokens {
        return Err(fail(format!("output exceeded {} tokens", limits.max_output_tokens)));
    }
    Ok(InferenceOutcome {
        completion,
        ttft,
        latency,
        output_tokens: tokens,
        ttft_estimated,
        cold_start_wait: 0.0,
    })
}

#[async_trait]
impl BackendPool for ProxyPool {
    /// Replica lifecycle is external in proxy mode; endpoints are assumed
    /// reachable.
    async fn ensure_ready(&self, service_id: &str, _timeout: f64) -> Result<f64, DispatchError> {
        if self.upstreams.contains_key(service_id) {
            Ok(0.0)
        } else {
            Err(DispatchError::UnknownService(service_id.to_string()))
        }
    }

    async fn infer(&self, service_id: &str, prompt: &Prompt) -> Result<InferenceOutcome, DispatchError> {
        let up = self
            .upstreams
            .get(service_id)
            .ok_or_else(|| DispatchError::UnknownService(service_id.to_string()))?;
        let start = Instant::now();
        let limit = self.limits.request_timeout;
        match tokio::time::timeout(Duration::from_secs_f64(limit), self.call(service_id, up, prompt, start)).await {
            Ok(r) => r,
            Err(_) => Err(DispatchError::Timeout {
                service_id: service_id.to_string(),
                latency: start.elapsed().as_secs_f64(),
            }),
        }
    }
}
