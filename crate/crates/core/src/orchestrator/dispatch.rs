use crate::registry::Registry;
use crate::router::Prompt;
use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{RoutingDecision, ScaleCommand};

/// Result of one inference call as reported by a backend pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceOutcome {
    pub completion: String,
    /// Seconds until the first token.
    pub ttft: f64,
    /// Seconds until the last token.
    pub latency: f64,
    pub output_tokens: u32,
    /// True when the backend could not report a first-token time.
    #[serde(default)]
    pub ttft_estimated: bool,
    /// Seconds spent waiting for a cold replica; included in `ttft` and
    /// `latency`.
    #[serde(default)]
    pub cold_start_wait: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DispatchError {
    #[error("service `{service_id}` not ready after {waited:.1}s")]
    ColdStartTimeout { service_id: String, waited: f64 },
    #[error("backend `{service_id}` failed after {latency:.3}s: {message}")]
    Backend {
        service_id: String,
        message: String,
        latency: f64,
    },
    #[error("backend `{service_id}` exceeded the {latency:.1}s request timeout")]
    Timeout { service_id: String, latency: f64 },
    #[error("unknown service `{0}`")]
    UnknownService(String),
}

/// Something that can run inference on the services of the matrix.
#[async_trait]
pub trait BackendPool: Send + Sync {
    /// Waits until `service_id` has a ready replica, activating one if
    /// needed; returns the seconds waited.
    async fn ensure_ready(&self, service_id: &str, timeout: f64) -> Result<f64, DispatchError>;

    async fn infer(&self, service_id: &str, prompt: &Prompt) -> Result<InferenceOutcome, DispatchError>;

    async fn apply_scale(&self, _command: &ScaleCommand) -> Result<(), DispatchError> {
        Ok(())
    }
}

/// Runs `prompt` on the decided service and feeds the result back into
/// telemetry. Every dispatched request yields exactly one sample, stamped
/// at `started_at + latency`.
pub async fn dispatch(
    decision: &RoutingDecision,
    prompt: &Prompt,
    pool: &dyn BackendPool,
    registry: &Registry,
    started_at: f64,
    cold_start_timeout: f64,
) -> Result<InferenceOutcome, DispatchError> {
    let id = decision.service_id.as_str();
    registry
        .record_request(id, started_at)
        .map_err(|_| DispatchError::UnknownService(id.to_string()))?;
    let _ = registry.adjust_inflight(id, 1);
    let result = run(decision, prompt, pool, cold_start_timeout).await;
    let _ = registry.adjust_inflight(id, -1);
    match &result {
        Ok(o) => {
            let _ = registry.record_sample(id, o.latency, o.ttft, true, started_at + o.latency);
        }
        Err(DispatchError::ColdStartTimeout { waited, .. }) => {
            let _ = registry.record_sample(id, *waited, *waited, false, started_at + waited);
        }
        Err(DispatchError::Backend { latency, .. } | DispatchError::Timeout { latency, .. }) => {
            let _ = registry.record_sample(id, *latency, *latency, false, started_at + latency);
        }
        Err(DispatchError::UnknownService(_)) => {}
    }
    result
}

async fn run(
    decision: &RoutingDecision,
    prompt: &Prompt,
    pool: &dyn BackendPool,
    cold_start_timeout: f64,
) -> Result<InferenceOutcome, DispatchError> {
    let id = decision.service_id.as_str();
    let wait = if decision.cold_start {
        pool.ensure_ready(id, cold_start_timeout).await?
    } else {
        0.0
    };
    match pool.infer(id, prompt).await {
        Ok(mut o) => {
            o.ttft += wait;
            o.latency += wait;
            o.cold_start_wait = wait;
            Ok(o)
        }
        Err(DispatchError::Backend {
            service_id,
            message,
            latency,
        }) => Err(DispatchError::Backend {
            service_id,
            message,
            latency: latency + wait,
        }),
        Err(DispatchError::Timeout { service_id, latency }) => Err(DispatchError::Timeout {
            service_id,
            latency: latency + wait,
        }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::{select_service, SelectionOptions};
    use crate::registry::{BackendSpec, ModelSpec, ServiceInstance};
    use crate::router::{ClassifierOutput, ClassifierSource, ComplexityClass, ModelTier, RelevanceTable};
    use crate::scoring::WeightProfile;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Fake {
        cold_start: f64,
        fail: bool,
        activations: AtomicU32,
    }

    #[async_trait]
    impl BackendPool for Fake {
        async fn ensure_ready(&self, service_id: &str, timeout: f64) -> Result<f64, DispatchError> {
            self.activations.fetch_add(1, Ordering::SeqCst);
            if self.cold_start > timeout {
                return Err(DispatchError::ColdStartTimeout {
                    service_id: service_id.into(),
                    waited: timeout,
                });
            }
            Ok(self.cold_start)
        }

        async fn infer(&self, service_id: &str, _prompt: &Prompt) -> Result<InferenceOutcome, DispatchError> {
            if self.fail {
                return Err(DispatchError::Backend {
                    service_id: service_id.into(),
                    message: "boom".into(),
                    latency: 0.5,
                });
            }
            Ok(InferenceOutcome {
                completion: "ok".into(),
                ttft: 0.2,
                latency: 1.0,
                output_tokens: 10,
                ttft_estimated: false,
                cold_start_wait: 0.0,
            })
        }
    }

    fn setup(replicas: u32) -> (Registry, RoutingDecision, Prompt) {
        let reg = Registry::default();
        let _ = reg
            .register(
                ModelSpec {
                    model_id: "m".into(),
                    tier: ModelTier::Large,
                    parameter_count: 0,
                    warm_pool_floor: None,
                },
                BackendSpec {
                    backend_id: "b".into(),
                    throughput_class: 1,
                    latency_class: 1,
                    memory_class: 1,
                },
                ServiceInstance::new("m", "b", 0.01, 1.0).with_replicas(replicas),
            )
            .unwrap();
        let prompt = Prompt::new("p", "prove x");
        let d = select_service(
            &prompt,
            &reg.snapshot(0.0),
            &WeightProfile::balanced(),
            &ClassifierOutput::one_hot(ComplexityClass::High, ClassifierSource::Keyword),
            &RelevanceTable::default(),
            &SelectionOptions::default(),
        )
        .unwrap();
        (reg, d, prompt)
    }

    fn fake(cold_start: f64, fail: bool) -> Fake {
        Fake {
            cold_start,
            fail,
            activations: AtomicU32::new(0),
        }
    }

    #[tokio::test]
    async fn cold_start_wait_is_added_to_ttft() {
        let (reg, d, prompt) = setup(0);
        assert!(d.cold_start);
        let pool = fake(12.0, false);
        let o = dispatch(&d, &prompt, &pool, &reg, 100.0, 60.0).await.unwrap();
        assert_eq!(o.ttft, 12.2);
        assert_eq!(o.latency, 13.0);
        assert_eq!(pool.activations.load(Ordering::SeqCst), 1);
        let samples = reg.telemetry_samples("m:b").unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].timestamp, 113.0);
        assert_eq!(reg.instance("m:b").unwrap().inflight, 0);
    }

    #[tokio::test]
    async fn warm_dispatch_skips_activation() {
        let (reg, d, prompt) = setup(1);
        let pool = fake(12.0, false);
        dispatch(&d, &prompt, &pool, &reg, 0.0, 60.0).await.unwrap();
        assert_eq!(pool.activations.load(Ordering::SeqCst), 0);
    }

    #[tokio::test]
    async fn timeout_and_failure_record_unsuccessful_samples() {
        let (reg, d, prompt) = setup(0);
        let err = dispatch(&d, &prompt, &fake(90.0, false), &reg, 0.0, 60.0)
            .await
            .unwrap_err();
        assert!(matches!(err, DispatchError::ColdStartTimeout { .. }));
        let err = dispatch(&d, &prompt, &fake(1.0, true), &reg, 0.0, 60.0)
            .await
            .unwrap_err();
        assert!(matches!(err, DispatchError::Backend { latency, .. } if latency == 1.5));
        let samples = reg.telemetry_samples("m:b").unwrap();
        assert_eq!(samples.iter().filter(|s| !s.success).count(), 2);
    }
}
