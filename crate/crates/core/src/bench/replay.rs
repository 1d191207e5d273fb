use crate::gateway::{ErrorBody, RouteRequest, RouteResponse};
use crate::router::RelevanceTable;
use crate::workload::Arrival;
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

use super::metrics::{FailureKind, OutcomeStatus, RequestOutcome};
use super::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplayOptions {
    /// Maximum requests in flight.
    pub concurrency: usize,
    pub profile: Option<String>,
    pub mode: Option<String>,
    /// Wall seconds per trace second when pacing arrivals; 0 sends as fast
    /// as concurrency allows.
    pub time_scale: f64,
    /// Used to score accuracy from the tier the gateway reports.
    pub relevance: RelevanceTable,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self {
            concurrency: 32,
            profile: None,
            mode: None,
            time_scale: 0.0,
            relevance: RelevanceTable::default(),
        }
    }
}

/// Sends every arrival to `POST {base_url}/v1/route` and converts the
/// responses into outcomes. Timing comes from the gateway's reported TTFT
/// and latency, measured from each request's trace arrival time.
pub async fn replay_gateway(
    base_url: &str,
    arrivals: &[Arrival],
    options: &ReplayOptions,
) -> Result<Vec<RequestOutcome>, BenchError> {
    if options.concurrency == 0 {
        return Err(BenchError::Usage("concurrency must be positive".into()));
    }
    let client = reqwest::Client::new();
    let url = format!("{}/v1/route", base_url.trim_end_matches('/'));
    let start = Instant::now();
    let results: Vec<Result<RequestOutcome, BenchError>> = stream::iter(arrivals.iter().cloned())
        .map(|a| {
            let client = client.clone();
            let url = url.clone();
            async move {
                if options.time_scale > 0.0 {
                    let due = Duration::from_secs_f64(a.time().max(0.0) * options.time_scale);
                    if let Some(wait) = due.checked_sub(start.elapsed()) {
                        tokio::time::sleep(wait).await;
                    }
                }
                send(&client, &url, a, options).await
            }
        })
        .buffered(options.concurrency)
        .collect()
        .await;
    results.into_iter().collect()
}

async fn send(
    client: &reqwest::Client,
    url: &str,
    a: Arrival,
    options: &ReplayOptions,
) -> Result<RequestOutcome, BenchError> {
    let req = RouteRequest {
        prompt: a.prompt.text.clone(),
        profile: options.profile.clone(),
        mode: options.mode.clone(),
        request_id: Some(a.prompt.id.clone()),
    };
    let resp = client
        .post(url)
        .json(&req)
        .send()
        .await
        .map_err(|e| BenchError::Http(e.to_string()))?;
    let status = resp.status();
    let arrival = a.time();
    let mut o = RequestOutcome::resolved(a.prompt.id.clone(), false, 0.0);
    o.benchmark_tag = a.prompt.benchmark_tag.clone();
    o.label = a.label;
    o.arrival = arrival;
    o.first_token = None;
    o.end = None;
    if status.is_success() {
        let r: RouteResponse = resp.json().await.map_err(|e| BenchError::Http(e.to_string()))?;
        o.status = OutcomeStatus::Success;
        o.failure = None;
        o.first_token = Some(arrival + r.ttft);
        o.end = Some(arrival + r.latency);
        o.service_id = r.service_id;
        o.tier = r.tier;
        o.predicted = r.complexity_class;
        o.output_tokens = r.output_tokens;
        o.cost = r.cost;
        o.cold_start = r.cold_start;
        o.accuracy = match (a.label, r.tier) {
            (Some(l), Some(t)) => Some(options.relevance.get(l, t)),
            _ => None,
        };
        return Ok(o);
    }
    if status.is_client_error() {
        let body = resp.text().await.unwrap_or_default();
        return Err(BenchError::Http(format!(
            "request `{}` rejected ({status}): {body}",
            a.prompt.id
        )));
    }
    let body: Option<ErrorBody> = resp.json().await.ok();
    o.service_id = body.as_ref().and_then(|b| b.service_id.clone());
    o.failure = Some(match body.as_ref().map(|b| b.error.as_str()) {
        Some("routing_unavailable") => FailureKind::NoService,
        Some("timeout" | "cold_start_timeout") => FailureKind::Timeout,
        _ => FailureKind::Backend,
    });
    o.accuracy = a.label.map(|_| 0.0);
    Ok(o)
}
