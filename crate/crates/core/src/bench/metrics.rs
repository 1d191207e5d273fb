//! Per-request outcomes and the aggregate metrics computed from them.
//!
//! "Accuracy" here is a routing-quality proxy: success times the relevance
//! of the chosen tier for the request's labeled complexity. Grading actual
//! answers would need real models.

use crate::router::{ComplexityClass, ModelTier};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("no outcomes to summarize")]
    Empty,
    #[error("efficiency undefined: {0}")]
    UndefinedEfficiency(String),
    #[error("all values are equal; radar range is degenerate")]
    DegenerateRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Success,
    Failure,
    InFlight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Backend,
    Timeout,
    TokenLimit,
    NoService,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestOutcome {
    pub request_id: String,
    #[serde(default)]
    pub benchmark_tag: Option<String>,
    #[serde(default)]
    pub service_id: Option<String>,
    #[serde(default)]
    pub tier: Option<ModelTier>,
    #[serde(default)]
    pub label: Option<ComplexityClass>,
    #[serde(default)]
    pub predicted: Option<ComplexityClass>,
    pub arrival: f64,
    #[serde(default)]
    pub first_token: Option<f64>,
    #[serde(default)]
    pub end: Option<f64>,
    pub status: OutcomeStatus,
    #[serde(default)]
    pub failure: Option<FailureKind>,
    #[serde(default)]
    pub output_tokens: u32,
    #[serde(default)]
    pub cost: f64,
    #[serde(default)]
    pub cold_start: bool,
    /// Success times relevance of the chosen tier for the label.
    #[serde(default)]
    pub accuracy: Option<f64>,
}

impl RequestOutcome {
    /// Minimal resolved outcome; used for replaying aggregate counts.
    pub fn resolved(request_id: impl Into<String>, success: bool, latency: f64) -> Self {
        Self {
            request_id: request_id.into(),
            benchmark_tag: None,
            service_id: None,
            tier: None,
            label: None,
            predicted: None,
            arrival: 0.0,
            first_token: Some(latency),
            end: Some(latency),
            status: if success {
                OutcomeStatus::Success
            } else {
                OutcomeStatus::Failure
            },
            failure: (!success).then_some(FailureKind::Backend),
            output_tokens: 0,
            cost: 0.0,
            cold_start: false,
            accuracy: None,
        }
    }

    pub fn latency(&self) -> Option<f64> {
        self.end.map(|e| e - self.arrival)
    }

    /// Time to first token, measured from arrival.
    pub fn ttft(&self) -> Option<f64> {
        self.first_token.map(|t| t - self.arrival)
    }

    pub fn is_success(&self) -> bool {
        self.status == OutcomeStatus::Success
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagSummary {
    pub runs: u64,
    pub successes: u64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_total: u64,
    pub n_success: u64,
    pub n_failure: u64,
    pub n_inflight: u64,
    pub success_rate: f64,
    /// Mean latency of successful requests, seconds.
    pub avg_latency: Option<f64>,
    pub ttft_p50: Option<f64>,
    pub ttft_p95: Option<f64>,
    pub ttft_p99: Option<f64>,
    /// Successful completions per second over the observed span.
    pub throughput: f64,
    pub query_cost: f64,
    pub infrastructure_cost: f64,
    pub total_cost: f64,
    pub cost_per_query: f64,
    /// Mean routing accuracy over labeled, resolved requests.
    pub accuracy: Option<f64>,
    pub cold_starts: u64,
    pub by_tag: BTreeMap<String, TagSummary>,
}

impl MetricsReport {
    /// Adds replica-time cost, keeping `total_cost` and `cost_per_query`
    /// consistent.
    pub fn with_infrastructure_cost(mut self, cost: f64) -> Self {
        self.infrastructure_cost = cost;
        self.total_cost = self.query_cost + cost;
        self.cost_per_query = self.total_cost / self.n_total as f64;
        self
    }
}

/// Nearest-rank percentile of an ascending slice: the value at rank
/// `ceil(p/100 * n)`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil().clamp(1.0, n as f64) as usize;
    Some(sorted[rank - 1])
}

pub fn compute_metrics(outcomes: &[RequestOutcome]) -> Result<MetricsReport, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut n_success = 0u64;
    let mut n_failure = 0u64;
    let mut n_inflight = 0u64;
    let mut latency_sum = 0.0;
    let mut ttfts = Vec::with_capacity(outcomes.len());
    let mut query_cost = 0.0;
    let mut acc_sum = 0.0;
    let mut acc_n = 0u64;
    let mut cold_starts = 0u64;
    let mut by_tag: BTreeMap<String, TagSummary> = BTreeMap::new();
    let mut first = f64::INFINITY;
    let mut last = f64::NEG_INFINITY;
    for o in outcomes {
        first = first.min(o.arrival);
        match o.status {
            OutcomeStatus::Success => {
                n_success += 1;
                if let Some(l) = o.latency() {
                    latency_sum += l;
                }
            }
            OutcomeStatus::Failure => n_failure += 1,
            OutcomeStatus::InFlight => n_inflight += 1,
        }
        if let Some(e) = o.end {
            last = last.max(e);
        }
        if let Some(t) = o.ttft() {
            ttfts.push(t);
        }
        query_cost += o.cost;
        if o.status != OutcomeStatus::InFlight {
            if let Some(a) = o.accuracy {
                acc_sum += a;
                acc_n += 1;
            }
        }
        cold_starts += u64::from(o.cold_start);
        if let Some(tag) = &o.benchmark_tag {
            let t = by_tag.entry(tag.clone()).or_insert(TagSummary {
                runs: 0,
                successes: 0,
                success_rate: 0.0,
            });
            t.runs += 1;
            t.successes += u64::from(o.is_success());
        }
    }
    for t in by_tag.values_mut() {
        t.success_rate = t.successes as f64 / t.runs as f64;
    }
    ttfts.sort_by(f64::total_cmp);
    let n_total = outcomes.len() as u64;
    let span = last - first;
    Ok(MetricsReport {
        n_total,
        n_success,
        n_failure,
        n_inflight,
        success_rate: n_success as f64 / n_total as f64,
        avg_latency: (n_success > 0).then(|| latency_sum / n_success as f64),
        ttft_p50: nearest_rank(&ttfts, 50.0),
        ttft_p95: nearest_rank(&ttfts, 95.0),
        ttft_p99: nearest_rank(&ttfts, 99.0),
        throughput: if span > 0.0 { n_success as f64 / span } else { 0.0 },
        query_cost,
        infrastructure_cost: 0.0,
        total_cost: query_cost,
        cost_per_query: query_cost / n_total as f64,
        accuracy: (acc_n > 0).then(|| acc_sum / acc_n as f64),
        cold_starts,
        by_tag,
    })
}

/// Accuracy gain per unit of cost relative to a baseline:
/// `(a_r / a_b) / (c_r / c_b)`.
pub fn compute_efficiency(a_r: f64, a_b: f64, c_r: f64, c_b: f64) -> Result<f64, MetricsError> {
    if !(a_b > 0.0) {
        return Err(MetricsError::UndefinedEfficiency(
            "baseline accuracy must be positive".into(),
        ));
    }
    if !(c_b > 0.0) || !(c_r > 0.0) {
        return Err(MetricsError::UndefinedEfficiency("costs must be positive".into()));
    }
    Ok((a_r / a_b) / (c_r / c_b))
}

/// Min-max scaling onto `[0, 10]`.
pub fn normalize_radar(values: &[f64]) -> Result<Vec<f64>, MetricsError> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.len() < 2 || !(max - min > 0.0) {
        return Err(MetricsError::DegenerateRange);
    }
    Ok(values.iter().map(|x| 10.0 * ((x - min) / (max - min))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(successes: usize, runs: usize) -> Vec<RequestOutcome> {
        (0..runs)
            .map(|i| RequestOutcome::resolved(format!("r{i}"), i < successes, 1.0))
            .collect()
    }

    #[test]
    fn success_rate_from_counts() {
        let m = compute_metrics(&counts(5924, 6595)).unwrap();
        assert!((m.success_rate * 100.0 - 89.8).abs() < 0.05);
        let m = compute_metrics(&counts(126_237, 163_720)).unwrap();
        assert!((m.success_rate * 100.0 - 77.1).abs() < 0.05);
        assert_eq!(m.n_success + m.n_failure + m.n_inflight, m.n_total);
    }

    #[test]
    fn nearest_rank_examples() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(nearest_rank(&v, 50.0), Some(3.0));
        assert_eq!(nearest_rank(&v, 95.0), Some(5.0));
        assert_eq!(nearest_rank(&v, 0.0), Some(1.0));
        assert_eq!(nearest_rank(&[], 50.0), None);
    }

    #[test]
    fn latency_mean_over_successes_only() {
        let mut o = counts(2, 3);
        o[0].end = Some(2.0);
        o[1].end = Some(4.0);
        o[2].end = Some(100.0);
        assert_eq!(compute_metrics(&o).unwrap().avg_latency, Some(3.0));
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(compute_metrics(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(compute_efficiency(0.8, 0.8, 0.02, 0.02).unwrap(), 1.0);
        let eta = compute_efficiency(1.1, 1.0, 0.9, 1.0).unwrap();
        assert!((eta - 1.1 / 0.9).abs() < 1e-15);
        assert!(compute_efficiency(0.5, 0.0, 1.0, 1.0).is_err());
        assert!(compute_efficiency(0.5, 0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn radar_examples() {
        assert_eq!(normalize_radar(&[2.0, 4.0, 6.0]).unwrap(), vec![0.0, 5.0, 10.0]);
        assert_eq!(normalize_radar(&[3.0, 3.0]), Err(MetricsError::DegenerateRange));
        assert_eq!(normalize_radar(&[1.0]), Err(MetricsError::DegenerateRange));
    }

    #[test]
    fn infrastructure_cost_is_folded_in() {
        let mut o = counts(1, 2);
        o[0].cost = 0.01;
        o[1].cost = 0.03;
        let m = compute_metrics(&o).unwrap().with_infrastructure_cost(0.06);
        assert!((m.total_cost - 0.1).abs() < 1e-15);
        assert!((m.cost_per_query - 0.05).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn radar_preserves_order(values in prop::collection::vec(-1e6f64..1e6, 2..40)) {
            prop_assume!(values.iter().any(|v| *v != values[0]));
            let n = normalize_radar(&values).unwrap();
            for i in 0..values.len() {
                prop_assert!((0.0..=10.0).contains(&n[i]));
                for j in 0..values.len() {
                    if values[i] < values[j] {
                        prop_assert!(n[i] <= n[j]);
                    }
                }
            }
        }
    }
}
