use crate::scoring::{normalize_metric, NormalizationStats, WeightProfile, Weights};
use crate::sim::{SimReport, Simulation, StrategySpec};
use crate::workload::Arrival;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::metrics::{compute_efficiency, normalize_radar, OutcomeStatus};
use super::BenchError;

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strategy: String,
    pub n_total: u64,
    pub n_success: u64,
    pub success_rate: f64,
    pub accuracy: f64,
    pub avg_latency: f64,
    pub ttft_p50: Option<f64>,
    pub ttft_p95: Option<f64>,
    pub ttft_p99: Option<f64>,
    pub throughput: f64,
    pub total_cost: f64,
    pub cost_per_query: f64,
    /// Mean per-request score under the balanced profile; see
    /// [`composite_scores`].
    pub composite: f64,
    /// Accuracy per cost relative to the baseline row.
    pub efficiency: Option<f64>,
}

/// Relative change of `strategy` over `baseline`, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gain {
    pub strategy: String,
    pub baseline: String,
    pub accuracy_pct: f64,
    pub latency_pct: f64,
    pub cost_pct: f64,
    pub composite_pct: f64,
    pub efficiency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub scenario: String,
    pub seed: u64,
    pub requests: usize,
    pub baseline: String,
    pub rows: Vec<ComparisonRow>,
    /// Every ordered pair of distinct strategies.
    pub gains: Vec<Gain>,
    /// Radar scores in `[0, 10]` per dimension and strategy; higher is
    /// better. `None` where all strategies tie.
    pub radar: BTreeMap<String, Option<Vec<f64>>>,
}

impl ComparisonTable {
    pub fn row(&self, strategy: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.strategy == strategy)
    }

    pub fn gain(&self, strategy: &str, baseline: &str) -> Option<&Gain> {
        self.gains
            .iter()
            .find(|g| g.strategy == strategy && g.baseline == baseline)
    }

    pub fn to_csv(&self) -> Result<String, BenchError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| BenchError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| BenchError::Io(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "scenario {} | seed {} | {} requests | accuracy = success x tier relevance\n",
            self.scenario, self.seed, self.requests
        );
        out.push_str(&format!(
            "{:<30} {:>8} {:>9} {:>10} {:>9} {:>11} {:>10} {:>7}\n",
            "strategy", "success%", "accuracy", "latency_s", "ttft_p95", "cost/query", "composite", "eta"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<30} {:>8.2} {:>9.4} {:>10.3} {:>9.3} {:>11.6} {:>10.4} {:>7}\n",
                r.strategy,
                r.success_rate * 100.0,
                r.accuracy,
                r.avg_latency,
                r.ttft_p95.unwrap_or(f64::NAN),
                r.cost_per_query,
                r.composite,
                r.efficiency.map_or("-".to_string(), |e| format!("{e:.3}")),
            ));
        }
        out
    }
}

fn pct(new: f64, old: f64) -> f64 {
    if old == 0.0 {
        0.0
    } else {
        (new - old) / old * 100.0
    }
}

/// Per-strategy composite scores with normalization pooled across all
/// reports: each resolved request scores
/// `w_R * accuracy + w_T * (1 - lat_norm) + w_C * (1 - cost_norm)` under
/// `weights`, failures score 0, and a request's cost is its unit cost plus
/// an even share of the run's infrastructure cost.
pub fn composite_scores(reports: &[SimReport], weights: &Weights) -> Vec<f64> {
    let per_request_cost =
        |r: &SimReport, cost: f64| cost + r.metrics.infrastructure_cost / r.metrics.n_total.max(1) as f64;
    let mut lat = NormalizationStats::empty(0.0);
    let mut cost = NormalizationStats::empty(0.0);
    for r in reports {
        for o in r.outcomes.iter().filter(|o| o.is_success()) {
            lat.observe(o.latency().unwrap_or(0.0));
            cost.observe(per_request_cost(r, o.cost));
        }
    }
    reports
        .iter()
        .map(|r| {
            let resolved: Vec<_> = r
                .outcomes
                .iter()
                .filter(|o| o.status != OutcomeStatus::InFlight)
                .collect();
            if resolved.is_empty() {
                return 0.0;
            }
            let total: f64 = resolved
                .iter()
                .filter(|o| o.is_success())
                .map(|o| {
                    weights.relevance * o.accuracy.unwrap_or(1.0)
                        + weights.latency * (1.0 - normalize_metric(o.latency().unwrap_or(0.0), &lat))
                        + weights.cost * (1.0 - normalize_metric(per_request_cost(r, o.cost), &cost))
                })
                .sum();
            total / resolved.len() as f64
        })
        .collect()
}

pub struct Comparison {
    pub table: ComparisonTable,
    pub reports: Vec<SimReport>,
}

/// Runs every strategy over the same arrivals and seed (in parallel) and
/// tabulates them; the first strategy is the baseline.
pub fn run_comparison(
    sim: &Simulation,
    arrivals: &[Arrival],
    strategies: &[StrategySpec],
    horizon: f64,
    seed: u64,
) -> Result<Comparison, BenchError> {
    if strategies.is_empty() {
        return Err(BenchError::Usage("at least one strategy is required".into()));
    }
    let reports = strategies
        .par_iter()
        .map(|s| sim.run(arrivals, s, horizon, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let table = tabulate(&sim.scenario().name, seed, arrivals.len(), &reports)?;
    Ok(Comparison { table, reports })
}

/// Builds the table from finished runs; the first report is the baseline.
pub fn tabulate(
    scenario: &str,
    seed: u64,
    requests: usize,
    reports: &[SimReport],
) -> Result<ComparisonTable, BenchError> {
    let base = reports.first().ok_or_else(|| BenchError::Usage("no reports".into()))?;
    let weights = WeightProfile::balanced().weights().expect("balanced profile is valid");
    let composite = composite_scores(reports, &weights);
    let rows: Vec<ComparisonRow> = reports
        .iter()
        .zip(&composite)
        .map(|(r, &c)| {
            let m = &r.metrics;
            ComparisonRow {
                strategy: r.strategy.clone(),
                n_total: m.n_total,
                n_success: m.n_success,
                success_rate: m.success_rate,
                accuracy: m.accuracy.unwrap_or(0.0),
                avg_latency: m.avg_latency.unwrap_or(0.0),
                ttft_p50: m.ttft_p50,
                ttft_p95: m.ttft_p95,
                ttft_p99: m.ttft_p99,
                throughput: m.throughput,
                total_cost: m.total_cost,
                cost_per_query: m.cost_per_query,
                composite: c,
                efficiency: compute_efficiency(
                    m.accuracy.unwrap_or(0.0),
                    base.metrics.accuracy.unwrap_or(0.0),
                    m.cost_per_query,
                    base.metrics.cost_per_query,
                )
                .ok(),
            }
        })
        .collect();
    let mut gains = Vec::new();
    for a in &rows {
        for b in &rows {
            if a.strategy == b.strategy {
                continue;
            }
            gains.push(Gain {
                strategy: a.strategy.clone(),
                baseline: b.strategy.clone(),
                accuracy_pct: pct(a.accuracy, b.accuracy),
                latency_pct: pct(a.avg_latency, b.avg_latency),
                cost_pct: pct(a.cost_per_query, b.cost_per_query),
                composite_pct: pct(a.composite, b.composite),
                efficiency: compute_efficiency(a.accuracy, b.accuracy, a.cost_per_query, b.cost_per_query).ok(),
            });
        }
    }
    let dims: [(&str, fn(&ComparisonRow) -> f64); 5] = [
        ("accuracy", |r| r.accuracy),
        ("success_rate", |r| r.success_rate),
        ("speed", |r| -r.avg_latency),
        ("economy", |r| -r.cost_per_query),
        ("throughput", |r| r.throughput),
    ];
    let radar = dims
        .iter()
        .map(|(name, f)| {
            let values: Vec<f64> = rows.iter().map(f).collect();
            (name.to_string(), normalize_radar(&values).ok())
        })
        .collect();
    Ok(ComparisonTable {
        scenario: scenario.to_string(),
        seed,
        requests,
        baseline: base.strategy.clone(),
        rows,
        gains,
        radar,
    })
}
