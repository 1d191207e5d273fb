//! Runs a single-service queue with deterministic service times and checks
//! the time-averaged occupancy from the event trace against Little's Law.
//!
//! cargo run --release --example event_trace

use matrix_router::bench::RequestOutcome;
use matrix_router::scoring::WeightProfile;
use matrix_router::sim::{ScalingMode, Scenario, Simulation, StrategySpec};

const SCENARIO: &str = r#"
name = "single-queue"
seed = 5
horizon = 5000.0
record_trace = true

[arrivals]
kind = "poisson"
rate = 1.2

[router]
mode = "keyword"

[matrix]
[[matrix.models]]
id = "m"
tier = "medium"
unit_cost = 0.01
latency_prior = 2.5

[[matrix.backends]]
id = "b"
throughput_class = 2
latency_class = 2
memory_class = 2

[[matrix.cells]]
model = "m"
backend = "b"
replicas = 1
concurrency_per_replica = 4

[[services]]
service_id = "m:b"
base_ttft = 0.5
per_token_latency = 0.02
output_tokens = { kind = "fixed", tokens = 100 }
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sim = Simulation::new(Scenario::from_toml_str(SCENARIO)?)?;
    let arrivals = sim.arrivals(5)?;
    let spec = StrategySpec::multi_objective(WeightProfile::balanced()).with_scaling(ScalingMode::Static);
    let r = sim.run(&arrivals, &spec, sim.scenario().horizon, 5)?;
    let trace = r.trace.as_deref().unwrap_or_default();
    for e in trace.iter().take(8) {
        println!(
            "t={:>8.3} {:<12} {:<6} in service {} / {}  queued {}",
            e.time,
            format!("{:?}", e.kind),
            e.request_id.as_deref().unwrap_or("-"),
            e.in_service,
            e.capacity,
            e.queued
        );
    }
    let (mut area, mut last_t, mut last_n) = (0.0, 0.0, 0.0);
    for e in trace.iter().filter(|e| e.service_id.is_some()) {
        area += last_n * (e.time - last_t);
        (last_t, last_n) = (e.time, f64::from(e.in_service + e.queued));
    }
    let l = area / r.end_time;
    let w = r.outcomes.iter().filter_map(RequestOutcome::latency).sum::<f64>() / r.outcomes.len() as f64;
    let lambda = r.outcomes.len() as f64 / r.end_time;
    println!("... {} events", trace.len());
    println!(
        "utilization {:.3}; L = {l:.4}, lambda * W = {:.4}",
        lambda * 2.5 / 4.0,
        lambda * w
    );
    println!(
        "ttft p50/p95/p99: {:?} {:?} {:?}",
        r.metrics.ttft_p50, r.metrics.ttft_p95, r.metrics.ttft_p99
    );
    Ok(())
}
