//! Static vs dynamic provisioning on bursty traffic with long idle gaps.
//!
//! cargo run --release --example scale_to_zero [scenario.toml]

use matrix_router::orchestrator::ScaleReason;
use matrix_router::router::ModelTier;
use matrix_router::scoring::WeightProfile;
use matrix_router::sim::{ScalingMode, Scenario, Simulation, StrategySpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/bursty.toml").to_string());
    let scenario = Scenario::from_file(&path)?;
    let (seed, horizon) = (scenario.seed, scenario.horizon);
    let sim = Simulation::new(scenario)?;
    let arrivals = sim.arrivals(seed)?;
    let quality = StrategySpec::multi_objective(WeightProfile::quality());
    for mode in [ScalingMode::Static, ScalingMode::Dynamic] {
        let r = sim.run(&arrivals, &quality.clone().with_scaling(mode), horizon, seed)?;
        let m = &r.metrics;
        println!(
            "{:<8} requests {:>5}  success {:>6.2}%  ttft_p95 {:>6.2}s  cost/query {:.6}  infra {:.4}",
            format!("{mode:?}"),
            m.n_total,
            m.success_rate * 100.0,
            m.ttft_p95.unwrap_or(f64::NAN),
            m.cost_per_query,
            m.infrastructure_cost,
        );
        for (id, s) in r.services.iter().filter(|(_, s)| s.tier == ModelTier::Large) {
            println!(
                "         {id}: replica-seconds {:.0}, cold starts {}, peak {}",
                s.replica_seconds, s.cold_starts, s.peak_replicas
            );
        }
        for e in r
            .scale_events
            .iter()
            .filter(|e| e.reason == Some(ScaleReason::IdleScaleDown))
        {
            println!(
                "         t={:>7.1}  {} {} -> {} (idle)",
                e.time, e.service_id, e.from, e.to
            );
        }
        if let Some(o) = r.outcomes.iter().find(|o| o.cold_start) {
            println!(
                "         first cold request {} ttft {:.2}s",
                o.request_id,
                o.ttft().unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
