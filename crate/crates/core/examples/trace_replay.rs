//! Writes a trace, replays it through the simulator under two strategies
//! and prints per-tag success rates and the comparison CSV.
//!
//! cargo run --release --example trace_replay

use matrix_router::bench::{run_comparison, write_outcomes};
use matrix_router::scoring::WeightProfile;
use matrix_router::sim::{Scenario, Simulation, StrategySpec};
use matrix_router::workload::{read_trace, write_trace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::from_file(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/bursty.toml"))?;
    let (seed, horizon) = (scenario.seed, scenario.horizon);
    let sim = Simulation::new(scenario)?;
    let dir = std::env::temp_dir().join("matrix-router-replay");
    std::fs::create_dir_all(&dir)?;

    let trace = dir.join("trace.jsonl");
    write_trace(&trace, &sim.arrivals(seed)?)?;
    let arrivals = read_trace(&trace)?;
    println!("{} arrivals -> {}", arrivals.len(), trace.display());

    let strategies = [
        StrategySpec::random(),
        StrategySpec::multi_objective(WeightProfile::cost_optimized()),
    ];
    let cmp = run_comparison(&sim, &arrivals, &strategies, horizon, seed)?;
    for r in &cmp.reports {
        write_outcomes(dir.join(format!("{}.jsonl", r.strategy.replace(':', "_"))), &r.outcomes)?;
        println!("{}:", r.strategy);
        for (tag, t) in &r.metrics.by_tag {
            println!(
                "  {tag:<8} {:>5} runs  {:>6.2}% success",
                t.runs,
                t.success_rate * 100.0
            );
        }
    }
    print!("{}", cmp.table.to_csv()?);
    Ok(())
}
