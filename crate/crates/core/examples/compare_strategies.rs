//! Random vs latency-only vs multi-objective on the calibration matrix.
//!
//! cargo run --release --example compare_strategies [scenario.toml] [seed]

use matrix_router::bench::run_comparison;
use matrix_router::sim::{Scenario, Simulation, StrategySpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/calibration.toml").to_string());
    let scenario = Scenario::from_file(&path)?;
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(scenario.seed);
    let horizon = scenario.horizon;
    let sim = Simulation::new(scenario)?;
    let arrivals = sim.arrivals(seed)?;
    let strategies: Vec<StrategySpec> = ["random", "latency-only", "multi-objective:balanced"]
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    let cmp = run_comparison(&sim, &arrivals, &strategies, horizon, seed)?;
    print!("{}", cmp.table.to_text());
    println!();
    for g in cmp.table.gains.iter().filter(|g| g.baseline == "random") {
        println!(
            "{:<26} vs random: accuracy {:+.1}%  latency {:+.1}%  cost {:+.1}%  eta {}",
            g.strategy,
            g.accuracy_pct,
            g.latency_pct,
            g.cost_pct,
            g.efficiency.map_or("-".into(), |e| format!("{e:.3}")),
        );
    }
    Ok(())
}
