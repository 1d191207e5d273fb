//! Sweeps (alpha, lambda, mu) on the calibration scenario and reports the
//! best point for each objective.
//!
//! cargo run --release --example grid_search [scenario.toml]

use matrix_router::bench::{grid_search, weight_grid, DEFAULT_ACCURACY_FLOOR};
use matrix_router::sim::{Scenario, Simulation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/calibration.toml").to_string());
    let scenario = Scenario::from_file(&path)?;
    let (seed, horizon) = (scenario.seed, scenario.horizon);
    let sim = Simulation::new(scenario)?;
    let mut arrivals = sim.arrivals(seed)?;
    arrivals.truncate(2000);
    let grid = weight_grid(&[0.0, 0.5, 1.0]);
    let report = grid_search(&sim, &arrivals, &grid, horizon, seed, DEFAULT_ACCURACY_FLOOR)?;
    for p in &report.points {
        println!(
            "alpha {:.2} lambda {:.2} mu {:.2}  accuracy {:.4}  latency {:>6.3}s  cost/query {:.6}  composite {:.4}",
            p.alpha, p.lambda, p.mu, p.accuracy, p.avg_latency, p.cost_per_query, p.composite
        );
    }
    println!();
    for r in &report.results {
        match r.best.map(|i| &report.points[i]) {
            Some(p) => println!("{:?}: ({}, {}, {})", r.objective, p.alpha, p.lambda, p.mu),
            None => println!("{:?}: {}", r.objective, r.note.as_deref().unwrap_or("infeasible")),
        }
    }
    Ok(())
}
