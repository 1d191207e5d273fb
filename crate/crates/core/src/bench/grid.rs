use crate::scoring::{WeightProfile, Weights};
use crate::sim::{SimReport, Simulation, StrategySpec};
use crate::workload::Arrival;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::comparison::composite_scores;
use super::BenchError;

/// Default share of the best reachable accuracy that constrained
/// objectives must keep.
pub const DEFAULT_ACCURACY_FLOOR: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MaxAccuracy,
    MinCost,
    MinLatency,
    MaxComposite,
}

impl Objective {
    pub const ALL: [Objective; 4] = [
        Objective::MaxAccuracy,
        Objective::MinCost,
        Objective::MinLatency,
        Objective::MaxComposite,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: f64,
    pub lambda: f64,
    pub mu: f64,
    pub accuracy: f64,
    pub avg_latency: f64,
    pub cost_per_query: f64,
    pub composite: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveResult {
    pub objective: Objective,
    /// Index into `points`; `None` when no point satisfies the constraint.
    pub best: Option<usize>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchReport {
    pub accuracy_floor: f64,
    pub points: Vec<GridPoint>,
    pub results: Vec<ObjectiveResult>,
}

impl GridSearchReport {
    pub fn best(&self, objective: Objective) -> Option<&GridPoint> {
        self.results
            .iter()
            .find(|r| r.objective == objective)
            .and_then(|r| r.best)
            .map(|i| &self.points[i])
    }

    pub fn to_csv(&self) -> Result<String, BenchError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &self.points {
            w.serialize(p)?;
        }
        let bytes = w.into_inner().map_err(|e| BenchError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| BenchError::Io(e.to_string()))
    }
}

/// All `(alpha, lambda, mu)` combinations of `values` except all-zero,
/// keeping one representative per direction (scaled duplicates score the
/// same).
pub fn weight_grid(values: &[f64]) -> Vec<WeightProfile> {
    let mut seen: Vec<Weights> = Vec::new();
    let mut out = Vec::new();
    for &a in values {
        for &l in values {
            for &m in values {
                let Ok(p) = WeightProfile::new(format!("grid({a},{l},{m})"), a, l, m) else {
                    continue;
                };
                let w = p.weights().expect("validated");
                let dup = seen.iter().any(|s| {
                    (s.relevance - w.relevance).abs() < 1e-12
                        && (s.latency - w.latency).abs() < 1e-12
                        && (s.cost - w.cost).abs() < 1e-12
                });
                if !dup {
                    seen.push(w);
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Evaluates every profile with multi-objective routing on the same trace
/// and picks the best point per objective. Constrained objectives consider
/// only points whose accuracy is at least `accuracy_floor` times the best.
pub fn grid_search(
    sim: &Simulation,
    arrivals: &[Arrival],
    grid: &[WeightProfile],
    horizon: f64,
    seed: u64,
    accuracy_floor: f64,
) -> Result<GridSearchReport, BenchError> {
    if grid.is_empty() {
        return Err(BenchError::Usage("weight grid is empty".into()));
    }
    let reports: Vec<SimReport> = grid
        .par_iter()
        .map(|p| sim.run(arrivals, &StrategySpec::multi_objective(p.clone()), horizon, seed))
        .collect::<Result<_, _>>()?;
    let composite = composite_scores(&reports, &WeightProfile::balanced().weights().expect("valid"));
    let points: Vec<GridPoint> = grid
        .iter()
        .zip(&reports)
        .zip(&composite)
        .map(|((p, r), &c)| GridPoint {
            alpha: p.alpha,
            lambda: p.lambda,
            mu: p.mu,
            accuracy: r.metrics.accuracy.unwrap_or(0.0),
            avg_latency: r.metrics.avg_latency.unwrap_or(f64::INFINITY),
            cost_per_query: r.metrics.cost_per_query,
            composite: c,
        })
        .collect();
    Ok(select_objectives(points, accuracy_floor))
}

/// Argmax per objective over already-evaluated points; ties go to the
/// earliest point.
pub fn select_objectives(points: Vec<GridPoint>, accuracy_floor: f64) -> GridSearchReport {
    let best_acc = points.iter().map(|p| p.accuracy).fold(f64::NEG_INFINITY, f64::max);
    let floor = best_acc * accuracy_floor;
    let argbest = |keep: &dyn Fn(&GridPoint) -> bool, key: &dyn Fn(&GridPoint) -> f64| {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate().filter(|(_, p)| keep(p)) {
            let k = key(p);
            if best.map_or(true, |(_, b)| k > b) {
                best = Some((i, k));
            }
        }
        best.map(|(i, _)| i)
    };
    let results = Objective::ALL
        .iter()
        .map(|&objective| {
            let best = match objective {
                Objective::MaxAccuracy => argbest(&|_| true, &|p| p.accuracy),
                Objective::MinCost => argbest(&|p| p.accuracy >= floor, &|p| -p.cost_per_query),
                Objective::MinLatency => argbest(&|p| p.accuracy >= floor, &|p| -p.avg_latency),
                Objective::MaxComposite => argbest(&|_| true, &|p| p.composite),
            };
            ObjectiveResult {
                objective,
                best,
                note: best.is_none().then(|| format!("no point reaches accuracy {floor:.4}")),
            }
        })
        .collect();
    GridSearchReport {
        accuracy_floor,
        points,
        results,
    }
}
