use crate::registry::{healthy_candidates, CandidatePolicy, ServiceView, Snapshot};
use crate::router::{relevance, ClassifierOutput, Prompt, RelevanceTable};
use crate::scoring::{
    compare_ranked, legacy_score, normalize_metric, NormalizationStats, ScoreComponents, ScoringMode, WeightProfile,
    Weights,
};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use super::OrchestratorError;

/// Latency added to a cold service's estimate when it has no cold-start
/// estimate of its own, seconds.
pub const DEFAULT_COLD_START_SURCHARGE: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionOptions {
    pub cold_start_surcharge: f64,
    pub scoring: ScoringMode,
    pub candidates: CandidatePolicy,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self {
            cold_start_surcharge: DEFAULT_COLD_START_SURCHARGE,
            scoring: ScoringMode::Normalized,
            candidates: CandidatePolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionStrategy {
    #[default]
    MultiObjective,
    LatencyOnly,
    Random,
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionStrategy::MultiObjective => "multi-objective",
            SelectionStrategy::LatencyOnly => "latency-only",
            SelectionStrategy::Random => "random",
        })
    }
}

impl FromStr for SelectionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "multi-objective" | "multiobjective" => Ok(Self::MultiObjective),
            "latency-only" | "latencyonly" | "latency" => Ok(Self::LatencyOnly),
            "random" => Ok(Self::Random),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

/// Everything needed to audit one routing choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub prompt_id: String,
    pub service_id: String,
    pub model_id: String,
    pub backend_id: String,
    pub score: f64,
    pub components: ScoreComponents,
    pub raw_latency: f64,
    pub raw_cost: f64,
    pub classifier_output: ClassifierOutput,
    pub cold_start: bool,
    pub decided_at: f64,
    pub strategy: SelectionStrategy,
    pub scoring: ScoringMode,
    pub profile: String,
    pub weights: Weights,
    pub candidates_considered: usize,
}

struct Scored<'a> {
    view: &'a ServiceView,
    components: ScoreComponents,
    raw_latency: f64,
    raw_cost: f64,
}

/// Expected latency of a service, including the cold-start penalty when it
/// has no ready replica.
pub fn latency_estimate(view: &ServiceView, options: &SelectionOptions) -> f64 {
    let surcharge = if view.is_cold() {
        view.instance
            .cold_start_estimate
            .unwrap_or(options.cold_start_surcharge)
    } else {
        0.0
    };
    view.avg_latency + surcharge
}

fn score_candidates<'a>(
    snapshot: &'a Snapshot,
    output: &ClassifierOutput,
    table: &RelevanceTable,
    options: &SelectionOptions,
) -> Vec<Scored<'a>> {
    let candidates = healthy_candidates(snapshot, &options.candidates);
    let estimates: Vec<f64> = candidates.iter().map(|v| latency_estimate(v, options)).collect();
    let lat_stats = snapshot.latency_norm_stats().merge(&NormalizationStats::from_values(
        estimates.iter().copied(),
        snapshot.window_duration,
    ));
    let cost_stats = snapshot.cost_norm_stats();
    candidates
        .into_iter()
        .zip(estimates)
        .map(|(view, raw_latency)| {
            let raw_cost = view.instance.unit_cost;
            let components = ScoreComponents {
                relevance_hat: relevance(output, view.tier, table).clamp(0.0, 1.0),
                latency_hat: 1.0 - normalize_metric(raw_latency, &lat_stats),
                cost_hat: 1.0 - normalize_metric(raw_cost, &cost_stats),
            };
            Scored {
                view,
                components,
                raw_latency,
                raw_cost,
            }
        })
        .collect()
}

fn decision(
    prompt: &Prompt,
    snapshot: &Snapshot,
    chosen: &Scored<'_>,
    score: f64,
    considered: usize,
    strategy: SelectionStrategy,
    profile: &WeightProfile,
    weights: Weights,
    output: &ClassifierOutput,
    options: &SelectionOptions,
) -> RoutingDecision {
    RoutingDecision {
        prompt_id: prompt.id.clone(),
        service_id: chosen.view.id().to_string(),
        model_id: chosen.view.instance.model_id.clone(),
        backend_id: chosen.view.instance.backend_id.clone(),
        score,
        components: chosen.components,
        raw_latency: chosen.raw_latency,
        raw_cost: chosen.raw_cost,
        classifier_output: output.clone(),
        cold_start: chosen.view.is_cold(),
        decided_at: snapshot.taken_at,
        strategy,
        scoring: options.scoring,
        profile: profile.name.clone(),
        weights,
        candidates_considered: considered,
    }
}

/// Picks the highest-scoring healthy service for `prompt`.
///
/// Ties within the score tolerance go to the lower unit cost, then to the
/// lexicographically smaller service id.
pub fn select_service(
    prompt: &Prompt,
    snapshot: &Snapshot,
    profile: &WeightProfile,
    output: &ClassifierOutput,
    table: &RelevanceTable,
    options: &SelectionOptions,
) -> Result<RoutingDecision, OrchestratorError> {
    let weights = profile.weights()?;
    let scored = score_candidates(snapshot, output, table, options);
    let value = |s: &Scored<'_>| match options.scoring {
        ScoringMode::Normalized => weights.score(&s.components),
        ScoringMode::Legacy => legacy_score(s.components.relevance_hat, s.raw_latency, s.raw_cost, profile),
    };
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scored.iter().enumerate() {
        let v = value(s);
        let better = match best {
            None => true,
            Some((j, bv)) => {
                let b = &scored[j];
                compare_ranked((v, s.raw_cost, s.view.id()), (bv, b.raw_cost, b.view.id())) == Ordering::Greater
            }
        };
        if better {
            best = Some((i, v));
        }
    }
    let (i, v) = best.ok_or(OrchestratorError::RoutingUnavailable)?;
    Ok(decision(
        prompt,
        snapshot,
        &scored[i],
        v,
        scored.len(),
        SelectionStrategy::MultiObjective,
        profile,
        weights,
        output,
        options,
    ))
}

/// Baseline selectors share the candidate set and audit record of
/// [`select_service`]; the logged score is the profile's score of the
/// chosen service.
pub fn select_with<R: Rng + ?Sized>(
    strategy: SelectionStrategy,
    prompt: &Prompt,
    snapshot: &Snapshot,
    profile: &WeightProfile,
    output: &ClassifierOutput,
    table: &RelevanceTable,
    options: &SelectionOptions,
    rng: &mut R,
) -> Result<RoutingDecision, OrchestratorError> {
    let pick = match strategy {
        SelectionStrategy::MultiObjective => return select_service(prompt, snapshot, profile, output, table, options),
        SelectionStrategy::LatencyOnly => |scored: &[Scored<'_>], _: &mut R| {
            scored
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    a.raw_latency
                        .total_cmp(&b.raw_latency)
                        .then(a.raw_cost.total_cmp(&b.raw_cost))
                        .then(a.view.id().cmp(b.view.id()))
                })
                .map(|(i, _)| i)
        },
        SelectionStrategy::Random => {
            |scored: &[Scored<'_>], rng: &mut R| (!scored.is_empty()).then(|| rng.gen_range(0..scored.len()))
        }
    };
    let weights = profile.weights()?;
    let scored = score_candidates(snapshot, output, table, options);
    let i = pick(&scored, rng).ok_or(OrchestratorError::RoutingUnavailable)?;
    let score = weights.score(&scored[i].components);
    Ok(decision(
        prompt,
        snapshot,
        &scored[i],
        score,
        scored.len(),
        strategy,
        profile,
        weights,
        output,
        options,
    ))
}
