//! Multi-objective scoring over normalized relevance, latency and cost.
//!
//! Every candidate service is reduced to three goodness scores in `[0, 1]`
//! (higher is better) which are combined with convex weights derived from an
//! operator's non-negative preference coefficients. The combined score is
//! therefore also bounded in `[0, 1]`.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Guard against degenerate `min == max` normalization windows.
pub const NORMALIZATION_EPSILON: f64 = 1e-9;

/// Scores closer than this are treated as equal by [`select_best`].
pub const SCORE_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoringError {
    #[error("invalid weight profile `{name}`: {reason}")]
    InvalidProfile { name: String, reason: String },
    #[error("score component `{component}` = {value} is outside [0, 1]")]
    ComponentOutOfRange { component: &'static str, value: f64 },
    #[error("no healthy service available")]
    NoHealthyService,
}

/// Named preference triple `(alpha, lambda, mu)` for relevance, latency and cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    pub name: String,
    pub alpha: f64,
    pub lambda: f64,
    pub mu: f64,
}

/// Convex weights obtained from a [`WeightProfile`]; they sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub relevance: f64,
    pub latency: f64,
    pub cost: f64,
}

impl WeightProfile {
    pub fn new(name: impl Into<String>, alpha: f64, lambda: f64, mu: f64) -> Result<Self, ScoringError> {
        let profile = Self {
            name: name.into(),
            alpha,
            lambda,
            mu,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Accuracy first: `(1.0, 0.1, 0.1)`.
    pub fn quality() -> Self {
        Self::preset("quality", 1.0, 0.1, 0.1)
    }

    /// Resource efficiency first: `(0.3, 0.2, 0.8)`.
    pub fn cost_optimized() -> Self {
        Self::preset("cost", 0.3, 0.2, 0.8)
    }

    /// Latency first: `(0.3, 0.8, 0.2)`.
    pub fn speed_optimized() -> Self {
        Self::preset("speed", 0.3, 0.8, 0.2)
    }

    /// Moderate preferences: `(0.5, 0.3, 0.3)`.
    pub fn balanced() -> Self {
        Self::preset("balanced", 0.5, 0.3, 0.3)
    }

    /// The four operator profiles shipped by default.
    pub fn defaults() -> Vec<Self> {
        vec![
            Self::quality(),
            Self::cost_optimized(),
            Self::speed_optimized(),
            Self::balanced(),
        ]
    }

    fn preset(name: &str, alpha: f64, lambda: f64, mu: f64) -> Self {
        Self {
            name: name.to_string(),
            alpha,
            lambda,
            mu,
        }
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        let invalid = |reason: &str| ScoringError::InvalidProfile {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        for (label, v) in [("alpha", self.alpha), ("lambda", self.lambda), ("mu", self.mu)] {
            if !v.is_finite() {
                return Err(invalid(&format!("{label} is not finite")));
            }
            if v < 0.0 {
                return Err(invalid(&format!("{label} is negative")));
            }
        }
        if self.alpha + self.lambda + self.mu <= 0.0 {
            return Err(invalid("coefficients sum to zero"));
        }
        Ok(())
    }

    pub fn weights(&self) -> Result<Weights, ScoringError> {
        normalize_weights(self)
    }

    /// Same profile with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            name: self.name.clone(),
            alpha: self.alpha * factor,
            lambda: self.lambda * factor,
            mu: self.mu * factor,
        }
    }
}

/// Divides each coefficient by the coefficient sum.
pub fn normalize_weights(profile: &WeightProfile) -> Result<Weights, ScoringError> {
    profile.validate()?;
    let sum = profile.alpha + profile.lambda + profile.mu;
    Ok(Weights {
        relevance: profile.alpha / sum,
        latency: profile.lambda / sum,
        cost: profile.mu / sum,
    })
}

impl Weights {
    pub fn score(&self, c: &ScoreComponents) -> f64 {
        let raw = self.relevance * c.relevance_hat + self.latency * c.latency_hat + self.cost * c.cost_hat;
        // rounding can push a convex combination of ones a few ulp past 1
        raw.clamp(0.0, 1.0)
    }
}

/// Rolling min/max state backing the `norm(.)` operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub metric_min: f64,
    pub metric_max: f64,
    pub sample_count: u64,
    pub window_duration: f64,
}

impl Default for NormalizationStats {
    fn default() -> Self {
        Self::empty(300.0)
    }
}

impl NormalizationStats {
    pub fn empty(window_duration: f64) -> Self {
        Self {
            metric_min: f64::INFINITY,
            metric_max: f64::NEG_INFINITY,
            sample_count: 0,
            window_duration,
        }
    }

    pub fn from_values(values: impl IntoIterator<Item = f64>, window_duration: f64) -> Self {
        let mut stats = Self::empty(window_duration);
        for v in values {
            stats.observe(v);
        }
        stats
    }

    pub fn observe(&mut self, value: f64) {
        self.metric_min = self.metric_min.min(value);
        self.metric_max = self.metric_max.max(value);
        self.sample_count += 1;
    }

    /// Union of two sample sets.
    pub fn merge(&self, other: &Self) -> Self {
        Self {
            metric_min: self.metric_min.min(other.metric_min),
            metric_max: self.metric_max.max(other.metric_max),
            sample_count: self.sample_count + other.sample_count,
            window_duration: self.window_duration.max(other.window_duration),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.sample_count == 0
    }
}

/// Min-max normalization clamped to `[0, 1]`; returns the neutral `0.5`
/// when fewer than two samples exist or the range is degenerate.
pub fn normalize_metric(value: f64, stats: &NormalizationStats) -> f64 {
    if stats.sample_count < 2 {
        return 0.5;
    }
    let range = stats.metric_max - stats.metric_min;
    if !(range >= NORMALIZATION_EPSILON) {
        return 0.5;
    }
    if value.is_nan() {
        return 0.5;
    }
    ((value - stats.metric_min) / range).clamp(0.0, 1.0)
}

/// Normalized relevance, latency goodness and cost goodness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreComponents {
    pub relevance_hat: f64,
    pub latency_hat: f64,
    pub cost_hat: f64,
}

impl ScoreComponents {
    pub fn new(relevance_hat: f64, latency_hat: f64, cost_hat: f64) -> Result<Self, ScoringError> {
        let c = Self {
            relevance_hat,
            latency_hat,
            cost_hat,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        for (component, value) in [
            ("relevance_hat", self.relevance_hat),
            ("latency_hat", self.latency_hat),
            ("cost_hat", self.cost_hat),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ScoringError::ComponentOutOfRange { component, value });
            }
        }
        Ok(())
    }
}

/// Convex combination `w_R * R + w_T * T + w_C * C`.
pub fn score(components: &ScoreComponents, profile: &WeightProfile) -> Result<f64, ScoringError> {
    components.validate()?;
    Ok(normalize_weights(profile)?.score(components))
}

/// Unnormalized `alpha * R - lambda * T - mu * C` over raw relevance,
/// latency (seconds) and cost. Kept for comparison runs only; unbounded.
pub fn legacy_score(relevance: f64, latency: f64, cost: f64, profile: &WeightProfile) -> f64 {
    profile.alpha * relevance - profile.lambda * latency - profile.mu * cost
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    #[default]
    Normalized,
    Legacy,
}

/// One entry considered by [`select_best`].
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub service_id: String,
    pub components: ScoreComponents,
    /// Tie-break key; lower wins.
    pub raw_cost: f64,
}

/// Orders two `(score, raw_cost, id)` triples; `Greater` means `a` is preferred.
pub fn compare_ranked(a: (f64, f64, &str), b: (f64, f64, &str)) -> Ordering {
    if (a.0 - b.0).abs() > SCORE_TIE_TOLERANCE {
        return a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal);
    }
    match b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal) {
        Ordering::Equal => b.2.cmp(a.2),
        other => other,
    }
}

/// Argmax of the score; ties go to the lower raw cost, then to the
/// lexicographically smaller service id.
pub fn select_best<'a>(candidates: &'a [Candidate], weights: &Weights) -> Result<&'a Candidate, ScoringError> {
    let mut best: Option<(&Candidate, f64)> = None;
    for c in candidates {
        let s = weights.score(&c.components);
        best = match best {
            None => Some((c, s)),
            Some((b, bs)) => {
                if compare_ranked((s, c.raw_cost, &c.service_id), (bs, b.raw_cost, &b.service_id)) == Ordering::Greater
                {
                    Some((c, s))
                } else {
                    Some((b, bs))
                }
            }
        };
    }
    best.map(|(c, _)| c).ok_or(ScoringError::NoHealthyService)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn quality_profile_weights() {
        let w = normalize_weights(&WeightProfile::quality()).unwrap();
        assert!(approx(w.relevance, 1.0 / 1.2));
        assert!(approx(w.latency, 0.1 / 1.2));
        assert!(approx(w.cost, 0.1 / 1.2));
        assert!(approx(w.relevance, 0.833_333_333_333_333_4));
    }

    #[test]
    fn balanced_profile_weights() {
        let w = normalize_weights(&WeightProfile::balanced()).unwrap();
        assert!(approx(w.relevance, 0.5 / 1.1));
        assert!(approx(w.latency, 0.3 / 1.1));
        assert!(approx(w.cost, 0.3 / 1.1));
        assert!((w.relevance - 0.4545).abs() < 1e-4);
        assert!((w.latency - 0.2727).abs() < 1e-4);
    }

    #[test]
    fn single_objective_weights() {
        let p = WeightProfile::new("rel", 1.0, 0.0, 0.0).unwrap();
        let w = p.weights().unwrap();
        assert_eq!((w.relevance, w.latency, w.cost), (1.0, 0.0, 0.0));
    }

    #[test]
    fn zero_profile_rejected() {
        assert!(matches!(
            WeightProfile::new("zero", 0.0, 0.0, 0.0),
            Err(ScoringError::InvalidProfile { .. })
        ));
        assert!(WeightProfile::new("neg", -1.0, 1.0, 1.0).is_err());
        assert!(WeightProfile::new("nan", f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn normalize_metric_bounds() {
        let stats = NormalizationStats::from_values([1.0, 3.0, 5.0], 300.0);
        assert_eq!(normalize_metric(1.0, &stats), 0.0);
        assert_eq!(normalize_metric(5.0, &stats), 1.0);
        assert_eq!(normalize_metric(3.0, &stats), 0.5);
        assert_eq!(normalize_metric(-10.0, &stats), 0.0);
        assert_eq!(normalize_metric(10.0, &stats), 1.0);
    }

    #[test]
    fn normalize_metric_cold_cache() {
        assert_eq!(normalize_metric(42.0, &NormalizationStats::empty(300.0)), 0.5);
        let one = NormalizationStats::from_values([2.0], 300.0);
        assert_eq!(normalize_metric(2.0, &one), 0.5);
        let flat = NormalizationStats::from_values([2.0, 2.0 + 1e-12], 300.0);
        assert_eq!(normalize_metric(2.0, &flat), 0.5);
    }

    #[test]
    fn score_examples() {
        let ones = ScoreComponents::new(1.0, 1.0, 1.0).unwrap();
        let zeros = ScoreComponents::new(0.0, 0.0, 0.0).unwrap();
        for p in WeightProfile::defaults() {
            assert!(approx(score(&ones, &p).unwrap(), 1.0));
            assert_eq!(score(&zeros, &p).unwrap(), 0.0);
        }
        let c = ScoreComponents::new(0.9, 0.4, 0.6).unwrap();
        // hand arithmetic: (0.5*0.9 + 0.3*0.4 + 0.3*0.6) / 1.1 = 0.75 / 1.1
        let expected = 0.75 / 1.1;
        assert!(approx(score(&c, &WeightProfile::balanced()).unwrap(), expected));
        assert!((expected - 0.6818).abs() < 1e-4);
    }

    #[test]
    fn out_of_range_component_rejected() {
        assert!(ScoreComponents::new(1.1, 0.0, 0.0).is_err());
        let bad = ScoreComponents {
            relevance_hat: 0.5,
            latency_hat: -0.1,
            cost_hat: 0.5,
        };
        assert!(matches!(
            score(&bad, &WeightProfile::balanced()),
            Err(ScoringError::ComponentOutOfRange {
                component: "latency_hat",
                ..
            })
        ));
    }

    #[test]
    fn legacy_score_is_raw_linear_form() {
        let p = WeightProfile::balanced();
        assert!(approx(legacy_score(1.0, 2.0, 0.02, &p), 0.5 - 0.6 - 0.006));
    }

    fn cand(id: &str, r: f64, t: f64, c: f64, cost: f64) -> Candidate {
        Candidate {
            service_id: id.to_string(),
            components: ScoreComponents::new(r, t, c).unwrap(),
            raw_cost: cost,
        }
    }

    #[test]
    fn select_best_basic() {
        let w = WeightProfile::balanced().weights().unwrap();
        let one = [cand("a", 0.1, 0.1, 0.1, 1.0)];
        assert_eq!(select_best(&one, &w).unwrap().service_id, "a");
        let two = [cand("low", 0.3, 0.3, 0.3, 0.01), cand("high", 0.7, 0.7, 0.7, 0.05)];
        assert_eq!(select_best(&two, &w).unwrap().service_id, "high");
        assert_eq!(select_best(&[], &w), Err(ScoringError::NoHealthyService));
    }

    #[test]
    fn ties_break_on_cost_then_id() {
        let w = WeightProfile::balanced().weights().unwrap();
        let tied = [cand("b", 0.5, 0.5, 0.5, 0.020), cand("a", 0.5, 0.5, 0.5, 0.015)];
        assert_eq!(select_best(&tied, &w).unwrap().service_id, "a");
        let tied = [cand("z", 0.5, 0.5, 0.5, 0.015), cand("y", 0.5, 0.5, 0.5, 0.020)];
        assert_eq!(select_best(&tied, &w).unwrap().service_id, "z");
        let same = [cand("b", 0.5, 0.5, 0.5, 0.01), cand("a", 0.5, 0.5, 0.5, 0.01)];
        assert_eq!(select_best(&same, &w).unwrap().service_id, "a");
    }

    fn unit() -> impl Strategy<Value = f64> {
        0.0f64..=1.0
    }

    fn profile() -> impl Strategy<Value = WeightProfile> {
        (0.0f64..10.0, 0.0f64..10.0, 0.0f64..10.0)
            .prop_filter("non-zero", |(a, l, m)| a + l + m > 1e-6)
            .prop_map(|(a, l, m)| WeightProfile::new("p", a, l, m).unwrap())
    }

    fn candidates() -> impl Strategy<Value = Vec<Candidate>> {
        prop::collection::vec((unit(), unit(), unit(), 0.001f64..0.05), 1..50).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (r, t, c, cost))| cand(&format!("s{i:02}"), r, t, c, cost))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn weights_sum_to_one(p in profile()) {
            let w = p.weights().unwrap();
            prop_assert!((w.relevance + w.latency + w.cost - 1.0).abs() < 1e-12);
            for v in [w.relevance, w.latency, w.cost] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn power_of_two_scaling_is_bit_identical(p in profile(), k in -20i32..20) {
            let scaled = p.scaled(2f64.powi(k));
            prop_assert_eq!(p.weights().unwrap(), scaled.weights().unwrap());
        }

        #[test]
        fn select_best_matches_exhaustive_scan(cs in candidates(), p in profile()) {
            let w = p.weights().unwrap();
            let chosen = select_best(&cs, &w).unwrap();
            let best_score = cs.iter().map(|c| w.score(&c.components)).fold(f64::NEG_INFINITY, f64::max);
            let cs_score = w.score(&chosen.components);
            prop_assert!(cs_score >= best_score - SCORE_TIE_TOLERANCE);
        }

        #[test]
        fn raising_relevance_keeps_the_winner(cs in candidates(), p in profile(), bump in 0.0f64..1.0) {
            let w = p.weights().unwrap();
            let winner = select_best(&cs, &w).unwrap().service_id.clone();
            let mut bumped = cs.clone();
            for c in bumped.iter_mut().filter(|c| c.service_id == winner) {
                c.components.relevance_hat = (c.components.relevance_hat + bump).min(1.0);
            }
            prop_assert_eq!(&select_best(&bumped, &w).unwrap().service_id, &winner);
        }

        #[test]
        fn normalize_metric_is_monotone(values in prop::collection::vec(-100.0f64..100.0, 0..20), a in -200.0f64..200.0, b in -200.0f64..200.0) {
            let stats = NormalizationStats::from_values(values, 300.0);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(normalize_metric(lo, &stats) <= normalize_metric(hi, &stats));
        }
    }
}
