//! Prompt complexity estimation and the relevance term of the score.
//!
//! Three classification modes share one output contract,
//! [`ClassifierOutput`]: keyword rules, a semantic classifier behind
//! [`ClassifierHandle`], and a hybrid that lets matched keyword rules
//! short-circuit the semantic path.

mod keyword;
mod relevance;
mod semantic;

pub use keyword::{keyword_classify, KeywordRuleSet};
pub use relevance::{relevance, ModelTier, RelevanceTable};
pub use semantic::{
    semantic_classify, softmax, BagOfWordsModel, ClassifierHandle, ComplexityClassifier, FnClassifier, TrainingConfig,
    ARTIFACT_MAGIC, ARTIFACT_VERSION,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum RouterError {
    #[error("semantic classifier unavailable")]
    ClassifierUnavailable,
    #[error("invalid keyword rules: {0}")]
    InvalidRules(String),
    #[error("invalid relevance table: {0}")]
    InvalidTable(String),
    #[error("invalid classifier output: {0}")]
    InvalidOutput(String),
    #[error("classifier artifact: {0}")]
    Artifact(String),
    #[error("training: {0}")]
    Training(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Splits text into lowercase words on any non-alphanumeric boundary.
pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
}

/// Whitespace-delimited token count.
pub fn count_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Deserialize)]
struct RawPrompt {
    id: String,
    text: String,
    #[serde(default)]
    benchmark_tag: Option<String>,
    #[serde(default)]
    arrival_time: f64,
}

/// An incoming prompt. `token_count` is always recomputed from `text`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawPrompt")]
pub struct Prompt {
    pub id: String,
    pub text: String,
    pub token_count: usize,
    pub benchmark_tag: Option<String>,
    pub arrival_time: f64,
}

impl From<RawPrompt> for Prompt {
    fn from(raw: RawPrompt) -> Self {
        Prompt::new(raw.id, raw.text)
            .with_tag(raw.benchmark_tag)
            .at(raw.arrival_time)
    }
}

impl Prompt {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        Self {
            id: id.into(),
            token_count: count_tokens(&text),
            text,
            benchmark_tag: None,
            arrival_time: 0.0,
        }
    }

    pub fn with_tag(mut self, tag: Option<String>) -> Self {
        self.benchmark_tag = tag;
        self
    }

    pub fn at(mut self, arrival_time: f64) -> Self {
        self.arrival_time = arrival_time;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexityClass {
    Low,
    Medium,
    High,
}

impl ComplexityClass {
    pub const ALL: [ComplexityClass; 3] = [ComplexityClass::Low, ComplexityClass::Medium, ComplexityClass::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn one_hot(self) -> [f64; 3] {
        let mut p = [0.0; 3];
        p[self.index()] = 1.0;
        p
    }
}

impl fmt::Display for ComplexityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComplexityClass::Low => "low",
            ComplexityClass::Medium => "medium",
            ComplexityClass::High => "high",
        })
    }
}

impl FromStr for ComplexityClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Self::Low),
            "medium" => Ok(Self::Medium),
            "high" => Ok(Self::High),
            other => Err(format!("unknown complexity class `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierSource {
    Keyword,
    Semantic,
    Hybrid,
}

/// Probability vector over `(Low, Medium, High)` plus its argmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierOutput {
    pub probabilities: [f64; 3],
    pub predicted: ComplexityClass,
    pub source: ClassifierSource,
    /// Semantic probabilities kept for inspection when a low-confidence
    /// hybrid decision fell back to `Medium`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_probabilities: Option<[f64; 3]>,
}

/// Index of the largest entry; exact ties go to the lowest index.
pub fn argmax(p: &[f64; 3]) -> usize {
    let mut best = 0;
    for i in 1..3 {
        if p[i] > p[best] {
            best = i;
        }
    }
    best
}

impl ClassifierOutput {
    pub fn from_probabilities(probabilities: [f64; 3], source: ClassifierSource) -> Result<Self, RouterError> {
        let sum: f64 = probabilities.iter().sum();
        if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-9 {
            return Err(RouterError::InvalidOutput(format!(
                "{probabilities:?} is not a distribution"
            )));
        }
        Ok(Self {
            predicted: ComplexityClass::from_index(argmax(&probabilities)).expect("index < 3"),
            probabilities,
            source,
            semantic_probabilities: None,
        })
    }

    pub fn from_logits(logits: [f64; 3], source: ClassifierSource) -> Self {
        Self::from_probabilities(softmax(logits), source).expect("softmax yields a distribution")
    }

    pub fn one_hot(class: ComplexityClass, source: ClassifierSource) -> Self {
        Self {
            probabilities: class.one_hot(),
            predicted: class,
            source,
            semantic_probabilities: None,
        }
    }

    pub fn confidence(&self) -> f64 {
        self.probabilities[self.predicted.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoutingMode {
    Keyword,
    Semantic,
    #[default]
    Hybrid,
}

impl FromStr for RoutingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "keyword" => Ok(Self::Keyword),
            "semantic" => Ok(Self::Semantic),
            "hybrid" => Ok(Self::Hybrid),
            other => Err(format!(
                "unknown routing mode `{other}` (expected keyword|semantic|hybrid)"
            )),
        }
    }
}

pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.6;

/// Keyword rules decide matched prompts; the semantic classifier decides
/// the rest. A semantic answer below `confidence_threshold` becomes `Medium`.
pub fn hybrid_classify(
    prompt: &Prompt,
    rules: &KeywordRuleSet,
    model: &ClassifierHandle,
    confidence_threshold: f64,
) -> ClassifierOutput {
    if let Some(class) = rules.matched(prompt) {
        return ClassifierOutput::one_hot(class, ClassifierSource::Keyword);
    }
    match semantic_classify(prompt, model) {
        Ok(out) if out.confidence() >= confidence_threshold => out,
        Ok(out) => ClassifierOutput {
            semantic_probabilities: Some(out.probabilities),
            ..ClassifierOutput::one_hot(ComplexityClass::Medium, ClassifierSource::Hybrid)
        },
        Err(_) => keyword_classify(prompt, rules),
    }
}

/// Half-open token-length buckets: `[0, t1)` Low, `[t1, t2)` Medium, `[t2, inf)` High.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenThresholds {
    pub low_below: usize,
    pub medium_below: usize,
}

impl Default for TokenThresholds {
    fn default() -> Self {
        Self {
            low_below: 64,
            medium_below: 256,
        }
    }
}

pub fn token_bucket(prompt: &Prompt, thresholds: TokenThresholds) -> ComplexityClass {
    debug_assert!(0 < thresholds.low_below && thresholds.low_below < thresholds.medium_below);
    if prompt.token_count < thresholds.low_below {
        ComplexityClass::Low
    } else if prompt.token_count < thresholds.medium_below {
        ComplexityClass::Medium
    } else {
        ComplexityClass::High
    }
}

/// Bundles the rule set, classifier, and relevance table used for live routing.
#[derive(Debug, Clone)]
pub struct ComplexityRouter {
    pub rules: KeywordRuleSet,
    pub classifier: ClassifierHandle,
    pub relevance: RelevanceTable,
    pub confidence_threshold: f64,
    pub mode: RoutingMode,
}

impl Default for ComplexityRouter {
    fn default() -> Self {
        Self {
            rules: KeywordRuleSet::default(),
            classifier: ClassifierHandle::empty(),
            relevance: RelevanceTable::default(),
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            mode: RoutingMode::Hybrid,
        }
    }
}

impl ComplexityRouter {
    pub fn classify(&self, prompt: &Prompt) -> ClassifierOutput {
        self.classify_with(prompt, self.mode)
    }

    /// Semantic mode falls back to keyword rules when no classifier is loaded.
    pub fn classify_with(&self, prompt: &Prompt, mode: RoutingMode) -> ClassifierOutput {
        match mode {
            RoutingMode::Keyword => keyword_classify(prompt, &self.rules),
            RoutingMode::Semantic => {
                semantic_classify(prompt, &self.classifier).unwrap_or_else(|_| keyword_classify(prompt, &self.rules))
            }
            RoutingMode::Hybrid => hybrid_classify(prompt, &self.rules, &self.classifier, self.confidence_threshold),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn prompt_token_count_is_recomputed() {
        let p: Prompt = serde_json::from_str(r#"{"id":"a","text":"one two  three","token_count":99}"#).unwrap();
        assert_eq!(p.token_count, 3);
    }

    #[test]
    fn logits_softmax_example() {
        let out = ClassifierOutput::from_logits([2.0, 0.0, 0.0], ClassifierSource::Semantic);
        // e^2 / (e^2 + 2) and 1 / (e^2 + 2)
        let e2 = 2f64.exp();
        assert!((out.probabilities[0] - e2 / (e2 + 2.0)).abs() < 1e-12);
        assert!((out.probabilities[0] - 0.7870).abs() < 1e-4);
        assert!((out.probabilities[1] - 0.1065).abs() < 1e-4);
        assert!((out.probabilities[2] - 0.1065).abs() < 1e-4);
        assert_eq!(out.predicted, ComplexityClass::Low);
    }

    #[test]
    fn uniform_ties_go_low() {
        let out = ClassifierOutput::from_logits([0.0, 0.0, 0.0], ClassifierSource::Semantic);
        assert_eq!(out.predicted, ComplexityClass::Low);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn token_buckets() {
        let th = TokenThresholds::default();
        let p = |n: usize| Prompt::new("p", vec!["w"; n].join(" "));
        assert_eq!(token_bucket(&p(10), th), ComplexityClass::Low);
        assert_eq!(token_bucket(&p(63), th), ComplexityClass::Low);
        assert_eq!(token_bucket(&p(64), th), ComplexityClass::Medium);
        assert_eq!(token_bucket(&p(256), th), ComplexityClass::High);
        assert_eq!(token_bucket(&p(1000), th), ComplexityClass::High);
    }

    struct Counting {
        calls: AtomicUsize,
        probs: [f64; 3],
    }

    impl ComplexityClassifier for Counting {
        fn classify(&self, _prompt: &Prompt) -> Result<ClassifierOutput, RouterError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            ClassifierOutput::from_probabilities(self.probs, ClassifierSource::Semantic)
        }
    }

    fn counting(probs: [f64; 3]) -> (Arc<Counting>, ClassifierHandle) {
        let c = Arc::new(Counting {
            calls: AtomicUsize::new(0),
            probs,
        });
        (c.clone(), ClassifierHandle::new(c))
    }

    #[test]
    fn hybrid_short_circuits_on_keyword_match() {
        let (c, handle) = counting([0.1, 0.1, 0.8]);
        let rules = KeywordRuleSet::default();
        let out = hybrid_classify(&Prompt::new("p", "list three colors"), &rules, &handle, 0.6);
        assert_eq!(out.predicted, ComplexityClass::Low);
        assert_eq!(out.source, ClassifierSource::Keyword);
        assert_eq!(c.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn hybrid_uses_confident_semantic_output() {
        let (c, handle) = counting([0.1, 0.1, 0.8]);
        let out = hybrid_classify(
            &Prompt::new("p", "tell me about Paris"),
            &KeywordRuleSet::default(),
            &handle,
            0.6,
        );
        assert_eq!(out.predicted, ComplexityClass::High);
        assert_eq!(out.source, ClassifierSource::Semantic);
        assert_eq!(c.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn hybrid_low_confidence_falls_back_to_medium() {
        let (_, handle) = counting([0.4, 0.25, 0.35]);
        let out = hybrid_classify(
            &Prompt::new("p", "tell me about Paris"),
            &KeywordRuleSet::default(),
            &handle,
            0.6,
        );
        assert_eq!(out.predicted, ComplexityClass::Medium);
        assert_eq!(out.source, ClassifierSource::Hybrid);
        assert_eq!(out.semantic_probabilities, Some([0.4, 0.25, 0.35]));
        assert_eq!(argmax(&out.probabilities), out.predicted.index());
    }

    #[test]
    fn hybrid_without_classifier_returns_keyword_result() {
        let out = hybrid_classify(
            &Prompt::new("p", "tell me about Paris"),
            &KeywordRuleSet::default(),
            &ClassifierHandle::empty(),
            0.6,
        );
        assert_eq!(out.predicted, ComplexityClass::Medium);
        assert_eq!(out.source, ClassifierSource::Keyword);
    }

    #[test]
    fn semantic_mode_falls_back_when_unloaded() {
        let router = ComplexityRouter::default();
        let out = router.classify_with(&Prompt::new("p", "prove it"), RoutingMode::Semantic);
        assert_eq!(out.predicted, ComplexityClass::High);
        assert_eq!(out.source, ClassifierSource::Keyword);
    }
}
