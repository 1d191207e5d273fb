use crate::orchestrator::{ScalingPolicy, SelectionOptions};
use crate::registry::MatrixConfig;
use crate::router::{
    BagOfWordsModel, ClassifierHandle, ComplexityRouter, KeywordRuleSet, RelevanceTable, RoutingMode, TrainingConfig,
    DEFAULT_CONFIDENCE_THRESHOLD,
};
use crate::workload::{generate_corpus, ArrivalProcess, PromptMix};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::SimError;

/// Response length model. Draws use one uniform `u` and one standard normal
/// `z` per request so every strategy sees the same lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TokenDistribution {
    Fixed { tokens: u32 },
    Uniform { min: u32, max: u32 },
    LogNormal { median: f64, sigma: f64 },
}

impl TokenDistribution {
    pub fn tokens(&self, u: f64, z: f64) -> u32 {
        match *self {
            TokenDistribution::Fixed { tokens } => tokens,
            TokenDistribution::Uniform { min, max } => {
                let (lo, hi) = (min.min(max), min.max(max));
                let span = f64::from(hi - lo) + 1.0;
                (lo + ((u * span).floor() as u32).min(hi - lo)).min(hi)
            }
            TokenDistribution::LogNormal { median, sigma } => {
                (median * (sigma * z).exp()).round().clamp(0.0, f64::from(u32::MAX)) as u32
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            TokenDistribution::Fixed { tokens } => f64::from(tokens),
            TokenDistribution::Uniform { min, max } => (f64::from(min) + f64::from(max)) / 2.0,
            TokenDistribution::LogNormal { median, sigma } => median * (sigma * sigma / 2.0).exp(),
        }
    }
}

fn default_tokens() -> TokenDistribution {
    TokenDistribution::Fixed { tokens: 100 }
}

/// Latency, failure and cost model of one simulated service cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimServiceConfig {
    pub service_id: String,
    pub base_ttft: f64,
    pub per_token_latency: f64,
    #[serde(default = "default_tokens")]
    pub output_tokens: TokenDistribution,
    #[serde(default)]
    pub cold_start_duration: f64,
    #[serde(default)]
    pub failure_probability: f64,
    /// Overrides the matrix cell's unit cost.
    #[serde(default)]
    pub unit_cost: Option<f64>,
    /// Overrides the matrix cell's concurrency.
    #[serde(default)]
    pub concurrency_per_replica: Option<u32>,
    /// Infrastructure cost of one provisioned replica.
    #[serde(default)]
    pub replica_cost_per_hour: f64,
}

impl SimServiceConfig {
    pub fn new(service_id: impl Into<String>, base_ttft: f64, per_token_latency: f64) -> Self {
        Self {
            service_id: service_id.into(),
            base_ttft,
            per_token_latency,
            output_tokens: default_tokens(),
            cold_start_duration: 0.0,
            failure_probability: 0.0,
            unit_cost: None,
            concurrency_per_replica: None,
            replica_cost_per_hour: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |what: &str| Err(SimError::Config(format!("{}: {what}", self.service_id)));
        for (name, v) in [
            ("base_ttft", self.base_ttft),
            ("per_token_latency", self.per_token_latency),
            ("cold_start_duration", self.cold_start_duration),
            ("replica_cost_per_hour", self.replica_cost_per_hour),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be a non-negative number"));
            }
        }
        if !(0.0..=1.0).contains(&self.failure_probability) {
            return bad("failure_probability must be in [0, 1]");
        }
        if self.concurrency_per_replica == Some(0) {
            return bad("concurrency_per_replica must be positive");
        }
        if let TokenDistribution::LogNormal { median, sigma } = self.output_tokens {
            if !(median > 0.0 && sigma >= 0.0) {
                return bad("lognormal needs median > 0 and sigma >= 0");
            }
        }
        Ok(())
    }

    /// Expected latency on an idle warm replica.
    pub fn expected_latency(&self) -> f64 {
        self.base_ttft + self.output_tokens.mean() * self.per_token_latency
    }
}

/// What counts as a valid completion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuccessLimits {
    pub request_timeout: f64,
    pub max_output_tokens: u32,
}

impl Default for SuccessLimits {
    fn default() -> Self {
        Self {
            request_timeout: 120.0,
            max_output_tokens: 2048,
        }
    }
}

/// Where the semantic classifier comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    None,
    /// Load a trained artifact, relative to the scenario file.
    Artifact {
        path: String,
    },
    /// Train the reference model on a synthetic corpus drawn from the
    /// scenario's prompt mix.
    Train {
        corpus_size: usize,
        seed: u64,
        #[serde(default)]
        training: Option<TrainingConfig>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RouterSettings {
    /// Keyword rule file, relative to the scenario file.
    pub keywords: Option<String>,
    pub classifier: ClassifierSpec,
    pub confidence_threshold: f64,
    pub relevance: RelevanceTable,
    pub mode: RoutingMode,
}

impl Default for RouterSettings {
    fn default() -> Self {
        Self {
            keywords: None,
            classifier: ClassifierSpec::None,
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            relevance: RelevanceTable::default(),
            mode: RoutingMode::Hybrid,
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub horizon: f64,
    /// Keep processing in-flight work after the horizon (no new arrivals or
    /// scaling ticks) so every request resolves.
    #[serde(default = "default_true")]
    pub drain: bool,
    #[serde(default)]
    pub record_trace: bool,
    /// Replace configured latency priors and cold-start estimates with the
    /// values implied by the simulated services.
    #[serde(default = "default_true")]
    pub derive_priors: bool,
    /// Replica count per cell under static provisioning; defaults to the
    /// matrix's initial replicas.
    #[serde(default)]
    pub static_replicas: Option<u32>,
    pub arrivals: ArrivalProcess,
    /// Number of arrivals to keep from the generated process, if bounded.
    #[serde(default)]
    pub max_requests: Option<usize>,
    #[serde(default)]
    pub prompts: PromptMix,
    #[serde(default)]
    pub limits: SuccessLimits,
    #[serde(default)]
    pub policy: ScalingPolicy,
    #[serde(default)]
    pub selection: SelectionOptions,
    #[serde(default)]
    pub router: RouterSettings,
    pub matrix: MatrixConfig,
    pub services: Vec<SimServiceConfig>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let s: Scenario = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        let mut s = Self::from_toml_str(&text)?;
        s.base_dir = path.parent().map(Path::to_path_buf);
        Ok(s)
    }

    pub fn resolve(&self, relative: &str) -> PathBuf {
        match &self.base_dir {
            Some(dir) if Path::new(relative).is_relative() => dir.join(relative),
            _ => PathBuf::from(relative),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.horizon > 0.0) {
            return Err(SimError::Config("horizon must be positive".into()));
        }
        self.policy.validate().map_err(SimError::Config)?;
        let cells = self.matrix.cells().map_err(|e| SimError::Config(e.to_string()))?;
        for s in &self.services {
            s.validate()?;
            if !cells.iter().any(|(_, _, inst)| inst.service_id == s.service_id) {
                return Err(SimError::Config(format!(
                    "simulated service `{}` is not in the matrix",
                    s.service_id
                )));
            }
        }
        for (_, _, inst) in &cells {
            if self.service(&inst.service_id).is_none() {
                return Err(SimError::Config(format!(
                    "matrix cell `{}` has no simulated service",
                    inst.service_id
                )));
            }
        }
        Ok(())
    }

    pub fn service(&self, service_id: &str) -> Option<&SimServiceConfig> {
        self.services.iter().find(|s| s.service_id == service_id)
    }

    /// Keyword rules, classifier and relevance table for this scenario.
    pub fn build_router(&self) -> Result<ComplexityRouter, SimError> {
        let rules = match &self.router.keywords {
            Some(p) => KeywordRuleSet::from_toml_file(self.resolve(p)).map_err(|e| SimError::Config(e.to_string()))?,
            None => KeywordRuleSet::default(),
        };
        let classifier = match &self.router.classifier {
            ClassifierSpec::None => ClassifierHandle::empty(),
            ClassifierSpec::Artifact { path } => {
                ClassifierHandle::load_artifact(self.resolve(path)).map_err(|e| SimError::Config(e.to_string()))?
            }
            ClassifierSpec::Train {
                corpus_size,
                seed,
                training,
            } => {
                let corpus: Vec<_> = generate_corpus(*corpus_size, &self.prompts, *seed)
                    .into_iter()
                    .filter_map(|a| a.label.map(|l| (a.prompt.text, l)))
                    .collect();
                let model = BagOfWordsModel::train(&corpus, &training.unwrap_or_default())
                    .map_err(|e| SimError::Config(e.to_string()))?;
                ClassifierHandle::new(Arc::new(model))
            }
        };
        Ok(ComplexityRouter {
            rules,
            classifier,
            relevance: self.router.relevance.clone(),
            confidence_threshold: self.router.confidence_threshold,
            mode: self.router.mode,
        })
    }
}
