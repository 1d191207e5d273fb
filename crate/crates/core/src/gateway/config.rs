use crate::orchestrator::{ScalingPolicy, SelectionOptions};
use crate::registry::MatrixConfig;
use crate::router::{RelevanceTable, RoutingMode, DEFAULT_CONFIDENCE_THRESHOLD};
use crate::scoring::WeightProfile;
use crate::sim::{SimServiceConfig, SuccessLimits};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use super::GatewayError;

pub const ENV_PREFIX: &str = "PS_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatewayMode {
    /// In-process backends driven by the simulator's latency model.
    #[default]
    Simulated,
    /// Forward to the OpenAI-compatible endpoint of each matrix cell.
    Proxy,
}

impl std::str::FromStr for GatewayMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simulated" => Ok(Self::Simulated),
            "proxy" => Ok(Self::Proxy),
            other => Err(format!("unknown gateway mode `{other}` (expected simulated|proxy)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub listen: String,
    pub mode: GatewayMode,
    /// Matrix TOML file, relative to the config file.
    pub matrix: Option<String>,
    pub policy: ScalingPolicy,
    /// Run the scaling loop in the background.
    pub scaling: bool,
    pub profiles: Vec<WeightProfile>,
    pub default_profile: String,
    pub routing_mode: RoutingMode,
    pub confidence_threshold: f64,
    pub relevance: RelevanceTable,
    pub keywords: Option<String>,
    pub classifier: Option<String>,
    pub decision_log: Option<String>,
    /// Include routing metadata (service, class, score) in responses.
    pub expose_routing_metadata: bool,
    pub limits: SuccessLimits,
    /// Seconds a request may wait for a cold service to become ready.
    pub cold_start_timeout: f64,
    pub selection: SelectionOptions,
    /// Simulated mode: backend models per service id.
    pub sim_services: Vec<SimServiceConfig>,
    /// Simulated mode: wall seconds slept per simulated second (0 = none).
    pub time_scale: f64,
    pub seed: u64,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            mode: GatewayMode::Simulated,
            matrix: None,
            policy: ScalingPolicy::default(),
            scaling: true,
            profiles: WeightProfile::defaults(),
            default_profile: "balanced".into(),
            routing_mode: RoutingMode::Hybrid,
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            relevance: RelevanceTable::default(),
            keywords: None,
            classifier: None,
            decision_log: None,
            expose_routing_metadata: true,
            limits: SuccessLimits::default(),
            cold_start_timeout: 60.0,
            selection: SelectionOptions::default(),
            sim_services: Vec::new(),
            time_scale: 0.0,
            seed: 0,
            base_dir: None,
        }
    }
}

impl GatewayConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, GatewayError> {
        toml::from_str(text).map_err(|e| GatewayError::Config(e.to_string()))
    }

    /// Reads the file, then applies `PS_*` environment overrides.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml_str(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf);
        config.apply_overrides(std::env::vars())?;
        config.validate()?;
        Ok(config)
    }

    /// Applies `PS_<FIELD>` overrides for the scalar fields.
    pub fn apply_overrides(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), GatewayError> {
        fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, GatewayError>
        where
            T::Err: std::fmt::Display,
        {
            v.parse()
                .map_err(|e| GatewayError::Config(format!("{ENV_PREFIX}{key}: {e}")))
        }
        for (k, v) in vars {
            let Some(key) = k.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            match key {
                "LISTEN" => self.listen = v,
                "MODE" => self.mode = parse(key, &v)?,
                "MATRIX" => self.matrix = Some(v),
                "CLASSIFIER" => self.classifier = Some(v),
                "KEYWORDS" => self.keywords = Some(v),
                "DECISION_LOG" => self.decision_log = Some(v),
                "DEFAULT_PROFILE" => self.default_profile = v,
                "ROUTING_MODE" => self.routing_mode = parse(key, &v)?,
                "EXPOSE_ROUTING_METADATA" => self.expose_routing_metadata = parse(key, &v)?,
                "SCALING" => self.scaling = parse(key, &v)?,
                "REQUEST_TIMEOUT" => self.limits.request_timeout = parse(key, &v)?,
                "MAX_OUTPUT_TOKENS" => self.limits.max_output_tokens = parse(key, &v)?,
                "COLD_START_TIMEOUT" => self.cold_start_timeout = parse(key, &v)?,
                "TIME_SCALE" => self.time_scale = parse(key, &v)?,
                "SEED" => self.seed = parse(key, &v)?,
                _ => {}
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        self.policy.validate().map_err(GatewayError::Config)?;
        if self.profiles.is_empty() {
            return Err(GatewayError::Config("at least one profile is required".into()));
        }
        for p in &self.profiles {
            p.validate()
                .map_err(|e| GatewayError::Config(format!("profile `{}`: {e}", p.name)))?;
        }
        if self.profile(&self.default_profile).is_none() {
            return Err(GatewayError::Config(format!(
                "default profile `{}` is not defined",
                self.default_profile
            )));
        }
        if !(self.cold_start_timeout >= 0.0) || !(self.limits.request_timeout > 0.0) || !(self.time_scale >= 0.0) {
            return Err(GatewayError::Config(
                "timeouts and time_scale must be non-negative".into(),
            ));
        }
        for s in &self.sim_services {
            s.validate().map_err(|e| GatewayError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn profile(&self, name: &str) -> Option<&WeightProfile> {
        self.profiles.iter().find(|p| p.name == name)
    }

    pub fn resolve(&self, relative: &str) -> PathBuf {
        match &self.base_dir {
            Some(dir) if Path::new(relative).is_relative() => dir.join(relative),
            _ => PathBuf::from(relative),
        }
    }

    pub fn load_matrix(&self) -> Result<MatrixConfig, GatewayError> {
        let path = self
            .matrix
            .as_deref()
            .ok_or_else(|| GatewayError::Config("no matrix file configured".into()))?;
        MatrixConfig::from_file(self.resolve(path)).map_err(|e| GatewayError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = GatewayConfig::default();
        c.validate().unwrap();
        assert_eq!(c.profile("quality").unwrap().alpha, 1.0);
        assert!(c.expose_routing_metadata);
    }

    #[test]
    fn env_overrides_apply() {
        let mut c = GatewayConfig::from_toml_str("mode = \"simulated\"\nlisten = \"0.0.0.0:1\"").unwrap();
        c.apply_overrides([
            ("PS_MODE".to_string(), "proxy".to_string()),
            ("PS_REQUEST_TIMEOUT".to_string(), "30".to_string()),
            ("PS_EXPOSE_ROUTING_METADATA".to_string(), "false".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ])
        .unwrap();
        assert_eq!(c.mode, GatewayMode::Proxy);
        assert_eq!(c.limits.request_timeout, 30.0);
        assert!(!c.expose_routing_metadata);
        assert_eq!(c.listen, "0.0.0.0:1");
        assert!(c
            .apply_overrides([("PS_MODE".to_string(), "both".to_string())])
            .is_err());
    }

    #[test]
    fn unknown_default_profile_is_rejected() {
        let c = GatewayConfig {
            default_profile: "nope".into(),
            ..GatewayConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
