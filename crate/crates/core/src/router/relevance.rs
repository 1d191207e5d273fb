use super::{ClassifierOutput, ComplexityClass, RouterError};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Capability tier of a model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTier {
    Small,
    Medium,
    Large,
}

impl ModelTier {
    pub const ALL: [ModelTier; 3] = [ModelTier::Small, ModelTier::Medium, ModelTier::Large];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ModelTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelTier::Small => "small",
            ModelTier::Medium => "medium",
            ModelTier::Large => "large",
        })
    }
}

impl FromStr for ModelTier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "small" => Ok(Self::Small),
            "medium" => Ok(Self::Medium),
            "large" => Ok(Self::Large),
            other => Err(format!("unknown model tier `{other}`")),
        }
    }
}

/// Relevance of each model tier for each complexity class, rows indexed by
/// class `(Low, Medium, High)` and columns by tier `(Small, Medium, Large)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct RelevanceTable {
    rows: [[f64; 3]; 3],
}

impl Default for RelevanceTable {
    fn default() -> Self {
        Self {
            rows: [
                [1.0, 0.8, 0.5], // Low
                [0.5, 1.0, 0.8], // Medium
                [0.2, 0.6, 1.0], // High
            ],
        }
    }
}

impl TryFrom<[[f64; 3]; 3]> for RelevanceTable {
    type Error = RouterError;

    fn try_from(rows: [[f64; 3]; 3]) -> Result<Self, Self::Error> {
        Self::new(rows)
    }
}

impl From<RelevanceTable> for [[f64; 3]; 3] {
    fn from(t: RelevanceTable) -> Self {
        t.rows
    }
}

impl RelevanceTable {
    pub fn new(rows: [[f64; 3]; 3]) -> Result<Self, RouterError> {
        if rows.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(RouterError::InvalidTable("entries must lie in [0, 1]".into()));
        }
        let high = rows[ComplexityClass::High.index()];
        let large = high[ModelTier::Large.index()];
        if high.iter().any(|&v| v > large) {
            return Err(RouterError::InvalidTable(
                "large tier must be the most relevant for high complexity".into(),
            ));
        }
        Ok(Self { rows })
    }

    pub fn get(&self, class: ComplexityClass, tier: ModelTier) -> f64 {
        self.rows[class.index()][tier.index()]
    }

    pub fn column_mean(&self, tier: ModelTier) -> f64 {
        self.rows.iter().map(|r| r[tier.index()]).sum::<f64>() / 3.0
    }
}

/// Expected relevance under the classifier's probability vector.
pub fn relevance(output: &ClassifierOutput, tier: ModelTier, table: &RelevanceTable) -> f64 {
    let r: f64 = ComplexityClass::ALL
        .iter()
        .map(|&c| output.probabilities[c.index()] * table.get(c, tier))
        .sum();
    r.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::router::ClassifierSource;
    use proptest::prelude::*;

    #[test]
    fn one_hot_lookups() {
        let t = RelevanceTable::default();
        let high = ClassifierOutput::one_hot(ComplexityClass::High, ClassifierSource::Keyword);
        let low = ClassifierOutput::one_hot(ComplexityClass::Low, ClassifierSource::Keyword);
        assert_eq!(relevance(&high, ModelTier::Large, &t), 1.0);
        assert_eq!(relevance(&low, ModelTier::Large, &t), 0.5);
        assert_eq!(relevance(&low, ModelTier::Small, &t), 1.0);
    }

    #[test]
    fn uniform_gives_column_mean() {
        let t = RelevanceTable::default();
        let uniform = ClassifierOutput::from_logits([0.0; 3], ClassifierSource::Semantic);
        for tier in ModelTier::ALL {
            assert!((relevance(&uniform, tier, &t) - t.column_mean(tier)).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_tables_rejected() {
        assert!(RelevanceTable::new([[1.0, 0.8, 0.5], [0.5, 1.0, 0.8], [0.2, 1.0, 0.6]]).is_err());
        assert!(RelevanceTable::new([[1.2, 0.8, 0.5], [0.5, 1.0, 0.8], [0.2, 0.6, 1.0]]).is_err());
        let json: Result<RelevanceTable, _> = serde_json::from_str("[[1,1,1],[1,1,1],[1,1,0.5]]");
        assert!(json.is_err());
    }

    fn dist() -> impl Strategy<Value = [f64; 3]> {
        (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0)
            .prop_filter("positive mass", |(a, b, c)| a + b + c > 1e-6)
            .prop_map(|(a, b, c)| {
                let s = a + b + c;
                [a / s, b / s, c / s]
            })
    }

    proptest! {
        #[test]
        fn relevance_is_linear_in_probabilities(p in dist(), q in dist(), a in 0.0f64..=1.0) {
            let t = RelevanceTable::default();
            let mix = [0, 1, 2].map(|i| a * p[i] + (1.0 - a) * q[i]);
            let out = |probs: [f64; 3]| ClassifierOutput {
                probabilities: probs,
                predicted: ComplexityClass::Low,
                source: ClassifierSource::Semantic,
                semantic_probabilities: None,
            };
            for tier in ModelTier::ALL {
                let lhs = relevance(&out(mix), tier, &t);
                let rhs = a * relevance(&out(p), tier, &t) + (1.0 - a) * relevance(&out(q), tier, &t);
                prop_assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }
}
