use super::{words, ClassifierOutput, ClassifierSource, ComplexityClass, Prompt, RouterError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

/// Whole-word, case-insensitive keyword rules. A keyword may span several
/// words ("explain why"), in which case the words must appear consecutively.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRules")]
pub struct KeywordRuleSet {
    low_keywords: BTreeSet<String>,
    high_keywords: BTreeSet<String>,
}

#[derive(Deserialize)]
struct RawRules {
    #[serde(default)]
    low_keywords: Vec<String>,
    #[serde(default)]
    high_keywords: Vec<String>,
}

impl TryFrom<RawRules> for KeywordRuleSet {
    type Error = RouterError;

    fn try_from(raw: RawRules) -> Result<Self, Self::Error> {
        KeywordRuleSet::new(raw.low_keywords, raw.high_keywords)
    }
}

impl Default for KeywordRuleSet {
    fn default() -> Self {
        Self::new(["sum", "list", "define"], ["prove", "derive", "explain why"]).expect("default rules are disjoint")
    }
}

fn canonical(keyword: &str) -> String {
    words(keyword).collect::<Vec<_>>().join(" ")
}

impl KeywordRuleSet {
    pub fn new<L, H>(low: L, high: H) -> Result<Self, RouterError>
    where
        L: IntoIterator,
        L::Item: AsRef<str>,
        H: IntoIterator,
        H::Item: AsRef<str>,
    {
        let collect = |it: Vec<String>| -> BTreeSet<String> {
            it.iter().map(|k| canonical(k)).filter(|k| !k.is_empty()).collect()
        };
        let low_keywords = collect(low.into_iter().map(|k| k.as_ref().to_string()).collect());
        let high_keywords = collect(high.into_iter().map(|k| k.as_ref().to_string()).collect());
        if let Some(k) = low_keywords.intersection(&high_keywords).next() {
            return Err(RouterError::InvalidRules(format!(
                "`{k}` is both a low and a high keyword"
            )));
        }
        Ok(Self {
            low_keywords,
            high_keywords,
        })
    }

    /// Reads a TOML file with `low_keywords` / `high_keywords` arrays.
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self, RouterError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, RouterError> {
        toml::from_str(text).map_err(|e| RouterError::InvalidRules(e.to_string()))
    }

    pub fn low_keywords(&self) -> impl Iterator<Item = &str> {
        self.low_keywords.iter().map(String::as_str)
    }

    pub fn high_keywords(&self) -> impl Iterator<Item = &str> {
        self.high_keywords.iter().map(String::as_str)
    }

    /// The class decided by a matching rule, `None` when nothing matched.
    /// Prompts matching both sets are `High`.
    pub fn matched(&self, prompt: &Prompt) -> Option<ComplexityClass> {
        let tokens: Vec<String> = words(&prompt.text).collect();
        let hit = |set: &BTreeSet<String>| {
            set.iter().any(|kw| {
                let kw: Vec<&str> = kw.split(' ').collect();
                tokens.windows(kw.len()).any(|w| w.iter().zip(&kw).all(|(a, b)| a == b))
            })
        };
        if hit(&self.high_keywords) {
            Some(ComplexityClass::High)
        } else if hit(&self.low_keywords) {
            Some(ComplexityClass::Low)
        } else {
            None
        }
    }
}

/// One-hot keyword decision; unmatched prompts are `Medium`.
pub fn keyword_classify(prompt: &Prompt, rules: &KeywordRuleSet) -> ClassifierOutput {
    let class = rules.matched(prompt).unwrap_or(ComplexityClass::Medium);
    ClassifierOutput::one_hot(class, ClassifierSource::Keyword)
}
