use crate::router::{argmax, BagOfWordsModel, ComplexityClass, TrainingConfig};
use crate::workload::Arrival;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BenchError;

pub const HOLDOUT_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub train_size: usize,
    pub holdout_size: usize,
    pub holdout_accuracy: f64,
    /// Held-out accuracy per class, `None` where the class is absent.
    pub per_class: [Option<f64>; 3],
    pub config: TrainingConfig,
}

/// Trains on a shuffled 90% of the labeled prompts and scores the rest.
/// Unlabeled prompts are ignored. The split uses `split_seed`, training
/// uses the config's own shuffle seed, so reruns produce identical bytes.
pub fn train_reference_classifier(
    corpus: &[Arrival],
    config: &TrainingConfig,
    split_seed: u64,
) -> Result<(BagOfWordsModel, TrainingReport), BenchError> {
    let mut labeled: Vec<(String, ComplexityClass)> = corpus
        .iter()
        .filter_map(|a| a.label.map(|c| (a.prompt.text.clone(), c)))
        .collect();
    if labeled.len() < 2 {
        return Err(BenchError::Usage("corpus needs at least two labeled prompts".into()));
    }
    labeled.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));
    let holdout_size = ((labeled.len() as f64 * HOLDOUT_FRACTION).round() as usize).clamp(1, labeled.len() - 1);
    let (holdout, train) = labeled.split_at(holdout_size);
    let model = BagOfWordsModel::train(train, config)?;
    let mut hits = [0usize; 3];
    let mut seen = [0usize; 3];
    for (text, class) in holdout {
        seen[class.index()] += 1;
        if argmax(&model.predict(text).probabilities) == class.index() {
            hits[class.index()] += 1;
        }
    }
    let per_class = std::array::from_fn(|k| (seen[k] > 0).then(|| hits[k] as f64 / seen[k] as f64));
    let report = TrainingReport {
        train_size: train.len(),
        holdout_size,
        holdout_accuracy: hits.iter().sum::<usize>() as f64 / holdout_size as f64,
        per_class,
        config: *config,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{generate_corpus, PromptMix};

    #[test]
    fn planted_corpus_is_learnable() {
        let corpus = generate_corpus(1500, &PromptMix::default(), 3);
        let (_, report) = train_reference_classifier(&corpus, &TrainingConfig::default(), 1).unwrap();
        assert_eq!(report.holdout_size, 150);
        assert!(report.holdout_accuracy >= 0.95, "{report:?}");
    }

    #[test]
    fn zero_epochs_is_uniform() {
        let mix = PromptMix {
            shares: [1.0, 1.0, 1.0],
            ..PromptMix::default()
        };
        let corpus = generate_corpus(600, &mix, 3);
        let config = TrainingConfig {
            epochs: 0,
            ..TrainingConfig::default()
        };
        let (model, report) = train_reference_classifier(&corpus, &config, 1).unwrap();
        let p = model.predict("prove the theorem").probabilities;
        assert!(p.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-12));
        // argmax of a uniform distribution is always Low
        assert_eq!(report.per_class[0], Some(1.0));
        assert_eq!(report.per_class[1], Some(0.0));
    }

    #[test]
    fn retraining_is_byte_identical() {
        let corpus = generate_corpus(300, &PromptMix::default(), 5);
        let config = TrainingConfig {
            epochs: 5,
            ..TrainingConfig::default()
        };
        let (a, _) = train_reference_classifier(&corpus, &config, 9).unwrap();
        let (b, _) = train_reference_classifier(&corpus, &config, 9).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn missing_class_is_rejected() {
        let mix = PromptMix {
            shares: [1.0, 0.0, 1.0],
            ..PromptMix::default()
        };
        let corpus = generate_corpus(100, &mix, 1);
        assert!(train_reference_classifier(&corpus, &TrainingConfig::default(), 1).is_err());
    }
}
