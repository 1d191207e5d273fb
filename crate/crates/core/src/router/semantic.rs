//! Semantic classification contract and the reference bag-of-words model.

use super::{words, ClassifierOutput, ClassifierSource, ComplexityClass, Prompt, RouterError};
use parking_lot::RwLock;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

pub const ARTIFACT_MAGIC: [u8; 4] = *b"PSLC";
pub const ARTIFACT_VERSION: u32 = 1;

const CLASSES: usize = 3;

/// Anything that maps a prompt to a complexity distribution.
pub trait ComplexityClassifier: Send + Sync {
    fn classify(&self, prompt: &Prompt) -> Result<ClassifierOutput, RouterError>;
}

/// Adapts a closure to [`ComplexityClassifier`].
pub struct FnClassifier<F>(pub F);

impl<F> ComplexityClassifier for FnClassifier<F>
where
    F: Fn(&Prompt) -> Result<ClassifierOutput, RouterError> + Send + Sync,
{
    fn classify(&self, prompt: &Prompt) -> Result<ClassifierOutput, RouterError> {
        (self.0)(prompt)
    }
}

/// Shared, swappable slot holding the current classifier snapshot.
#[derive(Clone, Default)]
pub struct ClassifierHandle {
    slot: Arc<RwLock<Option<Arc<dyn ComplexityClassifier>>>>,
}

impl fmt::Debug for ClassifierHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClassifierHandle")
            .field("loaded", &self.is_loaded())
            .finish()
    }
}

impl ClassifierHandle {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(classifier: Arc<dyn ComplexityClassifier>) -> Self {
        let handle = Self::empty();
        handle.swap(classifier);
        handle
    }

    pub fn load_artifact(path: impl AsRef<Path>) -> Result<Self, RouterError> {
        Ok(Self::new(Arc::new(BagOfWordsModel::read_file(path)?)))
    }

    /// Replaces the classifier; in-flight callers keep the old snapshot.
    pub fn swap(&self, classifier: Arc<dyn ComplexityClassifier>) {
        *self.slot.write() = Some(classifier);
    }

    pub fn unload(&self) {
        *self.slot.write() = None;
    }

    pub fn is_loaded(&self) -> bool {
        self.slot.read().is_some()
    }

    pub fn current(&self) -> Option<Arc<dyn ComplexityClassifier>> {
        self.slot.read().clone()
    }
}

pub fn semantic_classify(prompt: &Prompt, model: &ClassifierHandle) -> Result<ClassifierOutput, RouterError> {
    let classifier = model.current().ok_or(RouterError::ClassifierUnavailable)?;
    let mut out = classifier.classify(prompt)?;
    out.source = ClassifierSource::Semantic;
    Ok(out)
}

/// Numerically stable softmax.
pub fn softmax(logits: [f64; 3]) -> [f64; 3] {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp = logits.map(|z| (z - max).exp());
    let sum: f64 = exp.iter().sum();
    let mut p = exp.map(|e| e / sum);
    // keep the sum within rounding of one and every entry inside [0, 1]
    for v in &mut p {
        *v = v.clamp(0.0, 1.0);
    }
    p
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub feature_dim: usize,
    pub hash_seed: u64,
    pub shuffle_seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            learning_rate: 1.0,
            feature_dim: 1024,
            hash_seed: 0x5eed,
            shuffle_seed: 7,
        }
    }
}

/// Hashed bag-of-words features feeding a 3-class linear softmax layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BagOfWordsModel {
    hash_seed: u64,
    feature_dim: usize,
    /// Row-major `CLASSES x feature_dim`.
    weights: Vec<f64>,
    bias: [f64; CLASSES],
}

type SparseFeatures = Vec<(usize, f64)>;

impl BagOfWordsModel {
    /// All-zero parameters: predicts the uniform distribution.
    pub fn untrained(feature_dim: usize, hash_seed: u64) -> Self {
        assert!(feature_dim > 0, "feature dimension must be positive");
        Self {
            hash_seed,
            feature_dim,
            weights: vec![0.0; CLASSES * feature_dim],
            bias: [0.0; CLASSES],
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn hash_seed(&self) -> u64 {
        self.hash_seed
    }

    /// Term frequencies over hashed buckets.
    pub fn features(&self, text: &str) -> SparseFeatures {
        let mut buckets: Vec<usize> = words(text)
            .map(|w| (fnv1a(self.hash_seed, w.as_bytes()) % self.feature_dim as u64) as usize)
            .collect();
        if buckets.is_empty() {
            return Vec::new();
        }
        let n = buckets.len() as f64;
        buckets.sort_unstable();
        let mut out: SparseFeatures = Vec::new();
        for b in buckets {
            match out.last_mut() {
                Some((last, v)) if *last == b => *v += 1.0,
                _ => out.push((b, 1.0)),
            }
        }
        for (_, v) in &mut out {
            *v /= n;
        }
        out
    }

    fn logits(&self, x: &SparseFeatures) -> [f64; CLASSES] {
        let mut z = self.bias;
        for (k, zk) in z.iter_mut().enumerate() {
            let row = &self.weights[k * self.feature_dim..(k + 1) * self.feature_dim];
            *zk += x.iter().map(|&(j, v)| row[j] * v).sum::<f64>();
        }
        z
    }

    pub fn predict(&self, text: &str) -> ClassifierOutput {
        ClassifierOutput::from_logits(self.logits(&self.features(text)), ClassifierSource::Semantic)
    }

    /// Mini-batch gradient descent on mean cross-entropy.
    pub fn train(examples: &[(String, ComplexityClass)], config: &TrainingConfig) -> Result<Self, RouterError> {
        if config.batch_size == 0 || config.feature_dim == 0 {
            return Err(RouterError::Training(
                "batch size and feature dimension must be positive".into(),
            ));
        }
        for class in ComplexityClass::ALL {
            if !examples.iter().any(|(_, c)| *c == class) {
                return Err(RouterError::Training(format!(
                    "class `{class}` has no training examples"
                )));
            }
        }
        let mut model = Self::untrained(config.feature_dim, config.hash_seed);
        let data: Vec<(SparseFeatures, usize)> = examples.iter().map(|(t, c)| (model.features(t), c.index())).collect();
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
        let dim = config.feature_dim;
        let mut grad_w = vec![0.0; CLASSES * dim];
        let mut touched: Vec<usize> = Vec::new();
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(config.batch_size) {
                let mut grad_b = [0.0; CLASSES];
                for &i in batch {
                    let (x, y) = &data[i];
                    let p = softmax(model.logits(x));
                    for k in 0..CLASSES {
                        let err = p[k] - if k == *y { 1.0 } else { 0.0 };
                        grad_b[k] += err;
                        for &(j, v) in x {
                            grad_w[k * dim + j] += err * v;
                        }
                    }
                    touched.extend(x.iter().map(|&(j, _)| j));
                }
                let scale = config.learning_rate / batch.len() as f64;
                touched.sort_unstable();
                touched.dedup();
                for &j in &touched {
                    for k in 0..CLASSES {
                        model.weights[k * dim + j] -= scale * grad_w[k * dim + j];
                        grad_w[k * dim + j] = 0.0;
                    }
                }
                touched.clear();
                for k in 0..CLASSES {
                    model.bias[k] -= scale * grad_b[k];
                }
            }
        }
        Ok(model)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), RouterError> {
        w.write_all(&ARTIFACT_MAGIC)?;
        w.write_all(&ARTIFACT_VERSION.to_le_bytes())?;
        w.write_all(&self.hash_seed.to_le_bytes())?;
        let dim =
            u32::try_from(self.feature_dim).map_err(|_| RouterError::Artifact("feature dimension too large".into()))?;
        w.write_all(&dim.to_le_bytes())?;
        for v in self.weights.iter().chain(self.bias.iter()) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(20 + 8 * (self.weights.len() + CLASSES));
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, RouterError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != ARTIFACT_MAGIC {
            return Err(RouterError::Artifact("bad magic bytes".into()));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != ARTIFACT_VERSION {
            return Err(RouterError::Artifact(format!("unsupported version {version}")));
        }
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u64buf)?;
        let hash_seed = u64::from_le_bytes(u64buf);
        r.read_exact(&mut u32buf)?;
        let feature_dim = u32::from_le_bytes(u32buf) as usize;
        if feature_dim == 0 {
            return Err(RouterError::Artifact("zero feature dimension".into()));
        }
        let mut read_f64 = || -> Result<f64, RouterError> {
            r.read_exact(&mut u64buf)?;
            Ok(f64::from_le_bytes(u64buf))
        };
        let weights = (0..CLASSES * feature_dim)
            .map(|_| read_f64())
            .collect::<Result<Vec<_>, _>>()?;
        let mut bias = [0.0; CLASSES];
        for b in &mut bias {
            *b = read_f64()?;
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(RouterError::Artifact("non-finite parameter".into()));
        }
        Ok(Self {
            hash_seed,
            feature_dim,
            weights,
            bias,
        })
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), RouterError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self, RouterError> {
        let bytes = std::fs::read(path)?;
        Self::read_from(bytes.as_slice())
    }
}

impl ComplexityClassifier for BagOfWordsModel {
    fn classify(&self, prompt: &Prompt) -> Result<ClassifierOutput, RouterError> {
        Ok(self.predict(&prompt.text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny_corpus() -> Vec<(String, ComplexityClass)> {
        let mut v = Vec::new();
        for i in 0..30 {
            v.push((format!("apple banana cherry item{i}"), ComplexityClass::Low));
            v.push((format!("river mountain valley item{i}"), ComplexityClass::Medium));
            v.push((format!("theorem lemma corollary item{i}"), ComplexityClass::High));
        }
        v
    }

    #[test]
    fn untrained_model_is_uniform() {
        let m = BagOfWordsModel::untrained(64, 1);
        let out = m.classify(&Prompt::new("p", "anything at all")).unwrap();
        for p in out.probabilities {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(out.predicted, ComplexityClass::Low);
    }

    #[test]
    fn unloaded_handle_is_unavailable() {
        let h = ClassifierHandle::empty();
        assert!(matches!(
            semantic_classify(&Prompt::new("p", "x"), &h),
            Err(RouterError::ClassifierUnavailable)
        ));
        h.swap(Arc::new(BagOfWordsModel::untrained(8, 0)));
        assert!(semantic_classify(&Prompt::new("p", "x"), &h).is_ok());
        h.unload();
        assert!(!h.is_loaded());
    }

    #[test]
    fn learns_planted_vocabulary() {
        let model = BagOfWordsModel::train(&tiny_corpus(), &TrainingConfig::default()).unwrap();
        assert_eq!(model.predict("banana cherry").predicted, ComplexityClass::Low);
        assert_eq!(model.predict("valley river").predicted, ComplexityClass::Medium);
        assert_eq!(model.predict("a lemma and a theorem").predicted, ComplexityClass::High);
    }

    #[test]
    fn missing_class_is_a_training_error() {
        let corpus: Vec<_> = tiny_corpus()
            .into_iter()
            .filter(|(_, c)| *c != ComplexityClass::High)
            .collect();
        assert!(matches!(
            BagOfWordsModel::train(&corpus, &TrainingConfig::default()),
            Err(RouterError::Training(_))
        ));
    }

    #[test]
    fn artifact_layout() {
        let model = BagOfWordsModel::train(
            &tiny_corpus(),
            &TrainingConfig {
                feature_dim: 16,
                ..Default::default()
            },
        )
        .unwrap();
        let bytes = model.to_bytes();
        assert_eq!(&bytes[0..4], b"PSLC");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 0x5eed);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 16);
        assert_eq!(bytes.len(), 20 + 8 * (3 * 16 + 3));
        let w0 = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
        assert_eq!(w0, model.weights[0]);
        let last_bias = f64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
        assert_eq!(last_bias, model.bias[2]);
        assert_eq!(BagOfWordsModel::read_from(bytes.as_slice()).unwrap(), model);
    }

    #[test]
    fn corrupt_artifacts_rejected() {
        let mut bytes = BagOfWordsModel::untrained(4, 0).to_bytes();
        assert!(BagOfWordsModel::read_from(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(BagOfWordsModel::read_from(bytes.as_slice()).is_err());
        let mut bytes = BagOfWordsModel::untrained(4, 0).to_bytes();
        bytes[4] = 9;
        assert!(BagOfWordsModel::read_from(bytes.as_slice()).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainingConfig {
            epochs: 5,
            ..Default::default()
        };
        let a = BagOfWordsModel::train(&tiny_corpus(), &cfg).unwrap().to_bytes();
        let b = BagOfWordsModel::train(&tiny_corpus(), &cfg).unwrap().to_bytes();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(a in -50.0f64..50.0, b in -50.0f64..50.0, c in -50.0f64..50.0) {
            let p = softmax([a, b, c]);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn model_outputs_are_distributions(text in "[a-z ]{0,60}") {
            let model = BagOfWordsModel::train(&tiny_corpus(), &TrainingConfig { epochs: 3, ..Default::default() }).unwrap();
            let out = model.predict(&text);
            prop_assert!((out.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
