//! Trains the bag-of-words complexity classifier, round-trips the artifact
//! and routes a few prompts in hybrid mode.
//!
//! cargo run --release --example train_classifier

use matrix_router::bench::train_reference_classifier;
use matrix_router::router::{BagOfWordsModel, ClassifierHandle, ComplexityRouter, Prompt, TrainingConfig};
use matrix_router::workload::{generate_corpus, PromptMix};
use std::sync::Arc;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_corpus(3000, &PromptMix::default(), 11);
    let (model, report) = train_reference_classifier(&corpus, &TrainingConfig::default(), 11)?;
    println!(
        "trained on {}, held-out accuracy {:.4} on {} (per class {:?})",
        report.train_size, report.holdout_accuracy, report.holdout_size, report.per_class
    );

    let path = std::env::temp_dir().join("complexity-classifier.bin");
    model.write_file(&path)?;
    let loaded = BagOfWordsModel::read_file(&path)?;
    assert_eq!(loaded.to_bytes(), model.to_bytes());
    println!("artifact {} ({} bytes)", path.display(), model.to_bytes().len());

    let router = ComplexityRouter {
        classifier: ClassifierHandle::new(Arc::new(loaded)),
        ..ComplexityRouter::default()
    };
    for text in [
        "List three colors",
        "Prove that the series diverges",
        "Tell me about Paris",
        "Compare the tradeoffs between two caching strategies for a read-heavy service",
    ] {
        let out = router.classify(&Prompt::new("p", text));
        println!(
            "{:<80} {:?} via {:?} {:.2?}",
            format!("{text:?}"),
            out.predicted,
            out.source,
            out.probabilities
        );
    }
    Ok(())
}
