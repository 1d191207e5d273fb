//! Metrics, strategy comparison, weight search, classifier training and
//! gateway replay.
//!
//! "Accuracy" throughout is a routing-success proxy: the success flag times
//! the relevance of the chosen tier for the labeled complexity class. Task
//! answers are never graded.

pub mod comparison;
pub mod grid;
pub mod metrics;
pub mod replay;
pub mod train;

pub use comparison::{composite_scores, run_comparison, tabulate, Comparison, ComparisonRow, ComparisonTable, Gain};
pub use grid::{
    grid_search, select_objectives, weight_grid, GridPoint, GridSearchReport, Objective, ObjectiveResult,
    DEFAULT_ACCURACY_FLOOR,
};
pub use metrics::{
    compute_efficiency, compute_metrics, nearest_rank, normalize_radar, FailureKind, MetricsError, MetricsReport,
    OutcomeStatus, RequestOutcome, TagSummary,
};
pub use replay::{replay_gateway, ReplayOptions};
pub use train::{train_reference_classifier, TrainingReport};

use crate::router::RouterError;
use crate::sim::SimError;
use serde::Serialize;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Router(#[from] RouterError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("http: {0}")]
    Http(String),
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Io(e.to_string())
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, BenchError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<(), BenchError> {
    let mut w = create(path.as_ref())?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| BenchError::Io(e.to_string()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<(), BenchError> {
    let mut w = create(path.as_ref())?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

/// One JSON object per line.
pub fn write_outcomes(path: impl AsRef<Path>, outcomes: &[RequestOutcome]) -> Result<(), BenchError> {
    let mut w = create(path.as_ref())?;
    for o in outcomes {
        serde_json::to_writer(&mut w, o).map_err(|e| BenchError::Io(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
