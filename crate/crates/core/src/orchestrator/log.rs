use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::RoutingDecision;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    Success,
    Failure,
    ColdStartTimeout,
    RoutingUnavailable,
}

/// One line of the decision log. Requests rejected before routing (bad
/// input) are not logged; requests with no healthy service are logged
/// without a decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub request_id: String,
    pub decision: Option<RoutingDecision>,
    pub status: RequestStatus,
    pub ttft: Option<f64>,
    pub latency: Option<f64>,
    pub cost: f64,
}

/// Append-only JSON-lines writer; each entry is flushed as it is written.
pub struct DecisionLog {
    out: Mutex<BufWriter<File>>,
}

impl DecisionLog {
    pub fn create(path: impl AsRef<Path>) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            out: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn append(&self, entry: &LogEntry) -> io::Result<()> {
        let line = serde_json::to_string(entry).map_err(io::Error::other)?;
        let mut out = self.out.lock();
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
        out.flush()
    }
}

pub fn read_log(path: impl AsRef<Path>) -> io::Result<Vec<LogEntry>> {
    BufReader::new(File::open(path)?)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| serde_json::from_str(&l?).map_err(io::Error::other))
        .collect()
}
