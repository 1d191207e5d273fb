//! Workloads: labeled prompts, arrival processes and the JSONL trace format.
//!
//! A trace line looks like
//!
//! ```json
//! {"id":"p17","text":"Prove that ...","arrival_time":3.25,"label":"high","benchmark_tag":"math"}
//! ```
//!
//! `label` and `benchmark_tag` are optional. Lines are sorted by arrival time
//! on load.
//!
//! The synthetic generator plants class-specific vocabulary so that a bag of
//! words model can learn the classes, and prefixes a configurable share of
//! Low and High prompts with the default routing keywords.

use crate::router::{ComplexityClass, Prompt};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// A prompt with its arrival time (in `prompt.arrival_time`) and, when
/// known, its true complexity class.
#[derive(Debug, Clone, PartialEq)]
pub struct Arrival {
    pub prompt: Prompt,
    pub label: Option<ComplexityClass>,
}

impl Arrival {
    pub fn time(&self) -> f64 {
        self.prompt.arrival_time
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub id: String,
    pub text: String,
    pub arrival_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<ComplexityClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark_tag: Option<String>,
}

impl From<&Arrival> for TraceRecord {
    fn from(a: &Arrival) -> Self {
        Self {
            id: a.prompt.id.clone(),
            text: a.prompt.text.clone(),
            arrival_time: a.prompt.arrival_time,
            label: a.label,
            benchmark_tag: a.prompt.benchmark_tag.clone(),
        }
    }
}

impl From<TraceRecord> for Arrival {
    fn from(r: TraceRecord) -> Self {
        Self {
            prompt: Prompt::new(r.id, r.text).with_tag(r.benchmark_tag).at(r.arrival_time),
            label: r.label,
        }
    }
}

pub fn read_trace(path: impl AsRef<Path>) -> io::Result<Vec<Arrival>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TraceRecord = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), n + 1)))?;
        if !rec.arrival_time.is_finite() || rec.arrival_time < 0.0 {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!(
                    "{}:{}: arrival_time must be finite and non-negative",
                    path.display(),
                    n + 1
                ),
            ));
        }
        out.push(Arrival::from(rec));
    }
    out.sort_by(|a, b| a.time().total_cmp(&b.time()));
    Ok(out)
}

pub fn write_trace(path: impl AsRef<Path>, arrivals: &[Arrival]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for a in arrivals {
        serde_json::to_writer(&mut w, &TraceRecord::from(a))?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// When requests arrive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalProcess {
    /// Evenly spaced arrivals at `rate` per second.
    Fixed {
        rate: f64,
    },
    Poisson {
        rate: f64,
    },
    /// Poisson at `rate` during `on` seconds, then silence for `off` seconds.
    Bursty {
        rate: f64,
        on: f64,
        off: f64,
    },
    /// Arrival times and prompts taken from a trace file.
    Replay {
        path: String,
    },
}

impl ArrivalProcess {
    /// Arrival times in `[0, horizon)`; empty for `Replay`.
    pub fn times(&self, horizon: f64, rng: &mut impl Rng) -> Vec<f64> {
        let mut out = Vec::new();
        match *self {
            ArrivalProcess::Fixed { rate } if rate > 0.0 => {
                let mut k = 0u64;
                loop {
                    let t = k as f64 / rate;
                    if t >= horizon {
                        break;
                    }
                    out.push(t);
                    k += 1;
                }
            }
            ArrivalProcess::Poisson { rate } if rate > 0.0 => {
                let exp = Exp::new(rate).expect("positive rate");
                let mut t = exp.sample(rng);
                while t < horizon {
                    out.push(t);
                    t += exp.sample(rng);
                }
            }
            ArrivalProcess::Bursty { rate, on, off } if rate > 0.0 && on > 0.0 && off >= 0.0 => {
                let exp = Exp::new(rate).expect("positive rate");
                let mut start = 0.0;
                while start < horizon {
                    let end = (start + on).min(horizon);
                    let mut t = start + exp.sample(rng);
                    while t < end {
                        out.push(t);
                        t += exp.sample(rng);
                    }
                    start += on + off;
                }
            }
            _ => {}
        }
        out
    }
}

/// Parameters of the synthetic prompt generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptMix {
    /// Class shares for (Low, Medium, High); normalized on use.
    pub shares: [f64; 3],
    /// Share of Low and High prompts that start with a routing keyword.
    pub keyword_rate: f64,
    /// Probability that a content word comes from another class.
    pub overlap: f64,
    /// Inclusive word-count ranges per class.
    pub lengths: [(usize, usize); 3],
}

impl Default for PromptMix {
    fn default() -> Self {
        Self {
            shares: [0.5, 0.3, 0.2],
            keyword_rate: 0.8,
            overlap: 0.25,
            lengths: [(6, 40), (30, 150), (60, 320)],
        }
    }
}

const LOW_WORDS: &[&str] = &[
    "capital",
    "color",
    "name",
    "country",
    "animal",
    "fruit",
    "city",
    "river",
    "planet",
    "author",
    "year",
    "number",
    "letter",
    "word",
    "synonym",
    "opposite",
    "spelling",
    "currency",
    "language",
    "flag",
    "ocean",
    "mountain",
    "month",
    "weekday",
    "shape",
    "element",
    "symbol",
    "sport",
    "instrument",
    "vegetable",
];
const MEDIUM_WORDS: &[&str] = &[
    "compare",
    "summarize",
    "describe",
    "outline",
    "contrast",
    "translate",
    "paragraph",
    "recipe",
    "itinerary",
    "email",
    "review",
    "recommend",
    "pros",
    "cons",
    "plan",
    "schedule",
    "strategy",
    "budget",
    "steps",
    "guide",
    "comparison",
    "overview",
    "classify",
    "rewrite",
    "draft",
    "essay",
    "argument",
    "perspective",
    "report",
    "checklist",
];
const HIGH_WORDS: &[&str] = &[
    "theorem",
    "lemma",
    "induction",
    "asymptotic",
    "complexity",
    "eigenvalue",
    "integral",
    "convergence",
    "invariant",
    "recurrence",
    "optimal",
    "bound",
    "probability",
    "topology",
    "manifold",
    "gradient",
    "equilibrium",
    "polynomial",
    "algorithm",
    "proof",
    "cryptographic",
    "lattice",
    "eigenvector",
    "differential",
    "stochastic",
    "bijection",
    "isomorphism",
    "entropy",
    "hamiltonian",
    "combinatorial",
];
const FILLER: &[&str] = &[
    "the", "a", "of", "for", "and", "in", "with", "about", "this", "that", "please", "what", "is", "given", "each",
    "some", "which", "our", "how", "to",
];
const LOW_PREFIXES: &[&str] = &["List", "Define", "Sum"];
const HIGH_PREFIXES: &[&str] = &["Prove that", "Derive", "Explain why"];
const TAGS: [&[&str]; 3] = [
    &["arc", "hellaswag", "truthfulqa"],
    &["mmlu-pro", "mbpp", "humaneval"],
    &["gsm8k", "math"],
];

fn vocabulary(class: ComplexityClass) -> &'static [&'static str] {
    match class {
        ComplexityClass::Low => LOW_WORDS,
        ComplexityClass::Medium => MEDIUM_WORDS,
        ComplexityClass::High => HIGH_WORDS,
    }
}

pub fn sample_class(mix: &PromptMix, rng: &mut impl Rng) -> ComplexityClass {
    let total: f64 = mix.shares.iter().map(|s| s.max(0.0)).sum();
    let mut u = rng.gen::<f64>() * total;
    for class in ComplexityClass::ALL {
        let s = mix.shares[class.index()].max(0.0);
        if u < s {
            return class;
        }
        u -= s;
    }
    ComplexityClass::High
}

pub fn generate_prompt(id: impl Into<String>, class: ComplexityClass, mix: &PromptMix, rng: &mut impl Rng) -> Prompt {
    let (lo, hi) = mix.lengths[class.index()];
    let n = rng.gen_range(lo.min(hi)..=hi.max(lo)).max(1);
    let mut words: Vec<&str> = Vec::with_capacity(n + 2);
    let keyword = rng.gen_bool(mix.keyword_rate.clamp(0.0, 1.0));
    match class {
        ComplexityClass::Low if keyword => words.push(LOW_PREFIXES.choose(rng).expect("non-empty")),
        ComplexityClass::High if keyword => words.push(HIGH_PREFIXES.choose(rng).expect("non-empty")),
        _ => {}
    }
    for i in 0..n {
        if i % 3 == 1 {
            words.push(FILLER.choose(rng).expect("non-empty"));
            continue;
        }
        let source = if rng.gen_bool(mix.overlap.clamp(0.0, 1.0)) {
            *ComplexityClass::ALL.choose(rng).expect("non-empty")
        } else {
            class
        };
        words.push(vocabulary(source).choose(rng).expect("non-empty"));
    }
    let tag = TAGS[class.index()].choose(rng).map(|t| t.to_string());
    Prompt::new(id, words.join(" ") + "?").with_tag(tag)
}

/// `n` labeled prompts, all arriving at time zero.
pub fn generate_corpus(n: usize, mix: &PromptMix, seed: u64) -> Vec<Arrival> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let class = sample_class(mix, &mut rng);
            Arrival {
                prompt: generate_prompt(format!("p{i}"), class, mix, &mut rng),
                label: Some(class),
            }
        })
        .collect()
}

/// Labeled prompts at the times drawn from `process` over `[0, horizon)`.
pub fn generate_trace(process: &ArrivalProcess, horizon: f64, mix: &PromptMix, seed: u64) -> Vec<Arrival> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let times = process.times(horizon, &mut rng);
    times
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let class = sample_class(mix, &mut rng);
            let mut prompt = generate_prompt(format!("r{i}"), class, mix, &mut rng);
            prompt.arrival_time = t;
            Arrival {
                prompt,
                label: Some(class),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::router::KeywordRuleSet;

    #[test]
    fn keyword_rate_is_respected() {
        let mix = PromptMix::default();
        let corpus = generate_corpus(4000, &mix, 3);
        let rules = KeywordRuleSet::default();
        let mut matched = [0usize; 3];
        let mut total = [0usize; 3];
        for a in &corpus {
            let label = a.label.unwrap();
            total[label.index()] += 1;
            if let Some(c) = rules.matched(&a.prompt) {
                assert_eq!(c, label, "{}", a.prompt.text);
                matched[label.index()] += 1;
            }
        }
        assert_eq!(matched[1], 0);
        for k in [0, 2] {
            let rate = matched[k] as f64 / total[k] as f64;
            assert!((rate - 0.8).abs() < 0.05, "class {k}: {rate}");
        }
        let low_share = total[0] as f64 / corpus.len() as f64;
        assert!((low_share - 0.5).abs() < 0.03);
    }

    #[test]
    fn fixed_and_bursty_processes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = ArrivalProcess::Fixed { rate: 2.0 }.times(10.0, &mut rng);
        assert_eq!(t.len(), 20);
        assert_eq!(t[3], 1.5);
        let b = ArrivalProcess::Bursty {
            rate: 5.0,
            on: 10.0,
            off: 90.0,
        }
        .times(300.0, &mut rng);
        assert!(b.iter().all(|&t| t % 100.0 < 10.0));
        assert!(b.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn trace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let arrivals = generate_trace(&ArrivalProcess::Poisson { rate: 1.0 }, 50.0, &PromptMix::default(), 9);
        write_trace(&path, &arrivals).unwrap();
        assert_eq!(read_trace(&path).unwrap(), arrivals);
    }

    #[test]
    fn traces_are_seed_deterministic() {
        let p = ArrivalProcess::Poisson { rate: 3.0 };
        let mix = PromptMix::default();
        assert_eq!(generate_trace(&p, 20.0, &mix, 5), generate_trace(&p, 20.0, &mix, 5));
        assert_ne!(generate_trace(&p, 20.0, &mix, 5), generate_trace(&p, 20.0, &mix, 6));
    }

    #[test]
    fn rejects_negative_arrival_times() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"id\":\"a\",\"text\":\"x\",\"arrival_time\":-1}\n").unwrap();
        assert!(read_trace(&path).is_err());
    }
}
