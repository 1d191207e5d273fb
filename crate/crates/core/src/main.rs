use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use matrix_router::bench::{
    self, grid_search, replay_gateway, run_comparison, train_reference_classifier, weight_grid, ReplayOptions,
};
use matrix_router::gateway::{Gateway, GatewayConfig};
use matrix_router::router::TrainingConfig;
use matrix_router::sim::{Scenario, Simulation, StrategySpec};
use matrix_router::workload::{generate_corpus, read_trace, write_trace, Arrival, PromptMix};
use std::path::PathBuf;

#[derive(Parser)]
#[command(version, about = "Multi-objective model x backend routing: simulate, compare, serve")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario (or gateway) TOML file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON-lines trace to replay instead of generating arrivals.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (or file, for single-artifact commands).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one strategy through the simulator.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "multi-objective:balanced")]
        strategy: String,
    },
    /// Run several strategies over the same trace and seed.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated; the first is the baseline.
        #[arg(long, default_value = "random,latency-only,multi-objective:balanced")]
        strategies: String,
        /// Also write per-request outcomes for every strategy.
        #[arg(long)]
        outcomes: bool,
    },
    /// Evaluate a grid of (alpha, lambda, mu) weights.
    GridSearch {
        #[command(flatten)]
        common: Common,
        /// Values used on each axis.
        #[arg(long, default_value = "0,0.25,0.5,0.75,1")]
        values: String,
        /// Constrained objectives keep this share of the best accuracy.
        #[arg(long, default_value_t = bench::grid::DEFAULT_ACCURACY_FLOOR)]
        floor: f64,
    },
    /// Train the bag-of-words classifier and write its artifact.
    TrainClassifier {
        #[command(flatten)]
        common: Common,
        /// Synthetic corpus size when no trace is given.
        #[arg(long, default_value_t = 3000)]
        corpus_size: usize,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Send a trace through a running gateway, or an in-process one.
    ReplayGateway {
        #[command(flatten)]
        common: Common,
        /// Gateway base URL; without it a simulated gateway is started from
        /// --gateway-config.
        #[arg(long)]
        url: Option<String>,
        #[arg(long)]
        gateway_config: Option<PathBuf>,
        #[arg(long, default_value_t = 32)]
        concurrency: usize,
        #[arg(long)]
        profile: Option<String>,
    },
    /// Run the HTTP gateway.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the scenario's generated arrivals as a trace file.
    GenTrace {
        #[command(flatten)]
        common: Common,
    },
}

fn scenario(common: &Common) -> Result<Scenario> {
    let path = common.config.as_ref().context("--config <scenario.toml> is required")?;
    Scenario::from_file(path).with_context(|| format!("loading {}", path.display()))
}

fn arrivals(sim: &Simulation, common: &Common, seed: u64) -> Result<Vec<Arrival>> {
    match &common.trace {
        Some(p) => read_trace(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(sim.arrivals(seed)?),
    }
}

fn out_dir(common: &Common, default: &str) -> Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from(default));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn parse_strategies(list: &str) -> Result<Vec<StrategySpec>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<StrategySpec>().map_err(anyhow::Error::msg))
        .collect()
}

fn horizon(sim: &Simulation, arrivals: &[Arrival]) -> f64 {
    let last = arrivals.last().map_or(0.0, Arrival::time);
    sim.scenario().horizon.max(last + f64::EPSILON)
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Simulate { common, strategy } => {
            let sim = Simulation::new(scenario(&common)?)?;
            let seed = common.seed.unwrap_or(sim.scenario().seed);
            let arrivals = arrivals(&sim, &common, seed)?;
            let spec: StrategySpec = strategy.parse().map_err(anyhow::Error::msg)?;
            let report = sim.run(&arrivals, &spec, horizon(&sim, &arrivals), seed)?;
            let dir = out_dir(&common, "out/simulate")?;
            bench::write_text(dir.join("report.json"), &report.to_json())?;
            bench::write_outcomes(dir.join("outcomes.jsonl"), &report.outcomes)?;
            println!("{}", serde_json::to_string_pretty(&report.metrics)?);
        }
        Command::Compare {
            common,
            strategies,
            outcomes,
        } => {
            let sim = Simulation::new(scenario(&common)?)?;
            let seed = common.seed.unwrap_or(sim.scenario().seed);
            let arrivals = arrivals(&sim, &common, seed)?;
            let cmp = run_comparison(
                &sim,
                &arrivals,
                &parse_strategies(&strategies)?,
                horizon(&sim, &arrivals),
                seed,
            )?;
            let dir = out_dir(&common, "out/compare")?;
            bench::write_text(dir.join("comparison.csv"), &cmp.table.to_csv()?)?;
            bench::write_json(dir.join("comparison.json"), &cmp.table)?;
            bench::write_text(dir.join("comparison.txt"), &cmp.table.to_text())?;
            if outcomes {
                for r in &cmp.reports {
                    let name = r.strategy.replace([':', '+'], "_");
                    bench::write_outcomes(dir.join(format!("outcomes_{name}.jsonl")), &r.outcomes)?;
                }
            }
            print!("{}", cmp.table.to_text());
        }
        Command::GridSearch { common, values, floor } => {
            let sim = Simulation::new(scenario(&common)?)?;
            let seed = common.seed.unwrap_or(sim.scenario().seed);
            let arrivals = arrivals(&sim, &common, seed)?;
            let values: Vec<f64> = values
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .context("--values must be comma-separated numbers")?;
            let grid = weight_grid(&values);
            let report = grid_search(&sim, &arrivals, &grid, horizon(&sim, &arrivals), seed, floor)?;
            let dir = out_dir(&common, "out/grid")?;
            bench::write_text(dir.join("grid.csv"), &report.to_csv()?)?;
            bench::write_json(dir.join("grid.json"), &report)?;
            for r in &report.results {
                match r.best.map(|i| &report.points[i]) {
                    Some(p) => println!(
                        "{:<14} alpha={} lambda={} mu={}  accuracy {:.4}  latency {:.3}s  cost/query {:.6}  composite {:.4}",
                        format!("{:?}", r.objective),
                        p.alpha,
                        p.lambda,
                        p.mu,
                        p.accuracy,
                        p.avg_latency,
                        p.cost_per_query,
                        p.composite
                    ),
                    None => println!("{:<14} infeasible: {}", format!("{:?}", r.objective), r.note.as_deref().unwrap_or("")),
                }
            }
        }
        Command::TrainClassifier {
            common,
            corpus_size,
            epochs,
        } => {
            let seed = common.seed.unwrap_or(0);
            let mix = match &common.config {
                Some(_) => scenario(&common)?.prompts,
                None => PromptMix::default(),
            };
            let corpus = match &common.trace {
                Some(p) => read_trace(p)?,
                None => generate_corpus(corpus_size, &mix, seed),
            };
            let mut config = TrainingConfig::default();
            if let Some(e) = epochs {
                config.epochs = e;
            }
            let (model, report) = train_reference_classifier(&corpus, &config, seed)?;
            let out = common.out.clone().unwrap_or_else(|| PathBuf::from("classifier.bin"));
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            model.write_file(&out)?;
            bench::write_json(out.with_extension("report.json"), &report)?;
            println!(
                "held-out accuracy {:.4} on {} prompts; artifact {}",
                report.holdout_accuracy,
                report.holdout_size,
                out.display()
            );
        }
        Command::ReplayGateway {
            common,
            url,
            gateway_config,
            concurrency,
            profile,
        } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(replay(common, url, gateway_config, concurrency, profile))?;
        }
        Command::Serve { config } => {
            let config = GatewayConfig::load(&config)?;
            let listen = config.listen.clone();
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let gateway = Gateway::from_config(config)?;
                let listener = tokio::net::TcpListener::bind(&listen).await?;
                tracing::info!("listening on {}", listener.local_addr()?);
                gateway.serve(listener).await?;
                anyhow::Ok(())
            })?;
        }
        Command::GenTrace { common } => {
            let sim = Simulation::new(scenario(&common)?)?;
            let seed = common.seed.unwrap_or(sim.scenario().seed);
            let arrivals = sim.arrivals(seed)?;
            let out = common.out.clone().unwrap_or_else(|| PathBuf::from("trace.jsonl"));
            write_trace(&out, &arrivals)?;
            println!("{} arrivals -> {}", arrivals.len(), out.display());
        }
    }
    Ok(())
}

async fn replay(
    common: Common,
    url: Option<String>,
    gateway_config: Option<PathBuf>,
    concurrency: usize,
    profile: Option<String>,
) -> Result<()> {
    let arrivals = match (&common.trace, &common.config) {
        (Some(p), _) => read_trace(p)?,
        (None, Some(_)) => {
            let sim = Simulation::new(scenario(&common)?)?;
            let seed = common.seed.unwrap_or(sim.scenario().seed);
            sim.arrivals(seed)?
        }
        (None, None) => bail!("either --trace or --config <scenario.toml> is required"),
    };
    let (base, server) = match url {
        Some(u) => (u, None),
        None => {
            let path = gateway_config
                .as_deref()
                .context("--url or --gateway-config is required")?;
            let gateway = Gateway::from_config(GatewayConfig::load(path)?)?;
            let (addr, handle) = gateway.spawn("127.0.0.1:0").await?;
            (format!("http://{addr}"), Some(handle))
        }
    };
    let options = ReplayOptions {
        concurrency,
        profile,
        ..ReplayOptions::default()
    };
    let outcomes = replay_gateway(&base, &arrivals, &options).await?;
    if let Some(h) = server {
        h.abort();
    }
    let metrics = bench::compute_metrics(&outcomes)?;
    let dir = out_dir(&common, "out/replay")?;
    bench::write_outcomes(dir.join("outcomes.jsonl"), &outcomes)?;
    bench::write_json(dir.join("metrics.json"), &metrics)?;
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(())
}
